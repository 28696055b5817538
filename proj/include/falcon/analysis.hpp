#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "falcon/algorithms.hpp"
#include "falcon/core.hpp"
#include "falcon/environments.hpp"
#include "falcon/oracle.hpp"

namespace falcon {

// ---------------------------------------------------------------------------
// Tabular brute force. Tables are indexed [context][arm].

using KernelTable = std::vector<std::vector<double>>;
using ModelTable = std::vector<std::vector<double>>;
/// Deterministic policy: chosen arm per context index.
using Policy = std::vector<std::size_t>;

KernelTable tabulate(const ActionSelectionKernel& p, const TabularEnv& env);
ModelTable tabulate(const OutcomeModel& f, const TabularEnv& env);
ModelTable true_model_table(const TabularEnv& env);

/// Greedy policy pi_f on every context.
Policy greedy_policy(const ModelTable& f);

/// R_f(pi) = E_x f(x, pi(x)).
double policy_value(const ModelTable& f, const Policy& pi, const TabularEnv& env);
/// Reg_f(pi) = E_x [f(x, pi_f(x)) - f(x, pi(x))].
double policy_regret(const ModelTable& f, const Policy& pi, const TabularEnv& env);
/// E_x sum_a p(a|x) (f(x, pi_f(x)) - f(x, a)).
double kernel_regret(const KernelTable& p, const ModelTable& f, const TabularEnv& env);
/// E_x sum_a p(a|x) (f(x, a) - f*(x, a))^2.
double kernel_weighted_mse(const KernelTable& p, const ModelTable& f, const TabularEnv& env);

/// Q_p over Psi = A^X. Policy index i encodes pi(x) as the x-th base-K digit.
struct PolicyDistribution {
  std::size_t num_contexts = 0;
  std::size_t num_arms = 0;
  std::vector<double> probability;

  std::size_t size() const { return probability.size(); }
  Policy policy(std::size_t index) const;
};

/// Largest |Psi| that policy_distribution will enumerate (3^6).
inline constexpr std::size_t kMaxPolicies = 729;

/// Product measure Q_p(pi) = prod_x p(pi(x)|x). Throws std::length_error
/// when |A|^|X| exceeds kMaxPolicies.
PolicyDistribution policy_distribution(const KernelTable& p, const TabularEnv& env);
/// p(a|x) = sum_pi 1{pi(x) = a} Q(pi).
KernelTable marginalize(const PolicyDistribution& q);

/// V(p, pi) = E_x [1 / p(pi(x)|x)]. Throws std::domain_error if pi plays a
/// zero-probability arm on a context with positive weight.
double expected_inverse_probability(const KernelTable& p, const Policy& pi,
                                    const TabularEnv& env);

/// Model class over a tabular instance, exposed through its best response to
/// a kernel: argmin_f E_x E_{a~p} (f - f*)^2.
class TabularModelClass {
 public:
  virtual ~TabularModelClass() = default;
  virtual ModelTable best_fit(const KernelTable& p, const TabularEnv& env) const = 0;
};

/// Finite F; best_fit enumerates its members.
class FiniteModelClass final : public TabularModelClass {
 public:
  explicit FiniteModelClass(std::vector<ModelTable> members);
  ModelTable best_fit(const KernelTable& p, const TabularEnv& env) const override;
  const std::vector<ModelTable>& members() const { return members_; }

 private:
  std::vector<ModelTable> members_;
};

/// Models that ignore the context: f(x, a) = c_a with c_a in [0, 1]. The best
/// response is the p-weighted mean of f*(., a) per arm.
class ContextConstantClass final : public TabularModelClass {
 public:
  ModelTable best_fit(const KernelTable& p, const TabularEnv& env) const override;
};

/// Finite inner approximation of K(F): greedy kernels of each member, the
/// uniform kernel, and inverse-gap kernels of each member for every gamma.
std::vector<KernelTable> inner_kernel_family(const TabularEnv& env,
                                             const std::vector<ModelTable>& models,
                                             std::span<const double> gamma_grid);

/// Context-independent kernels p(a|x) = g(a), one per distribution.
std::vector<KernelTable> arm_constant_kernels(const TabularEnv& env,
                                              std::span<const ArmDistribution> distributions);

/// sqrt(max over the kernel family of min over F of the weighted MSE).
double average_misspecification_tabular(const TabularEnv& env, const TabularModelClass& models,
                                        std::span<const KernelTable> kernels);
/// Overload for a finite model list; throws if the list is empty.
double average_misspecification_tabular(const TabularEnv& env,
                                        const std::vector<ModelTable>& models,
                                        std::span<const KernelTable> kernels);

/// LowerBoundEnv on `cells_per_arm` equal cells per unit interval. f* is
/// constant on each unit interval, so expectations are exact.
TabularEnv discretize(const LowerBoundEnv& env, std::size_t cells_per_arm);

/// Expected instantaneous regret of the randomized policy induced by the
/// arm distribution g on the lower-bound instance: sum_a g(a)(R(pi*) - R(a)).
/// Equals sqrt((K - 1) B) for every g and is checked against sqrt(KB / 2).
double lower_bound_instance_regret(std::size_t num_arms, double b, std::span<const double> g);

// ---------------------------------------------------------------------------
// m*

struct MStar {
  enum class Kind { Finite, Unbounded, Undefined };
  Kind kind = Kind::Undefined;
  /// For Finite, m*; for Unbounded, the cap the scan reached.
  int m = 0;
};

/// m* = max{m : B <= xi(tau_m - tau_{m-1}, delta'/m^2)}, scanning m <= m_cap.
/// Unbounded when the condition still holds at the cap (always when B = 0);
/// Undefined when it never holds.
MStar m_star(double b, const EpochSchedule& schedule, const EstimationRate& rate,
             double delta_prime, int m_cap = 60);

// ---------------------------------------------------------------------------
// Per-epoch regret summaries.

struct EpochSummary {
  int epoch = 0;
  /// Nominal epoch length from the schedule.
  std::uint64_t rounds = 0;
  double mean_realized_regret = 0.0;
  double mean_expected_regret = 0.0;
  /// Rounds actually present (less than `rounds` for a truncated epoch).
  std::uint64_t count = 0;
};

std::vector<EpochSummary> epoch_summaries(const RunTrace& trace);

struct EpochAggregate {
  int epoch = 0;
  std::size_t runs = 0;
  double mean = 0.0;
  /// Half-width of the normal-approximation 95% interval across runs.
  double ci_half_width = 0.0;
  double mean_expected = 0.0;
};

inline constexpr double kNormal975 = 1.959963984540054;

/// Per-epoch mean and 95% interval across runs. Throws std::invalid_argument
/// when the summaries disagree on epochs.
std::vector<EpochAggregate> aggregate_summaries(
    std::span<const std::vector<EpochSummary>> per_run);
/// Same, from traces; throws when their tags differ.
std::vector<EpochAggregate> aggregate_runs(std::span<const RunTrace> traces);

struct SlopeEstimate {
  double slope = 0.0;
  double ci_half_width = 0.0;
  bool contains(double v) const {
    return slope - ci_half_width <= v && v <= slope + ci_half_width;
  }
};

/// Weighted least-squares slope of y on x with a Student-t 95% interval.
/// Needs at least three points.
SlopeEstimate weighted_slope(std::span<const double> x, std::span<const double> y,
                             std::span<const double> w);

}  // namespace falcon
