#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "falcon/core.hpp"
#include "falcon/environments.hpp"
#include "falcon/oracle.hpp"

namespace falcon {

/// Inverse-gap-weighted distribution around the greedy arm of `f`:
/// p(a|x) = 1 / (K + gamma (f(x, best) - f(x, a))) for a != best, and the
/// greedy arm takes the remaining mass.
ArmDistribution action_kernel(const OutcomeModel& f, double gamma, const Context& x);

class InverseGapKernel final : public ActionSelectionKernel {
 public:
  InverseGapKernel(ModelPtr model, double gamma);
  std::size_t num_arms() const override { return model_->num_arms(); }
  ArmDistribution probabilities(const Context& x) const override {
    return action_kernel(*model_, gamma_, x);
  }
  double gamma() const { return gamma_; }
  const ModelPtr& model() const { return model_; }

 private:
  ModelPtr model_;
  double gamma_;
};

/// delta' = delta / 13.
constexpr double delta_prime(double delta) { return delta / 13.0; }

/// sqrt(1/8): the exploitation scale used by Safe-FALCON.
inline const double kSafeGammaScale = std::sqrt(1.0 / 8.0);
/// FALCON+ baseline: gamma_m = 0.5 K / xi, inversely proportional to the rate.
inline constexpr double kFalconPlusGammaScale = 0.5;

enum class GammaForm {
  SqrtRate,     // scale sqrt(K / xi)
  InverseRate,  // scale K / xi
};

/// gamma_1 = 1; for m >= 2, xi = xi(tau_{m-1} - tau_{m-2}, delta'/m^2) enters
/// as sqrt(K / xi) or K / xi depending on `form`.
double gamma_m(int m, const EpochSchedule& schedule, const EstimationRate& rate,
               double delta_prime, std::size_t num_arms, double scale = kSafeGammaScale,
               GammaForm form = GammaForm::SqrtRate);

/// sqrt(xi(tau_{m-1} - tau_{m-2}, delta'/m^2)) for m >= 2: the per-round
/// estimation width of epoch m.
double epoch_width(int m, const EpochSchedule& schedule, const EstimationRate& rate,
                   double delta_prime);

/// Hoeffding lower bound on the mean reward of epoch m's data:
/// mean - sqrt(ln(m^2 / delta') / (2 |S_m|)). Not clamped.
double l_prime(int m, std::span<const double> rewards, double delta_prime);

struct SafeChoice {
  double l = 0.0;
  int m_hat = 0;
};

/// l_m = max(l_{m-1}, l'_m); m_hat moves to m only when l_m != l_{m-1}.
SafeChoice choose_safe(int m, double l_prime_m, double l_prev, int m_hat);
SafeChoice choose_safe(int m, std::span<const double> rewards, double l_prev, int m_hat,
                       double delta_prime);

/// {tau_{m-1} + 2^j : 2^j <= tau_m - tau_{m-1}} together with tau_m.
std::vector<std::uint64_t> safety_check_times(int m, const EpochSchedule& schedule);
bool is_safety_check_round(std::uint64_t t, int m, const EpochSchedule& schedule);

/// ln(ceil(m + log2(tau1))^3 / delta').
double confidence_log_term(int m, std::uint64_t tau1, double delta_prime);

/// Sum over rounds i = tau1 + 1 .. t of epoch_width(m(i)).
double width_sum(std::uint64_t t, const EpochSchedule& schedule, const EstimationRate& rate,
                 double delta_prime);

/// The cumulative-reward floor
/// L_t = t l_{m-1} - tau1 - sqrt(2 t log_term) - 20.3 sqrt(K) width_sum(t).
double lower_bound_L(std::uint64_t t, int m, double l_prev, const EpochSchedule& schedule,
                     const EstimationRate& rate, double delta_prime, std::size_t num_arms);

inline bool check_is_safe(double cumulative_reward, double lower_bound) {
  return cumulative_reward >= lower_bound;
}

bool check_is_safe(std::uint64_t t, int m, double l_prev, double cumulative_reward,
                   const EpochSchedule& schedule, const EstimationRate& rate,
                   double delta_prime, std::size_t num_arms);

/// Floor on the epoch-average reward over rounds tau_{m-1}+1 .. t:
/// l_{m-1} - 20.3 sqrt(K) epoch_width(m) - sqrt(2 log_term / (t - tau_{m-1})).
double avg_epoch_lower_bound(std::uint64_t t, int m, double l_prev, const EpochSchedule& schedule,
                             const EstimationRate& rate, double delta_prime,
                             std::size_t num_arms);

bool avg_epoch_check(std::uint64_t t, int m, double l_prev, double epoch_reward_sum,
                     const EpochSchedule& schedule, const EstimationRate& rate,
                     double delta_prime, std::size_t num_arms);

inline constexpr double kRegretConstant = 20.3;

struct AlgorithmConfig {
  std::uint64_t tau1 = 2;
  double delta = 0.05;
  bool enable_avg_epoch_test = false;
  std::uint64_t horizon = 1024;

  void validate() const;
};

/// Knobs of the shared epoch loop. Safe-FALCON and FALCON+ are two settings.
struct LoopOptions {
  std::string name = "safe-falcon";
  double gamma_scale = kSafeGammaScale;
  GammaForm gamma_form = GammaForm::SqrtRate;
  bool cumulative_test = true;
  bool avg_epoch_test = false;
};

RunTrace run_epoch_loop(const BanditEnvironment& env, const RegressionOracle& oracle,
                        const AlgorithmConfig& config, const LoopOptions& options,
                        std::uint64_t seed);

/// Safe-FALCON: the epoch loop with Check-is-safe and Choose-safe. The average-per-epoch
/// test joins the cumulative one when `config.enable_avg_epoch_test`.
RunTrace run_safe_falcon(const BanditEnvironment& env, const RegressionOracle& oracle,
                         const AlgorithmConfig& config, std::uint64_t seed);

/// Same loop without any safety machinery and with the FALCON+ gamma.
RunTrace run_falcon_plus(const BanditEnvironment& env, const RegressionOracle& oracle,
                         const AlgorithmConfig& config, std::uint64_t seed);

}  // namespace falcon
