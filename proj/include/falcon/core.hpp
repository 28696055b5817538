#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace falcon {

/// Index of an arm, 0-based. Valid values are `[0, K)` for the owning
/// environment's arm count K.
struct ArmIndex {
  std::size_t value = 0;

  constexpr ArmIndex() = default;
  constexpr explicit ArmIndex(std::size_t v) : value(v) {}
  constexpr auto operator<=>(const ArmIndex&) const = default;
};

/// A context is a real vector whose dimension is fixed per environment.
using Context = std::vector<double>;

/// Realized reward for every arm at one round. Entries are nominally in
/// [0, 1] but environments with Gaussian noise may leave that range.
using RewardVector = std::vector<double>;

/// Probability vector over the arms for one context.
using ArmDistribution = std::vector<double>;

/// Conditional mean reward model f: X x A -> [0, 1].
///
/// Implementations provide `raw()`; callers use `value()`, which clamps to
/// [0, 1] so fitted linear models never produce out-of-range predictions.
class OutcomeModel {
 public:
  virtual ~OutcomeModel() = default;

  virtual std::size_t num_arms() const = 0;
  virtual double raw(const Context& x, ArmIndex a) const = 0;

  double value(const Context& x, ArmIndex a) const;
  /// All arms at once, clamped.
  std::vector<double> values(const Context& x) const;
};

using ModelPtr = std::shared_ptr<const OutcomeModel>;

/// f(x, a) = c for every input. The epoch loop starts from the zero model.
class ConstantModel final : public OutcomeModel {
 public:
  ConstantModel(std::size_t num_arms, double c) : num_arms_(num_arms), c_(c) {}
  std::size_t num_arms() const override { return num_arms_; }
  double raw(const Context&, ArmIndex) const override { return c_; }

 private:
  std::size_t num_arms_;
  double c_;
};

/// Lowest-index argmax of f(x, .).
ArmIndex greedy_policy(const OutcomeModel& f, const Context& x);
ArmIndex argmax_lowest(std::span<const double> values);

/// Per-context distribution over arms.
class ActionSelectionKernel {
 public:
  virtual ~ActionSelectionKernel() = default;
  virtual std::size_t num_arms() const = 0;
  virtual ArmDistribution probabilities(const Context& x) const = 0;
};

using KernelPtr = std::shared_ptr<const ActionSelectionKernel>;

class UniformKernel final : public ActionSelectionKernel {
 public:
  explicit UniformKernel(std::size_t num_arms) : num_arms_(num_arms) {}
  std::size_t num_arms() const override { return num_arms_; }
  ArmDistribution probabilities(const Context&) const override;

 private:
  std::size_t num_arms_;
};

/// Deterministic kernel that always plays pi_f(x).
class GreedyKernel final : public ActionSelectionKernel {
 public:
  explicit GreedyKernel(ModelPtr model) : model_(std::move(model)) {}
  std::size_t num_arms() const override { return model_->num_arms(); }
  ArmDistribution probabilities(const Context& x) const override;

 private:
  ModelPtr model_;
};

/// Context-independent kernel p(a|x) = g(a).
class FixedKernel final : public ActionSelectionKernel {
 public:
  explicit FixedKernel(ArmDistribution g);
  std::size_t num_arms() const override { return g_.size(); }
  ArmDistribution probabilities(const Context&) const override { return g_; }

 private:
  ArmDistribution g_;
};

/// Throws std::invalid_argument unless `p` is nonnegative and sums to 1
/// within `tol`.
void require_distribution(std::span<const double> p, double tol = 1e-12);

/// Inverse-CDF draw: first arm whose cumulative mass exceeds `u` in [0, 1).
ArmIndex sample_arm(std::span<const double> p, double u);

/// Doubling epoch schedule: tau_0 = 0, tau_1 given, tau_{m+1} = 2 tau_m.
class EpochSchedule {
 public:
  explicit EpochSchedule(std::uint64_t tau1);

  std::uint64_t tau1() const { return tau1_; }
  /// tau_m for m >= 0.
  std::uint64_t tau(int m) const;
  /// Rounds in epoch m, i.e. tau_m - tau_{m-1}.
  std::uint64_t length(int m) const { return tau(m) - tau(m - 1); }
  /// m(t) = min{m | t <= tau_m} for t >= 1.
  int epoch_of(std::uint64_t t) const;

 private:
  std::uint64_t tau1_;
};

inline int epoch_of(std::uint64_t t, const EpochSchedule& schedule) {
  return schedule.epoch_of(t);
}

/// One round of a run. `safe` and `m_hat` are the state at round end.
struct RoundRecord {
  std::uint64_t t = 0;
  int epoch = 0;
  Context context;
  ArmIndex action;
  double realized_reward = 0.0;
  RewardVector rewards;
  ArmIndex optimal_arm;
  double optimal_mean_reward = 0.0;
  /// E_{a~p(.|x_t)}[f*(x_t, pi*(x_t)) - f*(x_t, a)] for the kernel used.
  double expected_regret = 0.0;
  bool safe = true;
  int m_hat = 0;
  /// Index m of the kernel p_m that selected this round's arm.
  int kernel_epoch = 0;

  double realized_regret() const {
    return rewards[optimal_arm.value] - rewards[action.value];
  }
};

/// Identifies the setting a trace was produced under; traces are only
/// aggregated when their tags agree.
struct TraceTag {
  std::string algorithm;
  std::string environment;
  std::uint64_t tau1 = 2;
  double delta = 0.05;
  std::uint64_t horizon = 0;

  bool operator==(const TraceTag&) const = default;
};

struct RunTrace {
  TraceTag tag;
  std::vector<RoundRecord> rounds;
  /// First round whose safety check failed, if any.
  std::optional<std::uint64_t> detection_round;
  int final_m_hat = 0;
  /// kernels[m] is p_m for every epoch that started safe; kernels[0] is the
  /// uniform fallback.
  std::vector<KernelPtr> kernels;

  /// Throws std::logic_error if rounds are not contiguous from 1, epochs
  /// disagree with the schedule, or the safe flag ever goes back to true.
  void validate() const;
};

}  // namespace falcon
