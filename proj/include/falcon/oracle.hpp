#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "falcon/core.hpp"

namespace falcon {

/// One logged interaction (x_t, a_t, r_t(a_t)).
struct Sample {
  Context context;
  ArmIndex arm;
  double reward = 0.0;
};

/// Estimation rate xi(n, zeta) of a regression oracle: a high-probability
/// bound on the excess squared error after fitting on n samples.
class EstimationRate {
 public:
  virtual ~EstimationRate() = default;
  /// Callers go through `xi()`, which checks the domain.
  virtual double evaluate(std::uint64_t n, double zeta) const = 0;
  virtual std::string describe() const = 0;
};

/// xi checked: throws std::invalid_argument if n == 0 or zeta is not in (0, 1).
double xi(const EstimationRate& rate, std::uint64_t n, double zeta);

/// 1 - zeta quantile of chi-squared(2) / n, i.e. 2 ln(1/zeta) / n.
///
/// The chi-squared(2) tail is exp(-x/2), so the quantile has a closed form.
class ChiSquared2Rate final : public EstimationRate {
 public:
  double evaluate(std::uint64_t n, double zeta) const override;
  std::string describe() const override { return "chi2(2) quantile / n"; }
};

/// C ln^rho'(n) ln(1/zeta) comp / n^rho for n >= n0, and 1 below n0.
struct CommonRateParams {
  double c = 1.0;
  double rho = 1.0;
  double rho_prime = 0.0;
  double complexity = 1.0;
  std::uint64_t n0 = 1;
};

class CommonRate final : public EstimationRate {
 public:
  explicit CommonRate(CommonRateParams params);
  double evaluate(std::uint64_t n, double zeta) const override;
  std::string describe() const override;
  const CommonRateParams& params() const { return params_; }

 private:
  CommonRateParams params_;
};

/// Arbitrary rate from a callable; mostly for tests and experiments.
class FunctionRate final : public EstimationRate {
 public:
  FunctionRate(std::function<double(std::uint64_t, double)> fn, std::string name)
      : fn_(std::move(fn)), name_(std::move(name)) {}
  double evaluate(std::uint64_t n, double zeta) const override { return fn_(n, zeta); }
  std::string describe() const override { return name_; }

 private:
  std::function<double(std::uint64_t, double)> fn_;
  std::string name_;
};

struct RateViolation {
  enum class Condition { NonIncreasing, LowerBound };
  Condition condition;
  std::uint64_t n = 0;
  double zeta = 0.0;
  /// xi value at the violation.
  double value = 0.0;
  /// The value it had to respect: xi at n-1 for monotonicity, ln(1/zeta)/n
  /// for the floor.
  double reference = 0.0;
};

struct RateValidationReport {
  bool passed = true;
  std::optional<RateViolation> violation;
  std::uint64_t evaluations = 0;

  std::string summary() const;
};

/// Checks both validity conditions of an estimation rate on a grid.
///
/// Monotonicity: n -> xi(n, delta/ln n) must be non-increasing for
/// n in [monotone_from, n_max]. Floor: xi(n, zeta) >= ln(1/zeta)/n for every
/// n in [2, n_max] over a fixed zeta grid plus zeta = delta/ln n.
/// Pairs where delta/ln n falls outside (0, 1) are skipped.
RateValidationReport validate_rate(const EstimationRate& rate, double delta,
                                   std::uint64_t n_max,
                                   std::uint64_t monotone_from = 3);

/// Offline regression oracle: fits a model in its class F from logged data.
class RegressionOracle {
 public:
  virtual ~RegressionOracle() = default;
  virtual ModelPtr fit(std::span<const Sample> data) const = 0;
  virtual const EstimationRate& rate() const = 0;
};

/// Per-arm affine model f(x, a) = intercept_a + slope_a . x.
class LinearPerArmModel final : public OutcomeModel {
 public:
  struct ArmFit {
    double intercept = 0.5;
    std::vector<double> slope;
    std::size_t samples = 0;
  };

  explicit LinearPerArmModel(std::vector<ArmFit> arms) : arms_(std::move(arms)) {}

  std::size_t num_arms() const override { return arms_.size(); }
  double raw(const Context& x, ArmIndex a) const override;
  const ArmFit& arm(ArmIndex a) const { return arms_.at(a.value); }

 private:
  std::vector<ArmFit> arms_;
};

/// Ordinary least squares of reward on (1, x), separately for each arm.
///
/// An arm without samples predicts 0.5. An arm whose contexts span no
/// direction (for example, all identical) gets the intercept-only fit; in
/// general the slope is the minimum-norm least-squares solution.
class LinearPerArmOracle final : public RegressionOracle {
 public:
  LinearPerArmOracle(std::size_t num_arms, std::size_t context_dim);

  ModelPtr fit(std::span<const Sample> data) const override;
  const EstimationRate& rate() const override { return rate_; }

  std::shared_ptr<const LinearPerArmModel> fit_linear(std::span<const Sample> data) const;

 private:
  std::size_t num_arms_;
  std::size_t dim_;
  ChiSquared2Rate rate_;
};

/// fit() on the oracle; throws std::invalid_argument on empty data.
ModelPtr fit(const RegressionOracle& oracle, std::span<const Sample> data);

}  // namespace falcon
