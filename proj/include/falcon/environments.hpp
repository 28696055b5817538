#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "falcon/core.hpp"
#include "falcon/random.hpp"

namespace falcon {

/// Stochastic contextual bandit instance: a context distribution D_X, the
/// conditional means f*, and a sampler for the full reward vector.
class BanditEnvironment {
 public:
  virtual ~BanditEnvironment() = default;

  virtual std::string id() const = 0;
  virtual std::size_t num_arms() const = 0;
  virtual std::size_t context_dim() const = 0;

  virtual Context sample_context(Rng& rng) const = 0;
  /// Realized rewards of every arm given the context.
  virtual RewardVector sample_rewards(const Context& x, Rng& rng) const = 0;
  /// f*(x, a).
  virtual double mean_reward(const Context& x, ArmIndex a) const = 0;

  /// R(pi*) when known in closed form.
  virtual std::optional<double> optimal_value() const { return std::nullopt; }

  ArmIndex optimal_arm(const Context& x) const;
};

using EnvPtr = std::shared_ptr<const BanditEnvironment>;

/// x_t and the full reward vector r_t for one round.
std::pair<Context, RewardVector> sample_round(const BanditEnvironment& env, Rng& rng);

/// f* of an environment viewed as an OutcomeModel.
class TrueModel final : public OutcomeModel {
 public:
  explicit TrueModel(EnvPtr env) : env_(std::move(env)) {}
  std::size_t num_arms() const override { return env_->num_arms(); }
  double raw(const Context& x, ArmIndex a) const override { return env_->mean_reward(x, a); }

 private:
  EnvPtr env_;
};

/// Two arms, x ~ U[0, 1]. Arm 0 pays 1{x > 0.5}, arm 1 pays 0.5, and each
/// arm's realized reward carries independent N(0, 1) noise.
class IntroExampleEnv final : public BanditEnvironment {
 public:
  explicit IntroExampleEnv(double noise_sd = 1.0) : noise_sd_(noise_sd) {}

  std::string id() const override { return "intro"; }
  std::size_t num_arms() const override { return 2; }
  std::size_t context_dim() const override { return 1; }
  Context sample_context(Rng& rng) const override;
  RewardVector sample_rewards(const Context& x, Rng& rng) const override;
  double mean_reward(const Context& x, ArmIndex a) const override;
  std::optional<double> optimal_value() const override { return 0.75; }

 private:
  double noise_sd_;
};

/// Hard instance for the misspecification lower bound: X = (0, K) uniform,
/// f*(x, a) = alpha on (a, a + 1] (0-based arms) and 0 elsewhere, with
/// alpha = sqrt(K^2 B / (K - 1)). Rewards are noiseless.
class LowerBoundEnv final : public BanditEnvironment {
 public:
  LowerBoundEnv(std::size_t num_arms, double b);

  std::string id() const override { return "lower-bound"; }
  std::size_t num_arms() const override { return k_; }
  std::size_t context_dim() const override { return 1; }
  Context sample_context(Rng& rng) const override;
  RewardVector sample_rewards(const Context& x, Rng& rng) const override;
  double mean_reward(const Context& x, ArmIndex a) const override;
  std::optional<double> optimal_value() const override { return alpha_; }

  double alpha() const { return alpha_; }
  double b() const { return b_; }
  /// alpha^2 (K - 1) / K^2, the variance of f*(., a) under D_X.
  double per_arm_variance() const;
  /// Arm whose interval contains x; x in (a, a + 1] maps to a.
  ArmIndex cell_of(double x) const;

 private:
  std::size_t k_;
  double b_;
  double alpha_;
};

double lower_bound_alpha(std::size_t num_arms, double b);

/// f*(x, a) = intercept_a + slope_a . x with x ~ U[0, 1]^dim and rewards
/// mean + U(-0.1, 0.1) clamped to [0, 1].
class RealizableLinearEnv final : public BanditEnvironment {
 public:
  RealizableLinearEnv(std::vector<double> intercepts, std::vector<std::vector<double>> slopes);

  std::string id() const override { return "realizable"; }
  std::size_t num_arms() const override { return intercepts_.size(); }
  std::size_t context_dim() const override { return dim_; }
  Context sample_context(Rng& rng) const override;
  RewardVector sample_rewards(const Context& x, Rng& rng) const override;
  double mean_reward(const Context& x, ArmIndex a) const override;

  const std::vector<double>& intercepts() const { return intercepts_; }
  const std::vector<std::vector<double>>& slopes() const { return slopes_; }

 private:
  std::vector<double> intercepts_;
  std::vector<std::vector<double>> slopes_;
  std::size_t dim_;
};

/// Random affine arms whose means stay inside [0.1, 0.9] on [0, 1]^dim.
std::shared_ptr<const RealizableLinearEnv> realizable_linear_env(std::size_t num_arms,
                                                                 std::size_t dim,
                                                                 std::uint64_t coefficient_seed);

/// Finite context set with explicit weights, explicit f* table, and
/// Bernoulli rewards. The context passed around is the 1-d value {index}.
class TabularEnv final : public BanditEnvironment {
 public:
  TabularEnv(std::vector<double> weights, std::vector<std::vector<double>> means);

  std::string id() const override { return "tabular"; }
  std::size_t num_arms() const override { return k_; }
  std::size_t context_dim() const override { return 1; }
  Context sample_context(Rng& rng) const override;
  RewardVector sample_rewards(const Context& x, Rng& rng) const override;
  double mean_reward(const Context& x, ArmIndex a) const override;

  std::size_t num_contexts() const { return weights_.size(); }
  double weight(std::size_t i) const { return weights_[i]; }
  double mean(std::size_t i, ArmIndex a) const { return means_[i][a.value]; }
  const std::vector<std::vector<double>>& means() const { return means_; }
  static Context context_for(std::size_t i) { return {static_cast<double>(i)}; }
  std::size_t index_of(const Context& x) const;

 private:
  std::vector<double> weights_;
  std::vector<std::vector<double>> means_;
  std::size_t k_;
};

}  // namespace falcon
