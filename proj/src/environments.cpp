#include "falcon/environments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace falcon {

ArmIndex BanditEnvironment::optimal_arm(const Context& x) const {
  std::vector<double> means(num_arms());
  for (std::size_t a = 0; a < means.size(); ++a) means[a] = mean_reward(x, ArmIndex{a});
  return argmax_lowest(means);
}

std::pair<Context, RewardVector> sample_round(const BanditEnvironment& env, Rng& rng) {
  Context x = env.sample_context(rng);
  RewardVector r = env.sample_rewards(x, rng);
  return {std::move(x), std::move(r)};
}

// Intro example -------------------------------------------------------------

Context IntroExampleEnv::sample_context(Rng& rng) const { return {rng.uniform()}; }

RewardVector IntroExampleEnv::sample_rewards(const Context& x, Rng& rng) const {
  RewardVector r(2);
  for (std::size_t a = 0; a < 2; ++a) r[a] = mean_reward(x, ArmIndex{a}) + noise_sd_ * rng.normal();
  return r;
}

double IntroExampleEnv::mean_reward(const Context& x, ArmIndex a) const {
  if (a.value == 0) return x.at(0) > 0.5 ? 1.0 : 0.0;
  if (a.value == 1) return 0.5;
  throw std::out_of_range("intro example has two arms");
}

// Lower-bound family ----------------------------------------------------------

double lower_bound_alpha(std::size_t num_arms, double b) {
  if (num_arms < 2) throw std::invalid_argument("lower-bound instance needs K >= 2");
  const double k = static_cast<double>(num_arms);
  if (!(b >= 0.0 && b <= 1.0 / (2.0 * k))) {
    throw std::invalid_argument("lower-bound instance needs B in [0, 1/(2K)]");
  }
  return std::sqrt(k * k * b / (k - 1.0));
}

LowerBoundEnv::LowerBoundEnv(std::size_t num_arms, double b)
    : k_(num_arms), b_(b), alpha_(lower_bound_alpha(num_arms, b)) {}

Context LowerBoundEnv::sample_context(Rng& rng) const {
  // Open interval (0, K): reject the single point 0.
  double u = rng.uniform();
  while (u <= 0.0) u = rng.uniform();
  return {u * static_cast<double>(k_)};
}

RewardVector LowerBoundEnv::sample_rewards(const Context& x, Rng&) const {
  RewardVector r(k_, 0.0);
  r[cell_of(x.at(0)).value] = alpha_;
  return r;
}

ArmIndex LowerBoundEnv::cell_of(double x) const {
  // (a, a + 1] -> a, so integers belong to the lower cell.
  const double c = std::ceil(x) - 1.0;
  const auto a = static_cast<std::size_t>(std::clamp(c, 0.0, static_cast<double>(k_ - 1)));
  return ArmIndex{a};
}

double LowerBoundEnv::mean_reward(const Context& x, ArmIndex a) const {
  if (a.value >= k_) throw std::out_of_range("arm out of range");
  return cell_of(x.at(0)) == a ? alpha_ : 0.0;
}

double LowerBoundEnv::per_arm_variance() const {
  const double k = static_cast<double>(k_);
  return alpha_ * alpha_ * (k - 1.0) / (k * k);
}

// Realizable linear ------------------------------------------------------------

RealizableLinearEnv::RealizableLinearEnv(std::vector<double> intercepts,
                                         std::vector<std::vector<double>> slopes)
    : intercepts_(std::move(intercepts)), slopes_(std::move(slopes)) {
  if (intercepts_.empty() || intercepts_.size() != slopes_.size()) {
    throw std::invalid_argument("one intercept and one slope vector per arm");
  }
  dim_ = slopes_.front().size();
  for (std::size_t a = 0; a < slopes_.size(); ++a) {
    if (slopes_[a].size() != dim_) throw std::invalid_argument("slope dimensions differ");
    double lo = intercepts_[a];
    double hi = intercepts_[a];
    for (double w : slopes_[a]) {
      lo += std::min(w, 0.0);
      hi += std::max(w, 0.0);
    }
    if (lo < 0.1 - 1e-12 || hi > 0.9 + 1e-12) {
      throw std::invalid_argument("realizable arm mean leaves [0.1, 0.9] on the unit cube");
    }
  }
}

Context RealizableLinearEnv::sample_context(Rng& rng) const {
  Context x(dim_);
  for (auto& v : x) v = rng.uniform();
  return x;
}

RewardVector RealizableLinearEnv::sample_rewards(const Context& x, Rng& rng) const {
  RewardVector r(intercepts_.size());
  for (std::size_t a = 0; a < r.size(); ++a) {
    r[a] = std::clamp(mean_reward(x, ArmIndex{a}) + rng.uniform(-0.1, 0.1), 0.0, 1.0);
  }
  return r;
}

double RealizableLinearEnv::mean_reward(const Context& x, ArmIndex a) const {
  const auto& w = slopes_.at(a.value);
  double y = intercepts_[a.value];
  for (std::size_t j = 0; j < dim_; ++j) y += w[j] * x.at(j);
  return y;
}

std::shared_ptr<const RealizableLinearEnv> realizable_linear_env(std::size_t num_arms,
                                                                 std::size_t dim,
                                                                 std::uint64_t coefficient_seed) {
  if (num_arms == 0 || dim == 0) throw std::invalid_argument("need K >= 1 and dim >= 1");
  Rng rng(coefficient_seed ^ 0x5eed5eed5eed5eedULL);
  std::vector<double> intercepts(num_arms);
  std::vector<std::vector<double>> slopes(num_arms, std::vector<double>(dim));
  for (std::size_t a = 0; a < num_arms; ++a) {
    double raw_lo = 0.0;
    double raw_hi = 0.0;
    for (auto& w : slopes[a]) {
      w = rng.uniform(-1.0, 1.0);
      raw_lo += std::min(w, 0.0);
      raw_hi += std::max(w, 0.0);
    }
    // Map the raw range of w . x onto a random sub-interval of [0.1, 0.9].
    double lo = rng.uniform(0.1, 0.9);
    double hi = rng.uniform(0.1, 0.9);
    if (lo > hi) std::swap(lo, hi);
    const double span = raw_hi - raw_lo;
    const double s = span > 0.0 ? (hi - lo) / span : 0.0;
    for (auto& w : slopes[a]) w *= s;
    intercepts[a] = lo - s * raw_lo;
  }
  return std::make_shared<const RealizableLinearEnv>(std::move(intercepts), std::move(slopes));
}

// Tabular ---------------------------------------------------------------------

TabularEnv::TabularEnv(std::vector<double> weights, std::vector<std::vector<double>> means)
    : weights_(std::move(weights)), means_(std::move(means)) {
  if (weights_.empty() || weights_.size() != means_.size()) {
    throw std::invalid_argument("one mean row per context");
  }
  require_distribution(weights_, 1e-12);
  k_ = means_.front().size();
  if (k_ == 0) throw std::invalid_argument("tabular environment needs arms");
  for (const auto& row : means_) {
    if (row.size() != k_) throw std::invalid_argument("ragged mean table");
    for (double v : row) {
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("Bernoulli mean outside [0, 1]");
    }
  }
}

std::size_t TabularEnv::index_of(const Context& x) const {
  const double v = x.at(0);
  const auto i = static_cast<std::size_t>(std::llround(v));
  if (v < 0.0 || i >= weights_.size()) throw std::out_of_range("context not in the table");
  return i;
}

Context TabularEnv::sample_context(Rng& rng) const {
  const double u = rng.uniform();
  return context_for(sample_arm(weights_, u).value);
}

RewardVector TabularEnv::sample_rewards(const Context& x, Rng& rng) const {
  const auto& row = means_[index_of(x)];
  RewardVector r(k_);
  for (std::size_t a = 0; a < k_; ++a) r[a] = rng.uniform() < row[a] ? 1.0 : 0.0;
  return r;
}

double TabularEnv::mean_reward(const Context& x, ArmIndex a) const {
  return means_[index_of(x)].at(a.value);
}

}  // namespace falcon
