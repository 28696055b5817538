#include "falcon/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace falcon {

ArmDistribution action_kernel(const OutcomeModel& f, double gamma, const Context& x) {
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  const auto values = f.values(x);
  const std::size_t k = values.size();
  const auto best = argmax_lowest(values).value;
  ArmDistribution p(k, 0.0);
  double rest = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    if (a == best) continue;
    p[a] = 1.0 / (static_cast<double>(k) + gamma * (values[best] - values[a]));
    rest += p[a];
  }
  p[best] = 1.0 - rest;
  return p;
}

InverseGapKernel::InverseGapKernel(ModelPtr model, double gamma)
    : model_(std::move(model)), gamma_(gamma) {
  if (!model_) throw std::invalid_argument("kernel needs a model");
  if (!(gamma_ > 0.0)) throw std::invalid_argument("gamma must be positive");
}

double epoch_width(int m, const EpochSchedule& schedule, const EstimationRate& rate,
                   double delta_prime) {
  if (m < 2) throw std::invalid_argument("epoch width is defined for m >= 2");
  const double dm = static_cast<double>(m);
  return std::sqrt(xi(rate, schedule.length(m - 1), delta_prime / (dm * dm)));
}

double gamma_m(int m, const EpochSchedule& schedule, const EstimationRate& rate,
               double delta_prime, std::size_t num_arms, double scale, GammaForm form) {
  if (m < 1) throw std::invalid_argument("epochs are numbered from 1");
  if (m == 1) return 1.0;
  const double width = epoch_width(m, schedule, rate, delta_prime);
  const double k = static_cast<double>(num_arms);
  if (form == GammaForm::InverseRate) return scale * k / (width * width);
  return scale * std::sqrt(k) / width;
}

double l_prime(int m, std::span<const double> rewards, double delta_prime) {
  if (rewards.empty()) throw std::invalid_argument("l' needs a non-empty epoch dataset");
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  const double dm = static_cast<double>(m);
  return mean - std::sqrt(std::log(dm * dm / delta_prime) / (2.0 * n));
}

SafeChoice choose_safe(int m, double l_prime_m, double l_prev, int m_hat) {
  SafeChoice out{std::max(l_prev, l_prime_m), m_hat};
  if (out.l != l_prev) out.m_hat = m;
  return out;
}

SafeChoice choose_safe(int m, std::span<const double> rewards, double l_prev, int m_hat,
                       double delta_prime) {
  return choose_safe(m, l_prime(m, rewards, delta_prime), l_prev, m_hat);
}

std::vector<std::uint64_t> safety_check_times(int m, const EpochSchedule& schedule) {
  if (m < 2) throw std::invalid_argument("safety checks start in epoch 2");
  const std::uint64_t start = schedule.tau(m - 1);
  const std::uint64_t len = schedule.length(m);
  std::vector<std::uint64_t> out;
  for (std::uint64_t offset = 1; offset <= len; offset <<= 1) out.push_back(start + offset);
  if (out.back() != start + len) out.push_back(start + len);
  return out;
}

bool is_safety_check_round(std::uint64_t t, int m, const EpochSchedule& schedule) {
  const std::uint64_t start = schedule.tau(m - 1);
  if (t <= start || t > schedule.tau(m)) return false;
  const std::uint64_t offset = t - start;
  return (offset & (offset - 1)) == 0 || t == schedule.tau(m);
}

double confidence_log_term(int m, std::uint64_t tau1, double delta_prime) {
  const double c = std::ceil(static_cast<double>(m) + std::log2(static_cast<double>(tau1)));
  return std::log(c * c * c / delta_prime);
}

double width_sum(std::uint64_t t, const EpochSchedule& schedule, const EstimationRate& rate,
                 double delta_prime) {
  double total = 0.0;
  if (t <= schedule.tau1()) return total;
  const int last = schedule.epoch_of(t);
  for (int j = 2; j <= last; ++j) {
    const std::uint64_t end = std::min(schedule.tau(j), t);
    const std::uint64_t rounds = end - schedule.tau(j - 1);
    total += static_cast<double>(rounds) * epoch_width(j, schedule, rate, delta_prime);
  }
  return total;
}

double lower_bound_L(std::uint64_t t, int m, double l_prev, const EpochSchedule& schedule,
                     const EstimationRate& rate, double delta_prime, std::size_t num_arms) {
  const double dt = static_cast<double>(t);
  return dt * l_prev - static_cast<double>(schedule.tau1()) -
         std::sqrt(2.0 * dt * confidence_log_term(m, schedule.tau1(), delta_prime)) -
         kRegretConstant * std::sqrt(static_cast<double>(num_arms)) *
             width_sum(t, schedule, rate, delta_prime);
}

bool check_is_safe(std::uint64_t t, int m, double l_prev, double cumulative_reward,
                   const EpochSchedule& schedule, const EstimationRate& rate,
                   double delta_prime, std::size_t num_arms) {
  return check_is_safe(cumulative_reward,
                       lower_bound_L(t, m, l_prev, schedule, rate, delta_prime, num_arms));
}

double avg_epoch_lower_bound(std::uint64_t t, int m, double l_prev, const EpochSchedule& schedule,
                             const EstimationRate& rate, double delta_prime,
                             std::size_t num_arms) {
  const double elapsed = static_cast<double>(t - schedule.tau(m - 1));
  if (!(elapsed >= 1.0)) throw std::invalid_argument("round is not inside epoch m");
  return l_prev -
         kRegretConstant * std::sqrt(static_cast<double>(num_arms)) *
             epoch_width(m, schedule, rate, delta_prime) -
         std::sqrt(2.0 / elapsed * confidence_log_term(m, schedule.tau1(), delta_prime));
}

bool avg_epoch_check(std::uint64_t t, int m, double l_prev, double epoch_reward_sum,
                     const EpochSchedule& schedule, const EstimationRate& rate,
                     double delta_prime, std::size_t num_arms) {
  const double elapsed = static_cast<double>(t - schedule.tau(m - 1));
  return epoch_reward_sum / elapsed >=
         avg_epoch_lower_bound(t, m, l_prev, schedule, rate, delta_prime, num_arms);
}

void AlgorithmConfig::validate() const {
  if (tau1 < 2) throw std::invalid_argument("tau1 must be at least 2");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must be in (0, 1)");
  if (horizon == 0) throw std::invalid_argument("horizon must be positive");
}

namespace {

double kernel_expected_regret(const BanditEnvironment& env, const Context& x,
                              std::span<const double> p, double optimal_mean) {
  double regret = 0.0;
  for (std::size_t a = 0; a < p.size(); ++a) {
    if (p[a] > 0.0) regret += p[a] * (optimal_mean - env.mean_reward(x, ArmIndex{a}));
  }
  return regret;
}

}  // namespace

RunTrace run_epoch_loop(const BanditEnvironment& env, const RegressionOracle& oracle,
                        const AlgorithmConfig& config, const LoopOptions& options,
                        std::uint64_t seed) {
  config.validate();
  const std::size_t k = env.num_arms();
  const EpochSchedule schedule(config.tau1);
  const double dprime = delta_prime(config.delta);
  const EstimationRate& rate = oracle.rate();
  Rng rng(seed);

  RunTrace trace;
  trace.tag = TraceTag{options.name, env.id(), config.tau1, config.delta, config.horizon};
  trace.rounds.reserve(config.horizon);

  // kernels[m] is p_m; p_0 (the fallback before any epoch improves l) is uniform.
  std::vector<KernelPtr> kernels{std::make_shared<UniformKernel>(k)};
  ModelPtr model = std::make_shared<ConstantModel>(k, 0.0);
  std::vector<Sample> epoch_data;
  std::vector<double> epoch_rewards;
  double l = 0.0;
  double cumulative = 0.0;
  double epoch_sum = 0.0;
  bool safe = true;
  int m_hat = 0;

  int m = 0;
  std::uint64_t epoch_end = 0;
  for (std::uint64_t t = 1; t <= config.horizon; ++t) {
    if (t > epoch_end) {
      ++m;
      epoch_end = schedule.tau(m);
      if (safe) {
        const double gamma =
            gamma_m(m, schedule, rate, dprime, k, options.gamma_scale, options.gamma_form);
        kernels.push_back(std::make_shared<InverseGapKernel>(model, gamma));
        epoch_data.clear();
        epoch_rewards.clear();
        epoch_sum = 0.0;
      }
    }

    auto [x, r] = sample_round(env, rng);
    const double u = rng.uniform();
    const int kernel_epoch = safe ? m : m_hat;
    const ArmDistribution p = kernels[static_cast<std::size_t>(kernel_epoch)]->probabilities(x);
    const ArmIndex a = sample_arm(p, u);
    const double reward = r[a.value];

    if (safe) {
      cumulative += reward;
      epoch_sum += reward;
      epoch_data.push_back(Sample{x, a, reward});
      epoch_rewards.push_back(reward);
      if (m >= 2 && is_safety_check_round(t, m, schedule)) {
        bool ok = true;
        if (options.cumulative_test) {
          ok = ok && check_is_safe(t, m, l, cumulative, schedule, rate, dprime, k);
        }
        if (options.avg_epoch_test) {
          ok = ok && avg_epoch_check(t, m, l, epoch_sum, schedule, rate, dprime, k);
        }
        if (!ok) {
          safe = false;
          trace.detection_round = t;
        }
      }
    }

    if (safe && t == epoch_end) {
      const auto choice = choose_safe(m, epoch_rewards, l, m_hat, dprime);
      l = choice.l;
      m_hat = choice.m_hat;
      model = oracle.fit(epoch_data);
    }

    RoundRecord rec;
    rec.t = t;
    rec.epoch = m;
    rec.optimal_arm = env.optimal_arm(x);
    rec.optimal_mean_reward = env.mean_reward(x, rec.optimal_arm);
    rec.expected_regret = kernel_expected_regret(env, x, p, rec.optimal_mean_reward);
    rec.context = std::move(x);
    rec.action = a;
    rec.realized_reward = reward;
    rec.rewards = std::move(r);
    rec.safe = safe;
    rec.m_hat = m_hat;
    rec.kernel_epoch = kernel_epoch;
    trace.rounds.push_back(std::move(rec));
  }
  trace.final_m_hat = m_hat;
  trace.kernels = std::move(kernels);
  return trace;
}

RunTrace run_safe_falcon(const BanditEnvironment& env, const RegressionOracle& oracle,
                         const AlgorithmConfig& config, std::uint64_t seed) {
  LoopOptions options;
  options.name = "safe-falcon";
  options.gamma_scale = kSafeGammaScale;
  options.cumulative_test = true;
  options.avg_epoch_test = config.enable_avg_epoch_test;
  return run_epoch_loop(env, oracle, config, options, seed);
}

RunTrace run_falcon_plus(const BanditEnvironment& env, const RegressionOracle& oracle,
                         const AlgorithmConfig& config, std::uint64_t seed) {
  LoopOptions options;
  options.name = "falcon-plus";
  options.gamma_scale = kFalconPlusGammaScale;
  options.gamma_form = GammaForm::InverseRate;
  options.cumulative_test = false;
  options.avg_epoch_test = false;
  return run_epoch_loop(env, oracle, config, options, seed);
}

}  // namespace falcon
