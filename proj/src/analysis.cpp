#include "falcon/analysis.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace falcon {

namespace {

void require_shape(const std::vector<std::vector<double>>& table, const TabularEnv& env) {
  if (table.size() != env.num_contexts()) throw std::invalid_argument("table rows != contexts");
  for (const auto& row : table) {
    if (row.size() != env.num_arms()) throw std::invalid_argument("table columns != arms");
  }
}

}  // namespace

KernelTable tabulate(const ActionSelectionKernel& p, const TabularEnv& env) {
  KernelTable out(env.num_contexts());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = p.probabilities(TabularEnv::context_for(i));
  return out;
}

ModelTable tabulate(const OutcomeModel& f, const TabularEnv& env) {
  ModelTable out(env.num_contexts());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f.values(TabularEnv::context_for(i));
  return out;
}

ModelTable true_model_table(const TabularEnv& env) { return env.means(); }

Policy greedy_policy(const ModelTable& f) {
  Policy pi(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) pi[i] = argmax_lowest(f[i]).value;
  return pi;
}

double policy_value(const ModelTable& f, const Policy& pi, const TabularEnv& env) {
  require_shape(f, env);
  double v = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) v += env.weight(i) * f[i].at(pi.at(i));
  return v;
}

double policy_regret(const ModelTable& f, const Policy& pi, const TabularEnv& env) {
  return policy_value(f, greedy_policy(f), env) - policy_value(f, pi, env);
}

double kernel_regret(const KernelTable& p, const ModelTable& f, const TabularEnv& env) {
  require_shape(p, env);
  require_shape(f, env);
  double total = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double best = f[i][argmax_lowest(f[i]).value];
    double inner = 0.0;
    for (std::size_t a = 0; a < env.num_arms(); ++a) inner += p[i][a] * (best - f[i][a]);
    total += env.weight(i) * inner;
  }
  return total;
}

double kernel_weighted_mse(const KernelTable& p, const ModelTable& f, const TabularEnv& env) {
  require_shape(p, env);
  require_shape(f, env);
  double total = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    double inner = 0.0;
    for (std::size_t a = 0; a < env.num_arms(); ++a) {
      const double gap = f[i][a] - env.mean(i, ArmIndex{a});
      inner += p[i][a] * gap * gap;
    }
    total += env.weight(i) * inner;
  }
  return total;
}

Policy PolicyDistribution::policy(std::size_t index) const {
  Policy pi(num_contexts);
  for (std::size_t x = 0; x < num_contexts; ++x) {
    pi[x] = index % num_arms;
    index /= num_arms;
  }
  return pi;
}

PolicyDistribution policy_distribution(const KernelTable& p, const TabularEnv& env) {
  require_shape(p, env);
  const std::size_t nx = env.num_contexts();
  const std::size_t k = env.num_arms();
  std::size_t count = 1;
  for (std::size_t x = 0; x < nx; ++x) {
    count *= k;
    if (count > kMaxPolicies) throw std::length_error("policy space too large to enumerate");
  }
  for (const auto& row : p) require_distribution(row, 1e-9);

  PolicyDistribution q{nx, k, std::vector<double>(count, 1.0)};
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t code = i;
    double prob = 1.0;
    for (std::size_t x = 0; x < nx; ++x) {
      prob *= p[x][code % k];
      code /= k;
    }
    q.probability[i] = prob;
  }
  return q;
}

KernelTable marginalize(const PolicyDistribution& q) {
  KernelTable p(q.num_contexts, std::vector<double>(q.num_arms, 0.0));
  for (std::size_t i = 0; i < q.size(); ++i) {
    std::size_t code = i;
    for (std::size_t x = 0; x < q.num_contexts; ++x) {
      p[x][code % q.num_arms] += q.probability[i];
      code /= q.num_arms;
    }
  }
  return p;
}

double expected_inverse_probability(const KernelTable& p, const Policy& pi,
                                    const TabularEnv& env) {
  require_shape(p, env);
  double v = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (env.weight(i) == 0.0) continue;
    const double prob = p[i].at(pi.at(i));
    if (!(prob > 0.0)) throw std::domain_error("policy plays an arm the kernel never selects");
    v += env.weight(i) / prob;
  }
  return v;
}

FiniteModelClass::FiniteModelClass(std::vector<ModelTable> members)
    : members_(std::move(members)) {
  if (members_.empty()) throw std::invalid_argument("model class F is empty");
}

ModelTable FiniteModelClass::best_fit(const KernelTable& p, const TabularEnv& env) const {
  std::size_t best = 0;
  double best_mse = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < members_.size(); ++j) {
    const double mse = kernel_weighted_mse(p, members_[j], env);
    if (mse < best_mse) {
      best_mse = mse;
      best = j;
    }
  }
  return members_[best];
}

ModelTable ContextConstantClass::best_fit(const KernelTable& p, const TabularEnv& env) const {
  require_shape(p, env);
  const std::size_t k = env.num_arms();
  std::vector<double> mass(k, 0.0);
  std::vector<double> weighted(k, 0.0);
  for (std::size_t i = 0; i < env.num_contexts(); ++i) {
    for (std::size_t a = 0; a < k; ++a) {
      const double w = env.weight(i) * p[i][a];
      mass[a] += w;
      weighted[a] += w * env.mean(i, ArmIndex{a});
    }
  }
  std::vector<double> c(k, 0.5);
  for (std::size_t a = 0; a < k; ++a) {
    if (mass[a] > 0.0) c[a] = std::clamp(weighted[a] / mass[a], 0.0, 1.0);
  }
  return ModelTable(env.num_contexts(), c);
}

namespace {

class TableModel final : public OutcomeModel {
 public:
  TableModel(const ModelTable& table, const TabularEnv& env) : table_(table), env_(env) {}
  std::size_t num_arms() const override { return env_.num_arms(); }
  double raw(const Context& x, ArmIndex a) const override {
    return table_[env_.index_of(x)].at(a.value);
  }

 private:
  const ModelTable& table_;
  const TabularEnv& env_;
};

}  // namespace

std::vector<KernelTable> inner_kernel_family(const TabularEnv& env,
                                             const std::vector<ModelTable>& models,
                                             std::span<const double> gamma_grid) {
  std::vector<KernelTable> family;
  family.push_back(KernelTable(env.num_contexts(),
                               std::vector<double>(env.num_arms(), 1.0 / env.num_arms())));
  for (const auto& f : models) {
    require_shape(f, env);
    KernelTable greedy(env.num_contexts(), std::vector<double>(env.num_arms(), 0.0));
    const auto pi = greedy_policy(f);
    for (std::size_t i = 0; i < pi.size(); ++i) greedy[i][pi[i]] = 1.0;
    family.push_back(std::move(greedy));

    const TableModel model(f, env);
    for (double gamma : gamma_grid) {
      KernelTable igw(env.num_contexts());
      for (std::size_t i = 0; i < igw.size(); ++i) {
        igw[i] = action_kernel(model, gamma, TabularEnv::context_for(i));
      }
      family.push_back(std::move(igw));
    }
  }
  return family;
}

std::vector<KernelTable> arm_constant_kernels(const TabularEnv& env,
                                              std::span<const ArmDistribution> distributions) {
  std::vector<KernelTable> out;
  out.reserve(distributions.size());
  for (const auto& g : distributions) {
    if (g.size() != env.num_arms()) throw std::invalid_argument("distribution has wrong arm count");
    require_distribution(g, 1e-12);
    out.emplace_back(env.num_contexts(), g);
  }
  return out;
}

double average_misspecification_tabular(const TabularEnv& env, const TabularModelClass& models,
                                        std::span<const KernelTable> kernels) {
  if (kernels.empty()) throw std::invalid_argument("kernel family is empty");
  double worst = 0.0;
  for (const auto& p : kernels) {
    const ModelTable f = models.best_fit(p, env);
    worst = std::max(worst, kernel_weighted_mse(p, f, env));
  }
  return std::sqrt(worst);
}

double average_misspecification_tabular(const TabularEnv& env,
                                        const std::vector<ModelTable>& models,
                                        std::span<const KernelTable> kernels) {
  const FiniteModelClass f(models);
  return average_misspecification_tabular(env, f, kernels);
}

TabularEnv discretize(const LowerBoundEnv& env, std::size_t cells_per_arm) {
  if (cells_per_arm == 0) throw std::invalid_argument("need at least one cell per arm");
  const std::size_t k = env.num_arms();
  const std::size_t n = k * cells_per_arm;
  std::vector<double> weights(n, 1.0 / static_cast<double>(n));
  std::vector<std::vector<double>> means(n, std::vector<double>(k, 0.0));
  for (std::size_t c = 0; c < n; ++c) {
    // Cell midpoint in (0, K).
    const double x = (static_cast<double>(c) + 0.5) / static_cast<double>(cells_per_arm);
    for (std::size_t a = 0; a < k; ++a) means[c][a] = env.mean_reward({x}, ArmIndex{a});
  }
  return TabularEnv(std::move(weights), std::move(means));
}

double lower_bound_instance_regret(std::size_t num_arms, double b, std::span<const double> g) {
  const double alpha = lower_bound_alpha(num_arms, b);
  if (g.size() != num_arms) throw std::invalid_argument("distribution has wrong arm count");
  require_distribution(g, 1e-12);
  const double k = static_cast<double>(num_arms);
  const double optimal = alpha;      // R(pi*)
  const double single = alpha / k;   // R(a) for the constant policy a
  double regret = 0.0;
  for (double ga : g) regret += ga * (optimal - single);
  if (regret < std::sqrt(k * b / 2.0) - 1e-12) {
    throw std::logic_error("lower-bound instance regret fell below sqrt(KB/2)");
  }
  return regret;
}

MStar m_star(double b, const EpochSchedule& schedule, const EstimationRate& rate,
             double delta_prime, int m_cap) {
  if (!(b >= 0.0)) throw std::invalid_argument("B must be nonnegative");
  if (m_cap < 1) throw std::invalid_argument("m cap must be positive");
  MStar out;
  for (int m = 1; m <= m_cap; ++m) {
    const double dm = static_cast<double>(m);
    if (b <= xi(rate, schedule.length(m), delta_prime / (dm * dm))) {
      out.kind = MStar::Kind::Finite;
      out.m = m;
    }
  }
  if (out.kind == MStar::Kind::Finite && out.m == m_cap) out.kind = MStar::Kind::Unbounded;
  return out;
}

std::vector<EpochSummary> epoch_summaries(const RunTrace& trace) {
  const EpochSchedule schedule(trace.tag.tau1);
  std::vector<EpochSummary> out;
  for (const auto& r : trace.rounds) {
    if (out.empty() || out.back().epoch != r.epoch) {
      EpochSummary s;
      s.epoch = r.epoch;
      s.rounds = schedule.length(r.epoch);
      out.push_back(s);
    }
    auto& s = out.back();
    ++s.count;
    s.mean_realized_regret += r.realized_regret();
    s.mean_expected_regret += r.expected_regret;
  }
  for (auto& s : out) {
    s.mean_realized_regret /= static_cast<double>(s.count);
    s.mean_expected_regret /= static_cast<double>(s.count);
  }
  return out;
}

std::vector<EpochAggregate> aggregate_summaries(
    std::span<const std::vector<EpochSummary>> per_run) {
  if (per_run.empty()) throw std::invalid_argument("no runs to aggregate");
  const auto& first = per_run.front();
  for (const auto& run : per_run) {
    if (run.size() != first.size()) throw std::invalid_argument("runs cover different epochs");
    for (std::size_t e = 0; e < run.size(); ++e) {
      if (run[e].epoch != first[e].epoch || run[e].count != first[e].count) {
        throw std::invalid_argument("runs cover different epochs");
      }
    }
  }
  const double n = static_cast<double>(per_run.size());
  std::vector<EpochAggregate> out(first.size());
  for (std::size_t e = 0; e < first.size(); ++e) {
    auto& agg = out[e];
    agg.epoch = first[e].epoch;
    agg.runs = per_run.size();
    for (const auto& run : per_run) {
      agg.mean += run[e].mean_realized_regret;
      agg.mean_expected += run[e].mean_expected_regret;
    }
    agg.mean /= n;
    agg.mean_expected /= n;
    if (per_run.size() > 1) {
      double ss = 0.0;
      for (const auto& run : per_run) {
        const double d = run[e].mean_realized_regret - agg.mean;
        ss += d * d;
      }
      agg.ci_half_width = kNormal975 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
  }
  return out;
}

std::vector<EpochAggregate> aggregate_runs(std::span<const RunTrace> traces) {
  if (traces.empty()) throw std::invalid_argument("no runs to aggregate");
  std::vector<std::vector<EpochSummary>> per_run;
  per_run.reserve(traces.size());
  for (const auto& t : traces) {
    if (!(t.tag == traces.front().tag)) {
      throw std::invalid_argument("traces come from different configs");
    }
    per_run.push_back(epoch_summaries(t));
  }
  return aggregate_summaries(per_run);
}

SlopeEstimate weighted_slope(std::span<const double> x, std::span<const double> y,
                             std::span<const double> w) {
  const std::size_t n = x.size();
  if (n < 3 || y.size() != n || w.size() != n) {
    throw std::invalid_argument("weighted slope needs three or more matched points");
  }
  double sw = 0.0;
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += w[i];
    mx += w[i] * x[i];
    my += w[i] * y[i];
  }
  mx /= sw;
  my /= sw;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    sxy += w[i] * (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("weighted slope needs distinct x values");
  SlopeEstimate est;
  est.slope = sxy / sxx;
  const double intercept = my - est.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - intercept - est.slope * x[i];
    rss += w[i] * r * r;
  }
  const double dof = static_cast<double>(n - 2);
  const double se = std::sqrt(rss / dof / sxx);
  const boost::math::students_t dist(dof);
  est.ci_half_width = boost::math::quantile(dist, 0.975) * se;
  return est;
}

}  // namespace falcon
