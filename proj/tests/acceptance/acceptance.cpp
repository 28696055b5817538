// Acceptance suite. `acceptance N` runs criterion N; with no argument all
// eight run. Each prints one PASS/FAIL line; the exit code is nonzero if any
// selected criterion fails.

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "falcon/algorithms.hpp"
#include "falcon/analysis.hpp"
#include "falcon/environments.hpp"
#include "falcon/harness.hpp"
#include "falcon/oracle.hpp"
#include "falcon/random.hpp"

using namespace falcon;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class TableModel final : public OutcomeModel {
 public:
  explicit TableModel(std::vector<double> values) : values_(std::move(values)) {}
  std::size_t num_arms() const override { return values_.size(); }
  double raw(const Context&, ArmIndex a) const override { return values_[a.value]; }

 private:
  std::vector<double> values_;
};

std::vector<double> random_simplex(Rng& rng, std::size_t k) {
  std::vector<double> g(k);
  for (double& v : g) v = -std::log(1.0 - rng.uniform());
  const double s = std::accumulate(g.begin(), g.end(), 0.0);
  for (double& v : g) v /= s;
  return g;
}

// 1. Kernel laws over 10^4 random (f, gamma, x, K <= 8).
Outcome kernel_laws() {
  Rng rng(1001);
  double worst_sum = 0.0, worst_nonbest = -1.0, worst_bound = -1e300;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t k = 2 + rng.below(7);
    std::vector<double> f(k);
    for (double& v : f) {
      // Mix in exact ties now and then.
      v = rng.uniform() < 0.1 ? 0.5 : rng.uniform();
    }
    const double gamma = std::exp(rng.uniform(-6.0, 10.0));
    const Context x{rng.uniform()};
    const TableModel model(f);
    const auto p = action_kernel(model, gamma, x);
    const std::size_t best = greedy_policy(model, x).value;
    double sum = 0.0, est = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
      if (p[a] < 0.0) return {false, fmt::format("negative probability at trial {}", trial)};
      sum += p[a];
      est += p[a] * (model.value(x, ArmIndex{best}) - model.value(x, ArmIndex{a}));
      if (a != best) worst_nonbest = std::max(worst_nonbest, p[a] - 1.0 / static_cast<double>(k));
    }
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    worst_bound = std::max(worst_bound, est - static_cast<double>(k) / gamma);
  }
  const bool pass = worst_sum <= 1e-12 && worst_nonbest <= 0.0 && worst_bound <= 1e-12;
  return {pass, fmt::format("max |sum - 1| = {:.3g}; max p(non-best) - 1/K = {:.3g}; "
                            "max (est. regret - K/gamma) = {:.3g}",
                            worst_sum, worst_nonbest, worst_bound)};
}

// 2. Lower-bound instance identities.
Outcome lower_bound_identities() {
  Rng rng(2002);
  double worst_var = 0.0, worst_misspec = 0.0, worst_regret = 0.0, worst_floor = -1e300;
  int cases = 0;
  for (std::size_t k : {2u, 3u, 5u}) {
    for (double frac : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const double b = frac / (2.0 * static_cast<double>(k));
      const LowerBoundEnv env(k, b);
      worst_var = std::max(worst_var, std::abs(env.per_arm_variance() - b));

      std::vector<ArmDistribution> gs;
      for (std::size_t a = 0; a < k; ++a) {
        ArmDistribution point(k, 0.0);
        point[a] = 1.0;
        gs.push_back(point);
      }
      gs.emplace_back(k, 1.0 / static_cast<double>(k));
      for (int i = 0; i < 100; ++i) gs.push_back(random_simplex(rng, k));

      const auto table = discretize(env, 4);
      const auto kernels = arm_constant_kernels(table, gs);
      const double root_b =
          average_misspecification_tabular(table, ContextConstantClass{}, kernels);
      worst_misspec = std::max(worst_misspec, std::abs(root_b - std::sqrt(b)));

      const double expected = std::sqrt((static_cast<double>(k) - 1.0) * b);
      const double floor = std::sqrt(static_cast<double>(k) * b / 2.0);
      for (std::size_t i = gs.size() - 100; i < gs.size(); ++i) {
        const double r = lower_bound_instance_regret(k, b, gs[i]);
        worst_regret = std::max(worst_regret, std::abs(r - expected));
        worst_floor = std::max(worst_floor, floor - r);
      }
      ++cases;
    }
  }
  // The variance identity is exact up to rounding in alpha^2 (K-1)/K^2.
  const bool pass =
      worst_var <= 1e-15 && worst_misspec <= 1e-9 && worst_regret <= 1e-12 && worst_floor <= 1e-12;
  return {pass, fmt::format("{} (K, B) cases; max |var - B| = {:.3g}; max |sqrt(B) brute - "
                            "sqrt(B)| = {:.3g}; max |regret - sqrt((K-1)B)| = {:.3g}; "
                            "max (sqrt(KB/2) - regret) = {:.3g}",
                            cases, worst_var, worst_misspec, worst_regret, worst_floor)};
}

// 3. Kernel/policy duality on 100 random tabular instances.
Outcome duality() {
  Rng rng(3003);
  double worst_marginal = 0.0, worst_regret = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t nx = 1 + rng.below(4);
    const std::size_t k = 2 + rng.below(2);
    std::vector<std::vector<double>> means(nx, std::vector<double>(k));
    ModelTable f(nx, std::vector<double>(k));
    KernelTable p(nx);
    for (std::size_t x = 0; x < nx; ++x) {
      for (std::size_t a = 0; a < k; ++a) {
        means[x][a] = rng.uniform();
        f[x][a] = rng.uniform();
      }
      p[x] = random_simplex(rng, k);
    }
    const TabularEnv env(random_simplex(rng, nx), means);
    const auto q = policy_distribution(p, env);
    const auto back = marginalize(q);
    for (std::size_t x = 0; x < nx; ++x) {
      for (std::size_t a = 0; a < k; ++a) {
        worst_marginal = std::max(worst_marginal, std::abs(back[x][a] - p[x][a]));
      }
    }
    double lhs = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      lhs += q.probability[i] * policy_regret(f, q.policy(i), env);
    }
    double rhs = 0.0;
    for (std::size_t x = 0; x < nx; ++x) {
      const double best = *std::max_element(f[x].begin(), f[x].end());
      for (std::size_t a = 0; a < k; ++a) rhs += env.weight(x) * p[x][a] * (best - f[x][a]);
    }
    worst_regret = std::max(worst_regret, std::abs(lhs - rhs));
  }
  const bool pass = worst_marginal <= 1e-12 && worst_regret <= 1e-10;
  return {pass, fmt::format("100 instances; max marginalization error {:.3g}; max regret "
                            "identity error {:.3g}",
                            worst_marginal, worst_regret)};
}

ExperimentConfig base_config(const std::string& algorithm, const std::string& env) {
  ExperimentConfig c;
  c.algorithm = algorithm;
  c.env = env;
  c.delta = 0.05;
  c.seed = 1;
  c.runs = 50;
  return c;
}

// 4. Realizable environment: the safe flag survives in >= 47/50 runs.
Outcome realizable_validity() {
  auto c = base_config("safe-falcon", "realizable");
  c.tau1 = 32;
  c.horizon = 1u << 14;
  c.avg_epoch_test = true;
  const auto r = run_replications(c);
  std::size_t safe = 0;
  for (const auto& d : r.detection_round) safe += d ? 0 : 1;
  return {safe >= 47, fmt::format("safe at T in {}/50 runs (need >= 47)", safe)};
}

ExperimentConfig intro_config(const std::string& algorithm) {
  auto c = base_config(algorithm, "intro");
  c.tau1 = 2;
  c.horizon = 1u << 17;
  c.avg_epoch_test = algorithm == "safe-falcon";
  return c;
}

std::string epoch_means(const std::vector<EpochAggregate>& agg) {
  std::string s;
  for (const auto& a : agg) s += fmt::format("{}{}:{:.4f}", s.empty() ? "" : " ", a.epoch, a.mean);
  return s;
}

// 5. FALCON+ on the intro example: late epochs regress by >= 20%.
Outcome falcon_plus_regression() {
  const auto r = run_replications(intro_config("falcon-plus"));
  const auto& agg = r.aggregate;
  double min_mean = 1e300;
  for (const auto& a : agg) min_mean = std::min(min_mean, a.mean);
  const std::size_t n = agg.size();
  const double last3 = (agg[n - 1].mean + agg[n - 2].mean + agg[n - 3].mean) / 3.0;
  const bool pass = last3 >= 1.2 * min_mean;
  return {pass, fmt::format("last-3-epoch mean {:.5f} vs 1.2 x min epoch mean {:.5f}; epoch means "
                            "[{}]",
                            last3, 1.2 * min_mean, epoch_means(agg))};
}

// 6. Safe-FALCON on the intro example.
Outcome safe_falcon_recovery() {
  const auto safe = run_replications(intro_config("safe-falcon"));
  const auto plus = run_replications(intro_config("falcon-plus"));

  // (a) flips
  std::size_t flips = 0, late_flips = 0;
  std::map<int, int> flip_hist;
  for (std::size_t i = 0; i < safe.detection_round.size(); ++i) {
    if (auto e = safe.flip_epoch(i)) {
      ++flips;
      late_flips += *e >= 8 ? 1 : 0;
      ++flip_hist[*e];
    }
  }
  const bool a_ok = flips >= 45 && late_flips >= 40;
  std::string hist;
  for (const auto& [e, n] : flip_hist) hist += fmt::format(" {}:{}", e, n);

  // (b) flat post-flip regret: per flipped run, weighted slope of epoch means
  // over the complete epochs after the flip epoch.
  std::size_t eligible = 0, flat = 0;
  for (std::size_t i = 0; i < safe.per_run.size(); ++i) {
    const auto e = safe.flip_epoch(i);
    if (!e) continue;
    std::vector<double> xs, ys, ws;
    for (const auto& s : safe.per_run[i]) {
      if (s.epoch <= *e || s.count != s.rounds) continue;
      xs.push_back(s.epoch);
      ys.push_back(s.mean_realized_regret);
      ws.push_back(static_cast<double>(s.count));
    }
    if (xs.size() < 3) continue;
    ++eligible;
    flat += weighted_slope(xs, ys, ws).contains(0.0) ? 1 : 0;
  }
  const bool b_ok =
      flips > 0 && eligible > 0 && eligible * 10 >= flips * 9 && flat * 10 >= eligible * 9;

  // (c) final-epoch means
  const double safe_final = safe.aggregate.back().mean;
  const double plus_final = plus.aggregate.back().mean;
  const bool c_ok = safe_final < plus_final;

  return {a_ok && b_ok && c_ok,
          fmt::format("(a) {} flips in 50 runs, {} at epoch >= 8 (need >= 45 and >= 40); flip "
                      "epochs{} [{}]; (b) {} runs with >= 3 post-flip epochs, slope CI contains 0 "
                      "in {} (need >= 90% of flipped runs eligible and >= 90% flat) [{}]; "
                      "(c) final-epoch mean {:.5f} vs FALCON+ {:.5f} [{}]; safe-falcon epoch "
                      "means [{}]",
                      flips, late_flips, hist.empty() ? " none" : hist, a_ok ? "ok" : "fail",
                      eligible, flat, b_ok ? "ok" : "fail", safe_final, plus_final,
                      c_ok ? "ok" : "fail", epoch_means(safe.aggregate))};
}

// 7. Rate validity.
Outcome rate_validity() {
  ChiSquared2Rate chi2;
  std::string detail;
  bool pass = true;
  for (double delta : {0.3, 0.05, 0.01}) {
    const auto r = validate_rate(chi2, delta, 1'000'000);
    pass = pass && r.passed;
    detail += fmt::format("chi2 delta={}: {}; ", delta, r.summary());
  }
  FunctionRate half([](std::uint64_t n, double z) { return std::log(1.0 / z) / (2.0 * n); },
                    "half floor");
  const auto r = validate_rate(half, 0.05, 1'000'000);
  pass = pass && !r.passed;
  detail += fmt::format("half floor: {}", r.summary());
  return {pass, detail};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 8. Byte-identical outputs on repeated runs.
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "falcon-acceptance-determinism";
  fs::remove_all(root);
  std::vector<ExperimentConfig> configs;
  {
    auto c = base_config("safe-falcon", "intro");
    c.horizon = 1u << 12;
    c.runs = 5;
    c.avg_epoch_test = true;
    configs.push_back(c);
    c.algorithm = "falcon-plus";
    configs.push_back(c);
    auto r = base_config("safe-falcon", "realizable");
    r.tau1 = 32;
    r.horizon = 1u << 12;
    r.runs = 3;
    configs.push_back(r);
    auto l = base_config("falcon-plus", "lower-bound");
    l.env_k = 3;
    l.env_b = 0.1;
    l.horizon = 2000;
    l.runs = 3;
    configs.push_back(l);
  }
  std::size_t compared = 0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    for (int rep = 0; rep < 2; ++rep) {
      configs[i].out = root / fmt::format("c{}-{}", i, rep);
      run_experiment(configs[i]);
    }
    for (const char* f : {"trace.csv", "epochs.csv", "regret.svg"}) {
      const auto a = slurp(root / fmt::format("c{}-0", i) / f);
      const auto b = slurp(root / fmt::format("c{}-1", i) / f);
      if (a.empty() || a != b) {
        return {false, fmt::format("config {} {}: outputs differ", i, f)};
      }
      ++compared;
    }
  }
  compare_experiments(configs[0], configs[1], root / "cmp-0");
  compare_experiments(configs[0], configs[1], root / "cmp-1");
  for (const char* f : {"epochs.csv", "flips.csv", "regret.svg"}) {
    if (slurp(root / "cmp-0" / f) != slurp(root / "cmp-1" / f)) {
      return {false, fmt::format("compare {}: outputs differ", f)};
    }
    ++compared;
  }
  fs::remove_all(root);
  return {true, fmt::format("{} output files byte-identical across repeated runs", compared)};
}

struct Criterion {
  int id;
  const char* name;
  double time_limit_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "kernel laws", 5.0, kernel_laws},
      {2, "lower-bound instance identities", 10.0, lower_bound_identities},
      {3, "kernel/policy duality", 30.0, duality},
      {4, "misspecification-test validity (realizable)", 300.0, realizable_validity},
      {5, "FALCON+ late-epoch regression", 1800.0, falcon_plus_regression},
      {6, "Safe-FALCON flip and flat regret", 1800.0, safe_falcon_recovery},
      {7, "rate validity", 5.0, rate_validity},
      {8, "determinism", 600.0, determinism},
  };

  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty()) {
    for (const auto& c : criteria) selected.push_back(c.id);
  }

  bool all_pass = true;
  for (int id : selected) {
    const auto it = std::find_if(criteria.begin(), criteria.end(),
                                 [id](const Criterion& c) { return c.id == id; });
    if (it == criteria.end()) {
      fmt::print("criterion {}: FAIL: no such criterion\n", id);
      all_pass = false;
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = it->run();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < it->time_limit_s;
    const bool pass = o.pass && in_time;
    fmt::print("criterion {} ({}): {}: {}; {:.2f} s (limit {:.0f} s{})\n", it->id, it->name,
               pass ? "PASS" : "FAIL", o.detail, secs, it->time_limit_s,
               in_time ? "" : ", exceeded");
    all_pass = all_pass && pass;
  }
  return all_pass ? 0 : 1;
}
