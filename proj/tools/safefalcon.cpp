// Command-line driver: run, compare, lowerbound-check, validate-rate.

#include <fmt/format.h>

#include <CLI11.hpp>
#include <cmath>
#include <iostream>
#include <map>

#include "falcon/analysis.hpp"
#include "falcon/harness.hpp"
#include "falcon/oracle.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitCheck = 3;

// Config keys that may also be given as --key flags; flags win over the file.
const char* const kKeys[] = {"algorithm", "env",  "env.K", "env.B", "tau1",          "delta",
                             "T",         "runs", "seed",  "out",   "avg_epoch_test"};

struct RunArgs {
  std::string config_path;
  std::map<std::string, std::string> overrides;
  std::uint64_t budget = 0;
};

void add_config_flags(CLI::App* cmd, RunArgs& args) {
  cmd->add_option("-c,--config", args.config_path, "key=value config file");
  for (const char* key : kKeys) {
    cmd->add_option_function<std::string>(
        fmt::format("--{}", key), [&args, key](const std::string& v) { args.overrides[key] = v; },
        fmt::format("override config key {}", key));
  }
  cmd->add_option("--budget", args.budget, "maximum runs * T");
}

falcon::ExperimentConfig build_config(const RunArgs& args) {
  falcon::ExperimentConfig config;
  if (!args.config_path.empty()) config = falcon::load_config(args.config_path);
  for (const auto& [key, value] : args.overrides) falcon::apply_setting(config, key, value);
  if (args.budget) config.round_budget = args.budget;
  config.validate();
  return config;
}

void print_summary(const falcon::ExperimentResult& r) {
  std::size_t flips = 0;
  for (std::size_t i = 0; i < r.detection_round.size(); ++i) flips += r.detection_round[i] ? 1 : 0;
  fmt::print("{} on {}: {} runs, T={}, {} trace rows, {} safety flips\n", r.config.algorithm,
             r.config.env, r.config.runs, r.config.horizon, r.trace_rows, flips);
  for (const auto& a : r.aggregate) {
    fmt::print("  epoch {:2d}  mean regret {:+.5f} +- {:.5f}\n", a.epoch, a.mean, a.ci_half_width);
  }
}

int lowerbound_check(std::size_t k, double b, std::size_t cells, std::size_t samples,
                     std::uint64_t seed) {
  const falcon::LowerBoundEnv env(k, b);
  const auto table = falcon::discretize(env, cells);
  std::vector<falcon::ArmDistribution> gs;
  for (std::size_t a = 0; a < k; ++a) {
    falcon::ArmDistribution g(k, 0.0);
    g[a] = 1.0;
    gs.push_back(g);
  }
  gs.emplace_back(k, 1.0 / static_cast<double>(k));
  falcon::Rng rng(seed);
  for (std::size_t i = 0; i < samples; ++i) {
    falcon::ArmDistribution g(k);
    double total = 0.0;
    for (auto& v : g) total += (v = -std::log(1.0 - rng.uniform()));
    for (auto& v : g) v /= total;
    gs.push_back(g);
  }
  const auto kernels = falcon::arm_constant_kernels(table, gs);
  const double analytic = std::sqrt(b);
  const double brute =
      falcon::average_misspecification_tabular(table, falcon::ContextConstantClass{}, kernels);
  const double expected_regret = std::sqrt((static_cast<double>(k) - 1.0) * b);
  double worst_gap = 0.0;
  for (const auto& g : gs) {
    worst_gap = std::max(worst_gap,
                         std::abs(falcon::lower_bound_instance_regret(k, b, g) - expected_regret));
  }
  const bool misspec_ok = std::abs(analytic - brute) <= 1e-9;
  const bool regret_ok = worst_gap <= 1e-12;
  fmt::print("K={} B={} alpha={:.12g}\n", k, b, env.alpha());
  fmt::print("sqrt(B) analytic   {:.15g}\n", analytic);
  fmt::print("sqrt(B) brute      {:.15g}  ({})\n", brute, misspec_ok ? "ok" : "MISMATCH");
  fmt::print("regret sqrt((K-1)B) {:.15g}; max deviation over {} arm distributions {:.3g} ({})\n",
             expected_regret, gs.size(), worst_gap, regret_ok ? "ok" : "MISMATCH");
  fmt::print("bound sqrt(KB/2)   {:.15g}\n", std::sqrt(static_cast<double>(k) * b / 2.0));
  return misspec_ok && regret_ok ? 0 : kExitCheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe-FALCON and FALCON+ contextual bandit experiments"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "run seeded replications and write trace/epochs/svg");
  add_config_flags(run, run_args);

  std::string cfg_a;
  std::string cfg_b;
  std::string compare_out = "compare-out";
  auto* compare = app.add_subcommand("compare", "run two configs and merge their summaries");
  compare->add_option("config_a", cfg_a, "first config file")->required();
  compare->add_option("config_b", cfg_b, "second config file")->required();
  compare->add_option("--out", compare_out, "output directory");

  std::size_t lb_k = 2;
  double lb_b = 1.0 / 16.0;
  std::size_t lb_cells = 4;
  std::size_t lb_samples = 100;
  std::uint64_t lb_seed = 7;
  auto* lb = app.add_subcommand("lowerbound-check",
                                "compare analytic and brute-force misspecification on the "
                                "lower-bound instance");
  lb->add_option("--K", lb_k, "number of arms");
  lb->add_option("--B", lb_b, "misspecification level in [0, 1/(2K)]");
  lb->add_option("--cells", lb_cells, "discretization cells per arm interval");
  lb->add_option("--samples", lb_samples, "random arm distributions to test");
  lb->add_option("--seed", lb_seed, "seed for the random distributions");

  std::string rate_kind = "chi2";
  double vr_delta = 0.05;
  std::uint64_t vr_nmax = 1'000'000;
  falcon::CommonRateParams common;
  auto* vr = app.add_subcommand("validate-rate", "check the validity conditions of a rate");
  vr->add_option("--rate", rate_kind, "chi2 | common | half-floor")
      ->check(CLI::IsMember({"chi2", "common", "half-floor"}));
  vr->add_option("--delta", vr_delta, "confidence parameter");
  vr->add_option("--n-max", vr_nmax, "largest sample size checked");
  vr->add_option("--C", common.c, "common rate constant C");
  vr->add_option("--rho", common.rho, "common rate exponent rho");
  vr->add_option("--rho-prime", common.rho_prime, "common rate log exponent rho'");
  vr->add_option("--comp", common.complexity, "common rate complexity comp(F)");
  vr->add_option("--n0", common.n0, "common rate threshold n0");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      const auto config = build_config(run_args);
      const auto result = falcon::run_experiment(config);
      print_summary(result);
      fmt::print("wrote {}/trace.csv, epochs.csv, regret.svg\n", config.out.string());
      return 0;
    }
    if (*compare) {
      const auto a = falcon::load_config(cfg_a);
      const auto b = falcon::load_config(cfg_b);
      const auto [ra, rb] = falcon::compare_experiments(a, b, compare_out);
      print_summary(ra);
      print_summary(rb);
      fmt::print("wrote {}/epochs.csv, flips.csv, regret.svg\n", compare_out);
      return 0;
    }
    if (*lb) return lowerbound_check(lb_k, lb_b, lb_cells, lb_samples, lb_seed);
    if (*vr) {
      std::unique_ptr<falcon::EstimationRate> rate;
      if (rate_kind == "chi2") {
        rate = std::make_unique<falcon::ChiSquared2Rate>();
      } else if (rate_kind == "common") {
        rate = std::make_unique<falcon::CommonRate>(common);
      } else {
        rate = std::make_unique<falcon::FunctionRate>(
            [](std::uint64_t n, double z) { return std::log(1.0 / z) / (2.0 * n); },
            "half floor ln(1/zeta)/(2n)");
      }
      const auto report = falcon::validate_rate(*rate, vr_delta, vr_nmax);
      fmt::print("{} with delta={} n_max={}: {}\n", rate->describe(), vr_delta, vr_nmax,
                 report.summary());
      return report.passed ? 0 : kExitCheck;
    }
  } catch (const falcon::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const falcon::CheckFailure& e) {
    std::cerr << "check failed: " << e.what() << '\n';
    return kExitCheck;
  }
  return 0;
}
