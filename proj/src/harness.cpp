#include "falcon/harness.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace falcon {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  if constexpr (std::is_floating_point_v<T>) {
    // from_chars for doubles is missing on older toolchains.
    std::size_t used = 0;
    try {
      out = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size() || value.empty()) {
      throw ConfigError(fmt::format("{}: '{}' is not a number", key, value));
    }
  } else {
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) {
      throw ConfigError(fmt::format("{}: '{}' is not a nonnegative integer", key, value));
    }
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, value));
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write {}", path.string()));
  return out;
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw ConfigError(fmt::format("cannot create output directory {}", dir.string()));
  }
}

}  // namespace

AlgorithmConfig ExperimentConfig::algorithm_config() const {
  return AlgorithmConfig{tau1, delta, avg_epoch_test, horizon};
}

void ExperimentConfig::validate() const {
  if (algorithm != "safe-falcon" && algorithm != "falcon-plus") {
    throw ConfigError(fmt::format("unknown algorithm '{}'", algorithm));
  }
  if (env != "intro" && env != "realizable" && env != "lower-bound") {
    throw ConfigError(fmt::format("unknown environment '{}'", env));
  }
  if (tau1 < 2) throw ConfigError("tau1 must be at least 2");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must be in (0, 1)");
  if (horizon == 0) throw ConfigError("T must be positive");
  if (runs == 0) throw ConfigError("runs must be at least 1");
  if (horizon > round_budget / runs) {
    throw ConfigError(fmt::format("runs * T exceeds the budget of {} rounds", round_budget));
  }
  if (env == "intro" && env_k && *env_k != 2) throw ConfigError("the intro example has K = 2");
  if (env_k && *env_k < 2) throw ConfigError("env.K must be at least 2");
  if (env == "lower-bound") {
    const double k = static_cast<double>(env_k.value_or(2));
    if (!(env_b >= 0.0 && env_b <= 1.0 / (2.0 * k))) {
      throw ConfigError("env.B must lie in [0, 1/(2K)]");
    }
  }
}

void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "algorithm") {
    config.algorithm = value;
  } else if (key == "env") {
    config.env = value;
  } else if (key == "env.K") {
    config.env_k = parse_number<std::size_t>(key, value);
  } else if (key == "env.B") {
    config.env_b = parse_number<double>(key, value);
  } else if (key == "tau1") {
    config.tau1 = parse_number<std::uint64_t>(key, value);
  } else if (key == "delta") {
    config.delta = parse_number<double>(key, value);
  } else if (key == "T") {
    config.horizon = parse_number<std::uint64_t>(key, value);
  } else if (key == "runs") {
    config.runs = parse_number<std::uint64_t>(key, value);
  } else if (key == "seed") {
    config.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "avg_epoch_test") {
    config.avg_epoch_test = parse_bool(key, value);
  } else if (key == "out") {
    config.out = value;
  } else {
    throw ConfigError(fmt::format("unknown config key '{}'", key));
  }
}

ExperimentConfig parse_config(std::istream& in, ExperimentConfig base) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("line {}: expected key=value", lineno));
    }
    apply_setting(base, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config {}", path.string()));
  return parse_config(in, std::move(base));
}

EnvPtr make_environment(const ExperimentConfig& config) {
  if (config.env == "intro") return std::make_shared<IntroExampleEnv>();
  if (config.env == "realizable") {
    return realizable_linear_env(config.env_k.value_or(2), 1, config.seed);
  }
  if (config.env == "lower-bound") {
    return std::make_shared<LowerBoundEnv>(config.env_k.value_or(2), config.env_b);
  }
  throw ConfigError(fmt::format("unknown environment '{}'", config.env));
}

std::unique_ptr<RegressionOracle> make_oracle(const BanditEnvironment& env) {
  return std::make_unique<LinearPerArmOracle>(env.num_arms(), env.context_dim());
}

RunTrace run_once(const ExperimentConfig& config, const BanditEnvironment& env,
                  const RegressionOracle& oracle, std::uint64_t run_id) {
  const auto seed = run_seed(config.seed, run_id);
  if (config.algorithm == "falcon-plus") {
    return run_falcon_plus(env, oracle, config.algorithm_config(), seed);
  }
  return run_safe_falcon(env, oracle, config.algorithm_config(), seed);
}

std::optional<int> ExperimentResult::flip_epoch(std::size_t run) const {
  const auto& d = detection_round.at(run);
  if (!d) return std::nullopt;
  return EpochSchedule(config.tau1).epoch_of(*d);
}

ExperimentResult run_replications(const ExperimentConfig& config, const TraceSink& sink) {
  config.validate();
  const EnvPtr env = make_environment(config);
  const auto oracle = make_oracle(*env);
  ExperimentResult result;
  result.config = config;
  for (std::uint64_t i = 0; i < config.runs; ++i) {
    const RunTrace trace = run_once(config, *env, *oracle, i);
    if (sink) sink(i, trace);
    result.per_run.push_back(epoch_summaries(trace));
    result.detection_round.push_back(trace.detection_round);
    result.final_m_hat.push_back(trace.final_m_hat);
    result.trace_rows += trace.rounds.size();
  }
  result.aggregate = aggregate_summaries(result.per_run);
  return result;
}

void write_trace_rows(std::ostream& out, std::uint64_t run_id, const RunTrace& trace) {
  fmt::memory_buffer buf;
  for (const auto& r : trace.rounds) {
    buf.clear();
    fmt::format_to(std::back_inserter(buf), "{},{},{},", run_id, r.t, r.epoch);
    for (std::size_t j = 0; j < r.context.size(); ++j) {
      fmt::format_to(std::back_inserter(buf), "{}{}", j ? ";" : "", r.context[j]);
    }
    fmt::format_to(std::back_inserter(buf), ",{},{},{},{},{},{},{}\n", r.action.value,
                   r.realized_reward, r.optimal_arm.value, r.optimal_mean_reward,
                   r.realized_regret(), r.safe ? 1 : 0, r.m_hat);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
}

void write_epochs_csv(std::ostream& out, const ExperimentResult& result,
                      const std::string& algorithm_column) {
  const bool with_algo = !algorithm_column.empty();
  const std::string prefix = with_algo ? algorithm_column + "," : "";
  for (std::size_t run = 0; run < result.per_run.size(); ++run) {
    for (const auto& s : result.per_run[run]) {
      fmt::print(out, "{}run,{},{},{},{},{},,{}\n", prefix, run, s.epoch, s.rounds, s.count,
                 s.mean_realized_regret, s.mean_expected_regret);
    }
  }
  const auto& first = result.per_run.front();
  for (std::size_t e = 0; e < result.aggregate.size(); ++e) {
    const auto& a = result.aggregate[e];
    fmt::print(out, "{}mean,,{},{},{},{},{},{}\n", prefix, a.epoch, first[e].rounds,
               first[e].count, a.mean, a.ci_half_width, a.mean_expected);
  }
}

namespace {

constexpr const char* kEpochsHeader =
    "kind,run_id,epoch,rounds,count,mean_regret,ci_half_width,mean_expected_regret";

}  // namespace

void write_regret_svg(std::ostream& out, const std::vector<SvgSeries>& series,
                      const std::string& title) {
  constexpr double kWidth = 800.0;
  constexpr double kHeight = 500.0;
  constexpr double kLeft = 70.0;
  constexpr double kRight = 20.0;
  constexpr double kTop = 40.0;
  constexpr double kBottom = 50.0;
  constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

  int max_epoch = 1;
  double lo = 0.0;
  double hi = 0.0;
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      max_epoch = std::max(max_epoch, p.epoch);
      lo = std::min(lo, p.mean - p.ci_half_width);
      hi = std::max(hi, p.mean + p.ci_half_width);
    }
  }
  if (hi <= lo) hi = lo + 1.0;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto sx = [&](double epoch) {
    return kLeft + (max_epoch > 1 ? (epoch - 1.0) / (max_epoch - 1.0) : 0.5) * plot_w;
  };
  auto sy = [&](double v) { return kTop + (hi - v) / (hi - lo) * plot_h; };

  fmt::print(out,
             "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
             "viewBox=\"0 0 {:.0f} {:.0f}\">\n",
             kWidth, kHeight, kWidth, kHeight);
  fmt::print(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
  fmt::print(out, "<text x=\"{:.1f}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
             kWidth / 2.0, title);
  fmt::print(out,
             "<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"black\"/>\n",
             kLeft, kTop, kTop + plot_h);
  fmt::print(out,
             "<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"black\"/>\n",
             kLeft, kTop + plot_h, kLeft + plot_w);
  for (int e = 1; e <= max_epoch; ++e) {
    fmt::print(out, "<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
               sx(e), kTop + plot_h + 18.0, e);
  }
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    fmt::print(out, "<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"11\" text-anchor=\"end\">{:.3f}</text>\n",
               kLeft - 6.0, sy(v) + 4.0, v);
  }
  fmt::print(out, "<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"13\" text-anchor=\"middle\">epoch</text>\n",
             kLeft + plot_w / 2.0, kHeight - 10.0);
  fmt::print(out,
             "<text x=\"16\" y=\"{:.1f}\" font-size=\"13\" text-anchor=\"middle\" "
             "transform=\"rotate(-90 16 {:.1f})\">mean per-epoch regret</text>\n",
             kTop + plot_h / 2.0, kTop + plot_h / 2.0);

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % std::size(kColors)];
    std::string points;
    for (const auto& p : series[s].points) {
      points += fmt::format("{:.2f},{:.2f} ", sx(p.epoch), sy(p.mean));
    }
    fmt::print(out, "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n",
               color, trim(points));
    for (const auto& p : series[s].points) {
      const double x = sx(p.epoch);
      fmt::print(out,
                 "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"{3}\"/>\n",
                 x, sy(p.mean - p.ci_half_width), sy(p.mean + p.ci_half_width), color);
    }
    fmt::print(out, "<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"12\" fill=\"{}\">{}</text>\n",
               kLeft + 10.0, kTop + 14.0 + 16.0 * static_cast<double>(s), color,
               series[s].label);
  }
  fmt::print(out, "</svg>\n");
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ensure_directory(config.out);
  auto trace_out = open_output(config.out / "trace.csv");
  trace_out << kTraceHeader << '\n';
  auto result = run_replications(config, [&](std::uint64_t run, const RunTrace& trace) {
    write_trace_rows(trace_out, run, trace);
  });
  if (!trace_out.flush()) throw ConfigError("failed writing trace.csv");

  auto epochs_out = open_output(config.out / "epochs.csv");
  epochs_out << kEpochsHeader << '\n';
  write_epochs_csv(epochs_out, result);

  auto svg_out = open_output(config.out / "regret.svg");
  write_regret_svg(svg_out, {SvgSeries{config.algorithm, result.aggregate}},
                   fmt::format("{} on {} ({} runs)", config.algorithm, config.env, config.runs));
  return result;
}

std::pair<ExperimentResult, ExperimentResult> compare_experiments(
    const ExperimentConfig& a, const ExperimentConfig& b, const std::filesystem::path& out) {
  a.validate();
  b.validate();
  if (a.horizon != b.horizon) throw ConfigError("compare needs matching horizons T");
  if (a.env != b.env || a.env_k != b.env_k || a.env_b != b.env_b) {
    throw ConfigError("compare needs matching environments");
  }
  ensure_directory(out);
  auto ra = run_replications(a);
  auto rb = run_replications(b);

  auto epochs_out = open_output(out / "epochs.csv");
  epochs_out << "algorithm," << kEpochsHeader << '\n';
  write_epochs_csv(epochs_out, ra, a.algorithm);
  write_epochs_csv(epochs_out, rb, b.algorithm);

  auto flips_out = open_output(out / "flips.csv");
  flips_out << "algorithm,run_id,detection_round,flip_epoch\n";
  for (const auto* r : {&ra, &rb}) {
    for (std::size_t i = 0; i < r->detection_round.size(); ++i) {
      const auto& d = r->detection_round[i];
      if (d) {
        fmt::print(flips_out, "{},{},{},{}\n", r->config.algorithm, i, *d, *r->flip_epoch(i));
      } else {
        fmt::print(flips_out, "{},{},,\n", r->config.algorithm, i);
      }
    }
  }

  auto svg_out = open_output(out / "regret.svg");
  write_regret_svg(svg_out,
                   {SvgSeries{a.algorithm, ra.aggregate}, SvgSeries{b.algorithm, rb.aggregate}},
                   fmt::format("{} vs {} on {}", a.algorithm, b.algorithm, a.env));
  return {std::move(ra), std::move(rb)};
}

std::vector<std::vector<EpochSummary>> summaries_from_trace_csv(std::istream& in,
                                                                std::uint64_t tau1) {
  const EpochSchedule schedule(tau1);
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) {
    throw std::invalid_argument("trace.csv header mismatch");
  }
  std::map<std::uint64_t, std::vector<EpochSummary>> runs;
  std::vector<std::string> fields;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    fields.clear();
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 11) throw std::invalid_argument("trace.csv row has wrong arity");
    const auto run = std::stoull(fields[0]);
    const int epoch = std::stoi(fields[2]);
    const double regret = std::stod(fields[8]);
    auto& summaries = runs[run];
    if (summaries.empty() || summaries.back().epoch != epoch) {
      EpochSummary s;
      s.epoch = epoch;
      s.rounds = schedule.length(epoch);
      summaries.push_back(s);
    }
    summaries.back().mean_realized_regret += regret;
    ++summaries.back().count;
  }
  std::vector<std::vector<EpochSummary>> out;
  for (auto& [run, summaries] : runs) {
    for (auto& s : summaries) s.mean_realized_regret /= static_cast<double>(s.count);
    out.push_back(std::move(summaries));
  }
  return out;
}

}  // namespace falcon
