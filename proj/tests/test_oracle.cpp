#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "falcon/environments.hpp"
#include "falcon/oracle.hpp"
#include "falcon/random.hpp"

using namespace falcon;

namespace {

std::vector<Sample> intro_uniform_data(std::size_t n, std::uint64_t seed) {
  IntroExampleEnv env;
  Rng rng(seed);
  std::vector<Sample> data;
  data.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto [x, r] = sample_round(env, rng);
    const ArmIndex a{rng.below(2)};
    data.push_back(Sample{x, a, r[a.value]});
  }
  return data;
}

std::vector<Sample> random_linear_data(std::size_t n, std::size_t k, std::size_t dim,
                                       std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Sample> data;
  for (std::size_t i = 0; i < n; ++i) {
    Context x(dim);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    const ArmIndex a{rng.below(k)};
    double y = 0.3 * static_cast<double>(a.value) + rng.normal();
    for (std::size_t j = 0; j < dim; ++j) y += (0.5 - 0.2 * static_cast<double>(j)) * x[j];
    data.push_back(Sample{x, a, y});
  }
  return data;
}

}  // namespace

TEST_CASE("chi-squared(2) rate") {
  ChiSquared2Rate rate;
  CHECK(xi(rate, 100, 0.05) == doctest::Approx(0.059914645471079817).epsilon(1e-12));
  CHECK(xi(rate, 1, std::exp(-1.0)) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(xi(rate, 10, 0.1) >= std::log(1.0 / 0.1) / 10.0);

  SUBCASE("domain") {
    CHECK_THROWS_AS(xi(rate, 0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(xi(rate, 5, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(xi(rate, 5, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(xi(rate, 5, -0.1), std::invalid_argument);
  }
  SUBCASE("monotone in n for fixed zeta and in zeta for fixed n") {
    for (std::uint64_t n = 1; n < 500; ++n) CHECK(xi(rate, n + 1, 0.01) <= xi(rate, n, 0.01));
    for (double z = 0.01; z < 0.98; z += 0.01) CHECK(xi(rate, 37, z + 0.01) <= xi(rate, 37, z));
  }
}

TEST_CASE("common rate") {
  CommonRate rate({.c = 4.0, .rho = 1.0, .rho_prime = 0.0, .complexity = 1.0, .n0 = 2});
  CHECK(xi(rate, 1, 0.3) == 1.0);
  CHECK(xi(rate, 8, 0.1) == doctest::Approx(4.0 * std::log(10.0) / 8.0));
  CommonRate with_log({.c = 1.0, .rho = 0.5, .rho_prime = 2.0, .complexity = 3.0, .n0 = 1});
  CHECK(xi(with_log, 100, 0.5) ==
        doctest::Approx(std::pow(std::log(100.0), 2.0) * std::log(2.0) * 3.0 / 10.0));
  CHECK_THROWS_AS(CommonRate({.c = 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(CommonRate({.rho = 1.5}), std::invalid_argument);
  CHECK_THROWS_AS(CommonRate({.rho_prime = -1.0}), std::invalid_argument);
}

TEST_CASE("validate_rate") {
  SUBCASE("chi-squared rate passes") {
    const auto report = validate_rate(ChiSquared2Rate{}, 0.05, 1'000'000);
    CHECK(report.passed);
    CHECK_FALSE(report.violation.has_value());
    CHECK(report.evaluations > 1'000'000);
  }
  SUBCASE("half the floor fails the lower-bound condition") {
    FunctionRate half([](std::uint64_t n, double z) { return std::log(1.0 / z) / (2.0 * n); },
                      "half floor");
    const auto report = validate_rate(half, 0.05, 1000);
    REQUIRE_FALSE(report.passed);
    CHECK(report.violation->condition == RateViolation::Condition::LowerBound);
    CHECK(report.violation->n == 2);
    CHECK(report.summary().find("below") != std::string::npos);
  }
  SUBCASE("common rate with C comp = 4 passes") {
    CommonRate rate({.c = 4.0, .rho = 1.0, .rho_prime = 0.0, .complexity = 1.0, .n0 = 2});
    CHECK(validate_rate(rate, 0.05, 100000).passed);
  }
  SUBCASE("a rate that grows in n fails monotonicity") {
    FunctionRate growing(
        [](std::uint64_t n, double z) {
          return std::log(1.0 / z) * (n > 500 ? 2.0 : 1.0) / static_cast<double>(n) * 1.5;
        },
        "bump");
    const auto report = validate_rate(growing, 0.05, 2000);
    REQUIRE_FALSE(report.passed);
    CHECK(report.violation->condition == RateViolation::Condition::NonIncreasing);
    CHECK(report.violation->n == 501);
    CHECK(report.violation->value > report.violation->reference);
  }
  SUBCASE("n_max below 4 is rejected") {
    CHECK_THROWS_AS(validate_rate(ChiSquared2Rate{}, 0.05, 3), std::invalid_argument);
  }
}

TEST_CASE("linear per-arm oracle") {
  LinearPerArmOracle oracle(2, 1);
  CHECK(&oracle.rate() != nullptr);

  SUBCASE("constant data gives a flat model") {
    std::vector<Sample> data{{{0.0}, ArmIndex{0}, 0.5}, {{1.0}, ArmIndex{0}, 0.5},
                             {{0.3}, ArmIndex{1}, 0.2}, {{0.9}, ArmIndex{1}, 0.8}};
    auto f = oracle.fit_linear(data);
    for (double x : {0.0, 0.25, 0.6, 1.0}) {
      CHECK(f->value({x}, ArmIndex{0}) == doctest::Approx(0.5).epsilon(1e-12));
    }
    CHECK(f->arm(ArmIndex{1}).slope[0] == doctest::Approx(1.0));
    CHECK(f->arm(ArmIndex{1}).intercept == doctest::Approx(-0.1));
  }
  SUBCASE("intro example regression targets") {
    const auto data = intro_uniform_data(400000, 5);
    auto f = oracle.fit_linear(data);
    CHECK(f->arm(ArmIndex{0}).intercept == doctest::Approx(-0.25).epsilon(0.02).scale(1.0));
    CHECK(f->arm(ArmIndex{0}).slope[0] == doctest::Approx(1.5).epsilon(0.02));
    CHECK(f->value({0.5}, ArmIndex{1}) == doctest::Approx(0.5).epsilon(0.02));
    CHECK(std::abs(f->arm(ArmIndex{1}).slope[0]) < 0.03);
  }
  SUBCASE("arms without data predict the midpoint; single samples fit an intercept") {
    std::vector<Sample> data{{{0.2}, ArmIndex{0}, 0.9}};
    auto f = oracle.fit_linear(data);
    CHECK(f->value({0.7}, ArmIndex{0}) == doctest::Approx(0.9));
    CHECK(f->value({0.7}, ArmIndex{1}) == 0.5);
    CHECK(f->arm(ArmIndex{1}).samples == 0);
  }
  SUBCASE("identical contexts give the intercept-only fit") {
    std::vector<Sample> data{{{0.4}, ArmIndex{0}, 0.1}, {{0.4}, ArmIndex{0}, 0.3},
                             {{0.4}, ArmIndex{0}, 0.8}};
    auto f = oracle.fit_linear(data);
    CHECK(f->value({0.0}, ArmIndex{0}) == doctest::Approx(0.4));
    CHECK(f->value({1.0}, ArmIndex{0}) == doctest::Approx(0.4));
  }
  SUBCASE("predictions are clamped") {
    std::vector<Sample> data{{{0.0}, ArmIndex{0}, 0.0}, {{1.0}, ArmIndex{0}, 1.0}};
    auto f = oracle.fit_linear(data);
    CHECK(f->raw({2.0}, ArmIndex{0}) == doctest::Approx(2.0));
    CHECK(f->value({2.0}, ArmIndex{0}) == 1.0);
    CHECK(f->value({-1.0}, ArmIndex{0}) == 0.0);
  }
  SUBCASE("empty data is an error") {
    std::vector<Sample> none;
    CHECK_THROWS_AS(fit(oracle, none), std::invalid_argument);
  }
}

TEST_CASE("least-squares properties on random designs") {
  const std::size_t k = 3, dim = 3;
  LinearPerArmOracle oracle(k, dim);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto data = random_linear_data(300, k, dim, seed);
    auto f = oracle.fit_linear(data);

    // Residuals are orthogonal to (1, x) within each arm.
    std::vector<std::vector<double>> inner(k, std::vector<double>(dim + 1, 0.0));
    double rss = 0.0, rss_zero = 0.0;
    for (const auto& s : data) {
      const double resid = s.reward - f->raw(s.context, s.arm);
      inner[s.arm.value][0] += resid;
      for (std::size_t j = 0; j < dim; ++j) inner[s.arm.value][j + 1] += resid * s.context[j];
      rss += resid * resid;
      rss_zero += s.reward * s.reward;
    }
    for (const auto& row : inner) {
      for (double v : row) CHECK(std::abs(v) < 1e-8);
    }
    CHECK(rss <= rss_zero);

    // Order of the data does not matter.
    auto shuffled = data;
    std::reverse(shuffled.begin(), shuffled.end());
    std::rotate(shuffled.begin(), shuffled.begin() + 17, shuffled.end());
    auto g = oracle.fit_linear(shuffled);
    for (std::size_t a = 0; a < k; ++a) {
      CHECK(g->arm(ArmIndex{a}).intercept ==
            doctest::Approx(f->arm(ArmIndex{a}).intercept).epsilon(1e-10));
      for (std::size_t j = 0; j < dim; ++j) {
        CHECK(g->arm(ArmIndex{a}).slope[j] ==
              doctest::Approx(f->arm(ArmIndex{a}).slope[j]).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("collinear contexts use the minimum-norm solution") {
  LinearPerArmOracle oracle(1, 2);
  std::vector<Sample> data;
  for (int i = 0; i < 20; ++i) {
    const double u = i / 19.0;
    data.push_back(Sample{{u, 2.0 * u}, ArmIndex{0}, 0.1 + 0.5 * u});
  }
  auto f = oracle.fit_linear(data);
  const auto& arm = f->arm(ArmIndex{0});
  // Any (b1, b2) with b1 + 2 b2 = 0.5 fits exactly; the minimum-norm one is (0.1, 0.2).
  CHECK(arm.slope[0] == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(arm.slope[1] == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(arm.intercept == doctest::Approx(0.1).epsilon(1e-9));
}
