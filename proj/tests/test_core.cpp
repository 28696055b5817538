#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "falcon/core.hpp"
#include "falcon/random.hpp"

using namespace falcon;

namespace {

class TableModel final : public OutcomeModel {
 public:
  explicit TableModel(std::vector<double> values) : values_(std::move(values)) {}
  std::size_t num_arms() const override { return values_.size(); }
  double raw(const Context&, ArmIndex a) const override { return values_[a.value]; }

 private:
  std::vector<double> values_;
};

}  // namespace

TEST_CASE("outcome model values are clamped to the unit interval") {
  TableModel f({-0.5, 0.25, 1.7});
  const Context x{0.0};
  CHECK(f.value(x, ArmIndex{0}) == 0.0);
  CHECK(f.value(x, ArmIndex{1}) == 0.25);
  CHECK(f.value(x, ArmIndex{2}) == 1.0);
  CHECK(f.values(x) == std::vector<double>{0.0, 0.25, 1.0});
  CHECK(f.raw(x, ArmIndex{2}) == 1.7);
}

TEST_CASE("greedy policy breaks ties toward the lowest index") {
  CHECK(greedy_policy(TableModel({0.3, 0.7, 0.7}), {0.0}) == ArmIndex{1});
  CHECK(greedy_policy(ConstantModel(4, 0.0), {0.0}) == ArmIndex{0});
  const std::vector<double> v{0.1, 0.1};
  CHECK(argmax_lowest(v) == ArmIndex{0});
}

TEST_CASE("require_distribution") {
  const std::vector<double> ok{0.25, 0.75};
  CHECK_NOTHROW(require_distribution(ok));
  const std::vector<double> short_mass{0.25, 0.7};
  CHECK_THROWS_AS(require_distribution(short_mass), std::invalid_argument);
  const std::vector<double> negative{1.25, -0.25};
  CHECK_THROWS_AS(require_distribution(negative), std::invalid_argument);
  const std::vector<double> nan{std::numeric_limits<double>::quiet_NaN(), 1.0};
  CHECK_THROWS_AS(require_distribution(nan), std::invalid_argument);
}

TEST_CASE("sample_arm inverts the cumulative distribution") {
  const std::vector<double> p{0.2, 0.0, 0.8};
  CHECK(sample_arm(p, 0.0) == ArmIndex{0});
  CHECK(sample_arm(p, 0.1999) == ArmIndex{0});
  CHECK(sample_arm(p, 0.2) == ArmIndex{2});
  CHECK(sample_arm(p, 0.999999) == ArmIndex{2});
}

TEST_CASE("built-in kernels") {
  const Context x{0.3};
  CHECK(UniformKernel(4).probabilities(x) == std::vector<double>(4, 0.25));
  auto f = std::make_shared<TableModel>(std::vector<double>{0.2, 0.9, 0.4});
  CHECK(GreedyKernel(f).probabilities(x) == std::vector<double>{0.0, 1.0, 0.0});
  CHECK(FixedKernel({0.5, 0.5}).probabilities(x) == std::vector<double>{0.5, 0.5});
  CHECK_THROWS_AS(FixedKernel({0.5, 0.6}), std::invalid_argument);
}

TEST_CASE("epoch schedule") {
  const EpochSchedule s(2);
  CHECK(s.tau(0) == 0);
  CHECK(s.tau(1) == 2);
  CHECK(s.tau(3) == 8);
  CHECK(s.length(1) == 2);
  CHECK(s.length(4) == 8);

  SUBCASE("tau1 = 2 maps rounds to epochs") {
    CHECK(s.epoch_of(1) == 1);
    CHECK(s.epoch_of(2) == 1);
    CHECK(s.epoch_of(3) == 2);
    CHECK(s.epoch_of(4) == 2);
    CHECK(s.epoch_of(5) == 3);
    CHECK(epoch_of(131072, s) == 17);
    CHECK(epoch_of(131073, s) == 18);
  }
  SUBCASE("epoch_of agrees with tau on every boundary") {
    const EpochSchedule s32(32);
    for (int m = 1; m < 40; ++m) {
      CHECK(s32.epoch_of(s32.tau(m)) == m);
      CHECK(s32.epoch_of(s32.tau(m - 1) + 1) == m);
    }
  }
  SUBCASE("domain errors") {
    CHECK_THROWS_AS(EpochSchedule(1), std::invalid_argument);
    CHECK_THROWS(s.epoch_of(0));
    CHECK_THROWS(s.tau(-1));
    CHECK_THROWS(s.tau(80));
    CHECK_NOTHROW(s.epoch_of(std::numeric_limits<std::uint64_t>::max() / 4));
  }
}

TEST_CASE("run trace validation") {
  RunTrace trace;
  trace.tag.tau1 = 2;
  for (std::uint64_t t = 1; t <= 4; ++t) {
    RoundRecord r;
    r.t = t;
    r.epoch = t <= 2 ? 1 : 2;
    r.rewards = {0.0, 1.0};
    trace.rounds.push_back(r);
  }
  CHECK_NOTHROW(trace.validate());

  SUBCASE("gap in rounds") {
    trace.rounds[2].t = 7;
    CHECK_THROWS_AS(trace.validate(), std::logic_error);
  }
  SUBCASE("wrong epoch") {
    trace.rounds[2].epoch = 1;
    CHECK_THROWS_AS(trace.validate(), std::logic_error);
  }
  SUBCASE("safe flag may not come back") {
    trace.rounds[1].safe = false;
    CHECK_THROWS_AS(trace.validate(), std::logic_error);
    trace.rounds[2].safe = false;
    trace.rounds[3].safe = false;
    CHECK_NOTHROW(trace.validate());
  }
  SUBCASE("realized regret uses the full reward vector") {
    trace.rounds[0].action = ArmIndex{0};
    trace.rounds[0].optimal_arm = ArmIndex{1};
    CHECK(trace.rounds[0].realized_regret() == 1.0);
  }
}

TEST_CASE("rng streams are reproducible and well formed") {
  Rng a(7), b(7), c(8);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    differs = differs || (u != c.uniform());
  }
  CHECK(differs);

  SUBCASE("normal moments") {
    Rng r(11);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double z = r.normal();
      sum += z;
      sq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(sq / n == doctest::Approx(1.0).epsilon(0.01));
  }
  SUBCASE("below stays in range and hits every value") {
    Rng r(3);
    std::vector<int> seen(5, 0);
    for (int i = 0; i < 1000; ++i) ++seen[r.below(5)];
    for (int s : seen) CHECK(s > 0);
    CHECK_THROWS(r.below(0));
  }
  CHECK(run_seed(100, 3) == 103);
  CHECK(splitmix64(0) != splitmix64(1));
}
