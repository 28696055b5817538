#include "falcon/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace falcon {

double OutcomeModel::value(const Context& x, ArmIndex a) const {
  return std::clamp(raw(x, a), 0.0, 1.0);
}

std::vector<double> OutcomeModel::values(const Context& x) const {
  std::vector<double> out(num_arms());
  for (std::size_t a = 0; a < out.size(); ++a) out[a] = value(x, ArmIndex{a});
  return out;
}

ArmIndex argmax_lowest(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t a = 1; a < values.size(); ++a) {
    if (values[a] > values[best]) best = a;
  }
  return ArmIndex{best};
}

ArmIndex greedy_policy(const OutcomeModel& f, const Context& x) {
  const auto v = f.values(x);
  return argmax_lowest(v);
}

ArmDistribution UniformKernel::probabilities(const Context&) const {
  return ArmDistribution(num_arms_, 1.0 / static_cast<double>(num_arms_));
}

ArmDistribution GreedyKernel::probabilities(const Context& x) const {
  ArmDistribution p(model_->num_arms(), 0.0);
  p[greedy_policy(*model_, x).value] = 1.0;
  return p;
}

FixedKernel::FixedKernel(ArmDistribution g) : g_(std::move(g)) {
  require_distribution(g_);
}

void require_distribution(std::span<const double> p, double tol) {
  if (p.empty()) throw std::invalid_argument("distribution over zero arms");
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw std::invalid_argument("negative or NaN probability");
    total += v;
  }
  if (std::abs(total - 1.0) > tol) {
    throw std::invalid_argument("probabilities do not sum to 1");
  }
}

ArmIndex sample_arm(std::span<const double> p, double u) {
  double cumulative = 0.0;
  for (std::size_t a = 0; a < p.size(); ++a) {
    cumulative += p[a];
    if (u < cumulative) return ArmIndex{a};
  }
  // u landed in the rounding slack above the last cumulative sum.
  for (std::size_t a = p.size(); a-- > 0;) {
    if (p[a] > 0.0) return ArmIndex{a};
  }
  return ArmIndex{0};
}

EpochSchedule::EpochSchedule(std::uint64_t tau1) : tau1_(tau1) {
  if (tau1 < 2) throw std::invalid_argument("tau1 must be at least 2");
}

std::uint64_t EpochSchedule::tau(int m) const {
  if (m < 0) throw std::invalid_argument("negative epoch index");
  if (m == 0) return 0;
  if (m - 1 >= 63 || (tau1_ >> (63 - (m - 1))) != 0) {
    throw std::overflow_error("epoch boundary exceeds 64 bits");
  }
  return tau1_ << (m - 1);
}

int EpochSchedule::epoch_of(std::uint64_t t) const {
  if (t == 0) throw std::invalid_argument("rounds are numbered from 1");
  int m = 1;
  std::uint64_t end = tau1_;
  while (t > end) {
    ++m;
    if (end > (UINT64_MAX >> 1)) break;
    end <<= 1;
  }
  return m;
}

void RunTrace::validate() const {
  const EpochSchedule schedule(tag.tau1);
  bool was_safe = true;
  for (std::size_t i = 0; i < rounds.size(); ++i) {
    const auto& r = rounds[i];
    if (r.t != i + 1) throw std::logic_error("trace rounds are not contiguous");
    if (r.epoch != schedule.epoch_of(r.t)) throw std::logic_error("trace epoch mismatch");
    if (r.safe && !was_safe) throw std::logic_error("safe flag returned to true");
    was_safe = r.safe;
  }
}

}  // namespace falcon
