#include "falcon/oracle.hpp"

#include <fmt/format.h>

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <stdexcept>

namespace falcon {

double xi(const EstimationRate& rate, std::uint64_t n, double zeta) {
  if (n == 0) throw std::invalid_argument("estimation rate needs n >= 1");
  if (!(zeta > 0.0 && zeta < 1.0)) {
    throw std::invalid_argument(fmt::format("zeta = {} is outside (0, 1)", zeta));
  }
  return rate.evaluate(n, zeta);
}

double ChiSquared2Rate::evaluate(std::uint64_t n, double zeta) const {
  return -2.0 * std::log(zeta) / static_cast<double>(n);
}

CommonRate::CommonRate(CommonRateParams params) : params_(params) {
  if (!(params_.c > 0.0)) throw std::invalid_argument("common rate needs C > 0");
  if (!(params_.rho > 0.0 && params_.rho <= 1.0)) {
    throw std::invalid_argument("common rate needs rho in (0, 1]");
  }
  if (!(params_.rho_prime >= 0.0)) throw std::invalid_argument("common rate needs rho' >= 0");
  if (!(params_.complexity > 0.0)) throw std::invalid_argument("common rate needs comp(F) > 0");
}

double CommonRate::evaluate(std::uint64_t n, double zeta) const {
  if (n < params_.n0) return 1.0;
  const double dn = static_cast<double>(n);
  return params_.c * std::pow(std::log(dn), params_.rho_prime) * std::log(1.0 / zeta) *
         params_.complexity / std::pow(dn, params_.rho);
}

std::string CommonRate::describe() const {
  return fmt::format("common rate (C={}, rho={}, rho'={}, comp={}, n0={})", params_.c,
                     params_.rho, params_.rho_prime, params_.complexity, params_.n0);
}

std::string RateValidationReport::summary() const {
  if (passed) return fmt::format("pass ({} evaluations)", evaluations);
  const auto& v = *violation;
  if (v.condition == RateViolation::Condition::NonIncreasing) {
    return fmt::format("fail: xi(n, delta/ln n) increases at n={} ({:.12g} > {:.12g})", v.n,
                       v.value, v.reference);
  }
  return fmt::format("fail: xi({}, {:.6g}) = {:.12g} is below ln(1/zeta)/n = {:.12g}", v.n,
                     v.zeta, v.value, v.reference);
}

RateValidationReport validate_rate(const EstimationRate& rate, double delta,
                                   std::uint64_t n_max, std::uint64_t monotone_from) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must be in (0, 1)");
  if (n_max < 4) throw std::invalid_argument("validate_rate needs n_max >= 4");
  constexpr std::array kZetaGrid{1e-12, 1e-9, 1e-6, 1e-4, 1e-3, 0.01, 0.05,
                                 0.1,   0.2,  0.3,  0.5,  0.7,  0.9,  0.999};
  // Relative slack for rounding when comparing neighbouring values.
  constexpr double kSlack = 1e-12;

  RateValidationReport report;
  auto fail = [&](RateViolation v) {
    report.passed = false;
    report.violation = v;
    return report;
  };

  double previous = 0.0;
  bool have_previous = false;
  for (std::uint64_t n = 2; n <= n_max; ++n) {
    const double dn = static_cast<double>(n);
    const double zeta_n = delta / std::log(dn);
    const bool zeta_n_ok = zeta_n > 0.0 && zeta_n < 1.0;

    auto check_floor = [&](double zeta) -> std::optional<RateViolation> {
      const double value = xi(rate, n, zeta);
      ++report.evaluations;
      const double floor = std::log(1.0 / zeta) / dn;
      if (value < floor * (1.0 - kSlack)) {
        return RateViolation{RateViolation::Condition::LowerBound, n, zeta, value, floor};
      }
      return std::nullopt;
    };
    for (double zeta : kZetaGrid) {
      if (auto v = check_floor(zeta)) return fail(*v);
    }
    if (zeta_n_ok) {
      if (auto v = check_floor(zeta_n)) return fail(*v);
    }

    if (n < monotone_from) continue;
    if (!zeta_n_ok) {
      have_previous = false;
      continue;
    }
    const double value = xi(rate, n, zeta_n);
    ++report.evaluations;
    if (have_previous && value > previous * (1.0 + kSlack)) {
      return fail(RateViolation{RateViolation::Condition::NonIncreasing, n, zeta_n, value,
                                previous});
    }
    previous = value;
    have_previous = true;
  }
  return report;
}

double LinearPerArmModel::raw(const Context& x, ArmIndex a) const {
  const auto& fit = arms_.at(a.value);
  double y = fit.intercept;
  const std::size_t d = std::min(fit.slope.size(), x.size());
  for (std::size_t j = 0; j < d; ++j) y += fit.slope[j] * x[j];
  return y;
}

LinearPerArmOracle::LinearPerArmOracle(std::size_t num_arms, std::size_t context_dim)
    : num_arms_(num_arms), dim_(context_dim) {
  if (num_arms == 0) throw std::invalid_argument("oracle needs at least one arm");
}

ModelPtr LinearPerArmOracle::fit(std::span<const Sample> data) const { return fit_linear(data); }

std::shared_ptr<const LinearPerArmModel> LinearPerArmOracle::fit_linear(
    std::span<const Sample> data) const {
  if (data.empty()) throw std::invalid_argument("cannot fit on an empty dataset");

  const auto d = static_cast<Eigen::Index>(dim_);
  std::vector<std::size_t> count(num_arms_, 0);
  std::vector<Eigen::VectorXd> x_mean(num_arms_, Eigen::VectorXd::Zero(d));
  std::vector<double> y_mean(num_arms_, 0.0);

  for (const auto& s : data) {
    if (s.arm.value >= num_arms_) throw std::invalid_argument("sample arm out of range");
    if (s.context.size() != dim_) throw std::invalid_argument("sample context has wrong dimension");
    const auto a = s.arm.value;
    ++count[a];
    x_mean[a] += Eigen::Map<const Eigen::VectorXd>(s.context.data(), d);
    y_mean[a] += s.reward;
  }
  for (std::size_t a = 0; a < num_arms_; ++a) {
    if (count[a] == 0) continue;
    x_mean[a] /= static_cast<double>(count[a]);
    y_mean[a] /= static_cast<double>(count[a]);
  }

  // Centered second pass: Sxx = sum (x - xbar)(x - xbar)^T, Sxy = sum (x - xbar)(y - ybar).
  std::vector<Eigen::MatrixXd> sxx(num_arms_, Eigen::MatrixXd::Zero(d, d));
  std::vector<Eigen::VectorXd> sxy(num_arms_, Eigen::VectorXd::Zero(d));
  std::vector<double> scale(num_arms_, 0.0);
  for (const auto& s : data) {
    const auto a = s.arm.value;
    const Eigen::VectorXd dx = Eigen::Map<const Eigen::VectorXd>(s.context.data(), d) - x_mean[a];
    sxx[a].noalias() += dx * dx.transpose();
    sxy[a] += dx * (s.reward - y_mean[a]);
    scale[a] += Eigen::Map<const Eigen::VectorXd>(s.context.data(), d).squaredNorm();
  }

  std::vector<LinearPerArmModel::ArmFit> arms(num_arms_);
  for (std::size_t a = 0; a < num_arms_; ++a) {
    auto& out = arms[a];
    out.samples = count[a];
    out.slope.assign(dim_, 0.0);
    if (count[a] == 0) {
      out.intercept = 0.5;
      continue;
    }
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
    if (count[a] >= 2 && d > 0) {
      // Pseudo-inverse on the centered scatter; directions with no spread
      // relative to the raw second moment carry no slope.
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sxx[a]);
      const double cutoff = 1e-12 * (scale[a] + 1.0);
      const Eigen::VectorXd proj = eig.eigenvectors().transpose() * sxy[a];
      Eigen::VectorXd coeff = Eigen::VectorXd::Zero(d);
      for (Eigen::Index j = 0; j < d; ++j) {
        if (eig.eigenvalues()(j) > cutoff) coeff(j) = proj(j) / eig.eigenvalues()(j);
      }
      beta = eig.eigenvectors() * coeff;
    }
    out.intercept = y_mean[a] - beta.dot(x_mean[a]);
    for (std::size_t j = 0; j < dim_; ++j) out.slope[j] = beta(static_cast<Eigen::Index>(j));
  }
  return std::make_shared<const LinearPerArmModel>(std::move(arms));
}

ModelPtr fit(const RegressionOracle& oracle, std::span<const Sample> data) {
  if (data.empty()) throw std::invalid_argument("cannot fit on an empty dataset");
  return oracle.fit(data);
}

}  // namespace falcon
