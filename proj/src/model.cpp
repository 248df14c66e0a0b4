#include "pfkde/model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace pfkde {

namespace {

using ConstMap = Eigen::Map<const Eigen::VectorXd>;
using MutMap = Eigen::Map<Eigen::VectorXd>;

ConstMap view(std::span<const double> s) {
  return ConstMap(s.data(), static_cast<Eigen::Index>(s.size()));
}
MutMap view(std::span<double> s) { return MutMap(s.data(), static_cast<Eigen::Index>(s.size())); }

Matrix lower_cholesky(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) throw std::invalid_argument(std::string(what) + " must be square");
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument(std::string(what) + " must be symmetric positive definite");
  }
  return llt.matrixL();
}

void check_size(std::span<const double> s, std::size_t n, const char* what) {
  if (s.size() != n) {
    throw std::invalid_argument(std::string(what) + ": expected dimension " + std::to_string(n) +
                                ", got " + std::to_string(s.size()));
  }
}

}  // namespace

double StateSpaceModel::log_likelihood(std::size_t t, std::span<const double> y,
                                       std::span<const double> x) const {
  return std::log(likelihood(t, y, x));
}

LinearGaussianModel::LinearGaussianModel(Matrix a, Matrix b)
    : LinearGaussianModel(a, b, Matrix::Identity(a.rows(), a.rows()),
                          Matrix::Identity(b.rows(), b.rows())) {}

LinearGaussianModel::LinearGaussianModel(Matrix a, Matrix b, Matrix process_cov,
                                         Matrix observation_cov)
    : a_(std::move(a)), b_(std::move(b)), q_(std::move(process_cov)), r_(std::move(observation_cov)) {
  if (a_.rows() == 0 || a_.rows() != a_.cols()) {
    throw std::invalid_argument("A must be a non-empty square matrix");
  }
  if (b_.rows() == 0 || b_.cols() != a_.rows()) {
    throw std::invalid_argument("B must have dim_x columns and at least one row");
  }
  if (q_.rows() != a_.rows()) throw std::invalid_argument("process covariance must be dim_x x dim_x");
  if (r_.rows() != b_.rows()) {
    throw std::invalid_argument("observation covariance must be dim_y x dim_y");
  }
  q_chol_ = lower_cholesky(q_, "process covariance");
  r_chol_ = lower_cholesky(r_, "observation covariance");
  r_chol_inv_ = r_chol_.triangularView<Eigen::Lower>().solve(
      Matrix::Identity(r_.rows(), r_.cols()));
  identity_noise_ = q_.isIdentity(0.0) && r_.isIdentity(0.0);
  const double log_det_r = 2.0 * r_chol_.diagonal().array().log().sum();
  r_log_norm_ = -0.5 * (static_cast<double>(r_.rows()) * std::log(2.0 * std::numbers::pi) + log_det_r);
}

LinearGaussianModel LinearGaussianModel::benchmark() {
  Matrix a(2, 2);
  a << 0.50, -0.35, 0.39, -0.45;
  Matrix b(2, 2);
  b << 0.50, 0.30, -0.80, 0.20;
  return LinearGaussianModel(a, b);
}

void LinearGaussianModel::sample_initial(CounterRng& rng, std::span<double> out) const {
  check_size(out, dim_x(), "initial state");
  for (double& v : out) v = rng.normal();
}

void LinearGaussianModel::sample_transition(std::size_t, std::span<const double> prev,
                                            CounterRng& rng, std::span<double> out) const {
  const auto n = dim_x();
  if (n == 2 && identity_noise_) {
    const double p0 = prev[0], p1 = prev[1];
    const double z0 = rng.normal();
    const double z1 = rng.normal();
    out[0] = a_(0, 0) * p0 + a_(0, 1) * p1 + z0;
    out[1] = a_(1, 0) * p0 + a_(1, 1) * p1 + z1;
    return;
  }
  check_size(prev, n, "previous state");
  check_size(out, n, "next state");
  Vector z(static_cast<Eigen::Index>(n));
  for (auto& v : z) v = rng.normal();
  view(out) = a_ * view(prev) + q_chol_ * z;
}

void LinearGaussianModel::sample_observation(std::size_t, std::span<const double> x,
                                             CounterRng& rng, std::span<double> out) const {
  check_size(x, dim_x(), "state");
  check_size(out, dim_y(), "observation");
  Vector z(static_cast<Eigen::Index>(dim_y()));
  for (auto& v : z) v = rng.normal();
  view(out) = b_ * view(x) + r_chol_ * z;
}

double LinearGaussianModel::log_likelihood(std::size_t, std::span<const double> y,
                                           std::span<const double> x) const {
  if (dim_x() == 2 && dim_y() == 2 && identity_noise_) {
    const double r0 = y[0] - (b_(0, 0) * x[0] + b_(0, 1) * x[1]);
    const double r1 = y[1] - (b_(1, 0) * x[0] + b_(1, 1) * x[1]);
    return r_log_norm_ - 0.5 * (r0 * r0 + r1 * r1);
  }
  check_size(y, dim_y(), "observation");
  check_size(x, dim_x(), "state");
  const Vector resid = view(y) - b_ * view(x);
  return r_log_norm_ - 0.5 * (r_chol_inv_ * resid).squaredNorm();
}

double LinearGaussianModel::likelihood(std::size_t t, std::span<const double> y,
                                       std::span<const double> x) const {
  return std::exp(log_likelihood(t, y, x));
}

double LinearGaussianModel::spectral_radius() const {
  return a_.eigenvalues().cwiseAbs().maxCoeff();
}

Trajectory simulate(const StateSpaceModel& model, std::size_t horizon, std::uint64_t seed) {
  if (horizon == 0) throw std::invalid_argument("simulate: horizon must be at least 1");
  const auto dx = static_cast<Eigen::Index>(model.dim_x());
  const auto dy = static_cast<Eigen::Index>(model.dim_y());
  Trajectory traj;
  traj.seed = seed;
  traj.states.reserve(horizon + 1);
  traj.observations.reserve(horizon);

  Vector x(dx);
  CounterRng init(seed, 0, Phase::simulate_state);
  model.sample_initial(init, {x.data(), static_cast<std::size_t>(x.size())});
  traj.states.push_back(x);
  for (std::size_t t = 1; t <= horizon; ++t) {
    CounterRng state_rng(seed, t, Phase::simulate_state);
    Vector next(dx);
    model.sample_transition(t, {traj.states.back().data(), static_cast<std::size_t>(dx)}, state_rng,
                            {next.data(), static_cast<std::size_t>(dx)});
    CounterRng obs_rng(seed, t, Phase::simulate_observation);
    Vector y(dy);
    model.sample_observation(t, {next.data(), static_cast<std::size_t>(dx)}, obs_rng,
                             {y.data(), static_cast<std::size_t>(dy)});
    traj.states.push_back(std::move(next));
    traj.observations.push_back(std::move(y));
  }
  return traj;
}

double linear_gaussian_likelihood(const Vector& y, const Vector& x, const Matrix& b) {
  if (b.cols() != x.size() || b.rows() != y.size()) {
    throw std::invalid_argument("linear_gaussian_likelihood: B is " + std::to_string(b.rows()) +
                                "x" + std::to_string(b.cols()) + " but x has " +
                                std::to_string(x.size()) + " and y has " +
                                std::to_string(y.size()) + " entries");
  }
  const double dy = static_cast<double>(y.size());
  const double sq = (y - b * x).squaredNorm();
  return std::exp(-0.5 * sq) * std::pow(2.0 * std::numbers::pi, -0.5 * dy);
}

}  // namespace pfkde
