#include "pfkde/kalman.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pfkde {

namespace {

constexpr double kSymmetryTol = 1e-12;

}  // namespace

GaussianDensity::GaussianDensity(Vector mean, Matrix covariance)
    : mean_(std::move(mean)), cov_(std::move(covariance)) {
  const auto d = mean_.size();
  if (d == 0 || cov_.rows() != d || cov_.cols() != d) {
    throw std::invalid_argument("GaussianDensity: covariance must be d x d with d = mean size");
  }
  const double scale = std::max(1.0, cov_.cwiseAbs().maxCoeff());
  if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale) {
    throw std::invalid_argument("GaussianDensity: covariance is not symmetric");
  }
  if (d == 2) {
    const double det = cov_(0, 0) * cov_(1, 1) - cov_(0, 1) * cov_(1, 0);
    if (!(cov_(0, 0) > 0.0) || !(det > 0.0)) {
      throw std::invalid_argument("GaussianDensity: covariance is not positive definite");
    }
    precision_.resize(2, 2);
    precision_ << cov_(1, 1) / det, -cov_(0, 1) / det, -cov_(1, 0) / det, cov_(0, 0) / det;
    log_det_ = std::log(det);
  } else {
    Eigen::LLT<Matrix> llt(cov_);
    if (llt.info() != Eigen::Success) {
      throw std::invalid_argument("GaussianDensity: covariance is not positive definite");
    }
    precision_ = llt.solve(Matrix::Identity(d, d));
    log_det_ = 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
  }
  log_norm_ = -0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) + log_det_);
}

GaussianDensity GaussianDensity::standard(std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return GaussianDensity(Vector::Zero(d), Matrix::Identity(d, d));
}

double GaussianDensity::log_pdf(std::span<const double> x) const {
  if (x.size() != dim()) throw std::invalid_argument("GaussianDensity: dimension mismatch");
  const Vector diff = Eigen::Map<const Vector>(x.data(), mean_.size()) - mean_;
  return log_norm_ - 0.5 * diff.dot(precision_ * diff);
}

double GaussianDensity::pdf(std::span<const double> x) const { return std::exp(log_pdf(x)); }

Vector GaussianDensity::gradient(std::span<const double> x) const {
  if (x.size() != dim()) throw std::invalid_argument("GaussianDensity: dimension mismatch");
  const Vector diff = Eigen::Map<const Vector>(x.data(), mean_.size()) - mean_;
  const double value = std::exp(log_norm_ - 0.5 * diff.dot(precision_ * diff));
  return -value * (precision_ * diff);
}

double GaussianDensity::entropy() const {
  const double d = static_cast<double>(dim());
  return 0.5 * (d * std::log(2.0 * std::numbers::pi * std::numbers::e) + log_det_);
}

double GaussianDensity::peak() const { return std::exp(log_norm_); }

double GaussianDensity::squared_l2_norm() const {
  const double d = static_cast<double>(dim());
  return std::exp(-0.5 * (d * std::log(4.0 * std::numbers::pi) + log_det_));
}

double gaussian_pdf(const GaussianDensity& g, const Vector& x) { return g.pdf(x); }
Vector gaussian_gradient(const GaussianDensity& g, const Vector& x) { return g.gradient(x); }

double gaussian_entropy(const GaussianDensity& g) {
  if (!std::isfinite(g.log_determinant())) {
    throw std::domain_error("gaussian_entropy: non-positive covariance determinant");
  }
  return g.entropy();
}

GaussianDensity kalman_step(const GaussianDensity& prior, const Vector& y, const Matrix& a,
                            const Matrix& b, const Matrix& process_cov,
                            const Matrix& observation_cov) {
  const auto d = static_cast<Eigen::Index>(prior.dim());
  if (a.rows() != d || a.cols() != d || b.cols() != d || b.rows() != y.size()) {
    throw std::invalid_argument("kalman_step: inconsistent dimensions");
  }
  const Vector m_pred = a * prior.mean();
  const Matrix p_pred = a * prior.covariance() * a.transpose() + process_cov;

  const Matrix s = b * p_pred * b.transpose() + observation_cov;
  Eigen::LLT<Matrix> llt(s);
  const double s_scale = s.cwiseAbs().maxCoeff();
  if (llt.info() != Eigen::Success ||
      Matrix(llt.matrixL()).diagonal().minCoeff() <= 1e-14 * std::sqrt(std::max(s_scale, 1e-300))) {
    throw std::domain_error("kalman_step: innovation covariance is numerically singular");
  }
  // K = P- B^T S^{-1}
  const Matrix gain = llt.solve(b * p_pred).transpose();
  const Vector mean = m_pred + gain * (y - b * m_pred);

  const Matrix i_kb = Matrix::Identity(d, d) - gain * b;
  Matrix cov = i_kb * p_pred * i_kb.transpose() + gain * observation_cov * gain.transpose();
  cov = 0.5 * (cov + cov.transpose());
  return GaussianDensity(mean, cov);
}

GaussianDensity kalman_step(const GaussianDensity& prior, const Vector& y, const Matrix& a,
                            const Matrix& b) {
  return kalman_step(prior, y, a, b, Matrix::Identity(a.rows(), a.rows()),
                     Matrix::Identity(b.rows(), b.rows()));
}

std::vector<GaussianDensity> kalman_filter(const LinearGaussianModel& model,
                                           std::span<const Vector> observations) {
  std::vector<GaussianDensity> out;
  out.reserve(observations.size());
  GaussianDensity current = GaussianDensity::standard(model.dim_x());
  for (const auto& y : observations) {
    current = kalman_step(current, y, model.a(), model.b(), model.process_cov(),
                          model.observation_cov());
    out.push_back(current);
  }
  return out;
}

}  // namespace pfkde
