#pragma once

#include <span>
#include <vector>

#include "pfkde/model.hpp"

namespace pfkde {

/// Multivariate normal N(mean, covariance) with a cached factorization.
class GaussianDensity {
 public:
  /// Throws std::invalid_argument unless covariance is symmetric (1e-12)
  /// and positive definite.
  GaussianDensity(Vector mean, Matrix covariance);

  static GaussianDensity standard(std::size_t dim);

  std::size_t dim() const { return static_cast<std::size_t>(mean_.size()); }
  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return cov_; }
  const Matrix& precision() const { return precision_; }
  double log_determinant() const { return log_det_; }

  double pdf(std::span<const double> x) const;
  double pdf(const Vector& x) const { return pdf(std::span<const double>(x.data(), dim())); }
  double log_pdf(std::span<const double> x) const;

  /// -pdf(x) * Sigma^{-1} (x - mean).
  Vector gradient(std::span<const double> x) const;
  Vector gradient(const Vector& x) const { return gradient(std::span<const double>(x.data(), dim())); }

  /// Differential entropy in nats, 0.5 * log((2 pi e)^d |Sigma|).
  double entropy() const;

  /// Density at the mode, ((2 pi)^d |Sigma|)^{-1/2}.
  double peak() const;

  /// Integral of the squared density, 1 / ((4 pi)^{d/2} |Sigma|^{1/2}).
  double squared_l2_norm() const;

 private:
  Vector mean_;
  Matrix cov_;
  Matrix precision_;
  double log_det_ = 0.0;
  double log_norm_ = 0.0;
};

double gaussian_pdf(const GaussianDensity& g, const Vector& x);
Vector gaussian_gradient(const GaussianDensity& g, const Vector& x);
double gaussian_entropy(const GaussianDensity& g);

/// One predict/update cycle of the Kalman filter with noise covariances Q
/// and R. The covariance update uses the Joseph form followed by explicit
/// symmetrization.
GaussianDensity kalman_step(const GaussianDensity& prior, const Vector& y, const Matrix& a,
                            const Matrix& b, const Matrix& process_cov,
                            const Matrix& observation_cov);

/// Identity process and observation noise.
GaussianDensity kalman_step(const GaussianDensity& prior, const Vector& y, const Matrix& a,
                            const Matrix& b);

/// Filtering densities p_1 .. p_T for the given observations, starting from
/// the model prior N(0, I). Element t-1 holds p_t.
std::vector<GaussianDensity> kalman_filter(const LinearGaussianModel& model,
                                           std::span<const Vector> observations);

}  // namespace pfkde
