#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pfkde {

enum class KernelType { gaussian, laplacian, epanechnikov };

KernelType parse_kernel(std::string_view name);
std::string_view to_string(KernelType type);

/// Derivative multi-index alpha. Only 0, a unit vector e_i and (1,...,1) are
/// supported by the kernels.
class MultiIndex {
 public:
  enum class Kind { zero, unit, ones };

  /// Throws std::invalid_argument for any other multi-index.
  explicit MultiIndex(std::vector<unsigned> orders);

  static MultiIndex zero(std::size_t dim);
  static MultiIndex unit(std::size_t dim, std::size_t axis);
  static MultiIndex ones(std::size_t dim);

  Kind kind() const { return kind_; }
  std::size_t axis() const { return axis_; }
  std::size_t dim() const { return orders_.size(); }
  unsigned order() const;  // |alpha|
  const std::vector<unsigned>& orders() const { return orders_; }

 private:
  std::vector<unsigned> orders_;
  Kind kind_ = Kind::zero;
  std::size_t axis_ = 0;
};

/// Volume of the unit ball in R^d, pi^{d/2} / Gamma(d/2 + 1).
double unit_ball_volume(std::size_t d);

/// Symmetric probability density phi on R^d with the derivatives needed by
/// the density and gradient estimators.
///
/// Conventions on measure-zero sets: Laplacian partials vanish where x_i = 0
/// and its mixed derivative vanishes if any coordinate is 0; Epanechnikov
/// partials vanish on and outside the unit sphere.
class Kernel {
 public:
  Kernel(KernelType type, std::size_t dim);

  KernelType type() const { return type_; }
  std::size_t dim() const { return dim_; }
  std::string_view name() const { return to_string(type_); }

  double evaluate(std::span<const double> x) const;
  double partial(std::span<const double> x, std::size_t axis) const;
  /// D^1 phi = d^d phi / (dx_1 ... dx_d).
  double mixed(std::span<const double> x) const;
  double derivative(const MultiIndex& alpha, std::span<const double> x) const;

  /// c2 = integral of ||x||^2 phi(x).
  double second_moment() const;
  /// All three kernels are symmetric, so integral of x_i phi(x) is 0.
  bool zero_first_moment() const { return true; }
  /// sup phi = phi(0).
  double peak() const;
  /// True if phi vanishes outside the open unit ball.
  bool compact() const { return type_ == KernelType::epanechnikov; }
  /// True if phi(x) = norm * prod_i f(x_i).
  bool separable() const { return type_ != KernelType::epanechnikov; }

  /// One-dimensional factor f for separable kernels.
  double factor(double u) const;
  /// Constant in front of the product of factors.
  double factor_norm() const { return factor_norm_; }

  /// Laplacian scale b = sqrt(1 / (2d)).
  double laplace_scale() const { return laplace_b_; }

 private:
  KernelType type_;
  std::size_t dim_;
  double norm_ = 0.0;         // phi(0)
  double factor_norm_ = 0.0;  // product-form constant
  double laplace_b_ = 0.0;
  double epan_grad_ = 0.0;    // (d + 2) / v_d
};

double epanechnikov_evaluate(std::size_t d, std::span<const double> x);
double laplacian_evaluate(std::size_t d, std::span<const double> x);
double gaussian_evaluate(std::size_t d, std::span<const double> x);

/// phi_k(x) = k^d phi(k x).
double rescale_evaluate(const Kernel& kernel, unsigned k, std::span<const double> x);

/// D^alpha phi_k(x) = k^{d + |alpha|} (D^alpha phi)(k x).
double rescale_derivative(const Kernel& kernel, unsigned k, const MultiIndex& alpha,
                          std::span<const double> x);

/// Gradient of phi_k at x.
std::vector<double> kernel_gradient(const Kernel& kernel, unsigned k, std::span<const double> x);

/// MISE-optimal Epanechnikov bandwidth for i.i.d. samples from a unit
/// covariance Gaussian. Reference value only; particle clouds are neither
/// i.i.d. nor drawn from p_t.
double epanechnikov_optimal_bandwidth(std::size_t d, std::size_t n);

}  // namespace pfkde
