#include "pfkde/kernels.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pfkde {

KernelType parse_kernel(std::string_view name) {
  if (name == "gaussian") return KernelType::gaussian;
  if (name == "laplacian") return KernelType::laplacian;
  if (name == "epanechnikov") return KernelType::epanechnikov;
  throw std::invalid_argument("unknown kernel '" + std::string(name) +
                              "' (expected gaussian, laplacian or epanechnikov)");
}

std::string_view to_string(KernelType type) {
  switch (type) {
    case KernelType::gaussian: return "gaussian";
    case KernelType::laplacian: return "laplacian";
    case KernelType::epanechnikov: return "epanechnikov";
  }
  return "unknown";
}

MultiIndex::MultiIndex(std::vector<unsigned> orders) : orders_(std::move(orders)) {
  if (orders_.empty()) throw std::invalid_argument("MultiIndex: empty multi-index");
  std::size_t ones = 0, nonzero = 0;
  bool other = false;
  for (std::size_t i = 0; i < orders_.size(); ++i) {
    if (orders_[i] == 1) {
      ++ones;
      axis_ = i;
    } else if (orders_[i] != 0) {
      other = true;
    }
    if (orders_[i] != 0) ++nonzero;
  }
  if (other) throw std::invalid_argument("MultiIndex: only orders 0 and 1 per axis are supported");
  if (nonzero == 0) {
    kind_ = Kind::zero;
  } else if (ones == 1) {
    kind_ = Kind::unit;  // for d = 1 this is also (1,...,1)
  } else if (ones == orders_.size()) {
    kind_ = Kind::ones;
  } else {
    throw std::invalid_argument("MultiIndex: supported derivatives are 0, e_i and (1,...,1)");
  }
}

MultiIndex MultiIndex::zero(std::size_t dim) { return MultiIndex(std::vector<unsigned>(dim, 0)); }

MultiIndex MultiIndex::unit(std::size_t dim, std::size_t axis) {
  if (axis >= dim) throw std::invalid_argument("MultiIndex: axis out of range");
  std::vector<unsigned> o(dim, 0);
  o[axis] = 1;
  return MultiIndex(std::move(o));
}

MultiIndex MultiIndex::ones(std::size_t dim) { return MultiIndex(std::vector<unsigned>(dim, 1)); }

unsigned MultiIndex::order() const {
  unsigned s = 0;
  for (auto o : orders_) s += o;
  return s;
}

double unit_ball_volume(std::size_t d) {
  const double h = 0.5 * static_cast<double>(d);
  return std::exp(h * std::log(std::numbers::pi) - std::lgamma(h + 1.0));
}

namespace {

double squared_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

double abs_sum(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += std::fabs(v);
  return s;
}

void check_dim(const Kernel& k, std::span<const double> x) {
  if (x.size() != k.dim()) throw std::invalid_argument("kernel: argument dimension mismatch");
}

}  // namespace

Kernel::Kernel(KernelType type, std::size_t dim) : type_(type), dim_(dim) {
  if (dim == 0) throw std::invalid_argument("Kernel: dimension must be positive");
  const double d = static_cast<double>(dim);
  switch (type_) {
    case KernelType::gaussian:
      norm_ = std::pow(2.0 * std::numbers::pi, -0.5 * d);
      factor_norm_ = norm_;
      break;
    case KernelType::laplacian:
      laplace_b_ = std::sqrt(1.0 / (2.0 * d));
      norm_ = std::pow(1.0 / (2.0 * laplace_b_), d);
      factor_norm_ = norm_;
      break;
    case KernelType::epanechnikov: {
      const double v = unit_ball_volume(dim);
      norm_ = (d + 2.0) / (2.0 * v);
      epan_grad_ = (d + 2.0) / v;
      break;
    }
  }
}

double Kernel::factor(double u) const {
  switch (type_) {
    case KernelType::gaussian: return std::exp(-0.5 * u * u);
    case KernelType::laplacian: return std::exp(-std::fabs(u) / laplace_b_);
    case KernelType::epanechnikov: break;
  }
  throw std::logic_error("Kernel::factor: kernel is not separable");
}

double Kernel::evaluate(std::span<const double> x) const {
  check_dim(*this, x);
  switch (type_) {
    case KernelType::gaussian: return norm_ * std::exp(-0.5 * squared_norm(x));
    case KernelType::laplacian: return norm_ * std::exp(-abs_sum(x) / laplace_b_);
    case KernelType::epanechnikov: {
      const double r2 = squared_norm(x);
      return r2 < 1.0 ? norm_ * (1.0 - r2) : 0.0;
    }
  }
  return 0.0;
}

double Kernel::partial(std::span<const double> x, std::size_t axis) const {
  check_dim(*this, x);
  if (axis >= dim_) throw std::invalid_argument("Kernel::partial: axis out of range");
  const double xi = x[axis];
  switch (type_) {
    case KernelType::gaussian: return -xi * evaluate(x);
    case KernelType::laplacian:
      if (xi == 0.0) return 0.0;
      return -(xi > 0.0 ? 1.0 : -1.0) / laplace_b_ * evaluate(x);
    case KernelType::epanechnikov: return squared_norm(x) < 1.0 ? -epan_grad_ * xi : 0.0;
  }
  return 0.0;
}

double Kernel::mixed(std::span<const double> x) const {
  check_dim(*this, x);
  if (dim_ == 1) return partial(x, 0);
  switch (type_) {
    case KernelType::gaussian: {
      double prod = 1.0;
      for (double v : x) prod *= -v;
      return prod * evaluate(x);
    }
    case KernelType::laplacian: {
      double sign = 1.0;
      for (double v : x) {
        if (v == 0.0) return 0.0;
        if (v > 0.0) sign = -sign;
      }
      const double b2d = std::pow(laplace_b_, 2.0 * static_cast<double>(dim_));
      return sign / (std::pow(2.0, static_cast<double>(dim_)) * b2d) *
             std::exp(-abs_sum(x) / laplace_b_);
    }
    case KernelType::epanechnikov: return 0.0;
  }
  return 0.0;
}

double Kernel::derivative(const MultiIndex& alpha, std::span<const double> x) const {
  if (alpha.dim() != dim_) throw std::invalid_argument("Kernel: multi-index dimension mismatch");
  switch (alpha.kind()) {
    case MultiIndex::Kind::zero: return evaluate(x);
    case MultiIndex::Kind::unit: return partial(x, alpha.axis());
    case MultiIndex::Kind::ones: return mixed(x);
  }
  return 0.0;
}

double Kernel::second_moment() const {
  const double d = static_cast<double>(dim_);
  switch (type_) {
    case KernelType::gaussian: return d;
    case KernelType::laplacian: return d * 2.0 * laplace_b_ * laplace_b_;
    case KernelType::epanechnikov: return d / (d + 4.0);
  }
  return 0.0;
}

double Kernel::peak() const { return norm_; }

double epanechnikov_evaluate(std::size_t d, std::span<const double> x) {
  return Kernel(KernelType::epanechnikov, d).evaluate(x);
}

double laplacian_evaluate(std::size_t d, std::span<const double> x) {
  return Kernel(KernelType::laplacian, d).evaluate(x);
}

double gaussian_evaluate(std::size_t d, std::span<const double> x) {
  return Kernel(KernelType::gaussian, d).evaluate(x);
}

namespace {

std::vector<double> scaled(unsigned k, std::span<const double> x) {
  if (k == 0) throw std::invalid_argument("inverse bandwidth k must be at least 1");
  std::vector<double> u(x.begin(), x.end());
  for (double& v : u) v *= static_cast<double>(k);
  return u;
}

}  // namespace

double rescale_evaluate(const Kernel& kernel, unsigned k, std::span<const double> x) {
  const auto u = scaled(k, x);
  return std::pow(static_cast<double>(k), static_cast<double>(kernel.dim())) * kernel.evaluate(u);
}

double rescale_derivative(const Kernel& kernel, unsigned k, const MultiIndex& alpha,
                          std::span<const double> x) {
  const auto u = scaled(k, x);
  const double scale =
      std::pow(static_cast<double>(k), static_cast<double>(kernel.dim() + alpha.order()));
  return scale * kernel.derivative(alpha, u);
}

std::vector<double> kernel_gradient(const Kernel& kernel, unsigned k, std::span<const double> x) {
  const auto u = scaled(k, x);
  const double scale = std::pow(static_cast<double>(k), static_cast<double>(kernel.dim() + 1));
  std::vector<double> g(kernel.dim());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = scale * kernel.partial(u, i);
  return g;
}

double epanechnikov_optimal_bandwidth(std::size_t d, std::size_t n) {
  const double dd = static_cast<double>(d);
  const double c = 8.0 / unit_ball_volume(d) * (dd + 4.0) *
                   std::pow(2.0 * std::sqrt(std::numbers::pi), dd);
  return std::pow(c, 1.0 / (dd + 4.0)) * std::pow(static_cast<double>(n), -1.0 / (dd + 4.0));
}

}  // namespace pfkde
