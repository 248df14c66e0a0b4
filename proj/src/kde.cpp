#include "pfkde/kde.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <string>

#include "pfkde/log.hpp"
#include "pfkde/parallel.hpp"
#include "pfkde/summation.hpp"

namespace pfkde {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxDim = 16;
using Point = std::array<double, kMaxDim>;

double ipow(double base, std::size_t e) {
  double r = 1.0;
  for (std::size_t i = 0; i < e; ++i) r *= base;
  return r;
}

}  // namespace

std::uint64_t min_particles(std::uint64_t k, std::size_t d, unsigned deriv_order) {
  if (k == 0) throw std::invalid_argument("min_particles: k must be at least 1");
  const std::size_t e = 2 * (d + deriv_order + 1);
  std::uint64_t r = 1;
  for (std::size_t i = 0; i < e; ++i) {
    if (__builtin_mul_overflow(r, k, &r)) {
      throw std::overflow_error("min_particles: k^" + std::to_string(e) + " overflows 64 bits for k = " +
                                std::to_string(k));
    }
  }
  return r;
}

std::uint64_t k_of_n(std::uint64_t n, std::size_t d) {
  if (n == 0) throw std::invalid_argument("k_of_n: N must be at least 1");
  const double e = 2.0 * (static_cast<double>(d) + 1.0);
  auto fits = [&](std::uint64_t k) {
    try {
      return min_particles(k, d, 0) <= n;
    } catch (const std::overflow_error&) {
      return false;
    }
  };
  auto k = static_cast<std::uint64_t>(std::floor(std::pow(static_cast<double>(n), 1.0 / e)));
  k = std::max<std::uint64_t>(k, 1);
  while (k > 1 && !fits(k)) --k;
  while (fits(k + 1)) ++k;
  return k;
}

Hypercube Hypercube::for_k(unsigned k, std::size_t dim, double beta, double p_exponent) {
  if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("Hypercube: beta must be in [0, 1)");
  if (!(p_exponent > 0.0)) throw std::invalid_argument("Hypercube: p must be positive");
  if (dim == 0 || k == 0) throw std::invalid_argument("Hypercube: k and dim must be positive");
  Hypercube c;
  c.dim = dim;
  c.beta = beta;
  c.p_exponent = p_exponent;
  c.half_width = 0.5 * std::pow(static_cast<double>(k), beta / (static_cast<double>(dim) * p_exponent));
  return c;
}

double Hypercube::volume() const { return std::pow(2.0 * half_width, static_cast<double>(dim)); }

bool Hypercube::contains(std::span<const double> x) const {
  if (x.size() != dim) throw std::invalid_argument("Hypercube: dimension mismatch");
  return std::all_of(x.begin(), x.end(), [&](double v) { return std::fabs(v) <= half_width; });
}

DensityEstimator::DensityEstimator(ParticleCloud cloud, Kernel kernel, unsigned k,
                                   EstimatorOptions options)
    : cloud_(std::move(cloud)),
      kernel_(kernel),
      k_(k),
      options_(options),
      index_(cloud_, k == 0 ? kInf
                            : (kernel.compact() ? 1.0 : options.cutoff.value_or(kInf)) /
                                  static_cast<double>(k)) {
  if (k_ == 0) throw std::invalid_argument("DensityEstimator: k must be at least 1");
  if (kernel_.dim() != cloud_.dim()) {
    throw std::invalid_argument("DensityEstimator: kernel and cloud dimensions differ");
  }
  if (options_.cutoff && !(*options_.cutoff > 0.0)) {
    throw std::invalid_argument("DensityEstimator: cutoff must be positive");
  }
}

double DensityEstimator::cut() const {
  return kernel_.compact() ? 1.0 : options_.cutoff.value_or(kInf);
}

bool DensityEstimator::resolved(unsigned deriv_order) const {
  try {
    return cloud_.size() >= min_particles(k_, cloud_.dim(), deriv_order);
  } catch (const std::overflow_error&) {
    return false;
  }
}

void DensityEstimator::warn_unresolved(unsigned order) const {
  const std::uint32_t bit = 1u << std::min(order, 31u);
  if ((warned_.load(std::memory_order_relaxed) & bit) != 0 || resolved(order)) return;
  if ((warned_.fetch_or(bit) & bit) != 0) return;
  warn("N = " + std::to_string(cloud_.size()) + " particles is below k^(2(d+|alpha|+1)) for k = " +
       std::to_string(k_) + ", |alpha| = " + std::to_string(order) +
       "; the estimate is under-smoothed");
}

namespace {

// Sum over sources of w * g(u) with u = k (x - s), restricted to the box
// |u_i| <= cut. `g` receives the scaled offset and returns the unnormalized
// kernel term.
template <typename G>
double accumulate_terms(const SourceIndex& index, std::span<const double> x, double k, double cut,
                        G&& g) {
  const std::size_t d = index.dim();
  CompensatedSum acc;
  Point u{};
  const auto w = index.weights();
  index.for_each_range(x, cut / k, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      bool inside = true;
      for (std::size_t a = 0; a < d; ++a) {
        u[a] = k * (x[a] - index.coords(a)[j]);
        inside = inside && std::fabs(u[a]) <= cut;
      }
      if (!inside) continue;
      acc.add(w[j] * g(std::span<const double>(u.data(), d)));
    }
  });
  return acc.value();
}

double gaussian_sum_2d(const SourceIndex& index, std::span<const double> x, double k, double cut) {
  CompensatedSum acc;
  const auto w = index.weights();
  const auto c0 = index.coords(0);
  const auto c1 = index.coords(1);
  const double x0 = x[0], x1 = x[1];
  index.for_each_range(x, cut / k, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      const double u0 = k * (x0 - c0[j]);
      const double u1 = k * (x1 - c1[j]);
      if (std::fabs(u0) <= cut && std::fabs(u1) <= cut) {
        acc.add(w[j] * std::exp(-0.5 * (u0 * u0 + u1 * u1)));
      }
    }
  });
  return acc.value();
}

// Unnormalized value term for each kernel.
double unit_value(const Kernel& kernel, std::span<const double> u) {
  switch (kernel.type()) {
    case KernelType::gaussian: {
      double s = 0.0;
      for (double v : u) s += v * v;
      return std::exp(-0.5 * s);
    }
    case KernelType::laplacian: {
      double s = 0.0;
      for (double v : u) s += std::fabs(v);
      return std::exp(-s / kernel.laplace_scale());
    }
    case KernelType::epanechnikov: {
      double s = 0.0;
      for (double v : u) s += v * v;
      return s < 1.0 ? 1.0 - s : 0.0;
    }
  }
  return 0.0;
}

double value_sum(const Kernel& kernel, const SourceIndex& index, std::span<const double> x, double k,
                 double cut) {
  if (kernel.type() == KernelType::gaussian && index.dim() == 2) {
    return gaussian_sum_2d(index, x, k, cut);
  }
  return accumulate_terms(index, x, k, cut,
                          [&](std::span<const double> u) { return unit_value(kernel, u); });
}

}  // namespace

double DensityEstimator::density(std::span<const double> x) const {
  if (x.size() != cloud_.dim()) throw std::invalid_argument("density: dimension mismatch");
  warn_unresolved(0);
  const double k = static_cast<double>(k_);
  return ipow(k, cloud_.dim()) * kernel_.peak() * value_sum(kernel_, index_, x, k, cut());
}

double DensityEstimator::sum_derivative(const MultiIndex& alpha, std::span<const double> x) const {
  const double k = static_cast<double>(k_);
  return accumulate_terms(index_, x, k, cut(),
                          [&](std::span<const double> u) { return kernel_.derivative(alpha, u); });
}

double DensityEstimator::derivative(const MultiIndex& alpha, std::span<const double> x) const {
  if (x.size() != cloud_.dim() || alpha.dim() != cloud_.dim()) {
    throw std::invalid_argument("derivative: dimension mismatch");
  }
  if (alpha.kind() == MultiIndex::Kind::zero) return density(x);
  warn_unresolved(alpha.order());
  const double scale = ipow(static_cast<double>(k_), cloud_.dim() + alpha.order());
  return scale * sum_derivative(alpha, x);
}

double DensityEstimator::density_and_gradient(std::span<const double> x,
                                              std::span<double> grad) const {
  const std::size_t d = cloud_.dim();
  if (x.size() != d || grad.size() != d) throw std::invalid_argument("gradient: dimension mismatch");
  warn_unresolved(1);
  const double k = static_cast<double>(k_);
  const double c = cut();
  CompensatedSum value;
  std::array<CompensatedSum, kMaxDim> partial{};
  Point u{};
  const auto w = index_.weights();
  index_.for_each_range(x, c / k, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      bool inside = true;
      for (std::size_t a = 0; a < d; ++a) {
        u[a] = k * (x[a] - index_.coords(a)[j]);
        inside = inside && std::fabs(u[a]) <= c;
      }
      if (!inside) continue;
      const std::span<const double> us(u.data(), d);
      const double phi = unit_value(kernel_, us);
      value.add(w[j] * phi);
      switch (kernel_.type()) {
        case KernelType::gaussian:
          for (std::size_t a = 0; a < d; ++a) partial[a].add(-w[j] * u[a] * phi);
          break;
        case KernelType::laplacian:
          for (std::size_t a = 0; a < d; ++a) {
            if (u[a] != 0.0) {
              partial[a].add(-w[j] * (u[a] > 0.0 ? 1.0 : -1.0) / kernel_.laplace_scale() * phi);
            }
          }
          break;
        case KernelType::epanechnikov:
          // phi > 0 exactly when ||u|| < 1; partial = -2 u_a in unnormalized form.
          if (phi > 0.0) {
            for (std::size_t a = 0; a < d; ++a) partial[a].add(-2.0 * w[j] * u[a]);
          }
          break;
      }
    }
  });
  const double scale0 = ipow(k, d) * kernel_.peak();
  for (std::size_t a = 0; a < d; ++a) grad[a] = scale0 * k * partial[a].value();
  return scale0 * value.value();
}

std::vector<double> DensityEstimator::gradient(std::span<const double> x) const {
  std::vector<double> g(cloud_.dim());
  density_and_gradient(x, g);
  return g;
}

double DensityEstimator::truncated_density(const Hypercube& cube, std::span<const double> x) const {
  return cube.contains(x) ? density(x) : 0.0;
}

double DensityEstimator::naive_density(std::span<const double> x) const {
  const std::size_t d = cloud_.dim();
  const double c = cut();
  const double k = static_cast<double>(k_);
  CompensatedSum acc;
  std::vector<double> diff(d);
  for (std::size_t n = 0; n < cloud_.size(); ++n) {
    const auto p = cloud_.particle(n);
    bool inside = true;
    for (std::size_t a = 0; a < d; ++a) {
      diff[a] = x[a] - p[a];
      inside = inside && std::fabs(k * diff[a]) <= c;
    }
    if (inside) acc.add(rescale_evaluate(kernel_, k_, diff));
  }
  return acc.value() / static_cast<double>(cloud_.size());
}

std::vector<double> DensityEstimator::density_on_grid(const Grid& grid) const {
  const std::size_t d = cloud_.dim();
  if (grid.dim() != d) throw std::invalid_argument("density_on_grid: grid dimension mismatch");
  warn_unresolved(0);
  const double k = static_cast<double>(k_);
  const double c = cut();
  const double reach_x = c / k;
  const auto& counts = grid.counts();
  const std::size_t total = grid.size();

  std::vector<std::vector<double>> axis_coord(d);
  for (std::size_t a = 0; a < d; ++a) {
    axis_coord[a].resize(counts[a]);
    for (std::size_t j = 0; j < counts[a]; ++j) axis_coord[a][j] = grid.coordinate(a, j);
  }
  std::vector<std::size_t> stride(d, 1);
  for (std::size_t a = d - 1; a > 0; --a) stride[a - 1] = stride[a] * counts[a];

  std::vector<double> sum(total, 0.0), comp(total, 0.0);
  const bool separable = kernel_.separable();
  const auto w = index_.weights();

  parallel_for(counts[0], options_.threads, [&](std::size_t row_begin, std::size_t row_end) {
    std::vector<std::vector<double>> term(d);
    std::array<std::size_t, kMaxDim> lo{}, hi{}, cur{};
    for (std::size_t j = 0; j < index_.size(); ++j) {
      bool empty = false;
      for (std::size_t a = 0; a < d && !empty; ++a) {
        const double s = index_.coords(a)[j];
        double l = 0.0, h = static_cast<double>(counts[a]) - 1.0;
        if (std::isfinite(reach_x)) {
          l = std::max(l, std::floor((s - reach_x - grid.offsets()[a]) / grid.step()) - 2.0);
          h = std::min(h, std::ceil((s + reach_x - grid.offsets()[a]) / grid.step()));
        }
        if (a == 0) {
          l = std::max(l, static_cast<double>(row_begin));
          h = std::min(h, static_cast<double>(row_end) - 1.0);
        }
        if (h < l) {
          empty = true;
          break;
        }
        lo[a] = static_cast<std::size_t>(l);
        hi[a] = static_cast<std::size_t>(h);
        term[a].resize(hi[a] - lo[a] + 1);
        for (std::size_t i = lo[a]; i <= hi[a]; ++i) {
          const double u = k * (axis_coord[a][i] - s);
          double& t = term[a][i - lo[a]];
          if (std::fabs(u) > c) {
            t = separable ? 0.0 : 2.0;  // excluded: zero factor / outside the unit ball
          } else {
            t = separable ? kernel_.factor(u) : u * u;
          }
        }
      }
      if (empty) continue;

      auto add = [&](std::size_t flat, double v) {
        const double x = w[j] * v;
        const double t = sum[flat] + x;
        comp[flat] += std::fabs(sum[flat]) >= std::fabs(x) ? (sum[flat] - t) + x : (x - t) + sum[flat];
        sum[flat] = t;
      };

      if (d == 2) {
        const auto& t0 = term[0];
        const auto& t1 = term[1];
        for (std::size_t i0 = lo[0]; i0 <= hi[0]; ++i0) {
          const double a0 = t0[i0 - lo[0]];
          if (separable && a0 == 0.0) continue;
          const std::size_t row = i0 * stride[0];
          for (std::size_t i1 = lo[1]; i1 <= hi[1]; ++i1) {
            const double a1 = t1[i1 - lo[1]];
            if (separable) {
              if (a1 != 0.0) add(row + i1, a0 * a1);
            } else {
              const double r2 = a0 + a1;
              if (r2 < 1.0) add(row + i1, 1.0 - r2);
            }
          }
        }
        continue;
      }

      for (std::size_t a = 0; a < d; ++a) cur[a] = lo[a];
      while (true) {
        std::size_t flat = 0;
        double v = separable ? 1.0 : 0.0;
        for (std::size_t a = 0; a < d; ++a) {
          flat += cur[a] * stride[a];
          const double t = term[a][cur[a] - lo[a]];
          v = separable ? v * t : v + t;
        }
        if (separable) {
          if (v != 0.0) add(flat, v);
        } else if (v < 1.0) {
          add(flat, 1.0 - v);
        }
        std::size_t a = d;
        bool done = true;
        while (a-- > 0) {
          if (++cur[a] <= hi[a]) {
            done = false;
            break;
          }
          cur[a] = lo[a];
        }
        if (done) break;
      }
    }
  });

  const double scale = ipow(k, d) * (separable ? kernel_.factor_norm() : kernel_.peak());
  std::vector<double> out(total);
  for (std::size_t i = 0; i < total; ++i) out[i] = scale * (sum[i] + comp[i]);
  return out;
}

std::vector<double> DensityEstimator::density_at_particles() const {
  warn_unresolved(0);
  const std::size_t d = cloud_.dim();
  const double k = static_cast<double>(k_);
  const double scale = ipow(k, d) * kernel_.peak();
  std::vector<double> unique_values(index_.size());
  parallel_for(index_.size(), options_.threads, [&](std::size_t begin, std::size_t end) {
    Point x{};
    for (std::size_t j = begin; j < end; ++j) {
      for (std::size_t a = 0; a < d; ++a) x[a] = index_.coords(a)[j];
      unique_values[j] = scale * value_sum(kernel_, index_, {x.data(), d}, k, cut());
    }
  });
  std::vector<double> out(cloud_.size());
  const auto map = index_.unique_of_particle();
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = unique_values[map[n]];
  return out;
}

DensityEstimator::ParticleMax DensityEstimator::max_at_particles_scan() const {
  const auto values = density_at_particles();
  ParticleMax best{0, values[0]};
  for (std::size_t n = 1; n < values.size(); ++n) {
    if (values[n] > best.value) best = {n, values[n]};
  }
  return best;
}

namespace {

// sup over |xi| in [rho - delta, rho + delta] of exp(-|xi|^2/2) m(|xi|), with
// m(a) = max_{b <= a} |b^3 - 3b|. This bounds every third directional
// derivative of exp(-|u|^2/2) on the ball of radius delta about a point at
// distance rho.
double third_shape(double t) {
  double m = 0.0;
  if (t < 1.0) {
    m = 3.0 * t - t * t * t;
  } else if (t <= 2.0) {
    m = 2.0;
  } else {
    m = t * t * t - 3.0 * t;
  }
  return std::exp(-0.5 * t * t) * m;
}

double third_derivative_sup(double rho, double delta) {
  const double lo = std::max(0.0, rho - delta);
  const double hi = rho + delta;
  double best = std::max(third_shape(lo), third_shape(hi));
  // interior local maxima at t^2 = 3 - sqrt(6) and t^2 = 3 + sqrt(6)
  for (double c : {0.74196378430272585, 2.3344142183389773}) {
    if (c > lo && c < hi) best = std::max(best, third_shape(c));
  }
  return best;
}

double largest_eigenvalue(const std::array<double, kMaxDim * kMaxDim>& h, std::size_t d) {
  if (d == 1) return h[0];
  if (d == 2) {
    const double a = h[0], b = h[1], c = h[kMaxDim + 1];
    return 0.5 * (a + c) + std::sqrt(0.25 * (a - c) * (a - c) + b * b);
  }
  Matrix m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = h[i * kMaxDim + j];
  return Eigen::SelfAdjointEigenSolver<Matrix>(m, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

struct KdNode {
  std::size_t begin = 0, end = 0;
  Point lo{}, hi{};
  int left = -1, right = -1;
};

}  // namespace

namespace {

struct UniqueBest {
  std::size_t unique = 0;
  double value = -kInf;
  bool set = false;
};

void offer(UniqueBest& best, std::size_t j, double v, std::span<const std::size_t> first) {
  if (!best.set || v > best.value || (v == best.value && first[j] < first[best.unique])) {
    best = {j, v, true};
  }
}

// Drops candidate points whose grid cell cannot hold a value >= the best
// exact value found so far. Around a cell centre c the Gaussian sum is
// exp(-k^2 |delta|^2 / 2) times a convex function of delta, so on the cell
// it is at most exp(k^2 r^2 / 2) times the largest vertex value, r being the
// half diagonal. Vertex values come from the exact grid evaluation plus a
// bound on the truncated tail.
std::vector<std::size_t> screen_cells(const DensityEstimator& est, std::vector<std::size_t> cand,
                                      double spacing, double tail, double s0, UniqueBest& best,
                                      const std::function<double(std::size_t)>& exact) {
  const auto& index = est.index();
  const std::size_t d = index.dim();
  const double k = static_cast<double>(est.k());
  if (cand.size() < 64) return cand;

  std::vector<double> lo(d, kInf), hi(d, -kInf);
  for (std::size_t j : cand) {
    for (std::size_t a = 0; a < d; ++a) {
      lo[a] = std::min(lo[a], index.coords(a)[j]);
      hi[a] = std::max(hi[a], index.coords(a)[j]);
    }
  }
  std::vector<std::size_t> counts(d);
  std::vector<double> offsets(d);
  double points = 1.0;
  for (std::size_t a = 0; a < d; ++a) {
    counts[a] = static_cast<std::size_t>(std::floor((hi[a] - lo[a]) / spacing)) + 2;
    offsets[a] = lo[a] - spacing;
    points *= static_cast<double>(counts[a]);
  }
  if (points > 4e6 || points > 4.0 * static_cast<double>(cand.size())) return cand;

  const Grid grid(offsets, spacing, counts);
  const auto values = est.density_on_grid(grid);
  const double factor = std::exp(0.5 * k * k * static_cast<double>(d) * 0.25 * spacing * spacing) * (1.0 + 1e-12);

  std::vector<std::size_t> stride(d, 1);
  for (std::size_t a = d - 1; a > 0; --a) stride[a - 1] = stride[a] * counts[a];
  std::vector<double> upper(cand.size());
  for (std::size_t i = 0; i < cand.size(); ++i) {
    std::size_t base = 0;
    for (std::size_t a = 0; a < d; ++a) {
      const double f = std::floor((index.coords(a)[cand[i]] - lo[a]) / spacing);
      const auto cell = std::min(static_cast<std::size_t>(std::max(f, 0.0)), counts[a] - 2);
      base += cell * stride[a];
    }
    double m = 0.0;
    for (std::size_t corner = 0; corner < (std::size_t{1} << d); ++corner) {
      std::size_t flat = base;
      for (std::size_t a = 0; a < d; ++a)
        if (corner >> a & 1u) flat += stride[a];
      m = std::max(m, values[flat]);
    }
    upper[i] = factor * (m + tail);
  }

  const auto top = static_cast<std::size_t>(std::max_element(upper.begin(), upper.end()) - upper.begin());
  offer(best, cand[top], exact(cand[top]), index.first_index());

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < cand.size(); ++i)
    if (upper[i] >= best.value) kept.push_back(cand[i]);
  (void)s0;
  return kept;
}

}  // namespace

DensityEstimator::ParticleMax DensityEstimator::max_at_particles() const {
  if (kernel_.type() != KernelType::gaussian) return max_at_particles_scan();

  const std::size_t d = cloud_.dim();
  const double k = static_cast<double>(k_);
  const double c = cut();
  const double reach_x = c / k;
  const double norm = kernel_.peak();
  const double s0 = ipow(k, d) * norm;
  const auto w = index_.weights();
  const auto first = index_.first_index();

  auto exact = [&](std::size_t j) {
    Point x{};
    for (std::size_t a = 0; a < d; ++a) x[a] = index_.coords(a)[j];
    return s0 * value_sum(kernel_, index_, {x.data(), d}, k, c);
  };
  const double tail = std::isfinite(c) ? s0 * std::exp(-0.5 * c * c) : 0.0;

  UniqueBest start;
  std::vector<std::size_t> perm(index_.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (double spacing : {1.0 / k, 0.25 / k}) {
    perm = screen_cells(*this, std::move(perm), spacing, tail, s0, start, exact);
  }

  // kd-tree over the remaining distinct particle locations.
  std::vector<KdNode> nodes;
  nodes.reserve(2 * perm.size() / 16 + 2);
  constexpr std::size_t kLeaf = 8;
  auto build = [&](auto&& self, std::size_t begin, std::size_t end) -> int {
    KdNode node;
    node.begin = begin;
    node.end = end;
    for (std::size_t a = 0; a < d; ++a) {
      node.lo[a] = kInf;
      node.hi[a] = -kInf;
    }
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t a = 0; a < d; ++a) {
        const double v = index_.coords(a)[perm[i]];
        node.lo[a] = std::min(node.lo[a], v);
        node.hi[a] = std::max(node.hi[a], v);
      }
    }
    const int id = static_cast<int>(nodes.size());
    nodes.push_back(node);
    if (end - begin > kLeaf) {
      std::size_t axis = 0;
      for (std::size_t a = 1; a < d; ++a) {
        if (node.hi[a] - node.lo[a] > node.hi[axis] - node.lo[axis]) axis = a;
      }
      if (node.hi[axis] > node.lo[axis]) {
        const std::size_t mid = begin + (end - begin) / 2;
        const auto coord = index_.coords(axis);
        std::nth_element(perm.begin() + static_cast<long>(begin), perm.begin() + static_cast<long>(mid),
                         perm.begin() + static_cast<long>(end),
                         [&](std::size_t l, std::size_t r) { return coord[l] < coord[r]; });
        const int l = self(self, begin, mid);
        const int r = self(self, mid, end);
        nodes[static_cast<std::size_t>(id)].left = l;
        nodes[static_cast<std::size_t>(id)].right = r;
      }
    }
    return id;
  };
  build(build, 0, perm.size());

  // Upper bound over the node's box of the Gaussian sum over every source the
  // truncated sums can reach: third-order Taylor expansion about the box
  // centre with a per-source bound on the remainder.
  auto bound = [&](const KdNode& node) {
    Point center{};
    double ext_max = 0.0, r2 = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      center[a] = 0.5 * (node.lo[a] + node.hi[a]);
      const double e = 0.5 * (node.hi[a] - node.lo[a]);
      ext_max = std::max(ext_max, e);
      r2 += e * e;
    }
    const double r = std::sqrt(r2);
    const double kr = k * r;
    CompensatedSum value, third, nearest;
    std::array<double, kMaxDim> grad{};
    std::array<double, kMaxDim * kMaxDim> hess{};
    index_.for_each_range({center.data(), d}, reach_x + ext_max, [&](std::size_t b, std::size_t e) {
      for (std::size_t j = b; j < e; ++j) {
        double rho2 = 0.0, gap2 = 0.0;
        Point v{};
        for (std::size_t a = 0; a < d; ++a) {
          const double diff = center[a] - index_.coords(a)[j];
          v[a] = k * diff;
          rho2 += v[a] * v[a];
          const double g = k * std::max(0.0, std::fabs(diff) - 0.5 * (node.hi[a] - node.lo[a]));
          gap2 += g * g;
        }
        nearest.add(w[j] * std::exp(-0.5 * gap2));
        const double wphi = w[j] * std::exp(-0.5 * rho2);
        value.add(wphi);
        for (std::size_t a = 0; a < d; ++a) {
          grad[a] -= wphi * v[a];
          for (std::size_t c2 = a; c2 < d; ++c2) {
            hess[a * kMaxDim + c2] += wphi * (v[a] * v[c2] - (a == c2 ? 1.0 : 0.0));
          }
        }
        if (kr > 0.0) third.add(w[j] * third_derivative_sup(std::sqrt(rho2), kr));
      }
    });
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t c2 = 0; c2 < a; ++c2) hess[a * kMaxDim + c2] = hess[c2 * kMaxDim + a];
    double gnorm = 0.0;
    for (std::size_t a = 0; a < d; ++a) gnorm += grad[a] * grad[a];
    gnorm = std::sqrt(gnorm);
    const double lam = std::max(0.0, largest_eigenvalue(hess, d));
    const double taylor = value.value() + gnorm * kr + 0.5 * lam * kr * kr + third.value() * kr * kr * kr / 6.0;
    // each term at its smallest distance to the box; tight away from the mode
    const double u = s0 * std::min(taylor, nearest.value());
    // slack for rounding in the sums above
    return u * (1.0 + 1e-9) + 1e-300;
  };

  ParticleMax best{0, -kInf};
  if (start.set) best = {first[start.unique], start.value};
  Point x{};
  auto evaluate_leaf = [&](const KdNode& node) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const std::size_t j = perm[i];
      for (std::size_t a = 0; a < d; ++a) x[a] = index_.coords(a)[j];
      const double v = s0 * value_sum(kernel_, index_, {x.data(), d}, k, c);
      if (v > best.value || (v == best.value && first[j] < best.index)) best = {first[j], v};
    }
  };

  using Entry = std::pair<double, int>;
  std::priority_queue<Entry> queue;
  queue.emplace(bound(nodes[0]), 0);
  while (!queue.empty()) {
    const auto [upper, id] = queue.top();
    queue.pop();
    if (upper < best.value) break;
    const KdNode& node = nodes[static_cast<std::size_t>(id)];
    if (node.left < 0) {
      evaluate_leaf(node);
      continue;
    }
    for (int child : {node.left, node.right}) {
      const double ub = bound(nodes[static_cast<std::size_t>(child)]);
      if (ub >= best.value) queue.emplace(ub, child);
    }
  }
  return best;
}

}  // namespace pfkde
