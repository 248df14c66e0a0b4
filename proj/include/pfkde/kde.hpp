#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pfkde/bpf.hpp"
#include "pfkde/grid.hpp"
#include "pfkde/kernels.hpp"
#include "pfkde/spatial_index.hpp"

namespace pfkde {

/// N(k) = k^{2(d + |alpha| + 1)}, the particle count needed at inverse
/// bandwidth k. Throws std::overflow_error if it does not fit in 64 bits.
std::uint64_t min_particles(std::uint64_t k, std::size_t d, unsigned deriv_order);

/// Largest k with min_particles(k, d, 0) <= N, i.e. floor(N^{1/(2(d+1))}).
std::uint64_t k_of_n(std::uint64_t n, std::size_t d);

/// K_k = [-M_k, M_k]^d with M_k = 0.5 * k^{beta / (d p)}.
struct Hypercube {
  std::size_t dim = 0;
  double half_width = 0.0;
  double beta = 0.0;
  double p_exponent = 0.0;

  static Hypercube for_k(unsigned k, std::size_t dim, double beta, double p_exponent);

  double volume() const;
  bool contains(std::span<const double> x) const;
};

struct EstimatorOptions {
  /// Truncates non-compact kernels to |k (x_i - x_i^{(n)})| <= cutoff on every
  /// axis. Unset means exact evaluation.
  std::optional<double> cutoff;
  std::size_t threads = 1;
};

/// Particle-kernel estimator p_t^k(x) = (1/N) sum_n phi_k(x - x_t^{(n)}) and
/// its derivatives, with bandwidth h = 1/k.
class DensityEstimator {
 public:
  DensityEstimator(ParticleCloud cloud, Kernel kernel, unsigned k, EstimatorOptions options = {});

  const ParticleCloud& cloud() const { return cloud_; }
  const Kernel& kernel() const { return kernel_; }
  unsigned k() const { return k_; }
  double bandwidth() const { return 1.0 / static_cast<double>(k_); }
  const EstimatorOptions& options() const { return options_; }
  const SourceIndex& index() const { return index_; }

  /// True when N >= min_particles(k, d, order). Queries with an unresolved
  /// order log a warning once.
  bool resolved(unsigned deriv_order) const;

  double density(std::span<const double> x) const;
  double derivative(const MultiIndex& alpha, std::span<const double> x) const;
  std::vector<double> gradient(std::span<const double> x) const;
  /// Density and gradient from one pass over the particles.
  double density_and_gradient(std::span<const double> x, std::span<double> grad) const;

  /// p_t^k(x) inside the cube, exactly 0 outside.
  double truncated_density(const Hypercube& cube, std::span<const double> x) const;

  /// p_t^k at every grid point (flat order). Agrees with `density` to within
  /// summation-order rounding.
  std::vector<double> density_on_grid(const Grid& grid) const;

  /// p_t^k(x_t^{(n)}) for every particle n.
  std::vector<double> density_at_particles() const;

  /// Reference implementation: plain loop over all N particles in order.
  double naive_density(std::span<const double> x) const;

  struct ParticleMax {
    std::size_t index = 0;
    double value = 0.0;
  };
  /// Particle with the largest p_t^k, lowest index on ties. Uses a
  /// branch-and-bound search for the Gaussian kernel and a scan otherwise.
  ParticleMax max_at_particles() const;
  /// Same result from a full scan.
  ParticleMax max_at_particles_scan() const;

 private:
  double cut() const;  // |u_i| bound on scaled offsets; +inf when exact
  double reach() const { return cut() / static_cast<double>(k_); }
  void warn_unresolved(unsigned order) const;
  double sum_derivative(const MultiIndex& alpha, std::span<const double> x) const;

  ParticleCloud cloud_;
  Kernel kernel_;
  unsigned k_;
  EstimatorOptions options_;
  SourceIndex index_;
  mutable std::atomic<std::uint32_t> warned_{0};
};

}  // namespace pfkde
