#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "pfkde/grid.hpp"
#include "pfkde/kalman.hpp"
#include "pfkde/kde.hpp"
#include "pfkde/model.hpp"

namespace pfkde {

using DensityFn = std::function<double(std::span<const double>)>;

std::vector<double> evaluate_on_grid(const DensityFn& f, const Grid& grid);

/// max |estimate - reference| over grid values.
double sup_error(std::span<const double> estimate, std::span<const double> reference);
double sup_error(const DensityFn& estimate, const DensityFn& reference, const Grid& grid);

/// Riemann sum of |estimate - reference| with cell volume step^d.
double l1_error(std::span<const double> estimate, std::span<const double> reference, const Grid& grid);
double l1_error(const DensityFn& estimate, const DensityFn& reference, const Grid& grid);

/// Half the L1 distance, clamped to [0, 1]. Throws std::domain_error if the
/// quadrature exceeds 1 + 1e-3.
double total_variation(std::span<const double> estimate, std::span<const double> reference,
                       const Grid& grid);

/// Riemann sum of (estimate - reference)^2.
double ise(std::span<const double> estimate, std::span<const double> reference, const Grid& grid);
double ise(const DensityFn& estimate, const DensityFn& reference, const Grid& grid);

/// Riemann sum of the values themselves.
double grid_integral(std::span<const double> values, const Grid& grid);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Least squares line through (log x, log y).
LinearFit fit_loglog(std::span<const double> x, std::span<const double> y);

double median(std::vector<double> values);
double mean(std::span<const double> values);
/// Sample standard deviation (n - 1 denominator); 0 for a single value.
double stddev(std::span<const double> values);

/// Particle-count law used by a convergence sweep.
enum class Regime {
  thm4,  // N = k^{2(d+1)}
  thm6,  // N = k^{2(d+2)}
};

std::uint64_t particles_for(Regime regime, unsigned k, std::size_t d);

struct MiseRow {
  unsigned k = 0;
  std::uint64_t particles = 0;
  double mise = 0.0;
  double std_error = 0.0;
  std::vector<double> ise_values;  // one per replicate
};

struct MiseSetup {
  KernelType kernel = KernelType::epanechnikov;
  std::vector<unsigned> k_ladder;
  std::size_t replicates = 30;
  std::uint64_t base_seed = 1;
  Regime regime = Regime::thm4;
  EstimatorOptions estimator;
};

/// Mean ISE over independent filter replicates for each k, all run on the
/// same observation sequence against the exact filtering density.
std::vector<MiseRow> mise(const LinearGaussianModel& model, std::span<const Vector> observations,
                          const GaussianDensity& truth, const Grid& grid, const MiseSetup& setup);

/// (1/N) sum_n f(p_t^k(x^{(n)})). Throws std::domain_error if f is not finite.
double functional_estimate(const DensityEstimator& est, const std::function<double(double)>& f);

struct EntropyEstimate {
  double value = 0.0;        // nats
  std::size_t floored = 0;   // terms where p_t^k fell below the floor
};

/// -(1/N) sum_n log max(p_t^k(x^{(n)}), floor). Throws std::domain_error if
/// every term is floored.
EntropyEstimate entropy_estimate(const DensityEstimator& est,
                                 double log_floor = std::numeric_limits<double>::min());

/// Per-(k, seed) measurements. Quantities a run did not measure stay empty.
struct ErrorReport {
  unsigned k = 0;
  std::uint64_t particles = 0;
  std::uint64_t seed = 0;
  std::optional<double> sup_error;
  std::optional<double> l1_error;
  std::optional<double> tvd;
  std::optional<double> ise;
  std::optional<double> entropy_est;
  std::optional<double> entropy_true;
  std::optional<double> entropy_abs_err;
  std::optional<double> map_value_gap_grad;
  std::optional<double> map_value_gap_particle;
};

}  // namespace pfkde
