#include "pfkde/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "pfkde/bpf.hpp"
#include "pfkde/summation.hpp"

namespace pfkde {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw std::invalid_argument("error metric: value arrays must be non-empty and of equal size");
  }
}

double checked(double v, std::size_t i) {
  if (!std::isfinite(v)) {
    throw std::domain_error("error metric: non-finite value at grid point " + std::to_string(i));
  }
  return v;
}

}  // namespace

std::vector<double> evaluate_on_grid(const DensityFn& f, const Grid& grid) {
  std::vector<double> out(grid.size());
  std::vector<double> p(grid.dim());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid.point(i, p);
    out[i] = f(p);
  }
  return out;
}

double sup_error(std::span<const double> estimate, std::span<const double> reference) {
  check_pair(estimate, reference);
  double m = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    m = std::max(m, std::fabs(checked(estimate[i], i) - checked(reference[i], i)));
  }
  return m;
}

double sup_error(const DensityFn& estimate, const DensityFn& reference, const Grid& grid) {
  return sup_error(evaluate_on_grid(estimate, grid), evaluate_on_grid(reference, grid));
}

double l1_error(std::span<const double> estimate, std::span<const double> reference, const Grid& grid) {
  check_pair(estimate, reference);
  if (estimate.size() != grid.size()) throw std::invalid_argument("l1_error: grid size mismatch");
  CompensatedSum acc;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    acc.add(std::fabs(checked(estimate[i], i) - checked(reference[i], i)));
  }
  return acc.value() * grid.cell_volume();
}

double l1_error(const DensityFn& estimate, const DensityFn& reference, const Grid& grid) {
  return l1_error(evaluate_on_grid(estimate, grid), evaluate_on_grid(reference, grid), grid);
}

double total_variation(std::span<const double> estimate, std::span<const double> reference,
                       const Grid& grid) {
  const double tvd = 0.5 * l1_error(estimate, reference, grid);
  if (tvd > 1.0 + 1e-3) {
    throw std::domain_error("total_variation: quadrature gives " + std::to_string(tvd) +
                            " > 1; the grid does not resolve the densities");
  }
  return std::min(tvd, 1.0);
}

double ise(std::span<const double> estimate, std::span<const double> reference, const Grid& grid) {
  check_pair(estimate, reference);
  if (estimate.size() != grid.size()) throw std::invalid_argument("ise: grid size mismatch");
  CompensatedSum acc;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const double diff = checked(estimate[i], i) - checked(reference[i], i);
    acc.add(diff * diff);
  }
  return acc.value() * grid.cell_volume();
}

double ise(const DensityFn& estimate, const DensityFn& reference, const Grid& grid) {
  return ise(evaluate_on_grid(estimate, grid), evaluate_on_grid(reference, grid), grid);
}

double grid_integral(std::span<const double> values, const Grid& grid) {
  if (values.size() != grid.size()) throw std::invalid_argument("grid_integral: size mismatch");
  CompensatedSum acc;
  for (std::size_t i = 0; i < values.size(); ++i) acc.add(checked(values[i], i));
  return acc.value() * grid.cell_volume();
}

LinearFit fit_loglog(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("fit_loglog: need at least two (x, y) pairs");
  }
  const std::size_t n = x.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::domain_error("fit_loglog: values must be positive");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const double mx = mean(lx), my = mean(ly);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx == 0.0) throw std::domain_error("fit_loglog: x values are all equal");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median: empty input");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double mean(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean: empty input");
  CompensatedSum acc;
  for (double v : values) acc.add(v);
  return acc.value() / static_cast<double>(values.size());
}

double stddev(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  CompensatedSum acc;
  for (double v : values) acc.add((v - m) * (v - m));
  return std::sqrt(acc.value() / static_cast<double>(values.size() - 1));
}

std::uint64_t particles_for(Regime regime, unsigned k, std::size_t d) {
  return min_particles(k, d, regime == Regime::thm4 ? 0 : 1);
}

std::vector<MiseRow> mise(const LinearGaussianModel& model, std::span<const Vector> observations,
                          const GaussianDensity& truth, const Grid& grid, const MiseSetup& setup) {
  if (setup.replicates < 1) throw std::invalid_argument("mise: need at least one replicate");
  if (setup.k_ladder.empty()) throw std::invalid_argument("mise: empty k ladder");
  const auto reference = evaluate_on_grid([&](std::span<const double> x) { return truth.pdf(x); }, grid);
  std::vector<MiseRow> rows;
  for (unsigned k : setup.k_ladder) {
    MiseRow row;
    row.k = k;
    row.particles = particles_for(setup.regime, k, model.dim_x());
    for (std::size_t r = 0; r < setup.replicates; ++r) {
      FilterOptions fo;
      fo.particles = row.particles;
      fo.seed = setup.base_seed + r;
      fo.threads = setup.estimator.threads;
      auto cloud = run_filter(model, observations, fo);
      DensityEstimator est(std::move(cloud), Kernel(setup.kernel, model.dim_x()), k, setup.estimator);
      const auto values = est.density_on_grid(grid);
      row.ise_values.push_back(ise(values, reference, grid));
    }
    row.mise = mean(row.ise_values);
    row.std_error = stddev(row.ise_values) / std::sqrt(static_cast<double>(row.ise_values.size()));
    rows.push_back(std::move(row));
  }
  return rows;
}

double functional_estimate(const DensityEstimator& est, const std::function<double(double)>& f) {
  const auto values = est.density_at_particles();
  CompensatedSum acc;
  for (std::size_t n = 0; n < values.size(); ++n) {
    const double v = f(values[n]);
    if (!std::isfinite(v)) {
      throw std::domain_error("functional_estimate: f is not finite at particle " + std::to_string(n));
    }
    acc.add(v);
  }
  return acc.value() / static_cast<double>(values.size());
}

EntropyEstimate entropy_estimate(const DensityEstimator& est, double log_floor) {
  if (!(log_floor > 0.0)) throw std::invalid_argument("entropy_estimate: floor must be positive");
  const auto values = est.density_at_particles();
  EntropyEstimate out;
  CompensatedSum acc;
  for (double p : values) {
    if (!(p >= log_floor)) {
      ++out.floored;
      p = log_floor;
    }
    acc.add(-std::log(p));
  }
  if (out.floored == values.size()) {
    throw std::domain_error("entropy_estimate: every particle fell below the density floor");
  }
  out.value = acc.value() / static_cast<double>(values.size());
  return out;
}

}  // namespace pfkde
