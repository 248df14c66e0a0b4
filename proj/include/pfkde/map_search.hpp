#pragma once

#include <cstddef>
#include <functional>
#include <string_view>
#include <vector>

#include "pfkde/kalman.hpp"
#include "pfkde/kde.hpp"
#include "pfkde/model.hpp"

namespace pfkde {

enum class StopReason { tolerance, max_iters, non_finite };

std::string_view to_string(StopReason reason);

struct AscentTrace {
  std::vector<Vector> iterates;
  std::vector<double> values;
  std::vector<double> gradient_norms;
  bool converged = false;
  StopReason stop_reason = StopReason::max_iters;

  std::size_t steps() const { return iterates.empty() ? 0 : iterates.size() - 1; }
  const Vector& final_point() const { return iterates.back(); }
};

struct AscentOptions {
  double step = 0.1;
  std::size_t max_iters = 10000;
  double grad_tol = 1e-8;
};

/// Fixed-step ascent x(i+1) = x(i) + step * grad(x(i)). Stops once
/// |grad| < grad_tol or after max_iters steps. A non-finite value or gradient
/// ends the trace with StopReason::non_finite.
AscentTrace gradient_ascent(const std::function<double(const Vector&)>& value_fn,
                            const std::function<Vector(const Vector&)>& grad_fn, const Vector& x0,
                            const AscentOptions& options = {});

AscentTrace gradient_ascent(const DensityEstimator& est, const Vector& x0,
                            const AscentOptions& options = {});
AscentTrace gradient_ascent(const GaussianDensity& density, const Vector& x0,
                            const AscentOptions& options = {});

/// Runs one ascent per start and returns the trace with the highest final
/// value (earliest start on ties).
AscentTrace gradient_ascent_multistart(const DensityEstimator& est, const std::vector<Vector>& starts,
                                       const AscentOptions& options = {});

struct ParticleArgmax {
  Vector particle;
  double value = 0.0;
  std::size_t index = 0;
};

/// argmax over particle locations of p_t^k, lowest particle index on ties.
ParticleArgmax particle_argmax(const DensityEstimator& est);

struct MapReport {
  double p_true_max = 0.0;    // p_t(s_t), s_t the oracle mean
  double gap_grad = 0.0;      // p_t(s_t) - p_t(ascent result)
  double gap_particle = 0.0;  // p_t(s_t) - p_t(particle argmax)
  AscentTrace trace;
  ParticleArgmax argmax;
};

MapReport map_report(const DensityEstimator& est, const GaussianDensity& oracle, const Vector& x0,
                     const AscentOptions& options = {});

}  // namespace pfkde
