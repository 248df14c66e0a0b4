#include "pfkde/map_search.hpp"

#include <cmath>
#include <stdexcept>

namespace pfkde {

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::tolerance: return "tolerance";
    case StopReason::max_iters: return "max_iters";
    case StopReason::non_finite: return "non_finite";
  }
  return "unknown";
}

AscentTrace gradient_ascent(const std::function<double(const Vector&)>& value_fn,
                            const std::function<Vector(const Vector&)>& grad_fn, const Vector& x0,
                            const AscentOptions& options) {
  if (!(options.step > 0.0)) throw std::invalid_argument("gradient_ascent: step must be positive");
  if (options.max_iters < 1) throw std::invalid_argument("gradient_ascent: max_iters must be positive");
  if (!(options.grad_tol > 0.0)) throw std::invalid_argument("gradient_ascent: grad_tol must be positive");

  AscentTrace trace;
  Vector x = x0;
  for (std::size_t i = 0;; ++i) {
    const double v = value_fn(x);
    const Vector g = grad_fn(x);
    if (g.size() != x.size()) throw std::invalid_argument("gradient_ascent: gradient dimension mismatch");
    const double norm = g.norm();
    trace.iterates.push_back(x);
    trace.values.push_back(v);
    trace.gradient_norms.push_back(norm);
    if (!std::isfinite(v) || !g.allFinite() || !x.allFinite()) {
      trace.stop_reason = StopReason::non_finite;
      return trace;
    }
    if (norm < options.grad_tol) {
      trace.stop_reason = StopReason::tolerance;
      trace.converged = true;
      return trace;
    }
    if (i == options.max_iters) {
      trace.stop_reason = StopReason::max_iters;
      return trace;
    }
    x += options.step * g;
  }
}

AscentTrace gradient_ascent(const DensityEstimator& est, const Vector& x0, const AscentOptions& options) {
  // value and gradient come from one pass; cache the last evaluation
  Vector last_x;
  double last_v = 0.0;
  Vector last_g;
  auto eval = [&](const Vector& x) {
    if (last_x.size() == x.size() && last_x == x) return;
    last_g.resize(x.size());
    last_v = est.density_and_gradient(std::span<const double>(x.data(), x.size()),
                                      std::span<double>(last_g.data(), last_g.size()));
    last_x = x;
  };
  return gradient_ascent(
      [&](const Vector& x) {
        eval(x);
        return last_v;
      },
      [&](const Vector& x) {
        eval(x);
        return last_g;
      },
      x0, options);
}

AscentTrace gradient_ascent(const GaussianDensity& density, const Vector& x0, const AscentOptions& options) {
  return gradient_ascent([&](const Vector& x) { return density.pdf(x); },
                         [&](const Vector& x) { return density.gradient(x); }, x0, options);
}

AscentTrace gradient_ascent_multistart(const DensityEstimator& est, const std::vector<Vector>& starts,
                                       const AscentOptions& options) {
  if (starts.empty()) throw std::invalid_argument("gradient_ascent_multistart: no starting points");
  AscentTrace best;
  bool have = false;
  for (const auto& x0 : starts) {
    auto trace = gradient_ascent(est, x0, options);
    if (!have || trace.values.back() > best.values.back()) {
      best = std::move(trace);
      have = true;
    }
  }
  return best;
}

ParticleArgmax particle_argmax(const DensityEstimator& est) {
  const auto m = est.max_at_particles();
  const auto p = est.cloud().particle(m.index);
  ParticleArgmax out;
  out.particle = Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size()));
  out.value = m.value;
  out.index = m.index;
  return out;
}

MapReport map_report(const DensityEstimator& est, const GaussianDensity& oracle, const Vector& x0,
                     const AscentOptions& options) {
  if (oracle.dim() != est.cloud().dim()) throw std::invalid_argument("map_report: dimension mismatch");
  MapReport r;
  r.p_true_max = oracle.peak();
  r.trace = gradient_ascent(est, x0, options);
  r.argmax = particle_argmax(est);
  r.gap_grad = r.p_true_max - oracle.pdf(r.trace.final_point());
  r.gap_particle = r.p_true_max - oracle.pdf(r.argmax.particle);
  return r;
}

}  // namespace pfkde
