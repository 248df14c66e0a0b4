#include <cmath>
#include <limits>

#include "doctest.h"
#include "pfkde/harness.hpp"
#include "pfkde/map_search.hpp"

using namespace pfkde;

namespace {

const Benchmark& bench() {
  static const Benchmark b = prepare_benchmark(ModelConfig::benchmark());
  return b;
}

}  // namespace

TEST_SUITE("map_search") {
  TEST_CASE("zero gradient converges at the start") {
    Vector x0(2);
    x0 << 0.3, -0.1;
    const auto trace = gradient_ascent([](const Vector&) { return 1.0; },
                                       [](const Vector& x) { return Vector::Zero(x.size()).eval(); }, x0);
    CHECK(trace.steps() == 0);
    CHECK(trace.converged);
    CHECK(trace.stop_reason == StopReason::tolerance);
    CHECK(trace.final_point() == x0);
    CHECK(trace.values.size() == trace.iterates.size());
    CHECK(trace.gradient_norms.size() == trace.iterates.size());
  }

  TEST_CASE("ascent on a Gaussian is monotone") {
    const auto g = GaussianDensity::standard(2);
    for (double angle = 0.0; angle < 6.0; angle += 0.7) {
      Vector x0(2);
      x0 << 2.9 * std::cos(angle), 2.9 * std::sin(angle);
      const auto trace = gradient_ascent(g, x0);
      CHECK(trace.converged);
      for (std::size_t i = 1; i < trace.iterates.size(); ++i) {
        CHECK(trace.values[i] >= trace.values[i - 1]);
        CHECK(trace.iterates[i].norm() < trace.iterates[i - 1].norm());
      }
      CHECK(trace.gradient_norms.back() < 1e-8);
      CHECK(trace.final_point().norm() < 1e-6);
    }

    Matrix cov(2, 2);
    cov << 0.6, 0.2, 0.2, 0.4;
    const GaussianDensity h(Vector::Constant(2, 1.0), cov);
    Vector x0(2);
    x0 << -0.5, 2.0;
    const auto trace = gradient_ascent(h, x0);
    for (std::size_t i = 1; i < trace.values.size(); ++i) CHECK(trace.values[i] >= trace.values[i - 1]);
  }

  TEST_CASE("max_iters and non-finite stops") {
    const auto g = GaussianDensity::standard(2);
    AscentOptions opt;
    opt.max_iters = 5;
    const auto capped = gradient_ascent(g, Vector::Constant(2, 2.0), opt);
    CHECK(capped.steps() == 5);
    CHECK(!capped.converged);
    CHECK(capped.stop_reason == StopReason::max_iters);

    const auto nan_trace = gradient_ascent(
        [](const Vector& x) { return x(0) > 1.05 ? std::numeric_limits<double>::quiet_NaN() : x(0); },
        [](const Vector& x) { return Vector::Constant(x.size(), 1.0).eval(); }, Vector::Zero(2));
    CHECK(nan_trace.stop_reason == StopReason::non_finite);
    CHECK(!nan_trace.converged);
    CHECK(nan_trace.values.size() == nan_trace.iterates.size());
  }

  TEST_CASE("particle argmax") {
    const DensityEstimator one(ParticleCloud(2, {0.4, -0.3}, 0, 0), Kernel(KernelType::gaussian, 2), 2);
    const auto a = particle_argmax(one);
    CHECK(a.index == 0);
    CHECK(a.particle(0) == 0.4);
    CHECK(a.particle(1) == -0.3);

    const DensityEstimator same(ParticleCloud(2, std::vector<double>(20, 1.5), 0, 0),
                                Kernel(KernelType::epanechnikov, 2), 2);
    CHECK(particle_argmax(same).index == 0);
  }

  TEST_CASE("estimator ascent and the MAP report") {
    const auto cloud = run_benchmark_filter(bench(), 15625, 1, 1);
    RunContext ctx;
    const DensityEstimator est(cloud, Kernel(KernelType::gaussian, 2), 5, estimator_options(ctx, KernelType::gaussian));
    const Vector x0 = Vector::Constant(2, -2.0);
    const auto report = map_report(est, bench().truth, x0);
    CHECK(report.p_true_max == doctest::Approx(bench().truth.peak()).epsilon(1e-14));
    CHECK(report.gap_grad >= -1e-12);
    CHECK(report.gap_particle >= -1e-12);
    CHECK(report.gap_grad == doctest::Approx(report.p_true_max - bench().truth.pdf(report.trace.final_point())));
    CHECK(report.gap_particle == doctest::Approx(report.p_true_max - bench().truth.pdf(report.argmax.particle)));
    for (std::size_t i = 1; i < report.trace.values.size(); ++i) {
      CHECK(report.trace.values[i] >= report.trace.values[i - 1] - 1e-12);
    }

    const auto direct = gradient_ascent(est, x0);
    CHECK(direct.iterates.size() == report.trace.iterates.size());
    CHECK(direct.final_point() == report.trace.final_point());

    std::vector<Vector> starts{x0, bench().truth.mean()};
    const auto multi = gradient_ascent_multistart(est, starts);
    CHECK(multi.values.back() >= direct.values.back());
  }

  TEST_CASE("ascent from (-2, -2) reaches the mode at k = 9") {
    const auto cloud = run_benchmark_filter(bench(), min_particles(9, 2, 0), 1, 1);
    RunContext ctx;
    const DensityEstimator est(cloud, Kernel(KernelType::gaussian, 2), 9, estimator_options(ctx, KernelType::gaussian));
    const auto trace = gradient_ascent(est, Vector::Constant(2, -2.0));
    CHECK(trace.stop_reason == StopReason::tolerance);
    CHECK((trace.final_point() - bench().truth.mean()).norm() < 0.2);
  }
}
