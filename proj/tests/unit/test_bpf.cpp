#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "doctest.h"
#include "pfkde/bpf.hpp"
#include "pfkde/kalman.hpp"

using namespace pfkde;

namespace {

WeightedStage make_stage(std::vector<double> weights, std::uint64_t seed = 3) {
  WeightedStage s;
  s.dim = 1;
  s.t = 1;
  s.seed = seed;
  s.proposals.resize(weights.size());
  std::iota(s.proposals.begin(), s.proposals.end(), 0.0);
  s.weights = std::move(weights);
  return s;
}

std::vector<std::size_t> counts_of(const ParticleCloud& cloud, std::size_t n) {
  std::vector<std::size_t> c(n, 0);
  for (std::size_t i = 0; i < cloud.size(); ++i) ++c[static_cast<std::size_t>(cloud.particle(i)[0])];
  return c;
}

}  // namespace

TEST_SUITE("bpf") {
  TEST_CASE("bpf_init") {
    const auto model = LinearGaussianModel::benchmark();
    const auto one = bpf_init(model, 1, 5);
    CHECK(one.size() == 1);
    CHECK(std::isfinite(one.particle(0)[0]));

    const std::size_t n = 100000;
    const auto cloud = bpf_init(model, n, 5);
    CHECK(cloud.t() == 0);
    for (std::size_t a = 0; a < 2; ++a) {
      double m = 0.0, v = 0.0;
      for (std::size_t i = 0; i < n; ++i) m += cloud.particle(i)[a];
      m /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) v += (cloud.particle(i)[a] - m) * (cloud.particle(i)[a] - m);
      v /= static_cast<double>(n - 1);
      CHECK(std::abs(m) < 0.02);
      CHECK(std::abs(v - 1.0) < 0.02);
    }

    const auto again = bpf_init(model, n, 5);
    CHECK(std::equal(cloud.data().begin(), cloud.data().end(), again.data().begin()));
    const auto threaded = bpf_init(model, n, 5, 3);
    CHECK(std::equal(cloud.data().begin(), cloud.data().end(), threaded.data().begin()));
  }

  TEST_CASE("normalize_weights") {
    const std::vector<double> raw{std::log(3.0), std::log(1.0)};
    const auto w = normalize_weights(raw);
    CHECK(w[0] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(w[1] == doctest::Approx(0.25).epsilon(1e-15));

    const std::vector<double> flat(7, std::log(0.3));
    for (double x : normalize_weights(flat)) CHECK(x == 1.0 / 7.0);

    // Likelihoods that underflow still normalize through the log shift.
    const auto u = normalize_weights(std::vector<double>{-1000.0, -1000.0 - std::log(3.0)});
    CHECK(u[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(u[1] == doctest::Approx(0.25).epsilon(1e-12));

    const double ninf = -std::numeric_limits<double>::infinity();
    const auto partial = normalize_weights(std::vector<double>{ninf, 0.0});
    CHECK(partial[0] == 0.0);
    CHECK(partial[1] == 1.0);
    CHECK_THROWS_AS(normalize_weights(std::vector<double>{ninf, ninf}), DegenerateWeights);
  }

  TEST_CASE("bpf_propagate_weight") {
    const auto model = LinearGaussianModel::benchmark();
    const auto cloud = bpf_init(model, 2000, 9);
    Vector y(2);
    y << 0.4, -0.9;
    const auto stage = bpf_propagate_weight(cloud, {y.data(), 2}, model);
    CHECK(stage.size() == 2000);
    CHECK(stage.t == 1);
    double total = 0.0;
    for (double w : stage.weights) {
      CHECK(w >= 0.0);
      total += w;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
    // Larger weight for a smaller residual.
    for (std::size_t i = 1; i < 200; ++i) {
      const Eigen::Map<const Vector> a(stage.proposal(i - 1).data(), 2), b(stage.proposal(i).data(), 2);
      const double ra = (y - model.b() * a).norm(), rb = (y - model.b() * b).norm();
      if (ra < rb) CHECK(stage.weights[i - 1] > stage.weights[i]);
      if (rb < ra) CHECK(stage.weights[i] > stage.weights[i - 1]);
    }
    const auto threaded = bpf_propagate_weight(cloud, {y.data(), 2}, model, 4);
    CHECK(threaded.proposals == stage.proposals);
    CHECK(threaded.weights == stage.weights);
  }

  TEST_CASE("propagation under a far observation") {
    const auto model = LinearGaussianModel::benchmark();
    const auto cloud = bpf_init(model, 100, 9);
    const double y[2] = {80.0, -60.0};
    const auto stage = bpf_propagate_weight(cloud, y, model);
    const double total = std::accumulate(stage.weights.begin(), stage.weights.end(), 0.0);
    CHECK(std::abs(total - 1.0) < 1e-12);
  }

  TEST_CASE("multinomial resampling, degenerate weights") {
    std::vector<double> w(50, 0.0);
    w[17] = 1.0;
    CounterRng rng(1, 1, Phase::resample);
    const auto out = multinomial_resample(make_stage(w), rng);
    CHECK(out.size() == 50);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.particle(i)[0] == 17.0);
    CounterRng rng2(1, 1, Phase::resample);
    const auto sys = systematic_resample(make_stage(w), rng2);
    for (std::size_t i = 0; i < sys.size(); ++i) CHECK(sys.particle(i)[0] == 17.0);
  }

  TEST_CASE("multinomial resampling, chi-square under uniform weights") {
    const std::size_t n = 100000;
    const auto stage = make_stage(std::vector<double>(n, 1.0 / static_cast<double>(n)));
    const auto c = counts_of(resample(stage), n);
    double chi2 = 0.0;
    for (auto x : c) chi2 += (static_cast<double>(x) - 1.0) * (static_cast<double>(x) - 1.0);
    // Upper 1% point of chi-square with n - 1 degrees of freedom.
    const double dof = static_cast<double>(n - 1);
    const double z = 2.3263478740408408;
    const double crit = dof * std::pow(1.0 - 2.0 / (9.0 * dof) + z * std::sqrt(2.0 / (9.0 * dof)), 3.0);
    CHECK(chi2 < crit);
  }

  TEST_CASE("expected counts match N w") {
    const std::size_t n = 100;
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 + static_cast<double>(i % 7);
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w) x /= total;

    for (auto scheme : {ResamplingScheme::multinomial, ResamplingScheme::systematic}) {
      const int reps = 1000;
      std::vector<double> sum(n, 0.0);
      for (int r = 0; r < reps; ++r) {
        const auto c = counts_of(resample(make_stage(w, static_cast<std::uint64_t>(r + 1)), scheme), n);
        for (std::size_t i = 0; i < n; ++i) sum[i] += static_cast<double>(c[i]);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double expect = static_cast<double>(n) * w[i];
        const double se = std::sqrt(static_cast<double>(n) * w[i] * (1.0 - w[i]) / reps);
        CHECK(std::abs(sum[i] / reps - expect) < 3.0 * se);
      }
    }
  }

  TEST_CASE("estimate_integral") {
    const auto model = LinearGaussianModel::benchmark();
    const auto cloud = bpf_init(model, 1000, 4);
    CHECK(estimate_integral(cloud, [](std::span<const double>) { return 1.0; }) == 1.0);
    try {
      estimate_integral(cloud, [&](std::span<const double> x) {
        return x.data() == cloud.particle(123).data() ? std::nan("") : 0.0;
      });
      FAIL("expected an exception");
    } catch (const std::domain_error& e) {
      CHECK(std::string(e.what()).find("123") != std::string::npos);
    }
  }

  TEST_CASE("posterior moments approach the Kalman oracle") {
    const auto model = LinearGaussianModel::benchmark();
    const auto traj = simulate(model, 50, 2);
    const auto truth = kalman_filter(model, traj.observations).back();
    const double second = truth.covariance().trace() + truth.mean().squaredNorm();

    std::vector<double> err_mean, err_second;
    for (std::size_t n : {1000u, 100000u}) {
      double sm = 0.0, ss = 0.0;
      const int seeds = 8;
      for (int s = 1; s <= seeds; ++s) {
        FilterOptions opt;
        opt.particles = n;
        opt.seed = static_cast<std::uint64_t>(s);
        const auto cloud = run_filter(model, traj.observations, opt);
        const double m1 = estimate_integral(cloud, [](std::span<const double> x) { return x[0]; });
        const double m2 = estimate_integral(cloud, [](std::span<const double> x) { return x[0] * x[0] + x[1] * x[1]; });
        sm += (m1 - truth.mean()(0)) * (m1 - truth.mean()(0));
        ss += (m2 - second) * (m2 - second);
      }
      err_mean.push_back(std::sqrt(sm / seeds));
      err_second.push_back(std::sqrt(ss / seeds));
    }
    CHECK(err_mean[1] < err_mean[0]);
    CHECK(err_second[1] < err_second[0]);
    CHECK(err_mean[1] < 4.0 / std::sqrt(100000.0));
  }

  TEST_CASE("full run determinism across thread counts") {
    const auto model = LinearGaussianModel::benchmark();
    const auto traj = simulate(model, 20, 2);
    FilterOptions opt;
    opt.particles = 5000;
    opt.seed = 42;
    const auto a = run_filter(model, traj.observations, opt);
    const auto b = run_filter(model, traj.observations, opt);
    opt.threads = 3;
    const auto c = run_filter(model, traj.observations, opt);
    CHECK(a.t() == 20);
    CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
    CHECK(std::equal(a.data().begin(), a.data().end(), c.data().begin()));
    opt.seed = 43;
    const auto d = run_filter(model, traj.observations, opt);
    CHECK(!std::equal(a.data().begin(), a.data().end(), d.data().begin()));
  }
}
