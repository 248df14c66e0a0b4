#include <stdexcept>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "doctest.h"
#include "pfkde/analysis.hpp"
#include "pfkde/harness.hpp"
#include "pfkde/kde.hpp"
#include "pfkde/log.hpp"

using namespace pfkde;

namespace {

constexpr KernelType kAll[] = {KernelType::gaussian, KernelType::laplacian, KernelType::epanechnikov};

ParticleCloud cloud_of(std::vector<double> coords, std::size_t dim = 2) {
  return ParticleCloud(dim, std::move(coords), 0, 0);
}

const Benchmark& bench() {
  static const Benchmark b = prepare_benchmark(ModelConfig::benchmark());
  return b;
}

ParticleCloud bench_cloud(std::uint64_t n, std::uint64_t seed = 1) {
  return run_benchmark_filter(bench(), n, seed, 1);
}

}  // namespace

TEST_SUITE("kde") {
  TEST_CASE("min_particles") {
    CHECK(min_particles(4, 2, 0) == 4096);
    CHECK(min_particles(7, 2, 0) == 117649);
    CHECK(min_particles(10, 2, 0) == 1000000);
    CHECK(min_particles(3, 2, 2) == 59049);
    for (std::size_t d = 1; d < 5; ++d) {
      for (unsigned o = 0; o < 3; ++o) CHECK(min_particles(1, d, o) == 1);
    }
    CHECK_THROWS_AS(min_particles(std::uint64_t{1} << 20, 2, 0), std::overflow_error);
    CHECK_THROWS_AS(min_particles(0, 2, 0), std::invalid_argument);
  }

  TEST_CASE("k_of_n") {
    CHECK(k_of_n(4096, 2) == 4);
    CHECK(k_of_n(5000, 2) == 4);
    CHECK(k_of_n(4095, 2) == 3);
    for (std::uint64_t k = 1; k <= 20; ++k) CHECK(k_of_n(min_particles(k, 2, 0), 2) == k);
    std::uint64_t prev = 0;
    for (std::uint64_t n = 1; n < 300000; n = n * 3 / 2 + 1) {
      const auto k = k_of_n(n, 2);
      CHECK(k >= prev);
      prev = k;
    }
    CHECK(k_of_n(~std::uint64_t{0}, 2) == 1625);
  }

  TEST_CASE("hypercube") {
    for (unsigned k : {2u, 5u, 10u}) {
      const auto cube = Hypercube::for_k(k, 2, 0.5, 4.0);
      CHECK(std::abs(cube.volume() - std::pow(static_cast<double>(k), 0.5 / 4.0)) < 1e-12);
      CHECK(cube.half_width == doctest::Approx(0.5 * std::pow(static_cast<double>(k), 0.5 / 8.0)));
    }
    const auto cube = Hypercube::for_k(4, 2, 0.0, 1.0);
    const double in[2] = {0.5, -0.5};
    const double out[2] = {0.5, 0.51};
    CHECK(cube.contains(in));
    CHECK(!cube.contains(out));
    CHECK_THROWS_AS(Hypercube::for_k(4, 2, 1.0, 1.0), std::invalid_argument);
  }

  TEST_CASE("single particle at the origin") {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(-1.2, 1.2);
    for (auto t : kAll) {
      const Kernel ker(t, 2);
      const DensityEstimator est(cloud_of({0.0, 0.0}), ker, 1);
      for (int i = 0; i < 50; ++i) {
        const double x[2] = {u(gen), u(gen)};
        CHECK(est.density(x) == doctest::Approx(ker.evaluate(x)).epsilon(1e-15));
        CHECK(est.naive_density(x) == doctest::Approx(ker.evaluate(x)).epsilon(1e-15));
      }
    }
  }

  TEST_CASE("estimate is bounded and integrates to one") {
    for (auto t : kAll) {
      for (unsigned k = 3; k <= 10; ++k) {
        const auto cloud = bench_cloud(20000, k);
        RunContext ctx;
        const DensityEstimator est(cloud, Kernel(t, 2), k, estimator_options(ctx, t));
        const auto grid = integration_grid(bench().truth, t, k, k);
        const auto vals = est.density_on_grid(grid);
        const double mass = grid_integral(vals, grid);
        CHECK(mass >= 0.98);
        CHECK(mass <= 1.02);
        const double bound = k * k * est.kernel().peak();
        CHECK(*std::max_element(vals.begin(), vals.end()) <= bound);
        CHECK(*std::min_element(vals.begin(), vals.end()) >= 0.0);
      }
    }
  }

  TEST_CASE("grid, particle and naive evaluation agree") {
    const auto cloud = bench_cloud(4096, 3);
    for (auto t : kAll) {
      for (bool exact : {true, false}) {
        EstimatorOptions opt;
        if (!exact) opt.cutoff = default_cutoff(t);
        const DensityEstimator est(cloud, Kernel(t, 2), 4, opt);
        const auto grid = display_grid(bench().truth, 0.2, 12);
        const auto vals = est.density_on_grid(grid);
        for (std::size_t i = 0; i < grid.size(); ++i) {
          const auto x = grid.point(i);
          const double naive = est.naive_density(x);
          CHECK(std::abs(vals[i] - naive) <= 1e-12 * std::max(naive, 1e-3));
          CHECK(std::abs(est.density(x) - naive) <= 1e-12 * std::max(naive, 1e-3));
        }
        const auto at = est.density_at_particles();
        for (std::size_t n = 0; n < cloud.size(); n += 97) {
          const double naive = est.naive_density(cloud.particle(n));
          CHECK(std::abs(at[n] - naive) <= 1e-12 * naive);
        }
      }
    }
  }

  TEST_CASE("cutoff error is negligible") {
    const auto cloud = bench_cloud(4096, 3);
    for (auto t : {KernelType::gaussian, KernelType::laplacian}) {
      const DensityEstimator exact(cloud, Kernel(t, 2), 4);
      EstimatorOptions opt;
      opt.cutoff = default_cutoff(t);
      const DensityEstimator cut(cloud, Kernel(t, 2), 4, opt);
      const auto grid = display_grid(bench().truth, 0.2, 20);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto x = grid.point(i);
        CHECK(std::abs(exact.density(x) - cut.density(x)) <= 1e-13 * 16.0 * exact.kernel().peak());
      }
    }
  }

  TEST_CASE("threaded grid evaluation matches serial") {
    const auto cloud = bench_cloud(4096, 3);
    EstimatorOptions one, many;
    many.threads = 3;
    const DensityEstimator a(cloud, Kernel(KernelType::epanechnikov, 2), 4, one);
    const DensityEstimator b(cloud, Kernel(KernelType::epanechnikov, 2), 4, many);
    const auto grid = display_grid(bench().truth);
    const auto va = a.density_on_grid(grid), vb = b.density_on_grid(grid);
    for (std::size_t i = 0; i < va.size(); ++i) CHECK(std::abs(va[i] - vb[i]) <= 1e-12 * std::max(va[i], 1e-300));
    const auto pa = a.density_at_particles(), pb = b.density_at_particles();
    CHECK(pa == pb);
  }

  TEST_CASE("derivatives") {
    const auto cloud = bench_cloud(4096, 5);
    const DensityEstimator g(cloud, Kernel(KernelType::gaussian, 2), 3);
    std::mt19937_64 gen(2);
    std::normal_distribution<double> nd(0.0, 1.0);
    const Vector& m = bench().truth.mean();
    const double h = 1e-5;
    for (int i = 0; i < 100; ++i) {
      const double x[2] = {m(0) + nd(gen), m(1) + nd(gen)};
      CHECK(g.derivative(MultiIndex::zero(2), x) == doctest::Approx(g.density(x)).epsilon(1e-14));
      const auto grad = g.gradient(x);
      double grad2[2];
      const double v = g.density_and_gradient(x, grad2);
      CHECK(v == doctest::Approx(g.density(x)).epsilon(1e-13));
      double fd[2];
      for (int a = 0; a < 2; ++a) {
        double p[2] = {x[0], x[1]}, q[2] = {x[0], x[1]};
        p[a] += h;
        q[a] -= h;
        fd[a] = (g.density(p) - g.density(q)) / (2.0 * h);
        CHECK(grad2[a] == doctest::Approx(grad[a]).epsilon(1e-12));
      }
      const double norm = std::hypot(grad[0], grad[1]);
      CHECK(std::hypot(fd[0] - grad[0], fd[1] - grad[1]) / norm < 1e-4);
    }

    const DensityEstimator e(cloud, Kernel(KernelType::epanechnikov, 2), 3);
    for (int i = 0; i < 100; ++i) {
      const double x[2] = {m(0) + nd(gen), m(1) + nd(gen)};
      CHECK(e.derivative(MultiIndex::ones(2), x) == 0.0);
    }
  }

  TEST_CASE("symmetric cloud has zero gradient at the centre") {
    const double zero[2] = {0.0, 0.0};
    for (auto t : kAll) {
      const DensityEstimator est(cloud_of({0.3, -0.2, -0.3, 0.2}), Kernel(t, 2), 2);
      const auto grad = est.gradient(zero);
      CHECK(std::abs(grad[0]) < 1e-15);
      CHECK(std::abs(grad[1]) < 1e-15);
    }
  }

  TEST_CASE("gradient is smaller at the mode, k = 9") {
    const auto cloud = bench_cloud(min_particles(9, 2, 0), 1);
    RunContext ctx;
    const DensityEstimator est(cloud, Kernel(KernelType::gaussian, 2), 9, estimator_options(ctx, KernelType::gaussian));
    const Vector mode = bench().truth.mean();
    const Vector off = mode + Vector::Ones(2);
    const auto g0 = est.gradient({mode.data(), 2});
    const auto g1 = est.gradient({off.data(), 2});
    CHECK(std::hypot(g0[0], g0[1]) < std::hypot(g1[0], g1[1]));
  }

  TEST_CASE("truncated density") {
    const auto cloud = bench_cloud(4096, 5);
    const DensityEstimator est(cloud, Kernel(KernelType::epanechnikov, 2), 4);
    const auto cube = Hypercube::for_k(4, 2, 0.5, 1.0);
    const double w = cube.half_width;
    const double inside[2] = {0.5 * w, -0.9 * w};
    const double outside[2] = {1.01 * w, 0.0};
    CHECK(est.truncated_density(cube, inside) == est.density(inside));
    CHECK(est.truncated_density(cube, outside) == 0.0);
  }

  TEST_CASE("unresolved queries warn once") {
    std::vector<std::string> seen;
    auto prev = set_warning_sink([&](std::string_view m) { seen.emplace_back(m); });
    const DensityEstimator est(cloud_of({0.0, 0.0, 1.0, 1.0}), Kernel(KernelType::gaussian, 2), 2);
    CHECK(!est.resolved(0));
    const double x[2] = {0.1, 0.1};
    est.density(x);
    est.density(x);
    CHECK(seen.size() == 1);
    est.gradient(x);
    CHECK(seen.size() == 2);
    set_warning_sink(prev);

    const DensityEstimator ok(cloud_of(std::vector<double>(2 * 64, 0.0)), Kernel(KernelType::gaussian, 2), 2);
    CHECK(ok.resolved(0));
    CHECK(!ok.resolved(1));
  }

  TEST_CASE("particle argmax agrees with the scan") {
    struct Case {
      std::uint64_t n;
      unsigned k;
      KernelType t;
      bool exact;
    };
    const Case cases[] = {
        {4096, 4, KernelType::gaussian, false}, {4096, 4, KernelType::gaussian, true},
        {46656, 6, KernelType::gaussian, false}, {20000, 9, KernelType::gaussian, false},
        {4096, 4, KernelType::epanechnikov, true}, {4096, 4, KernelType::laplacian, false},
        {729, 3, KernelType::gaussian, false},
    };
    for (const auto& c : cases) {
      for (std::uint64_t seed : {1u, 2u}) {
        const auto cloud = bench_cloud(c.n, seed);
        EstimatorOptions opt;
        if (!c.exact) opt.cutoff = default_cutoff(c.t);
        const DensityEstimator est(cloud, Kernel(c.t, 2), c.k, opt);
        const auto fast = est.max_at_particles();
        const auto scan = est.max_at_particles_scan();
        CHECK(fast.index == scan.index);
        CHECK(fast.value == scan.value);
      }
    }
  }

  TEST_CASE("particle argmax tie rule and permutation invariance") {
    const DensityEstimator same(cloud_of(std::vector<double>(2 * 200, 0.25)), Kernel(KernelType::gaussian, 2), 2);
    CHECK(same.max_at_particles().index == 0);

    // Two mirror-image clusters: equal peak values, the earlier index wins.
    std::vector<double> coords;
    for (int i = 0; i < 100; ++i) {
      const double dx = 0.01 * (i % 10), dy = 0.01 * (i / 10);
      coords.insert(coords.end(), {1.0 + dx, dy});
    }
    for (int i = 0; i < 100; ++i) {
      const double dx = 0.01 * (i % 10), dy = 0.01 * (i / 10);
      coords.insert(coords.end(), {-1.0 - dx, -dy});
    }
    const DensityEstimator mirror(cloud_of(coords), Kernel(KernelType::gaussian, 2), 3);
    const auto m = mirror.max_at_particles();
    CHECK(m.index == mirror.max_at_particles_scan().index);
    CHECK(m.index < 100);

    const auto cloud = bench_cloud(4096, 4);
    std::vector<std::size_t> perm(cloud.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(9));
    std::vector<double> shuffled;
    for (auto i : perm) shuffled.insert(shuffled.end(), cloud.particle(i).begin(), cloud.particle(i).end());
    EstimatorOptions opt;
    opt.cutoff = 8.0;
    const DensityEstimator a(cloud, Kernel(KernelType::gaussian, 2), 4, opt);
    const DensityEstimator b(cloud_of(shuffled), Kernel(KernelType::gaussian, 2), 4, opt);
    const auto ma = a.max_at_particles(), mb = b.max_at_particles();
    CHECK(ma.value == mb.value);
    CHECK(std::equal(a.cloud().particle(ma.index).begin(), a.cloud().particle(ma.index).end(),
                     b.cloud().particle(mb.index).begin()));
  }
}
