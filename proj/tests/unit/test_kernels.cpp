#include <stdexcept>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "pfkde/kernels.hpp"

using namespace pfkde;

namespace {

constexpr KernelType kAll[] = {KernelType::gaussian, KernelType::laplacian, KernelType::epanechnikov};

// Midpoint sum of f over [-h, h]^2 with n cells per axis.
template <typename F>
double quad2(F&& f, double h, int n) {
  const double s = 2.0 * h / n;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double x[2] = {-h + (i + 0.5) * s, -h + (j + 0.5) * s};
      sum += f(std::span<const double>(x, 2));
    }
  }
  return sum * s * s;
}

double support(KernelType t) {
  switch (t) {
    case KernelType::gaussian: return 9.0;
    case KernelType::laplacian: return 12.0;
    case KernelType::epanechnikov: return 1.0;
  }
  return 1.0;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("parse and name") {
    CHECK(parse_kernel("gaussian") == KernelType::gaussian);
    CHECK(parse_kernel("laplacian") == KernelType::laplacian);
    CHECK(parse_kernel("epanechnikov") == KernelType::epanechnikov);
    CHECK(to_string(KernelType::laplacian) == "laplacian");
    CHECK_THROWS_AS(parse_kernel("box"), std::invalid_argument);
  }

  TEST_CASE("unit ball volume") {
    CHECK(unit_ball_volume(1) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(unit_ball_volume(2) == doctest::Approx(std::numbers::pi).epsilon(1e-14));
    CHECK(unit_ball_volume(3) == doctest::Approx(4.0 * std::numbers::pi / 3.0).epsilon(1e-14));
  }

  TEST_CASE("multi-index support") {
    CHECK(MultiIndex({0, 0}).kind() == MultiIndex::Kind::zero);
    CHECK(MultiIndex({0, 1}).kind() == MultiIndex::Kind::unit);
    CHECK(MultiIndex({0, 1}).axis() == 1);
    CHECK(MultiIndex({1, 1}).kind() == MultiIndex::Kind::ones);
    CHECK(MultiIndex::ones(3).order() == 3);
    CHECK_THROWS_AS(MultiIndex({2, 0}), std::invalid_argument);
    CHECK_THROWS_AS(MultiIndex({1, 1, 0}), std::invalid_argument);
  }

  TEST_CASE("rescale_evaluate") {
    const double x[2] = {0.3, -0.2};
    const double zero[2] = {0.0, 0.0};
    for (auto t : kAll) {
      const Kernel k(t, 2);
      CHECK(rescale_evaluate(k, 1, x) == k.evaluate(x));
    }
    const Kernel g(KernelType::gaussian, 2);
    CHECK(rescale_evaluate(g, 10, zero) == doctest::Approx(100.0 / (2.0 * std::numbers::pi)).epsilon(1e-14));
  }

  TEST_CASE("second moments scale as c2 / k^2") {
    for (auto t : kAll) {
      const Kernel ker(t, 2);
      for (unsigned k : {1u, 2u, 4u}) {
        const double h = support(t) / k;
        const double m2 = quad2([&](std::span<const double> x) { return (x[0] * x[0] + x[1] * x[1]) * rescale_evaluate(ker, k, x); }, h, 800);
        CHECK(std::abs(m2 - ker.second_moment() / (k * k)) < 1e-2);
      }
    }
    CHECK(Kernel(KernelType::gaussian, 2).second_moment() == doctest::Approx(2.0));
    CHECK(Kernel(KernelType::laplacian, 2).second_moment() == doctest::Approx(1.0));
    CHECK(Kernel(KernelType::epanechnikov, 2).second_moment() == doctest::Approx(1.0 / 3.0));
  }

  TEST_CASE("rescale_derivative") {
    const Kernel g(KernelType::gaussian, 2);
    const double x[2] = {0.4, -0.7};
    for (unsigned k : {1u, 3u}) {
      CHECK(rescale_derivative(g, k, MultiIndex::zero(2), x) == rescale_evaluate(g, k, x));
    }
    const double one[2] = {1.0, 1.0};
    const double half[2] = {0.5, 0.5};
    CHECK(g.mixed(one) == doctest::Approx(std::exp(-1.0) / (2.0 * std::numbers::pi)).epsilon(1e-14));
    CHECK(rescale_derivative(g, 2, MultiIndex::ones(2), half) ==
          doctest::Approx(16.0 * 0.058549831524319168).epsilon(1e-14));

    const Kernel e(KernelType::epanechnikov, 2);
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int i = 0; i < 200; ++i) {
      const double p[2] = {u(gen), u(gen)};
      CHECK(rescale_derivative(e, 3, MultiIndex::ones(2), p) == 0.0);
    }
  }

  TEST_CASE("closed-form kernel values") {
    const double zero[2] = {0.0, 0.0};
    CHECK(epanechnikov_evaluate(2, zero) == doctest::Approx(2.0 / std::numbers::pi).epsilon(1e-15));
    const double out[2] = {0.8, 0.6};
    CHECK(epanechnikov_evaluate(2, out) == 0.0);
    const double far[2] = {2.0, 0.0};
    CHECK(epanechnikov_evaluate(2, far) == 0.0);
    CHECK(laplacian_evaluate(2, zero) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(gaussian_evaluate(2, zero) == doctest::Approx(1.0 / (2.0 * std::numbers::pi)).epsilon(1e-15));

    const double p[2] = {0.37, -1.2};
    const double m[2] = {-0.37, 1.2};
    CHECK(laplacian_evaluate(2, p) == laplacian_evaluate(2, m));
    CHECK(laplacian_evaluate(2, p) == doctest::Approx(std::exp(-2.0 * (0.37 + 1.2))).epsilon(1e-14));

    const double epan_int = quad2([](std::span<const double> x) { return epanechnikov_evaluate(2, x); }, 1.0, 2000);
    CHECK(std::abs(epan_int - 1.0) < 1e-3);
  }

  TEST_CASE("kernel_gradient") {
    const double zero[2] = {0.0, 0.0};
    for (auto t : {KernelType::gaussian, KernelType::epanechnikov}) {
      const auto grad = kernel_gradient(Kernel(t, 2), 3, zero);
      CHECK(grad[0] == 0.0);
      CHECK(grad[1] == 0.0);
    }

    const Kernel e(KernelType::epanechnikov, 2);
    const double inside[2] = {0.3, -0.5};
    CHECK(e.partial(inside, 0) == doctest::Approx(-4.0 / std::numbers::pi * 0.3).epsilon(1e-14));
    CHECK(e.partial(inside, 1) == doctest::Approx(4.0 / std::numbers::pi * 0.5).epsilon(1e-14));

    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(-0.6, 0.6);
    const double h = 1e-5;
    for (auto t : kAll) {
      const Kernel ker(t, 2);
      const unsigned k = 2;
      int checked = 0;
      for (int i = 0; i < 400 && checked < 100; ++i) {
        double x[2] = {u(gen), u(gen)};
        const double r = std::hypot(k * x[0], k * x[1]);
        if (t == KernelType::epanechnikov && (r > 0.99 && r < 1.01)) continue;
        if (t == KernelType::laplacian && (std::abs(x[0]) < 1e-3 || std::abs(x[1]) < 1e-3)) continue;
        const auto grad = kernel_gradient(ker, k, x);
        for (int a = 0; a < 2; ++a) {
          double p[2] = {x[0], x[1]}, m[2] = {x[0], x[1]};
          p[a] += h;
          m[a] -= h;
          const double fd = (rescale_evaluate(ker, k, p) - rescale_evaluate(ker, k, m)) / (2.0 * h);
          const double scale = std::max(std::abs(grad[a]), 1e-3 * ker.peak() * k * k * k);
          CHECK(std::abs(fd - grad[a]) / scale < 1e-5);
        }
        ++checked;
      }
    }
  }

  TEST_CASE("mixed derivative matches finite differences of a partial") {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    const double h = 1e-6;
    for (auto t : {KernelType::gaussian, KernelType::laplacian}) {
      const Kernel ker(t, 2);
      for (int i = 0; i < 100; ++i) {
        const double x[2] = {u(gen), u(gen)};
        if (std::abs(x[0]) < 1e-2 || std::abs(x[1]) < 1e-2) continue;
        const double p[2] = {x[0], x[1] + h}, m[2] = {x[0], x[1] - h};
        const double fd = (ker.partial(p, 0) - ker.partial(m, 0)) / (2.0 * h);
        CHECK(fd == doctest::Approx(ker.mixed(x)).epsilon(1e-6));
      }
    }
    const Kernel lap(KernelType::laplacian, 2);
    const double on_axis[2] = {0.0, 0.4};
    CHECK(lap.mixed(on_axis) == 0.0);
    CHECK(lap.partial(on_axis, 0) == 0.0);
  }

  TEST_CASE("unit mass, positivity and zero first moment") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (auto t : kAll) {
      const Kernel ker(t, 2);
      for (unsigned k : {1u, 2u, 4u, 8u}) {
        const double h = support(t) / k;
        const double mass = quad2([&](std::span<const double> x) { return rescale_evaluate(ker, k, x); }, h, 600);
        CHECK(std::abs(mass - 1.0) < 1e-2);
      }
      for (int i = 0; i < 10000; ++i) {
        const double x[2] = {u(gen), u(gen)};
        CHECK(ker.evaluate(x) >= 0.0);
      }
      for (int a = 0; a < 2; ++a) {
        const double m1 = quad2([&](std::span<const double> x) { return x[a] * ker.evaluate(x); }, support(t), 600);
        CHECK(std::abs(m1) < 1e-3);
      }
      CHECK(ker.zero_first_moment());
    }
  }

  TEST_CASE("sup-norm scaling law for the Gaussian") {
    const Kernel g(KernelType::gaussian, 2);
    const MultiIndex alphas[] = {MultiIndex::zero(2), MultiIndex::unit(2, 0), MultiIndex::ones(2)};
    for (const auto& alpha : alphas) {
      auto grid_max = [&](unsigned k) {
        double best = 0.0;
        const int n = 801;
        const double h = 4.0 / k;
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            const double x[2] = {-h + 2.0 * h * i / (n - 1), -h + 2.0 * h * j / (n - 1)};
            best = std::max(best, std::abs(rescale_derivative(g, k, alpha, x)));
          }
        }
        return best;
      };
      const double base = grid_max(1);
      for (unsigned k : {2u, 4u}) {
        const double expect = std::pow(static_cast<double>(k), 2.0 + alpha.order()) * base;
        CHECK(grid_max(k) == doctest::Approx(expect).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("optimal bandwidth reference") {
    // Gaussian-reference rule for d = 1: (8 sqrt(pi) R(K) / (3 mu2^2 n))^(1/5)
    // with R(K) = 3/5, mu2 = 1/5 gives 2.345 n^(-1/5).
    const double h = epanechnikov_optimal_bandwidth(1, 1000);
    CHECK(h == doctest::Approx(2.3449 * std::pow(1000.0, -0.2)).epsilon(1e-3));
    CHECK(epanechnikov_optimal_bandwidth(2, 4096) < epanechnikov_optimal_bandwidth(2, 729));
  }
}
