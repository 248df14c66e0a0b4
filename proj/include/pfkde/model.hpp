#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pfkde/rng.hpp"

namespace pfkde {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Discrete-time Markov state-space model: prior tau_0, transition kernel
/// tau_t(.|x_{t-1}) and observation density g_t(y|x).
///
/// Implementations are immutable after construction; all randomness comes in
/// through the generator argument, so one model can be shared by workers.
class StateSpaceModel {
 public:
  virtual ~StateSpaceModel() = default;

  virtual std::size_t dim_x() const = 0;
  virtual std::size_t dim_y() const = 0;

  virtual void sample_initial(CounterRng& rng, std::span<double> out) const = 0;
  virtual void sample_transition(std::size_t t, std::span<const double> prev, CounterRng& rng,
                                 std::span<double> out) const = 0;
  virtual void sample_observation(std::size_t t, std::span<const double> x, CounterRng& rng,
                                  std::span<double> out) const = 0;

  /// g_t(y|x); finite and non-negative for finite arguments.
  virtual double likelihood(std::size_t t, std::span<const double> y,
                            std::span<const double> x) const = 0;

  /// log g_t(y|x). Models with a closed form should override this so that
  /// weights survive likelihood underflow.
  virtual double log_likelihood(std::size_t t, std::span<const double> y,
                                std::span<const double> x) const;
};

/// X_t = A X_{t-1} + U_t,  Y_t = B X_t + V_t,  X_0 ~ N(0, I),
/// U_t ~ N(0, Q), V_t ~ N(0, R). Q and R default to identity.
class LinearGaussianModel final : public StateSpaceModel {
 public:
  LinearGaussianModel(Matrix a, Matrix b);
  LinearGaussianModel(Matrix a, Matrix b, Matrix process_cov, Matrix observation_cov);

  /// The 2-D benchmark with A = [[0.50,-0.35],[0.39,-0.45]] and
  /// B = [[0.50,0.30],[-0.80,0.20]].
  static LinearGaussianModel benchmark();

  std::size_t dim_x() const override { return static_cast<std::size_t>(a_.rows()); }
  std::size_t dim_y() const override { return static_cast<std::size_t>(b_.rows()); }

  void sample_initial(CounterRng& rng, std::span<double> out) const override;
  void sample_transition(std::size_t t, std::span<const double> prev, CounterRng& rng,
                         std::span<double> out) const override;
  void sample_observation(std::size_t t, std::span<const double> x, CounterRng& rng,
                          std::span<double> out) const override;
  double likelihood(std::size_t t, std::span<const double> y,
                    std::span<const double> x) const override;
  double log_likelihood(std::size_t t, std::span<const double> y,
                        std::span<const double> x) const override;

  const Matrix& a() const { return a_; }
  const Matrix& b() const { return b_; }
  const Matrix& process_cov() const { return q_; }
  const Matrix& observation_cov() const { return r_; }

  /// Largest eigenvalue modulus of A.
  double spectral_radius() const;

 private:
  Matrix a_, b_, q_, r_;
  Matrix q_chol_, r_chol_;  // lower Cholesky factors
  Matrix r_chol_inv_;
  double r_log_norm_ = 0.0;  // -0.5 * log((2 pi)^d_y |R|)
  bool identity_noise_ = true;
};

struct Trajectory {
  std::vector<Vector> states;        // x_0 .. x_T
  std::vector<Vector> observations;  // y_1 .. y_T
  std::uint64_t seed = 0;

  std::size_t horizon() const { return observations.size(); }
};

/// Ancestral sampling of x_{0:T} and y_{1:T}; deterministic in `seed`.
Trajectory simulate(const StateSpaceModel& model, std::size_t horizon, std::uint64_t seed);

/// N(y; B x, I). Throws std::invalid_argument on dimension mismatch.
double linear_gaussian_likelihood(const Vector& y, const Vector& x, const Matrix& b);

}  // namespace pfkde
