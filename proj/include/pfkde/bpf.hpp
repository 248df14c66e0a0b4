#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "pfkde/model.hpp"
#include "pfkde/rng.hpp"

namespace pfkde {

/// N equally weighted particles x_t^{(n)} in R^d, stored row-major.
///
/// `seed` is the reproducibility token: together with `t` it determines
/// every random stream the filter draws from at the next step.
class ParticleCloud {
 public:
  ParticleCloud(std::size_t dim, std::vector<double> coords, std::size_t t, std::uint64_t seed);

  std::size_t size() const { return coords_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  std::size_t t() const { return t_; }
  std::uint64_t seed() const { return seed_; }

  std::span<const double> particle(std::size_t n) const { return {coords_.data() + n * dim_, dim_}; }
  std::span<const double> data() const { return coords_; }

 private:
  std::size_t dim_;
  std::vector<double> coords_;
  std::size_t t_;
  std::uint64_t seed_;
};

/// Proposals x̄_t^{(n)} with normalized importance weights w_t^{(n)}.
struct WeightedStage {
  std::size_t dim = 0;
  std::size_t t = 0;
  std::uint64_t seed = 0;
  std::vector<double> proposals;  // N x dim, row-major
  std::vector<double> weights;    // sums to 1

  std::size_t size() const { return weights.size(); }
  std::span<const double> proposal(std::size_t n) const { return {proposals.data() + n * dim, dim}; }
};

/// Raised when every importance weight is zero (particle-set collapse).
class DegenerateWeights : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ResamplingScheme { multinomial, systematic };

/// Normalizes log-likelihoods into a probability vector. Direct ratios of
/// exp(log_lik) are used unless some likelihood underflows, in which case the
/// maximum log-likelihood is subtracted first. Throws DegenerateWeights when
/// no likelihood is positive.
std::vector<double> normalize_weights(std::span<const double> log_likelihoods);

ParticleCloud bpf_init(const StateSpaceModel& model, std::size_t n, std::uint64_t seed,
                       std::size_t threads = 1);

/// Draws x̄_t^{(n)} ~ tau_t(.|x_{t-1}^{(n)}) and weights them by g_t(y_t|.).
WeightedStage bpf_propagate_weight(const ParticleCloud& cloud, std::span<const double> y,
                                   const StateSpaceModel& model, std::size_t threads = 1);

ParticleCloud multinomial_resample(const WeightedStage& stage, CounterRng& rng);
ParticleCloud systematic_resample(const WeightedStage& stage, CounterRng& rng);

/// Resamples with the stage's own (seed, t) stream.
ParticleCloud resample(const WeightedStage& stage,
                       ResamplingScheme scheme = ResamplingScheme::multinomial);

/// (1/N) sum_n f(x^{(n)}). Throws std::domain_error naming the particle index
/// if f is not finite there.
double estimate_integral(const ParticleCloud& cloud,
                         const std::function<double(std::span<const double>)>& f);

struct FilterOptions {
  std::size_t particles = 1000;
  std::uint64_t seed = 1;
  ResamplingScheme scheme = ResamplingScheme::multinomial;
  std::size_t threads = 1;
};

/// Runs the bootstrap filter over y_1 .. y_T and returns Omega_T^N.
ParticleCloud run_filter(const StateSpaceModel& model, std::span<const Vector> observations,
                         const FilterOptions& options);

}  // namespace pfkde
