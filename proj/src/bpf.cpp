#include "pfkde/bpf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pfkde/parallel.hpp"
#include "pfkde/summation.hpp"

namespace pfkde {

ParticleCloud::ParticleCloud(std::size_t dim, std::vector<double> coords, std::size_t t,
                             std::uint64_t seed)
    : dim_(dim), coords_(std::move(coords)), t_(t), seed_(seed) {
  if (dim_ == 0) throw std::invalid_argument("ParticleCloud: dimension must be positive");
  if (coords_.empty() || coords_.size() % dim_ != 0) {
    throw std::invalid_argument("ParticleCloud: need N >= 1 particles of the given dimension");
  }
  for (std::size_t i = 0; i < coords_.size(); ++i) {
    if (!std::isfinite(coords_[i])) {
      throw std::invalid_argument("ParticleCloud: particle " + std::to_string(i / dim_) +
                                  " has a non-finite coordinate");
    }
  }
}

std::vector<double> normalize_weights(std::span<const double> log_likelihoods) {
  const std::size_t n = log_likelihoods.size();
  if (n == 0) throw std::invalid_argument("normalize_weights: empty input");
  double max_ll = -std::numeric_limits<double>::infinity();
  for (double ll : log_likelihoods) {
    if (std::isnan(ll) || ll == std::numeric_limits<double>::infinity()) {
      throw std::domain_error("normalize_weights: likelihood is NaN or infinite");
    }
    max_ll = std::max(max_ll, ll);
  }
  if (max_ll == -std::numeric_limits<double>::infinity()) {
    throw DegenerateWeights("all importance weights are zero; the particle set has collapsed");
  }

  std::vector<double> w(n);
  bool underflow = false;
  CompensatedSum total;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = std::exp(log_likelihoods[i]);
    if (w[i] == 0.0 && log_likelihoods[i] != -std::numeric_limits<double>::infinity()) underflow = true;
    total.add(w[i]);
  }
  double sum = total.value();
  if (underflow || !(sum > 0.0) || !std::isfinite(sum)) {
    CompensatedSum shifted;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = std::exp(log_likelihoods[i] - max_ll);
      shifted.add(w[i]);
    }
    sum = shifted.value();
  }
  for (double& v : w) v /= sum;
  return w;
}

ParticleCloud bpf_init(const StateSpaceModel& model, std::size_t n, std::uint64_t seed,
                       std::size_t threads) {
  if (n == 0) throw std::invalid_argument("bpf_init: N must be at least 1");
  const std::size_t d = model.dim_x();
  std::vector<double> coords(n * d);
  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      CounterRng rng(seed, 0, Phase::initial, i);
      model.sample_initial(rng, {coords.data() + i * d, d});
    }
  });
  return ParticleCloud(d, std::move(coords), 0, seed);
}

WeightedStage bpf_propagate_weight(const ParticleCloud& cloud, std::span<const double> y,
                                   const StateSpaceModel& model, std::size_t threads) {
  if (cloud.dim() != model.dim_x()) {
    throw std::invalid_argument("bpf_propagate_weight: cloud dimension does not match the model");
  }
  if (y.size() != model.dim_y()) {
    throw std::invalid_argument("bpf_propagate_weight: observation dimension does not match the model");
  }
  const std::size_t n = cloud.size();
  const std::size_t d = cloud.dim();
  const std::size_t t = cloud.t() + 1;

  WeightedStage stage;
  stage.dim = d;
  stage.t = t;
  stage.seed = cloud.seed();
  stage.proposals.resize(n * d);
  std::vector<double> log_lik(n);
  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      CounterRng rng(cloud.seed(), t, Phase::propagate, i);
      std::span<double> out(stage.proposals.data() + i * d, d);
      model.sample_transition(t, cloud.particle(i), rng, out);
      log_lik[i] = model.log_likelihood(t, y, out);
    }
  });
  stage.weights = normalize_weights(log_lik);
  return stage;
}

namespace {

ParticleCloud gather(const WeightedStage& stage, std::span<const std::size_t> ancestors) {
  const std::size_t d = stage.dim;
  std::vector<double> coords(ancestors.size() * d);
  for (std::size_t i = 0; i < ancestors.size(); ++i) {
    std::copy_n(stage.proposals.data() + ancestors[i] * d, d, coords.data() + i * d);
  }
  return ParticleCloud(d, std::move(coords), stage.t, stage.seed);
}

std::vector<double> cumulative(std::span<const double> w) {
  std::vector<double> cum(w.size());
  CompensatedSum acc;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc.add(w[i]);
    cum[i] = acc.value();
  }
  return cum;
}

void check_stage(const WeightedStage& stage) {
  if (stage.size() == 0 || stage.proposals.size() != stage.size() * stage.dim) {
    throw std::invalid_argument("resample: malformed weighted stage");
  }
}

}  // namespace

// Multinomial draws as sorted uniforms: the order statistics of N uniforms
// are the normalized partial sums of N + 1 exponential variates, so one
// linear merge against the cumulative weights replaces N binary searches.
ParticleCloud multinomial_resample(const WeightedStage& stage, CounterRng& rng) {
  check_stage(stage);
  const std::size_t n = stage.size();
  const auto cum = cumulative(stage.weights);
  const double total = cum.back();
  std::vector<double> sorted(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s += -std::log1p(-rng.uniform());
    sorted[i] = s;
  }
  s += -std::log1p(-rng.uniform());
  const double scale = total / s;
  std::vector<std::size_t> ancestors(n);
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = sorted[i] * scale;
    while (j + 1 < n && cum[j] <= u) ++j;
    ancestors[i] = j;
  }
  return gather(stage, ancestors);
}

ParticleCloud systematic_resample(const WeightedStage& stage, CounterRng& rng) {
  check_stage(stage);
  const std::size_t n = stage.size();
  const auto cum = cumulative(stage.weights);
  const double total = cum.back();
  const double u0 = rng.uniform();
  std::vector<std::size_t> ancestors(n);
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (u0 + static_cast<double>(i)) / static_cast<double>(n) * total;
    while (j + 1 < n && cum[j] <= u) ++j;
    ancestors[i] = j;
  }
  return gather(stage, ancestors);
}

ParticleCloud resample(const WeightedStage& stage, ResamplingScheme scheme) {
  CounterRng rng(stage.seed, stage.t, Phase::resample);
  return scheme == ResamplingScheme::multinomial ? multinomial_resample(stage, rng)
                                                 : systematic_resample(stage, rng);
}

double estimate_integral(const ParticleCloud& cloud,
                         const std::function<double(std::span<const double>)>& f) {
  CompensatedSum acc;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double v = f(cloud.particle(i));
    if (!std::isfinite(v)) {
      throw std::domain_error("estimate_integral: f is not finite at particle " + std::to_string(i));
    }
    acc.add(v);
  }
  return acc.value() / static_cast<double>(cloud.size());
}

ParticleCloud run_filter(const StateSpaceModel& model, std::span<const Vector> observations,
                         const FilterOptions& options) {
  ParticleCloud cloud = bpf_init(model, options.particles, options.seed, options.threads);
  for (const auto& y : observations) {
    const auto stage = bpf_propagate_weight(
        cloud, std::span<const double>(y.data(), static_cast<std::size_t>(y.size())), model,
        options.threads);
    cloud = resample(stage, options.scheme);
  }
  return cloud;
}

}  // namespace pfkde
