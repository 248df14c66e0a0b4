#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "pfkde/bpf.hpp"

namespace pfkde {

/// Distinct particle locations of a cloud, each weighted by its multiplicity
/// over N, bucketed on a regular lattice of bins.
///
/// Resampled clouds repeat proposals, so the distinct set is markedly smaller
/// than N. Sources are stored per axis in bin order; each bin is a contiguous
/// range, and bins adjacent along the last axis are adjacent in memory.
class SourceIndex {
 public:
  /// `radius` is the typical query half-width; infinity puts every source in
  /// one bin.
  SourceIndex(const ParticleCloud& cloud, double radius);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return weights_.size(); }
  std::size_t particle_count() const { return unique_of_particle_.size(); }

  std::span<const double> coords(std::size_t axis) const { return coords_[axis]; }
  std::span<const double> weights() const { return weights_; }
  /// Lowest particle index at each distinct location.
  std::span<const std::size_t> first_index() const { return first_index_; }
  /// Distinct-location id of every particle.
  std::span<const std::size_t> unique_of_particle() const { return unique_of_particle_; }

  /// Calls fn(begin, end) for source ranges covering every source s with
  /// |x_i - s_i| <= half_width on all axes (ranges may contain more).
  template <typename Fn>
  void for_each_range(std::span<const double> x, double half_width, Fn&& fn) const;

 private:
  std::size_t dim_;
  std::vector<std::vector<double>> coords_;
  std::vector<double> weights_;
  std::vector<std::size_t> first_index_;
  std::vector<std::size_t> unique_of_particle_;

  bool single_bin_ = true;
  double bin_size_ = 0.0;
  std::vector<double> origin_;
  std::vector<std::size_t> bins_per_axis_;
  std::vector<std::size_t> bin_start_;  // size = bins + 1
};

template <typename Fn>
void SourceIndex::for_each_range(std::span<const double> x, double half_width, Fn&& fn) const {
  if (single_bin_ || !std::isfinite(half_width)) {
    fn(std::size_t{0}, size());
    return;
  }
  // Bin index ranges per axis, clipped to the lattice.
  constexpr std::size_t kMaxDim = 16;
  long lo[kMaxDim], hi[kMaxDim], cur[kMaxDim];
  for (std::size_t a = 0; a < dim_; ++a) {
    const double l = std::floor((x[a] - half_width - origin_[a]) / bin_size_);
    const double h = std::floor((x[a] + half_width - origin_[a]) / bin_size_);
    const double last = static_cast<double>(bins_per_axis_[a]) - 1.0;
    if (h < 0.0 || l > last) return;
    lo[a] = static_cast<long>(std::max(l, 0.0));
    hi[a] = static_cast<long>(std::min(h, last));
    cur[a] = lo[a];
  }
  const std::size_t last_axis = dim_ - 1;
  while (true) {
    std::size_t row = 0;
    for (std::size_t a = 0; a < last_axis; ++a) {
      row = row * bins_per_axis_[a] + static_cast<std::size_t>(cur[a]);
    }
    const std::size_t base = row * bins_per_axis_[last_axis];
    const std::size_t begin = bin_start_[base + static_cast<std::size_t>(lo[last_axis])];
    const std::size_t end = bin_start_[base + static_cast<std::size_t>(hi[last_axis]) + 1];
    if (begin < end) fn(begin, end);
    // Odometer over every axis except the last.
    std::size_t a = last_axis;
    while (a > 0) {
      --a;
      if (++cur[a] <= hi[a]) break;
      cur[a] = lo[a];
      if (a == 0) return;
    }
    if (last_axis == 0) return;
  }
}

}  // namespace pfkde
