#include "pfkde/spatial_index.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "pfkde/grid.hpp"

namespace pfkde {

SourceIndex::SourceIndex(const ParticleCloud& cloud, double radius)
    : dim_(cloud.dim()), coords_(cloud.dim()) {
  if (dim_ > 16) throw std::invalid_argument("SourceIndex: at most 16 dimensions are supported");
  const std::size_t n = cloud.size();
  const auto data = cloud.data();

  origin_.assign(dim_, 0.0);
  std::vector<double> top(dim_, 0.0);
  for (std::size_t a = 0; a < dim_; ++a) {
    origin_[a] = top[a] = data[a];
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < dim_; ++a) {
      origin_[a] = std::min(origin_[a], data[i * dim_ + a]);
      top[a] = std::max(top[a], data[i * dim_ + a]);
    }
  }

  // Lattice: bins of radius / 2 when affordable, coarser otherwise.
  const double cap = static_cast<double>(std::max<std::size_t>(1024, 2 * n));
  single_bin_ = !(std::isfinite(radius) && radius > 0.0) || n < 64;
  if (!single_bin_) {
    auto total_bins = [&](double size) {
      double total = 1.0;
      for (std::size_t a = 0; a < dim_; ++a) total *= std::floor((top[a] - origin_[a]) / size) + 1.0;
      return total;
    };
    bin_size_ = radius / 2.0;
    if (total_bins(bin_size_) > cap) bin_size_ = radius;
    while (total_bins(bin_size_) > cap) bin_size_ *= 1.5;
    bins_per_axis_.resize(dim_);
    for (std::size_t a = 0; a < dim_; ++a) {
      bins_per_axis_[a] = static_cast<std::size_t>(std::floor((top[a] - origin_[a]) / bin_size_)) + 1;
    }
    single_bin_ = total_bins(bin_size_) <= 1.0;
  }

  std::vector<std::size_t> bin_of(n, 0);
  std::size_t n_bins = 1;
  if (!single_bin_) {
    n_bins = std::accumulate(bins_per_axis_.begin(), bins_per_axis_.end(), std::size_t{1},
                             std::multiplies<>());
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t id = 0;
      for (std::size_t a = 0; a < dim_; ++a) {
        auto b = static_cast<std::size_t>(std::floor((data[i * dim_ + a] - origin_[a]) / bin_size_));
        b = std::min(b, bins_per_axis_[a] - 1);
        id = id * bins_per_axis_[a] + b;
      }
      bin_of[i] = id;
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    if (bin_of[l] != bin_of[r]) return bin_of[l] < bin_of[r];
    for (std::size_t a = 0; a < dim_; ++a) {
      const double lv = data[l * dim_ + a], rv = data[r * dim_ + a];
      if (lv != rv) return lv < rv;
    }
    return l < r;
  });

  unique_of_particle_.assign(n, 0);
  bin_start_.assign(n_bins + 1, 0);
  std::vector<std::size_t> counts;
  std::vector<std::size_t> unique_bin;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t i = order[j];
    bool same = j > 0;
    if (same) {
      const std::size_t p = order[j - 1];
      for (std::size_t a = 0; a < dim_ && same; ++a) same = data[i * dim_ + a] == data[p * dim_ + a];
    }
    if (!same) {
      for (std::size_t a = 0; a < dim_; ++a) coords_[a].push_back(data[i * dim_ + a]);
      first_index_.push_back(i);
      counts.push_back(0);
      unique_bin.push_back(bin_of[i]);
    }
    ++counts.back();
    unique_of_particle_[i] = counts.size() - 1;
  }
  weights_.resize(counts.size());
  for (std::size_t u = 0; u < counts.size(); ++u) {
    weights_[u] = static_cast<double>(counts[u]) / static_cast<double>(n);
    ++bin_start_[unique_bin[u] + 1];
  }
  for (std::size_t b = 0; b < n_bins; ++b) bin_start_[b + 1] += bin_start_[b];
}

Grid::Grid(std::vector<double> offsets, double step, std::vector<std::size_t> counts)
    : offsets_(std::move(offsets)), step_(step), counts_(std::move(counts)) {
  if (offsets_.empty() || offsets_.size() != counts_.size()) {
    throw std::invalid_argument("Grid: offsets and counts must have the same positive length");
  }
  if (!(step_ > 0.0) || !std::isfinite(step_)) throw std::invalid_argument("Grid: step must be positive");
  for (auto c : counts_) {
    if (c == 0) throw std::invalid_argument("Grid: counts must be positive");
    size_ *= c;
  }
}

Grid Grid::centered(std::span<const double> center, double step, std::size_t count) {
  std::vector<double> offsets(center.size());
  for (std::size_t a = 0; a < center.size(); ++a) {
    offsets[a] = center[a] - step * (static_cast<double>(count) + 1.0) / 2.0;
  }
  return Grid(std::move(offsets), step, std::vector<std::size_t>(center.size(), count));
}

Grid Grid::covering(std::span<const double> center, std::span<const double> half_widths,
                    double step) {
  if (center.size() != half_widths.size()) throw std::invalid_argument("Grid: dimension mismatch");
  std::vector<double> offsets(center.size());
  std::vector<std::size_t> counts(center.size());
  for (std::size_t a = 0; a < center.size(); ++a) {
    counts[a] = static_cast<std::size_t>(std::ceil(2.0 * half_widths[a] / step)) + 1;
    offsets[a] = center[a] - step * (static_cast<double>(counts[a]) + 1.0) / 2.0;
  }
  return Grid(std::move(offsets), step, std::move(counts));
}

double Grid::cell_volume() const { return std::pow(step_, static_cast<double>(dim())); }

void Grid::point(std::size_t flat, std::span<double> out) const {
  for (std::size_t a = dim(); a-- > 0;) {
    out[a] = coordinate(a, flat % counts_[a]);
    flat /= counts_[a];
  }
}

std::vector<double> Grid::point(std::size_t flat) const {
  std::vector<double> p(dim());
  point(flat, p);
  return p;
}

}  // namespace pfkde
