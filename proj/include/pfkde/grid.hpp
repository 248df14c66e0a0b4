#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pfkde {

/// Regular grid with points offset_i + step * n_i, n_i = 1 .. count_i.
/// Flat indices run with the first axis slowest.
class Grid {
 public:
  Grid(std::vector<double> offsets, double step, std::vector<std::size_t> counts);

  /// Grid of `count` points per axis whose centre is `center`.
  static Grid centered(std::span<const double> center, double step, std::size_t count);

  /// Smallest grid with the given step covering center +- half_widths.
  static Grid covering(std::span<const double> center, std::span<const double> half_widths,
                       double step);

  std::size_t dim() const { return offsets_.size(); }
  std::size_t size() const { return size_; }
  double step() const { return step_; }
  const std::vector<double>& offsets() const { return offsets_; }
  const std::vector<std::size_t>& counts() const { return counts_; }
  double cell_volume() const;

  /// Coordinate along `axis` of the zero-based grid index `i`.
  double coordinate(std::size_t axis, std::size_t i) const {
    return offsets_[axis] + step_ * static_cast<double>(i + 1);
  }

  void point(std::size_t flat, std::span<double> out) const;
  std::vector<double> point(std::size_t flat) const;

 private:
  std::vector<double> offsets_;
  double step_;
  std::vector<std::size_t> counts_;
  std::size_t size_ = 1;
};

}  // namespace pfkde
