#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pofd {

/// Equally spaced evaluation grid u_1 = a, ..., u_L = b.
class DomainGrid {
 public:
  DomainGrid(double a, double b, std::size_t size);

  double lower() const { return a_; }
  double upper() const { return b_; }
  double spacing() const { return step_; }
  std::size_t size() const { return points_.size(); }
  double operator[](std::size_t r) const { return points_[r]; }
  std::span<const double> points() const { return points_; }

  /// Index of the grid cell [u_r, u_{r+1}] containing u (clamped to the grid).
  std::size_t cell(double u) const;
  /// Index of the grid point closest to u (clamped).
  std::size_t nearest(double u) const;

  /// Linear interpolation of gridded values at u; constant extrapolation outside [a, b].
  double interpolate(std::span<const double> values, double u) const;

  /// Trapezoid integral of gridded values over the whole grid.
  double integrate(std::span<const double> values) const;

  bool operator==(const DomainGrid& other) const = default;

 private:
  double a_;
  double b_;
  double step_;
  std::vector<double> points_;
};

}  // namespace pofd
