#include "pofd/grid.hpp"

#include <algorithm>
#include <cmath>

#include "pofd/error.hpp"

namespace pofd {

DomainGrid::DomainGrid(double a, double b, std::size_t size) : a_(a), b_(b) {
  if (!(std::isfinite(a) && std::isfinite(b)) || !(b > a)) {
    throw InputError("grid domain must satisfy a < b");
  }
  if (size < 2) throw InputError("grid needs at least two points");
  step_ = (b - a) / static_cast<double>(size - 1);
  points_.resize(size);
  for (std::size_t r = 0; r < size; ++r) {
    points_[r] = a + step_ * static_cast<double>(r);
  }
  points_.back() = b;
}

std::size_t DomainGrid::cell(double u) const {
  if (u <= a_) return 0;
  const auto last = points_.size() - 2;
  const double pos = (u - a_) / step_;
  return std::min(static_cast<std::size_t>(pos), last);
}

std::size_t DomainGrid::nearest(double u) const {
  if (u <= a_) return 0;
  if (u >= b_) return points_.size() - 1;
  return static_cast<std::size_t>(std::lround((u - a_) / step_));
}

double DomainGrid::interpolate(std::span<const double> values, double u) const {
  if (u <= a_) return values.front();
  if (u >= b_) return values.back();
  const auto r = cell(u);
  const double t = (u - points_[r]) / step_;
  return (1.0 - t) * values[r] + t * values[r + 1];
}

double DomainGrid::integrate(std::span<const double> values) const {
  double sum = 0.5 * (values.front() + values.back());
  for (std::size_t r = 1; r + 1 < values.size(); ++r) sum += values[r];
  return sum * step_;
}

}  // namespace pofd
