#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pofd/grid.hpp"

namespace pofd {

/// One measurement (u, y) of a curve.
struct ObservationPair {
  double u;
  double y;
};

/// Closed interval [lower, upper] in domain units.
struct Interval {
  double lower;
  double upper;

  double width() const { return upper - lower; }
  bool contains(double u) const { return u >= lower && u <= upper; }
  bool operator==(const Interval&) const = default;
};

/// A partially observed curve: its measurements sorted by abscissa and the
/// observed interval [A, B] given by their extrema.
class Curve {
 public:
  /// Sorts the points (stable, so tied abscissae keep their input order).
  /// Throws InputError on non-finite values or fewer than two distinct abscissae.
  Curve(std::string id, std::vector<ObservationPair> points);

  const std::string& id() const { return id_; }
  const std::vector<ObservationPair>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  const Interval& observed_interval() const { return interval_; }

 private:
  std::string id_;
  std::vector<ObservationPair> points_;
  Interval interval_;
};

struct FunctionalDataset {
  std::vector<Curve> curves;
  Interval domain;
  DomainGrid grid;

  /// Validates the invariants: nonempty, every abscissa inside the domain.
  FunctionalDataset(std::vector<Curve> curves, Interval domain, std::size_t grid_size);
};

inline constexpr std::size_t kDefaultGridSize = 51;

/// Reads a `curve_id,u,y` CSV. Lines starting with '#' are comments.
/// Curves appear in order of first occurrence of their id.
FunctionalDataset load_dataset(const std::filesystem::path& path,
                               std::optional<Interval> domain = std::nullopt,
                               std::size_t grid_size = kDefaultGridSize);

/// Parses CSV text; `source` names the input in error messages.
FunctionalDataset parse_dataset(const std::string& text, const std::string& source,
                                std::optional<Interval> domain = std::nullopt,
                                std::size_t grid_size = kDefaultGridSize);

/// Serializes a dataset back to the `curve_id,u,y` schema.
std::string format_dataset(const FunctionalDataset& data);

/// Indices of curves whose observations reach within margin_fraction*(b-a)
/// of both domain ends.
std::vector<std::size_t> classify_complete(const FunctionalDataset& data,
                                           double margin_fraction = 0.1);

/// JSON summary: curve count, per-curve intervals, completeness flags.
std::string dataset_summary_json(const FunctionalDataset& data,
                                 double margin_fraction = 0.1);

}  // namespace pofd
