#include "pofd/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "pofd/error.hpp"

namespace pofd {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

double parse_number(const std::string& field, const std::string& source, std::size_t line) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw InputError(source + ":" + std::to_string(line) + ": cannot parse number '" +
                     field + "'");
  }
  return value;
}

}  // namespace

Curve::Curve(std::string id, std::vector<ObservationPair> points)
    : id_(std::move(id)), points_(std::move(points)), interval_{0.0, 0.0} {
  for (const auto& p : points_) {
    if (!std::isfinite(p.u) || !std::isfinite(p.y)) {
      throw InputError("curve '" + id_ + "' has a non-finite observation");
    }
  }
  std::stable_sort(points_.begin(), points_.end(),
                   [](const ObservationPair& l, const ObservationPair& r) { return l.u < r.u; });
  if (points_.empty() || !(points_.back().u > points_.front().u)) {
    throw InputError("curve '" + id_ + "' needs at least two distinct abscissae");
  }
  interval_ = {points_.front().u, points_.back().u};
}

FunctionalDataset::FunctionalDataset(std::vector<Curve> curves_in, Interval domain_in,
                                     std::size_t grid_size)
    : curves(std::move(curves_in)),
      domain(domain_in),
      grid(domain_in.lower, domain_in.upper, grid_size) {
  if (curves.empty()) throw InputError("no curves");
  for (const auto& c : curves) {
    const auto& iv = c.observed_interval();
    if (iv.lower < domain.lower || iv.upper > domain.upper) {
      std::ostringstream msg;
      msg << "curve '" << c.id() << "' has observations outside the domain ["
          << domain.lower << ", " << domain.upper << "]";
      throw InputError(msg.str());
    }
  }
}

FunctionalDataset parse_dataset(const std::string& text, const std::string& source,
                                std::optional<Interval> domain, std::size_t grid_size) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<ObservationPair>> groups;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  bool header_seen = false;
  while (std::getline(in, raw)) {
    ++line;
    const auto row = trim(raw);
    if (row.empty() || row.front() == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(row);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (!header_seen) {
      header_seen = true;
      if (fields.size() == 3 && fields[0] == "curve_id" && fields[1] == "u" && fields[2] == "y") {
        continue;
      }
      throw InputError(source + ":" + std::to_string(line) +
                       ": expected header 'curve_id,u,y'");
    }
    if (fields.size() != 3 || fields[0].empty()) {
      throw InputError(source + ":" + std::to_string(line) +
                       ": expected 3 fields 'curve_id,u,y'");
    }
    const double u = parse_number(fields[1], source, line);
    const double y = parse_number(fields[2], source, line);
    auto [it, inserted] = groups.try_emplace(fields[0]);
    if (inserted) order.push_back(fields[0]);
    it->second.push_back({u, y});
  }
  if (order.empty()) throw InputError(source + ": no curves");

  std::vector<Curve> curves;
  curves.reserve(order.size());
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& id : order) {
    curves.emplace_back(id, std::move(groups[id]));
    lo = std::min(lo, curves.back().observed_interval().lower);
    hi = std::max(hi, curves.back().observed_interval().upper);
  }
  return FunctionalDataset(std::move(curves), domain.value_or(Interval{lo, hi}), grid_size);
}

FunctionalDataset load_dataset(const std::filesystem::path& path, std::optional<Interval> domain,
                               std::size_t grid_size) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_dataset(buffer.str(), path.string(), domain, grid_size);
}

std::string format_dataset(const FunctionalDataset& data) {
  std::ostringstream out;
  out << std::setprecision(17) << "curve_id,u,y\n";
  for (const auto& c : data.curves) {
    for (const auto& p : c.points()) out << c.id() << ',' << p.u << ',' << p.y << '\n';
  }
  return out.str();
}

std::vector<std::size_t> classify_complete(const FunctionalDataset& data,
                                           double margin_fraction) {
  if (!(margin_fraction > 0.0 && margin_fraction < 0.5)) {
    throw InputError("margin fraction must lie in (0, 0.5)");
  }
  const double margin = margin_fraction * data.domain.width();
  std::vector<std::size_t> complete;
  for (std::size_t i = 0; i < data.curves.size(); ++i) {
    const auto& iv = data.curves[i].observed_interval();
    if (iv.lower <= data.domain.lower + margin && iv.upper >= data.domain.upper - margin) {
      complete.push_back(i);
    }
  }
  return complete;
}

std::string dataset_summary_json(const FunctionalDataset& data, double margin_fraction) {
  const auto complete = classify_complete(data, margin_fraction);
  std::vector<bool> flag(data.curves.size(), false);
  for (auto i : complete) flag[i] = true;

  nlohmann::ordered_json j;
  j["curve_count"] = data.curves.size();
  j["complete_count"] = complete.size();
  j["domain"] = {data.domain.lower, data.domain.upper};
  j["grid_size"] = data.grid.size();
  auto& curves = j["curves"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < data.curves.size(); ++i) {
    const auto& c = data.curves[i];
    curves.push_back({{"id", c.id()},
                      {"points", c.size()},
                      {"interval", {c.observed_interval().lower, c.observed_interval().upper}},
                      {"complete", static_cast<bool>(flag[i])}});
  }
  return j.dump(2);
}

}  // namespace pofd
