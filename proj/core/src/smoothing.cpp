#include "pofd/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pofd/parallel.hpp"

namespace pofd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Sufficient statistics of a univariate weighted linear fit.
struct LinearSums {
  double s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0;
  std::size_t count = 0;

  void add(double d, double y, double w) {
    s0 += w;
    s1 += w * d;
    s2 += w * d * d;
    t0 += w * y;
    t1 += w * d * y;
    ++count;
  }

  // Intercept, or NaN if the design is singular.
  double intercept() const {
    const double det = s0 * s2 - s1 * s1;
    if (!(s0 > 0.0) || !(det > 1e-12 * s0 * s2)) return kNaN;
    return (s2 * t0 - s1 * t1) / det;
  }
};

std::vector<ObservationPair> pooled_sorted(const FunctionalDataset& data) {
  std::vector<ObservationPair> pooled;
  for (const auto& c : data.curves) pooled.insert(pooled.end(), c.points().begin(), c.points().end());
  std::stable_sort(pooled.begin(), pooled.end(),
                   [](const ObservationPair& l, const ObservationPair& r) { return l.u < r.u; });
  return pooled;
}

// Local-linear fit on points sorted by u.
LinearSums window_sums(std::span<const ObservationPair> sorted, double u, double h) {
  LinearSums sums;
  auto it = std::lower_bound(sorted.begin(), sorted.end(), u - h,
                             [](const ObservationPair& p, double v) { return p.u < v; });
  for (; it != sorted.end() && it->u < u + h; ++it) {
    const double d = it->u - u;
    const double w = scaled_kernel(d, h);
    if (w > 0.0) sums.add(d, it->y, w);
  }
  return sums;
}

double sample_sd(const std::vector<ObservationPair>& pts) {
  double mean = 0.0;
  for (const auto& p : pts) mean += p.u;
  mean /= static_cast<double>(pts.size());
  double ss = 0.0;
  for (const auto& p : pts) ss += (p.u - mean) * (p.u - mean);
  return std::sqrt(ss / static_cast<double>(std::max<std::size_t>(pts.size() - 1, 1)));
}

}  // namespace

void Bandwidths::validate(double width) const {
  auto check = [width](double h, const char* name) {
    if (!(h > 0.0 && h < width)) {
      std::ostringstream msg;
      msg << "bandwidth " << name << " = " << h << " must lie in (0, " << width << ")";
      throw InputError(msg.str());
    }
  };
  check(curve, "h_x");
  check(mean, "h_mu");
  check(covariance, "h_gamma");
}

Bandwidths default_bandwidths(const FunctionalDataset& data) {
  const auto pooled = pooled_sorted(data);
  const double n = static_cast<double>(data.curves.size());
  const double m = static_cast<double>(pooled.size()) / n;
  const double scale = 1.5 * sample_sd(pooled);
  const double width = data.domain.width();
  const double cap = 0.99 * width;
  const double pairs = std::max(m * m - m, 1.0);
  Bandwidths h{scale * std::pow(m, -0.2), scale * std::pow(n * m, -0.2),
               scale * std::pow(n * pairs, -1.0 / 6.0)};
  h.curve = std::min(h.curve, cap);
  h.mean = std::min(h.mean, cap);
  h.covariance = std::min(h.covariance, cap);
  return h;
}

InsufficientLocalData::InsufficientLocalData(double u, std::size_t effective_count)
    : ComputationError([&] {
        std::ostringstream msg;
        msg << "insufficient local data at u = " << u << " (" << effective_count
            << " points with nonzero weight)";
        return msg.str();
      }()),
      u_(u),
      count_(effective_count) {}

double local_linear(std::span<const ObservationPair> points, double u, double h) {
  LinearSums sums;
  for (const auto& p : points) {
    const double d = p.u - u;
    const double w = scaled_kernel(d, h);
    if (w > 0.0) sums.add(d, p.y, w);
  }
  const double value = sums.intercept();
  if (std::isnan(value)) throw InsufficientLocalData(u, sums.count);
  return value;
}

double llk_curve(const Curve& curve, double u, double h) {
  return local_linear(curve.points(), u, h);
}

MeanEstimate llk_mean(const FunctionalDataset& data, const DomainGrid& grid, double h) {
  const auto pooled = pooled_sorted(data);
  MeanEstimate mean{grid, std::vector<double>(grid.size()), h};
  for (std::size_t r = 0; r < grid.size(); ++r) {
    const auto sums = window_sums(pooled, grid[r], h);
    const double value = sums.intercept();
    if (std::isnan(value)) {
      std::ostringstream msg;
      msg << "mean not estimable at u = " << grid[r] << " (" << sums.count
          << " points in window); widen h_mu";
      throw ComputationError(msg.str());
    }
    mean.values[r] = value;
  }
  return mean;
}

CovarianceEstimate::CovarianceEstimate(DomainGrid grid, Eigen::MatrixXd surface,
                                       std::vector<unsigned char> mask, double bandwidth,
                                       std::size_t fallback_count)
    : grid_(std::move(grid)),
      surface_(std::move(surface)),
      mask_(std::move(mask)),
      bandwidth_(bandwidth),
      fallback_count_(fallback_count) {
  const auto L = static_cast<Eigen::Index>(grid_.size());
  if (surface_.rows() != L || surface_.cols() != L || mask_.size() != grid_.size() * grid_.size()) {
    throw InputError("covariance surface and mask must be L x L");
  }
}

CovarianceEstimate CovarianceEstimate::from_function(
    const DomainGrid& grid, const std::function<double(double, double)>& cov,
    const std::function<bool(double, double)>& estimable) {
  const auto L = grid.size();
  Eigen::MatrixXd surface(L, L);
  std::vector<unsigned char> mask(L * L, 1);
  for (std::size_t r = 0; r < L; ++r) {
    for (std::size_t s = 0; s < L; ++s) {
      const bool ok = !estimable || estimable(grid[r], grid[s]);
      mask[r * L + s] = ok ? 1 : 0;
      surface(r, s) = ok ? cov(grid[r], grid[s]) : kNaN;
    }
  }
  return CovarianceEstimate(grid, std::move(surface), std::move(mask), 0.0);
}

double CovarianceEstimate::at(double u, double v) const {
  const auto r = grid_.cell(u);
  const auto s = grid_.cell(v);
  const double h = grid_.spacing();
  const double tu = std::clamp((u - grid_[r]) / h, 0.0, 1.0);
  const double tv = std::clamp((v - grid_[s]) / h, 0.0, 1.0);
  const double w[4] = {(1 - tu) * (1 - tv), tu * (1 - tv), (1 - tu) * tv, tu * tv};
  const std::size_t rr[4] = {r, r + 1, r, r + 1};
  const std::size_t ss[4] = {s, s, s + 1, s + 1};
  double value = 0.0;
  double total = 0.0;
  for (int k = 0; k < 4; ++k) {
    if (w[k] == 0.0 || !estimable(rr[k], ss[k])) continue;
    value += w[k] * surface_(rr[k], ss[k]);
    total += w[k];
  }
  if (total > 0.0) return value / total;
  // Every weighted corner is masked: fall back to the nearest estimable corner.
  double best = std::numeric_limits<double>::infinity();
  double fallback = kNaN;
  for (int k = 0; k < 4; ++k) {
    if (!estimable(rr[k], ss[k])) continue;
    const double dist = std::hypot(u - grid_[rr[k]], v - grid_[ss[k]]);
    if (dist < best) {
      best = dist;
      fallback = surface_(rr[k], ss[k]);
    }
  }
  return fallback;
}

double CovarianceEstimate::coverage() const {
  std::size_t on = 0;
  for (auto m : mask_) on += m;
  return static_cast<double>(on) / static_cast<double>(mask_.size());
}

CovarianceEstimate llk_covariance(const FunctionalDataset& data, const MeanEstimate& mean,
                                  double h, std::size_t min_pairs, unsigned threads) {
  const auto& grid = mean.grid;
  const std::size_t L = grid.size();

  // Kernel windows of every observation: grid indices with nonzero weight.
  struct Window {
    std::size_t first = 0;
    std::vector<double> offset;  // U - u_r
    std::vector<double> weight;
  };
  struct Prepared {
    std::vector<double> residual;
    std::vector<Window> window;
  };
  std::vector<Prepared> prepared(data.curves.size());
  for (std::size_t i = 0; i < data.curves.size(); ++i) {
    const auto& pts = data.curves[i].points();
    auto& p = prepared[i];
    p.residual.resize(pts.size());
    p.window.resize(pts.size());
    for (std::size_t j = 0; j < pts.size(); ++j) {
      p.residual[j] = pts[j].y - mean.at(pts[j].u);
      auto& w = p.window[j];
      const double lo = (pts[j].u - h - grid.lower()) / grid.spacing();
      std::size_t r = lo <= 0.0 ? 0 : static_cast<std::size_t>(std::floor(lo));
      bool started = false;
      for (; r < L; ++r) {
        const double d = pts[j].u - grid[r];
        if (d <= -h) break;
        const double k = scaled_kernel(d, h);
        if (k <= 0.0) continue;
        if (!started) {
          w.first = r;
          started = true;
        }
        // Windows are contiguous in r; pad gaps would only come from k == 0 at |d| == h.
        w.offset.push_back(d);
        w.weight.push_back(k);
      }
    }
  }

  // 3x3 normal equations of the local plane fit, accumulated per grid cell.
  struct Cell {
    double s00 = 0, s01 = 0, s02 = 0, s11 = 0, s12 = 0, s22 = 0;
    double t0 = 0, t1 = 0, t2 = 0;
    std::size_t count = 0;
  };

  Eigen::MatrixXd raw = Eigen::MatrixXd::Constant(L, L, kNaN);
  std::vector<unsigned char> fallback(L * L, 0);
  const unsigned workers = std::max(1u, threads);
  const std::size_t blocks = std::min<std::size_t>(L, workers);

  parallel_for(blocks, workers, [&](std::size_t block) {
    const std::size_t r0 = block * L / blocks;
    const std::size_t r1 = (block + 1) * L / blocks;
    std::vector<Cell> cells((r1 - r0) * L);
    for (std::size_t i = 0; i < data.curves.size(); ++i) {
      const auto& p = prepared[i];
      const std::size_t m = p.residual.size();
      for (std::size_t j = 0; j < m; ++j) {
        const auto& wj = p.window[j];
        const std::size_t nj = wj.offset.size();
        if (nj == 0 || wj.first >= r1 || wj.first + nj <= r0) continue;
        for (std::size_t l = 0; l < m; ++l) {
          if (l == j) continue;
          const auto& wl = p.window[l];
          const double c = p.residual[j] * p.residual[l];
          for (std::size_t a = 0; a < nj; ++a) {
            const std::size_t r = wj.first + a;
            if (r < r0 || r >= r1) continue;
            const double d1 = wj.offset[a];
            const double k1 = wj.weight[a];
            Cell* row = &cells[(r - r0) * L];
            for (std::size_t b = 0; b < wl.offset.size(); ++b) {
              const double d2 = wl.offset[b];
              const double w = k1 * wl.weight[b];
              Cell& cell = row[wl.first + b];
              cell.s00 += w;
              cell.s01 += w * d1;
              cell.s02 += w * d2;
              cell.s11 += w * d1 * d1;
              cell.s12 += w * d1 * d2;
              cell.s22 += w * d2 * d2;
              cell.t0 += w * c;
              cell.t1 += w * d1 * c;
              cell.t2 += w * d2 * c;
              ++cell.count;
            }
          }
        }
      }
    }
    for (std::size_t r = r0; r < r1; ++r) {
      for (std::size_t s = 0; s < L; ++s) {
        const Cell& cell = cells[(r - r0) * L + s];
        if (cell.count < min_pairs || cell.count == 0) continue;
        Eigen::Matrix3d A;
        A << cell.s00, cell.s01, cell.s02, cell.s01, cell.s11, cell.s12, cell.s02, cell.s12,
            cell.s22;
        const Eigen::Vector3d t(cell.t0, cell.t1, cell.t2);
        const double scale = A(0, 0) * A(1, 1) * A(2, 2);
        const double det = A.determinant();
        if (scale > 0.0 && det > 1e-10 * scale) {
          raw(r, s) = A.ldlt().solve(t)(0);
        } else {
          raw(r, s) = cell.t0 / cell.s00;
          fallback[r * L + s] = 1;
        }
      }
    }
  });

  Eigen::MatrixXd surface = Eigen::MatrixXd::Constant(L, L, kNaN);
  std::vector<unsigned char> mask(L * L, 0);
  std::size_t fallbacks = 0;
  for (std::size_t r = 0; r < L; ++r) {
    for (std::size_t s = 0; s < L; ++s) {
      if (std::isnan(raw(r, s)) || std::isnan(raw(s, r))) continue;
      mask[r * L + s] = 1;
      surface(r, s) = 0.5 * (raw(r, s) + raw(s, r));
      fallbacks += fallback[r * L + s];
    }
  }
  return CovarianceEstimate(grid, std::move(surface), std::move(mask), h, fallbacks);
}

namespace {

struct RawPair {
  double along;   // (u + v) / sqrt(2)
  double across;  // (v - u) / sqrt(2)
  double value;
};

// Diagonal of the covariance from a fit that is linear along the diagonal and
// quadratic across it, which avoids the peak bias of the surface smoother.
double rotated_diagonal(const std::vector<RawPair>& pairs, double u, double h) {
  const double s0 = std::sqrt(2.0) * u;
  Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
  for (const auto& p : pairs) {
    const double w = epanechnikov((p.along - s0) / h) * epanechnikov(p.across / h);
    if (w <= 0.0) continue;
    const Eigen::Vector3d x(1.0, p.along - s0, p.across * p.across);
    A.noalias() += w * x * x.transpose();
    rhs.noalias() += w * p.value * x;
  }
  if (!(A(0, 0) > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  Eigen::FullPivLU<Eigen::Matrix3d> lu(A);
  if (lu.rank() < 3) return std::numeric_limits<double>::quiet_NaN();
  return lu.solve(rhs)(0);
}

}  // namespace

NoiseVariance estimate_noise_variance(const FunctionalDataset& data, const MeanEstimate& mean,
                                      const CovarianceEstimate& cov, double trim_fraction) {
  if (!(trim_fraction >= 0.0 && trim_fraction < 0.5)) {
    throw InputError("trim fraction must lie in [0, 0.5)");
  }
  std::vector<ObservationPair> squares;
  for (const auto& c : data.curves) {
    for (const auto& p : c.points()) {
      const double e = p.y - mean.at(p.u);
      squares.push_back({p.u, e * e});
    }
  }
  std::stable_sort(squares.begin(), squares.end(),
                   [](const ObservationPair& l, const ObservationPair& r) { return l.u < r.u; });

  std::vector<RawPair> pairs;
  const double root2 = std::sqrt(2.0);
  for (const auto& c : data.curves) {
    const auto& pts = c.points();
    for (std::size_t j = 0; j < pts.size(); ++j) {
      const double ej = pts[j].y - mean.at(pts[j].u);
      for (std::size_t l = j + 1; l < pts.size(); ++l) {
        const double el = pts[l].y - mean.at(pts[l].u);
        pairs.push_back({(pts[j].u + pts[l].u) / root2, (pts[l].u - pts[j].u) / root2, ej * el});
      }
    }
  }

  const auto& grid = cov.grid();
  const double lo = grid.lower() + trim_fraction * (grid.upper() - grid.lower());
  const double hi = grid.upper() - trim_fraction * (grid.upper() - grid.lower());
  const double h = cov.bandwidth() > 0.0 ? cov.bandwidth() : mean.bandwidth;
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t r = 0; r < grid.size(); ++r) {
    if (grid[r] < lo - 1e-12 || grid[r] > hi + 1e-12 || !cov.estimable(r, r)) continue;
    const double v = window_sums(squares, grid[r], h).intercept();
    if (std::isnan(v)) continue;
    double diag = rotated_diagonal(pairs, grid[r], h);
    if (std::isnan(diag)) diag = cov(r, r);
    total += std::max(0.0, v - diag);
    ++used;
  }
  if (used == 0) throw ComputationError("noise variance not identifiable");
  return {std::max(0.0, total / static_cast<double>(used))};
}

}  // namespace pofd
