#include "pcforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "pcforge/errors.hpp"

namespace pcforge {

namespace {

double coord(const Point3& p, int axis) { return axis == 0 ? p.x : axis == 1 ? p.y : p.z; }

}  // namespace

KdTree3::KdTree3(const PointCloud& points) : points_(points.points) {
  if (points_.empty()) throw ShapeError("k-d tree over an empty cloud");
  order_.resize(points_.size());
  for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
  nodes_.reserve(2 * points_.size() / kLeafSize + 1);
  build(0, static_cast<std::uint32_t>(order_.size()));
}

std::int32_t KdTree3::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= kLeafSize) return id;

  Point3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
  Point3 hi = lo * -1.0;
  for (auto k = begin; k < end; ++k) {
    const auto& p = points_[order_[k]];
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
  }
  const Point3 extent = hi - lo;
  const int axis = extent.x >= extent.y && extent.x >= extent.z ? 0 : (extent.y >= extent.z ? 1 : 2);
  const auto mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double ca = coord(points_[a], axis), cb = coord(points_[b], axis);
                     return ca < cb || (ca == cb && a < b);
                   });
  const double split = coord(points_[order_[mid]], axis);
  const auto left = build(begin, mid);
  const auto right = build(mid, end);
  auto& node = nodes_[static_cast<std::size_t>(id)];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

void KdTree3::search(std::int32_t id, const Point3& q, std::size_t& best_index, double& best_sq) const {
  const Node& node = nodes_[static_cast<std::size_t>(id)];
  if (node.left < 0) {
    for (auto k = node.begin; k < node.end; ++k) {
      const auto idx = order_[k];
      const double d = squared_distance(q, points_[idx]);
      if (d < best_sq || (d == best_sq && idx < best_index)) {
        best_sq = d;
        best_index = idx;
      }
    }
    return;
  }
  // Left holds coordinates <= split, right holds coordinates >= split.
  const double delta = coord(q, node.axis) - node.split;
  const auto near = delta <= 0.0 ? node.left : node.right;
  const auto far = delta <= 0.0 ? node.right : node.left;
  search(near, q, best_index, best_sq);
  // Ties must still be visited so the lowest index wins.
  if (delta * delta <= best_sq) search(far, q, best_index, best_sq);
}

Neighbor KdTree3::nearest(const Point3& q) const {
  std::size_t best_index = std::numeric_limits<std::size_t>::max();
  double best_sq = std::numeric_limits<double>::infinity();
  search(0, q, best_index, best_sq);
  return {best_index, std::sqrt(best_sq)};
}

std::vector<double> nearest_distance_all(const PointCloud& query, const PointCloud& target) {
  if (target.empty()) throw ShapeError("nearest_distance_all: empty target cloud");
  const KdTree3 tree(target);
  std::vector<double> out(query.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(query.size()); ++i)
    out[static_cast<std::size_t>(i)] = tree.nearest(query[static_cast<std::size_t>(i)]).distance;
  return out;
}

namespace {

double mean_of(const std::vector<double>& d, bool squared) {
  double sum = 0.0;
  for (double v : d) sum += squared ? v * v : v;
  return sum / static_cast<double>(d.size());
}

void require_nonempty(const PointCloud& p, const PointCloud& g) {
  if (p.empty() || g.empty()) throw ShapeError("metrics need two non-empty clouds");
}

}  // namespace

double chamfer(const PointCloud& p, const PointCloud& g, bool squared) {
  require_nonempty(p, g);
  return mean_of(nearest_distance_all(p, g), squared) + mean_of(nearest_distance_all(g, p), squared);
}

MetricReport fscore(const PointCloud& p, const PointCloud& g, double tau) {
  require_nonempty(p, g);
  if (!(tau > 0.0)) throw ConfigError("fscore threshold must be positive");
  const auto dp = nearest_distance_all(p, g);
  const auto dg = nearest_distance_all(g, p);
  MetricReport r;
  r.tau = tau;
  r.chamfer = mean_of(dp, false) + mean_of(dg, false);
  r.chamfer_squared = mean_of(dp, true) + mean_of(dg, true);
  const auto within = [tau](const std::vector<double>& d) {
    return static_cast<double>(std::count_if(d.begin(), d.end(), [tau](double v) { return v < tau; })) /
           static_cast<double>(d.size());
  };
  r.precision = within(dp);
  r.recall = within(dg);
  const double denom = r.precision + r.recall;
  r.fscore = denom > 0.0 ? 2.0 * r.precision * r.recall / denom : 0.0;
  return r;
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j = {{"chamfer", chamfer},     {"chamfer_x1e3", chamfer * 1e3},
                              {"chamfer_squared", chamfer_squared}, {"fscore", fscore},
                              {"precision", precision}, {"recall", recall},
                              {"tau", tau}};
  return j.dump();
}

}  // namespace pcforge
