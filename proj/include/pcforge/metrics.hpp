#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcforge/geometry.hpp"

namespace pcforge {

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;
};

// Exact nearest-neighbor search over an immutable point set. Median split on
// the widest axis, leaves of at most 16 points; equal distances resolve to
// the lowest point index. Safe for concurrent queries.
class KdTree3 {
 public:
  static constexpr std::size_t kLeafSize = 16;

  explicit KdTree3(const PointCloud& points);

  Neighbor nearest(const Point3& q) const;
  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    std::uint32_t begin, end;  // range in order_
    std::int32_t left = -1, right = -1;
    int axis = 0;
    double split = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, const Point3& q, std::size_t& best_index, double& best_sq) const;

  std::vector<Point3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

// Exact Euclidean distance from every query point to its nearest target point.
std::vector<double> nearest_distance_all(const PointCloud& query, const PointCloud& target);

// mean_p min_g d + mean_g min_p d, with d squared when `squared` is set.
double chamfer(const PointCloud& p, const PointCloud& g, bool squared = false);

struct MetricReport {
  double chamfer = 0.0;
  double chamfer_squared = 0.0;
  double fscore = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double tau = 0.001;

  std::string to_json() const;
};

// A point counts as matched when its nearest counterpart is closer than tau.
MetricReport fscore(const PointCloud& p, const PointCloud& g, double tau = 0.001);

}  // namespace pcforge
