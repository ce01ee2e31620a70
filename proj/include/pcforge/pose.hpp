#pragma once

#include <functional>
#include <string>

#include "pcforge/geometry.hpp"
#include "pcforge/raster.hpp"

namespace pcforge {

struct TranslationParams {
  double tx = 0.0;
  double ty = 0.0;
  double tz = 1.0;

  Point3 as_point() const { return {tx, ty, tz}; }
  friend bool operator==(const TranslationParams&, const TranslationParams&) = default;
};

struct PoseFitReport {
  TranslationParams translation;
  double cost_z = 0.0;
  double cost_x = 0.0;
  double cost_y = 0.0;
  int iterations = 0;
  double iou = 0.0;        // bounding-box IoU, gates acceptance
  double pixel_iou = 0.0;  // diagnostic only
  bool accepted = false;

  double total_cost() const { return cost_z + cost_x + cost_y; }
};

std::string to_json(const PoseFitReport& r);
PoseFitReport pose_report_from_json(const std::string& text);

// Integer shift moving the foreground bbox center onto the image center,
// rounding half toward negative. Throws EmptyMaskError on an empty mask.
BinaryMask center_mask_foreground(const BinaryMask& mask);
// The same shift applied to a box inside a width x height image.
BoundingBox2D center_bbox(const BoundingBox2D& box, int width, int height);

double cost_z(const BoundingBox2D& gt, const BoundingBox2D& r);
double cost_x(const BoundingBox2D& gt, const BoundingBox2D& r);
double cost_y(const BoundingBox2D& gt, const BoundingBox2D& r);

double bbox_iou(const BoundingBox2D& a, const BoundingBox2D& b);
double mask_iou(const BinaryMask& a, const BinaryMask& b);

struct LineSearchResult {
  double x = 0.0;
  double fx = 0.0;
  int evaluations = 0;
  bool truncated = false;
};

// Derivative-free minimization of f on [lo, hi] starting from x0: a uniform
// bracketing scan followed by golden-section refinement. Equal values on a
// plateau resolve toward the bracket midpoint, and a strictly better point
// is returned as the center of its plateau. Never returns f(x) > f(x0).
LineSearchResult line_minimize(const std::function<double(double)>& f, double x0, double lo, double hi,
                               double tol = 1e-4, int max_eval = 400);

struct PoseFitOptions {
  double tz_lo = 0.3, tz_hi = 5.0;
  double txy_lo = -1.0, txy_hi = 1.0;
  double step_tol = 1e-4;
  double min_improvement = 1e-4;
  int max_iterations = 1000;
  int max_eval_per_search = 400;
  int splat_radius = 0;  // matches pixel-center polygon fill
  double iou_gate = 0.93;
};

// Sequential tz -> tx -> ty bounding-box alignment of the rasterized cloud
// against mask_gt with identity rotation. Throws EmptyMaskError for an empty
// mask and NotVisibleError if no probed depth puts the cloud in frame.
PoseFitReport optimize_camera_translation(const PointCloud& pc, const BinaryMask& mask_gt, const TranslationParams& t0,
                                          const Intrinsics& k, const PoseFitOptions& opt = {});

}  // namespace pcforge
