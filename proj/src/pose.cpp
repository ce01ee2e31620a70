#include "pcforge/pose.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

namespace pcforge {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int floor_div2(int v) { return v >= 0 ? v / 2 : -((-v + 1) / 2); }

}  // namespace

std::string to_json(const PoseFitReport& r) {
  nlohmann::ordered_json j = {{"tx", r.translation.tx}, {"ty", r.translation.ty}, {"tz", r.translation.tz},
                              {"iou", r.iou},           {"iterations", r.iterations}, {"accepted", r.accepted},
                              {"cost_z", r.cost_z},     {"cost_x", r.cost_x},     {"cost_y", r.cost_y},
                              {"pixel_iou", r.pixel_iou}};
  return j.dump();
}

PoseFitReport pose_report_from_json(const std::string& text) {
  PoseFitReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    r.translation = {j.at("tx").get<double>(), j.at("ty").get<double>(), j.at("tz").get<double>()};
    r.iou = j.at("iou").get<double>();
    r.iterations = j.at("iterations").get<int>();
    r.accepted = j.at("accepted").get<bool>();
    r.cost_z = j.value("cost_z", 0.0);
    r.cost_x = j.value("cost_x", 0.0);
    r.cost_y = j.value("cost_y", 0.0);
    r.pixel_iou = j.value("pixel_iou", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("pose report: ") + e.what());
  }
  return r;
}

BoundingBox2D center_bbox(const BoundingBox2D& box, int width, int height) {
  const int dx = floor_div2((width - 1) - (box.x_min + box.x_max));
  const int dy = floor_div2((height - 1) - (box.y_min + box.y_max));
  return {box.x_min + dx, box.x_max + dx, box.y_min + dy, box.y_max + dy};
}

BinaryMask center_mask_foreground(const BinaryMask& mask) {
  const BoundingBox2D box = bbox_of_mask(mask);
  const BoundingBox2D moved = center_bbox(box, mask.width, mask.height);
  const int dx = moved.x_min - box.x_min;
  const int dy = moved.y_min - box.y_min;
  BinaryMask out(mask.width, mask.height);
  for (int y = box.y_min; y <= box.y_max; ++y)
    for (int x = box.x_min; x <= box.x_max; ++x)
      if (mask(x, y) && out.contains(x + dx, y + dy)) out(x + dx, y + dy) = 1;
  return out;
}

double cost_x(const BoundingBox2D& gt, const BoundingBox2D& r) {
  const double a = gt.x_min - r.x_min, b = gt.x_max - r.x_max;
  return std::sqrt(a * a + b * b);
}

double cost_y(const BoundingBox2D& gt, const BoundingBox2D& r) {
  const double a = gt.y_min - r.y_min, b = gt.y_max - r.y_max;
  return std::sqrt(a * a + b * b);
}

double cost_z(const BoundingBox2D& gt, const BoundingBox2D& r) {
  const double a = gt.x_min - r.x_min, b = gt.x_max - r.x_max;
  const double c = gt.y_min - r.y_min, d = gt.y_max - r.y_max;
  return std::sqrt(a * a + b * b + c * c + d * d);
}

double bbox_iou(const BoundingBox2D& a, const BoundingBox2D& b) {
  const long iw = std::max(0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min) + 1);
  const long ih = std::max(0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min) + 1);
  const long inter = iw * ih;
  const long uni = static_cast<long>(a.width()) * a.height() + static_cast<long>(b.width()) * b.height() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw ShapeError("mask_iou: dimension mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    inter += (a.data[i] && b.data[i]) ? 1 : 0;
    uni += (a.data[i] || b.data[i]) ? 1 : 0;
  }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

LineSearchResult line_minimize(const std::function<double(double)>& f, double x0, double lo, double hi, double tol,
                               int max_eval) {
  if (!(lo < hi)) throw ConfigError("line_minimize: need lo < hi");
  if (!(tol > 0.0)) throw ConfigError("line_minimize: tol must be positive");
  const double mid = 0.5 * (lo + hi);
  x0 = std::clamp(x0, lo, hi);

  LineSearchResult res;
  auto eval = [&](double x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isnan(v) ? kInf : v;
  };
  const double f0 = eval(x0);
  double best_x = x0, best_f = f0;
  auto consider = [&](double x, double v) {
    if (v < best_f || (v == best_f && std::abs(x - mid) < std::abs(best_x - mid))) {
      best_x = x;
      best_f = v;
    }
  };
  auto budget_left = [&] { return res.evaluations < max_eval; };

  // Bracketing scan.
  const int intervals = std::clamp(max_eval / 6, 4, 64);
  const double h = (hi - lo) / intervals;
  std::vector<double> grid_f(intervals + 1, kInf);
  for (int i = 0; i <= intervals && budget_left(); ++i) {
    grid_f[i] = eval(lo + i * h);
    consider(lo + i * h, grid_f[i]);
  }
  if (!budget_left()) res.truncated = true;

  // Golden-section refinement inside the cell pair around the best sample.
  double a = std::max(lo, best_x - h), b = std::min(hi, best_x + h);
  constexpr double kInvPhi = 0.6180339887498949;
  double c = b - kInvPhi * (b - a), d = a + kInvPhi * (b - a);
  double fc = budget_left() ? eval(c) : kInf;
  double fd = budget_left() ? eval(d) : kInf;
  consider(c, fc);
  consider(d, fd);
  while (b - a > tol) {
    if (!budget_left()) {
      res.truncated = true;
      break;
    }
    // Ties move toward the midpoint of the original bracket.
    const bool keep_left = fc < fd || (fc == fd && std::abs(c - mid) <= std::abs(d - mid));
    if (keep_left) {
      b = d; d = c; fd = fc;
      c = b - kInvPhi * (b - a);
      fc = eval(c);
      consider(c, fc);
    } else {
      a = c; c = d; fc = fd;
      d = a + kInvPhi * (b - a);
      fd = eval(d);
      consider(d, fd);
    }
  }

  if (!(best_f < f0)) {
    res.x = x0;
    res.fx = f0;
    return res;
  }

  // Widen to the plateau holding best_f and return its center.
  auto edge = [&](double inside, double limit) {
    double out = limit;
    if (!budget_left()) return inside;
    if (eval(limit) == best_f) return limit;
    while (std::abs(out - inside) > tol && budget_left()) {
      const double m = 0.5 * (inside + out);
      (eval(m) == best_f ? inside : out) = m;
    }
    return inside;
  };
  const double left = edge(best_x, std::max(lo, best_x - h));
  const double right = edge(best_x, std::min(hi, best_x + h));
  const double centre = 0.5 * (left + right);
  if (centre != best_x && budget_left() && eval(centre) == best_f) best_x = centre;
  res.truncated = res.truncated || !budget_left();
  res.x = best_x;
  res.fx = best_f;
  return res;
}

PoseFitReport optimize_camera_translation(const PointCloud& pc, const BinaryMask& mask_gt, const TranslationParams& t0,
                                          const Intrinsics& k, const PoseFitOptions& opt) {
  k.validate();
  if (!mask_gt.same_shape(k.width, k.height)) throw ShapeError("ground-truth mask does not match intrinsics");
  const BoundingBox2D gt = bbox_of_mask(mask_gt);
  const BoundingBox2D gt_centered = bbox_of_mask(center_mask_foreground(mask_gt));

  auto render_box = [&](const TranslationParams& t) {
    return splat_bbox(pc, CameraPose::from_translation(t.as_point()), k, opt.splat_radius);
  };
  auto size_cost = [&](const TranslationParams& t) {
    const auto box = render_box(t);
    return box ? cost_z(gt_centered, center_bbox(*box, k.width, k.height)) : kInf;
  };
  auto horizontal_cost = [&](const TranslationParams& t) {
    const auto box = render_box(t);
    return box ? cost_x(gt, *box) : kInf;
  };
  auto vertical_cost = [&](const TranslationParams& t) {
    const auto box = render_box(t);
    return box ? cost_y(gt, *box) : kInf;
  };
  auto total_cost = [&](const TranslationParams& t) { return size_cost(t) + horizontal_cost(t) + vertical_cost(t); };

  PoseFitReport report;
  TranslationParams t = t0;
  double previous = total_cost(t);
  double improvement = kInf;
  int iteration = 0;
  while (improvement > opt.min_improvement && iteration < opt.max_iterations) {
    ++iteration;

    auto tz_step = line_minimize(
        [&](double tz) { return size_cost({t.tx, t.ty, tz}); }, t.tz, opt.tz_lo, opt.tz_hi, opt.step_tol,
        opt.max_eval_per_search);
    if (!std::isfinite(tz_step.fx)) throw NotVisibleError("point cloud is not visible at any probed depth");
    t.tz = tz_step.x;

    t.tx = line_minimize([&](double tx) { return horizontal_cost({tx, t.ty, t.tz}); }, t.tx, opt.txy_lo,
                         opt.txy_hi, opt.step_tol, opt.max_eval_per_search)
               .x;
    t.ty = line_minimize([&](double ty) { return vertical_cost({t.tx, ty, t.tz}); }, t.ty, opt.txy_lo,
                         opt.txy_hi, opt.step_tol, opt.max_eval_per_search)
               .x;

    const double current = total_cost(t);
    improvement = previous - current;
    previous = current;
  }

  report.translation = t;
  report.iterations = iteration;
  report.cost_z = size_cost(t);
  report.cost_x = horizontal_cost(t);
  report.cost_y = vertical_cost(t);
  const auto final_raster = rasterize_points(pc, CameraPose::from_translation(t.as_point()), k, opt.splat_radius);
  if (const auto box = try_bbox_of_mask(final_raster.mask)) {
    report.iou = bbox_iou(gt, *box);
    report.pixel_iou = mask_iou(mask_gt, final_raster.mask);
  }
  report.accepted = report.iou > opt.iou_gate;
  return report;
}

}  // namespace pcforge
