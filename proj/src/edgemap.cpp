#include "pcforge/edgemap.hpp"

#include <algorithm>
#include <cmath>

namespace pcforge {

GrayImage sobel(const GrayImage& img) {
  if (img.width < 3 || img.height < 3) throw ShapeError("sobel needs an image of at least 3x3");
  const int w = img.width, h = img.height;
  GrayImage out(w, h);

  // Antisymmetric taps are paired as differences first: flat regions then give
  // exactly zero instead of rounding noise that the normalization would amplify.
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
      const double a = img(xm, ym), b = img(x, ym), c = img(xp, ym);
      const double d = img(xm, y), f = img(xp, y);
      const double g = img(xm, yp), hh = img(x, yp), i = img(xp, yp);
      const double gx = (c - a) + 2.0 * (f - d) + (i - g);
      const double gy = (g - a) + 2.0 * (hh - b) + (i - c);
      out(x, y) = std::sqrt(gx * gx + gy * gy);
    }
  }

  double peak = 0.0;
  for (double v : out.data) peak = std::max(peak, v);
  if (peak > 0.0)
    for (double& v : out.data) v /= peak;
  return out;
}

GrayImage masked_sobel(const GrayImage& img, const BinaryMask& mask) {
  if (!img.same_shape(mask)) throw ShapeError("masked_sobel: image and mask dimensions differ");
  GrayImage isolated(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) isolated.data[i] = mask.data[i] ? img.data[i] : 0.0;
  return sobel(isolated);
}

}  // namespace pcforge
