#include <random>

#include "doctest.h"
#include "pcforge/edgemap.hpp"
#include "pcforge/errors.hpp"
#include "pcforge/reference.hpp"
#include "test_util.hpp"

using namespace pcforge;

namespace {

// Values on a 1/8 grid keep every intermediate sum exact.
GrayImage dyadic_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(0, 8);
  GrayImage img(w, h);
  for (auto& v : img.data) v = u(rng) / 8.0;
  return img;
}

}  // namespace

TEST_CASE("constant image has no edges") {
  for (double c : {0.0, 0.3, 1.0}) {
    const auto e = sobel(GrayImage(17, 11, c));
    for (double v : e.data) CHECK(v == 0.0);
  }
}

TEST_CASE("sobel matches direct convolution bit for bit") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto img = testutil::random_image(3 + static_cast<int>(seed % 40), 3 + static_cast<int>(seed * 7 % 37), seed);
    CHECK(sobel(img) == reference::sobel_direct(img));
  }
}

TEST_CASE("vertical step edge") {
  const int w = 20, h = 12, c = 9;
  GrayImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = c; x < w; ++x) img(x, y) = 1.0;
  const auto e = sobel(img);
  CHECK(e == reference::sobel_direct(img));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (x == c - 1 || x == c) CHECK(e(x, y) == 1.0);
      else CHECK(e(x, y) == 0.0);
    }
}

TEST_CASE("sobel commutes with transpose") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto img = dyadic_image(13 + static_cast<int>(seed), 9, seed);
    CHECK(sobel(transpose(img)) == transpose(sobel(img)));
  }
}

TEST_CASE("sobel is invariant to adding a constant") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto img = testutil::random_image(30, 25, seed);
    const auto a = sobel(img);
    for (auto& v : img.data) v = v * 0.5 + 0.25;
    auto half = testutil::random_image(30, 25, seed);
    for (auto& v : half.data) v *= 0.5;
    const auto b = sobel(img);
    const auto c = sobel(half);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
      CHECK(b.data[i] == doctest::Approx(c.data[i]).epsilon(1e-12));
      CHECK(c.data[i] == doctest::Approx(a.data[i]).epsilon(1e-12));  // scale is normalized away too
    }
  }
}

TEST_CASE("output is in [0, 1] with maximum 1") {
  const auto e = sobel(testutil::random_image(40, 40, 9));
  double mx = 0.0;
  for (double v : e.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    mx = std::max(mx, v);
  }
  CHECK(mx == 1.0);
}

TEST_CASE("small and mismatched inputs are rejected") {
  CHECK_THROWS_AS(sobel(GrayImage(2, 5)), ShapeError);
  CHECK_THROWS_AS(sobel(GrayImage(5, 2)), ShapeError);
  CHECK_THROWS_AS(masked_sobel(GrayImage(5, 5), BinaryMask(5, 6)), ShapeError);
}

TEST_CASE("masked_sobel trivial masks") {
  const auto img = testutil::random_image(32, 24, 5);
  for (double v : masked_sobel(img, BinaryMask(32, 24, 0)).data) CHECK(v == 0.0);
  CHECK(masked_sobel(img, BinaryMask(32, 24, 1)) == sobel(img));
}

TEST_CASE("masked_sobel support stays within one pixel of the mask") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> u(2, 60);
  for (int trial = 0; trial < 20; ++trial) {
    auto img = testutil::random_image(64, 64, 100 + trial);  // textured background
    BinaryMask m(64, 64);
    int x0 = u(rng), x1 = u(rng), y0 = u(rng), y1 = u(rng);
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        m(x, y) = 1;
        img(x, y) = 0.9;  // bright building
      }
    if (trial % 2) m(u(rng), u(rng)) = 1;  // stray foreground pixel

    BinaryMask dilated(64, 64);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx)
            if (m.contains(x + dx, y + dy) && m(x + dx, y + dy)) dilated(x, y) = 1;

    const auto e = masked_sobel(img, m);
    int outside = 0, on_boundary = 0;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        if (e(x, y) != 0.0 && !dilated(x, y)) ++outside;
        if (e(x, y) != 0.0 && dilated(x, y) && !m(x, y)) ++on_boundary;
      }
    CHECK(outside == 0);
    CHECK(on_boundary > 0);  // the mask contour itself shows up
  }
}
