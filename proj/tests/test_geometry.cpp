#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "pcforge/errors.hpp"
#include "pcforge/geometry.hpp"
#include "test_util.hpp"

using namespace pcforge;

TEST_CASE("unit cube samples lie on the cube surface") {
  const auto pc = sample_mesh(testutil::unit_cube(), 10000, 7);
  REQUIRE(pc.size() == 10000);
  for (const auto& p : pc) {
    for (double c : {p.x, p.y, p.z}) {
      CHECK(c >= 0.0);
      CHECK(c <= 1.0);
    }
    const double to_face = std::min({p.x, 1 - p.x, p.y, 1 - p.y, p.z, 1 - p.z});
    CHECK(to_face <= 1e-12);
  }
}

TEST_CASE("area-weighted face selection follows the multinomial expectation") {
  // Triangle areas 1.5 and 0.5.
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {3, 0, 0}, {0, 1, 0}, {10, 0, 0}, {11, 0, 0}, {10, 1, 0}};
  m.faces = {{0, 1, 2}, {3, 4, 5}};
  const std::size_t n = 100000;
  const double expect_a = 75000.0;
  const double sd = std::sqrt(n * 0.75 * 0.25);
  double total_a = 0.0;
  const int seeds = 10;
  for (int s = 0; s < seeds; ++s) {
    const auto sample = sample_mesh_with_faces(m, n, static_cast<std::uint64_t>(s));
    const auto a = static_cast<double>(std::count(sample.face_index.begin(), sample.face_index.end(), 0u));
    CHECK(std::abs(a - expect_a) <= 0.01 * expect_a);
    CHECK(std::abs((n - a) - 25000.0) <= 0.01 * n);
    CHECK(std::abs(a - expect_a) <= 5 * sd);
    total_a += a;
  }
  // Pooled over seeds each count is within 1% of its own expectation.
  CHECK(std::abs(total_a / seeds - 75000.0) <= 750.0);
  CHECK(std::abs((n - total_a / seeds) - 25000.0) <= 250.0);
}

TEST_CASE("single triangle samples have valid barycentric coordinates") {
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {2, 0, 0}, {0, 1, 0}};
  m.faces = {{0, 1, 2}};
  for (const auto& p : sample_mesh(m, 5, 3)) {
    // Solve p = a + u (b - a) + v (c - a) in the z = 0 plane.
    const double u = p.x / 2.0, v = p.y, w = 1.0 - u - v;
    CHECK(u >= -1e-15);
    CHECK(v >= -1e-15);
    CHECK(w >= -1e-15);
    CHECK(u + v + w == doctest::Approx(1.0));
    CHECK(p.z == 0.0);
  }
}

TEST_CASE("sampled points are on their source faces") {
  auto mesh = testutil::unit_cube();
  for (auto& v : mesh.vertices) v = {v.x * 2.5 - 0.3, v.y * 0.7, v.z * 1.3 + 4.0};
  const auto s = sample_mesh_with_faces(mesh, 2000, 11);
  for (std::size_t i = 0; i < s.cloud.size(); ++i) {
    const auto& f = mesh.faces[s.face_index[i]];
    CHECK(point_triangle_distance(s.cloud[i], mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]) <= 1e-9);
  }
}

TEST_CASE("sampling is deterministic per seed") {
  const auto m = testutil::unit_cube();
  CHECK(sample_mesh(m, 500, 42) == sample_mesh(m, 500, 42));
  CHECK_FALSE(sample_mesh(m, 500, 42) == sample_mesh(m, 500, 43));
}

TEST_CASE("zero-area mesh is degenerate; zero-area faces are skipped") {
  TriangleMesh flat;
  flat.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  flat.faces = {{0, 1, 2}};
  CHECK_THROWS_AS(sample_mesh(flat, 10, 0), DegenerateMeshError);

  TriangleMesh mixed = flat;
  mixed.vertices.push_back({0, 1, 0});
  mixed.faces.push_back({0, 1, 3});
  const auto s = sample_mesh_with_faces(mixed, 1000, 1);
  for (auto f : s.face_index) CHECK(f == 1u);
}

TEST_CASE("normalize_unit_sphere analytic cases") {
  PointCloud pc({{0, 0, 0}, {2, 0, 0}});
  auto [out, xf] = normalize_unit_sphere(pc);
  CHECK(out[0] == Point3{-1, 0, 0});
  CHECK(out[1] == Point3{1, 0, 0});
  CHECK(xf.center == Point3{1, 0, 0});
  CHECK(xf.scale == 1.0);

  PointCloud centered({{1, 0, 0}, {-1, 0, 0}, {0, 0.5, 0}, {0, -0.5, 0}});
  auto [same, id] = normalize_unit_sphere(centered);
  CHECK(id.center == Point3{0, 0, 0});
  CHECK(id.scale == 1.0);
  CHECK(same == centered);

  CHECK_THROWS_AS(normalize_unit_sphere(PointCloud({{1, 2, 3}, {1, 2, 3}})), ZeroScaleError);
}

TEST_CASE("normalize_unit_sphere properties on a random cloud") {
  const auto pc = testutil::random_cloud(1000, 5, -3.0, 7.0);
  auto [out, xf] = normalize_unit_sphere(pc);
  double max_norm = 0.0;
  for (const auto& p : out) max_norm = std::max(max_norm, p.norm());
  CHECK(std::abs(max_norm - 1.0) <= 1e-12);
  CHECK(centroid(out).norm() <= 1e-12);
  const auto back = xf.invert(out);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    CHECK(std::abs(back[i].x - pc[i].x) <= 1e-9);
    CHECK(std::abs(back[i].y - pc[i].y) <= 1e-9);
    CHECK(std::abs(back[i].z - pc[i].z) <= 1e-9);
  }
}

TEST_CASE("center_cloud") {
  PointCloud pc({{0.3, -0.1, 0.5}, {0.3, -0.1, 0.5}});
  pc[0] += Point3{1, 0, 0};
  pc[1] -= Point3{1, 0, 0};
  const auto c = center_cloud(pc);
  CHECK(c[0].x == doctest::Approx(1.0));
  CHECK(c[1].x == doctest::Approx(-1.0));
  CHECK(std::abs(c[0].y) < 1e-15);
  CHECK(std::abs(c[0].z) < 1e-15);

  const PointCloud zero_mean({{1, 2, 3}, {-1, -2, -3}});
  CHECK(center_cloud(zero_mean) == zero_mean);

  const auto r = testutil::random_cloud(300, 9);
  const auto once = center_cloud(r);
  const auto twice = center_cloud(once);
  for (std::size_t i = 0; i < r.size(); ++i) CHECK(squared_distance(once[i], twice[i]) <= 1e-30);

  // Translation equivariance.
  PointCloud shifted = r;
  for (auto& p : shifted) p += Point3{5.0, -2.0, 0.25};
  const auto cs = center_cloud(shifted);
  for (std::size_t i = 0; i < r.size(); ++i) CHECK(std::sqrt(squared_distance(cs[i], once[i])) <= 1e-12);
}

TEST_CASE("point_triangle_distance regions") {
  const Point3 a{0, 0, 0}, b{1, 0, 0}, c{0, 1, 0};
  CHECK(point_triangle_distance({0.2, 0.2, 3}, a, b, c) == doctest::Approx(3.0));
  CHECK(point_triangle_distance({-1, 0, 0}, a, b, c) == doctest::Approx(1.0));
  CHECK(point_triangle_distance({0.5, -2, 0}, a, b, c) == doctest::Approx(2.0));
  CHECK(point_triangle_distance({1, 1, 0}, a, b, c) == doctest::Approx(std::sqrt(0.5)));
}
