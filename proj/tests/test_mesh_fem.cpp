#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <set>

#include <Eigen/Eigenvalues>

#include "wavespoof/errors.hpp"
#include "wavespoof/fem.hpp"
#include "wavespoof/mesh.hpp"

using namespace wavespoof;

namespace {

double total(const SparseSymMatrix& m) {
  double s = 0.0;
  for (int k = 0; k < m.outerSize(); ++k) {
    for (SparseSymMatrix::InnerIterator it(m, k); it; ++it) s += it.value();
  }
  return s;
}

double asymmetry(const SparseSymMatrix& m) {
  const SparseSymMatrix d = m - SparseSymMatrix(m.transpose());
  return d.norm();
}

Eigen::VectorXd interpolate(const TriMesh& mesh, double (*fn)(double, double)) {
  Eigen::VectorXd v(mesh.num_nodes());
  for (int i = 0; i < mesh.num_nodes(); ++i) v[i] = fn(mesh.vertices[i].x1, mesh.vertices[i].x2);
  return v;
}

double sin_sin(double x, double y) { return std::sin(std::numbers::pi * x) * std::sin(std::numbers::pi * y); }

}  // namespace

TEST_CASE("minimal triangulation of the unit square") {
  const TriMesh mesh = build_rect_mesh(Rect{0, 1, 0, 1}, 1.0);
  CHECK(mesh.num_triangles() == 2);
  CHECK(mesh.num_nodes() == 4);
  CHECK(mesh.boundary_edges.size() == 4);
}

TEST_CASE("triangle areas partition the domain") {
  const TriMesh mesh = build_rect_mesh(Rect{0, 1, 0, 1}, 0.5);
  double area = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) area += mesh.signed_area(t);
  CHECK(std::abs(area - 1.0) <= 1e-12);
}

TEST_CASE("jittered mesh keeps positive orientation, conformity and edge bound") {
  const double h = 0.3;
  const TriMesh mesh = build_rect_mesh(Rect{-1, 2, 0.5, 2.5}, h, MeshOptions{0.5, 42});
  for (int t = 0; t < mesh.num_triangles(); ++t) CHECK(mesh.signed_area(t) > 0.0);
  CHECK(mesh.max_edge_length() <= 1.5 * h);

  // Every interior edge is shared by exactly two triangles, every boundary edge by one.
  std::map<std::pair<int, int>, int> uses;
  for (const auto& tri : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      const int a = tri[e], b = tri[(e + 1) % 3];
      ++uses[{std::min(a, b), std::max(a, b)}];
    }
  }
  std::set<std::pair<int, int>> boundary;
  for (const auto& be : mesh.boundary_edges) boundary.insert({std::min(be[0], be[1]), std::max(be[0], be[1])});
  double perimeter = 0.0;
  for (const auto& [edge, count] : uses) {
    if (boundary.count(edge)) {
      CHECK(count == 1);
      const Point2 p = mesh.vertices[edge.first], q = mesh.vertices[edge.second];
      perimeter += std::hypot(p.x1 - q.x1, p.x2 - q.x2);
      const bool on_side = (p.x1 == q.x1 && (p.x1 == -1 || p.x1 == 2)) || (p.x2 == q.x2 && (p.x2 == 0.5 || p.x2 == 2.5));
      CHECK(on_side);
    } else {
      CHECK(count == 2);
    }
  }
  CHECK(std::abs(perimeter - 10.0) <= 1e-12);
}

TEST_CASE("mesh construction is deterministic and round-trips through the text format") {
  const TriMesh a = build_rect_mesh(Rect{0, 3, 0, 2}, 0.4, MeshOptions{0.02, 9});
  const TriMesh b = build_rect_mesh(Rect{0, 3, 0, 2}, 0.4, MeshOptions{0.02, 9});
  REQUIRE(a.num_nodes() == b.num_nodes());
  for (int i = 0; i < a.num_nodes(); ++i) {
    CHECK(a.vertices[i].x1 == b.vertices[i].x1);
    CHECK(a.vertices[i].x2 == b.vertices[i].x2);
  }
  const auto path = std::filesystem::temp_directory_path() / "wavespoof_mesh_roundtrip.txt";
  write_mesh(path, a);
  const TriMesh c = read_mesh(path);
  REQUIRE(c.num_nodes() == a.num_nodes());
  REQUIRE(c.num_triangles() == a.num_triangles());
  REQUIRE(c.boundary_edges.size() == a.boundary_edges.size());
  for (int i = 0; i < a.num_nodes(); ++i) {
    CHECK(c.vertices[i].x1 == a.vertices[i].x1);
    CHECK(c.vertices[i].x2 == a.vertices[i].x2);
  }
  for (int t = 0; t < a.num_triangles(); ++t) CHECK(c.triangles[t] == a.triangles[t]);
  std::filesystem::remove(path);
}

TEST_CASE("full-scale mesh matches the reported node to element proportion") {
  const TriMesh mesh = build_rect_mesh(Rect{0, 100, 0, 100}, 100.0 / 108.0);
  const double ratio = static_cast<double>(mesh.num_nodes()) / mesh.num_triangles();
  CHECK(mesh.num_nodes() > 10000);
  CHECK(mesh.num_nodes() < 13000);
  CHECK(std::abs(ratio - 11836.0 / 23270.0) < 0.01);
}

TEST_CASE("degenerate rectangles and bad sizes are rejected") {
  CHECK_THROWS_AS(build_rect_mesh(Rect{0, 0, 0, 1}, 0.1), InvalidInput);
  CHECK_THROWS_AS(build_rect_mesh(Rect{0, 1, 2, 2}, 0.1), InvalidInput);
  CHECK_THROWS_AS(build_rect_mesh(Rect{0, 1, 0, 1}, 0.0), InvalidInput);
  CHECK_THROWS_AS(build_rect_mesh(Rect{0, 1, 0, 1}, -0.5), InvalidInput);
}

TEST_CASE("element matrices of the unit right triangle") {
  const Point2 a{0, 0}, b{1, 0}, c{0, 1};
  Eigen::Matrix3d mass_expected;
  mass_expected << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  mass_expected *= 0.5 / 12.0;
  CHECK((element_mass(a, b, c) - mass_expected).norm() <= 1e-15);

  Eigen::Matrix3d stiff_expected;
  stiff_expected << 2, -1, -1, -1, 1, 0, -1, 0, 1;
  stiff_expected *= 0.5;
  CHECK((element_stiffness(a, b, c) - stiff_expected).norm() <= 1e-15);
}

TEST_CASE("element mass matches Gauss quadrature of basis products on a skewed triangle") {
  const Point2 a{0.3, -0.2}, b{2.1, 0.4}, c{0.9, 1.7};
  const double area = 0.5 * ((b.x1 - a.x1) * (c.x2 - a.x2) - (c.x1 - a.x1) * (b.x2 - a.x2));
  // Degree-2 exact rule: edge midpoints with weight area / 3, basis values are
  // the barycentric coordinates of the quadrature point.
  const double bary[3][3] = {{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}};
  Eigen::Matrix3d quad = Eigen::Matrix3d::Zero();
  for (const auto& q : bary) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) quad(i, j) += area / 3.0 * q[i] * q[j];
    }
  }
  CHECK((element_mass(a, b, c) - quad).norm() <= 1e-14);
}

TEST_CASE("assembled matrices: sums, symmetry, null space and support") {
  const Rect dom{-0.5, 2.5, 1.0, 3.0};
  const TriMesh mesh = build_rect_mesh(dom, 0.2, MeshOptions{0.02, 3});
  const SparseSymMatrix M = assemble_mass(mesh);
  const SparseSymMatrix K = assemble_stiffness(mesh);
  const SparseSymMatrix S = assemble_surface_mass(mesh);

  CHECK(std::abs(total(M) - dom.area()) <= 1e-10 * dom.area());
  CHECK(std::abs(total(S) - dom.perimeter()) <= 1e-10 * dom.perimeter());
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(mesh.num_nodes());
  CHECK((K * ones).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(asymmetry(M) <= 1e-14);
  CHECK(asymmetry(K) <= 1e-13);
  CHECK(asymmetry(S) <= 1e-14);
  for (int i = 0; i < K.rows(); ++i) CHECK(K.coeff(i, i) >= 0.0);

  std::set<int> on_boundary;
  for (const auto& e : mesh.boundary_edges) on_boundary.insert({e[0], e[1]});
  for (int k = 0; k < S.outerSize(); ++k) {
    for (SparseSymMatrix::InnerIterator it(S, k); it; ++it) {
      if (it.value() != 0.0) {
        CHECK(on_boundary.count(static_cast<int>(it.row())) == 1);
        CHECK(on_boundary.count(static_cast<int>(it.col())) == 1);
      }
    }
  }
}

TEST_CASE("unit square two-triangle mesh sums") {
  const TriMesh mesh = build_rect_mesh(Rect{0, 1, 0, 1}, 1.0);
  CHECK(std::abs(total(assemble_mass(mesh)) - 1.0) <= 1e-14);
  CHECK(std::abs(total(assemble_surface_mass(mesh)) - 4.0) <= 1e-14);
}

TEST_CASE("mass matrix is positive definite on a small mesh") {
  const TriMesh mesh = build_rect_mesh(Rect{0, 1, 0, 1}, 0.1, MeshOptions{0.02, 5});
  REQUIRE(mesh.num_nodes() <= 200);
  const Eigen::MatrixXd dense = Eigen::MatrixXd(assemble_mass(mesh));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_s(Eigen::MatrixXd(assemble_surface_mass(mesh)));
  CHECK(eig_s.eigenvalues().minCoeff() > -1e-14);
}

TEST_CASE("stiffness energy converges to the continuous Dirichlet integral") {
  // For v = sin(pi x) sin(pi y) on the unit square, integral |grad v|^2 = pi^2 / 2.
  const double exact = std::numbers::pi * std::numbers::pi / 2.0;
  double previous = 0.0;
  for (double h : {0.2, 0.1, 0.05}) {
    const TriMesh mesh = build_rect_mesh(Rect{0, 1, 0, 1}, h);
    const Eigen::VectorXd v = interpolate(mesh, sin_sin);
    const double err = std::abs(v.dot(assemble_stiffness(mesh) * v) - exact);
    if (previous > 0.0) CHECK(err < 0.5 * previous);
    previous = err;
  }
  CHECK(previous < 5e-3 * exact);
}

TEST_CASE("mollified delta: peak value, symmetry, unit mass") {
  const double eps = 0.3;
  CHECK(mollified_delta_value(0.0, 0.0, eps) == doctest::Approx(1.0 / (std::numbers::pi * std::numbers::pi * eps * eps)).epsilon(1e-15));
  CHECK(mollified_delta_value(0.4, -0.7, eps) == mollified_delta_value(-0.4, 0.7, eps));
  CHECK(mollified_delta_value(0.4, 0.7, eps) == mollified_delta_value(-0.4, 0.7, eps));
  CHECK_THROWS_AS(mollified_delta_value(0, 0, 0.0), InvalidInput);

  const TriMesh mesh = build_rect_mesh(Rect{-2, 2, -2, 2}, 0.5);
  CHECK_THROWS_AS(mollified_delta(mesh, Point2{0, 0}, -1.0), InvalidInput);
  const NodalVector d = mollified_delta(mesh, Point2{0, 0}, eps);
  int center = -1;
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    if (mesh.vertices[i].x1 == 0.0 && mesh.vertices[i].x2 == 0.0) center = i;
  }
  REQUIRE(center >= 0);
  CHECK(d[center] == doctest::Approx(1.0 / (std::numbers::pi * std::numbers::pi * eps * eps)));

  // Composite Simpson over [-R, R]^2; the exact integral there is
  // (2 atan(R / eps) / pi)^2, which tends to 1 as R grows.
  for (double R : {10.0 * eps, 200.0 * eps}) {
    const int n = 4000;
    const double step = 2.0 * R / n;
    std::vector<double> w(n + 1);
    for (int i = 0; i <= n; ++i) w[i] = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    double sum = 0.0;
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; j <= n; ++j) sum += w[i] * w[j] * mollified_delta_value(-R + i * step, -R + j * step, eps);
    }
    sum *= step * step / 9.0;
    const double exact = std::pow(2.0 * std::atan(R / eps) / std::numbers::pi, 2);
    CHECK(std::abs(sum - exact) <= 1e-7);
    if (R > 100 * eps) CHECK(std::abs(sum - 1.0) < 0.01);
  }
}

TEST_CASE("receiver weights reproduce affine fields and vertices") {
  const TriMesh mesh = build_rect_mesh(Rect{0, 2, 0, 1}, 0.25, MeshOptions{0.02, 11});
  const Point2 vertex = mesh.vertices[17];
  const NodalVector at_vertex = receiver_weights(mesh, vertex);
  CHECK(at_vertex[17] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(at_vertex.sum() - 1.0) <= 1e-12);
  CHECK(at_vertex.cwiseAbs().sum() == doctest::Approx(1.0).epsilon(1e-12));

  const auto& tri = mesh.triangles[40];
  const Point2 centroid{(mesh.vertices[tri[0]].x1 + mesh.vertices[tri[1]].x1 + mesh.vertices[tri[2]].x1) / 3.0,
                        (mesh.vertices[tri[0]].x2 + mesh.vertices[tri[1]].x2 + mesh.vertices[tri[2]].x2) / 3.0};
  const NodalVector at_centroid = receiver_weights(mesh, centroid);
  for (int k = 0; k < 3; ++k) CHECK(at_centroid[tri[k]] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  Eigen::VectorXd affine(mesh.num_nodes());
  for (int i = 0; i < mesh.num_nodes(); ++i) affine[i] = 1.5 - 2.0 * mesh.vertices[i].x1 + 0.75 * mesh.vertices[i].x2;
  for (const Point2 p : {Point2{0.33, 0.71}, Point2{1.999, 0.001}, Point2{1.2345, 0.5}}) {
    const NodalVector w = receiver_weights(mesh, p);
    CHECK(std::abs(w.sum() - 1.0) <= 1e-12);
    CHECK(std::abs(w.dot(affine) - (1.5 - 2.0 * p.x1 + 0.75 * p.x2)) <= 1e-12);
  }
  CHECK_THROWS_AS(receiver_weights(mesh, Point2{2.5, 0.5}), OutOfDomain);
}

TEST_CASE("edge ties go to the lowest-index triangle") {
  const TriMesh mesh = build_rect_mesh(Rect{0, 1, 0, 1}, 1.0);
  // The diagonal is shared by both triangles.
  const Point2 on_diagonal{0.5, 0.5};
  CHECK(locate_triangle(mesh, on_diagonal) == 0);
}

TEST_CASE("sparse matrix text format round-trips") {
  const TriMesh mesh = build_rect_mesh(Rect{0, 1, 0, 1}, 0.25);
  const SparseSymMatrix K = assemble_stiffness(mesh);
  const auto path = std::filesystem::temp_directory_path() / "wavespoof_matrix_roundtrip.txt";
  write_matrix(path, K);
  const SparseSymMatrix back = read_matrix(path);
  CHECK((back - K).norm() == 0.0);
  std::filesystem::remove(path);
}
