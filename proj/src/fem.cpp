#include "wavespoof/fem.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "wavespoof/errors.hpp"

namespace wavespoof {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

SparseSymMatrix from_triplets(int n, const Triplets& triplets) {
  SparseSymMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.makeCompressed();
  return m;
}

template <typename ElementFn>
SparseSymMatrix assemble_elements(const TriMesh& mesh, ElementFn&& element) {
  Triplets triplets;
  triplets.reserve(static_cast<std::size_t>(9 * mesh.num_triangles()));
  for (const auto& tri : mesh.triangles) {
    const Eigen::Matrix3d local =
        element(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) triplets.emplace_back(tri[a], tri[b], local(a, b));
    }
  }
  return from_triplets(mesh.num_nodes(), triplets);
}

}  // namespace

Eigen::Matrix3d element_mass(const Point2& a, const Point2& b, const Point2& c) {
  const double area = 0.5 * std::abs((b.x1 - a.x1) * (c.x2 - a.x2) - (c.x1 - a.x1) * (b.x2 - a.x2));
  Eigen::Matrix3d m;
  m << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  return m * (area / 12.0);
}

Eigen::Matrix3d element_stiffness(const Point2& a, const Point2& b, const Point2& c) {
  const double twice_area = (b.x1 - a.x1) * (c.x2 - a.x2) - (c.x1 - a.x1) * (b.x2 - a.x2);
  // grad phi_i = (y_j - y_k, x_k - x_j) / (2A) for (i, j, k) cyclic.
  Eigen::Matrix<double, 3, 2> grad;
  grad << b.x2 - c.x2, c.x1 - b.x1,
          c.x2 - a.x2, a.x1 - c.x1,
          a.x2 - b.x2, b.x1 - a.x1;
  grad /= twice_area;
  return (0.5 * std::abs(twice_area)) * grad * grad.transpose();
}

SparseSymMatrix assemble_mass(const TriMesh& mesh) { return assemble_elements(mesh, element_mass); }

SparseSymMatrix assemble_stiffness(const TriMesh& mesh) {
  return assemble_elements(mesh, element_stiffness);
}

SparseSymMatrix assemble_surface_mass(const TriMesh& mesh) {
  Triplets triplets;
  triplets.reserve(4 * mesh.boundary_edges.size());
  for (const auto& e : mesh.boundary_edges) {
    const Point2& p = mesh.vertices[e[0]];
    const Point2& q = mesh.vertices[e[1]];
    const double len = std::hypot(p.x1 - q.x1, p.x2 - q.x2);
    triplets.emplace_back(e[0], e[0], len / 3.0);
    triplets.emplace_back(e[1], e[1], len / 3.0);
    triplets.emplace_back(e[0], e[1], len / 6.0);
    triplets.emplace_back(e[1], e[0], len / 6.0);
  }
  return from_triplets(mesh.num_nodes(), triplets);
}

double mollified_delta_value(double x1, double x2, double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidInput("mollified_delta: epsilon must be positive");
  const double e2 = epsilon * epsilon;
  return e2 / (std::numbers::pi * std::numbers::pi * (x1 * x1 + e2) * (x2 * x2 + e2));
}

NodalVector mollified_delta(const TriMesh& mesh, const Point2& center, double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidInput("mollified_delta: epsilon must be positive");
  NodalVector v(mesh.num_nodes());
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    const Point2& p = mesh.vertices[i];
    v[i] = mollified_delta_value(p.x1 - center.x1, p.x2 - center.x2, epsilon);
  }
  return v;
}

NodalVector receiver_weights(const TriMesh& mesh, const Point2& x_d) {
  const int t = mesh.domain.contains(x_d) ? locate_triangle(mesh, x_d) : -1;
  if (t < 0) {
    throw OutOfDomain("receiver position (" + std::to_string(x_d.x1) + ", " +
                      std::to_string(x_d.x2) + ") lies outside the mesh");
  }
  NodalVector d = NodalVector::Zero(mesh.num_nodes());
  const auto lam = barycentric(mesh, t, x_d);
  const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
  for (int a = 0; a < 3; ++a) d[tri[a]] += lam[a];
  return d;
}

void write_matrix(const std::filesystem::path& path, const SparseSymMatrix& matrix) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "spsym v1 " << matrix.rows() << ' ' << matrix.nonZeros() << '\n';
  out.precision(17);
  for (int col = 0; col < matrix.outerSize(); ++col) {
    for (SparseSymMatrix::InnerIterator it(matrix, col); it; ++it) {
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

SparseSymMatrix read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string tag, version;
  long n = 0, nnz = 0;
  in >> tag >> version >> n >> nnz;
  if (!in || tag != "spsym" || version != "v1" || n < 0 || nnz < 0) {
    throw InvalidInput("not a spsym v1 file: " + path.string());
  }
  Triplets triplets;
  triplets.reserve(static_cast<std::size_t>(nnz));
  for (long k = 0; k < nnz; ++k) {
    long i = 0, j = 0;
    double v = 0.0;
    in >> i >> j >> v;
    if (!in || i < 0 || j < 0 || i >= n || j >= n) throw InvalidInput("bad matrix entry in " + path.string());
    triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
  }
  return from_triplets(static_cast<int>(n), triplets);
}

}  // namespace wavespoof
