#include "wavespoof/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "wavespoof/errors.hpp"
#include "wavespoof/random.hpp"

namespace wavespoof {

namespace {

double edge_length(const Point2& a, const Point2& b) { return std::hypot(a.x1 - b.x1, a.x2 - b.x2); }

}  // namespace

double TriMesh::signed_area(int t) const {
  const auto& tri = triangles[static_cast<std::size_t>(t)];
  const Point2& a = vertices[static_cast<std::size_t>(tri[0])];
  const Point2& b = vertices[static_cast<std::size_t>(tri[1])];
  const Point2& c = vertices[static_cast<std::size_t>(tri[2])];
  return 0.5 * ((b.x1 - a.x1) * (c.x2 - a.x2) - (c.x1 - a.x1) * (b.x2 - a.x2));
}

double TriMesh::min_edge_length() const {
  double h = std::numeric_limits<double>::infinity();
  for (const auto& tri : triangles) {
    for (int e = 0; e < 3; ++e) {
      h = std::min(h, edge_length(vertices[tri[e]], vertices[tri[(e + 1) % 3]]));
    }
  }
  return h;
}

double TriMesh::max_edge_length() const {
  double h = 0.0;
  for (const auto& tri : triangles) {
    for (int e = 0; e < 3; ++e) {
      h = std::max(h, edge_length(vertices[tri[e]], vertices[tri[(e + 1) % 3]]));
    }
  }
  return h;
}

TriMesh build_rect_mesh(const Rect& domain, double target_h, const MeshOptions& options) {
  if (!(domain.width() > 0.0) || !(domain.height() > 0.0) || !std::isfinite(domain.area())) {
    throw InvalidInput("invalid domain: rectangle has a non-positive side");
  }
  if (!(target_h > 0.0) || target_h > domain.width() || target_h > domain.height()) {
    throw InvalidInput("invalid mesh size: target_h must be positive and not exceed the side lengths");
  }

  const int nx = static_cast<int>(std::ceil(domain.width() / target_h - 1e-9));
  const int ny = static_cast<int>(std::ceil(domain.height() / target_h - 1e-9));
  const double hx = domain.width() / nx;
  const double hy = domain.height() / ny;
  const double jitter = std::clamp(options.jitter, 0.0, 0.025);

  TriMesh mesh;
  mesh.domain = domain;
  mesh.vertices.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  Rng rng(options.seed);
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      Point2 p{domain.xmin + i * hx, domain.ymin + j * hy};
      if (i == nx) p.x1 = domain.xmax;
      if (j == ny) p.x2 = domain.ymax;
      if (jitter > 0.0) {
        // Draw for every vertex so the stream does not depend on which are interior.
        const double dx = rng.uniform(-jitter, jitter) * hx;
        const double dy = rng.uniform(-jitter, jitter) * hy;
        if (i > 0 && i < nx) p.x1 += dx;
        if (j > 0 && j < ny) p.x2 += dy;
      }
      mesh.vertices.push_back(p);
    }
  }

  auto node = [nx](int i, int j) { return j * (nx + 1) + i; };
  mesh.triangles.reserve(static_cast<std::size_t>(2 * nx * ny));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int a = node(i, j);
      const int b = node(i + 1, j);
      const int c = node(i + 1, j + 1);
      const int d = node(i, j + 1);
      mesh.triangles.push_back({a, b, c});
      mesh.triangles.push_back({a, c, d});
    }
  }

  // Perimeter, counter-clockwise from (xmin, ymin).
  for (int i = 0; i < nx; ++i) mesh.boundary_edges.push_back({node(i, 0), node(i + 1, 0)});
  for (int j = 0; j < ny; ++j) mesh.boundary_edges.push_back({node(nx, j), node(nx, j + 1)});
  for (int i = nx; i > 0; --i) mesh.boundary_edges.push_back({node(i, ny), node(i - 1, ny)});
  for (int j = ny; j > 0; --j) mesh.boundary_edges.push_back({node(0, j), node(0, j - 1)});
  return mesh;
}

std::array<double, 3> barycentric(const TriMesh& mesh, int t, const Point2& p) {
  const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
  const Point2& a = mesh.vertices[tri[0]];
  const Point2& b = mesh.vertices[tri[1]];
  const Point2& c = mesh.vertices[tri[2]];
  const double det = (b.x1 - a.x1) * (c.x2 - a.x2) - (c.x1 - a.x1) * (b.x2 - a.x2);
  const double l1 = ((p.x1 - a.x1) * (c.x2 - a.x2) - (c.x1 - a.x1) * (p.x2 - a.x2)) / det;
  const double l2 = ((b.x1 - a.x1) * (p.x2 - a.x2) - (p.x1 - a.x1) * (b.x2 - a.x2)) / det;
  return {1.0 - l1 - l2, l1, l2};
}

int locate_triangle(const TriMesh& mesh, const Point2& p) {
  constexpr double tol = 1e-12;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto lam = barycentric(mesh, t, p);
    if (lam[0] >= -tol && lam[1] >= -tol && lam[2] >= -tol) return t;
  }
  return -1;
}

void write_mesh(const std::filesystem::path& path, const TriMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "trimesh v1 " << mesh.vertices.size() << ' ' << mesh.triangles.size() << ' '
      << mesh.boundary_edges.size() << '\n';
  out.precision(17);
  for (const auto& v : mesh.vertices) out << v.x1 << ' ' << v.x2 << '\n';
  for (const auto& t : mesh.triangles) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (const auto& e : mesh.boundary_edges) out << e[0] << ' ' << e[1] << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

TriMesh read_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string tag, version;
  std::size_t nv = 0, nt = 0, nb = 0;
  in >> tag >> version >> nv >> nt >> nb;
  if (!in || tag != "trimesh" || version != "v1") {
    throw InvalidInput("not a trimesh v1 file: " + path.string());
  }
  TriMesh mesh;
  mesh.vertices.resize(nv);
  mesh.triangles.resize(nt);
  mesh.boundary_edges.resize(nb);
  for (auto& v : mesh.vertices) in >> v.x1 >> v.x2;
  for (auto& t : mesh.triangles) in >> t[0] >> t[1] >> t[2];
  for (auto& e : mesh.boundary_edges) in >> e[0] >> e[1];
  if (!in) throw InvalidInput("truncated mesh file: " + path.string());

  for (const auto& t : mesh.triangles) {
    for (int k : t) {
      if (k < 0 || static_cast<std::size_t>(k) >= nv) throw InvalidInput("triangle index out of range");
    }
  }
  Rect box{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
           std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& v : mesh.vertices) {
    box.xmin = std::min(box.xmin, v.x1);
    box.xmax = std::max(box.xmax, v.x1);
    box.ymin = std::min(box.ymin, v.x2);
    box.ymax = std::max(box.ymax, v.x2);
  }
  mesh.domain = box;
  return mesh;
}

}  // namespace wavespoof
