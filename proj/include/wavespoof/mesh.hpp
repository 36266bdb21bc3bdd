#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace wavespoof {

struct Point2 {
  double x1 = 0.0;
  double x2 = 0.0;
};

/// Axis-aligned rectangle [xmin, xmax] x [ymin, ymax], meters.
struct Rect {
  double xmin = 0.0;
  double xmax = 1.0;
  double ymin = 0.0;
  double ymax = 1.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }
  double perimeter() const { return 2.0 * (width() + height()); }
  bool contains(const Point2& p, double tol = 0.0) const {
    return p.x1 >= xmin - tol && p.x1 <= xmax + tol && p.x2 >= ymin - tol && p.x2 <= ymax + tol;
  }
};

/// Conforming P1 triangulation of a rectangle. Triangles are stored
/// counter-clockwise; boundary edges trace the perimeter.
struct TriMesh {
  std::vector<Point2> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<std::array<int, 2>> boundary_edges;
  Rect domain;

  int num_nodes() const { return static_cast<int>(vertices.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }

  double signed_area(int t) const;
  double min_edge_length() const;
  double max_edge_length() const;
};

struct MeshOptions {
  /// Interior vertex perturbation as a fraction of the local cell size.
  /// Clamped to 0.025 so that the longest edge stays below 1.5 * target_h.
  double jitter = 0.0;
  std::uint64_t seed = 0;
};

/// Structured nx-by-ny grid (nx = ceil(width / target_h)) with every cell
/// split along its rising diagonal; optional seeded jitter of interior nodes.
TriMesh build_rect_mesh(const Rect& domain, double target_h, const MeshOptions& options = {});

/// Index of the lowest-numbered triangle containing p, or -1.
int locate_triangle(const TriMesh& mesh, const Point2& p);

/// Barycentric coordinates of p with respect to triangle t.
std::array<double, 3> barycentric(const TriMesh& mesh, int t, const Point2& p);

// `trimesh v1 <nv> <nt> <nb>` text format.
void write_mesh(const std::filesystem::path& path, const TriMesh& mesh);
TriMesh read_mesh(const std::filesystem::path& path);

}  // namespace wavespoof
