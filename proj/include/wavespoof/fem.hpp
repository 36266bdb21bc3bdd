#pragma once

#include <filesystem>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "wavespoof/mesh.hpp"

namespace wavespoof {

/// Symmetric sparse operator with both triangles stored.
using SparseSymMatrix = Eigen::SparseMatrix<double>;

/// One value per mesh node.
using NodalVector = Eigen::VectorXd;

/// Element matrices for a single triangle (exposed for testing).
Eigen::Matrix3d element_mass(const Point2& a, const Point2& b, const Point2& c);
Eigen::Matrix3d element_stiffness(const Point2& a, const Point2& b, const Point2& c);

/// Consistent P1 mass matrix, entries integral(phi_i phi_j).
SparseSymMatrix assemble_mass(const TriMesh& mesh);

/// P1 stiffness matrix, entries integral(grad phi_i . grad phi_j).
SparseSymMatrix assemble_stiffness(const TriMesh& mesh);

/// Boundary mass matrix over the boundary edges, (length / 6) [[2, 1], [1, 2]] per edge.
SparseSymMatrix assemble_surface_mass(const TriMesh& mesh);

/// delta_eps(x) = eps^2 / (pi^2 (x1^2 + eps^2)(x2^2 + eps^2)).
double mollified_delta_value(double x1, double x2, double epsilon);

/// Nodal interpolant of delta_eps(x - center).
NodalVector mollified_delta(const TriMesh& mesh, const Point2& center, double epsilon);

/// Point-evaluation weights d with d.u = u_h(x_d). Ties on shared edges go to
/// the lowest-index containing triangle.
NodalVector receiver_weights(const TriMesh& mesh, const Point2& x_d);

// `spsym v1 <n> <nnz>` coordinate format, one `i j value` line per stored entry.
void write_matrix(const std::filesystem::path& path, const SparseSymMatrix& matrix);
SparseSymMatrix read_matrix(const std::filesystem::path& path);

}  // namespace wavespoof
