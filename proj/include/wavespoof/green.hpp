#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "wavespoof/wave_sim.hpp"

namespace wavespoof {

/// Last block column of the adjoint solution: blocks[m - 1] holds y_m for
/// m = 1..K-1, where A+ y_1 = d, A+ y_2 = -A0 y_1 and
/// A+ y_m = -A0 y_{m-1} - A- y_{m-2}. Every other block column of the
/// adjoint solution is a shifted copy of this one.
struct AdjointColumn {
  std::vector<NodalVector> blocks;
};

/// K - 1 solves against the single factorization of A+ held by `ops`.
AdjointColumn precompute_adjoint_column(const StepOperators& ops, const NodalVector& detector,
                                        const TimeGrid& grid);

enum class GreenMode : std::uint8_t { kernel = 0, dense = 1 };

/// Causal linear map from one emitter's signal to the detector trace.
///
/// Kernel mode (fixed emitter): s_k = sum_{j=2}^{k-1} h_{k-j} x_j with
/// h_m = dt^2 y_m . (M delta); `kernel[m - 1]` stores h_m.
/// Dense mode (moving emitter): s = G x with G(k, j) = dt^2 y_{k-j} . (M delta^j)
/// for 2 <= j < k and zero elsewhere.
struct GreenOperator {
  GreenMode mode = GreenMode::kernel;
  Eigen::VectorXd kernel;
  Eigen::MatrixXd dense;
  double dt = 0.0;
  int num_steps = 0;  // K

  int num_samples() const { return num_steps + 1; }
};

GreenOperator build_green(const AdjointColumn& adjoint, const PointSource& source, const TimeGrid& grid);

/// s = G x. Output samples 0..2 are exactly zero.
Signal apply_green(const GreenOperator& green, const Signal& signal);

/// G^T r, the pull-back of a detector-side sensitivity onto the emitter signal.
Signal apply_green_transpose(const GreenOperator& green, const Signal& sensitivity);

/// Materialized (K+1) x (K+1) matrix ds/dx.
Eigen::MatrixXd jacobian_green(const GreenOperator& green);

// WGRN1: magic, u8 mode, f64 dt, u64 K, then K - 1 kernel samples or
// (K+1)^2 row-major dense entries, all little-endian.
void write_green(const std::filesystem::path& path, const GreenOperator& green);
GreenOperator read_green(const std::filesystem::path& path);

}  // namespace wavespoof
