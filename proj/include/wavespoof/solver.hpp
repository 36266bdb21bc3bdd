#pragma once

#include <atomic>
#include <cstdint>
#include <memory>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "wavespoof/fem.hpp"

namespace wavespoof {

/// Process-wide counters for sparse factorizations and triangular solves.
/// Used to verify that precomputed paths perform no PDE solves.
struct SolveCounters {
  std::uint64_t factorizations = 0;
  std::uint64_t solves = 0;
};

SolveCounters solve_counters();
void reset_solve_counters();

/// Sparse Cholesky (LDL^T) of a symmetric positive definite matrix, computed
/// once and reused for every solve.
class SpdFactorization {
 public:
  SpdFactorization() = default;
  explicit SpdFactorization(const SparseSymMatrix& matrix);

  /// One forward/back substitution pair. Throws NumericError on failure.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

  Eigen::Index size() const { return size_; }

 private:
  std::shared_ptr<const Eigen::SimplicialLDLT<SparseSymMatrix>> ldlt_;
  Eigen::Index size_ = 0;
};

}  // namespace wavespoof
