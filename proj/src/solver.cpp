#include "wavespoof/solver.hpp"

#include "wavespoof/errors.hpp"

namespace wavespoof {

namespace {

std::atomic<std::uint64_t> g_factorizations{0};
std::atomic<std::uint64_t> g_solves{0};

}  // namespace

SolveCounters solve_counters() {
  return {g_factorizations.load(std::memory_order_relaxed), g_solves.load(std::memory_order_relaxed)};
}

void reset_solve_counters() {
  g_factorizations.store(0, std::memory_order_relaxed);
  g_solves.store(0, std::memory_order_relaxed);
}

SpdFactorization::SpdFactorization(const SparseSymMatrix& matrix) : size_(matrix.rows()) {
  auto ldlt = std::make_shared<Eigen::SimplicialLDLT<SparseSymMatrix>>(matrix);
  if (ldlt->info() != Eigen::Success) throw NumericError("sparse LDL^T factorization failed");
  if (ldlt->vectorD().minCoeff() <= 0.0) throw NumericError("matrix is not positive definite");
  ldlt_ = std::move(ldlt);
  g_factorizations.fetch_add(1, std::memory_order_relaxed);
}

Eigen::VectorXd SpdFactorization::solve(const Eigen::VectorXd& rhs) const {
  if (!ldlt_ || rhs.size() != size_) throw InvalidInput("SpdFactorization::solve: size mismatch");
  Eigen::VectorXd x = ldlt_->solve(rhs);
  if (ldlt_->info() != Eigen::Success) throw NumericError("sparse triangular solve failed");
  g_solves.fetch_add(1, std::memory_order_relaxed);
  return x;
}

}  // namespace wavespoof
