#include "wavespoof/green.hpp"

#include <fstream>

#include "wavespoof/binary_io.hpp"
#include "wavespoof/errors.hpp"

namespace wavespoof {

AdjointColumn precompute_adjoint_column(const StepOperators& ops, const NodalVector& detector,
                                        const TimeGrid& grid) {
  if (detector.size() != ops.a_plus.rows()) {
    throw InvalidInput("precompute_adjoint_column: detector length does not match mesh");
  }
  const int count = grid.num_steps - 1;
  AdjointColumn adj;
  adj.blocks.reserve(static_cast<std::size_t>(count));
  // The blocks are symmetric, so the transposed recursion uses them as is.
  Eigen::VectorXd rhs(detector.size());
  for (int m = 1; m <= count; ++m) {
    if (m == 1) {
      rhs = detector;
    } else {
      rhs.noalias() = -(ops.a_zero * adj.blocks[static_cast<std::size_t>(m - 2)]);
      if (m >= 3) rhs.noalias() -= ops.a_minus * adj.blocks[static_cast<std::size_t>(m - 3)];
    }
    adj.blocks.push_back(ops.a_plus_solver.solve(rhs));
  }
  return adj;
}

GreenOperator build_green(const AdjointColumn& adjoint, const PointSource& source, const TimeGrid& grid) {
  const int K = grid.num_steps;
  if (static_cast<int>(adjoint.blocks.size()) != K - 1) {
    throw InvalidInput("build_green: adjoint column length must be K - 1");
  }
  if (!source.is_static() && static_cast<int>(source.deltas.size()) != grid.num_samples()) {
    throw InvalidInput("build_green: moving source needs K + 1 delta vectors");
  }
  const Eigen::Index n = adjoint.blocks.empty() ? 0 : adjoint.blocks.front().size();
  if (source.weighted.front().size() != n) throw InvalidInput("build_green: source length does not match mesh");

  const double dt2 = grid.dt * grid.dt;
  GreenOperator g;
  g.dt = grid.dt;
  g.num_steps = K;
  if (source.is_static()) {
    g.mode = GreenMode::kernel;
    g.kernel.resize(K - 1);
    const NodalVector& md = source.weighted.front();
    for (int m = 1; m <= K - 1; ++m) g.kernel[m - 1] = dt2 * adjoint.blocks[static_cast<std::size_t>(m - 1)].dot(md);
  } else {
    g.mode = GreenMode::dense;
    g.dense = Eigen::MatrixXd::Zero(K + 1, K + 1);
    for (int j = kFirstForcedStep; j < K; ++j) {
      const NodalVector& md = source.weighted_at(j);
      for (int k = j + 1; k <= K; ++k) {
        g.dense(k, j) = dt2 * adjoint.blocks[static_cast<std::size_t>(k - j - 1)].dot(md);
      }
    }
  }
  return g;
}

Signal apply_green(const GreenOperator& green, const Signal& signal) {
  const int K = green.num_steps;
  if (signal.size() != K + 1) throw InvalidInput("apply_green: signal length must be K + 1");
  if (green.mode == GreenMode::dense) {
    Signal out = green.dense * signal;
    out.head(3).setZero();
    return out;
  }
  // s_k = sum_{j=2}^{k-1} h_{k-j} x_j, evaluated as a dot product against the
  // reversed kernel so both operands are contiguous.
  const Eigen::VectorXd reversed = green.kernel.reverse();
  Signal out = Signal::Zero(K + 1);
  for (int k = kFirstForcedStep + 1; k <= K; ++k) {
    const int len = k - kFirstForcedStep;
    out[k] = signal.segment(kFirstForcedStep, len).dot(reversed.segment(K + 1 - k, len));
  }
  return out;
}

Signal apply_green_transpose(const GreenOperator& green, const Signal& sensitivity) {
  const int K = green.num_steps;
  if (sensitivity.size() != K + 1) throw InvalidInput("apply_green_transpose: length must be K + 1");
  if (green.mode == GreenMode::dense) return green.dense.transpose() * sensitivity;
  Signal out = Signal::Zero(K + 1);
  for (int j = kFirstForcedStep; j < K; ++j) {
    const int len = K - j;
    out[j] = green.kernel.head(len).dot(sensitivity.segment(j + 1, len));
  }
  return out;
}

Eigen::MatrixXd jacobian_green(const GreenOperator& green) {
  if (green.mode == GreenMode::dense) return green.dense;
  const int K = green.num_steps;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(K + 1, K + 1);
  for (int j = kFirstForcedStep; j < K; ++j) {
    for (int k = j + 1; k <= K; ++k) jac(k, j) = green.kernel[k - j - 1];
  }
  return jac;
}

void write_green(const std::filesystem::path& path, const GreenOperator& green) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  io::write_magic(out, "WGRN1");
  io::write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(green.mode));
  io::write_pod<double>(out, green.dt);
  io::write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(green.num_steps));
  if (green.mode == GreenMode::kernel) {
    io::write_doubles(out, green.kernel.data(), static_cast<std::size_t>(green.kernel.size()));
  } else {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = green.dense;
    io::write_doubles(out, rows.data(), static_cast<std::size_t>(rows.size()));
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

GreenOperator read_green(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  io::expect_magic(in, "WGRN1");
  GreenOperator g;
  const auto mode = io::read_pod<std::uint8_t>(in);
  if (mode > 1) throw InvalidInput("WGRN1: unknown mode byte");
  g.mode = static_cast<GreenMode>(mode);
  g.dt = io::read_pod<double>(in);
  g.num_steps = static_cast<int>(io::read_pod<std::uint64_t>(in));
  if (g.num_steps < 2) throw InvalidInput("WGRN1: K must be at least 2");
  if (g.mode == GreenMode::kernel) {
    g.kernel.resize(g.num_steps - 1);
    io::read_doubles(in, g.kernel.data(), static_cast<std::size_t>(g.kernel.size()));
  } else {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(g.num_steps + 1, g.num_steps + 1);
    io::read_doubles(in, rows.data(), static_cast<std::size_t>(rows.size()));
    g.dense = rows;
  }
  if (in.peek() != std::char_traits<char>::eof()) throw InvalidInput("WGRN1: trailing bytes");
  return g;
}

}  // namespace wavespoof
