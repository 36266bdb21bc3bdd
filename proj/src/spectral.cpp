#include "wavespoof/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>

#include <Eigen/SVD>

#include "wavespoof/binary_io.hpp"
#include "wavespoof/errors.hpp"

namespace wavespoof {

namespace {

constexpr double kDbPerNeper = 20.0 / std::numbers::ln10;  // d(10 log10 |z|^2) = kDbPerNeper * d|z| / |z|

double floor_power(double floor_db) { return std::pow(10.0, floor_db / 10.0); }

}  // namespace

std::vector<double> hann(int window) {
  if (window < 2) throw InvalidInput("hann: window length must be at least 2");
  std::vector<double> w(static_cast<std::size_t>(window));
  for (int k = 0; k < window; ++k) {
    w[static_cast<std::size_t>(k)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * k / (window - 1));
  }
  return w;
}

int stft_window_count(int signal_length, int window, int hop) {
  if (signal_length <= window) return 1;
  return 1 + (signal_length - window + hop - 1) / hop;
}

StftPlan StftPlan::make(int signal_length, int window, int hop, int num_freqs, double dt, double max_bin) {
  if (window < 2) throw InvalidInput("STFT window must be at least 2 samples");
  if (hop < 1 || hop > window) throw InvalidInput("STFT hop must lie in [1, W]");
  if (num_freqs < 1) throw InvalidInput("STFT needs at least one frequency");
  if (signal_length < 1) throw InvalidInput("STFT signal length must be positive");
  if (!(dt > 0.0)) throw InvalidInput("STFT sample interval must be positive");
  if (max_bin < 0.0) max_bin = 0.5 * window;
  if (num_freqs > 1 && !(max_bin > 0.0)) throw InvalidInput("STFT frequencies must be strictly increasing");

  StftPlan plan;
  plan.window = window;
  plan.hop = hop;
  plan.signal_length = signal_length;
  plan.num_windows = stft_window_count(signal_length, window, hop);
  plan.dt = dt;
  plan.omegas.resize(static_cast<std::size_t>(num_freqs));
  for (int l = 0; l < num_freqs; ++l) {
    plan.omegas[static_cast<std::size_t>(l)] = num_freqs == 1 ? 0.0 : max_bin * l / (num_freqs - 1);
  }
  const auto w = hann(window);
  plan.q.resize(num_freqs, window);
  for (int l = 0; l < num_freqs; ++l) {
    for (int k = 0; k < window; ++k) {
      const double phase = -2.0 * std::numbers::pi * k * plan.omegas[static_cast<std::size_t>(l)] / window;
      plan.q(l, k) = w[static_cast<std::size_t>(k)] * std::complex<double>(std::cos(phase), std::sin(phase));
    }
  }
  return plan;
}

namespace {

/// W x M matrix of (zero-padded) signal segments.
Eigen::MatrixXd segments(const Signal& signal, const StftPlan& plan) {
  Eigen::MatrixXd seg = Eigen::MatrixXd::Zero(plan.window, plan.num_windows);
  for (int m = 0; m < plan.num_windows; ++m) {
    const int start = m * plan.hop;
    const int len = std::clamp(plan.signal_length - start, 0, plan.window);
    seg.col(m).head(len) = signal.segment(start, len);
  }
  return seg;
}

}  // namespace

ComplexMatrix stft(const Signal& signal, const StftPlan& plan) {
  if (signal.size() != plan.signal_length) throw InvalidInput("stft: signal length does not match plan");
  return plan.q * segments(signal, plan).cast<std::complex<double>>();
}

ComplexMatrix stft_matrix(const StftPlan& plan) {
  const int L = plan.num_freqs();
  ComplexMatrix f = ComplexMatrix::Zero(static_cast<Eigen::Index>(L) * plan.num_windows, plan.signal_length);
  for (int m = 0; m < plan.num_windows; ++m) {
    const int start = m * plan.hop;
    const int len = std::clamp(plan.signal_length - start, 0, plan.window);
    f.block(static_cast<Eigen::Index>(m) * L, start, L, len) = plan.q.leftCols(len);
  }
  return f;
}

Eigen::MatrixXd db_from_stft(const ComplexMatrix& z, double floor_db) {
  const double floor = floor_power(floor_db);
  return z.cwiseAbs2().cwiseMax(floor).array().log10().matrix() * 10.0;
}

Spectrogram spectrogram_db(const Signal& signal, const StftPlan& plan, double floor_db) {
  return Spectrogram{db_from_stft(stft(signal, plan), floor_db), floor_db};
}

Signal spectrogram_vjp(const ComplexMatrix& z, const StftPlan& plan, const Eigen::MatrixXd& upstream,
                       double floor_db) {
  if (z.rows() != plan.num_freqs() || z.cols() != plan.num_windows || upstream.rows() != z.rows() ||
      upstream.cols() != z.cols()) {
    throw InvalidInput("spectrogram_vjp: shape mismatch");
  }
  const double floor = floor_power(floor_db);
  // d dB / d s_n = kDbPerNeper * Re(conj(z) dz/ds_n) / |z|^2, with dz/ds_n = Q(l, n - mH).
  ComplexMatrix weighted(z.rows(), z.cols());
  for (Eigen::Index m = 0; m < z.cols(); ++m) {
    for (Eigen::Index l = 0; l < z.rows(); ++l) {
      const double power = std::norm(z(l, m));
      weighted(l, m) = power > floor ? std::conj(z(l, m)) * (kDbPerNeper * upstream(l, m) / power) : 0.0;
    }
  }
  const Eigen::MatrixXd per_window = (plan.q.transpose() * weighted).real();  // W x M
  Signal grad = Signal::Zero(plan.signal_length);
  for (int m = 0; m < plan.num_windows; ++m) {
    const int start = m * plan.hop;
    const int len = std::clamp(plan.signal_length - start, 0, plan.window);
    grad.segment(start, len) += per_window.col(m).head(len);
  }
  return grad;
}

Signal spectrogram_vjp(const Signal& signal, const StftPlan& plan, const Eigen::MatrixXd& upstream,
                       double floor_db) {
  return spectrogram_vjp(stft(signal, plan), plan, upstream, floor_db);
}

BandSelector BandSelector::outside(const StftPlan& plan, double min_hz, double max_hz) {
  BandSelector sel;
  for (int l = 0; l < plan.num_freqs(); ++l) {
    const double hz = plan.frequency_hz(l);
    if (hz < min_hz || hz > max_hz) sel.rows.push_back(l);
  }
  return sel;
}

ComplexMatrix constraint_matrix(const StftPlan& plan, const BandSelector& selector) {
  for (int r : selector.rows) {
    if (r < 0 || r >= plan.num_freqs()) throw InvalidInput("band selector row out of range");
  }
  const auto nsel = static_cast<Eigen::Index>(selector.rows.size());
  ComplexMatrix f = ComplexMatrix::Zero(nsel * plan.num_windows, plan.signal_length);
  for (int m = 0; m < plan.num_windows; ++m) {
    const int start = m * plan.hop;
    const int len = std::clamp(plan.signal_length - start, 0, plan.window);
    for (Eigen::Index i = 0; i < nsel; ++i) {
      f.row(m * nsel + i).segment(start, len) = plan.q.row(selector.rows[static_cast<std::size_t>(i)]).head(len);
    }
  }
  return f;
}

NullspaceProjector build_projector(const StftPlan& plan, const BandSelector& selector, double tol) {
  auto rows = selector.rows;
  std::sort(rows.begin(), rows.end());
  if (std::adjacent_find(rows.begin(), rows.end()) != rows.end()) {
    throw InvalidInput("band selector rows must be unique");
  }
  const int n = plan.signal_length;
  NullspaceProjector proj;
  if (rows.empty()) {
    proj.basis = Eigen::MatrixXd::Identity(n, n);
    return proj;
  }
  const ComplexMatrix ft = constraint_matrix(plan, BandSelector{rows});
  Eigen::MatrixXd stacked(2 * ft.rows(), n);
  stacked.topRows(ft.rows()) = ft.real();
  stacked.bottomRows(ft.rows()) = ft.imag();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(stacked, Eigen::ComputeFullV);
  const auto& sigma = svd.singularValues();
  const double cutoff = tol * (sigma.size() > 0 ? sigma[0] : 0.0);
  int rank = 0;
  while (rank < sigma.size() && sigma[rank] > cutoff) ++rank;
  if (rank >= n) throw InvalidInput("frequency constraint admits only the zero signal");
  proj.constraint_rank = rank;
  proj.basis = svd.matrixV().rightCols(n - rank);
  return proj;
}

Signal project(const NullspaceProjector& projector, const Signal& f) {
  if (f.size() != projector.dimension()) throw InvalidInput("project: length mismatch");
  const Eigen::VectorXd coords = projector.basis.transpose() * f;
  return projector.basis * coords;
}

void write_spectrogram_pgm(const std::filesystem::path& path, const Spectrogram& spec) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const auto rows = spec.values.rows();
  const auto cols = spec.values.cols();
  const double lo = spec.floor_db;
  const double hi = std::max(spec.values.maxCoeff(), lo + 1e-12);
  out << "P5\n" << cols << ' ' << rows << "\n255\n";
  for (Eigen::Index r = rows - 1; r >= 0; --r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double t = std::clamp((spec.values(r, c) - lo) / (hi - lo), 0.0, 1.0);
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * t))));
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_spectrogram_csv(const std::filesystem::path& path, const Spectrogram& spec) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "freq_index,window_index,db\n";
  out.precision(17);
  for (Eigen::Index l = 0; l < spec.values.rows(); ++l) {
    for (Eigen::Index m = 0; m < spec.values.cols(); ++m) out << l << ',' << m << ',' << spec.values(l, m) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_projector(const std::filesystem::path& path, const NullspaceProjector& projector) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  io::write_magic(out, "WPRJ1");
  io::write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(projector.basis.rows()));
  io::write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(projector.basis.cols()));
  io::write_doubles(out, projector.basis.data(), static_cast<std::size_t>(projector.basis.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

NullspaceProjector read_projector(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  io::expect_magic(in, "WPRJ1");
  const auto rows = io::read_pod<std::uint64_t>(in);
  const auto cols = io::read_pod<std::uint64_t>(in);
  NullspaceProjector proj;
  proj.basis.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  io::read_doubles(in, proj.basis.data(), static_cast<std::size_t>(proj.basis.size()));
  proj.constraint_rank = static_cast<int>(rows - cols);
  return proj;
}

}  // namespace wavespoof
