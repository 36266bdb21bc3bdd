#pragma once

#include <complex>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "wavespoof/wave_sim.hpp"

namespace wavespoof {

using ComplexMatrix = Eigen::MatrixXcd;

/// Von Hann window w(k) = 1/2 - 1/2 cos(2 pi k / (W - 1)).
std::vector<double> hann(int window);

/// Windowed transform with L frequencies over M windows of length W with hop H.
/// Frequencies are in bin units: row l uses exp(-i 2 pi k omega_l / W).
/// The signal is zero-padded so the last window is complete.
struct StftPlan {
  int window = 0;         // W
  int hop = 0;            // H
  int signal_length = 0;  // K + 1
  int num_windows = 0;    // M
  double dt = 0.0;
  std::vector<double> omegas;  // L values
  ComplexMatrix q;             // L x W block: w(k) exp(-i 2 pi k omega_l / W)

  /// L uniformly spaced bins from 0 to `max_bin` (default W / 2, the Nyquist bin).
  static StftPlan make(int signal_length, int window, int hop, int num_freqs, double dt, double max_bin = -1.0);

  int num_freqs() const { return static_cast<int>(omegas.size()); }
  double sample_rate() const { return 1.0 / dt; }
  double frequency_hz(int l) const { return omegas[static_cast<std::size_t>(l)] / (window * dt); }
};

/// Windows needed to cover `signal_length` samples: 1 + ceil((N - W) / H), at least 1.
int stft_window_count(int signal_length, int window, int hop);

/// L x M complex transform (pre-modulus).
ComplexMatrix stft(const Signal& signal, const StftPlan& plan);

/// Dense LM x N matrix F, one Q block per window at rows [mL, (m+1)L) and
/// columns [mH, mH + W) (clipped at N); stacking the STFT columns gives F s.
ComplexMatrix stft_matrix(const StftPlan& plan);

inline constexpr double kDefaultFloorDb = -120.0;

struct Spectrogram {
  Eigen::MatrixXd values;  // L x M, dB
  double floor_db = kDefaultFloorDb;
};

/// 10 log10(max(|z|^2, 10^(floor_db / 10))) elementwise.
Eigen::MatrixXd db_from_stft(const ComplexMatrix& z, double floor_db);
Spectrogram spectrogram_db(const Signal& signal, const StftPlan& plan, double floor_db = kDefaultFloorDb);

/// Gradient of sum(upstream .* dB(z)) with respect to the signal, where z is
/// the STFT of the signal plus any additive term independent of it. Entries
/// at the floor contribute nothing.
Signal spectrogram_vjp(const ComplexMatrix& z, const StftPlan& plan, const Eigen::MatrixXd& upstream,
                       double floor_db);
Signal spectrogram_vjp(const Signal& signal, const StftPlan& plan, const Eigen::MatrixXd& upstream,
                       double floor_db = kDefaultFloorDb);

/// Disallowed frequency rows.
struct BandSelector {
  std::vector<int> rows;

  /// Rows whose physical frequency lies below `min_hz` or above `max_hz`.
  static BandSelector outside(const StftPlan& plan, double min_hz, double max_hz);
};

/// The selected rows of F for every window (the constraint matrix F~).
ComplexMatrix constraint_matrix(const StftPlan& plan, const BandSelector& selector);

/// Orthonormal basis of the null space of F~ and the projector N N^T.
struct NullspaceProjector {
  Eigen::MatrixXd basis;  // N x r
  int constraint_rank = 0;

  int dimension() const { return static_cast<int>(basis.rows()); }
  int rank() const { return static_cast<int>(basis.cols()); }
};

inline constexpr double kDefaultSvdTolerance = 1e-10;

/// SVD of [Re F~; Im F~]; right singular vectors whose singular value falls
/// below tol * sigma_max span the null space. Throws if the null space is empty.
NullspaceProjector build_projector(const StftPlan& plan, const BandSelector& selector,
                                   double tol = kDefaultSvdTolerance);

/// N (N^T f).
Signal project(const NullspaceProjector& projector, const Signal& f);

// 8-bit P5 image, rows ordered with the highest frequency on top, dB values
// mapped linearly from [floor_db, max_db] onto [0, 255].
void write_spectrogram_pgm(const std::filesystem::path& path, const Spectrogram& spec);
// `freq_index,window_index,db`.
void write_spectrogram_csv(const std::filesystem::path& path, const Spectrogram& spec);

// WPRJ1: magic, u64 rows, u64 cols, column-major f64 basis.
void write_projector(const std::filesystem::path& path, const NullspaceProjector& projector);
NullspaceProjector read_projector(const std::filesystem::path& path);

}  // namespace wavespoof
