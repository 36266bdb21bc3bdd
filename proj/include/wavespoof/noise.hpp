#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "wavespoof/spectral.hpp"

namespace wavespoof {

enum class NoiseMode { stft_domain, time_domain };

/// Per-band Gaussian noise with sigma_l = kappa * band_rms_l.
///
/// Stream splitting: the STFT-domain entry (l, m) draws its pair (A, B) from
/// Rng(derive_seed(seed, (l << 32) | m)); the time-domain coefficients of band
/// l come from Rng(derive_seed(seed, (l << 32) | 0xFFFFFFFF)). Each stream
/// yields one Box-Muller pair, so results do not depend on evaluation order.
struct NoiseSpec {
  double kappa = 0.1;
  std::uint64_t seed = 0;
  NoiseMode mode = NoiseMode::stft_domain;
};

/// sqrt(mean over windows of |z(l, m)|^2), one value per frequency row.
Eigen::VectorXd band_rms(const ComplexMatrix& z);
Eigen::VectorXd band_rms(const Signal& signal, const StftPlan& plan);

/// The additive term alone: entry (l, m) is A + B i with A, B ~ N(0, sigma_l^2).
ComplexMatrix stft_noise(const NoiseSpec& spec, const Eigen::VectorXd& band_rms, int num_windows);

/// z + stft_noise(...).
ComplexMatrix corrupt_stft(const ComplexMatrix& z, const NoiseSpec& spec, const Eigen::VectorXd& band_rms);

/// eta(t_k) = sum_l A_l cos(omega_l t_k) + B_l sin(omega_l t_k), omega_l in rad/s.
Signal synthesize_band_noise(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const StftPlan& plan,
                             const TimeGrid& grid);

/// Time-domain realization with A_l, B_l ~ N(0, sigma_l^2).
Signal sample_time_noise(const NoiseSpec& spec, const StftPlan& plan, const TimeGrid& grid,
                         const Eigen::VectorXd& band_rms);

}  // namespace wavespoof
