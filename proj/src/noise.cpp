#include "wavespoof/noise.hpp"

#include <cmath>
#include <numbers>

#include "wavespoof/errors.hpp"
#include "wavespoof/random.hpp"

namespace wavespoof {

namespace {

constexpr std::uint64_t kTimeDomainLane = 0xFFFFFFFFULL;

std::uint64_t stream_tag(std::uint64_t row, std::uint64_t lane) { return (row << 32) | lane; }

void check_spec(const NoiseSpec& spec) {
  if (!(spec.kappa >= 0.0)) throw InvalidInput("noise gain kappa must be non-negative");
}

}  // namespace

Eigen::VectorXd band_rms(const ComplexMatrix& z) {
  if (z.cols() == 0) return Eigen::VectorXd::Zero(z.rows());
  return (z.cwiseAbs2().rowwise().sum() / static_cast<double>(z.cols())).cwiseSqrt();
}

Eigen::VectorXd band_rms(const Signal& signal, const StftPlan& plan) { return band_rms(stft(signal, plan)); }

ComplexMatrix stft_noise(const NoiseSpec& spec, const Eigen::VectorXd& rms, int num_windows) {
  check_spec(spec);
  ComplexMatrix noise = ComplexMatrix::Zero(rms.size(), num_windows);
  if (spec.kappa == 0.0) return noise;
  for (Eigen::Index l = 0; l < rms.size(); ++l) {
    const double sigma = spec.kappa * rms[l];
    for (int m = 0; m < num_windows; ++m) {
      Rng rng(derive_seed(spec.seed, stream_tag(static_cast<std::uint64_t>(l), static_cast<std::uint64_t>(m))));
      const auto [a, b] = rng.normal_pair();
      noise(l, m) = {sigma * a, sigma * b};
    }
  }
  return noise;
}

ComplexMatrix corrupt_stft(const ComplexMatrix& z, const NoiseSpec& spec, const Eigen::VectorXd& rms) {
  if (rms.size() != z.rows()) throw InvalidInput("corrupt_stft: one RMS value per frequency row required");
  if (spec.kappa == 0.0) {
    check_spec(spec);
    return z;
  }
  return z + stft_noise(spec, rms, static_cast<int>(z.cols()));
}

Signal synthesize_band_noise(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const StftPlan& plan,
                             const TimeGrid& grid) {
  if (a.size() != plan.num_freqs() || b.size() != plan.num_freqs()) {
    throw InvalidInput("synthesize_band_noise: one coefficient per frequency row required");
  }
  Signal eta = Signal::Zero(grid.num_samples());
  for (int l = 0; l < plan.num_freqs(); ++l) {
    if (a[l] == 0.0 && b[l] == 0.0) continue;
    const double omega = 2.0 * std::numbers::pi * plan.frequency_hz(l);
    for (int k = 0; k < grid.num_samples(); ++k) {
      const double t = grid.time(k);
      eta[k] += a[l] * std::cos(omega * t) + b[l] * std::sin(omega * t);
    }
  }
  return eta;
}

Signal sample_time_noise(const NoiseSpec& spec, const StftPlan& plan, const TimeGrid& grid,
                         const Eigen::VectorXd& rms) {
  check_spec(spec);
  if (rms.size() != plan.num_freqs()) throw InvalidInput("sample_time_noise: one RMS value per frequency row");
  Eigen::VectorXd a = Eigen::VectorXd::Zero(plan.num_freqs());
  Eigen::VectorXd b = Eigen::VectorXd::Zero(plan.num_freqs());
  if (spec.kappa == 0.0) return Signal::Zero(grid.num_samples());
  for (int l = 0; l < plan.num_freqs(); ++l) {
    Rng rng(derive_seed(spec.seed, stream_tag(static_cast<std::uint64_t>(l), kTimeDomainLane)));
    const auto [x, y] = rng.normal_pair();
    a[l] = spec.kappa * rms[l] * x;
    b[l] = spec.kappa * rms[l] * y;
  }
  return synthesize_band_noise(a, b, plan, grid);
}

}  // namespace wavespoof
