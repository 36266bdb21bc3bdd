#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "wavespoof/attack.hpp"
#include "wavespoof/classifier.hpp"
#include "wavespoof/mesh.hpp"
#include "wavespoof/noise.hpp"

namespace wavespoof {

/// Every pipeline setting. The text form is one `key = value` per line with
/// units in the key names; `#` starts a comment.
struct PipelineConfig {
  std::string profile = "desk";

  Rect domain{0.0, 10.0, 0.0, 10.0};
  double mesh_h = 0.25;
  double mesh_jitter = 0.02;

  double c = 500.0;
  Point2 source{0.5, 7.5};
  Point2 interferer{0.975, 6.875};
  Point2 detector{5.25, 1.25};
  double epsilon = 0.5;

  double dt = 1.0 / 6000.0;
  int num_steps = 2000;

  int stft_window = 64;
  int stft_hop = 64;
  int stft_freqs = 65;

  double band_min_hz = 100.0;
  double band_max_hz = 6000.0;
  double floor_db = -200.0;

  double noise_kappa = 0.1;
  NoiseMode noise_mode = NoiseMode::stft_domain;

  double freq_start_hz = 40.0;
  double freq_step_hz = 40.0;
  int freq_count = 20;
  double threshold_hz = 400.0;
  double intruder_amplitude = 1.0;
  int train_per_freq = 10;
  int test_per_freq = 10;
  int val_per_freq = 10;

  double learning_rate = 0.02;
  double momentum = 0.9;
  int batch_size = 16;
  int epochs = 60;
  int patience = 10;
  int channels1 = 8;
  int channels2 = 16;
  double leaky_slope = 0.01;

  int attack_max_iters = 100;
  int attack_check_every = 10;
  int attack_memory = 10;
  AttackMethod attack_method = AttackMethod::reduced_lbfgs;

  int bench_repetitions = 30;

  std::uint64_t seed = 20240521;

  int num_samples() const { return num_steps + 1; }
  std::vector<double> frequencies_hz() const;
  /// Malicious (1) iff the source frequency is at or below the threshold.
  int label_for(double frequency_hz) const { return frequency_hz <= threshold_hz ? 1 : 0; }

  TrainConfig train_config() const;
  AttackConfig attack_config() const;
};

PipelineConfig desk_profile();

/// 100 m x 100 m water column with the full-length time grid. Slow.
PipelineConfig paper_profile();

/// Named profile (`desk` or `paper`); throws ConfigError otherwise.
PipelineConfig profile_defaults(const std::string& name);

/// Parses `key = value` lines. Throws ConfigError with the line number on
/// malformed lines or duplicate keys.
std::map<std::string, std::string> parse_config_text(const std::string& text);

/// Applies parsed overrides; unknown keys and bad values throw ConfigError.
void apply_overrides(PipelineConfig& config, const std::map<std::string, std::string>& values);

/// Cross-field checks; throws ConfigError.
void validate(const PipelineConfig& config);

/// Profile defaults, then the optional file, then an optional seed override.
PipelineConfig load_config(const std::string& profile, const std::filesystem::path& config_path,
                           const std::uint64_t* seed_override);

/// All keys with their values, sorted by key.
std::map<std::string, std::string> to_key_values(const PipelineConfig& config);
std::string to_text(const PipelineConfig& config);

enum class Stage { mesh, precompute, gendata, train, attack, evaluate, bench };

std::string stage_name(Stage stage);

/// Keys that influence the artifacts of `stage` (its own and all upstream keys).
std::vector<std::string> stage_keys(Stage stage);

/// 64-bit FNV-1a over the sorted `key=value` lines of stage_keys(stage), as 16 hex digits.
std::string stage_hash(const PipelineConfig& config, Stage stage);

std::uint64_t fnv1a64(const std::string& text);

}  // namespace wavespoof
