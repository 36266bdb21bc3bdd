#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wavespoof/attack.hpp"
#include "wavespoof/config.hpp"
#include "wavespoof/green.hpp"
#include "wavespoof/spectral.hpp"

namespace wavespoof {

// Root-seed derivation tags, one per consuming stage.
inline constexpr std::uint64_t kMeshSeedTag = 1;
inline constexpr std::uint64_t kGendataSeedTag = 3;
inline constexpr std::uint64_t kTrainSeedTag = 4;
inline constexpr std::uint64_t kBenchSeedTag = 7;

TimeGrid grid_for(const PipelineConfig& config);
StftPlan plan_for(const PipelineConfig& config);
SimConfig sim_config_for(const PipelineConfig& config);
BandSelector band_for(const PipelineConfig& config, const StftPlan& plan);

/// g(t_k) = amplitude * sin(2 pi freq t_k).
Signal intruder_signal(const PipelineConfig& config, double frequency_hz);

enum class Split { train = 0, test = 1, validation = 2 };
std::string split_name(Split split);

struct ExampleRecord {
  std::string id;
  double frequency_hz = 0.0;
  int label = 0;
  std::uint64_t seed = 0;
  std::string path;  // relative to the data directory
  Split split = Split::train;
};

/// Every example of every split, in generation order. Seeds differ across
/// splits, frequencies and repetitions.
std::vector<ExampleRecord> plan_examples(const PipelineConfig& config);

/// The additive STFT-domain noise term of one observation of the clean trace.
ComplexMatrix observation_noise(const PipelineConfig& config, const StftPlan& plan, const Signal& clean,
                                std::uint64_t seed);

/// dB spectrogram of the clean trace plus its noise realization.
Eigen::MatrixXd observe(const PipelineConfig& config, const StftPlan& plan, const Signal& clean, std::uint64_t seed);

// WSPG1: magic, u32 L, u32 M, f64 floor_db, column-major f64 dB values.
void write_spectrogram_bin(const std::filesystem::path& path, const Spectrogram& spec);
Spectrogram read_spectrogram_bin(const std::filesystem::path& path);

// Dataset manifest CSV `id,frequency_hz,label,seed,path`.
void write_manifest_csv(const std::filesystem::path& path, const std::vector<ExampleRecord>& records);
std::vector<ExampleRecord> read_manifest_csv(const std::filesystem::path& path);

/// Records a finished stage with its config hash in <out>/manifest.json.
void record_stage(const std::filesystem::path& out, const PipelineConfig& config, Stage stage,
                  const std::vector<std::string>& files);

/// Throws MissingArtifact if the stage never ran in `out`, or if it ran under
/// a configuration whose stage hash differs from this one.
void require_stage(const std::filesystem::path& out, const PipelineConfig& config, Stage stage);

/// Throws MissingArtifact naming the file if it does not exist.
void require_file(const std::filesystem::path& path);

struct MeshSummary {
  int nodes = 0;
  int triangles = 0;
  double h_min = 0.0;
  double h_max = 0.0;
};

struct PrecomputeSummary {
  std::uint64_t factorizations = 0;
  std::uint64_t solves = 0;
  int projector_rank = 0;
  int constraint_rank = 0;
};

struct GendataSummary {
  int train = 0;
  int test = 0;
  int validation = 0;
};

struct TrainSummary {
  int best_epoch = 0;
  int epochs_run = 0;
  double test_accuracy = 0.0;
  double validation_accuracy = 0.0;
  double seconds = 0.0;
};

struct AttackRow {
  std::string id;
  double frequency_hz = 0.0;
  int label = 0;
  double clean_confidence = 0.0;
  double adversarial_confidence = 0.0;
  int iterations = 0;
  bool success = false;
  double amplitude_ratio = 0.0;
};

struct AttackSummary {
  std::vector<AttackRow> rows;
  std::uint64_t solves_during_attack = 0;
  double seconds = 0.0;
};

struct EvaluateSummary {
  int validation_size = 0;
  double accuracy_without = 0.0;
  double accuracy_with = 0.0;
  int correctly_classified = 0;
  int flipped = 0;  // among the correctly classified
  double median_amplitude_ratio = 0.0;
  std::optional<AttackRow> showcase;
};

struct BenchRow {
  std::string name;
  double mean_seconds = 0.0;
  double std_over_mean = 0.0;
  double solves_per_call = 0.0;
};

struct BenchSummary {
  int repetitions = 0;
  BenchRow objective_naive;
  BenchRow objective_shortcut;
  BenchRow gradient_adjoint;
  BenchRow gradient_shortcut;
  double objective_speedup() const { return objective_naive.mean_seconds / objective_shortcut.mean_seconds; }
  double gradient_speedup() const { return gradient_adjoint.mean_seconds / gradient_shortcut.mean_seconds; }
};

MeshSummary cmd_mesh(const PipelineConfig& config, const std::filesystem::path& out, std::ostream& log);
PrecomputeSummary cmd_precompute(const PipelineConfig& config, const std::filesystem::path& out, std::ostream& log);
GendataSummary cmd_gendata(const PipelineConfig& config, const std::filesystem::path& out, std::ostream& log);
TrainSummary cmd_train(const PipelineConfig& config, const std::filesystem::path& out, std::ostream& log);
AttackSummary cmd_attack(const PipelineConfig& config, const std::filesystem::path& out, std::ostream& log);
EvaluateSummary cmd_evaluate(const PipelineConfig& config, const std::filesystem::path& out, std::ostream& log);
BenchSummary cmd_bench(const PipelineConfig& config, const std::filesystem::path& out, std::ostream& log);

// Attack report CSV `example_id,freq_hz,label,clean_conf,adv_conf,iters,success,amp_ratio`.
void write_attack_report(const std::filesystem::path& path, const std::vector<AttackRow>& rows);
std::vector<AttackRow> read_attack_report(const std::filesystem::path& path);

/// Accuracy with and without interferer, flip rate and showcase selection from report rows.
EvaluateSummary summarize_attacks(const std::vector<AttackRow>& rows);

}  // namespace wavespoof
