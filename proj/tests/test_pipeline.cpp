#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "wavespoof/config.hpp"
#include "wavespoof/errors.hpp"
#include "wavespoof/pipeline.hpp"
#include "wavespoof/solver.hpp"

using namespace wavespoof;
namespace fs = std::filesystem;

namespace {

// A 2 m square and 1 kHz sampling: the whole chain runs in seconds.
PipelineConfig tiny_config() {
  PipelineConfig c = desk_profile();
  c.domain = Rect{0.0, 2.0, 0.0, 2.0};
  c.mesh_h = 0.2;
  c.c = 50.0;
  c.source = Point2{0.2, 1.5};
  c.interferer = Point2{0.3, 1.3};
  c.detector = Point2{1.3, 0.3};
  c.epsilon = 0.3;
  c.dt = 1e-3;
  c.num_steps = 256;
  c.stft_window = 32;
  c.stft_hop = 32;
  c.stft_freqs = 17;
  c.band_min_hz = 60.0;
  c.band_max_hz = 1000.0;
  c.freq_start_hz = 50.0;
  c.freq_step_hz = 50.0;
  c.freq_count = 8;
  c.threshold_hz = 200.0;
  c.train_per_freq = 3;
  c.test_per_freq = 2;
  c.val_per_freq = 2;
  c.epochs = 4;
  c.channels1 = 2;
  c.channels2 = 2;
  c.attack_max_iters = 10;
  c.attack_check_every = 5;
  c.bench_repetitions = 2;
  c.seed = 7;
  return c;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config text parsing") {
  const auto v = parse_config_text("# comment\nnum_steps = 12\n\n  dt_s=0.5   # trailing\n");
  CHECK(v.size() == 2);
  CHECK(v.at("num_steps") == "12");
  CHECK(v.at("dt_s") == "0.5");
  CHECK_THROWS_AS(parse_config_text("num_steps = 1\nnum_steps = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("no equals sign\n"), ConfigError);

  PipelineConfig c = desk_profile();
  apply_overrides(c, {{"num_steps", "300"}, {"noise_mode", "time_domain"}});
  CHECK(c.num_steps == 300);
  CHECK(c.noise_mode == NoiseMode::time_domain);
  CHECK_THROWS_AS(apply_overrides(c, {{"no_such_key", "1"}}), ConfigError);
  CHECK_THROWS_AS(apply_overrides(c, {{"num_steps", "many"}}), ConfigError);
  CHECK_THROWS_AS(apply_overrides(c, {{"attack_method", "newton"}}), ConfigError);
}

TEST_CASE("validation rejects inconsistent settings") {
  CHECK_NOTHROW(validate(desk_profile()));
  CHECK_NOTHROW(validate(paper_profile()));
  CHECK_THROWS_AS(profile_defaults("laptop"), ConfigError);
  auto broken = [](auto edit) {
    PipelineConfig c = desk_profile();
    edit(c);
    return c;
  };
  CHECK_THROWS_AS(validate(broken([](auto& c) { c.domain = Rect{0, 0, 0, 1}; })), ConfigError);
  CHECK_THROWS_AS(validate(broken([](auto& c) { c.detector = Point2{20, 1}; })), ConfigError);
  CHECK_THROWS_AS(validate(broken([](auto& c) { c.threshold_hz = 10000; })), ConfigError);
  CHECK_THROWS_AS(validate(broken([](auto& c) { c.attack_check_every = 200; })), ConfigError);
  CHECK_THROWS_AS(validate(broken([](auto& c) { c.band_min_hz = 5000; })), ConfigError);
  CHECK_THROWS_AS(validate(broken([](auto& c) { c.stft_window = 1; })), ConfigError);
}

TEST_CASE("config text round trip and profile defaults") {
  const PipelineConfig c = paper_profile();
  PipelineConfig back = profile_defaults("desk");
  auto values = parse_config_text(to_text(c));
  values.erase("profile");
  apply_overrides(back, values);
  CHECK(to_key_values(back) == [&] {
    auto kv = to_key_values(c);
    kv["profile"] = "desk";
    return kv;
  }());
  CHECK(c.num_steps == 6000);
  CHECK(c.frequencies_hz().size() == 80);
  CHECK(stft_window_count(c.num_samples(), c.stft_window, c.stft_hop) == 94);
  CHECK(desk_profile().frequencies_hz().front() == 40.0);
}

TEST_CASE("label rule: malicious iff at or below the threshold") {
  const PipelineConfig c = desk_profile();
  CHECK(c.label_for(400.0) == 1);
  CHECK(c.label_for(399.0) == 1);
  CHECK(c.label_for(440.0) == 0);
  const auto freqs = c.frequencies_hz();
  const auto malicious = std::count_if(freqs.begin(), freqs.end(), [&](double f) { return c.label_for(f) == 1; });
  CHECK(malicious * 2 == static_cast<long>(freqs.size()));
}

TEST_CASE("stage hashes") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  const PipelineConfig c = desk_profile();
  CHECK(stage_hash(c, Stage::mesh).size() == 16);
  CHECK(stage_hash(c, Stage::train) == stage_hash(c, Stage::train));

  PipelineConfig lr = c;
  lr.learning_rate = 0.05;
  CHECK(stage_hash(lr, Stage::mesh) == stage_hash(c, Stage::mesh));
  CHECK(stage_hash(lr, Stage::precompute) == stage_hash(c, Stage::precompute));
  CHECK(stage_hash(lr, Stage::train) != stage_hash(c, Stage::train));

  PipelineConfig h = c;
  h.mesh_h = 0.3;
  for (Stage s : {Stage::mesh, Stage::precompute, Stage::gendata, Stage::train, Stage::attack}) {
    CHECK(stage_hash(h, s) != stage_hash(c, s));
  }
  // Every stage includes everything upstream of it.
  const auto mesh_keys = stage_keys(Stage::mesh);
  const auto attack_keys = stage_keys(Stage::attack);
  for (const auto& k : mesh_keys) CHECK(std::find(attack_keys.begin(), attack_keys.end(), k) != attack_keys.end());
}

TEST_CASE("example plan: balanced, labelled, distinct seeds") {
  const PipelineConfig c = desk_profile();
  const auto records = plan_examples(c);
  CHECK(records.size() == 600);
  std::set<std::uint64_t> seeds;
  std::set<std::string> ids;
  int train_pos = 0, train_neg = 0;
  for (const auto& r : records) {
    seeds.insert(r.seed);
    ids.insert(r.id);
    CHECK(r.label == c.label_for(r.frequency_hz));
    if (r.split == Split::train) (r.label ? train_pos : train_neg)++;
  }
  CHECK(seeds.size() == records.size());
  CHECK(ids.size() == records.size());
  CHECK(train_pos == train_neg);
  CHECK(plan_examples(c).front().seed == records.front().seed);
  PipelineConfig other = c;
  other.seed += 1;
  CHECK(plan_examples(other).front().seed != records.front().seed);
}

TEST_CASE("observation noise is reproducible") {
  const PipelineConfig c = tiny_config();
  const StftPlan plan = plan_for(c);
  const Signal clean = intruder_signal(c, 100.0) * 1e-3;
  CHECK(observe(c, plan, clean, 5) == observe(c, plan, clean, 5));
  CHECK(observe(c, plan, clean, 5) != observe(c, plan, clean, 6));
  PipelineConfig quiet = c;
  quiet.noise_kappa = 0.0;
  CHECK(observe(quiet, plan, clean, 5) == spectrogram_db(clean, plan, c.floor_db).values);
}

TEST_CASE("artifact files round trip") {
  const fs::path dir = fresh_dir("wavespoof_artifacts");
  fs::create_directories(dir);
  const StftPlan plan = StftPlan::make(200, 32, 32, 17, 1e-3);
  const Spectrogram spec = spectrogram_db(Signal::LinSpaced(200, -1.0, 1.0), plan, -150.0);
  write_spectrogram_bin(dir / "s.wspg", spec);
  const Spectrogram back = read_spectrogram_bin(dir / "s.wspg");
  CHECK(back.values == spec.values);
  CHECK(back.floor_db == -150.0);

  const auto records = plan_examples(tiny_config());
  write_manifest_csv(dir / "manifest.csv", records);
  const auto again = read_manifest_csv(dir / "manifest.csv");
  REQUIRE(again.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(again[i].id == records[i].id);
    CHECK(again[i].seed == records[i].seed);
    CHECK(again[i].label == records[i].label);
    CHECK(again[i].frequency_hz == records[i].frequency_hz);
    CHECK(again[i].split == records[i].split);
  }
  CHECK(slurp(dir / "manifest.csv").rfind("id,frequency_hz,label,seed,path\n", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("stage bookkeeping detects missing and stale artifacts") {
  const fs::path out = fresh_dir("wavespoof_stages");
  const PipelineConfig c = tiny_config();
  std::ostringstream log;
  CHECK_THROWS_AS(require_stage(out, c, Stage::mesh), MissingArtifact);
  CHECK_THROWS_AS(cmd_precompute(c, out, log), MissingArtifact);
  CHECK_THROWS_AS(require_file(out / "nothing.bin"), MissingArtifact);

  cmd_mesh(c, out, log);
  CHECK_NOTHROW(require_stage(out, c, Stage::mesh));
  PipelineConfig changed = c;
  changed.mesh_h = 0.25;
  CHECK_THROWS_AS(require_stage(out, changed, Stage::mesh), MissingArtifact);
  // Keys downstream of the mesh do not invalidate it.
  PipelineConfig later = c;
  later.epochs = 9;
  CHECK_NOTHROW(require_stage(out, later, Stage::mesh));
  fs::remove_all(out);
}

TEST_CASE("tiny end-to-end run") {
  const fs::path out = fresh_dir("wavespoof_tiny");
  const PipelineConfig c = tiny_config();
  std::ostringstream log;
  const MeshSummary mesh = cmd_mesh(c, out, log);
  CHECK(mesh.nodes == 121);

  reset_solve_counters();
  const PrecomputeSummary pre = cmd_precompute(c, out, log);
  CHECK(pre.factorizations == 1);
  CHECK(pre.solves == static_cast<std::uint64_t>(c.num_steps - 1));
  CHECK(pre.projector_rank + pre.constraint_rank == c.num_samples());

  const GendataSummary data = cmd_gendata(c, out, log);
  CHECK(data.train == 24);
  CHECK(data.test == 16);
  CHECK(data.validation == 16);

  const TrainSummary tr = cmd_train(c, out, log);
  CHECK(tr.epochs_run >= 1);
  CHECK(fs::exists(out / "model" / "model.wnet"));
  CHECK(fs::exists(out / "model" / "training_log.csv"));

  const AttackSummary at = cmd_attack(c, out, log);
  CHECK(at.rows.size() == 16);
  CHECK(at.solves_during_attack == 0);
  const auto report = read_attack_report(out / "attack" / "report.csv");
  CHECK(report.size() == 16);
  CHECK(slurp(out / "attack" / "report.csv").rfind("example_id,freq_hz,label,clean_conf,adv_conf,iters,success,amp_ratio\n", 0) == 0);
  for (const auto& r : report) {
    CHECK(fs::exists(out / "attack" / "fstar" / (r.id + ".csv")));
    CHECK(fs::exists(out / "attack" / "images" / (r.id + "_clean.pgm")));
    CHECK(fs::exists(out / "attack" / "images" / (r.id + "_attacked.pgm")));
    CHECK(r.iterations <= c.attack_max_iters);
  }

  const EvaluateSummary ev = cmd_evaluate(c, out, log);
  CHECK(ev.validation_size == 16);
  CHECK(fs::exists(out / "evaluate" / "accuracy_table.md"));

  // A different training key invalidates train and everything after it.
  PipelineConfig retrain = c;
  retrain.learning_rate = 0.03;
  CHECK_THROWS_AS(cmd_attack(retrain, out, log), MissingArtifact);
  fs::remove_all(out);
}

TEST_CASE("evaluation summary rules") {
  std::vector<AttackRow> rows = {
      {"a", 100, 1, 0.99, 0.01, 10, true, 0.5},   // showcase candidate
      {"b", 100, 1, 0.99, 0.02, 10, true, 0.2},   // smaller amplitude wins
      {"c", 500, 0, 0.97, 0.40, 20, true, 3.0},   // flipped, not strong
      {"d", 500, 0, 0.90, 0.90, 100, false, 0.1}, // not flipped
      {"e", 100, 1, 0.30, 0.30, 0, true, 0.0},    // wrong from the start
  };
  const EvaluateSummary s = summarize_attacks(rows);
  CHECK(s.validation_size == 5);
  CHECK(s.correctly_classified == 4);
  CHECK(s.flipped == 3);
  REQUIRE(s.showcase.has_value());
  CHECK(s.showcase->id == "b");
  CHECK(s.median_amplitude_ratio == doctest::Approx(0.5));
  CHECK(s.accuracy_without == doctest::Approx(0.8));
  CHECK(s.accuracy_with == doctest::Approx(0.2));
}
