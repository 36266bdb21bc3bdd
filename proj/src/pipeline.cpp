#include "wavespoof/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "wavespoof/binary_io.hpp"
#include "wavespoof/errors.hpp"
#include "wavespoof/noise.hpp"
#include "wavespoof/random.hpp"
#include "wavespoof/solver.hpp"

namespace fs = std::filesystem;

namespace wavespoof {

TimeGrid grid_for(const PipelineConfig& c) { return TimeGrid::make(c.dt, c.num_steps); }

StftPlan plan_for(const PipelineConfig& c) {
  return StftPlan::make(c.num_samples(), c.stft_window, c.stft_hop, c.stft_freqs, c.dt);
}

SimConfig sim_config_for(const PipelineConfig& c) {
  SimConfig s;
  s.c = c.c;
  s.interferer_track = {c.interferer};
  s.intruder_track = {c.source};
  s.epsilon = c.epsilon;
  s.detector = c.detector;
  return s;
}

BandSelector band_for(const PipelineConfig& c, const StftPlan& plan) {
  return BandSelector::outside(plan, c.band_min_hz, c.band_max_hz);
}

Signal intruder_signal(const PipelineConfig& c, double frequency_hz) {
  Signal g(c.num_samples());
  const double w = 2.0 * std::numbers::pi * frequency_hz;
  for (int k = 0; k < c.num_samples(); ++k) g[k] = c.intruder_amplitude * std::sin(w * c.dt * k);
  return g;
}

std::string split_name(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::test: return "test";
    case Split::validation: return "val";
  }
  return "unknown";
}

std::vector<ExampleRecord> plan_examples(const PipelineConfig& c) {
  const std::uint64_t root = derive_seed(c.seed, kGendataSeedTag);
  const auto freqs = c.frequencies_hz();
  std::vector<ExampleRecord> out;
  for (Split split : {Split::train, Split::test, Split::validation}) {
    const int reps = split == Split::train ? c.train_per_freq : split == Split::test ? c.test_per_freq : c.val_per_freq;
    for (std::size_t i = 0; i < freqs.size(); ++i) {
      for (int r = 0; r < reps; ++r) {
        ExampleRecord rec;
        char id[64];
        std::snprintf(id, sizeof id, "%s_%03zu_%03d", split_name(split).c_str(), i, r);
        rec.id = id;
        rec.frequency_hz = freqs[i];
        rec.label = c.label_for(freqs[i]);
        const std::uint64_t tag = (static_cast<std::uint64_t>(split) << 40) | (static_cast<std::uint64_t>(i) << 20) |
                                  static_cast<std::uint64_t>(r);
        rec.seed = derive_seed(root, tag);
        rec.path = split_name(split) + "/" + rec.id + ".wspg";
        rec.split = split;
        out.push_back(std::move(rec));
      }
    }
  }
  return out;
}

ComplexMatrix observation_noise(const PipelineConfig& c, const StftPlan& plan, const Signal& clean,
                                std::uint64_t seed) {
  const NoiseSpec spec{c.noise_kappa, seed, c.noise_mode};
  const Eigen::VectorXd rms = band_rms(clean, plan);
  if (c.noise_mode == NoiseMode::stft_domain) return stft_noise(spec, rms, plan.num_windows);
  return stft(sample_time_noise(spec, plan, grid_for(c), rms), plan);
}

Eigen::MatrixXd observe(const PipelineConfig& c, const StftPlan& plan, const Signal& clean, std::uint64_t seed) {
  return db_from_stft(stft(clean, plan) + observation_noise(c, plan, clean, seed), c.floor_db);
}

void write_spectrogram_bin(const fs::path& path, const Spectrogram& spec) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  io::write_magic(out, "WSPG1");
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(spec.values.rows()));
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(spec.values.cols()));
  io::write_pod<double>(out, spec.floor_db);
  io::write_doubles(out, spec.values.data(), static_cast<std::size_t>(spec.values.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Spectrogram read_spectrogram_bin(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("missing spectrogram " + path.string());
  io::expect_magic(in, "WSPG1");
  const auto rows = io::read_pod<std::uint32_t>(in);
  const auto cols = io::read_pod<std::uint32_t>(in);
  Spectrogram spec;
  spec.floor_db = io::read_pod<double>(in);
  spec.values.resize(rows, cols);
  io::read_doubles(in, spec.values.data(), static_cast<std::size_t>(spec.values.size()));
  return spec;
}

void write_manifest_csv(const fs::path& path, const std::vector<ExampleRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "id,frequency_hz,label,seed,path\n";
  out.precision(17);
  for (const auto& r : records) out << r.id << ',' << r.frequency_hz << ',' << r.label << ',' << r.seed << ',' << r.path << '\n';
}

std::vector<ExampleRecord> read_manifest_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact("missing dataset manifest " + path.string() + " (run gendata first)");
  std::string line;
  std::getline(in, line);
  if (line != "id,frequency_hz,label,seed,path") throw InvalidInput("unexpected manifest header in " + path.string());
  std::vector<ExampleRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, freq, label, seed, rel;
    if (!std::getline(ss, id, ',') || !std::getline(ss, freq, ',') || !std::getline(ss, label, ',') ||
        !std::getline(ss, seed, ',') || !std::getline(ss, rel)) {
      throw InvalidInput("malformed manifest row: " + line);
    }
    ExampleRecord r;
    r.id = id;
    r.frequency_hz = std::stod(freq);
    r.label = std::stoi(label);
    r.seed = std::stoull(seed);
    r.path = rel;
    const std::string prefix = rel.substr(0, rel.find('/'));
    r.split = prefix == "train" ? Split::train : prefix == "test" ? Split::test : Split::validation;
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

fs::path manifest_path(const fs::path& out) { return out / "manifest.json"; }

nlohmann::json load_manifest(const fs::path& out) {
  std::ifstream in(manifest_path(out));
  if (!in) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("corrupt " + manifest_path(out).string() + ": " + e.what());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
}

template <typename F>
double seconds_of(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Precomputed {
  GreenOperator green_i;
  GreenOperator green_s;
  NullspaceProjector projector;
};

Precomputed load_precomputed(const PipelineConfig& c, const fs::path& out) {
  require_stage(out, c, Stage::precompute);
  const fs::path dir = out / "precompute";
  for (const char* f : {"green_interferer.wgrn", "green_intruder.wgrn", "projector.wprj"}) require_file(dir / f);
  return {read_green(dir / "green_interferer.wgrn"), read_green(dir / "green_intruder.wgrn"),
          read_projector(dir / "projector.wprj")};
}

std::vector<LabeledExample> load_split(const fs::path& data, const std::vector<ExampleRecord>& records, Split split) {
  std::vector<LabeledExample> out;
  for (const auto& r : records) {
    if (r.split != split) continue;
    out.push_back({read_spectrogram_bin(data / r.path).values, r.label, r.frequency_hz});
  }
  return out;
}

ModelParams load_model(const PipelineConfig& c, const fs::path& out) {
  require_stage(out, c, Stage::train);
  require_file(out / "model" / "model.wnet");
  return read_model(out / "model" / "model.wnet");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << text;
}

}  // namespace

void record_stage(const fs::path& out, const PipelineConfig& config, Stage stage, const std::vector<std::string>& files) {
  ensure_dir(out);
  nlohmann::json m = load_manifest(out);
  nlohmann::json entry;
  entry["hash"] = stage_hash(config, stage);
  entry["profile"] = config.profile;
  entry["files"] = files;
  m["stages"][stage_name(stage)] = entry;
  std::ofstream f(manifest_path(out));
  if (!f) throw std::runtime_error("cannot write " + manifest_path(out).string());
  f << m.dump(2) << '\n';
}

void require_stage(const fs::path& out, const PipelineConfig& config, Stage stage) {
  const nlohmann::json m = load_manifest(out);
  const std::string name = stage_name(stage);
  if (!m.contains("stages") || !m["stages"].contains(name)) {
    throw MissingArtifact("no '" + name + "' artifacts in " + out.string() + " (run `wavespoof " + name + "` first)");
  }
  const std::string recorded = m["stages"][name].value("hash", "");
  const std::string expected = stage_hash(config, stage);
  if (recorded != expected) {
    throw MissingArtifact("'" + name + "' artifacts in " + out.string() + " were built with config hash " + recorded +
                          ", current config hashes to " + expected + "; rerun `wavespoof " + name + "`");
  }
}

void require_file(const fs::path& path) {
  if (!fs::exists(path)) throw MissingArtifact("missing artifact " + path.string());
}

MeshSummary cmd_mesh(const PipelineConfig& c, const fs::path& out, std::ostream& log) {
  validate(c);
  const fs::path dir = out / "mesh";
  ensure_dir(dir);
  const TriMesh mesh = build_rect_mesh(c.domain, c.mesh_h, MeshOptions{c.mesh_jitter, derive_seed(c.seed, kMeshSeedTag)});
  write_mesh(dir / "mesh.txt", mesh);
  MeshSummary s{mesh.num_nodes(), mesh.num_triangles(), mesh.min_edge_length(), mesh.max_edge_length()};
  std::ostringstream text;
  text << "profile " << c.profile << "\nnodes " << s.nodes << "\ntriangles " << s.triangles << "\nedge_min_m " << s.h_min
       << "\nedge_max_m " << s.h_max << "\nreference_full_scale_nodes 11836\nreference_full_scale_triangles 23270\n";
  write_text(dir / "summary.txt", text.str());
  record_stage(out, c, Stage::mesh, {"mesh/mesh.txt", "mesh/summary.txt"});
  log << "mesh: " << s.nodes << " nodes, " << s.triangles << " triangles (full-scale reference: 11836 nodes)\n";
  return s;
}

PrecomputeSummary cmd_precompute(const PipelineConfig& c, const fs::path& out, std::ostream& log) {
  validate(c);
  require_stage(out, c, Stage::mesh);
  require_file(out / "mesh" / "mesh.txt");
  const TriMesh mesh = read_mesh(out / "mesh" / "mesh.txt");
  const TimeGrid grid = grid_for(c);
  const StftPlan plan = plan_for(c);
  const fs::path dir = out / "precompute";
  ensure_dir(dir);

  reset_solve_counters();
  const ForwardModel model = build_forward_model(mesh, sim_config_for(c), grid);
  const AdjointColumn adjoint = precompute_adjoint_column(model.ops, model.detector, grid);
  const SolveCounters counters = solve_counters();
  write_green(dir / "green_interferer.wgrn", build_green(adjoint, model.interferer, grid));
  write_green(dir / "green_intruder.wgrn", build_green(adjoint, model.intruder, grid));
  const NullspaceProjector projector = build_projector(plan, band_for(c, plan));
  write_projector(dir / "projector.wprj", projector);

  PrecomputeSummary s{counters.factorizations, counters.solves, projector.rank(), projector.constraint_rank};
  std::ostringstream text;
  text << "factorizations " << s.factorizations << "\nsolves " << s.solves << "\nnum_steps " << c.num_steps
       << "\nprojector_rank " << s.projector_rank << "\nconstraint_rank " << s.constraint_rank << '\n';
  write_text(dir / "solve_log.txt", text.str());
  record_stage(out, c, Stage::precompute,
               {"precompute/green_interferer.wgrn", "precompute/green_intruder.wgrn", "precompute/projector.wprj",
                "precompute/solve_log.txt"});
  log << "precompute: " << s.factorizations << " factorization(s), " << s.solves << " solves (K - 1 = "
      << c.num_steps - 1 << "), null space dimension " << s.projector_rank << " of " << c.num_samples() << '\n';
  return s;
}

GendataSummary cmd_gendata(const PipelineConfig& c, const fs::path& out, std::ostream& log) {
  validate(c);
  const Precomputed pre = load_precomputed(c, out);
  const StftPlan plan = plan_for(c);
  const fs::path dir = out / "data";
  for (Split s : {Split::train, Split::test, Split::validation}) ensure_dir(dir / split_name(s));

  const auto records = plan_examples(c);
  const auto freqs = c.frequencies_hz();
  std::vector<Signal> clean;
  clean.reserve(freqs.size());
  for (double f : freqs) clean.push_back(apply_green(pre.green_s, intruder_signal(c, f)));

  GendataSummary s;
  for (const auto& r : records) {
    const auto i = static_cast<std::size_t>(std::find(freqs.begin(), freqs.end(), r.frequency_hz) - freqs.begin());
    write_spectrogram_bin(dir / r.path, Spectrogram{observe(c, plan, clean[i], r.seed), c.floor_db});
    (r.split == Split::train ? s.train : r.split == Split::test ? s.test : s.validation) += 1;
  }
  write_manifest_csv(dir / "manifest.csv", records);
  record_stage(out, c, Stage::gendata, {"data/manifest.csv"});
  log << "gendata: " << s.train << " train, " << s.test << " test, " << s.validation << " validation examples\n";
  return s;
}

TrainSummary cmd_train(const PipelineConfig& c, const fs::path& out, std::ostream& log) {
  validate(c);
  require_stage(out, c, Stage::gendata);
  const fs::path data = out / "data";
  const auto records = read_manifest_csv(data / "manifest.csv");
  const auto train_set = load_split(data, records, Split::train);
  const auto test_set = load_split(data, records, Split::test);
  const auto val_set = load_split(data, records, Split::validation);

  TrainConfig tc = c.train_config();
  tc.seed = derive_seed(c.seed, kTrainSeedTag);
  TrainResult result;
  TrainSummary s;
  s.seconds = seconds_of([&] { result = train(train_set, test_set, tc); });
  s.best_epoch = result.best_epoch;
  s.epochs_run = static_cast<int>(result.log.size());
  s.test_accuracy = evaluate(result.model, test_set).accuracy;
  s.validation_accuracy = evaluate(result.model, val_set).accuracy;

  const fs::path dir = out / "model";
  ensure_dir(dir);
  write_model(dir / "model.wnet", result.model);
  write_training_log(dir / "training_log.csv", result.log);
  record_stage(out, c, Stage::train, {"model/model.wnet", "model/training_log.csv"});
  log << "train: best epoch " << s.best_epoch << " of " << s.epochs_run << ", test accuracy " << s.test_accuracy
      << ", validation accuracy " << s.validation_accuracy << " (" << s.seconds << " s)\n";
  return s;
}

void write_attack_report(const fs::path& path, const std::vector<AttackRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "example_id,freq_hz,label,clean_conf,adv_conf,iters,success,amp_ratio\n";
  out.precision(17);
  for (const auto& r : rows) {
    out << r.id << ',' << r.frequency_hz << ',' << r.label << ',' << r.clean_confidence << ','
        << r.adversarial_confidence << ',' << r.iterations << ',' << (r.success ? 1 : 0) << ',' << r.amplitude_ratio
        << '\n';
  }
}

std::vector<AttackRow> read_attack_report(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact("missing attack report " + path.string() + " (run attack first)");
  std::string line;
  std::getline(in, line);
  if (line != "example_id,freq_hz,label,clean_conf,adv_conf,iters,success,amp_ratio") {
    throw InvalidInput("unexpected attack report header in " + path.string());
  }
  std::vector<AttackRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<std::string> cells;
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 8) throw InvalidInput("malformed attack report row: " + line);
    AttackRow r;
    r.id = cells[0];
    r.frequency_hz = std::stod(cells[1]);
    r.label = std::stoi(cells[2]);
    r.clean_confidence = std::stod(cells[3]);
    r.adversarial_confidence = std::stod(cells[4]);
    r.iterations = std::stoi(cells[5]);
    r.success = cells[6] == "1";
    r.amplitude_ratio = std::stod(cells[7]);
    rows.push_back(std::move(r));
  }
  return rows;
}

AttackSummary cmd_attack(const PipelineConfig& c, const fs::path& out, std::ostream& log) {
  validate(c);
  const Precomputed pre = load_precomputed(c, out);
  require_stage(out, c, Stage::gendata);
  const ModelParams model = load_model(c, out);
  const auto records = read_manifest_csv(out / "data" / "manifest.csv");
  const StftPlan plan = plan_for(c);
  const AttackConfig acfg = c.attack_config();

  const fs::path dir = out / "attack";
  ensure_dir(dir / "fstar");
  ensure_dir(dir / "images");

  AttackSummary s;
  reset_solve_counters();
  s.seconds = seconds_of([&] {
    for (const auto& r : records) {
      if (r.split != Split::validation) continue;
      const Signal g = intruder_signal(c, r.frequency_hz);
      AttackProblem problem =
          AttackProblem::make(pre.green_i, pre.green_s, g, plan, &pre.projector, model, r.label, c.floor_db);
      problem.noise = observation_noise(c, plan, problem.intruder_response, r.seed);
      const AttackResult res = run_attack(problem, acfg);
      write_signal_csv(dir / "fstar" / (r.id + ".csv"), res.f_star, c.dt);
      write_spectrogram_pgm(dir / "images" / (r.id + "_clean.pgm"), res.clean);
      write_spectrogram_pgm(dir / "images" / (r.id + "_attacked.pgm"), res.perturbed);
      s.rows.push_back({r.id, r.frequency_hz, r.label, res.clean_confidence, res.final_confidence, res.iterations,
                        res.success, res.amplitude_ratio});
      if (!res.diagnostics.empty()) log << "attack " << r.id << ": " << res.diagnostics << '\n';
    }
  });
  s.solves_during_attack = solve_counters().solves;
  write_attack_report(dir / "report.csv", s.rows);
  write_text(dir / "attack_log.txt", "solves_during_attack " + std::to_string(s.solves_during_attack) + "\nseconds " +
                                         std::to_string(s.seconds) + "\n");
  record_stage(out, c, Stage::attack, {"attack/report.csv", "attack/attack_log.txt"});
  const auto flipped = std::count_if(s.rows.begin(), s.rows.end(), [](const AttackRow& r) { return r.success; });
  log << "attack: " << s.rows.size() << " validation examples, " << flipped << " misclassified after attack, "
      << s.solves_during_attack << " sparse solves (" << s.seconds << " s)\n";
  return s;
}

EvaluateSummary summarize_attacks(const std::vector<AttackRow>& rows) {
  EvaluateSummary s;
  s.validation_size = static_cast<int>(rows.size());
  if (rows.empty()) return s;
  int correct_clean = 0;
  int correct_after = 0;
  std::vector<double> ratios;
  for (const auto& r : rows) {
    // clean_conf is the true-class probability; p = 0.5 predicts benign.
    const bool clean_ok = r.clean_confidence > 0.5 || (r.label == 0 && r.clean_confidence == 0.5);
    if (clean_ok) {
      ++correct_clean;
      if (r.success) {
        ++s.flipped;
        ratios.push_back(r.amplitude_ratio);
        const bool strong = r.clean_confidence >= 0.95 && r.adversarial_confidence < 0.05 && r.amplitude_ratio < 1.0;
        if (strong && (!s.showcase || r.amplitude_ratio < s.showcase->amplitude_ratio)) s.showcase = r;
      }
    }
    if (!r.success) ++correct_after;
  }
  s.correctly_classified = correct_clean;
  s.accuracy_without = static_cast<double>(correct_clean) / rows.size();
  s.accuracy_with = static_cast<double>(correct_after) / rows.size();
  if (!ratios.empty()) {
    std::sort(ratios.begin(), ratios.end());
    const std::size_t n = ratios.size();
    s.median_amplitude_ratio = n % 2 == 1 ? ratios[n / 2] : 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]);
  }
  return s;
}

EvaluateSummary cmd_evaluate(const PipelineConfig& c, const fs::path& out, std::ostream& log) {
  validate(c);
  require_stage(out, c, Stage::attack);
  const EvaluateSummary s = summarize_attacks(read_attack_report(out / "attack" / "report.csv"));
  const fs::path dir = out / "evaluate";
  ensure_dir(dir);
  {
    std::ofstream csv(dir / "accuracy_table.csv");
    csv << "network,accuracy_without_interferer,accuracy_with_interferer\n";
    csv << "compact_cnn," << s.accuracy_without << ',' << s.accuracy_with << '\n';
  }
  char md[512];
  std::snprintf(md, sizeof md,
                "| Network | Accuracy Without Interferer | Accuracy With Interferer |\n"
                "|---|---|---|\n"
                "| compact CNN | %.3f%% | %.3f%% |\n",
                100.0 * s.accuracy_without, 100.0 * s.accuracy_with);
  write_text(dir / "accuracy_table.md", md);
  std::ostringstream text;
  text << "validation_size " << s.validation_size << "\ncorrectly_classified " << s.correctly_classified
       << "\nflipped " << s.flipped << "\nflip_rate "
       << (s.correctly_classified > 0 ? static_cast<double>(s.flipped) / s.correctly_classified : 0.0)
       << "\nmedian_amplitude_ratio " << s.median_amplitude_ratio << '\n';
  if (s.showcase) {
    text << "showcase " << s.showcase->id << " clean_conf " << s.showcase->clean_confidence << " adv_conf "
         << s.showcase->adversarial_confidence << " amp_ratio " << s.showcase->amplitude_ratio << " images attack/images/"
         << s.showcase->id << "_clean.pgm attack/images/" << s.showcase->id << "_attacked.pgm\n";
  } else {
    text << "showcase none\n";
  }
  write_text(dir / "summary.txt", text.str());
  record_stage(out, c, Stage::evaluate, {"evaluate/accuracy_table.csv", "evaluate/accuracy_table.md", "evaluate/summary.txt"});
  log << md << text.str();
  return s;
}

namespace {

template <typename F>
BenchRow time_calls(const std::string& name, int reps, F&& call) {
  call();  // warm-up
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(reps));
  reset_solve_counters();
  for (int i = 0; i < reps; ++i) times.push_back(seconds_of(call));
  const double solves = static_cast<double>(solve_counters().solves) / reps;
  double mean = 0.0;
  for (double t : times) mean += t;
  mean /= reps;
  double var = 0.0;
  for (double t : times) var += (t - mean) * (t - mean);
  const double sd = reps > 1 ? std::sqrt(var / (reps - 1)) : 0.0;
  return {name, mean, mean > 0.0 ? sd / mean : 0.0, solves};
}

}  // namespace

BenchSummary cmd_bench(const PipelineConfig& c, const fs::path& out, std::ostream& log) {
  validate(c);
  require_stage(out, c, Stage::mesh);
  const Precomputed pre = load_precomputed(c, out);
  const ModelParams model = load_model(c, out);
  const TriMesh mesh = read_mesh(out / "mesh" / "mesh.txt");
  const TimeGrid grid = grid_for(c);
  const StftPlan plan = plan_for(c);
  const ForwardModel fm = build_forward_model(mesh, sim_config_for(c), grid);

  const double freq = c.frequencies_hz().front();
  const Signal g = intruder_signal(c, freq);
  AttackProblem problem =
      AttackProblem::make(pre.green_i, pre.green_s, g, plan, &pre.projector, model, c.label_for(freq), c.floor_db);
  problem.noise = observation_noise(c, plan, problem.intruder_response, derive_seed(c.seed, kBenchSeedTag));
  Rng rng(derive_seed(c.seed, kBenchSeedTag + 1));
  Signal f(c.num_samples());
  for (Eigen::Index k = 0; k < f.size(); ++k) f[k] = 0.1 * c.intruder_amplitude * rng.normal();
  f = project(pre.projector, f);

  BenchSummary s;
  s.repetitions = c.bench_repetitions;
  volatile double sink = 0.0;
  s.objective_naive = time_calls("objective_naive", s.repetitions, [&] { sink = objective_naive(problem, fm, f); });
  s.objective_shortcut = time_calls("objective_shortcut", s.repetitions, [&] { sink = objective(problem, f); });
  s.gradient_adjoint =
      time_calls("gradient_adjoint", s.repetitions, [&] { sink = adjoint_gradient_oracle(problem, fm, f)[2]; });
  s.gradient_shortcut = time_calls("gradient_shortcut", s.repetitions, [&] { sink = gradient(problem, f)[2]; });
  (void)sink;

  const fs::path dir = out / "bench";
  ensure_dir(dir);
  {
    std::ofstream csv(dir / "bench.csv");
    csv << "row,mean_seconds,std_over_mean,solves_per_call\n";
    csv.precision(6);
    for (const BenchRow* r : {&s.objective_naive, &s.objective_shortcut}) {
      csv << r->name << ',' << r->mean_seconds << ',' << r->std_over_mean << ',' << r->solves_per_call << '\n';
    }
    csv << "objective_speedup," << s.objective_speedup() << ",,\n";
    for (const BenchRow* r : {&s.gradient_adjoint, &s.gradient_shortcut}) {
      csv << r->name << ',' << r->mean_seconds << ',' << r->std_over_mean << ',' << r->solves_per_call << '\n';
    }
    csv << "gradient_speedup," << s.gradient_speedup() << ",,\n";
  }
  std::ostringstream md;
  md.precision(4);
  md << "| | time (s) | std/mean | sparse solves |\n|---|---|---|---|\n";
  auto row = [&md](const char* label, const BenchRow& r) {
    md << "| " << label << " | " << r.mean_seconds << " | " << r.std_over_mean << " | " << r.solves_per_call << " |\n";
  };
  row("Objective (naive)", s.objective_naive);
  row("Objective (shortcut)", s.objective_shortcut);
  md << "| Speedup | " << s.objective_speedup() << "x | | |\n";
  row("Gradient (adjoint method)", s.gradient_adjoint);
  row("Gradient (shortcut)", s.gradient_shortcut);
  md << "| Speedup | " << s.gradient_speedup() << "x | | |\n";
  md << "\n" << s.repetitions << " repetitions per row.\n";
  write_text(dir / "bench.md", md.str());
  record_stage(out, c, Stage::bench, {"bench/bench.csv", "bench/bench.md"});
  log << md.str();
  return s;
}

}  // namespace wavespoof
