// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Usage: acceptance <work-dir>

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "test_support.hpp"
#include "wavespoof/attack.hpp"
#include "wavespoof/config.hpp"
#include "wavespoof/fem.hpp"
#include "wavespoof/green.hpp"
#include "wavespoof/noise.hpp"
#include "wavespoof/pipeline.hpp"
#include "wavespoof/solver.hpp"

using namespace wavespoof;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

// Criterion 1
constexpr int kEquivMaxNodes = 500;
constexpr int kEquivSteps = 400;
constexpr int kEquivTrials = 20;
constexpr double kEquivTol = 1e-9;
constexpr double kEquivSeconds = 60.0;
// Criterion 2
constexpr int kFdCoordinates = 20;
constexpr double kFdTol = 1e-3;
constexpr double kOracleTol = 1e-6;
constexpr double kGradSeconds = 300.0;
// Criterion 4
constexpr double kMinSpeedup = 10.0;
constexpr int kMinRepetitions = 30;
// Criterion 5
constexpr double kConstantTol = 1e-12;
constexpr double kAreaTol = 1e-10;
constexpr double kPerimeterTol = 1e-10;
constexpr double kOrderLow = 1.9;
constexpr double kOrderHigh = 2.1;
// Criterion 6
constexpr double kStftTol = 1e-12;
constexpr double kDbLawTol = 1e-9;
constexpr double kProjectorTol = 1e-10;
constexpr double kNullTol = 1e-8;
constexpr int kPaperWindows = 94;
// Criterion 7
constexpr double kMinCleanAccuracy = 0.95;
constexpr double kTrainSeconds = 600.0;
// Criterion 8
constexpr double kMinFlipRate = 0.90;
constexpr int kAttackIters = 100;
constexpr int kAttackCheck = 10;
constexpr double kAttackSeconds = 3600.0;
// Criterion 9
constexpr double kShowcaseClean = 0.95;
constexpr double kShowcaseAdv = 0.05;
constexpr double kShowcaseAmp = 1.0;

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("CRITERION %d %s: %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

void guarded(int id, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, false, std::string("exception: ") + e.what());
  }
}

template <typename F>
double seconds_of(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

// Small-mesh attack setup shared by criteria 1-3.
struct SmallProblem {
  // The step operators are factorized while the model is built, so counting starts first.
  int counting = (reset_solve_counters(), 0);
  SmallModel sim = small_model(kEquivSteps);
  GreenOperator green_i;
  GreenOperator green_s;
  StftPlan plan = StftPlan::make(kEquivSteps + 1, 32, 32, 17, sim.grid.dt);
  BandSelector band = BandSelector::outside(plan, 4.0, 1e9);
  NullspaceProjector projector;
  ModelParams model;
  Signal g = sine(kEquivSteps + 1, sim.grid.dt, 3.0);
  std::uint64_t precompute_factorizations = 0;
  std::uint64_t precompute_solves = 0;

  SmallProblem() {
    const AdjointColumn adj = precompute_adjoint_column(sim.model.ops, sim.model.detector, sim.grid);
    precompute_factorizations = solve_counters().factorizations;
    precompute_solves = solve_counters().solves;
    green_i = build_green(adj, sim.model.interferer, sim.grid);
    green_s = build_green(adj, sim.model.intruder, sim.grid);
    projector = build_projector(plan, band);
    model = make_model(plan.num_freqs(), plan.num_windows, 4, 4, 0.1);
    initialize(model, 3);
    model.norm = fit_normalization({spectrogram_db(apply_green(green_s, g), plan, -300.0).values});
  }

  AttackProblem problem() const {
    const Signal s = apply_green(green_s, g);
    const ComplexMatrix noise =
        stft_noise(NoiseSpec{0.1, 11, NoiseMode::stft_domain}, band_rms(s, plan), plan.num_windows);
    AttackProblem p = AttackProblem::make(green_i, green_s, g, plan, &projector, model, 0, -300.0, noise);
    p.label = predict(evaluate_interferer(p, Signal::Zero(kEquivSteps + 1)).probability);
    return p;
  }
};

void criterion_1(const SmallProblem& sp) {
  guarded(1, [&] {
    const int nodes = sp.sim.mesh.num_nodes();
    double worst = 0.0;
    const double secs = seconds_of([&] {
      for (int t = 0; t < kEquivTrials; ++t) {
        const Signal f = project(sp.projector, random_signal(kEquivSteps + 1, 1000 + t));
        const Signal g = random_signal(kEquivSteps + 1, 2000 + t);
        const Signal naive = leapfrog_solve(sp.sim.model, f, g).receiver;
        const Signal fast = apply_green(sp.green_i, f) + apply_green(sp.green_s, g);
        worst = std::max(worst, rel_max_err(fast, naive));
      }
    });
    const bool pass = nodes <= kEquivMaxNodes && worst <= kEquivTol && secs < kEquivSeconds;
    report(1, pass,
           fmt("%d nodes, K=%d, %d trials, max rel err %.2e (tol %.0e), %.1f s (limit %.0f s)", nodes, kEquivSteps,
               kEquivTrials, worst, kEquivTol, secs, kEquivSeconds));
  });
}

void criterion_2(const SmallProblem& sp) {
  guarded(2, [&] {
    double fd_worst = 0.0, oracle_err = 0.0;
    const double secs = seconds_of([&] {
      const AttackProblem p = sp.problem();
      const Signal f = project(sp.projector, random_signal(kEquivSteps + 1, 77, 0.3));
      const Signal grad = gradient(p, f);
      const double gmax = grad.cwiseAbs().maxCoeff();
      Rng rng(78);
      for (int t = 0; t < kFdCoordinates; ++t) {
        const int j = 2 + static_cast<int>(rng.below(kEquivSteps - 2));
        const double h = 1e-4 * f.cwiseAbs().maxCoeff();
        Signal fp = f, fm = f;
        fp[j] += h;
        fm[j] -= h;
        const double fd = (objective(p, fp) - objective(p, fm)) / (2 * h);
        fd_worst = std::max(fd_worst, std::abs(fd - grad[j]) / std::max(std::abs(grad[j]), 1e-3 * gmax));
      }
      const Signal oracle = adjoint_gradient_oracle(p, sp.sim.model, f);
      oracle_err = (grad - oracle).norm() / oracle.norm();
    });
    const bool pass = fd_worst <= kFdTol && oracle_err <= kOracleTol && secs < kGradSeconds;
    report(2, pass,
           fmt("FD max rel err %.2e over %d coords (tol %.0e); adjoint oracle rel err %.2e (tol %.0e); %.1f s", fd_worst,
               kFdCoordinates, kFdTol, oracle_err, kOracleTol, secs));
  });
}

void criterion_5(const TriMesh& mesh, const Rect& domain) {
  guarded(5, [&] {
    const SparseSymMatrix M = assemble_mass(mesh), K = assemble_stiffness(mesh), S = assemble_surface_mass(mesh);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(mesh.num_nodes());
    const double constant = (K * ones).cwiseAbs().maxCoeff();
    const double area = domain.width() * domain.height();
    const double perimeter = 2.0 * (domain.width() + domain.height());
    const double area_err = std::abs(ones.dot(M * ones) - area) / area;
    const double perim_err = std::abs(ones.dot(S * ones) - perimeter) / perimeter;

    auto oscillator_error = [](int n) {
      const double dt = 1.0 / n;
      SparseSymMatrix one(1, 1);
      one.insert(0, 0) = 1.0;
      const StepOperators ops = build_step_operators(one, SparseSymMatrix(1, 1), one, 1.0, dt);
      double end = 0.0;
      leapfrog_integrate(
          ops, n, Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, std::cos(dt)),
          [](int, Eigen::VectorXd&) {}, [&](int k, const Eigen::VectorXd& u) {
            if (k == n) end = u[0];
          });
      return std::abs(end - std::cos(1.0));
    };
    const double o1 = std::log2(oscillator_error(50) / oscillator_error(100));
    const double o2 = std::log2(oscillator_error(100) / oscillator_error(200));
    const bool orders = o1 >= kOrderLow && o1 <= kOrderHigh && o2 >= kOrderLow && o2 <= kOrderHigh;
    const bool pass = constant <= kConstantTol && area_err <= kAreaTol && perim_err <= kPerimeterTol && orders;
    report(5, pass,
           fmt("|K 1|max %.1e (tol %.0e); mass rel err %.1e, surface rel err %.1e (tol %.0e); orders %.3f, %.3f", constant,
               kConstantTol, area_err, perim_err, kAreaTol, o1, o2));
  });
}

void criterion_6(const PipelineConfig& c) {
  guarded(6, [&] {
    const StftPlan plan = plan_for(c);
    const Signal s = random_signal(c.num_samples(), 606);

    // Direct sum over each window against the materialized matrix.
    const auto w = hann(plan.window);
    const Eigen::VectorXcd Fs = stft_matrix(plan) * s.cast<std::complex<double>>();
    double stft_err = 0.0, scale = 0.0;
    for (int m = 0; m < plan.num_windows; ++m) {
      for (int l = 0; l < plan.num_freqs(); ++l) {
        std::complex<double> acc = 0.0;
        for (int k = 0; k < plan.window && m * plan.hop + k < s.size(); ++k) {
          acc += w[k] * s[m * plan.hop + k] * std::polar(1.0, -2.0 * std::numbers::pi * k * plan.omegas[l] / plan.window);
        }
        stft_err = std::max(stft_err, std::abs(acc - Fs[m * plan.num_freqs() + l]));
        scale = std::max(scale, std::abs(acc));
      }
    }
    stft_err /= scale;

    const Spectrogram a = spectrogram_db(s, plan, c.floor_db), b = spectrogram_db(10.0 * s, plan, c.floor_db);
    double law = 0.0;
    for (Eigen::Index i = 0; i < a.values.size(); ++i) {
      if (a.values.data()[i] > c.floor_db) law = std::max(law, std::abs(b.values.data()[i] - a.values.data()[i] - 20.0));
    }

    const NullspaceProjector proj = build_projector(plan, band_for(c, plan));
    const Eigen::MatrixXd P = proj.basis * proj.basis.transpose();
    const double idem = (P * P - P).cwiseAbs().maxCoeff();
    const double sym = (P - P.transpose()).cwiseAbs().maxCoeff();
    const ComplexMatrix Ft = constraint_matrix(plan, band_for(c, plan));
    double null_ratio = 0.0;
    for (int t = 0; t < 5; ++t) {
      const Signal x = random_signal(c.num_samples(), 610 + t);
      null_ratio = std::max(null_ratio, (Ft * (P * x).cast<std::complex<double>>()).norm() / x.norm());
    }
    const int paper_windows = stft_window_count(6000, 64, 64);
    const int ceil_rule = (6000 + 63) / 64;

    const bool pass = stft_err <= kStftTol && law <= kDbLawTol && idem <= kProjectorTol && sym <= kProjectorTol &&
                      null_ratio <= kNullTol && paper_windows == kPaperWindows && ceil_rule == kPaperWindows;
    report(6, pass,
           fmt("STFT rel err %.1e (tol %.0e); +20 dB law err %.1e; projector idem %.1e sym %.1e (tol %.0e); "
               "|F~Px|/|x| %.1e (tol %.0e); M(K=6000) = %d",
               stft_err, kStftTol, law, idem, sym, kProjectorTol, null_ratio, kNullTol, paper_windows));
  });
}

std::vector<fs::path> files_under(const fs::path& root) {
  std::vector<fs::path> out;
  if (!fs::exists(root)) return out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "wavespoof_acceptance";
  fs::remove_all(work);
  const fs::path run1 = work / "run1";
  const fs::path run2 = work / "run2";
  std::ostringstream log;

  {
    const auto sp = std::make_unique<SmallProblem>();
    criterion_1(*sp);
    criterion_2(*sp);
  }

  const PipelineConfig c = desk_profile();
  MeshSummary mesh_summary;
  PrecomputeSummary pre;
  TrainSummary tr;
  AttackSummary at;
  bool pipeline_ok = false;
  try {
    mesh_summary = cmd_mesh(c, run1, log);
    reset_solve_counters();
    pre = cmd_precompute(c, run1, log);
    cmd_gendata(c, run1, log);
    tr = cmd_train(c, run1, log);
    pipeline_ok = true;
  } catch (const std::exception& e) {
    std::printf("desk pipeline failed: %s\n", e.what());
  }

  guarded(3, [&] {
    if (!pipeline_ok) throw std::runtime_error("desk pipeline did not run");
    const auto sp = std::make_unique<SmallProblem>();
    const AttackProblem p = sp->problem();
    const Signal f = project(sp->projector, random_signal(kEquivSteps + 1, 5));
    reset_solve_counters();
    for (int i = 0; i < 5; ++i) {
      (void)objective(p, f);
      (void)gradient(p, f);
    }
    AttackConfig ac;
    ac.max_iters = 20;
    (void)run_attack(p, ac);
    const std::uint64_t eval_solves = solve_counters().solves + solve_counters().factorizations;
    const bool small_pre = sp->precompute_factorizations == 1 && sp->precompute_solves == kEquivSteps - 1;
    const bool desk_pre = pre.factorizations == 1 && pre.solves == static_cast<std::uint64_t>(c.num_steps - 1);
    report(3, eval_solves == 0 && small_pre && desk_pre,
           fmt("solves during 5 objective+gradient evaluations and a 20-iteration attack: %llu; precompute small mesh %llu factorization(s), "
               "%llu solves (K-1 = %d); desk %llu factorization(s), %llu solves (K-1 = %d)",
               static_cast<unsigned long long>(eval_solves),
               static_cast<unsigned long long>(sp->precompute_factorizations),
               static_cast<unsigned long long>(sp->precompute_solves), kEquivSteps - 1,
               static_cast<unsigned long long>(pre.factorizations), static_cast<unsigned long long>(pre.solves),
               c.num_steps - 1));
  });

  guarded(4, [&] {
    if (!pipeline_ok) throw std::runtime_error("desk pipeline did not run");
    const BenchSummary b = cmd_bench(c, run1, log);
    const bool pass = b.repetitions >= kMinRepetitions && b.objective_speedup() >= kMinSpeedup &&
                      b.gradient_speedup() >= kMinSpeedup;
    report(4, pass,
           fmt("objective %.1fx (%.3g s vs %.3g s), gradient %.1fx (%.3g s vs %.3g s), %d repetitions (need >= %.0fx)",
               b.objective_speedup(), b.objective_naive.mean_seconds, b.objective_shortcut.mean_seconds,
               b.gradient_speedup(), b.gradient_adjoint.mean_seconds, b.gradient_shortcut.mean_seconds, b.repetitions,
               kMinSpeedup));
  });

  guarded(5, [&] {
    if (!pipeline_ok) throw std::runtime_error("desk pipeline did not run");
    criterion_5(read_mesh(run1 / "mesh" / "mesh.txt"), c.domain);
  });

  criterion_6(c);

  guarded(7, [&] {
    if (!pipeline_ok) throw std::runtime_error("desk pipeline did not run");
    report(7, tr.validation_accuracy >= kMinCleanAccuracy && tr.seconds < kTrainSeconds,
           fmt("validation accuracy %.2f%% (need >= %.0f%%), training %.1f s (limit %.0f s)",
               100.0 * tr.validation_accuracy, 100.0 * kMinCleanAccuracy, tr.seconds, kTrainSeconds));
  });

  EvaluateSummary ev;
  bool attacked = false;
  guarded(8, [&] {
    if (!pipeline_ok) throw std::runtime_error("desk pipeline did not run");
    if (c.attack_max_iters != kAttackIters || c.attack_check_every != kAttackCheck) {
      throw std::runtime_error("desk profile attack cadence differs from 100 iterations / checks every 10");
    }
    at = cmd_attack(c, run1, log);
    ev = cmd_evaluate(c, run1, log);
    attacked = true;
    const double rate = ev.correctly_classified > 0 ? static_cast<double>(ev.flipped) / ev.correctly_classified : 0.0;
    report(8, rate >= kMinFlipRate && at.seconds < kAttackSeconds,
           fmt("%d of %d correctly classified validation examples misclassified (%.1f%%, need >= %.0f%%); "
               "%d iterations, checks every %d; %.0f s (limit %.0f s)",
               ev.flipped, ev.correctly_classified, 100.0 * rate, 100.0 * kMinFlipRate, kAttackIters, kAttackCheck,
               at.seconds, kAttackSeconds));
  });

  guarded(9, [&] {
    if (!attacked) throw std::runtime_error("attack stage did not run");
    const AttackRow* best = nullptr;
    for (const auto& r : at.rows) {
      if (r.success && r.clean_confidence >= kShowcaseClean && r.adversarial_confidence < kShowcaseAdv &&
          r.amplitude_ratio < kShowcaseAmp && (!best || r.amplitude_ratio < best->amplitude_ratio)) {
        best = &r;
      }
    }
    const bool images = best && fs::exists(run1 / "attack" / "images" / (best->id + "_clean.pgm")) &&
                        fs::exists(run1 / "attack" / "images" / (best->id + "_attacked.pgm"));
    if (best) {
      report(9, images,
             fmt("%s (%.0f Hz): true-class confidence %.4f -> %.2e, amplitude ratio %.3f; images in attack/images",
                 best->id.c_str(), best->frequency_hz, best->clean_confidence, best->adversarial_confidence,
                 best->amplitude_ratio));
    } else {
      double min_amp = 1e300;
      for (const auto& r : at.rows) {
        if (r.success && r.adversarial_confidence < kShowcaseAdv) min_amp = std::min(min_amp, r.amplitude_ratio);
      }
      report(9, false,
             fmt("no successful attack with clean >= %.2f, adversarial < %.2f and amplitude ratio < %.1f "
                 "(smallest ratio among strong flips: %.3g; median over flips %.3g)",
                 kShowcaseClean, kShowcaseAdv, kShowcaseAmp, min_amp, ev.median_amplitude_ratio));
    }
  });

  guarded(10, [&] {
    if (!pipeline_ok) throw std::runtime_error("desk pipeline did not run");
    cmd_mesh(c, run2, log);
    cmd_precompute(c, run2, log);
    cmd_gendata(c, run2, log);
    cmd_train(c, run2, log);
    std::size_t compared = 0;
    std::vector<std::string> differing;
    for (const char* sub : {"precompute", "data", "model"}) {
      const auto a = files_under(run1 / sub), b = files_under(run2 / sub);
      if (a != b) differing.push_back(std::string(sub) + "/ (file lists differ)");
      for (const auto& rel : a) {
        if (!fs::exists(run2 / sub / rel)) continue;
        ++compared;
        if (slurp(run1 / sub / rel) != slurp(run2 / sub / rel)) differing.push_back(std::string(sub) + "/" + rel.string());
      }
    }
    std::string detail = fmt("%zu artifact files compared byte for byte across two runs", compared);
    if (!differing.empty()) detail += "; differing: " + differing.front();
    report(10, differing.empty() && compared > 0, detail);
  });

  std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASS" : "SOME FAIL", failures);
  return failures == 0 ? 0 : 1;
}
