#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wavespoof/classifier.hpp"
#include "wavespoof/green.hpp"
#include "wavespoof/spectral.hpp"
#include "wavespoof/wave_sim.hpp"

namespace wavespoof {

/// One attacked observation. The intruder response G_s g is computed once at
/// construction; the optional STFT-domain noise term stays fixed for the whole
/// attack. A null projector leaves the interferer unconstrained.
struct AttackProblem {
  const GreenOperator* green_i = nullptr;
  const GreenOperator* green_s = nullptr;
  Signal intruder;             // g
  Signal intruder_response;    // G_s g
  std::optional<ComplexMatrix> noise;
  const StftPlan* plan = nullptr;
  const NullspaceProjector* projector = nullptr;
  const ModelParams* model = nullptr;
  int label = 0;
  double floor_db = kDefaultFloorDb;

  static AttackProblem make(const GreenOperator& green_i, const GreenOperator& green_s, const Signal& g,
                            const StftPlan& plan, const NullspaceProjector* projector, const ModelParams& model,
                            int label, double floor_db, std::optional<ComplexMatrix> noise = std::nullopt);

  int signal_length() const { return static_cast<int>(intruder.size()); }
};

/// Quantities along the chain s -> z -> dB -> p for one interferer signal.
struct Evaluated {
  Signal received;        // s
  ComplexMatrix stft;     // z, noise included
  Eigen::MatrixXd db;
  double logit = 0.0;
  double probability = 0.0;
  double loss = 0.0;      // J
};

/// Classifier pipeline on a received trace.
Evaluated evaluate_received(const AttackProblem& problem, const Signal& received);

/// J(f) through the precomputed Green operators.
double objective(const AttackProblem& problem, const Signal& f);
Evaluated evaluate_interferer(const AttackProblem& problem, const Signal& f);

/// dJ/ds for a received trace.
Signal received_sensitivity(const AttackProblem& problem, const Evaluated& at);

/// dJ/df = G_i^T dJ/ds.
Signal gradient(const AttackProblem& problem, const Signal& f, double* value = nullptr);

/// J(f) with the received trace from a full leapfrog run.
double objective_naive(const AttackProblem& problem, const ForwardModel& model, const Signal& f);

/// dJ/df from one forward leapfrog pass and one backward adjoint pass.
/// `passes` (if given) receives the number of time-loop passes performed.
Signal adjoint_gradient_oracle(const AttackProblem& problem, const ForwardModel& model, const Signal& f,
                               int* passes = nullptr);

/// The adjoint pass alone: maps a receiver sensitivity r to G_i^T r with the
/// sparse solver (K - 1 solves).
Signal adjoint_pullback(const ForwardModel& model, const Signal& sensitivity);

enum class AttackMethod { reduced_lbfgs, projected_gradient };

struct AttackConfig {
  int max_iters = 100;
  int check_every = 10;
  int memory = 10;
  double initial_step = 1.0;
  double contraction = 0.5;
  double sufficient_increase = 1e-4;
  int max_backtracks = 60;
  double min_gradient = 1e-14;
  AttackMethod method = AttackMethod::reduced_lbfgs;
  std::optional<Signal> initial_f;

  void validate() const;
};

struct AttackResult {
  Signal f_star;
  int iterations = 0;
  std::vector<double> objective_history;
  double clean_confidence = 0.0;  // probability of the true class at f = 0
  double final_confidence = 0.0;  // probability of the true class at f_star
  Spectrogram clean;
  Spectrogram perturbed;
  bool success = false;
  double amplitude_ratio = 0.0;  // max|f_star| / max|g|
  std::string diagnostics;
};

/// Maximizes J over feasible f, checking for misclassification every
/// `check_every` iterations (iteration 0 included) and at the end.
AttackResult run_attack(const AttackProblem& problem, const AttackConfig& config);

/// Constraint residual ||F~ f|| / ||f|| (0 for f = 0).
double feasibility_residual(const ComplexMatrix& constraint, const Signal& f);

}  // namespace wavespoof
