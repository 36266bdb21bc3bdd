#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "wavespoof/fem.hpp"
#include "wavespoof/mesh.hpp"
#include "wavespoof/solver.hpp"

namespace wavespoof {

/// Samples t_k = k dt for k = 0..K.
struct TimeGrid {
  double dt = 0.0;
  int num_steps = 0;  // K

  static TimeGrid make(double dt, int num_steps);
  int num_samples() const { return num_steps + 1; }
  double final_time() const { return dt * num_steps; }
  double time(int k) const { return dt * k; }
};

/// A time series with one sample per grid instant (length K + 1).
using Signal = Eigen::VectorXd;

/// The first step whose forcing reaches the solution. The block system zeroes
/// the forcing rows belonging to the two initial states, so samples 0 and 1 of
/// every source signal are inert, as is sample K (it would drive u^{K+1}).
inline constexpr int kFirstForcedStep = 2;

enum class Boundary { absorbing, reflecting };

/// Block coefficients of the fully discrete update
///   A+ u^{k+1} = -A0 u^k - A- u^{k-1} + dt^2 M q^k
/// with A- = M - (c dt / 2) S, A0 = c^2 dt^2 K - 2M, A+ = M + (c dt / 2) S.
struct StepOperators {
  SparseSymMatrix mass;
  SparseSymMatrix a_minus;
  SparseSymMatrix a_zero;
  SparseSymMatrix a_plus;
  SpdFactorization a_plus_solver;
  double c = 0.0;
  double dt = 0.0;
};

StepOperators build_step_operators(const SparseSymMatrix& mass, const SparseSymMatrix& surface_mass,
                                   const SparseSymMatrix& stiffness, double c, double dt);

/// Assembles M, S, K on the mesh. A time step above cfl_estimate() only logs a
/// warning; `reflecting` drops the boundary term (S = 0).
StepOperators build_step_operators(const TriMesh& mesh, double c, const TimeGrid& grid,
                                   Boundary boundary = Boundary::absorbing);

/// Conservative explicit stability bound h_min / (c sqrt 2).
double cfl_estimate(const TriMesh& mesh, double c);

/// Nodal mollified-delta vectors of a point emitter, either one vector for a
/// fixed position or one per time sample for a moving one. `weighted` caches M delta.
struct PointSource {
  std::vector<NodalVector> deltas;
  std::vector<NodalVector> weighted;

  static PointSource fixed(const TriMesh& mesh, const SparseSymMatrix& mass, const Point2& position,
                           double epsilon);
  static PointSource moving(const TriMesh& mesh, const SparseSymMatrix& mass,
                            std::span<const Point2> track, double epsilon);
  static PointSource from_nodal(const SparseSymMatrix& mass, std::vector<NodalVector> deltas);

  bool is_static() const { return deltas.size() == 1; }
  const NodalVector& delta_at(int k) const { return deltas[is_static() ? 0 : static_cast<std::size_t>(k)]; }
  const NodalVector& weighted_at(int k) const {
    return weighted[is_static() ? 0 : static_cast<std::size_t>(k)];
  }
};

struct SimConfig {
  double c = 0.0;
  std::vector<Point2> interferer_track;  // length 1 (static) or K + 1
  std::vector<Point2> intruder_track;    // length 1 (static) or K + 1
  double epsilon = 0.0;
  Point2 detector;
};

/// Everything the naive path needs: mesh, step operators, sources, detector.
struct ForwardModel {
  TriMesh mesh;
  TimeGrid grid;
  StepOperators ops;
  PointSource interferer;
  PointSource intruder;
  NodalVector detector;
};

ForwardModel build_forward_model(const TriMesh& mesh, const SimConfig& config, const TimeGrid& grid,
                                 Boundary boundary = Boundary::absorbing);

/// Generic leapfrog loop from (u^0, u^1). `add_forcing(k, rhs)` may add to the
/// right-hand side of the step producing u^{k+1}; `observe(k, u^k)` sees every state.
void leapfrog_integrate(const StepOperators& ops, int num_steps, const Eigen::VectorXd& u0,
                        const Eigen::VectorXd& u1,
                        const std::function<void(int, Eigen::VectorXd&)>& add_forcing,
                        const std::function<void(int, const Eigen::VectorXd&)>& observe);

struct SourceTerm {
  const Signal* signal;
  const PointSource* source;
};

struct LeapfrogResult {
  Signal receiver;
  std::optional<std::vector<Eigen::VectorXd>> history;
};

/// Zero initial state, forcing q^k = sum of signal_k * delta^k, receiver s_k = d . u^k.
LeapfrogResult leapfrog_solve(const StepOperators& ops, const TimeGrid& grid,
                              std::span<const SourceTerm> sources, const NodalVector& detector,
                              bool keep_history = false);

/// Interferer signal f and intruder signal g through the forward model.
LeapfrogResult leapfrog_solve(const ForwardModel& model, const Signal& f, const Signal& g,
                              bool keep_history = false);

/// E^k = 1/2 |u^k - u^{k-1}|_M^2 / dt^2 + (c^2 / 2) u^k' K u^{k-1}; entry 0 uses u^{-1} = u^0.
std::vector<double> energy_trace(std::span<const Eigen::VectorXd> history, const SparseSymMatrix& mass,
                                 const SparseSymMatrix& stiffness, double c, double dt);

// CSV with header `t,value`.
void write_signal_csv(const std::filesystem::path& path, const Signal& signal, double dt);
Signal read_signal_csv(const std::filesystem::path& path, double* dt = nullptr);

// WFLD1: magic, u64 node count, u64 step count, step-major little-endian f64.
void write_field_snapshots(const std::filesystem::path& path, std::span<const Eigen::VectorXd> history);
std::vector<Eigen::VectorXd> read_field_snapshots(const std::filesystem::path& path);

}  // namespace wavespoof
