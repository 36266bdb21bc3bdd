#include "wavespoof/wave_sim.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "wavespoof/binary_io.hpp"
#include "wavespoof/errors.hpp"

namespace wavespoof {

TimeGrid TimeGrid::make(double dt, int num_steps) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInput("TimeGrid: dt must be positive");
  if (num_steps < 2) throw InvalidInput("TimeGrid: need at least two steps");
  return TimeGrid{dt, num_steps};
}

StepOperators build_step_operators(const SparseSymMatrix& mass, const SparseSymMatrix& surface_mass,
                                   const SparseSymMatrix& stiffness, double c, double dt) {
  if (!(c > 0.0)) throw InvalidInput("wave speed must be positive");
  if (!(dt > 0.0)) throw InvalidInput("time step must be positive");
  StepOperators ops;
  ops.c = c;
  ops.dt = dt;
  ops.mass = mass;
  const double half = 0.5 * c * dt;
  ops.a_minus = mass - half * surface_mass;
  ops.a_zero = (c * c * dt * dt) * stiffness - 2.0 * mass;
  ops.a_plus = mass + half * surface_mass;
  ops.a_minus.makeCompressed();
  ops.a_zero.makeCompressed();
  ops.a_plus.makeCompressed();
  ops.a_plus_solver = SpdFactorization(ops.a_plus);
  return ops;
}

double cfl_estimate(const TriMesh& mesh, double c) { return mesh.min_edge_length() / (c * std::sqrt(2.0)); }

StepOperators build_step_operators(const TriMesh& mesh, double c, const TimeGrid& grid, Boundary boundary) {
  const double dt_max = cfl_estimate(mesh, c);
  if (grid.dt > dt_max) {
    std::cerr << "warning: dt = " << grid.dt << " exceeds the stability estimate " << dt_max << '\n';
  }
  const SparseSymMatrix mass = assemble_mass(mesh);
  const SparseSymMatrix stiffness = assemble_stiffness(mesh);
  SparseSymMatrix surface = boundary == Boundary::absorbing
                                ? assemble_surface_mass(mesh)
                                : SparseSymMatrix(mesh.num_nodes(), mesh.num_nodes());
  return build_step_operators(mass, surface, stiffness, c, grid.dt);
}

PointSource PointSource::from_nodal(const SparseSymMatrix& mass, std::vector<NodalVector> deltas) {
  if (deltas.empty()) throw InvalidInput("PointSource: no delta vectors");
  PointSource src;
  src.weighted.reserve(deltas.size());
  for (const auto& d : deltas) {
    if (d.size() != mass.rows()) throw InvalidInput("PointSource: delta length does not match mesh");
    src.weighted.push_back(mass * d);
  }
  src.deltas = std::move(deltas);
  return src;
}

PointSource PointSource::fixed(const TriMesh& mesh, const SparseSymMatrix& mass, const Point2& position,
                               double epsilon) {
  return from_nodal(mass, {mollified_delta(mesh, position, epsilon)});
}

PointSource PointSource::moving(const TriMesh& mesh, const SparseSymMatrix& mass,
                                std::span<const Point2> track, double epsilon) {
  std::vector<NodalVector> deltas;
  deltas.reserve(track.size());
  for (const auto& p : track) deltas.push_back(mollified_delta(mesh, p, epsilon));
  return from_nodal(mass, std::move(deltas));
}

namespace {

PointSource make_source(const TriMesh& mesh, const SparseSymMatrix& mass, const std::vector<Point2>& track,
                        double epsilon, int num_samples) {
  if (track.size() == 1) return PointSource::fixed(mesh, mass, track.front(), epsilon);
  if (static_cast<int>(track.size()) != num_samples) {
    throw InvalidInput("source track must have one position or K + 1 positions");
  }
  return PointSource::moving(mesh, mass, track, epsilon);
}

}  // namespace

ForwardModel build_forward_model(const TriMesh& mesh, const SimConfig& config, const TimeGrid& grid,
                                 Boundary boundary) {
  if (!(config.epsilon > 0.0)) throw InvalidInput("epsilon must be positive");
  ForwardModel model;
  model.mesh = mesh;
  model.grid = grid;
  model.ops = build_step_operators(mesh, config.c, grid, boundary);
  model.interferer = make_source(mesh, model.ops.mass, config.interferer_track, config.epsilon, grid.num_samples());
  model.intruder = make_source(mesh, model.ops.mass, config.intruder_track, config.epsilon, grid.num_samples());
  model.detector = receiver_weights(mesh, config.detector);
  return model;
}

void leapfrog_integrate(const StepOperators& ops, int num_steps, const Eigen::VectorXd& u0,
                        const Eigen::VectorXd& u1,
                        const std::function<void(int, Eigen::VectorXd&)>& add_forcing,
                        const std::function<void(int, const Eigen::VectorXd&)>& observe) {
  Eigen::VectorXd prev = u0;
  Eigen::VectorXd curr = u1;
  Eigen::VectorXd rhs(u0.size());
  if (observe) {
    observe(0, prev);
    observe(1, curr);
  }
  for (int k = 1; k < num_steps; ++k) {
    rhs.noalias() = -(ops.a_zero * curr);
    rhs.noalias() -= ops.a_minus * prev;
    if (add_forcing) add_forcing(k, rhs);
    Eigen::VectorXd next = ops.a_plus_solver.solve(rhs);
    prev.swap(curr);
    curr.swap(next);
    if (observe) observe(k + 1, curr);
  }
}

LeapfrogResult leapfrog_solve(const StepOperators& ops, const TimeGrid& grid,
                              std::span<const SourceTerm> sources, const NodalVector& detector,
                              bool keep_history) {
  const Eigen::Index n = ops.a_plus.rows();
  if (detector.size() != n) throw InvalidInput("leapfrog_solve: detector length does not match mesh");
  for (const auto& term : sources) {
    if (term.signal->size() != grid.num_samples()) {
      throw InvalidInput("leapfrog_solve: signal length must be K + 1");
    }
  }
  const double dt2 = grid.dt * grid.dt;
  LeapfrogResult result;
  result.receiver = Signal::Zero(grid.num_samples());
  if (keep_history) {
    result.history.emplace();
    result.history->reserve(static_cast<std::size_t>(grid.num_samples()));
  }
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  leapfrog_integrate(
      ops, grid.num_steps, zero, zero,
      [&](int k, Eigen::VectorXd& rhs) {
        if (k < kFirstForcedStep) return;
        for (const auto& term : sources) {
          const double amp = (*term.signal)[k];
          if (amp != 0.0) rhs.noalias() += (dt2 * amp) * term.source->weighted_at(k);
        }
      },
      [&](int k, const Eigen::VectorXd& u) {
        result.receiver[k] = detector.dot(u);
        if (keep_history) result.history->push_back(u);
      });
  return result;
}

LeapfrogResult leapfrog_solve(const ForwardModel& model, const Signal& f, const Signal& g, bool keep_history) {
  const SourceTerm terms[] = {{&f, &model.interferer}, {&g, &model.intruder}};
  return leapfrog_solve(model.ops, model.grid, terms, model.detector, keep_history);
}

std::vector<double> energy_trace(std::span<const Eigen::VectorXd> history, const SparseSymMatrix& mass,
                                 const SparseSymMatrix& stiffness, double c, double dt) {
  std::vector<double> energy;
  energy.reserve(history.size());
  for (std::size_t k = 0; k < history.size(); ++k) {
    const Eigen::VectorXd& u = history[k];
    const Eigen::VectorXd& u_prev = history[k == 0 ? 0 : k - 1];
    const Eigen::VectorXd du = u - u_prev;
    const double kinetic = 0.5 * du.dot(mass * du) / (dt * dt);
    const double potential = 0.5 * c * c * u.dot(stiffness * u_prev);
    energy.push_back(kinetic + potential);
  }
  return energy;
}

void write_signal_csv(const std::filesystem::path& path, const Signal& signal, double dt) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "t,value\n";
  out.precision(17);
  for (Eigen::Index k = 0; k < signal.size(); ++k) out << dt * static_cast<double>(k) << ',' << signal[k] << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Signal read_signal_csv(const std::filesystem::path& path, double* dt) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "t,value") throw InvalidInput("signal CSV must start with `t,value`: " + path.string());
  std::vector<double> times, values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw InvalidInput("malformed signal row in " + path.string());
    times.push_back(std::stod(line.substr(0, comma)));
    values.push_back(std::stod(line.substr(comma + 1)));
  }
  if (dt != nullptr) *dt = times.size() > 1 ? times[1] - times[0] : 0.0;
  return Eigen::Map<const Signal>(values.data(), static_cast<Eigen::Index>(values.size()));
}

void write_field_snapshots(const std::filesystem::path& path, std::span<const Eigen::VectorXd> history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const std::uint64_t nodes = history.empty() ? 0 : static_cast<std::uint64_t>(history.front().size());
  io::write_magic(out, "WFLD1");
  io::write_pod<std::uint64_t>(out, nodes);
  io::write_pod<std::uint64_t>(out, history.size());
  for (const auto& u : history) {
    if (static_cast<std::uint64_t>(u.size()) != nodes) throw InvalidInput("ragged field history");
    io::write_doubles(out, u.data(), nodes);
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<Eigen::VectorXd> read_field_snapshots(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  io::expect_magic(in, "WFLD1");
  const auto nodes = io::read_pod<std::uint64_t>(in);
  const auto steps = io::read_pod<std::uint64_t>(in);
  std::vector<Eigen::VectorXd> history(steps, Eigen::VectorXd(static_cast<Eigen::Index>(nodes)));
  for (auto& u : history) io::read_doubles(in, u.data(), nodes);
  return history;
}

}  // namespace wavespoof
