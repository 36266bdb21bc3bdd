#include "wavespoof/attack.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "wavespoof/errors.hpp"

namespace wavespoof {

namespace {

void require_finite(const Eigen::Ref<const Eigen::VectorXd>& v, const char* what) {
  if (!v.allFinite()) {
    Eigen::Index bad = 0;
    while (bad < v.size() && std::isfinite(v[bad])) ++bad;
    std::ostringstream msg;
    msg << what << " is not finite (first bad index " << bad << " of " << v.size() << ")";
    throw NumericError(msg.str());
  }
}

void check_problem(const AttackProblem& p) {
  if (p.green_i == nullptr || p.green_s == nullptr || p.plan == nullptr || p.model == nullptr) {
    throw InvalidInput("attack problem is missing an operator");
  }
}

double true_class_probability(double p, int label) { return label == 1 ? p : 1.0 - p; }

}  // namespace

AttackProblem AttackProblem::make(const GreenOperator& green_i, const GreenOperator& green_s, const Signal& g,
                                  const StftPlan& plan, const NullspaceProjector* projector,
                                  const ModelParams& model, int label, double floor_db,
                                  std::optional<ComplexMatrix> noise) {
  if (green_i.num_steps != green_s.num_steps || green_i.dt != green_s.dt) {
    throw InvalidInput("interferer and intruder operators disagree on the time grid");
  }
  if (g.size() != green_s.num_samples()) throw InvalidInput("intruder signal length must be K + 1");
  if (plan.signal_length != green_s.num_samples()) throw InvalidInput("STFT plan length must be K + 1");
  if (projector != nullptr && projector->dimension() != plan.signal_length) {
    throw InvalidInput("projector dimension must be K + 1");
  }
  if (model.rows != plan.num_freqs() || model.cols != plan.num_windows) {
    throw InvalidInput("classifier input shape does not match the STFT plan");
  }
  if (noise && (noise->rows() != plan.num_freqs() || noise->cols() != plan.num_windows)) {
    throw InvalidInput("noise term shape does not match the STFT plan");
  }
  if (label != 0 && label != 1) throw InvalidInput("label must be 0 or 1");
  AttackProblem p;
  p.green_i = &green_i;
  p.green_s = &green_s;
  p.intruder = g;
  p.intruder_response = apply_green(green_s, g);
  p.noise = std::move(noise);
  p.plan = &plan;
  p.projector = projector;
  p.model = &model;
  p.label = label;
  p.floor_db = floor_db;
  return p;
}

Evaluated evaluate_received(const AttackProblem& problem, const Signal& received) {
  check_problem(problem);
  require_finite(received, "received trace");
  Evaluated e;
  e.received = received;
  e.stft = stft(received, *problem.plan);
  if (problem.noise) e.stft += *problem.noise;
  e.db = db_from_stft(e.stft, problem.floor_db);
  e.logit = logit(*problem.model, normalize(e.db, problem.model->norm));
  if (!std::isfinite(e.logit)) throw NumericError("classifier logit is not finite");
  e.probability = std::clamp(sigmoid(e.logit), kProbabilityClamp, 1.0 - kProbabilityClamp);
  e.loss = bce_from_logit(e.logit, problem.label);
  return e;
}

Evaluated evaluate_interferer(const AttackProblem& problem, const Signal& f) {
  check_problem(problem);
  if (f.size() != problem.signal_length()) throw InvalidInput("interferer signal length must be K + 1");
  return evaluate_received(problem, apply_green(*problem.green_i, f) + problem.intruder_response);
}

double objective(const AttackProblem& problem, const Signal& f) { return evaluate_interferer(problem, f).loss; }

Signal received_sensitivity(const AttackProblem& problem, const Evaluated& at) {
  const ModelParams& model = *problem.model;
  Eigen::MatrixXd dlogit_dx;
  logit_and_input_gradient(model, normalize(at.db, model.norm), dlogit_dx);
  const double dloss_dlogit = sigmoid(at.logit) - static_cast<double>(problem.label);
  const Eigen::MatrixXd upstream = dlogit_dx * (dloss_dlogit / model.norm.scale);
  Signal r = spectrogram_vjp(at.stft, *problem.plan, upstream, problem.floor_db);
  require_finite(r, "receiver sensitivity");
  return r;
}

Signal gradient(const AttackProblem& problem, const Signal& f, double* value) {
  const Evaluated at = evaluate_interferer(problem, f);
  if (value != nullptr) *value = at.loss;
  Signal grad = apply_green_transpose(*problem.green_i, received_sensitivity(problem, at));
  require_finite(grad, "gradient");
  return grad;
}

double objective_naive(const AttackProblem& problem, const ForwardModel& model, const Signal& f) {
  check_problem(problem);
  return evaluate_received(problem, leapfrog_solve(model, f, problem.intruder).receiver).loss;
}

Signal adjoint_pullback(const ForwardModel& model, const Signal& sensitivity) {
  const int K = model.grid.num_steps;
  if (sensitivity.size() != K + 1) throw InvalidInput("adjoint_pullback: sensitivity length must be K + 1");
  const StepOperators& ops = model.ops;
  const Eigen::Index n = ops.a_plus.rows();
  // A+ lambda_c = d r_c - A0 lambda_{c+1} - A- lambda_{c+2}, c = K down to 2.
  std::vector<Eigen::VectorXd> lambda(static_cast<std::size_t>(K + 3), Eigen::VectorXd::Zero(n));
  Eigen::VectorXd rhs(n);
  for (int c = K; c >= kFirstForcedStep; --c) {
    rhs.noalias() = sensitivity[c] * model.detector;
    rhs.noalias() -= ops.a_zero * lambda[static_cast<std::size_t>(c + 1)];
    rhs.noalias() -= ops.a_minus * lambda[static_cast<std::size_t>(c + 2)];
    lambda[static_cast<std::size_t>(c)] = ops.a_plus_solver.solve(rhs);
  }
  const double dt2 = model.grid.dt * model.grid.dt;
  Signal grad = Signal::Zero(K + 1);
  for (int j = kFirstForcedStep; j < K; ++j) {
    grad[j] = dt2 * lambda[static_cast<std::size_t>(j + 1)].dot(model.interferer.weighted_at(j));
  }
  return grad;
}

Signal adjoint_gradient_oracle(const AttackProblem& problem, const ForwardModel& model, const Signal& f,
                               int* passes) {
  check_problem(problem);
  const Evaluated at = evaluate_received(problem, leapfrog_solve(model, f, problem.intruder).receiver);
  const Signal r = received_sensitivity(problem, at);
  Signal grad = adjoint_pullback(model, r);
  if (passes != nullptr) *passes = 2;
  return grad;
}

void AttackConfig::validate() const {
  if (check_every < 1 || max_iters < check_every) {
    throw InvalidInput("attack config needs max_iters >= check_every >= 1");
  }
  if (memory < 1) throw InvalidInput("attack memory must be at least 1");
  if (!(contraction > 0.0 && contraction < 1.0)) throw InvalidInput("line-search contraction must lie in (0, 1)");
  if (!(sufficient_increase > 0.0 && sufficient_increase < 1.0)) {
    throw InvalidInput("sufficient-increase parameter must lie in (0, 1)");
  }
  if (!(initial_step > 0.0)) throw InvalidInput("initial step must be positive");
}

double feasibility_residual(const ComplexMatrix& constraint, const Signal& f) {
  const double norm = f.norm();
  if (norm == 0.0) return 0.0;
  return (constraint * f.cast<std::complex<double>>()).norm() / norm;
}

namespace {

// Search variables: reduced coordinates z with f = N z, or f itself when no
// projector is attached.
struct Parameterization {
  const NullspaceProjector* projector;

  Signal to_signal(const Eigen::VectorXd& z) const { return projector ? Signal(projector->basis * z) : z; }
  Eigen::VectorXd to_reduced(const Signal& f) const {
    return projector ? Eigen::VectorXd(projector->basis.transpose() * f) : f;
  }
  Eigen::VectorXd pull_back(const Signal& grad_f) const { return to_reduced(grad_f); }
};

struct Iterate {
  Eigen::VectorXd x;  // search variables
  Signal f;
  Evaluated eval;
  Eigen::VectorXd grad;  // gradient of J with respect to x
};

Iterate make_iterate(const AttackProblem& problem, const Parameterization& param, Eigen::VectorXd x) {
  Iterate it;
  it.f = param.to_signal(x);
  it.x = std::move(x);
  it.eval = evaluate_interferer(problem, it.f);
  const Signal grad_f = apply_green_transpose(*problem.green_i, received_sensitivity(problem, it.eval));
  require_finite(grad_f, "gradient");
  it.grad = param.pull_back(grad_f);
  return it;
}

bool misclassified(const AttackProblem& problem, const Evaluated& e) { return predict(e.probability) != problem.label; }

// Two-loop recursion on phi = -J; returns a descent direction for phi.
Eigen::VectorXd lbfgs_direction(const Eigen::VectorXd& grad_phi, const std::deque<Eigen::VectorXd>& s,
                                const std::deque<Eigen::VectorXd>& y) {
  if (s.empty()) return -grad_phi / grad_phi.norm();
  const std::size_t m = s.size();
  std::vector<double> alpha(m), rho(m);
  Eigen::VectorXd q = grad_phi;
  for (std::size_t i = m; i-- > 0;) {
    rho[i] = 1.0 / y[i].dot(s[i]);
    alpha[i] = rho[i] * s[i].dot(q);
    q -= alpha[i] * y[i];
  }
  Eigen::VectorXd r = q * (s.back().dot(y.back()) / y.back().squaredNorm());
  for (std::size_t i = 0; i < m; ++i) {
    const double beta = rho[i] * y[i].dot(r);
    r += s[i] * (alpha[i] - beta);
  }
  return -r;
}

}  // namespace

AttackResult run_attack(const AttackProblem& problem, const AttackConfig& config) {
  check_problem(problem);
  config.validate();
  const Parameterization param{problem.projector};
  const bool projected = config.method == AttackMethod::projected_gradient;
  const int n = problem.signal_length();

  AttackResult result;
  const Evaluated clean = evaluate_interferer(problem, Signal::Zero(n));
  result.clean_confidence = true_class_probability(clean.probability, problem.label);
  result.clean = Spectrogram{clean.db, problem.floor_db};

  Eigen::VectorXd x0;
  if (config.initial_f) {
    if (config.initial_f->size() != n) throw InvalidInput("initial interferer length must be K + 1");
    // Map the start onto the feasible set.
    x0 = projected ? param.to_signal(param.to_reduced(*config.initial_f)) : param.to_reduced(*config.initial_f);
  } else {
    x0 = Eigen::VectorXd::Zero(projected || !problem.projector ? n : problem.projector->rank());
  }
  auto x_to_iterate = [&](Eigen::VectorXd x) {
    if (projected) {
      Iterate it;
      it.f = std::move(x);
      it.x = it.f;
      it.eval = evaluate_interferer(problem, it.f);
      const Signal grad_f = apply_green_transpose(*problem.green_i, received_sensitivity(problem, it.eval));
      require_finite(grad_f, "gradient");
      it.grad = problem.projector ? Signal(problem.projector->basis * (problem.projector->basis.transpose() * grad_f))
                                  : grad_f;
      return it;
    }
    return make_iterate(problem, param, std::move(x));
  };

  Iterate cur = x_to_iterate(x0);
  result.objective_history.push_back(cur.eval.loss);

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  double last_step = config.initial_step;
  int iter = 0;
  for (;; ++iter) {
    if (iter % config.check_every == 0 && misclassified(problem, cur.eval)) {
      result.success = true;
      break;
    }
    if (iter >= config.max_iters) break;

    const Eigen::VectorXd grad_phi = -cur.grad;
    const double gnorm = grad_phi.norm();
    if (!(gnorm > config.min_gradient)) {
      result.diagnostics = "no ascent direction: gradient norm " + std::to_string(gnorm);
      break;
    }

    bool accepted = false;
    Iterate next;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      Eigen::VectorXd dir;
      double alpha = config.initial_step;
      if (projected) {
        dir = -grad_phi / gnorm;
        alpha = attempt == 0 ? std::max(config.initial_step, 2.0 * last_step) : config.initial_step;
      } else {
        dir = lbfgs_direction(grad_phi, s_hist, y_hist);
        if (!(grad_phi.dot(dir) < 0.0)) {
          s_hist.clear();
          y_hist.clear();
          dir = -grad_phi / gnorm;
        }
      }
      const double slope = grad_phi.dot(dir);
      for (int bt = 0; bt < config.max_backtracks; ++bt, alpha *= config.contraction) {
        Iterate trial = x_to_iterate(cur.x + alpha * dir);
        const double phi_trial = -trial.eval.loss;
        if (phi_trial <= -cur.eval.loss + config.sufficient_increase * alpha * slope) {
          next = std::move(trial);
          accepted = true;
          last_step = alpha;
          break;
        }
      }
      if (!accepted) {
        s_hist.clear();
        y_hist.clear();
      }
    }
    if (!accepted) {
      result.diagnostics = "line search failed at iteration " + std::to_string(iter) + " (gradient norm " +
                           std::to_string(gnorm) + ")";
      break;
    }

    if (!projected) {
      Eigen::VectorXd s = next.x - cur.x;
      Eigen::VectorXd y = cur.grad - next.grad;  // change in grad phi
      const double sy = s.dot(y);
      if (sy > 1e-12 * s.norm() * y.norm()) {
        s_hist.push_back(std::move(s));
        y_hist.push_back(std::move(y));
        if (static_cast<int>(s_hist.size()) > config.memory) {
          s_hist.pop_front();
          y_hist.pop_front();
        }
      }
    }
    cur = std::move(next);
    result.objective_history.push_back(cur.eval.loss);
  }
  if (!result.success && misclassified(problem, cur.eval)) result.success = true;

  result.iterations = iter;
  result.f_star = cur.f;
  result.final_confidence = true_class_probability(cur.eval.probability, problem.label);
  result.perturbed = Spectrogram{cur.eval.db, problem.floor_db};
  const double gmax = problem.intruder.cwiseAbs().maxCoeff();
  const double fmax = result.f_star.size() > 0 ? result.f_star.cwiseAbs().maxCoeff() : 0.0;
  result.amplitude_ratio = gmax > 0.0 ? fmax / gmax : 0.0;
  return result;
}

}  // namespace wavespoof
