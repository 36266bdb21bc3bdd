#include "wavespoof/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "wavespoof/binary_io.hpp"
#include "wavespoof/errors.hpp"
#include "wavespoof/random.hpp"

namespace wavespoof {

SpectrogramTensor normalize(const Eigen::MatrixXd& db, const Normalization& norm) {
  if (!(norm.scale > 0.0)) throw InvalidInput("normalization scale must be positive");
  return SpectrogramTensor{(db.array() - norm.shift) / norm.scale, norm};
}

Eigen::MatrixXd denormalize(const SpectrogramTensor& x) {
  return (x.values.array() * x.norm.scale + x.norm.shift).matrix();
}

Normalization fit_normalization(const std::vector<Eigen::MatrixXd>& spectrograms) {
  double sum = 0.0;
  double count = 0.0;
  for (const auto& s : spectrograms) {
    sum += s.sum();
    count += static_cast<double>(s.size());
  }
  if (count == 0.0) throw InvalidInput("fit_normalization: no data");
  const double mean = sum / count;
  double var = 0.0;
  for (const auto& s : spectrograms) var += (s.array() - mean).square().sum();
  const double stddev = std::sqrt(var / count);
  return Normalization{mean, stddev > 0.0 ? stddev : 1.0};
}

Tensor Tensor::zeros(std::vector<int> shape) {
  const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                        [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
  return Tensor{std::move(shape), std::vector<double>(n, 0.0)};
}

std::vector<Tensor*> ModelParams::tensors() { return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &dense_w, &dense_b}; }

std::vector<const Tensor*> ModelParams::tensors() const {
  return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &dense_w, &dense_b};
}

std::size_t ModelParams::num_parameters() const {
  std::size_t n = 0;
  for (const Tensor* t : tensors()) n += t->size();
  return n;
}

ModelParams make_model(int rows, int cols, int channels1, int channels2, double leaky_slope) {
  if (rows < 2 || cols < 2 || channels1 < 1 || channels2 < 1) throw InvalidInput("make_model: bad dimensions");
  ModelParams m;
  m.rows = rows;
  m.cols = cols;
  m.channels1 = channels1;
  m.channels2 = channels2;
  m.leaky_slope = leaky_slope;
  m.conv1_w = Tensor::zeros({channels1, 1, 3, 3});
  m.conv1_b = Tensor::zeros({channels1});
  m.conv2_w = Tensor::zeros({channels2, channels1, 3, 3});
  m.conv2_b = Tensor::zeros({channels2});
  m.dense_w = Tensor::zeros({channels2 * m.pooled_rows()});
  m.dense_b = Tensor::zeros({1});
  return m;
}

void initialize(ModelParams& model, std::uint64_t seed) {
  Rng rng(seed);
  auto fill = [&rng](Tensor& t, double fan_in) {
    const double bound = std::sqrt(6.0 / fan_in);
    for (double& v : t.data) v = rng.uniform(-bound, bound);
  };
  fill(model.conv1_w, 9.0);
  fill(model.conv2_w, 9.0 * model.channels1);
  fill(model.dense_w, static_cast<double>(model.dense_w.size()));
  for (Tensor* b : {&model.conv1_b, &model.conv2_b, &model.dense_b}) std::fill(b->data.begin(), b->data.end(), 0.0);
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double bce_loss(double p, int y) {
  p = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return y == 1 ? -std::log(p) : -std::log1p(-p);
}

double bce_from_logit(double z, int y) {
  // softplus(z) - y z, written to avoid overflow for large |z|.
  const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return softplus - (y == 1 ? z : 0.0);
}

int predict(double p) { return p > 0.5 ? 1 : 0; }

namespace {

// Activations are stored channel-major: index (c * rows + r) * cols + col.
struct Activations {
  std::vector<double> a1, h1, p1, a2, h2, features;
  double logit = 0.0;
};

void conv3x3_forward(const double* in, int cin, int rows, int cols, const Tensor& w, const Tensor& b, int cout,
                     double* out) {
  const std::size_t plane = static_cast<std::size_t>(rows) * cols;
  for (int o = 0; o < cout; ++o) {
    double* dst = out + o * plane;
    std::fill(dst, dst + plane, b.data[static_cast<std::size_t>(o)]);
    for (int i = 0; i < cin; ++i) {
      const double* src = in + i * plane;
      const double* k = &w.data[(static_cast<std::size_t>(o) * cin + i) * 9];
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const double kv = k[(dr + 1) * 3 + (dc + 1)];
          const int r0 = std::max(0, -dr), r1 = std::min(rows, rows - dr);
          const int c0 = std::max(0, -dc), c1 = std::min(cols, cols - dc);
          for (int r = r0; r < r1; ++r) {
            double* drow = dst + static_cast<std::size_t>(r) * cols;
            const double* srow = src + static_cast<std::size_t>(r + dr) * cols + dc;
            for (int c = c0; c < c1; ++c) drow[c] += kv * srow[c];
          }
        }
      }
    }
  }
}

// Accumulates weight/bias gradients; writes the input gradient when `din` is set.
void conv3x3_backward(const double* in, int cin, int rows, int cols, const Tensor& w, int cout, const double* dout,
                      Tensor& dw, Tensor& db, double* din) {
  const std::size_t plane = static_cast<std::size_t>(rows) * cols;
  if (din != nullptr) std::fill(din, din + cin * plane, 0.0);
  for (int o = 0; o < cout; ++o) {
    const double* g = dout + o * plane;
    db.data[static_cast<std::size_t>(o)] += std::accumulate(g, g + plane, 0.0);
    for (int i = 0; i < cin; ++i) {
      const double* src = in + i * plane;
      const std::size_t kbase = (static_cast<std::size_t>(o) * cin + i) * 9;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const std::size_t kidx = kbase + static_cast<std::size_t>((dr + 1) * 3 + (dc + 1));
          const double kv = w.data[kidx];
          const int r0 = std::max(0, -dr), r1 = std::min(rows, rows - dr);
          const int c0 = std::max(0, -dc), c1 = std::min(cols, cols - dc);
          double acc = 0.0;
          for (int r = r0; r < r1; ++r) {
            const double* grow = g + static_cast<std::size_t>(r) * cols;
            const double* srow = src + static_cast<std::size_t>(r + dr) * cols + dc;
            for (int c = c0; c < c1; ++c) acc += grow[c] * srow[c];
            if (din != nullptr) {
              double* irow = din + i * plane + static_cast<std::size_t>(r + dr) * cols + dc;
              for (int c = c0; c < c1; ++c) irow[c] += kv * grow[c];
            }
          }
          dw.data[kidx] += acc;
        }
      }
    }
  }
}

void check_input(const ModelParams& model, const Eigen::MatrixXd& x) {
  if (x.rows() != model.rows || x.cols() != model.cols) {
    throw InvalidInput("classifier input is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                       ", model expects " + std::to_string(model.rows) + "x" + std::to_string(model.cols));
  }
}

Activations run_forward(const ModelParams& m, const Eigen::MatrixXd& x) {
  check_input(m, x);
  const int R = m.rows, C = m.cols, R2 = m.pooled_rows(), C2 = m.pooled_cols();
  const std::size_t plane = static_cast<std::size_t>(R) * C;
  const std::size_t plane2 = static_cast<std::size_t>(R2) * C2;
  Activations act;

  std::vector<double> input(plane);
  for (int r = 0; r < R; ++r) {
    for (int c = 0; c < C; ++c) input[static_cast<std::size_t>(r) * C + c] = x(r, c);
  }

  act.a1.resize(m.channels1 * plane);
  conv3x3_forward(input.data(), 1, R, C, m.conv1_w, m.conv1_b, m.channels1, act.a1.data());
  act.h1.resize(act.a1.size());
  for (std::size_t i = 0; i < act.a1.size(); ++i) act.h1[i] = act.a1[i] > 0.0 ? act.a1[i] : m.leaky_slope * act.a1[i];

  act.p1.assign(m.channels1 * plane2, 0.0);
  for (int ch = 0; ch < m.channels1; ++ch) {
    for (int r = 0; r < R2; ++r) {
      for (int c = 0; c < C2; ++c) {
        const double* base = &act.h1[ch * plane + static_cast<std::size_t>(2 * r) * C + 2 * c];
        act.p1[ch * plane2 + static_cast<std::size_t>(r) * C2 + c] = 0.25 * (base[0] + base[1] + base[C] + base[C + 1]);
      }
    }
  }

  act.a2.resize(m.channels2 * plane2);
  conv3x3_forward(act.p1.data(), m.channels1, R2, C2, m.conv2_w, m.conv2_b, m.channels2, act.a2.data());
  act.h2.resize(act.a2.size());
  for (std::size_t i = 0; i < act.a2.size(); ++i) act.h2[i] = act.a2[i] > 0.0 ? act.a2[i] : m.leaky_slope * act.a2[i];

  act.features.assign(static_cast<std::size_t>(m.channels2) * R2, 0.0);
  for (int ch = 0; ch < m.channels2; ++ch) {
    for (int r = 0; r < R2; ++r) {
      const double* row = &act.h2[ch * plane2 + static_cast<std::size_t>(r) * C2];
      act.features[static_cast<std::size_t>(ch) * R2 + r] = std::accumulate(row, row + C2, 0.0) / C2;
    }
  }
  act.logit = m.dense_b.data[0] + std::inner_product(act.features.begin(), act.features.end(), m.dense_w.data.begin(), 0.0);
  return act;
}

// Backpropagates d(loss)/d(logit) = upstream. `grads` may be null (input gradient only).
Eigen::MatrixXd run_backward(const ModelParams& m, const Eigen::MatrixXd& x, const Activations& act, double upstream,
                             ModelParams* grads) {
  const int R = m.rows, C = m.cols, R2 = m.pooled_rows(), C2 = m.pooled_cols();
  const std::size_t plane = static_cast<std::size_t>(R) * C;
  const std::size_t plane2 = static_cast<std::size_t>(R2) * C2;

  ModelParams scratch;
  ModelParams& g = grads != nullptr ? *grads : scratch;
  if (grads == nullptr) g = make_model(R, C, m.channels1, m.channels2, m.leaky_slope);

  g.dense_b.data[0] += upstream;
  for (std::size_t i = 0; i < act.features.size(); ++i) g.dense_w.data[i] += upstream * act.features[i];

  std::vector<double> da2(act.a2.size());
  for (int ch = 0; ch < m.channels2; ++ch) {
    for (int r = 0; r < R2; ++r) {
      const double dfeat = upstream * m.dense_w.data[static_cast<std::size_t>(ch) * R2 + r] / C2;
      for (int c = 0; c < C2; ++c) {
        const std::size_t idx = ch * plane2 + static_cast<std::size_t>(r) * C2 + c;
        da2[idx] = act.a2[idx] > 0.0 ? dfeat : m.leaky_slope * dfeat;
      }
    }
  }

  std::vector<double> dp1(act.p1.size());
  conv3x3_backward(act.p1.data(), m.channels1, R2, C2, m.conv2_w, m.channels2, da2.data(), g.conv2_w, g.conv2_b,
                   dp1.data());

  std::vector<double> da1(act.a1.size(), 0.0);
  for (int ch = 0; ch < m.channels1; ++ch) {
    for (int r = 0; r < R2; ++r) {
      for (int c = 0; c < C2; ++c) {
        const double d = 0.25 * dp1[ch * plane2 + static_cast<std::size_t>(r) * C2 + c];
        for (int a = 0; a < 2; ++a) {
          for (int b = 0; b < 2; ++b) {
            const std::size_t idx = ch * plane + static_cast<std::size_t>(2 * r + a) * C + 2 * c + b;
            da1[idx] = act.a1[idx] > 0.0 ? d : m.leaky_slope * d;
          }
        }
      }
    }
  }

  std::vector<double> input(plane);
  for (int r = 0; r < R; ++r) {
    for (int c = 0; c < C; ++c) input[static_cast<std::size_t>(r) * C + c] = x(r, c);
  }
  std::vector<double> dx(plane);
  conv3x3_backward(input.data(), 1, R, C, m.conv1_w, m.channels1, da1.data(), g.conv1_w, g.conv1_b, dx.data());

  Eigen::MatrixXd dinput(R, C);
  for (int r = 0; r < R; ++r) {
    for (int c = 0; c < C; ++c) dinput(r, c) = dx[static_cast<std::size_t>(r) * C + c];
  }
  return dinput;
}

}  // namespace

double logit(const ModelParams& model, const SpectrogramTensor& x) { return run_forward(model, x.values).logit; }

double forward(const ModelParams& model, const SpectrogramTensor& x) {
  return std::clamp(sigmoid(logit(model, x)), kProbabilityClamp, 1.0 - kProbabilityClamp);
}

double forward_db(const ModelParams& model, const Eigen::MatrixXd& db) { return forward(model, normalize(db, model.norm)); }

Gradients backward(const ModelParams& model, const SpectrogramTensor& x, int y) {
  const Activations act = run_forward(model, x.values);
  Gradients out;
  out.params = make_model(model.rows, model.cols, model.channels1, model.channels2, model.leaky_slope);
  out.params.norm = model.norm;
  const double p = sigmoid(act.logit);
  out.input = run_backward(model, x.values, act, p - static_cast<double>(y), &out.params);
  out.loss = bce_from_logit(act.logit, y);
  out.probability = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return out;
}

double logit_and_input_gradient(const ModelParams& model, const SpectrogramTensor& x, Eigen::MatrixXd& grad) {
  const Activations act = run_forward(model, x.values);
  grad = run_backward(model, x.values, act, 1.0, nullptr);
  return act.logit;
}

Gradients batch_gradient(const ModelParams& model, const std::vector<LabeledExample>& batch) {
  if (batch.empty()) throw InvalidInput("batch_gradient: empty batch");
  Gradients total;
  total.params = make_model(model.rows, model.cols, model.channels1, model.channels2, model.leaky_slope);
  total.params.norm = model.norm;
  total.input = Eigen::MatrixXd::Zero(model.rows, model.cols);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    const Gradients g = backward(model, normalize(ex.db, model.norm), ex.label);
    auto dst = total.params.tensors();
    auto src = g.params.tensors();
    for (std::size_t t = 0; t < dst.size(); ++t) {
      for (std::size_t i = 0; i < dst[t]->size(); ++i) dst[t]->data[i] += inv * src[t]->data[i];
    }
    total.loss += inv * g.loss;
  }
  return total;
}

Evaluation evaluate(const ModelParams& model, const std::vector<LabeledExample>& dataset) {
  if (dataset.empty()) throw InvalidInput("evaluate: empty dataset");
  Evaluation ev;
  for (const auto& ex : dataset) {
    const SpectrogramTensor x = normalize(ex.db, model.norm);
    const double z = logit(model, x);
    ev.mean_loss += bce_from_logit(z, ex.label);
    const int pred = predict(std::clamp(sigmoid(z), kProbabilityClamp, 1.0 - kProbabilityClamp));
    if (pred == 1 && ex.label == 1) ++ev.true_positive;
    if (pred == 0 && ex.label == 0) ++ev.true_negative;
    if (pred == 1 && ex.label == 0) ++ev.false_positive;
    if (pred == 0 && ex.label == 1) ++ev.false_negative;
  }
  const auto n = static_cast<double>(dataset.size());
  ev.mean_loss /= n;
  ev.accuracy = (ev.true_positive + ev.true_negative) / n;
  return ev;
}

TrainResult train(const std::vector<LabeledExample>& train_set, const std::vector<LabeledExample>& test_set,
                  const TrainConfig& config) {
  if (train_set.empty()) throw InvalidInput("train: empty training set");
  if (test_set.empty()) throw InvalidInput("train: empty test set");
  const bool has_pos = std::any_of(train_set.begin(), train_set.end(), [](const auto& e) { return e.label == 1; });
  const bool has_neg = std::any_of(train_set.begin(), train_set.end(), [](const auto& e) { return e.label == 0; });
  if (!has_pos || !has_neg) throw InvalidInput("train: training set must contain both classes");
  if (config.batch_size < 1 || config.epochs < 1) throw InvalidInput("train: bad batch size or epoch count");

  const auto rows = static_cast<int>(train_set.front().db.rows());
  const auto cols = static_cast<int>(train_set.front().db.cols());
  ModelParams model = make_model(rows, cols, config.channels1, config.channels2, config.leaky_slope);
  initialize(model, derive_seed(config.seed, 1));
  {
    std::vector<Eigen::MatrixXd> all;
    all.reserve(train_set.size());
    for (const auto& ex : train_set) all.push_back(ex.db);
    model.norm = fit_normalization(all);
  }

  ModelParams velocity = make_model(rows, cols, config.channels1, config.channels2, config.leaky_slope);
  Rng shuffle_rng(derive_seed(config.seed, 2));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  result.model = model;
  double best_test = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<LabeledExample> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) batch.push_back(train_set[order[i]]);
      const Gradients g = batch_gradient(model, batch);
      epoch_loss += g.loss * static_cast<double>(stop - start);
      auto params = model.tensors();
      auto vel = velocity.tensors();
      auto grad = g.params.tensors();
      for (std::size_t t = 0; t < params.size(); ++t) {
        for (std::size_t i = 0; i < params[t]->size(); ++i) {
          vel[t]->data[i] = config.momentum * vel[t]->data[i] - config.learning_rate * grad[t]->data[i];
          params[t]->data[i] += vel[t]->data[i];
        }
      }
    }
    const Evaluation test = evaluate(model, test_set);
    result.log.push_back({epoch, epoch_loss / static_cast<double>(order.size()), test.mean_loss, test.accuracy});
    if (test.mean_loss < best_test) {
      best_test = test.mean_loss;
      result.model = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  return result;
}

void write_training_log(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "epoch,train_loss,test_loss,test_acc\n";
  out.precision(10);
  for (const auto& e : log) out << e.epoch << ',' << e.train_loss << ',' << e.test_loss << ',' << e.test_accuracy << '\n';
}

void write_model(const std::filesystem::path& path, const ModelParams& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  io::write_magic(out, "WNET1");
  for (int v : {model.rows, model.cols, model.channels1, model.channels2}) {
    io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  }
  io::write_pod<double>(out, model.leaky_slope);
  const auto tensors = model.tensors();
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const Tensor* t : tensors) {
    io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t->shape.size()));
    for (int d : t->shape) io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  }
  for (const Tensor* t : tensors) io::write_doubles(out, t->data.data(), t->size());
  io::write_pod<double>(out, model.norm.shift);
  io::write_pod<double>(out, model.norm.scale);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ModelParams read_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  io::expect_magic(in, "WNET1");
  const auto rows = static_cast<int>(io::read_pod<std::uint32_t>(in));
  const auto cols = static_cast<int>(io::read_pod<std::uint32_t>(in));
  const auto c1 = static_cast<int>(io::read_pod<std::uint32_t>(in));
  const auto c2 = static_cast<int>(io::read_pod<std::uint32_t>(in));
  const double slope = io::read_pod<double>(in);
  ModelParams model = make_model(rows, cols, c1, c2, slope);
  auto tensors = model.tensors();
  if (io::read_pod<std::uint32_t>(in) != tensors.size()) throw InvalidInput("WNET1: unexpected tensor count");
  for (Tensor* t : tensors) {
    const auto rank = io::read_pod<std::uint32_t>(in);
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(io::read_pod<std::uint32_t>(in));
    if (shape != t->shape) throw InvalidInput("WNET1: shape table does not match the layer layout");
  }
  for (Tensor* t : tensors) io::read_doubles(in, t->data.data(), t->size());
  model.norm.shift = io::read_pod<double>(in);
  model.norm.scale = io::read_pod<double>(in);
  return model;
}

}  // namespace wavespoof
