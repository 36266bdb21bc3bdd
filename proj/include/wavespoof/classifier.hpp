#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace wavespoof {

/// Global affine map from dB spectrograms to network inputs: x = (db - shift) / scale.
struct Normalization {
  double shift = 0.0;
  double scale = 1.0;
};

struct SpectrogramTensor {
  Eigen::MatrixXd values;  // normalized, L x M
  Normalization norm;
};

SpectrogramTensor normalize(const Eigen::MatrixXd& db, const Normalization& norm);
Eigen::MatrixXd denormalize(const SpectrogramTensor& x);

/// Zero-mean, unit-variance normalization over all entries of all spectrograms.
Normalization fit_normalization(const std::vector<Eigen::MatrixXd>& spectrograms);

struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  static Tensor zeros(std::vector<int> shape);
  std::size_t size() const { return data.size(); }
};

/// conv 3x3 (1 -> c1) -> leaky -> avg-pool 2x2 -> conv 3x3 (c1 -> c2) -> leaky
/// -> mean over the time axis -> dense -> sigmoid.
///
/// Convolutions are zero-padded ("same"); pooling floors odd sizes. The
/// time-axis average leaves one feature per (channel, pooled frequency row).
struct ModelParams {
  int rows = 0;  // L
  int cols = 0;  // M
  int channels1 = 8;
  int channels2 = 16;
  double leaky_slope = 0.01;
  Normalization norm;

  Tensor conv1_w;  // [c1, 1, 3, 3]
  Tensor conv1_b;  // [c1]
  Tensor conv2_w;  // [c2, c1, 3, 3]
  Tensor conv2_b;  // [c2]
  Tensor dense_w;  // [c2 * rows / 2]
  Tensor dense_b;  // [1]

  int pooled_rows() const { return rows / 2; }
  int pooled_cols() const { return cols / 2; }

  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  std::size_t num_parameters() const;
};

/// Zero-filled parameters of the right shapes.
ModelParams make_model(int rows, int cols, int channels1 = 8, int channels2 = 16, double leaky_slope = 0.01);

/// Uniform(-sqrt(6 / fan_in), sqrt(6 / fan_in)) weights, zero biases.
void initialize(ModelParams& model, std::uint64_t seed);

inline constexpr double kProbabilityClamp = 1e-12;

double sigmoid(double z);
double logit(const ModelParams& model, const SpectrogramTensor& x);

/// sigmoid(logit) clamped to [1e-12, 1 - 1e-12].
double forward(const ModelParams& model, const SpectrogramTensor& x);
double forward_db(const ModelParams& model, const Eigen::MatrixXd& db);

/// -[y ln p + (1 - y) ln(1 - p)] with p clamped.
double bce_loss(double p, int y);

/// The same loss computed stably from the logit (no clamping).
double bce_from_logit(double z, int y);

struct Gradients {
  ModelParams params;          // same shapes as the model
  Eigen::MatrixXd input;       // dL/dx (normalized input)
  double loss = 0.0;
  double probability = 0.0;
};

/// Exact gradients of bce_from_logit(logit(model, x), y).
Gradients backward(const ModelParams& model, const SpectrogramTensor& x, int y);

/// d logit / d x only (no parameter gradients).
double logit_and_input_gradient(const ModelParams& model, const SpectrogramTensor& x, Eigen::MatrixXd& grad);

struct LabeledExample {
  Eigen::MatrixXd db;  // L x M spectrogram in dB
  int label = 0;       // 1 = malicious
  double frequency_hz = 0.0;
};

struct TrainConfig {
  double learning_rate = 0.02;
  double momentum = 0.9;
  int batch_size = 16;
  int epochs = 60;
  int patience = 10;
  std::uint64_t seed = 0;
  int channels1 = 8;
  int channels2 = 16;
  double leaky_slope = 0.01;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
};

struct TrainResult {
  ModelParams model;
  std::vector<EpochLog> log;
  int best_epoch = 0;
};

/// Minibatch SGD with momentum on mean binary cross-entropy; stops once the
/// test loss has not improved for `patience` epochs and returns the best
/// parameters seen on the test set.
TrainResult train(const std::vector<LabeledExample>& train_set, const std::vector<LabeledExample>& test_set,
                  const TrainConfig& config);

/// Mean of per-example gradients over a batch.
Gradients batch_gradient(const ModelParams& model, const std::vector<LabeledExample>& batch);

struct Evaluation {
  double accuracy = 0.0;
  double mean_loss = 0.0;
  int true_positive = 0;
  int true_negative = 0;
  int false_positive = 0;
  int false_negative = 0;
};

/// A prediction is malicious iff p > 0.5 (p = 0.5 counts as benign).
int predict(double p);
Evaluation evaluate(const ModelParams& model, const std::vector<LabeledExample>& dataset);

void write_training_log(const std::filesystem::path& path, const std::vector<EpochLog>& log);

// WNET1: magic; u32 rows, cols, c1, c2; f64 slope; u32 tensor count; per tensor
// u32 rank and u32 dims (the shape table); then every tensor's f64 data; then
// f64 shift and scale of the input normalization.
void write_model(const std::filesystem::path& path, const ModelParams& model);
ModelParams read_model(const std::filesystem::path& path);

}  // namespace wavespoof
