#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "chanflow/dataset.hpp"
#include "chanflow/kernels.hpp"

namespace chanflow {

enum class LossVariant { relative_mse, cell_weighted };

// Dense feed-forward regressor: tanh hidden layers, identity output.
struct MlpModel {
  std::vector<int> sizes;  // e.g. {202, 500, ..., 500, 4}
  std::vector<Matrix> weights;             // weights[l]: sizes[l+1] x sizes[l]
  std::vector<std::vector<double>> biases;
  Normalizer normalizer{};

  uint64_t seed = 0;
  long epochs_run = 0;
  double final_loss = 0.0;

  int n_layers() const { return static_cast<int>(weights.size()); }
  int input_size() const { return sizes.front(); }
  int output_size() const { return sizes.back(); }
};

// Glorot-uniform weights (seeded), zero biases.
MlpModel make_mlp(const std::vector<int>& sizes, uint64_t seed);

// Single-input forward pass. Throws DataError on a wrong input length.
std::vector<double> forward(const MlpModel& m, std::span<const double> input);

// Batch forward: X is (input_size x N) with one column per record.
Matrix forward_batch(const MlpModel& m, const Matrix& X, bool parallel = true);

// Training batch in normalized space. `weights` are the per-record cell areas
// used by the cell_weighted variant.
struct Batch {
  Matrix X;  // input_size x N
  Matrix T;  // output_size x N
  std::vector<double> weights;
};

Batch make_batch(const MlpModel& m, std::span<const StencilSample> samples);

// relative_mse:  sum ||pred - t||^2 / sum ||t||^2
// cell_weighted: sum A ||pred - t||^2 / sum A ||t||^2
// Throws NumericError when the denominator vanishes.
double loss(const MlpModel& m, const Batch& b, LossVariant variant, bool parallel = true);
// loss plus the L2 weight penalty l2 * sum w^2 (weights only, not biases).
double objective(const MlpModel& m, const Batch& b, LossVariant variant, double l2,
                 bool parallel = true);

struct Gradients {
  std::vector<Matrix> dW;
  std::vector<std::vector<double>> db;
};

// Exact gradients of objective() with respect to every weight and bias.
void backward(const MlpModel& m, const Batch& b, LossVariant variant, double l2,
              Gradients& out, bool parallel = true);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double lr = 1e-4;
  double l2 = 1e-8;
  long step = 0;
  std::vector<Matrix> mW, vW;
  std::vector<std::vector<double>> mb, vb;
};

AdamState make_adam_state(const MlpModel& m, double lr, double l2);
// Bias-corrected Adam update. Throws DataError on shape mismatch.
void adam_step(MlpModel& m, const Gradients& g, AdamState& s);

struct TrainConfig {
  long epochs = 50000;
  int hidden_layers = 10;
  int hidden_width = 500;
  double learning_rate = 1e-4;
  double l2 = 1e-8;
  uint64_t seed = 42;
  LossVariant variant = LossVariant::cell_weighted;
  int batch_size = 0;  // 0 = full batch
  bool parallel = true;
  long log_every = 0;
};

struct TrainResult {
  std::vector<double> loss_history;  // training loss per epoch
};

// Epoch loop over the dataset; stores the normalizer (dataset header, or
// freshly fitted) and training metadata in the model. Deterministic per seed.
// Throws NumericError when the loss diverges to NaN.
TrainResult train(MlpModel& m, const Dataset& ds, const TrainConfig& cfg);

void save_checkpoint(const MlpModel& m, const std::string& path);
MlpModel load_checkpoint(const std::string& path);

}  // namespace chanflow
