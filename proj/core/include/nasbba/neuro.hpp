#pragma once

// Recurrent forecaster trained from scratch: stacked vanilla LSTM layers, dense
// layers and a single-unit output, trained by mini-batch gradient descent with
// backpropagation through time.
//
// LSTM gate rows are stacked as [input; forget; candidate; output]:
//   z = W x_t + U h_{t-1} + b
//   i = sigm(z_i), f = sigm(z_f), g = tanh(z_g), o = sigm(z_o)
//   c_t = f * c_{t-1} + i * g,  h_t = o * tanh(c_t)

#include "nasbba/architecture.hpp"
#include "nasbba/dataset.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace nasbba::neuro {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

struct LstmLayer
{
  std::size_t input_size = 0;
  std::size_t units = 0;
  /// Emit the whole hidden sequence (feeding another LSTM) or only the final state.
  bool return_sequences = false;
  Matrix W; ///< 4H x input
  Matrix U; ///< 4H x H
  Matrix b; ///< 4H x 1
};

struct DenseLayer
{
  std::size_t input_size = 0;
  std::size_t units = 0;
  Activation activation = Activation::relu;
  Matrix W; ///< units x input
  Matrix b; ///< units x 1
};

using Layer = std::variant<LstmLayer, DenseLayer>;

class Network
{
public:
  Network() = default;

  /// Instantiates the present layers of `spec`. Weights are uniform in
  /// +-sqrt(6 / (fan_in + fan_out)), biases zero, forget-gate bias 1.
  static Network build(const ArchitectureSpec& spec, std::size_t feature_count, std::uint64_t seed);

  /// Assembles a network from explicit layers; checks that dimensions chain.
  /// A leading dense layer consumes the last timestep's features.
  static Network from_layers(std::vector<Layer> layers, std::size_t feature_count, std::size_t timesteps);

  std::size_t feature_count() const noexcept { return feature_count_; }
  std::size_t timesteps() const noexcept { return timesteps_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::vector<Layer>& layers() noexcept { return layers_; }

  /// Parameter blocks in layer order: LSTM (W, U, b), Dense (W, b).
  std::vector<const Matrix*> blocks() const;
  std::vector<Matrix*> blocks();
  /// True for weight matrices (regularized), false for biases.
  std::vector<bool> block_is_weight() const;

  std::size_t parameter_count() const;
  /// Blocks concatenated in order, each flattened row-major.
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> values);

  /// Sum of squared weight-matrix entries (biases excluded).
  double weight_norm_sq() const;
  bool all_finite() const;

  std::string describe() const;

private:
  void check_dimensions() const;

  std::vector<Layer> layers_;
  std::size_t feature_count_ = 0;
  std::size_t timesteps_ = 0;
};

struct CellState
{
  Vector h;
  Vector c;
};

/// One LSTM step for a single sample.
CellState lstm_cell_step(const LstmLayer& layer, const Vector& x, const Vector& h_prev, const Vector& c_prev);

/// Predictions, one per sample. Throws std::invalid_argument on shape mismatch.
/// In training mode, inverted dropout with `dropout_rate` is applied to LSTM outputs.
std::vector<double> forward(const Network& net,
                            const data::FramedDataset& batch,
                            bool training = false,
                            double dropout_rate = 0.0,
                            Rng* rng = nullptr);

/// Inference-mode predictions.
std::vector<double> predict(const Network& net, const data::FramedDataset& batch);

double mse(std::span<const double> y, std::span<const double> yhat);
double rmse(std::span<const double> y, std::span<const double> yhat);

struct TrainConfig
{
  std::size_t epochs = 200;
  /// Drop probability applied to each LSTM layer's output.
  double dropout_rate = 0.8;
  double l2_lambda = 0.01;
  double learning_rate = 0.01;
  std::size_t batch_size = 32;
  /// Global-norm clipping threshold; 0 disables clipping.
  double grad_clip = 1.0;
  bool shuffle = true;
  std::uint64_t rng_seed = 1;

  std::vector<std::string> problems() const;
  void validate() const;
};

struct Metrics
{
  /// Data MSE averaged over each epoch's mini-batches (training mode).
  std::vector<double> train_loss_history;
  /// Inference-mode MSE on the validation set after each epoch, when one is supplied.
  std::vector<double> val_loss_history;
  double final_train_rmse = 0.0;
  double validation_rmse = 0.0;
};

class DivergedError : public std::runtime_error
{
public:
  DivergedError(std::size_t epoch, Metrics partial);
  std::size_t epoch() const noexcept { return epoch_; }
  const Metrics& partial() const noexcept { return partial_; }

private:
  std::size_t epoch_;
  Metrics partial_;
};

struct TrainResult
{
  Network network;
  Metrics metrics;
};

/// Loss = MSE + l2_lambda * sum ||W||^2. Throws DivergedError on a non-finite loss or parameter.
TrainResult train(Network net,
                  const data::FramedDataset& train_data,
                  const TrainConfig& config,
                  const data::FramedDataset* validation = nullptr);

struct Evaluation
{
  double mse = 0.0;
  double rmse = 0.0;
};

Evaluation evaluate(const Network& net, const data::FramedDataset& data);

/// Loss and analytic gradient over the whole batch, inference mode (no dropout).
/// Gradients are flattened like Network::parameters().
double loss_and_gradient(const Network& net,
                         const data::FramedDataset& batch,
                         double l2_lambda,
                         std::vector<double>& gradient);

struct GradientCheckReport
{
  std::size_t parameter_count = 0;
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t worst_parameter = 0;
};

/// Central finite differences with the given step against the analytic
/// gradient. Relative error is |a - n| / max(|a| + |n|, 1e-7).
GradientCheckReport gradient_check(const Network& net,
                                   const data::FramedDataset& batch,
                                   double l2_lambda = 0.0,
                                   double step = 1e-5);

/// Header: epoch,train_loss,val_loss (val_loss empty when absent).
void write_loss_csv(std::ostream& out, const Metrics& metrics);

struct ModelCheckpoint
{
  Network network;
  std::optional<ArchitectureSpec> spec;
  std::optional<data::Scaler> scaler;
  std::optional<data::FeatureMode> feature_mode;
};

/// Binary format: "NASBBACK", u32 version, u64 header length, JSON topology
/// header, u64 parameter count, parameters as little-endian f64 in layer order
/// (row-major per block). Written via a temporary file and rename.
void save_checkpoint(const std::filesystem::path& path, const ModelCheckpoint& checkpoint);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

} // namespace nasbba::neuro
