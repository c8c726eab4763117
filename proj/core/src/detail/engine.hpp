#pragma once

#include "nasbba/neuro.hpp"

#include <span>
#include <vector>

namespace nasbba::neuro::detail {

/// Inputs of a batch as one (features x batch) matrix per timestep, plus targets.
struct BatchTensors
{
  std::vector<Matrix> xs;
  Eigen::RowVectorXd y;
};

BatchTensors gather(const data::FramedDataset& data, std::span<const std::size_t> samples);
BatchTensors gather_all(const data::FramedDataset& data);

/// Forward pass that keeps the activations needed for backpropagation.
class Engine
{
public:
  explicit Engine(const Network& net)
    : net_(net)
  {
  }

  /// Returns the 1 x batch prediction row. Dropout is applied when rate > 0 and rng is set.
  Eigen::RowVectorXd forward(const std::vector<Matrix>& xs, double dropout_rate, Rng* rng);

  /// Gradient of the data loss given dL/dprediction; one matrix per parameter block.
  std::vector<Matrix> backward(const Eigen::RowVectorXd& d_prediction) const;

private:
  struct LstmCache
  {
    std::vector<Matrix> x;
    std::vector<Matrix> h; // size T + 1, h[0] = 0
    std::vector<Matrix> c; // size T + 1
    std::vector<Matrix> i, f, g, o, tanh_c;
    std::vector<Matrix> mask; // per emitted output (T or 1), empty without dropout
  };
  struct DenseCache
  {
    Matrix x, z, a;
  };

  const Network& net_;
  std::vector<LstmCache> lstm_;
  std::vector<DenseCache> dense_;
};

void check_batch_shape(const Network& net, const data::FramedDataset& data);

} // namespace nasbba::neuro::detail
