#include "nasbba/neuro.hpp"

#include "detail/engine.hpp"
#include "detail/numbers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace nasbba::neuro {

std::vector<std::string> TrainConfig::problems() const
{
  std::vector<std::string> out;
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    out.emplace_back("dropout_rate must lie in [0, 1)");
  if (!(l2_lambda >= 0.0))
    out.emplace_back("l2_lambda must be non-negative");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    out.emplace_back("learning_rate must be a finite non-negative number");
  if (batch_size < 1)
    out.emplace_back("batch_size must be positive");
  if (!(grad_clip >= 0.0))
    out.emplace_back("grad_clip must be non-negative");
  return out;
}

void TrainConfig::validate() const
{
  auto issues = problems();
  if (issues.empty())
    return;
  std::string msg = "invalid training configuration:";
  for (const auto& p : issues)
    msg += "\n  - " + p;
  throw std::invalid_argument(msg);
}

DivergedError::DivergedError(std::size_t epoch, Metrics partial)
  : std::runtime_error("training diverged at epoch " + std::to_string(epoch))
  , epoch_(epoch)
  , partial_(std::move(partial))
{
}

namespace {

/// Adds the L2 term to the data gradient and returns the regularization loss.
double add_l2(const Network& net, double l2_lambda, std::vector<Matrix>& grads)
{
  if (l2_lambda == 0.0)
    return 0.0;
  const auto blocks = net.blocks();
  const auto is_w = net.block_is_weight();
  double reg = 0.0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (!is_w[b])
      continue;
    reg += blocks[b]->squaredNorm();
    grads[b] += 2.0 * l2_lambda * *blocks[b];
  }
  return l2_lambda * reg;
}

} // namespace

Evaluation evaluate(const Network& net, const data::FramedDataset& data)
{
  if (data.empty())
    throw std::invalid_argument("evaluate: empty dataset");
  const auto yhat = predict(net, data);
  Evaluation e;
  e.mse = mse(data.targets, yhat);
  e.rmse = std::sqrt(e.mse);
  return e;
}

TrainResult train(Network net,
                  const data::FramedDataset& train_data,
                  const TrainConfig& config,
                  const data::FramedDataset* validation)
{
  config.validate();
  if (train_data.empty())
    throw std::invalid_argument("train: empty training set");
  detail::check_batch_shape(net, train_data);
  if (validation)
    detail::check_batch_shape(net, *validation);

  Rng rng(config.rng_seed);
  Metrics metrics;
  std::vector<std::size_t> order(train_data.samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = std::min(config.batch_size, train_data.samples);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle)
      std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(start + batch, order.size());
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const auto tensors = detail::gather(train_data, idx);

      detail::Engine engine(net);
      const Eigen::RowVectorXd yhat = engine.forward(tensors.xs, config.dropout_rate, &rng);
      const Eigen::RowVectorXd diff = yhat - tensors.y;
      const double n = double(idx.size());
      const double data_loss = diff.squaredNorm() / n;
      if (!std::isfinite(data_loss))
        throw DivergedError(epoch, metrics);
      loss_sum += data_loss * n;

      auto grads = engine.backward(2.0 / n * diff);
      add_l2(net, config.l2_lambda, grads);

      double scale = config.learning_rate;
      if (config.grad_clip > 0.0) {
        double norm_sq = 0.0;
        for (const auto& g : grads)
          norm_sq += g.squaredNorm();
        const double norm = std::sqrt(norm_sq);
        if (!std::isfinite(norm))
          throw DivergedError(epoch, metrics);
        if (norm > config.grad_clip)
          scale *= config.grad_clip / norm;
      }
      auto blocks = net.blocks();
      for (std::size_t b = 0; b < blocks.size(); ++b)
        *blocks[b] -= scale * grads[b];
    }

    metrics.train_loss_history.push_back(loss_sum / double(order.size()));
    if (!net.all_finite())
      throw DivergedError(epoch, metrics);
    if (validation) {
      const double v = evaluate(net, *validation).mse;
      if (!std::isfinite(v))
        throw DivergedError(epoch, metrics);
      metrics.val_loss_history.push_back(v);
    }
  }

  metrics.final_train_rmse = evaluate(net, train_data).rmse;
  if (validation)
    metrics.validation_rmse = evaluate(net, *validation).rmse;
  if (!std::isfinite(metrics.final_train_rmse) || !std::isfinite(metrics.validation_rmse))
    throw DivergedError(config.epochs, metrics);
  return {std::move(net), std::move(metrics)};
}

double loss_and_gradient(const Network& net,
                         const data::FramedDataset& batch,
                         double l2_lambda,
                         std::vector<double>& gradient)
{
  detail::check_batch_shape(net, batch);
  if (batch.empty())
    throw std::invalid_argument("loss_and_gradient: empty batch");
  const auto tensors = detail::gather_all(batch);
  detail::Engine engine(net);
  const Eigen::RowVectorXd yhat = engine.forward(tensors.xs, 0.0, nullptr);
  const Eigen::RowVectorXd diff = yhat - tensors.y;
  const double n = double(batch.samples);
  auto grads = engine.backward(2.0 / n * diff);
  const double reg = add_l2(net, l2_lambda, grads);

  gradient.clear();
  gradient.reserve(net.parameter_count());
  for (const auto& g : grads)
    for (Eigen::Index r = 0; r < g.rows(); ++r)
      for (Eigen::Index c = 0; c < g.cols(); ++c)
        gradient.push_back(g(r, c));
  return diff.squaredNorm() / n + reg;
}

GradientCheckReport gradient_check(const Network& net, const data::FramedDataset& batch, double l2_lambda, double step)
{
  std::vector<double> analytic;
  loss_and_gradient(net, batch, l2_lambda, analytic);

  auto loss_at = [&](const Network& probe) {
    const double data_loss = mse(batch.targets, predict(probe, batch));
    return data_loss + l2_lambda * probe.weight_norm_sq();
  };

  Network probe = net;
  std::vector<double> params = net.parameters();
  GradientCheckReport report;
  report.parameter_count = params.size();
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double original = params[k];
    params[k] = original + step;
    probe.set_parameters(params);
    const double up = loss_at(probe);
    params[k] = original - step;
    probe.set_parameters(params);
    const double down = loss_at(probe);
    params[k] = original;

    const double numeric = (up - down) / (2.0 * step);
    const double abs_err = std::abs(analytic[k] - numeric);
    const double rel_err = abs_err / std::max(std::abs(analytic[k]) + std::abs(numeric), 1e-7);
    report.max_absolute_error = std::max(report.max_absolute_error, abs_err);
    if (rel_err > report.max_relative_error) {
      report.max_relative_error = rel_err;
      report.worst_parameter = k;
    }
  }
  return report;
}

void write_loss_csv(std::ostream& out, const Metrics& metrics)
{
  out << "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < metrics.train_loss_history.size(); ++e) {
    out << (e + 1) << ',' << ::nasbba::detail::format_double(metrics.train_loss_history[e]) << ',';
    if (e < metrics.val_loss_history.size())
      out << ::nasbba::detail::format_double(metrics.val_loss_history[e]);
    out << '\n';
  }
}

} // namespace nasbba::neuro
