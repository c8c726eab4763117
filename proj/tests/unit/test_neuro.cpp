#include "nasbba/neuro.hpp"
#include "nasbba/synthetic.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace nasbba;
using namespace nasbba::neuro;

namespace {

data::FramedDataset random_batch(std::size_t samples, std::size_t timesteps, std::size_t features, std::uint64_t seed)
{
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  data::FramedDataset d;
  d.samples = samples;
  d.timesteps = timesteps;
  d.features = features;
  d.inputs.resize(samples * timesteps * features);
  for (auto& v : d.inputs)
    v = u(rng);
  d.targets.resize(samples);
  for (auto& v : d.targets)
    v = u(rng);
  d.window_start.resize(samples);
  for (std::size_t i = 0; i < samples; ++i)
    d.window_start[i] = i;
  return d;
}

double sigm(double z)
{
  return 1.0 / (1.0 + std::exp(-z));
}

// Straightforward per-sample reference for an LSTM -> dense(identity) network.
double reference_forward(const LstmLayer& l, const DenseLayer& d, const data::FramedDataset& batch, std::size_t s)
{
  const std::size_t H = l.units;
  std::vector<double> h(H, 0.0), c(H, 0.0);
  for (std::size_t t = 0; t < batch.timesteps; ++t) {
    std::vector<double> z(4 * H);
    for (std::size_t r = 0; r < 4 * H; ++r) {
      double acc = l.b(Eigen::Index(r), 0);
      for (std::size_t k = 0; k < l.input_size; ++k)
        acc += l.W(Eigen::Index(r), Eigen::Index(k)) * batch.input(s, t, k);
      for (std::size_t k = 0; k < H; ++k)
        acc += l.U(Eigen::Index(r), Eigen::Index(k)) * h[k];
      z[r] = acc;
    }
    for (std::size_t j = 0; j < H; ++j) {
      const double i = sigm(z[j]);
      const double f = sigm(z[H + j]);
      const double g = std::tanh(z[2 * H + j]);
      const double o = sigm(z[3 * H + j]);
      c[j] = f * c[j] + i * g;
      h[j] = o * std::tanh(c[j]);
    }
  }
  double y = d.b(0, 0);
  for (std::size_t k = 0; k < H; ++k)
    y += d.W(0, Eigen::Index(k)) * h[k];
  return y;
}

Network lstm_identity_net(std::size_t features, std::size_t units, std::size_t timesteps, std::uint64_t seed)
{
  auto spec = make_five_layer_spec(timesteps, units, 1, 1, 1, Activation::relu, Activation::identity, false, false, false);
  return Network::build(spec, features, seed);
}

} // namespace

TEST_CASE("lstm cell with zero weights")
{
  LstmLayer l;
  l.input_size = 3;
  l.units = 2;
  l.W = Matrix::Zero(8, 3);
  l.U = Matrix::Zero(8, 2);
  l.b = Matrix::Zero(8, 1);
  const Vector x = Vector::Constant(3, 0.7);
  const Vector h0 = Vector::Zero(2);
  const Vector c0 = Vector::Constant(2, 0.4);
  const auto s = lstm_cell_step(l, x, h0, c0);
  // i = f = o = 0.5, g = 0: c = 0.2, h = 0.5 tanh(0.2)
  CHECK(s.c(0) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(s.h(1) == doctest::Approx(0.5 * std::tanh(0.2)).epsilon(1e-15));
  CHECK_THROWS_AS(lstm_cell_step(l, Vector::Zero(2), h0, c0), std::invalid_argument);
}

TEST_CASE("batched forward matches a scalar reference")
{
  const auto net = lstm_identity_net(4, 5, 6, 11);
  REQUIRE(net.layers().size() == 2);
  const auto& l = std::get<LstmLayer>(net.layers()[0]);
  const auto& d = std::get<DenseLayer>(net.layers()[1]);
  const auto batch = random_batch(7, 6, 4, 3);
  const auto y = predict(net, batch);
  REQUIRE(y.size() == 7);
  for (std::size_t s = 0; s < 7; ++s)
    CHECK(std::abs(y[s] - reference_forward(l, d, batch, s)) < 1e-12);

  // lstm_cell_step unrolled agrees with the batched path too
  Vector h = Vector::Zero(5), c = Vector::Zero(5);
  for (std::size_t t = 0; t < 6; ++t) {
    Vector x(4);
    for (std::size_t k = 0; k < 4; ++k)
      x(Eigen::Index(k)) = batch.input(2, t, k);
    auto st = lstm_cell_step(l, x, h, c);
    h = st.h;
    c = st.c;
  }
  const double y2 = (d.W * h + d.b)(0, 0);
  CHECK(std::abs(y[2] - y2) < 1e-12);
}

TEST_CASE("build instantiates present layers")
{
  const auto spec = make_five_layer_spec(24, 25, 20, 9, 33, Activation::relu, Activation::relu);
  const auto net = Network::build(spec, 4, 1);
  CHECK(net.describe() == "t=24 f=4 LSTM(25,seq) LSTM(20) Dense(9,relu) Dense(33,relu) Dense(1,relu)");
  const std::size_t expected = 4 * 25 * (4 + 25 + 1) + 4 * 20 * (25 + 20 + 1) + 9 * (20 + 1) + 33 * (9 + 1) + (33 + 1);
  CHECK(net.parameter_count() == expected);
  const auto& lstm = std::get<LstmLayer>(net.layers()[0]);
  CHECK(lstm.b(25, 0) == 1.0);  // forget gate
  CHECK(lstm.b(0, 0) == 0.0);
  const double limit = std::sqrt(6.0 / (4 + 100));
  CHECK(lstm.W.cwiseAbs().maxCoeff() <= limit);

  auto reduced = make_five_layer_spec(3, 4, 9, 9, 9, Activation::sigmoid, Activation::sigmoid, false, true, false);
  CHECK(Network::build(reduced, 2, 1).describe() == "t=3 f=2 LSTM(4) Dense(9,sigmoid) Dense(1,sigmoid)");
}

TEST_CASE("from_layers rejects inconsistent dimensions")
{
  const auto net = lstm_identity_net(3, 4, 2, 1);
  auto layers = net.layers();
  std::get<DenseLayer>(layers[1]).input_size = 5;
  CHECK_THROWS_AS(Network::from_layers(layers, 3, 2), std::invalid_argument);
  CHECK_THROWS_AS(predict(net, random_batch(2, 3, 3, 1)), std::invalid_argument);
}

TEST_CASE("mse and rmse")
{
  const std::vector<double> y{1.0, 2.0}, z{0.0, 0.0};
  CHECK(mse(y, z) == 2.5);
  CHECK(rmse(y, z) == doctest::Approx(1.5811388300841898));
}

TEST_CASE("gradient check on small random networks")
{
  std::mt19937_64 rng(5);
  for (int k = 0; k < 40; ++k) {
    std::uniform_int_distribution<std::size_t> units(1, 4);
    const auto spec = make_five_layer_spec(1 + rng() % 4,
                                           units(rng),
                                           units(rng),
                                           units(rng),
                                           units(rng),
                                           k % 2 ? Activation::relu : Activation::sigmoid,
                                           Activation::sigmoid,
                                           (rng() & 1U) != 0,
                                           (rng() & 1U) != 0,
                                           true);
    auto net = Network::build(spec, 2, 100 + std::uint64_t(k));
    // Zero biases can park a ReLU exactly on its kink; move every parameter off it.
    std::uniform_real_distribution<double> u(-0.8, 0.8);
    auto p = net.parameters();
    for (auto& v : p)
      v = u(rng);
    net.set_parameters(p);
    const auto batch = random_batch(5, spec.timesteps, 2, 7 + std::uint64_t(k));
    const auto report = gradient_check(net, batch, 0.01);
    INFO(net.describe());
    CHECK(report.parameter_count == net.parameter_count());
    CHECK(report.max_relative_error < 1e-4);
  }
}

TEST_CASE("gradient check is exact for dense-only linear network")
{
  DenseLayer d;
  d.input_size = 3;
  d.units = 1;
  d.activation = Activation::identity;
  d.W = Matrix{{0.3, -0.2, 0.5}};
  d.b = Matrix::Constant(1, 1, 0.1);
  const auto net = Network::from_layers({d}, 3, 2);
  const auto report = gradient_check(net, random_batch(6, 2, 3, 9), 0.05);
  CHECK(report.max_relative_error < 1e-8);
}

TEST_CASE("zero learning rate leaves parameters unchanged")
{
  const auto net = lstm_identity_net(2, 3, 4, 2);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 0.0;
  cfg.dropout_rate = 0.3;
  const auto res = train(net, random_batch(20, 4, 2, 1), cfg);
  CHECK(res.network.parameters() == net.parameters());
  CHECK(res.metrics.train_loss_history.size() == 3);
}

TEST_CASE("dropout preserves the expected output")
{
  const auto net = lstm_identity_net(2, 6, 3, 4);
  const auto batch = random_batch(1, 3, 2, 8);
  const double clean = predict(net, batch)[0];
  Rng rng(77);
  const int n = 4000;
  double sum = 0.0, sum_sq = 0.0;
  for (int k = 0; k < n; ++k) {
    const double y = forward(net, batch, true, 0.5, &rng)[0];
    sum += y;
    sum_sq += y * y;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum_sq / n - mean * mean) / n);
  CHECK(se > 0.0);
  CHECK(std::abs(mean - clean) < 3.0 * se);
  CHECK_THROWS_AS(forward(net, batch, true, 0.5, nullptr), std::invalid_argument);
}

TEST_CASE("l2 penalty shrinks weights")
{
  const auto net = lstm_identity_net(2, 4, 3, 6);
  const auto data = random_batch(30, 3, 2, 2);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.dropout_rate = 0.0;
  cfg.learning_rate = 0.05;
  cfg.l2_lambda = 0.0;
  const auto plain = train(net, data, cfg);
  cfg.l2_lambda = 0.1;
  const auto shrunk = train(net, data, cfg);
  CHECK(shrunk.network.weight_norm_sq() < plain.network.weight_norm_sq());
}

TEST_CASE("training is deterministic and predictions are batch independent")
{
  const auto net = lstm_identity_net(2, 4, 5, 10);
  const auto data = random_batch(40, 5, 2, 12);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.rng_seed = 99;
  const auto a = train(net, data, cfg, &data);
  const auto b = train(net, data, cfg, &data);
  CHECK(a.network.parameters() == b.network.parameters());
  CHECK(a.metrics.train_loss_history == b.metrics.train_loss_history);
  CHECK(a.metrics.val_loss_history.size() == 5);

  const auto all = predict(a.network, data);
  for (std::size_t s : {0UL, 17UL, 39UL}) {
    data::FramedDataset one;
    one.samples = 1;
    one.timesteps = 5;
    one.features = 2;
    one.inputs.assign(data.inputs.begin() + long(s * 10), data.inputs.begin() + long((s + 1) * 10));
    one.targets = {data.targets[s]};
    CHECK(std::abs(predict(a.network, one)[0] - all[s]) < 1e-12);
  }
}

TEST_CASE("training reduces loss on a sine series")
{
  const auto series = synthetic::sine_series(120, 12.0);
  const auto framed = data::frame(series, 6);
  const auto net = lstm_identity_net(1, 6, 6, 3);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.dropout_rate = 0.0;
  cfg.l2_lambda = 0.0;
  cfg.learning_rate = 0.1;
  const auto res = train(net, framed, cfg);
  CHECK(res.metrics.train_loss_history.back() < 0.5 * res.metrics.train_loss_history.front());
}

TEST_CASE("diverging training reports the epoch")
{
  const auto net = lstm_identity_net(2, 4, 3, 1);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.learning_rate = 1e200;
  cfg.grad_clip = 0.0;
  cfg.dropout_rate = 0.0;
  auto data = random_batch(20, 3, 2, 1);
  for (auto& t : data.targets)
    t *= 1e6;
  try {
    train(net, data, cfg);
    FAIL("expected divergence");
  } catch (const DivergedError& e) {
    CHECK(e.epoch() < 50);
  }
}

TEST_CASE("train config validation")
{
  TrainConfig cfg;
  cfg.dropout_rate = 1.0;
  cfg.batch_size = 0;
  CHECK(cfg.problems().size() == 2);
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("checkpoint round trip")
{
  const auto spec = make_five_layer_spec(4, 3, 2, 5, 2, Activation::sigmoid, Activation::relu, true, false, true);
  ModelCheckpoint ck;
  ck.network = Network::build(spec, 4, 21);
  ck.spec = spec;
  ck.scaler = data::Scaler({0, 1, 0, 0}, {10, 2, 1, 1}, 0.0, 10.0);
  ck.feature_mode = data::FeatureMode::augmented;
  const auto path = std::filesystem::temp_directory_path() / "nasbba_test_ckpt.bin";
  save_checkpoint(path, ck);
  const auto back = load_checkpoint(path);
  CHECK(back.network.describe() == ck.network.describe());
  CHECK(back.network.parameters() == ck.network.parameters());
  CHECK(back.spec == ck.spec);
  CHECK(back.scaler == ck.scaler);
  CHECK(back.feature_mode == ck.feature_mode);
  const auto batch = random_batch(3, 4, 4, 5);
  CHECK(predict(back.network, batch) == predict(ck.network, batch));

  std::filesystem::resize_file(path, 20);
  CHECK_THROWS(load_checkpoint(path));
  std::filesystem::remove(path);
}

TEST_CASE("gradient check on a 2-unit LSTM with one dense output")
{
  auto spec = make_five_layer_spec(4, 2, 1, 1, 1, Activation::relu, Activation::sigmoid, false, false, false);
  const auto net = Network::build(spec, 2, 8);
  const auto report = gradient_check(net, random_batch(3, 4, 2, 4));
  CHECK(report.parameter_count == 4 * 2 * (2 + 2 + 1) + 3);
  CHECK(report.max_relative_error < 1e-4);
}
