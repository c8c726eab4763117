#include "nasbba/neuro.hpp"

#include "detail/engine.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace nasbba::neuro {

namespace {

void glorot_fill(Matrix& m, std::size_t fan_in, std::size_t fan_out, Rng& rng)
{
  const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = dist(rng);
}

LstmLayer make_lstm(std::size_t input, std::size_t units, bool return_sequences, Rng& rng)
{
  LstmLayer l;
  l.input_size = input;
  l.units = units;
  l.return_sequences = return_sequences;
  const auto H = Eigen::Index(units);
  l.W.resize(4 * H, Eigen::Index(input));
  l.U.resize(4 * H, H);
  l.b = Matrix::Zero(4 * H, 1);
  glorot_fill(l.W, input, 4 * units, rng);
  glorot_fill(l.U, units, 4 * units, rng);
  l.b.middleRows(H, H).setOnes();
  return l;
}

DenseLayer make_dense(std::size_t input, std::size_t units, Activation act, Rng& rng)
{
  DenseLayer l;
  l.input_size = input;
  l.units = units;
  l.activation = act;
  l.W.resize(Eigen::Index(units), Eigen::Index(input));
  l.b = Matrix::Zero(Eigen::Index(units), 1);
  glorot_fill(l.W, input, units, rng);
  return l;
}

Matrix sigmoid(const Matrix& z)
{
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

Matrix activate(const Matrix& z, Activation act)
{
  switch (act) {
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::sigmoid: return sigmoid(z);
    case Activation::identity: return z;
  }
  return z;
}

Matrix activation_derivative(const Matrix& z, const Matrix& a, Activation act)
{
  switch (act) {
    case Activation::relu: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::sigmoid: return (a.array() * (1.0 - a.array())).matrix();
    case Activation::identity: return Matrix::Ones(z.rows(), z.cols());
  }
  return Matrix::Ones(z.rows(), z.cols());
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng)
{
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep = 1.0 - rate;
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r)
      m(r, c) = u(rng) < keep ? 1.0 / keep : 0.0;
  return m;
}

template <class... Ts>
struct Overloaded : Ts...
{
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

} // namespace

Network Network::build(const ArchitectureSpec& spec, std::size_t feature_count, std::uint64_t seed)
{
  spec.validate();
  if (feature_count < 1)
    throw std::invalid_argument("Network::build: feature count must be positive");
  Rng rng(seed);
  const auto present = spec.present_layers();
  std::vector<Layer> layers;
  std::size_t width = feature_count;
  for (std::size_t i = 0; i < present.size(); ++i) {
    const auto& l = *present[i];
    if (l.kind == LayerKind::recurrent) {
      const bool next_recurrent = i + 1 < present.size() && present[i + 1]->kind == LayerKind::recurrent;
      layers.emplace_back(make_lstm(width, l.units, next_recurrent, rng));
    } else {
      layers.emplace_back(make_dense(width, l.units, *l.activation, rng));
    }
    width = l.units;
  }
  return from_layers(std::move(layers), feature_count, spec.timesteps);
}

Network Network::from_layers(std::vector<Layer> layers, std::size_t feature_count, std::size_t timesteps)
{
  Network net;
  net.layers_ = std::move(layers);
  net.feature_count_ = feature_count;
  net.timesteps_ = timesteps;
  net.check_dimensions();
  return net;
}

void Network::check_dimensions() const
{
  if (layers_.empty())
    throw std::invalid_argument("network has no layers");
  if (timesteps_ < 1 || feature_count_ < 1)
    throw std::invalid_argument("network needs positive timesteps and feature count");
  std::size_t width = feature_count_;
  bool sequence = true;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    std::visit(Overloaded{
                 [&](const LstmLayer& l) {
                   if (!sequence)
                     throw std::invalid_argument("LSTM layer " + std::to_string(i) + " receives a non-sequence input");
                   if (l.input_size != width || l.W.rows() != Eigen::Index(4 * l.units) ||
                       l.W.cols() != Eigen::Index(width) || l.U.rows() != Eigen::Index(4 * l.units) ||
                       l.U.cols() != Eigen::Index(l.units) || l.b.rows() != Eigen::Index(4 * l.units) ||
                       l.b.cols() != 1)
                     throw std::invalid_argument("LSTM layer " + std::to_string(i) + " has inconsistent dimensions");
                   sequence = l.return_sequences;
                   width = l.units;
                 },
                 [&](const DenseLayer& l) {
                   if (l.input_size != width || l.W.rows() != Eigen::Index(l.units) ||
                       l.W.cols() != Eigen::Index(width) || l.b.rows() != Eigen::Index(l.units) || l.b.cols() != 1)
                     throw std::invalid_argument("dense layer " + std::to_string(i) + " has inconsistent dimensions");
                   sequence = false;
                   width = l.units;
                 },
               },
               layers_[i]);
  }
  if (sequence)
    throw std::invalid_argument("last LSTM layer must not return sequences");
  if (width != 1)
    throw std::invalid_argument("network must end in a single output unit");
}

std::vector<const Matrix*> Network::blocks() const
{
  std::vector<const Matrix*> out;
  for (const auto& layer : layers_) {
    std::visit(Overloaded{
                 [&](const LstmLayer& l) {
                   out.push_back(&l.W);
                   out.push_back(&l.U);
                   out.push_back(&l.b);
                 },
                 [&](const DenseLayer& l) {
                   out.push_back(&l.W);
                   out.push_back(&l.b);
                 },
               },
               layer);
  }
  return out;
}

std::vector<Matrix*> Network::blocks()
{
  std::vector<Matrix*> out;
  for (auto& layer : layers_) {
    std::visit(Overloaded{
                 [&](LstmLayer& l) {
                   out.push_back(&l.W);
                   out.push_back(&l.U);
                   out.push_back(&l.b);
                 },
                 [&](DenseLayer& l) {
                   out.push_back(&l.W);
                   out.push_back(&l.b);
                 },
               },
               layer);
  }
  return out;
}

std::vector<bool> Network::block_is_weight() const
{
  std::vector<bool> out;
  for (const auto& layer : layers_) {
    if (std::holds_alternative<LstmLayer>(layer))
      out.insert(out.end(), {true, true, false});
    else
      out.insert(out.end(), {true, false});
  }
  return out;
}

std::size_t Network::parameter_count() const
{
  std::size_t n = 0;
  for (const auto* b : blocks())
    n += std::size_t(b->size());
  return n;
}

std::vector<double> Network::parameters() const
{
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto* b : blocks())
    for (Eigen::Index r = 0; r < b->rows(); ++r)
      for (Eigen::Index c = 0; c < b->cols(); ++c)
        out.push_back((*b)(r, c));
  return out;
}

void Network::set_parameters(std::span<const double> values)
{
  if (values.size() != parameter_count())
    throw std::invalid_argument("set_parameters: expected " + std::to_string(parameter_count()) + " values, got " +
                                std::to_string(values.size()));
  std::size_t k = 0;
  for (auto* b : blocks())
    for (Eigen::Index r = 0; r < b->rows(); ++r)
      for (Eigen::Index c = 0; c < b->cols(); ++c)
        (*b)(r, c) = values[k++];
}

double Network::weight_norm_sq() const
{
  const auto bs = blocks();
  const auto is_w = block_is_weight();
  double s = 0.0;
  for (std::size_t i = 0; i < bs.size(); ++i)
    if (is_w[i])
      s += bs[i]->squaredNorm();
  return s;
}

bool Network::all_finite() const
{
  for (const auto* b : blocks())
    if (!b->allFinite())
      return false;
  return true;
}

std::string Network::describe() const
{
  std::ostringstream s;
  s << "t=" << timesteps_ << " f=" << feature_count_;
  for (const auto& layer : layers_) {
    std::visit(Overloaded{
                 [&](const LstmLayer& l) { s << " LSTM(" << l.units << (l.return_sequences ? ",seq" : "") << ")"; },
                 [&](const DenseLayer& l) { s << " Dense(" << l.units << "," << to_string(l.activation) << ")"; },
               },
               layer);
  }
  return s.str();
}

CellState lstm_cell_step(const LstmLayer& layer, const Vector& x, const Vector& h_prev, const Vector& c_prev)
{
  const auto H = Eigen::Index(layer.units);
  if (x.size() != Eigen::Index(layer.input_size) || h_prev.size() != H || c_prev.size() != H)
    throw std::invalid_argument("lstm_cell_step: dimension mismatch");
  const Matrix z = layer.W * x + layer.U * h_prev + layer.b;
  const Matrix i = sigmoid(z.topRows(H));
  const Matrix f = sigmoid(z.middleRows(H, H));
  const Matrix g = z.middleRows(2 * H, H).array().tanh().matrix();
  const Matrix o = sigmoid(z.bottomRows(H));
  CellState out;
  out.c = (f.array() * c_prev.array() + i.array() * g.array()).matrix();
  out.h = (o.array() * out.c.array().tanh()).matrix();
  return out;
}

namespace detail {

void check_batch_shape(const Network& net, const data::FramedDataset& data)
{
  if (data.features != net.feature_count())
    throw std::invalid_argument("batch has " + std::to_string(data.features) + " features, network expects " +
                                std::to_string(net.feature_count()));
  if (data.timesteps != net.timesteps())
    throw std::invalid_argument("batch has " + std::to_string(data.timesteps) + " timesteps, network expects " +
                                std::to_string(net.timesteps()));
  if (data.inputs.size() != data.samples * data.timesteps * data.features || data.targets.size() != data.samples)
    throw std::invalid_argument("batch tensor sizes are inconsistent");
}

BatchTensors gather(const data::FramedDataset& data, std::span<const std::size_t> samples)
{
  const auto B = Eigen::Index(samples.size());
  BatchTensors out;
  out.xs.assign(data.timesteps, Matrix(Eigen::Index(data.features), B));
  out.y.resize(B);
  for (Eigen::Index s = 0; s < B; ++s) {
    const auto idx = samples[std::size_t(s)];
    for (std::size_t t = 0; t < data.timesteps; ++t)
      for (std::size_t f = 0; f < data.features; ++f)
        out.xs[t](Eigen::Index(f), s) = data.input(idx, t, f);
    out.y(s) = data.targets[idx];
  }
  return out;
}

BatchTensors gather_all(const data::FramedDataset& data)
{
  std::vector<std::size_t> all(data.samples);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return gather(data, all);
}

Eigen::RowVectorXd Engine::forward(const std::vector<Matrix>& xs, double dropout_rate, Rng* rng)
{
  const auto& layers = net_.layers();
  lstm_.assign(layers.size(), {});
  dense_.assign(layers.size(), {});
  const bool drop = dropout_rate > 0.0 && rng != nullptr;
  const Eigen::Index B = xs.empty() ? 0 : xs.front().cols();

  std::vector<Matrix> sequence = xs;
  Matrix flat;
  bool in_sequence = true;

  for (std::size_t li = 0; li < layers.size(); ++li) {
    if (const auto* l = std::get_if<LstmLayer>(&layers[li])) {
      auto& cache = lstm_[li];
      const auto H = Eigen::Index(l->units);
      const std::size_t T = sequence.size();
      cache.x = std::move(sequence);
      cache.h.assign(T + 1, Matrix::Zero(H, B));
      cache.c.assign(T + 1, Matrix::Zero(H, B));
      cache.i.resize(T);
      cache.f.resize(T);
      cache.g.resize(T);
      cache.o.resize(T);
      cache.tanh_c.resize(T);
      for (std::size_t t = 0; t < T; ++t) {
        Matrix z = l->W * cache.x[t] + l->U * cache.h[t];
        z.colwise() += l->b.col(0);
        cache.i[t] = sigmoid(z.topRows(H));
        cache.f[t] = sigmoid(z.middleRows(H, H));
        cache.g[t] = z.middleRows(2 * H, H).array().tanh().matrix();
        cache.o[t] = sigmoid(z.bottomRows(H));
        cache.c[t + 1] = (cache.f[t].array() * cache.c[t].array() + cache.i[t].array() * cache.g[t].array()).matrix();
        cache.tanh_c[t] = cache.c[t + 1].array().tanh().matrix();
        cache.h[t + 1] = (cache.o[t].array() * cache.tanh_c[t].array()).matrix();
      }
      if (l->return_sequences) {
        sequence.assign(cache.h.begin() + 1, cache.h.end());
        if (drop) {
          for (auto& out : sequence) {
            cache.mask.push_back(dropout_mask(H, B, dropout_rate, *rng));
            out.array() *= cache.mask.back().array();
          }
        }
      } else {
        flat = cache.h.back();
        if (drop) {
          cache.mask.push_back(dropout_mask(H, B, dropout_rate, *rng));
          flat.array() *= cache.mask.back().array();
        }
        sequence.clear();
        in_sequence = false;
      }
    } else {
      const auto& d = std::get<DenseLayer>(layers[li]);
      auto& cache = dense_[li];
      if (in_sequence) {
        flat = sequence.back();
        sequence.clear();
        in_sequence = false;
      }
      cache.x = std::move(flat);
      cache.z = d.W * cache.x;
      cache.z.colwise() += d.b.col(0);
      cache.a = activate(cache.z, d.activation);
      flat = cache.a;
    }
  }
  return flat.row(0);
}

std::vector<Matrix> Engine::backward(const Eigen::RowVectorXd& d_prediction) const
{
  const auto& layers = net_.layers();
  // Block offsets per layer in Network::blocks() order.
  std::vector<std::size_t> offset(layers.size());
  std::size_t n_blocks = 0;
  for (std::size_t li = 0; li < layers.size(); ++li) {
    offset[li] = n_blocks;
    n_blocks += std::holds_alternative<LstmLayer>(layers[li]) ? 3 : 2;
  }
  std::vector<Matrix> grads(n_blocks);

  Matrix d_flat = d_prediction;
  std::vector<Matrix> d_sequence;

  for (std::size_t li = layers.size(); li-- > 0;) {
    if (const auto* d = std::get_if<DenseLayer>(&layers[li])) {
      const auto& cache = dense_[li];
      const Matrix dz = (d_flat.array() * activation_derivative(cache.z, cache.a, d->activation).array()).matrix();
      grads[offset[li]] = dz * cache.x.transpose();
      grads[offset[li] + 1] = dz.rowwise().sum();
      if (li > 0)
        d_flat = d->W.transpose() * dz;
    } else {
      const auto& l = std::get<LstmLayer>(layers[li]);
      const auto& cache = lstm_[li];
      const auto H = Eigen::Index(l.units);
      const std::size_t T = cache.x.size();
      const Eigen::Index B = cache.h.front().cols();

      // Gradient arriving at each emitted hidden state.
      std::vector<Matrix> dh_above(T, Matrix::Zero(H, B));
      if (l.return_sequences) {
        for (std::size_t t = 0; t < T; ++t) {
          dh_above[t] = d_sequence[t];
          if (!cache.mask.empty())
            dh_above[t].array() *= cache.mask[t].array();
        }
      } else {
        dh_above[T - 1] = d_flat;
        if (!cache.mask.empty())
          dh_above[T - 1].array() *= cache.mask[0].array();
      }

      Matrix gW = Matrix::Zero(l.W.rows(), l.W.cols());
      Matrix gU = Matrix::Zero(l.U.rows(), l.U.cols());
      Matrix gb = Matrix::Zero(l.b.rows(), 1);
      Matrix dh_next = Matrix::Zero(H, B);
      Matrix dc_next = Matrix::Zero(H, B);
      std::vector<Matrix> dx(li > 0 ? T : 0);
      Matrix dz(4 * H, B);

      for (std::size_t t = T; t-- > 0;) {
        const Matrix dh = dh_above[t] + dh_next;
        const auto& i = cache.i[t].array();
        const auto& f = cache.f[t].array();
        const auto& g = cache.g[t].array();
        const auto& o = cache.o[t].array();
        const auto& tc = cache.tanh_c[t].array();
        const Matrix dc = (dc_next.array() + dh.array() * o * (1.0 - tc * tc)).matrix();
        dz.topRows(H) = (dc.array() * g * i * (1.0 - i)).matrix();
        dz.middleRows(H, H) = (dc.array() * cache.c[t].array() * f * (1.0 - f)).matrix();
        dz.middleRows(2 * H, H) = (dc.array() * i * (1.0 - g * g)).matrix();
        dz.bottomRows(H) = (dh.array() * tc * o * (1.0 - o)).matrix();
        gW.noalias() += dz * cache.x[t].transpose();
        gU.noalias() += dz * cache.h[t].transpose();
        gb += dz.rowwise().sum();
        dh_next.noalias() = l.U.transpose() * dz;
        dc_next = (dc.array() * f).matrix();
        if (li > 0)
          dx[t].noalias() = l.W.transpose() * dz;
      }
      grads[offset[li]] = std::move(gW);
      grads[offset[li] + 1] = std::move(gU);
      grads[offset[li] + 2] = std::move(gb);
      d_sequence = std::move(dx);
    }
  }
  return grads;
}

} // namespace detail

std::vector<double> forward(const Network& net,
                            const data::FramedDataset& batch,
                            bool training,
                            double dropout_rate,
                            Rng* rng)
{
  detail::check_batch_shape(net, batch);
  if (batch.samples == 0)
    return {};
  if (training && dropout_rate > 0.0 && rng == nullptr)
    throw std::invalid_argument("forward: training with dropout needs an RNG");
  const auto tensors = detail::gather_all(batch);
  detail::Engine engine(net);
  const Eigen::RowVectorXd out = engine.forward(tensors.xs, training ? dropout_rate : 0.0, training ? rng : nullptr);
  return {out.data(), out.data() + out.size()};
}

std::vector<double> predict(const Network& net, const data::FramedDataset& batch)
{
  return forward(net, batch, false);
}

double mse(std::span<const double> y, std::span<const double> yhat)
{
  if (y.empty() || y.size() != yhat.size())
    throw std::invalid_argument("mse: vectors must be non-empty and of equal length");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - yhat[i];
    s += d * d;
  }
  return s / double(y.size());
}

double rmse(std::span<const double> y, std::span<const double> yhat)
{
  return std::sqrt(mse(y, yhat));
}

} // namespace nasbba::neuro
