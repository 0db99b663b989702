#pragma once

// Learner architectures: attention-only Transformer, MLP, RNN, and the MLP
// over a flattened replay embedding (ERMLP).
//
// Parameter structs are templated on their element type. With Mat<Scalar>
// elements they hold weights; bind() maps them onto a tape, producing the same
// struct with Var<Scalar> elements, which the *_forward functions consume.

#include "grad.hpp"
#include "rng.hpp"

#include <cmath>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

namespace ercl {

template <typename T> struct AttentionWeights
{
  T w_k; // d_k x d_model
  T w_q; // d_k x d_model
  T w_v; // d_model x d_model
};

template <typename T> struct TransformerParams
{
  std::vector<AttentionWeights<T>> layers;
};

template <typename T> struct DenseLayer
{
  T weight; // out x in
  T bias;   // out x 1
};

template <typename T> struct MlpParams
{
  std::vector<DenseLayer<T>> layers; // hidden layers followed by the output layer
  Activation activation = Activation::relu;
};

template <typename T> struct RnnLayer
{
  T w_ih; // hidden x input
  T w_hh; // hidden x hidden
  T b_ih; // hidden x 1
  T b_hh; // hidden x 1
};

template <typename T> struct RnnParams
{
  std::vector<RnnLayer<T>> layers;
};

// ---------------------------------------------------------------------------
// Tensor traversal. Order is fixed and shared by bind(), tensors(), the
// optimizer state, and checkpoints.

template <typename T, typename F> void visit(TransformerParams<T> &p, F &&f)
{
  for (auto &l : p.layers) {
    f(l.w_k);
    f(l.w_q);
    f(l.w_v);
  }
}

template <typename T, typename F> void visit(MlpParams<T> &p, F &&f)
{
  for (auto &l : p.layers) {
    f(l.weight);
    f(l.bias);
  }
}

template <typename T, typename F> void visit(RnnParams<T> &p, F &&f)
{
  for (auto &l : p.layers) {
    f(l.w_ih);
    f(l.w_hh);
    f(l.b_ih);
    f(l.b_hh);
  }
}

template <typename T, typename F> void visit(TransformerParams<T> const &p, F &&f)
{
  visit(const_cast<TransformerParams<T> &>(p), [&](T const &t) { f(t); });
}

template <typename T, typename F> void visit(MlpParams<T> const &p, F &&f)
{
  visit(const_cast<MlpParams<T> &>(p), [&](T const &t) { f(t); });
}

template <typename T, typename F> void visit(RnnParams<T> const &p, F &&f)
{
  visit(const_cast<RnnParams<T> &>(p), [&](T const &t) { f(t); });
}

template <typename Scalar, template <typename> class Params> std::vector<Mat<Scalar> *> tensors_of(Params<Mat<Scalar>> &p)
{
  std::vector<Mat<Scalar> *> out;
  visit(p, [&](Mat<Scalar> &m) { out.push_back(&m); });
  return out;
}

/// Total number of trainable scalars.
template <typename Scalar, template <typename> class Params> std::size_t param_count(Params<Mat<Scalar>> const &p)
{
  std::size_t n = 0;
  visit(p, [&](Mat<Scalar> const &m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

template <typename Scalar> TransformerParams<Var<Scalar>> bind(Tape<Scalar> &tape, TransformerParams<Mat<Scalar>> const &p)
{
  TransformerParams<Var<Scalar>> out;
  for (auto const &l : p.layers) {
    out.layers.push_back({tape.parameter(l.w_k), tape.parameter(l.w_q), tape.parameter(l.w_v)});
  }
  return out;
}

template <typename Scalar> MlpParams<Var<Scalar>> bind(Tape<Scalar> &tape, MlpParams<Mat<Scalar>> const &p)
{
  MlpParams<Var<Scalar>> out;
  out.activation = p.activation;
  for (auto const &l : p.layers) {
    Var<Scalar> w = tape.parameter(l.weight);
    out.layers.push_back({w, tape.parameter(l.bias)});
  }
  return out;
}

template <typename Scalar> RnnParams<Var<Scalar>> bind(Tape<Scalar> &tape, RnnParams<Mat<Scalar>> const &p)
{
  RnnParams<Var<Scalar>> out;
  for (auto const &l : p.layers) {
    Var<Scalar> w_ih = tape.parameter(l.w_ih);
    Var<Scalar> w_hh = tape.parameter(l.w_hh);
    Var<Scalar> b_ih = tape.parameter(l.b_ih);
    out.layers.push_back({w_ih, w_hh, b_ih, tape.parameter(l.b_hh)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Initialization: weights uniform on +-1/sqrt(fan_in), biases zero.

template <typename Scalar> Mat<Scalar> uniform_fan_in(Rng &rng, Index rows, Index cols)
{
  double const bound = 1.0 / std::sqrt(static_cast<double>(cols));
  Mat<Scalar> m(rows, cols);
  // Fill row by row so the draw order matches the row-major convention.
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      m(i, j) = static_cast<Scalar>(rng.uniform(-bound, bound));
    }
  }
  return m;
}

inline Index default_key_dim(Index d_model) { return (d_model + 1) / 2; }

template <typename Scalar>
TransformerParams<Mat<Scalar>> init_transformer(Rng &rng, Index layers, Index d_model, Index d_k)
{
  if (layers < 1 || d_model < 1 || d_k < 1) {
    throw std::invalid_argument("init_transformer: layers, d_model and d_k must be positive");
  }
  TransformerParams<Mat<Scalar>> p;
  for (Index l = 0; l < layers; ++l) {
    Mat<Scalar> w_k = uniform_fan_in<Scalar>(rng, d_k, d_model);
    Mat<Scalar> w_q = uniform_fan_in<Scalar>(rng, d_k, d_model);
    Mat<Scalar> w_v = uniform_fan_in<Scalar>(rng, d_model, d_model);
    p.layers.push_back({std::move(w_k), std::move(w_q), std::move(w_v)});
  }
  return p;
}

/// `widths` lists input, hidden..., output.
template <typename Scalar>
MlpParams<Mat<Scalar>> init_mlp(Rng &rng, std::vector<Index> const &widths, Activation activation)
{
  if (widths.size() < 2) {
    throw std::invalid_argument("init_mlp: need at least input and output widths");
  }
  MlpParams<Mat<Scalar>> p;
  p.activation = activation;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    Mat<Scalar> w = uniform_fan_in<Scalar>(rng, widths[i + 1], widths[i]);
    p.layers.push_back({std::move(w), Mat<Scalar>::Zero(widths[i + 1], 1)});
  }
  return p;
}

template <typename Scalar> RnnParams<Mat<Scalar>> init_rnn(Rng &rng, Index input, Index hidden, Index layers)
{
  if (input < 1 || hidden < 1 || layers < 1) {
    throw std::invalid_argument("init_rnn: sizes must be positive");
  }
  RnnParams<Mat<Scalar>> p;
  for (Index l = 0; l < layers; ++l) {
    Mat<Scalar> w_ih = uniform_fan_in<Scalar>(rng, hidden, l == 0 ? input : hidden);
    Mat<Scalar> w_hh = uniform_fan_in<Scalar>(rng, hidden, hidden);
    p.layers.push_back({std::move(w_ih), std::move(w_hh), Mat<Scalar>::Zero(hidden, 1), Mat<Scalar>::Zero(hidden, 1)});
  }
  return p;
}

// ---------------------------------------------------------------------------
// Forward passes.

template <typename Scalar> Var<Scalar> constant_like_ones(Tape<Scalar> &tape, Index rows, Index cols)
{
  return tape.constant(Mat<Scalar>::Ones(rows, cols));
}

/// bias (n x 1) repeated over `cols` columns. A 1-column request is the bias
/// itself.
template <typename Scalar> Var<Scalar> broadcast_cols(Var<Scalar> bias, Index cols)
{
  if (cols == 1) {
    return bias;
  }
  return matmul(bias, constant_like_ones(*bias.tape, 1, cols));
}

template <typename Scalar> Index d_model(TransformerParams<Mat<Scalar>> const &p) { return p.layers.at(0).w_v.rows(); }
template <typename Scalar> Index d_model(TransformerParams<Var<Scalar>> const &p) { return p.layers.at(0).w_v.rows(); }
template <typename Scalar> Index d_key(TransformerParams<Mat<Scalar>> const &p) { return p.layers.at(0).w_k.rows(); }

/// One attention block: W_v Z softmax_rows(Z^T W_k^T W_q Z).
template <typename Scalar> Var<Scalar> attention(AttentionWeights<Var<Scalar>> const &w, Var<Scalar> z)
{
  Var<Scalar> keys = matmul(w.w_k, z);
  Var<Scalar> queries = matmul(w.w_q, z);
  Var<Scalar> scores = rowwise_softmax(matmul_tn(keys, queries));
  return matmul(matmul(w.w_v, z), scores);
}

/// Residual stack Z <- Z + Attn(Z). No feed-forward, norm, or position terms.
template <typename Scalar> Var<Scalar> transformer_forward(TransformerParams<Var<Scalar>> const &p, Var<Scalar> z0)
{
  if (p.layers.empty()) {
    throw std::invalid_argument("transformer_forward: no layers");
  }
  Index const d = p.layers.front().w_v.rows();
  if (z0.rows() != d) {
    throw ShapeError("transformer_forward: embedding has " + std::to_string(z0.rows()) + " rows, d_model is " +
                     std::to_string(d));
  }
  Var<Scalar> z = z0;
  for (auto const &layer : p.layers) {
    z = add(z, attention(layer, z));
  }
  return z;
}

enum class ReadoutKind { scalar, logits };

struct ReadoutSpec
{
  ReadoutKind kind = ReadoutKind::scalar;
  Index width = 1;

  static ReadoutSpec scalar() { return {ReadoutKind::scalar, 1}; }
  static ReadoutSpec logits(Index k = 10) { return {ReadoutKind::logits, k}; }
};

/// Last `spec.width` entries of the last column.
template <typename Scalar> Var<Scalar> readout(Var<Scalar> z, ReadoutSpec spec)
{
  if (spec.width < 1 || spec.width > z.rows()) {
    throw ShapeError("readout: width " + std::to_string(spec.width) + " exceeds " + std::to_string(z.rows()) +
                     " rows");
  }
  return slice(z, z.rows() - spec.width, spec.width, z.cols() - 1, 1);
}

template <typename Scalar> Vec<Scalar> readout(Mat<Scalar> const &z, ReadoutSpec spec)
{
  if (spec.width < 1 || spec.width > z.rows()) {
    throw ShapeError("readout: width " + std::to_string(spec.width) + " exceeds " + std::to_string(z.rows()) +
                     " rows");
  }
  return z.col(z.cols() - 1).tail(spec.width);
}

/// x holds one example per column.
template <typename Scalar> Var<Scalar> mlp_forward(MlpParams<Var<Scalar>> const &p, Var<Scalar> x)
{
  if (p.layers.empty()) {
    throw std::invalid_argument("mlp_forward: no layers");
  }
  if (x.rows() != p.layers.front().weight.cols()) {
    throw ShapeError("mlp_forward: input has " + std::to_string(x.rows()) + " rows, network expects " +
                     std::to_string(p.layers.front().weight.cols()));
  }
  Var<Scalar> h = x;
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto const &l = p.layers[i];
    h = add(matmul(l.weight, h), broadcast_cols(l.bias, h.cols()));
    if (i + 1 < p.layers.size()) {
      h = activation(h, p.activation);
    }
  }
  return h;
}

template <typename Scalar> Var<Scalar> ermlp_forward(MlpParams<Var<Scalar>> const &p, Var<Scalar> z)
{
  return mlp_forward(p, flatten_cols(z));
}

/// Runs the columns of z left to right through every layer; returns the
/// final layer's hidden state after the last column. Hidden states start at 0.
template <typename Scalar> Var<Scalar> rnn_forward(RnnParams<Var<Scalar>> const &p, Var<Scalar> z)
{
  if (p.layers.empty()) {
    throw std::invalid_argument("rnn_forward: no layers");
  }
  if (z.rows() != p.layers.front().w_ih.cols()) {
    throw ShapeError("rnn_forward: input has " + std::to_string(z.rows()) + " rows, network expects " +
                     std::to_string(p.layers.front().w_ih.cols()));
  }
  Index const steps = z.cols();
  // The first layer's input projection is one matmul over all columns.
  auto const &first = p.layers.front();
  Var<Scalar> projected = add(matmul(first.w_ih, z), broadcast_cols(add(first.b_ih, first.b_hh), steps));

  std::vector<Var<Scalar>> below; // previous layer outputs per column
  std::vector<Var<Scalar>> current;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto const &layer = p.layers[l];
    Var<Scalar> bias;
    if (l > 0) {
      bias = add(layer.b_ih, layer.b_hh);
    }
    current.clear();
    for (Index t = 0; t < steps; ++t) {
      Var<Scalar> pre = l == 0 ? column(projected, t) : add(matmul(layer.w_ih, below[t]), bias);
      if (t > 0) {
        pre = add(pre, matmul(layer.w_hh, current.back()));
      }
      current.push_back(tanh(pre));
    }
    std::swap(below, current);
  }
  return below.back();
}

// ---------------------------------------------------------------------------
// Eager helpers for plain matrices.

template <typename Scalar> Mat<Scalar> transformer_forward(TransformerParams<Mat<Scalar>> const &p, Mat<Scalar> const &z0)
{
  Tape<Scalar> tape;
  return transformer_forward(bind(tape, p), tape.constant(z0)).value();
}

template <typename Scalar> Mat<Scalar> mlp_forward(MlpParams<Mat<Scalar>> const &p, Mat<Scalar> const &x)
{
  Tape<Scalar> tape;
  return mlp_forward(bind(tape, p), tape.constant(x)).value();
}

template <typename Scalar> Mat<Scalar> ermlp_forward(MlpParams<Mat<Scalar>> const &p, Mat<Scalar> const &z)
{
  Tape<Scalar> tape;
  return ermlp_forward(bind(tape, p), tape.constant(z)).value();
}

template <typename Scalar> Mat<Scalar> rnn_forward(RnnParams<Mat<Scalar>> const &p, Mat<Scalar> const &z)
{
  Tape<Scalar> tape;
  return rnn_forward(bind(tape, p), tape.constant(z)).value();
}

// ---------------------------------------------------------------------------
// Type-erased learner network used by the experiment engine.

enum class ModelKind { mlp, ermlp, rnn, transformer };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(std::string const &name);

template <typename Scalar> class Network
{
public:
  using Matrix = Mat<Scalar>;
  using Storage = std::variant<MlpParams<Matrix>, RnnParams<Matrix>, TransformerParams<Matrix>>;
  using Bound = std::variant<MlpParams<Var<Scalar>>, RnnParams<Var<Scalar>>, TransformerParams<Var<Scalar>>>;

  static Network mlp(MlpParams<Matrix> p) { return Network(ModelKind::mlp, std::move(p), {}); }
  static Network ermlp(MlpParams<Matrix> p) { return Network(ModelKind::ermlp, std::move(p), {}); }
  static Network rnn(RnnParams<Matrix> p, ReadoutSpec r) { return Network(ModelKind::rnn, std::move(p), r); }
  static Network transformer(TransformerParams<Matrix> p, ReadoutSpec r)
  {
    return Network(ModelKind::transformer, std::move(p), r);
  }

  ModelKind kind() const { return kind_; }
  bool uses_replay() const { return kind_ != ModelKind::mlp; }
  ReadoutSpec readout_spec() const { return readout_; }
  Storage const &storage() const { return params_; }

  Bound bind(Tape<Scalar> &tape) const
  {
    return std::visit([&](auto const &p) -> Bound { return ercl::bind(tape, p); }, params_);
  }

  /// Prediction column for one input: a feature column for the plain MLP,
  /// an embedding matrix for the replay learners. For the MLP the input may
  /// hold several examples, one per column.
  Var<Scalar> predict(Bound const &bound, Var<Scalar> input) const
  {
    switch (kind_) {
    case ModelKind::mlp:
      return mlp_forward(std::get<MlpParams<Var<Scalar>>>(bound), input);
    case ModelKind::ermlp:
      return ermlp_forward(std::get<MlpParams<Var<Scalar>>>(bound), input);
    case ModelKind::rnn:
      return readout(rnn_forward(std::get<RnnParams<Var<Scalar>>>(bound), input), readout_);
    case ModelKind::transformer:
      return readout(transformer_forward(std::get<TransformerParams<Var<Scalar>>>(bound), input), readout_);
    }
    throw std::logic_error("unknown model kind");
  }

  Matrix predict(Matrix const &input) const
  {
    Tape<Scalar> tape;
    return predict(bind(tape), tape.constant(input)).value();
  }

  std::vector<Matrix *> tensors()
  {
    std::vector<Matrix *> out;
    std::visit([&](auto &p) { visit(p, [&](Matrix &m) { out.push_back(&m); }); }, params_);
    return out;
  }

  std::vector<Matrix const *> tensors() const
  {
    std::vector<Matrix const *> out;
    std::visit([&](auto const &p) { visit(p, [&](Matrix const &m) { out.push_back(&m); }); }, params_);
    return out;
  }

  std::size_t param_count() const
  {
    return std::visit([](auto const &p) { return ercl::param_count(p); }, params_);
  }

private:
  Network(ModelKind kind, Storage p, ReadoutSpec r) : kind_(kind), params_(std::move(p)), readout_(r) {}

  ModelKind kind_;
  Storage params_;
  ReadoutSpec readout_;
};

} // namespace ercl
