#include "ercl/learner.hpp"

#include <algorithm>

namespace ercl {

namespace {

template <typename T> AdamWState<float> make_state(AdamWConfig c, T &net)
{
  auto params = net.tensors();
  return AdamWState<float>(c, std::span<Mat<float> *const>(params.data(), params.size()));
}

} // namespace

SupervisedLearner::SupervisedLearner(Network<float> net, AdamWConfig opt, std::size_t capacity, ItemShape shape)
  : net_(std::move(net)), opt_(make_state(opt, net_)), buffer_(capacity, shape)
{
}

Var<float> SupervisedLearner::predict_one(Network<float>::Bound const &bound, Tape<float> &tape,
                                          Vec<float> const &x) const
{
  if (net_.uses_replay()) {
    return net_.predict(bound, tape.constant(build_sl_embedding(buffer_, x)));
  }
  return net_.predict(bound, tape.constant(x));
}

void SupervisedLearner::apply(Tape<float> const &tape, Var<float> loss)
{
  GradientMap<float> const grads = tape.backward(loss);
  auto params = net_.tensors();
  auto const &ids = tape.parameter_ids();
  adamw_step<float>(params, ids, grads, opt_);
}

double SupervisedLearner::train_regression(Vec<float> const &x, float y)
{
  Tape<float> tape;
  auto const bound = net_.bind(tape);
  Var<float> loss = loss_mse(predict_one(bound, tape, x), y);
  double const value = loss.scalar();
  apply(tape, loss);
  if (net_.uses_replay()) {
    buffer_.push({x, Vec<float>::Constant(1, y)});
  }
  return value;
}

double SupervisedLearner::train_classification(Mat<float> const &x, Mat<float> const &onehot)
{
  Index const b = x.cols();
  Tape<float> tape;
  auto const bound = net_.bind(tape);
  Var<float> total;
  if (!net_.uses_replay()) {
    total = loss_cross_entropy(net_.predict(bound, tape.constant(x)), onehot);
  } else {
    for (Index i = 0; i < b; ++i) {
      Var<float> li = loss_cross_entropy(predict_one(bound, tape, x.col(i)), Mat<float>(onehot.col(i)));
      total = i == 0 ? li : add(total, li);
    }
  }
  Var<float> loss = scale(total, 1.0f / static_cast<float>(b));
  double const value = loss.scalar();
  apply(tape, loss);
  if (net_.uses_replay()) {
    // Only the last `capacity` examples of the batch can survive.
    Index const first = std::max<Index>(0, b - static_cast<Index>(buffer_.capacity()));
    for (Index i = first; i < b; ++i) {
      buffer_.push({x.col(i), onehot.col(i)});
    }
  }
  return value;
}

Mat<float> SupervisedLearner::predict(Mat<float> const &x) const
{
  if (!net_.uses_replay()) {
    return net_.predict(x);
  }
  Mat<float> out;
  for (Index i = 0; i < x.cols(); ++i) {
    Mat<float> const p = net_.predict(build_sl_embedding(buffer_, Vec<float>(x.col(i))));
    if (i == 0) {
      out.resize(p.rows(), x.cols());
    }
    out.col(i) = p.col(0);
  }
  return out;
}

TdLearner::TdLearner(Network<float> net, AdamWConfig opt, std::size_t capacity, Index feature_dim, float gamma)
  : net_(std::move(net)), opt_(make_state(opt, net_)), buffer_(capacity, {feature_dim, feature_dim}), gamma_(gamma)
{
}

double TdLearner::observe(Transition<float> const &t)
{
  auto forward = [this](Tape<float> &tape, Var<float> input) { return net_.predict(net_.bind(tape), input); };
  TdResult<float> td;
  if (net_.uses_replay()) {
    EmbeddingPair<float> const e = build_pe_embeddings(buffer_, t.phi, t.phi_next, gamma_);
    td = td_pseudo_gradient<float>(forward, e.z, e.z_next, t.reward, gamma_);
  } else {
    td = td_pseudo_gradient<float>(forward, Mat<float>(t.phi), Mat<float>(t.phi_next), t.reward, gamma_);
  }
  auto params = net_.tensors();
  adamw_step<float>(params, td.ids, td.grads, opt_);
  if (net_.uses_replay()) {
    buffer_.push(t);
  }
  return td.delta;
}

Eigen::VectorXd TdLearner::values(Mat<float> const &features) const
{
  Eigen::VectorXd v(features.rows());
  if (!net_.uses_replay()) {
    Mat<float> const out = net_.predict(Mat<float>(features.transpose()));
    for (Index s = 0; s < features.rows(); ++s) {
      v(s) = out(0, s);
    }
    return v;
  }
  for (Index s = 0; s < features.rows(); ++s) {
    Vec<float> const phi = features.row(s).transpose();
    Mat<float> const z = build_pe_embeddings(buffer_, phi, phi, gamma_).z;
    v(s) = net_.predict(z)(0, 0);
  }
  return v;
}

} // namespace ercl
