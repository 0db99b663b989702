#pragma once

// Online learners. They see a stream of examples or transitions and nothing
// else: no task index, no task length, no boundary signal.

#include "models.hpp"
#include "optim.hpp"
#include "replay.hpp"

#include <cstdint>
#include <vector>

namespace ercl {

class SupervisedLearner
{
public:
  /// `shape` gives feature and target lengths of a buffered example.
  SupervisedLearner(Network<float> net, AdamWConfig opt, std::size_t capacity, ItemShape shape);

  /// One AdamW step on (pred - y)^2. Returns the pre-update loss.
  double train_regression(Vec<float> const &x, float y);

  /// One AdamW step on the batch-mean cross-entropy. `x` holds one example
  /// per column, `onehot` the matching targets. Every example in the batch
  /// sees the same replay snapshot; the batch is pushed afterwards. Returns
  /// the pre-update mean loss.
  double train_classification(Mat<float> const &x, Mat<float> const &onehot);

  /// Predictions (one column per input column) from the current buffer,
  /// which is left untouched.
  Mat<float> predict(Mat<float> const &x) const;

  Network<float> const &network() const { return net_; }
  Network<float> &network() { return net_; }
  SupervisedBuffer<float> const &buffer() const { return buffer_; }
  std::int64_t steps() const { return opt_.step; }

  /// Embedding for query `x` against the current buffer.
  Mat<float> embed(Vec<float> const &x) const { return build_sl_embedding(buffer_, x); }

private:
  Var<float> predict_one(Network<float>::Bound const &bound, Tape<float> &tape, Vec<float> const &x) const;
  void apply(Tape<float> const &tape, Var<float> loss);

  Network<float> net_;
  AdamWState<float> opt_;
  SupervisedBuffer<float> buffer_;
};

class TdLearner
{
public:
  TdLearner(Network<float> net, AdamWConfig opt, std::size_t capacity, Index feature_dim, float gamma);

  /// One semi-gradient TD step through AdamW, then push the transition.
  /// Returns the TD error before the update.
  double observe(Transition<float> const &t);

  /// Value estimate per row of `features` (states x d), using the current
  /// buffer as context for replay learners.
  Eigen::VectorXd values(Mat<float> const &features) const;

  Network<float> const &network() const { return net_; }
  TransitionBuffer<float> const &buffer() const { return buffer_; }
  std::int64_t steps() const { return opt_.step; }

private:
  Network<float> net_;
  AdamWState<float> opt_;
  TransitionBuffer<float> buffer_;
  float gamma_;
};

} // namespace ercl
