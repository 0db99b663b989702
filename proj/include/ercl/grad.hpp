#pragma once

// Dense matrices with define-by-run reverse-mode differentiation.
//
// A Tape records every primitive applied to Var handles in topological
// order. backward() walks the tape from a 1x1 root and returns gradients for
// the leaves registered with Tape::parameter(). Everything is templated on
// the scalar so the same model code runs in float for training and in double
// for finite-difference checks.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ercl {

using Index = Eigen::Index;

template <typename Scalar> using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar> using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

class ShapeError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

inline std::string shape_string(Index rows, Index cols)
{
  std::ostringstream os;
  os << rows << "x" << cols;
  return os.str();
}

enum class Activation { relu, tanh };

enum class OpKind {
  leaf,
  matmul,
  matmul_tn, // lhs^T * rhs
  add,
  scale,
  rowwise_softmax,
  relu,
  tanh,
  slice,
  flatten_cols,
  mse,
  cross_entropy,
};

using NodeId = std::size_t;

template <typename Scalar> class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
/// tape is alive.
template <typename Scalar> struct Var
{
  Tape<Scalar> *tape = nullptr;
  NodeId id = 0;

  const Mat<Scalar> &value() const { return tape->value(id); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Scalar scalar() const { return value()(0, 0); }
};

/// Gradient per trainable leaf, keyed by the leaf's node id.
template <typename Scalar> using GradientMap = std::map<NodeId, Mat<Scalar>>;

template <typename Scalar> class Tape
{
public:
  using Matrix = Mat<Scalar>;

  struct Node
  {
    OpKind op = OpKind::leaf;
    NodeId lhs = 0;
    NodeId rhs = 0;
    Scalar factor = 0;     // scale factor, or mse target
    Index row0 = 0, col0 = 0; // slice origin
    bool trainable = false;
    Matrix value;
    Matrix cache; // softmax probabilities for cross_entropy
  };

  Tape() = default;
  Tape(Tape const &) = delete;
  Tape &operator=(Tape const &) = delete;

  Var<Scalar> constant(Matrix m) { return push_leaf(std::move(m), false); }

  Var<Scalar> parameter(Matrix m)
  {
    Var<Scalar> v = push_leaf(std::move(m), true);
    parameter_ids_.push_back(v.id);
    return v;
  }

  Var<Scalar> record(Node node)
  {
    node.value = evaluate(node);
    nodes_.push_back(std::move(node));
    return {this, nodes_.size() - 1};
  }

  const Matrix &value(NodeId id) const { return nodes_.at(id).value; }
  const Node &node(NodeId id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<NodeId> &parameter_ids() const { return parameter_ids_; }

  /// Recompute every node from its recorded inputs.
  std::vector<Matrix> replay() const
  {
    std::vector<Matrix> values;
    values.reserve(nodes_.size());
    for (Node const &n : nodes_) {
      if (n.op == OpKind::leaf) {
        values.push_back(n.value);
      } else {
        values.push_back(evaluate(n, values));
      }
    }
    return values;
  }

  GradientMap<Scalar> backward(Var<Scalar> root) const;

private:
  Var<Scalar> push_leaf(Matrix m, bool trainable)
  {
    Node n;
    n.op = OpKind::leaf;
    n.trainable = trainable;
    n.value = std::move(m);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
  }

  Matrix evaluate(Node &n) const
  {
    struct Lookup
    {
      std::vector<Node> const &nodes;
      Matrix const &operator[](NodeId id) const { return nodes[id].value; }
    };
    return evaluate_with(n, Lookup{nodes_}, &n.cache);
  }

  Matrix evaluate(Node const &n, std::vector<Matrix> const &values) const
  {
    Matrix scratch;
    return evaluate_with(n, values, &scratch);
  }

  template <typename Values> static Matrix evaluate_with(Node const &n, Values const &values, Matrix *cache);

  std::vector<Node> nodes_;
  std::vector<NodeId> parameter_ids_;
};

namespace detail {

template <typename Scalar> Mat<Scalar> softmax_rows(Mat<Scalar> const &x)
{
  Mat<Scalar> y(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    Scalar const mx = x.row(i).maxCoeff();
    y.row(i) = (x.row(i).array() - mx).exp();
    y.row(i) /= y.row(i).sum();
  }
  return y;
}

template <typename Scalar> Mat<Scalar> softmax_cols(Mat<Scalar> const &x)
{
  Mat<Scalar> y(x.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    Scalar const mx = x.col(j).maxCoeff();
    y.col(j) = (x.col(j).array() - mx).exp();
    y.col(j) /= y.col(j).sum();
  }
  return y;
}

template <typename Scalar, typename Derived> void accumulate(Mat<Scalar> &into, Eigen::MatrixBase<Derived> const &delta)
{
  if (into.size() == 0) {
    into.noalias() = delta;
  } else {
    into.noalias() += delta;
  }
}

template <typename Scalar> void accumulate(Mat<Scalar> &into, Mat<Scalar> &&delta)
{
  if (into.size() == 0) {
    into = std::move(delta);
  } else {
    into += delta;
  }
}

template <typename Scalar> void require_same_shape(Var<Scalar> a, Var<Scalar> b, char const *what)
{
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a.rows(), a.cols()) + " vs " +
                     shape_string(b.rows(), b.cols()));
  }
}

} // namespace detail

template <typename Scalar>
template <typename Values>
Mat<Scalar> Tape<Scalar>::evaluate_with(Node const &n, Values const &values, Matrix *cache)
{
  Matrix const &a = values[n.lhs];
  switch (n.op) {
  case OpKind::leaf:
    return n.value;
  case OpKind::matmul:
    return a * values[n.rhs];
  case OpKind::matmul_tn:
    return a.transpose() * values[n.rhs];
  case OpKind::add:
    return a + values[n.rhs];
  case OpKind::scale:
    return a * n.factor;
  case OpKind::rowwise_softmax:
    return detail::softmax_rows<Scalar>(a);
  case OpKind::relu:
    return a.cwiseMax(Scalar(0));
  case OpKind::tanh:
    return a.array().tanh().matrix();
  case OpKind::slice:
    return a.block(n.row0, n.col0, n.value.rows(), n.value.cols());
  case OpKind::flatten_cols:
    return Eigen::Map<Matrix const>(a.data(), a.size(), 1);
  case OpKind::mse: {
    Scalar const d = a(0, 0) - n.factor;
    return Matrix::Constant(1, 1, d * d);
  }
  case OpKind::cross_entropy: {
    Matrix const &onehot = values[n.rhs];
    *cache = detail::softmax_cols<Scalar>(a);
    // log p_k = z_k - max - log(sum exp(z - max)), computed per column
    Scalar total = 0;
    for (Index j = 0; j < a.cols(); ++j) {
      Scalar const mx = a.col(j).maxCoeff();
      Scalar const lse = mx + std::log((a.col(j).array() - mx).exp().sum());
      for (Index k = 0; k < a.rows(); ++k) {
        if (onehot(k, j) != Scalar(0)) {
          total -= onehot(k, j) * (a(k, j) - lse);
        }
      }
    }
    return Matrix::Constant(1, 1, total);
  }
  }
  throw std::logic_error("unknown op");
}

template <typename Scalar> GradientMap<Scalar> Tape<Scalar>::backward(Var<Scalar> root) const
{
  if (root.tape != this) {
    throw std::invalid_argument("backward: root belongs to a different tape");
  }
  Matrix const &rv = value(root.id);
  if (rv.rows() != 1 || rv.cols() != 1) {
    throw ShapeError("backward: root must be a 1x1 scalar, got " + shape_string(rv.rows(), rv.cols()));
  }

  std::vector<Matrix> adj(root.id + 1);
  adj[root.id] = Matrix::Ones(1, 1);

  for (NodeId id = root.id + 1; id-- > 0;) {
    Matrix &g = adj[id];
    if (g.size() == 0) {
      continue;
    }
    Node const &n = nodes_[id];
    switch (n.op) {
    case OpKind::leaf:
      break;
    case OpKind::matmul:
      detail::accumulate<Scalar>(adj[n.lhs], g * nodes_[n.rhs].value.transpose());
      detail::accumulate<Scalar>(adj[n.rhs], nodes_[n.lhs].value.transpose() * g);
      break;
    case OpKind::matmul_tn:
      detail::accumulate<Scalar>(adj[n.lhs], nodes_[n.rhs].value * g.transpose());
      detail::accumulate<Scalar>(adj[n.rhs], nodes_[n.lhs].value * g);
      break;
    case OpKind::add:
      detail::accumulate<Scalar>(adj[n.lhs], g);
      detail::accumulate<Scalar>(adj[n.rhs], g);
      break;
    case OpKind::scale:
      detail::accumulate<Scalar>(adj[n.lhs], g * n.factor);
      break;
    case OpKind::rowwise_softmax: {
      Matrix const &y = n.value;
      Vec<Scalar> const dots = (g.cwiseProduct(y)).rowwise().sum();
      Matrix dx = y.cwiseProduct(g - dots.replicate(1, y.cols()));
      detail::accumulate<Scalar>(adj[n.lhs], std::move(dx));
      break;
    }
    case OpKind::relu: {
      Matrix const &x = nodes_[n.lhs].value;
      Matrix dx = (x.array() > Scalar(0)).select(g, Matrix::Zero(g.rows(), g.cols()));
      detail::accumulate<Scalar>(adj[n.lhs], std::move(dx));
      break;
    }
    case OpKind::tanh: {
      Matrix dx = g.cwiseProduct((Scalar(1) - n.value.array().square()).matrix());
      detail::accumulate<Scalar>(adj[n.lhs], std::move(dx));
      break;
    }
    case OpKind::slice: {
      Matrix &into = adj[n.lhs];
      Matrix const &src = nodes_[n.lhs].value;
      if (into.size() == 0) {
        into = Matrix::Zero(src.rows(), src.cols());
      }
      into.block(n.row0, n.col0, g.rows(), g.cols()) += g;
      break;
    }
    case OpKind::flatten_cols: {
      Matrix const &src = nodes_[n.lhs].value;
      detail::accumulate<Scalar>(adj[n.lhs], Matrix(Eigen::Map<Matrix const>(g.data(), src.rows(), src.cols())));
      break;
    }
    case OpKind::mse: {
      Scalar const d = nodes_[n.lhs].value(0, 0) - n.factor;
      detail::accumulate<Scalar>(adj[n.lhs], Matrix::Constant(1, 1, Scalar(2) * d * g(0, 0)));
      break;
    }
    case OpKind::cross_entropy: {
      // Each onehot column sums to one, so d/dz = (p - y) per column.
      Matrix const &y = nodes_[n.rhs].value;
      detail::accumulate<Scalar>(adj[n.lhs], Matrix((n.cache - y) * g(0, 0)));
      break;
    }
    }
    if (n.op != OpKind::leaf || !n.trainable) {
      g.resize(0, 0);
    }
  }

  GradientMap<Scalar> grads;
  for (NodeId pid : parameter_ids_) {
    Matrix const &pv = nodes_[pid].value;
    if (pid < adj.size() && adj[pid].size() != 0) {
      grads.emplace(pid, std::move(adj[pid]));
    } else {
      grads.emplace(pid, Matrix::Zero(pv.rows(), pv.cols()));
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Primitive operations. Each records one node on the tape of its inputs.

namespace detail {
template <typename Scalar> Tape<Scalar> &tape_of(Var<Scalar> a, Var<Scalar> b)
{
  if (a.tape == nullptr || a.tape != b.tape) {
    throw std::invalid_argument("operands recorded on different tapes");
  }
  return *a.tape;
}

template <typename Scalar> typename Tape<Scalar>::Node make_node(OpKind op, NodeId lhs, NodeId rhs = 0)
{
  typename Tape<Scalar>::Node n;
  n.op = op;
  n.lhs = lhs;
  n.rhs = rhs;
  return n;
}
} // namespace detail

template <typename Scalar> Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b)
{
  Tape<Scalar> &t = detail::tape_of(a, b);
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: cannot multiply " + shape_string(a.rows(), a.cols()) + " by " +
                     shape_string(b.rows(), b.cols()));
  }
  return t.record(detail::make_node<Scalar>(OpKind::matmul, a.id, b.id));
}

/// a^T * b without materializing the transpose as a separate node.
template <typename Scalar> Var<Scalar> matmul_tn(Var<Scalar> a, Var<Scalar> b)
{
  Tape<Scalar> &t = detail::tape_of(a, b);
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: cannot multiply transpose of " + shape_string(a.rows(), a.cols()) + " by " +
                     shape_string(b.rows(), b.cols()));
  }
  return t.record(detail::make_node<Scalar>(OpKind::matmul_tn, a.id, b.id));
}

template <typename Scalar> Var<Scalar> add(Var<Scalar> a, Var<Scalar> b)
{
  Tape<Scalar> &t = detail::tape_of(a, b);
  detail::require_same_shape(a, b, "add");
  return t.record(detail::make_node<Scalar>(OpKind::add, a.id, b.id));
}

template <typename Scalar> Var<Scalar> scale(Var<Scalar> a, Scalar factor)
{
  auto n = detail::make_node<Scalar>(OpKind::scale, a.id);
  n.factor = factor;
  return a.tape->record(std::move(n));
}

template <typename Scalar> Var<Scalar> rowwise_softmax(Var<Scalar> a)
{
  return a.tape->record(detail::make_node<Scalar>(OpKind::rowwise_softmax, a.id));
}

template <typename Scalar> Var<Scalar> relu(Var<Scalar> a)
{
  return a.tape->record(detail::make_node<Scalar>(OpKind::relu, a.id));
}

template <typename Scalar> Var<Scalar> tanh(Var<Scalar> a)
{
  return a.tape->record(detail::make_node<Scalar>(OpKind::tanh, a.id));
}

template <typename Scalar> Var<Scalar> activation(Var<Scalar> a, Activation kind)
{
  return kind == Activation::relu ? relu(a) : tanh(a);
}

template <typename Scalar> Var<Scalar> slice(Var<Scalar> a, Index row0, Index rows, Index col0, Index cols)
{
  if (row0 < 0 || col0 < 0 || rows < 1 || cols < 1 || row0 + rows > a.rows() || col0 + cols > a.cols()) {
    std::ostringstream os;
    os << "slice: block (" << row0 << "," << col0 << ") of size " << shape_string(rows, cols) << " outside "
       << shape_string(a.rows(), a.cols());
    throw ShapeError(os.str());
  }
  auto n = detail::make_node<Scalar>(OpKind::slice, a.id);
  n.row0 = row0;
  n.col0 = col0;
  n.value.resize(rows, cols); // shape carrier, overwritten by record()
  return a.tape->record(std::move(n));
}

template <typename Scalar> Var<Scalar> column(Var<Scalar> a, Index j) { return slice(a, 0, a.rows(), j, 1); }

/// Stack the columns of `a` into one column vector (column-major order).
template <typename Scalar> Var<Scalar> flatten_cols(Var<Scalar> a)
{
  return a.tape->record(detail::make_node<Scalar>(OpKind::flatten_cols, a.id));
}

/// (pred - target)^2 for a 1x1 prediction.
template <typename Scalar> Var<Scalar> loss_mse(Var<Scalar> pred, Scalar target)
{
  if (pred.rows() != 1 || pred.cols() != 1) {
    throw ShapeError("loss_mse: prediction must be 1x1, got " + shape_string(pred.rows(), pred.cols()));
  }
  auto n = detail::make_node<Scalar>(OpKind::mse, pred.id);
  n.factor = target;
  return pred.tape->record(std::move(n));
}

/// Softmax cross-entropy summed over columns. Each column of `onehot` must
/// hold exactly one 1; callers wanting a batch mean scale the result.
template <typename Scalar> Var<Scalar> loss_cross_entropy(Var<Scalar> logits, Mat<Scalar> const &onehot)
{
  if (onehot.rows() != logits.rows() || onehot.cols() != logits.cols()) {
    throw ShapeError("loss_cross_entropy: onehot " + shape_string(onehot.rows(), onehot.cols()) +
                     " does not match logits " + shape_string(logits.rows(), logits.cols()));
  }
  for (Index j = 0; j < onehot.cols(); ++j) {
    Index ones = 0;
    for (Index k = 0; k < onehot.rows(); ++k) {
      Scalar const v = onehot(k, j);
      if (v == Scalar(1)) {
        ++ones;
      } else if (v != Scalar(0)) {
        throw std::invalid_argument("loss_cross_entropy: onehot entries must be 0 or 1");
      }
    }
    if (ones != 1) {
      throw std::invalid_argument("loss_cross_entropy: onehot column " + std::to_string(j) +
                                  " must contain exactly one 1");
    }
  }
  Var<Scalar> y = logits.tape->constant(onehot);
  return logits.tape->record(detail::make_node<Scalar>(OpKind::cross_entropy, logits.id, y.id));
}

template <typename Scalar> GradientMap<Scalar> backward(Tape<Scalar> const &tape, Var<Scalar> root)
{
  return tape.backward(root);
}

/// Eager row-wise softmax on a plain matrix.
template <typename Scalar> Mat<Scalar> rowwise_softmax(Mat<Scalar> const &m) { return detail::softmax_rows<Scalar>(m); }

} // namespace ercl
