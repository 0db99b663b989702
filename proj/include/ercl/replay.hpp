#pragma once

// Fixed-capacity replay buffer and the embeddings built from it.
//
// The buffer keeps the n most recent items; pushing into a full buffer evicts
// the oldest one. Embeddings place buffer items oldest to newest from left to
// right, left-pad with zero columns while the buffer is filling, and append the
// query token as the last column.

#include "grad.hpp"

#include <cstddef>
#include <deque>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ercl {

template <typename Scalar> struct LabeledExample
{
  Vec<Scalar> x;
  Vec<Scalar> y;
};

template <typename Scalar> struct Transition
{
  Vec<Scalar> phi;
  Scalar reward = 0;
  Vec<Scalar> phi_next;
};

struct ItemShape
{
  Index first = 0;  // x or phi length
  Index second = 0; // y length, or phi' length

  bool operator==(ItemShape const &) const = default;
};

template <typename Scalar> ItemShape shape_of(LabeledExample<Scalar> const &e) { return {e.x.size(), e.y.size()}; }
template <typename Scalar> ItemShape shape_of(Transition<Scalar> const &t) { return {t.phi.size(), t.phi_next.size()}; }

template <typename Item> class ReplayBuffer
{
public:
  ReplayBuffer(std::size_t capacity, ItemShape shape) : capacity_(capacity), shape_(shape)
  {
    if (capacity == 0) {
      throw std::invalid_argument("ReplayBuffer: capacity must be positive");
    }
  }

  void push(Item item)
  {
    if (!(shape_of(item) == shape_)) {
      throw ShapeError("ReplayBuffer::push: item shape (" + std::to_string(shape_of(item).first) + "," +
                       std::to_string(shape_of(item).second) + ") does not match buffer (" +
                       std::to_string(shape_.first) + "," + std::to_string(shape_.second) + ")");
    }
    if (items_.size() == capacity_) {
      items_.pop_front();
    }
    items_.push_back(std::move(item));
  }

  /// Oldest to newest snapshot.
  std::vector<Item> contents() const { return {items_.begin(), items_.end()}; }

  std::deque<Item> const &items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  bool full() const { return items_.size() == capacity_; }
  ItemShape shape() const { return shape_; }
  void clear() { items_.clear(); }

private:
  std::size_t capacity_;
  ItemShape shape_;
  std::deque<Item> items_;
};

template <typename Scalar> using SupervisedBuffer = ReplayBuffer<LabeledExample<Scalar>>;
template <typename Scalar> using TransitionBuffer = ReplayBuffer<Transition<Scalar>>;

/// [x^(1) ... x^(n) xq; y^(1) ... y^(n) 0], (d_x + d_y) x (n + 1).
template <typename Scalar>
Mat<Scalar> build_sl_embedding(SupervisedBuffer<Scalar> const &buf, Vec<Scalar> const &xq, std::size_t n)
{
  ItemShape const s = buf.shape();
  if (xq.size() != s.first) {
    throw ShapeError("build_sl_embedding: query has " + std::to_string(xq.size()) + " entries, buffer features have " +
                     std::to_string(s.first));
  }
  if (buf.size() > n) {
    throw std::invalid_argument("build_sl_embedding: buffer holds more items than the embedding capacity");
  }
  auto const cols = static_cast<Index>(n) + 1;
  Mat<Scalar> z = Mat<Scalar>::Zero(s.first + s.second, cols);
  Index col = static_cast<Index>(n - buf.size());
  for (auto const &item : buf.items()) {
    z.col(col).head(s.first) = item.x;
    z.col(col).tail(s.second) = item.y;
    ++col;
  }
  z.col(cols - 1).head(s.first) = xq;
  return z;
}

template <typename Scalar> struct EmbeddingPair
{
  Mat<Scalar> z;
  Mat<Scalar> z_next;
};

/// Replay columns [phi; gamma * phi'; r]; Z ends with [phi_q; 0; 0] and Z'
/// with [phi_q'; 0; 0].
template <typename Scalar>
EmbeddingPair<Scalar> build_pe_embeddings(TransitionBuffer<Scalar> const &buf, Vec<Scalar> const &phi_q,
                                          Vec<Scalar> const &phi_q_next, Scalar gamma, std::size_t n)
{
  ItemShape const s = buf.shape();
  if (phi_q.size() != s.first || phi_q_next.size() != s.first) {
    throw ShapeError("build_pe_embeddings: query features do not match buffer feature length " +
                     std::to_string(s.first));
  }
  if (buf.size() > n) {
    throw std::invalid_argument("build_pe_embeddings: buffer holds more items than the embedding capacity");
  }
  Index const d = s.first;
  auto const cols = static_cast<Index>(n) + 1;
  EmbeddingPair<Scalar> out;
  out.z = Mat<Scalar>::Zero(2 * d + 1, cols);
  Index col = static_cast<Index>(n - buf.size());
  for (auto const &t : buf.items()) {
    out.z.col(col).head(d) = t.phi;
    out.z.col(col).segment(d, d) = gamma * t.phi_next;
    out.z(2 * d, col) = t.reward;
    ++col;
  }
  out.z_next = out.z;
  out.z.col(cols - 1).head(d) = phi_q;
  out.z_next.col(cols - 1).head(d) = phi_q_next;
  return out;
}

template <typename Scalar>
EmbeddingPair<Scalar> build_pe_embeddings(TransitionBuffer<Scalar> const &buf, Vec<Scalar> const &phi_q,
                                          Vec<Scalar> const &phi_q_next, Scalar gamma)
{
  return build_pe_embeddings(buf, phi_q, phi_q_next, gamma, buf.capacity());
}

template <typename Scalar>
Mat<Scalar> build_sl_embedding(SupervisedBuffer<Scalar> const &buf, Vec<Scalar> const &xq)
{
  return build_sl_embedding(buf, xq, buf.capacity());
}

} // namespace ercl
