#pragma once

#include "grad.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace ercl {

struct AdamWConfig
{
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

template <typename Scalar> struct AdamWState
{
  AdamWConfig config;
  std::vector<Mat<Scalar>> m; // first moments, one per parameter tensor
  std::vector<Mat<Scalar>> v; // second moments
  std::int64_t step = 0;

  AdamWState() = default;
  AdamWState(AdamWConfig c, std::span<Mat<Scalar> *const> params) : config(c)
  {
    for (auto const *p : params) {
      m.push_back(Mat<Scalar>::Zero(p->rows(), p->cols()));
      v.push_back(Mat<Scalar>::Zero(p->rows(), p->cols()));
    }
  }
};

/// One decoupled-weight-decay Adam update.
///
/// `ids[i]` is the tape node that held `params[i]`; its gradient is looked up
/// in `grads`. Moments are kept in Scalar, bias corrections in double.
template <typename Scalar>
void adamw_step(std::span<Mat<Scalar> *const> params,
                std::span<NodeId const> ids,
                GradientMap<Scalar> const &grads,
                AdamWState<Scalar> &state)
{
  if (ids.size() != params.size() || state.m.size() != params.size()) {
    throw std::invalid_argument("adamw_step: parameter, id and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads.find(ids[i]) == grads.end()) {
      throw std::invalid_argument("adamw_step: missing gradient for parameter " + std::to_string(i));
    }
  }

  AdamWConfig const &c = state.config;
  state.step += 1;
  double const bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  double const bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  auto const b1 = static_cast<Scalar>(c.beta1);
  auto const b2 = static_cast<Scalar>(c.beta2);
  auto const step_size = static_cast<Scalar>(c.lr / bc1);
  auto const inv_sqrt_bc2 = static_cast<Scalar>(1.0 / std::sqrt(bc2));
  auto const eps = static_cast<Scalar>(c.eps);
  auto const decay = static_cast<Scalar>(1.0 - c.lr * c.weight_decay);

  for (std::size_t i = 0; i < params.size(); ++i) {
    Mat<Scalar> const &g = grads.at(ids[i]);
    Mat<Scalar> &theta = *params[i];
    if (g.rows() != theta.rows() || g.cols() != theta.cols()) {
      throw ShapeError("adamw_step: gradient " + shape_string(g.rows(), g.cols()) + " for parameter " +
                       shape_string(theta.rows(), theta.cols()));
    }
    state.m[i] = b1 * state.m[i] + (Scalar(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (Scalar(1) - b2) * g.cwiseProduct(g);
    // theta <- theta - lr*wd*theta - lr * m_hat / (sqrt(v_hat) + eps)
    theta.array() = decay * theta.array() - step_size * state.m[i].array() / (state.v[i].array().sqrt() * inv_sqrt_bc2 + eps);
  }
}

struct TdConfig
{
  double lr = 1e-3;
  double gamma = 0.9;
};

template <typename Scalar> struct TdResult
{
  Scalar delta = 0;
  Scalar value = 0;      // f(Z)
  Scalar next_value = 0; // f(Z')
  std::vector<NodeId> ids;
  GradientMap<Scalar> grads; // -delta * grad f(Z)
};

/// Semi-gradient TD pseudo-gradient.
///
/// `forward(tape, input)` binds the learner's parameters on `tape` and returns
/// its 1x1 value for `input`. f(Z') is evaluated on a throwaway tape so the
/// bootstrapped target contributes nothing to the gradient. The returned
/// gradient is sign-flipped: a minimizing optimizer fed with it moves theta
/// along +delta * grad f(Z).
template <typename Scalar, typename Forward>
TdResult<Scalar> td_pseudo_gradient(Forward &&forward, Mat<Scalar> const &z, Mat<Scalar> const &z_next, Scalar reward,
                                    Scalar gamma)
{
  if (z.rows() != z_next.rows() || z.cols() != z_next.cols()) {
    throw ShapeError("td_pseudo_gradient: Z " + shape_string(z.rows(), z.cols()) + " and Z' " +
                     shape_string(z_next.rows(), z_next.cols()) + " differ");
  }
  TdResult<Scalar> out;
  {
    Tape<Scalar> target_tape;
    out.next_value = forward(target_tape, target_tape.constant(z_next)).scalar();
  }
  Tape<Scalar> tape;
  Var<Scalar> v = forward(tape, tape.constant(z));
  out.value = v.scalar();
  out.delta = reward + gamma * out.next_value - out.value;
  out.grads = tape.backward(v);
  for (auto &[id, g] : out.grads) {
    g *= -out.delta;
  }
  out.ids = tape.parameter_ids();
  return out;
}

} // namespace ercl
