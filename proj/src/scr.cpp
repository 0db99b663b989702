#include "ercl/scr.hpp"

#include <stdexcept>
#include <string>
#include <utility>

namespace ercl {

LtuNet make_ltu_net(Eigen::MatrixXi hidden_weights, Eigen::VectorXi output_weights, double beta)
{
  if (hidden_weights.rows() != output_weights.size()) {
    throw std::invalid_argument("make_ltu_net: hidden and output layer sizes differ");
  }
  LtuNet net;
  net.beta = beta;
  auto const m = static_cast<double>(hidden_weights.cols());
  net.thresholds.resize(hidden_weights.rows());
  for (Eigen::Index i = 0; i < hidden_weights.rows(); ++i) {
    auto const negatives = static_cast<double>((hidden_weights.row(i).array() < 0).count());
    net.thresholds(i) = (m + 1.0) * beta - negatives;
  }
  net.hidden_weights = std::move(hidden_weights);
  net.output_weights = std::move(output_weights);
  return net;
}

Eigen::VectorXi ltu_hidden(LtuNet const &net, Eigen::VectorXd const &x)
{
  if (x.size() != net.hidden_weights.cols()) {
    throw std::invalid_argument("ltu_forward: input has " + std::to_string(x.size()) + " entries, expected " +
                                std::to_string(net.hidden_weights.cols()));
  }
  Eigen::VectorXd const pre = net.hidden_weights.cast<double>() * x;
  return (pre.array() > net.thresholds.array()).cast<int>();
}

double ltu_forward(LtuNet const &net, Eigen::VectorXd const &x)
{
  return static_cast<double>(net.output_weights.dot(ltu_hidden(net, x)));
}

ScrState scr_init(Rng rng, ScrConfig const &config)
{
  if (config.m < 1 || config.f <= 0 || config.f >= config.m) {
    throw std::invalid_argument("scr_init: need 0 < f < m, got f=" + std::to_string(config.f) +
                                " m=" + std::to_string(config.m));
  }
  if (config.hidden < 1) {
    throw std::invalid_argument("scr_init: hidden size must be positive");
  }
  ScrState s{config, {}, {}, std::move(rng)};
  Eigen::MatrixXi hidden(config.hidden, config.m);
  for (int i = 0; i < config.hidden; ++i) {
    for (int j = 0; j < config.m; ++j) {
      hidden(i, j) = s.rng.coin() ? 1 : -1;
    }
  }
  Eigen::VectorXi out(config.hidden);
  for (int i = 0; i < config.hidden; ++i) {
    out(i) = s.rng.coin() ? 1 : -1;
  }
  s.target = make_ltu_net(std::move(hidden), std::move(out), config.beta);

  s.fixed_bits.resize(config.f);
  for (int i = 0; i < config.f; ++i) {
    s.fixed_bits(i) = s.rng.coin() ? 1.0 : 0.0;
  }
  return s;
}

ScrState scr_init(std::uint64_t seed, int m, int f)
{
  ScrConfig c;
  c.m = m;
  c.f = f;
  return scr_init(Rng(seed), c);
}

ScrExample scr_next_example(ScrState &state)
{
  ScrExample e;
  e.x.resize(state.config.m);
  e.x.head(state.config.f) = state.fixed_bits;
  for (int j = state.config.f; j < state.config.m; ++j) {
    e.x(j) = state.rng.coin() ? 1.0 : 0.0;
  }
  e.y = ltu_forward(state.target, e.x);
  return e;
}

void scr_advance_task(ScrState &state)
{
  auto const i = static_cast<Eigen::Index>(state.rng.index(static_cast<std::uint64_t>(state.config.f)));
  state.fixed_bits(i) = 1.0 - state.fixed_bits(i);
}

} // namespace ercl
