#pragma once

// Slowly-changing regression: binary features whose first f bits drift by one
// flip per task, targets from a fixed random linear-threshold network.

#include "rng.hpp"

#include <Eigen/Dense>

#include <cstdint>

namespace ercl {

/// One hidden layer of linear threshold units with +-1 weights and a linear
/// +-1 output layer without bias.
struct LtuNet
{
  Eigen::MatrixXi hidden_weights; // hidden x m, entries in {-1, +1}
  Eigen::VectorXi output_weights; // hidden, entries in {-1, +1}
  Eigen::VectorXd thresholds;     // (m + 1) * beta - S_i per hidden unit
  double beta = 0.7;
};

/// Unit i fires iff sum_j w_ij x_j > (m + 1) * beta - S_i, where S_i counts the
/// -1 weights of unit i.
LtuNet make_ltu_net(Eigen::MatrixXi hidden_weights, Eigen::VectorXi output_weights, double beta);

double ltu_forward(LtuNet const &net, Eigen::VectorXd const &x);
Eigen::VectorXi ltu_hidden(LtuNet const &net, Eigen::VectorXd const &x);

struct ScrConfig
{
  int m = 20;
  int f = 15;
  int hidden = 100;
  double beta = 0.7;
};

struct ScrState
{
  ScrConfig config;
  Eigen::VectorXd fixed_bits; // length f, entries 0/1
  LtuNet target;
  Rng rng;
};

struct ScrExample
{
  Eigen::VectorXd x;
  double y = 0.0;
};

/// `rng` draws the target network, the initial bits, and every later example.
ScrState scr_init(Rng rng, ScrConfig const &config);
ScrState scr_init(std::uint64_t seed, int m, int f);

ScrExample scr_next_example(ScrState &state);

/// Flip one uniformly chosen bit among the first f.
void scr_advance_task(ScrState &state);

} // namespace ercl
