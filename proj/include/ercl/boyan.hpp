#pragma once

// Boyan's chain Markov reward processes with random features, plus the exact
// stationary distribution and value function used to score learners.

#include "replay.hpp"
#include "rng.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <stdexcept>

namespace ercl {

class NumericalError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct BoyanTask
{
  Eigen::MatrixXd P;   // m x m, row-stochastic
  Eigen::VectorXd r;   // reward of the source state
  Eigen::MatrixXd phi; // m x d, row s is phi(s)
  double gamma = 0.9;
  Eigen::VectorXd mu; // stationary distribution, also the initial distribution
  Eigen::VectorXd v;  // true values

  Eigen::Index states() const { return P.rows(); }
  Eigen::Index feature_dim() const { return phi.cols(); }
};

BoyanTask boyan_generate(Rng &rng, int m, int d, double gamma);
BoyanTask boyan_generate(std::uint64_t seed, int m, int d, double gamma);

/// mu with mu^T P = mu^T and sum(mu) = 1, from (P^T - I) mu = 0 plus the
/// normalization row.
Eigen::VectorXd solve_stationary(Eigen::MatrixXd const &P);

/// v = (I - gamma P)^{-1} r.
Eigen::VectorXd solve_values(Eigen::MatrixXd const &P, Eigen::VectorXd const &r, double gamma);

/// Strongly connected and aperiodic transition graph.
bool is_ergodic(Eigen::MatrixXd const &P);

struct BoyanStep
{
  Eigen::Index next = 0;
  double reward = 0.0;
  Transition<double> transition;
};

BoyanStep boyan_step(BoyanTask const &task, Eigen::Index s, Rng &rng);

/// Draw from a probability vector.
Eigen::Index sample_index(Eigen::VectorXd const &probs, Rng &rng);

/// sum_s mu(s) (v_hat(s) - v(s))^2
double msve(Eigen::VectorXd const &v_hat, BoyanTask const &task);

nlohmann::json boyan_to_json(BoyanTask const &task);
BoyanTask boyan_from_json(nlohmann::json const &j);

} // namespace ercl
