#include "ercl/boyan.hpp"


#include <numeric>
#include <queue>
#include <string>
#include <vector>

namespace ercl {

BoyanTask boyan_generate(Rng &rng, int m, int d, double gamma)
{
  if (m < 3 || d < 1) {
    throw std::invalid_argument("boyan_generate: need m >= 3 and d >= 1");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("boyan_generate: gamma must lie in [0, 1)");
  }
  BoyanTask t;
  t.gamma = gamma;
  t.phi.resize(m, d);
  for (int s = 0; s < m; ++s) {
    for (int k = 0; k < d; ++k) {
      t.phi(s, k) = rng.uniform(-1.0, 1.0);
    }
  }
  t.r.resize(m);
  for (int s = 0; s < m; ++s) {
    t.r(s) = rng.uniform(-1.0, 1.0);
  }
  t.P = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m - 2; ++i) {
    double const eps = rng.uniform();
    t.P(i, i + 1) = eps;
    t.P(i, i + 2) = 1.0 - eps;
  }
  t.P(m - 2, m - 1) = 1.0;
  Eigen::VectorXd z(m);
  for (int s = 0; s < m; ++s) {
    z(s) = rng.uniform();
  }
  t.P.row(m - 1) = z.transpose() / z.sum();

  t.mu = solve_stationary(t.P);
  t.v = solve_values(t.P, t.r, gamma);
  return t;
}

BoyanTask boyan_generate(std::uint64_t seed, int m, int d, double gamma)
{
  Rng rng(seed);
  return boyan_generate(rng, m, d, gamma);
}

Eigen::VectorXd solve_stationary(Eigen::MatrixXd const &P)
{
  Eigen::Index const m = P.rows();
  if (P.cols() != m || m == 0) {
    throw std::invalid_argument("solve_stationary: P must be square and non-empty");
  }
  Eigen::MatrixXd A(m + 1, m);
  A.topRows(m) = P.transpose() - Eigen::MatrixXd::Identity(m, m);
  A.row(m).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m + 1);
  b(m) = 1.0;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < m) {
    throw NumericalError("solve_stationary: chain has no unique stationary distribution (rank " +
                         std::to_string(qr.rank()) + " < " + std::to_string(m) + ")");
  }
  Eigen::VectorXd mu = qr.solve(b);
  // One refinement step, then renormalize.
  mu += qr.solve(b - A * mu);
  mu /= mu.sum();
  double const residual = (P.transpose() * mu - mu).lpNorm<1>();
  if (residual > 1e-9) {
    throw NumericalError("solve_stationary: residual " + std::to_string(residual) + " too large");
  }
  return mu;
}

Eigen::VectorXd solve_values(Eigen::MatrixXd const &P, Eigen::VectorXd const &r, double gamma)
{
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("solve_values: gamma must lie in [0, 1)");
  }
  Eigen::Index const m = P.rows();
  Eigen::MatrixXd const A = Eigen::MatrixXd::Identity(m, m) - gamma * P;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible()) {
    throw NumericalError("solve_values: I - gamma P is singular");
  }
  Eigen::VectorXd v = lu.solve(r);
  v += lu.solve(r - A * v);
  double const residual = (v - (r + gamma * P * v)).lpNorm<Eigen::Infinity>();
  if (residual > 1e-8) {
    throw NumericalError("solve_values: Bellman residual " + std::to_string(residual) + " too large");
  }
  return v;
}

bool is_ergodic(Eigen::MatrixXd const &P)
{
  Eigen::Index const m = P.rows();
  auto reach = [&](bool forward) {
    std::vector<int> level(std::size_t(m), -1);
    std::queue<Eigen::Index> q;
    level[0] = 0;
    q.push(0);
    while (!q.empty()) {
      Eigen::Index const u = q.front();
      q.pop();
      for (Eigen::Index w = 0; w < m; ++w) {
        double const p = forward ? P(u, w) : P(w, u);
        if (p > 0.0 && level[std::size_t(w)] < 0) {
          level[std::size_t(w)] = level[std::size_t(u)] + 1;
          q.push(w);
        }
      }
    }
    return level;
  };
  std::vector<int> const fwd = reach(true);
  std::vector<int> const bwd = reach(false);
  for (Eigen::Index s = 0; s < m; ++s) {
    if (fwd[std::size_t(s)] < 0 || bwd[std::size_t(s)] < 0) {
      return false;
    }
  }
  // Period = gcd over edges u->w of level(u) + 1 - level(w).
  int period = 0;
  for (Eigen::Index u = 0; u < m; ++u) {
    for (Eigen::Index w = 0; w < m; ++w) {
      if (P(u, w) > 0.0) {
        period = std::gcd(period, std::abs(fwd[std::size_t(u)] + 1 - fwd[std::size_t(w)]));
      }
    }
  }
  return period == 1;
}

Eigen::Index sample_index(Eigen::VectorXd const &probs, Rng &rng)
{
  double const u = rng.uniform();
  double acc = 0.0;
  Eigen::Index last_positive = 0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs(i) > 0.0) {
      last_positive = i;
      acc += probs(i);
      if (u < acc) {
        return i;
      }
    }
  }
  return last_positive; // rounding slack at the top of the range
}

BoyanStep boyan_step(BoyanTask const &task, Eigen::Index s, Rng &rng)
{
  if (s < 0 || s >= task.states()) {
    throw std::out_of_range("boyan_step: state " + std::to_string(s) + " out of range");
  }
  BoyanStep out;
  out.next = sample_index(task.P.row(s).transpose(), rng);
  out.reward = task.r(s);
  out.transition.phi = task.phi.row(s).transpose();
  out.transition.reward = out.reward;
  out.transition.phi_next = task.phi.row(out.next).transpose();
  return out;
}

double msve(Eigen::VectorXd const &v_hat, BoyanTask const &task)
{
  if (v_hat.size() != task.v.size() || task.mu.size() != task.v.size()) {
    throw std::invalid_argument("msve: estimate has " + std::to_string(v_hat.size()) + " entries for " +
                                std::to_string(task.v.size()) + " states");
  }
  return task.mu.dot((v_hat - task.v).array().square().matrix());
}

namespace {

nlohmann::json matrix_json(Eigen::MatrixXd const &m)
{
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      row.push_back(m(i, j));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json vector_json(Eigen::VectorXd const &v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::MatrixXd matrix_from(nlohmann::json const &j)
{
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), j.empty() ? 0 : static_cast<Eigen::Index>(j[0].size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      m(i, k) = j.at(std::size_t(i)).at(std::size_t(k)).get<double>();
    }
  }
  return m;
}

Eigen::VectorXd vector_from(nlohmann::json const &j)
{
  auto const v = j.get<std::vector<double>>();
  return Eigen::Map<Eigen::VectorXd const>(v.data(), static_cast<Eigen::Index>(v.size()));
}

} // namespace

nlohmann::json boyan_to_json(BoyanTask const &task)
{
  return {
    {"format", "ercl-boyan-task"},
    {"version", 1},
    {"states", task.states()},
    {"feature_dim", task.feature_dim()},
    {"gamma", task.gamma},
    {"P", matrix_json(task.P)},
    {"r", vector_json(task.r)},
    {"phi", matrix_json(task.phi)},
    {"mu", vector_json(task.mu)},
    {"v", vector_json(task.v)},
  };
}

BoyanTask boyan_from_json(nlohmann::json const &j)
{
  BoyanTask t;
  t.gamma = j.at("gamma").get<double>();
  t.P = matrix_from(j.at("P"));
  t.r = vector_from(j.at("r"));
  t.phi = matrix_from(j.at("phi"));
  t.mu = vector_from(j.at("mu"));
  t.v = vector_from(j.at("v"));
  return t;
}

} // namespace ercl
