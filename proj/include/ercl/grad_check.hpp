#pragma once

#include "grad.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace ercl {

struct GradCheckReport
{
  std::vector<double> max_relative_error; // one per parameter tensor
  double worst = 0.0;
  bool passed = false;
};

/// Relative error with a small absolute floor so that gradients that are
/// zero on both sides do not divide by zero.
inline double relative_error(double analytic, double numeric, double floor = 1e-6)
{
  double const denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

/// Builds the forward pass on `tape` from the bound parameters and returns a
/// 1x1 root.
template <typename Scalar>
using ForwardFn = std::function<Var<Scalar>(Tape<Scalar> &, std::span<Var<Scalar> const>)>;

/// Analytic gradients of `forward` at `params`.
template <typename Scalar>
std::vector<Mat<Scalar>> analytic_gradients(ForwardFn<Scalar> const &forward, std::vector<Mat<Scalar>> const &params)
{
  Tape<Scalar> tape;
  std::vector<Var<Scalar>> bound;
  bound.reserve(params.size());
  for (auto const &p : params) {
    bound.push_back(tape.parameter(p));
  }
  Var<Scalar> root = forward(tape, bound);
  GradientMap<Scalar> grads = tape.backward(root);
  std::vector<Mat<Scalar>> out;
  out.reserve(params.size());
  for (auto const &b : bound) {
    out.push_back(grads.at(b.id));
  }
  return out;
}

template <typename Scalar>
Scalar evaluate_forward(ForwardFn<Scalar> const &forward, std::vector<Mat<Scalar>> const &params)
{
  Tape<Scalar> tape;
  std::vector<Var<Scalar>> bound;
  for (auto const &p : params) {
    bound.push_back(tape.parameter(p));
  }
  return forward(tape, bound).scalar();
}

/// Fourth-order central differences:
/// (-f(x+2h) + 8 f(x+h) - 8 f(x-h) + f(x-2h)) / 12h.
template <typename Scalar>
std::vector<Mat<Scalar>> numeric_gradients(ForwardFn<Scalar> const &forward, std::vector<Mat<Scalar>> params,
                                           double epsilon)
{
  std::vector<Mat<Scalar>> out;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Mat<Scalar> g(params[p].rows(), params[p].cols());
    for (Index i = 0; i < params[p].size(); ++i) {
      Scalar const saved = params[p].data()[i];
      auto at = [&](double offset) {
        params[p].data()[i] = saved + Scalar(offset);
        return static_cast<double>(evaluate_forward(forward, params));
      };
      double const d = (-at(2 * epsilon) + 8 * at(epsilon) - 8 * at(-epsilon) + at(-2 * epsilon)) / (12 * epsilon);
      params[p].data()[i] = saved;
      g.data()[i] = Scalar(d);
    }
    out.push_back(std::move(g));
  }
  return out;
}

/// Compare `analytic` against central differences of `forward`.
template <typename Scalar>
GradCheckReport compare_gradients(ForwardFn<Scalar> const &forward,
                                  std::vector<Mat<Scalar>> const &params,
                                  std::vector<Mat<Scalar>> const &analytic,
                                  double epsilon,
                                  double tol)
{
  std::vector<Mat<Scalar>> const numeric = numeric_gradients(forward, params, epsilon);
  GradCheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    double worst = 0.0;
    for (Index i = 0; i < params[p].size(); ++i) {
      worst = std::max(worst, relative_error(analytic[p].data()[i], numeric[p].data()[i]));
    }
    report.max_relative_error.push_back(worst);
    report.worst = std::max(report.worst, worst);
  }
  report.passed = report.worst < tol;
  return report;
}

template <typename Scalar>
GradCheckReport grad_check(ForwardFn<Scalar> const &forward,
                           std::vector<Mat<Scalar>> const &params,
                           double epsilon = 1e-5,
                           double tol = 1e-4)
{
  return compare_gradients(forward, params, analytic_gradients(forward, params), epsilon, tol);
}

} // namespace ercl
