#include "ercl/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace ercl {

std::string to_string(MetricKind k)
{
  switch (k) {
  case MetricKind::train_mse:
    return "train_mse";
  case MetricKind::test_accuracy:
    return "test_accuracy";
  case MetricKind::msve:
    return "msve";
  }
  return "unknown";
}

std::vector<double> bin_average(std::span<double const> values, std::size_t width)
{
  if (width == 0) {
    throw std::invalid_argument("bin_average: width must be >= 1");
  }
  std::vector<double> out;
  for (std::size_t start = 0; start < values.size(); start += width) {
    std::size_t const end = std::min(values.size(), start + width);
    double sum = 0.0;
    for (std::size_t i = start; i < end; ++i) {
      sum += values[i];
    }
    out.push_back(sum / static_cast<double>(end - start));
  }
  return out;
}

BinnedSeries bin_average(MetricsSeries const &series, std::size_t width)
{
  BinnedSeries out;
  out.mean = bin_average(series.values, width);
  for (std::size_t start = 0; start < series.size(); start += width) {
    std::size_t const end = std::min(series.size(), start + width);
    out.step_start.push_back(series.steps[start]);
    out.step_end.push_back(series.steps[end - 1]);
  }
  return out;
}

AggregateSeries aggregate(std::span<BinnedSeries const> per_seed)
{
  if (per_seed.empty()) {
    throw std::invalid_argument("aggregate: no series");
  }
  std::size_t const bins = per_seed.front().mean.size();
  for (auto const &s : per_seed) {
    if (s.mean.size() != bins) {
      throw std::invalid_argument("aggregate: ragged series (" + std::to_string(s.mean.size()) + " vs " +
                                  std::to_string(bins) + " bins)");
    }
  }
  AggregateSeries out;
  out.seed_count = per_seed.size();
  out.step_start = per_seed.front().step_start;
  out.step_end = per_seed.front().step_end;
  auto const n = static_cast<double>(per_seed.size());
  for (std::size_t b = 0; b < bins; ++b) {
    double sum = 0.0;
    for (auto const &s : per_seed) {
      sum += s.mean[b];
    }
    double const mean = sum / n;
    double se = 0.0;
    if (per_seed.size() > 1) {
      double ss = 0.0;
      for (auto const &s : per_seed) {
        ss += (s.mean[b] - mean) * (s.mean[b] - mean);
      }
      se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
    out.mean.push_back(mean);
    out.std_error.push_back(se);
  }
  return out;
}

double ls_slope(std::span<double const> x, std::span<double const> y)
{
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("ls_slope: need two or more paired points");
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) {
    throw std::invalid_argument("ls_slope: x has no spread");
  }
  return sxy / sxx;
}

} // namespace ercl
