#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ercl {

enum class MetricKind { train_mse, test_accuracy, msve };

std::string to_string(MetricKind k);

struct MetricsSeries
{
  MetricKind kind = MetricKind::train_mse;
  std::vector<std::int64_t> steps; // optimizer step count when the value was recorded, increasing
  std::vector<double> values;

  void record(std::int64_t step, double value)
  {
    steps.push_back(step);
    values.push_back(value);
  }
  std::size_t size() const { return values.size(); }
};

struct BinnedSeries
{
  std::vector<double> mean;
  std::vector<std::int64_t> step_start; // first recorded step in the bin
  std::vector<std::int64_t> step_end;   // last recorded step in the bin
};

/// Means of consecutive non-overlapping windows of `width` values; the final
/// partial window is averaged over its actual length.
std::vector<double> bin_average(std::span<double const> values, std::size_t width);
BinnedSeries bin_average(MetricsSeries const &series, std::size_t width);

struct AggregateSeries
{
  std::size_t seed_count = 0;
  std::vector<double> mean;
  std::vector<double> std_error; // sample stddev / sqrt(seeds); 0 for a single seed
  std::vector<std::int64_t> step_start;
  std::vector<std::int64_t> step_end;

  std::size_t bins() const { return mean.size(); }
};

/// Per-bin mean and standard error across seeds. All series must have the
/// same number of bins.
AggregateSeries aggregate(std::span<BinnedSeries const> per_seed);

/// Ordinary least-squares slope of y against x.
double ls_slope(std::span<double const> x, std::span<double const> y);

} // namespace ercl
