#pragma once

// Experiment engine: drives a learner through K tasks of N steps each and
// records the per-step (or per-task) metric.

#include "config.hpp"
#include "metrics.hpp"
#include "mnist.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace ercl {

struct RunResult
{
  std::string model;
  std::uint64_t seed = 0;
  MetricsSeries series;
  std::uint64_t data_hash = 0; // FNV-1a over every example/transition presented
};

/// Progress callback: (model, seed, tasks finished, total tasks).
using Progress = std::function<void(std::string const &, std::uint64_t, std::int64_t, std::int64_t)>;

/// Per-step pre-update squared loss.
RunResult run_scr(ExperimentConfig const &config, ModelConfig const &model, std::uint64_t seed,
                  Progress const &progress = {});

/// Test accuracy over the whole test set at the end of every task.
RunResult run_mnist(ExperimentConfig const &config, ModelConfig const &model, std::uint64_t seed,
                    MnistDataset const &data, Progress const &progress = {});

/// MSVE after every `eval_every`-th TD update.
RunResult run_pe(ExperimentConfig const &config, ModelConfig const &model, std::uint64_t seed,
                 Progress const &progress = {});

struct ModelRuns
{
  ModelConfig model;
  std::vector<RunResult> runs; // ordered as config.seeds
};

/// Every (model, seed) pair, optionally on `jobs` threads. Output does not
/// depend on `jobs`.
std::vector<ModelRuns> run_experiment(ExperimentConfig const &config, unsigned jobs = 1,
                                      MnistDataset const *mnist = nullptr, Progress const &progress = {});

/// Bin width in records for a config: bin_width steps over the recording interval.
std::size_t bin_records(ExperimentConfig const &config);
std::int64_t record_interval(ExperimentConfig const &config);
MetricKind metric_kind(Benchmark b);

AggregateSeries summarize(ExperimentConfig const &config, ModelRuns const &runs);

/// Write one CSV per model plus an SVG chart into `dir`. Returns paths written.
std::vector<std::filesystem::path> emit_outputs(ExperimentConfig const &config, std::vector<ModelRuns> const &runs,
                                                std::filesystem::path const &dir);

std::string csv_text(ExperimentConfig const &config, std::string const &model, AggregateSeries const &agg);

/// Render every CSV in `dir` into one SVG chart per benchmark. Returns paths written.
std::vector<std::filesystem::path> plot_directory(std::filesystem::path const &dir);

/// Load the MNIST dataset named by the config (ERCL_DATA_DIR overrides).
MnistDataset load_mnist_for(ExperimentConfig const &config);

} // namespace ercl
