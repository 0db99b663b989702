#pragma once

#include "grad.hpp"
#include "models.hpp"
#include "optim.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ercl {

enum class Benchmark { scr, mnist, pe };

std::string to_string(Benchmark b);
Benchmark parse_benchmark(std::string const &name);

struct ModelConfig
{
  ModelKind kind = ModelKind::mlp;
  int layers = 1;       // hidden layers (MLP/ERMLP), recurrent layers (RNN), attention blocks (Transformer)
  int hidden = 20;      // hidden width for MLP/ERMLP/RNN
  int key_dim = 0;      // Transformer d_k; 0 means ceil(d_model / 2)
  Activation activation = Activation::relu;
  double lr = 1e-3;

  std::string name() const { return to_string(kind); }
};

struct ScrParams
{
  int m = 20;
  int f = 15;
  int ltu_hidden = 100;
  double beta = 0.7;
};

struct MnistParams
{
  std::string data_dir = "data/mnist";
};

struct PeParams
{
  int states = 10;
  int feature_dim = 4;
  double gamma = 0.9;
};

struct ExperimentConfig
{
  Benchmark benchmark = Benchmark::scr;
  std::int64_t tasks = 1000;           // K
  std::int64_t steps_per_task = 10000; // N
  std::int64_t batch_size = 1;         // b
  std::size_t buffer_capacity = 100;   // n
  std::vector<std::uint64_t> seeds;
  std::int64_t bin_width = 50000; // in optimizer steps
  std::int64_t eval_every = 1;    // PE only: steps between MSVE evaluations
  std::int64_t checkpoint_every_tasks = 0;
  ScrParams scr;
  MnistParams mnist;
  PeParams pe;
  AdamWConfig optimizer; // lr is taken per model
  std::vector<ModelConfig> models;
  std::filesystem::path output_dir = "out";

  std::int64_t total_steps() const { return tasks * steps_per_task; }
};

/// Defaults reproducing the published experiment tables.
ExperimentConfig paper_config(Benchmark b);

ExperimentConfig config_from_json(nlohmann::json const &j);
nlohmann::json config_to_json(ExperimentConfig const &c);
ExperimentConfig load_config(std::filesystem::path const &path);

/// Throws std::invalid_argument naming the first problem found.
void validate(ExperimentConfig const &c);

/// Divide the task count K by `factor` (at least one task remains).
ExperimentConfig scaled(ExperimentConfig c, double factor);

/// FNV-1a of the canonical JSON form, output directory excluded.
std::uint64_t config_hash(ExperimentConfig const &c);

/// Embedding rows for replay learners and feature width for the plain MLP.
struct InputShape
{
  Index features = 0; // x or phi length
  Index targets = 0;  // y length (SL) or phi' + reward rows (PE)
  Index outputs = 1;  // prediction width
  Index d_model() const { return features + targets; }
};

InputShape input_shape(ExperimentConfig const &c);

Network<float> make_network(ExperimentConfig const &c, ModelConfig const &m, Rng &rng);

} // namespace ercl
