#include "ercl/boyan.hpp"
#include "ercl/config.hpp"
#include "ercl/experiment.hpp"
#include "ercl/fetch.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

namespace {

std::vector<std::uint64_t> parse_seeds(std::string const &text)
{
  std::vector<std::uint64_t> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t const comma = std::min(text.find(',', pos), text.size());
    std::string const item = text.substr(pos, comma - pos);
    std::size_t const dash = item.find('-');
    if (dash != std::string::npos) {
      std::uint64_t const lo = std::stoull(item.substr(0, dash));
      std::uint64_t const hi = std::stoull(item.substr(dash + 1));
      if (hi < lo) {
        throw std::invalid_argument("seed range " + item + " is empty");
      }
      for (std::uint64_t s = lo; s <= hi; ++s) {
        out.push_back(s);
      }
    } else {
      out.push_back(std::stoull(item));
    }
    pos = comma + 1;
  }
  if (out.empty()) {
    throw std::invalid_argument("no seeds given");
  }
  return out;
}

int run(std::string const &config_path, std::string const &seeds, double scale, std::string const &out_dir,
        std::vector<std::string> const &models, unsigned jobs, bool quiet)
{
  ercl::ExperimentConfig c = ercl::load_config(config_path);
  if (!seeds.empty()) {
    c.seeds = parse_seeds(seeds);
  }
  if (scale != 1.0) {
    c = ercl::scaled(c, scale);
  }
  if (!out_dir.empty()) {
    c.output_dir = out_dir;
  }
  if (!models.empty()) {
    std::vector<ercl::ModelConfig> keep;
    for (auto const &name : models) {
      auto const kind = ercl::parse_model_kind(name);
      auto it = std::find_if(c.models.begin(), c.models.end(), [&](auto const &m) { return m.kind == kind; });
      if (it == c.models.end()) {
        throw std::invalid_argument("model " + name + " is not in " + config_path);
      }
      keep.push_back(*it);
    }
    c.models = keep;
  }
  ercl::validate(c);

  std::mutex io;
  auto const start = std::chrono::steady_clock::now();
  ercl::Progress progress;
  if (!quiet) {
    progress = [&](std::string const &model, std::uint64_t seed, std::int64_t done, std::int64_t total) {
      std::int64_t const every = std::max<std::int64_t>(1, total / 20);
      if (done % every != 0 && done != total) {
        return;
      }
      double const secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::lock_guard lock(io);
      std::cerr << model << " seed " << seed << ": task " << done << "/" << total << " (" << static_cast<long>(secs)
                << " s)\n";
    };
  }
  auto const runs = ercl::run_experiment(c, jobs, nullptr, progress);
  for (auto const &path : ercl::emit_outputs(c, runs, c.output_dir)) {
    std::cout << path.string() << '\n';
  }
  return 0;
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"ercl: continual-learning benchmarks for replay-context learners"};
  app.require_subcommand(1);

  std::string config_path, seeds, out_dir;
  double scale = 1.0;
  std::vector<std::string> models;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  bool quiet = false;
  auto *run_cmd = app.add_subcommand("run", "Run every (model, seed) pair of a configuration");
  run_cmd->add_option("--config", config_path, "Experiment JSON file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--seeds", seeds, "Seeds, e.g. 0,1,2 or 0-4 (overrides the config)");
  run_cmd->add_option("--scale", scale, "Divide the number of tasks by this factor")->check(CLI::PositiveNumber);
  run_cmd->add_option("--out", out_dir, "Output directory (overrides the config)");
  run_cmd->add_option("--models", models, "Subset of models to run");
  run_cmd->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  run_cmd->add_flag("--quiet", quiet, "No progress on stderr");

  std::string plot_dir;
  auto *plot_cmd = app.add_subcommand("plot", "Render the CSV results in a directory to SVG");
  plot_cmd->add_option("--in", plot_dir, "Results directory")->required()->check(CLI::ExistingDirectory);

  std::string mnist_dir = "data/mnist";
  std::string mirror = ercl::kDefaultMnistMirror;
  auto *fetch_cmd = app.add_subcommand("fetch-mnist", "Download and verify the MNIST IDX files");
  fetch_cmd->add_option("--dir", mnist_dir, "Destination directory");
  fetch_cmd->add_option("--url", mirror, "Mirror base URL (http, https or file)");

  std::uint64_t boyan_seed = 0;
  int states = 10, dim = 4;
  double gamma = 0.9;
  std::string boyan_out;
  auto *boyan_cmd = app.add_subcommand("export-boyan", "Write one generated Boyan chain task as JSON");
  boyan_cmd->add_option("--seed", boyan_seed, "Task seed");
  boyan_cmd->add_option("--states", states, "Number of states");
  boyan_cmd->add_option("--dim", dim, "Feature dimension");
  boyan_cmd->add_option("--gamma", gamma, "Discount");
  boyan_cmd->add_option("--out", boyan_out, "Output file (stdout if omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      return run(config_path, seeds, scale, out_dir, models, jobs, quiet);
    }
    if (*plot_cmd) {
      for (auto const &p : ercl::plot_directory(plot_dir)) {
        std::cout << p.string() << '\n';
      }
      return 0;
    }
    if (*fetch_cmd) {
      for (auto const &p : ercl::fetch_mnist(mnist_dir, mirror)) {
        std::cout << p.string() << '\n';
      }
      return 0;
    }
    if (*boyan_cmd) {
      std::string const text = ercl::boyan_to_json(ercl::boyan_generate(boyan_seed, states, dim, gamma)).dump(2);
      if (boyan_out.empty()) {
        std::cout << text << '\n';
      } else {
        std::ofstream(boyan_out) << text << '\n';
      }
      return 0;
    }
  } catch (std::exception const &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
