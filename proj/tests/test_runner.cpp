#include "ercl/checkpoint.hpp"
#include "ercl/config.hpp"
#include "ercl/experiment.hpp"
#include "ercl/fetch.hpp"
#include "ercl/learner.hpp"
#include "ercl/metrics.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace ercl;

namespace {

std::string slurp(std::filesystem::path const &p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig smoke(Benchmark b, std::int64_t tasks, std::int64_t steps)
{
  ExperimentConfig c = paper_config(b);
  c.tasks = tasks;
  c.steps_per_task = steps;
  c.seeds = {0, 1};
  c.buffer_capacity = 8;
  return c;
}

MnistDataset tiny_mnist(Index train, Index test)
{
  MnistDataset d;
  Rng rng(77);
  d.train_x = test::random_matrix(rng, 49, train, 0, 1).cast<float>();
  d.test_x = test::random_matrix(rng, 49, test, 0, 1).cast<float>();
  for (Index i = 0; i < train; ++i) {
    d.train_y.push_back(static_cast<std::uint8_t>(i % 10));
  }
  for (Index i = 0; i < test; ++i) {
    d.test_y.push_back(static_cast<std::uint8_t>(i % 10));
  }
  return d;
}

} // namespace

// ---------------------------------------------------------------- metrics

TEST_CASE("bin averages")
{
  std::vector<double> const a{1, 2, 3, 4};
  CHECK(bin_average(a, 2) == std::vector<double>{1.5, 3.5});
  CHECK(bin_average(a, 1) == a);
  std::vector<double> const b{1, 2, 3};
  CHECK(bin_average(b, 2) == std::vector<double>{1.5, 3.0});
  CHECK_THROWS(bin_average(b, 0));

  MetricsSeries s;
  for (int i = 1; i <= 5; ++i) {
    s.record(i * 10, i);
  }
  BinnedSeries const bs = bin_average(s, 2);
  CHECK(bs.step_start == std::vector<std::int64_t>{10, 30, 50});
  CHECK(bs.step_end == std::vector<std::int64_t>{20, 40, 50});
}

TEST_CASE("cross-seed aggregation")
{
  BinnedSeries one{{1.0}, {1}, {1}}, three{{3.0}, {1}, {1}};
  std::vector<BinnedSeries> two{one, three};
  AggregateSeries const agg = aggregate(two);
  CHECK(agg.mean[0] == doctest::Approx(2.0));
  CHECK(agg.std_error[0] == doctest::Approx(1.0));

  std::vector<BinnedSeries> single{one};
  CHECK(aggregate(single).std_error[0] == 0.0);

  std::vector<BinnedSeries> same(20, BinnedSeries{{0.5, 0.25}, {1, 2}, {1, 2}});
  AggregateSeries const s = aggregate(same);
  CHECK(s.std_error == std::vector<double>{0.0, 0.0});

  std::vector<BinnedSeries> ragged{one, BinnedSeries{{1, 2}, {1, 2}, {1, 2}}};
  CHECK_THROWS(aggregate(ragged));
}

TEST_CASE("least-squares slope")
{
  std::vector<double> const x{0, 1, 2, 3};
  std::vector<double> const y{1, 3, 5, 7};
  CHECK(ls_slope(x, y) == doctest::Approx(2.0));
}

// ---------------------------------------------------------------- config

TEST_CASE("shipped config files match the built-in defaults")
{
  for (auto b : {Benchmark::scr, Benchmark::mnist, Benchmark::pe}) {
    auto const path = std::filesystem::path(ERCL_SOURCE_DIR) / "configs" / (to_string(b) + ".json");
    ExperimentConfig const loaded = load_config(path);
    CHECK(config_to_json(loaded) == config_to_json(paper_config(b)));
  }
  ExperimentConfig const scr = paper_config(Benchmark::scr);
  CHECK(scr.total_steps() == 10000000);
  CHECK(scr.seeds.size() == 20);
  ExperimentConfig const pe = paper_config(Benchmark::pe);
  CHECK(pe.total_steps() == 2500000);
  ExperimentConfig const mnist = paper_config(Benchmark::mnist);
  CHECK(mnist.steps_per_task * mnist.batch_size == 60000);
  CHECK(input_shape(pe).d_model() == 9);
}

TEST_CASE("config validation and scaling")
{
  ExperimentConfig c = paper_config(Benchmark::scr);
  c.scr.f = 20;
  CHECK_THROWS_WITH(validate(c), doctest::Contains("scr.f"));
  c = paper_config(Benchmark::pe);
  c.pe.gamma = 1.0;
  CHECK_THROWS(validate(c));
  c = paper_config(Benchmark::scr);
  c.batch_size = 4;
  CHECK_THROWS(validate(c));
  c = paper_config(Benchmark::mnist);
  c.seeds.clear();
  CHECK_THROWS(validate(c));

  ExperimentConfig const s = scaled(paper_config(Benchmark::scr), 10);
  CHECK(s.tasks == 100);
  CHECK(s.steps_per_task == 10000);
  CHECK(scaled(paper_config(Benchmark::scr), 1e9).tasks == 1);
  CHECK_THROWS(scaled(paper_config(Benchmark::scr), 0.5));

  nlohmann::json j = {{"benchmark", "pe"}, {"seed_count", 3}, {"models", {{{"kind", "mlp"}, {"lr", 0.1}}}}};
  ExperimentConfig const from = config_from_json(j);
  CHECK(from.seeds == std::vector<std::uint64_t>{0, 1, 2});
  CHECK(from.models.size() == 1);
  CHECK(from.tasks == 5000);

  ExperimentConfig moved = paper_config(Benchmark::scr);
  moved.output_dir = "elsewhere";
  CHECK(config_hash(moved) == config_hash(paper_config(Benchmark::scr)));
  moved.tasks = 3;
  CHECK(config_hash(moved) != config_hash(paper_config(Benchmark::scr)));
}

// ---------------------------------------------------------------- runs

TEST_CASE("scr smoke run: record count, determinism, shared data")
{
  ExperimentConfig const c = smoke(Benchmark::scr, 2, 10);
  std::vector<RunResult> first;
  for (auto const &m : c.models) {
    RunResult const r = run_scr(c, m, 5);
    CHECK(r.series.size() == 20);
    CHECK(r.series.steps.front() == 1);
    CHECK(r.series.steps.back() == 20);
    CHECK(r.series.kind == MetricKind::train_mse);
    RunResult const again = run_scr(c, m, 5);
    CHECK(again.series.values == r.series.values);
    first.push_back(r);
  }
  for (auto const &r : first) {
    CHECK(r.data_hash == first.front().data_hash);
  }
  CHECK(run_scr(c, c.models.front(), 6).data_hash != first.front().data_hash);
}

TEST_CASE("parallel runs equal sequential runs")
{
  ExperimentConfig c = smoke(Benchmark::pe, 2, 20);
  c.seeds = {0, 1, 2};
  auto const seq = run_experiment(c, 1);
  auto const par = run_experiment(c, 4);
  REQUIRE(seq.size() == par.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    for (std::size_t s = 0; s < c.seeds.size(); ++s) {
      CHECK(seq[i].runs[s].series.values == par[i].runs[s].series.values);
      CHECK(seq[i].runs[s].data_hash == seq[0].runs[s].data_hash);
    }
  }
}

TEST_CASE("pe records every eval_every updates")
{
  ExperimentConfig c = smoke(Benchmark::pe, 3, 10);
  c.eval_every = 5;
  RunResult const r = run_pe(c, c.models.front(), 1);
  CHECK(r.series.size() == 6);
  CHECK(r.series.steps == std::vector<std::int64_t>{5, 10, 15, 20, 25, 30});
  CHECK(r.series.kind == MetricKind::msve);
}

TEST_CASE("pe with zero discount is supervised regression on rewards")
{
  ExperimentConfig c = paper_config(Benchmark::pe);
  c.pe.gamma = 0.0;
  c.tasks = 1;
  c.steps_per_task = 20000;
  c.eval_every = 1000;
  c.seeds = {0};
  ModelConfig m = c.models.front();
  REQUIRE(m.kind == ModelKind::mlp);
  RunResult const r = run_pe(c, m, 0);
  CHECK(r.series.values.back() < 1e-2);
}

TEST_CASE("mnist smoke run on synthetic data")
{
  MnistDataset const data = tiny_mnist(40, 20);
  ExperimentConfig c = paper_config(Benchmark::mnist);
  c.tasks = 1;
  c.steps_per_task = 3;
  c.batch_size = 8;
  c.buffer_capacity = 5;
  c.seeds = {0};
  for (auto &m : c.models) {
    if (m.kind == ModelKind::mlp) {
      m.hidden = 16;
    } else {
      m.layers = 2;
    }
  }
  std::uint64_t hash = 0;
  for (auto const &m : c.models) {
    RunResult const r = run_mnist(c, m, 0, data);
    CHECK(r.series.size() == 1);
    CHECK(r.series.steps.front() == 3);
    CHECK(r.series.values.front() >= 0.0);
    CHECK(r.series.values.front() <= 1.0);
    if (hash == 0) {
      hash = r.data_hash;
    }
    CHECK(r.data_hash == hash);
  }
  c.steps_per_task = 6;
  CHECK_THROWS_WITH(run_mnist(c, c.models.front(), 0, data), doctest::Contains("training images"));
}

TEST_CASE("a uniform-logit model scores chance on balanced labels")
{
  MnistDataset const data = tiny_mnist(10, 1000);
  ExperimentConfig const c = paper_config(Benchmark::mnist);
  ModelConfig m = c.models.back();
  REQUIRE(m.kind == ModelKind::transformer);
  m.layers = 1;
  Rng rng(0);
  Network<float> net = make_network(c, m, rng);
  for (auto *t : net.tensors()) {
    t->setZero();
  }
  SupervisedLearner learner(std::move(net), AdamWConfig{}, 100, {49, 10});
  Mat<float> const logits = learner.predict(data.test_x);
  Index correct = 0;
  for (Index i = 0; i < logits.cols(); ++i) {
    Index best = 0;
    logits.col(i).maxCoeff(&best);
    correct += best == data.test_y[static_cast<std::size_t>(i)] ? 1 : 0;
  }
  CHECK(static_cast<double>(correct) / 1000.0 == doctest::Approx(0.1));
}

TEST_CASE("learner pushes after the update and never sees its own query")
{
  Rng rng(3);
  ExperimentConfig const c = smoke(Benchmark::scr, 1, 1);
  SupervisedLearner learner(make_network(c, c.models.back(), rng), AdamWConfig{}, c.buffer_capacity, {20, 1});
  for (int i = 0; i < 20; ++i) {
    Vec<float> const x = test::random_matrix(rng, 20, 1).cast<float>();
    for (auto const &item : learner.buffer().items()) {
      CHECK(item.x != x);
    }
    Mat<float> const z = learner.embed(x);
    CHECK(z.col(z.cols() - 1).tail(1).isZero(0));
    learner.train_regression(x, 1.0f);
    CHECK(learner.buffer().items().back().x == x);
  }
  CHECK(learner.buffer().size() == c.buffer_capacity);
}

TEST_CASE("mnist batches keep only the tail of the batch")
{
  Rng rng(4);
  ExperimentConfig c = paper_config(Benchmark::mnist);
  ModelConfig m = c.models.back();
  m.layers = 1;
  SupervisedLearner learner(make_network(c, m, rng), AdamWConfig{}, 3, {49, 10});
  Mat<float> x = test::random_matrix(rng, 49, 8).cast<float>();
  Mat<float> y = Mat<float>::Zero(10, 8);
  for (Index i = 0; i < 8; ++i) {
    y(i, i) = 1;
  }
  learner.train_classification(x, y);
  auto const items = learner.buffer().contents();
  REQUIRE(items.size() == 3);
  for (Index i = 0; i < 3; ++i) {
    CHECK(items[static_cast<std::size_t>(i)].x == x.col(5 + i));
  }
}

// ---------------------------------------------------------------- outputs

TEST_CASE("csv and chart output")
{
  test::TempDir dir("emit");
  ExperimentConfig c = smoke(Benchmark::scr, 3, 10);
  c.bin_width = 7;
  auto const runs = run_experiment(c, 1);
  auto const written = emit_outputs(c, runs, dir.path());
  CHECK(written.size() == c.models.size() + 1);
  std::string const csv = slurp(dir.path() / "scr_mlp.csv");
  CHECK(csv.find("config_hash=") != std::string::npos);
  CHECK(csv.find("metric=train_mse") != std::string::npos);
  CHECK(csv.find("loss_timing=pre-update") != std::string::npos);
  CHECK(csv.find("benchmark,model,seed_count,bin_index,step_start,step_end,mean,stderr\n") != std::string::npos);
  std::size_t rows = 0;
  std::istringstream lines(csv);
  for (std::string line; std::getline(lines, line);) {
    rows += line.rfind("scr,mlp,2,", 0) == 0 ? 1 : 0;
  }
  CHECK(rows == 5); // ceil(30 / 7)

  emit_outputs(c, runs, dir.path());
  CHECK(slurp(dir.path() / "scr_mlp.csv") == csv);
  std::string const svg = slurp(dir.path() / "scr.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("polygon") != std::string::npos);
  CHECK(svg.find(">3</text>") != std::string::npos); // x axis ends at the last task

  std::filesystem::remove(dir.path() / "scr.svg");
  auto const plotted = plot_directory(dir.path());
  REQUIRE(plotted.size() == 1);
  std::string const replotted = slurp(plotted.front());
  CHECK(replotted.rfind("<svg", 0) == 0);
  for (auto const &m : c.models) {
    CHECK(replotted.find(">" + m.name() + "</text>") != std::string::npos);
  }
}

TEST_CASE("checkpoints round trip")
{
  test::TempDir dir("ckpt");
  Rng rng(9);
  ExperimentConfig const c = paper_config(Benchmark::pe);
  for (auto const &m : c.models) {
    Network<float> net = make_network(c, m, rng);
    auto const path = dir.path() / (m.name() + ".ckpt");
    save_checkpoint(path, m.name(), static_cast<Network<float> const &>(net).tensors());
    Checkpoint const ck = load_checkpoint(path);
    CHECK(ck.model == m.name());
    Rng other(10);
    Network<float> fresh = make_network(c, m, other);
    restore(fresh, ck);
    auto const a = static_cast<Network<float> const &>(net).tensors();
    auto const b = static_cast<Network<float> const &>(fresh).tensors();
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(*a[i] == *b[i]);
    }
  }
  std::ofstream(dir.path() / "bad.ckpt") << "not a checkpoint\n";
  CHECK_THROWS(load_checkpoint(dir.path() / "bad.ckpt"));
}

TEST_CASE("runs write periodic checkpoints")
{
  test::TempDir dir("periodic");
  ExperimentConfig c = smoke(Benchmark::scr, 4, 5);
  c.checkpoint_every_tasks = 2;
  c.output_dir = dir.path();
  run_scr(c, c.models.front(), 0);
  CHECK(std::filesystem::exists(dir.path() / "checkpoints" / "mlp_seed0_task2.ckpt"));
  CHECK(std::filesystem::exists(dir.path() / "checkpoints" / "mlp_seed0_task4.ckpt"));
}

// ---------------------------------------------------------------- fetch

TEST_CASE("md5 and download checks")
{
  std::string const abc = "abc";
  std::vector<std::uint8_t> const bytes(abc.begin(), abc.end());
  CHECK(md5_hex(bytes) == "900150983cd24fb0d6963f7d28e17f72");

  test::TempDir mirror("mirror"), target("target");
  std::ofstream(mirror.path() / "train-images-idx3-ubyte.gz") << "corrupt";
  CHECK_THROWS_WITH(fetch_mnist(target.path(), "file://" + mirror.path().string()),
                    doctest::Contains("checksum mismatch"));
  CHECK_FALSE(std::filesystem::exists(target.path() / "train-images-idx3-ubyte.gz"));
  CHECK_THROWS(download("gopher://example"));
}

TEST_CASE("data directory override")
{
  ::unsetenv("ERCL_DATA_DIR");
  CHECK(data_dir("data/mnist") == "data/mnist");
  ::setenv("ERCL_DATA_DIR", "/tmp/elsewhere", 1);
  CHECK(data_dir("data/mnist") == "/tmp/elsewhere");
  ::unsetenv("ERCL_DATA_DIR");
}
