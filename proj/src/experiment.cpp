#include "ercl/experiment.hpp"

#include "ercl/boyan.hpp"
#include "ercl/checkpoint.hpp"
#include "ercl/fetch.hpp"
#include "ercl/learner.hpp"
#include "ercl/scr.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstring>
#include <exception>
#include <iostream>
#include <mutex>
#include <numeric>
#include <thread>

namespace ercl {

namespace {

class StreamHash
{
public:
  template <typename Derived> void add(Eigen::MatrixBase<Derived> const &m)
  {
    for (Index j = 0; j < m.cols(); ++j) {
      for (Index i = 0; i < m.rows(); ++i) {
        add(static_cast<float>(m(i, j)));
      }
    }
  }

  void add(float v)
  {
    unsigned char bytes[sizeof(float)];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char c : bytes) {
      h_ ^= c;
      h_ *= 0x100000001b3ULL;
    }
  }

  std::uint64_t value() const { return h_; }

private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

AdamWConfig optimizer_for(ExperimentConfig const &c, ModelConfig const &m)
{
  AdamWConfig o = c.optimizer;
  o.lr = m.lr;
  return o;
}

void maybe_checkpoint(ExperimentConfig const &c, ModelConfig const &m, std::uint64_t seed, std::int64_t tasks_done,
                      Network<float> const &net)
{
  if (c.checkpoint_every_tasks <= 0 || tasks_done % c.checkpoint_every_tasks != 0) {
    return;
  }
  std::filesystem::path const dir = c.output_dir / "checkpoints";
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / (m.name() + "_seed" + std::to_string(seed) + "_task" + std::to_string(tasks_done) + ".ckpt"),
                  m.name(), net.tensors());
}

void report(Progress const &progress, ModelConfig const &m, std::uint64_t seed, std::int64_t done, std::int64_t total)
{
  if (progress) {
    progress(m.name(), seed, done, total);
  }
}

} // namespace

MetricKind metric_kind(Benchmark b)
{
  switch (b) {
  case Benchmark::scr:
    return MetricKind::train_mse;
  case Benchmark::mnist:
    return MetricKind::test_accuracy;
  case Benchmark::pe:
    return MetricKind::msve;
  }
  throw std::logic_error("unknown benchmark");
}

std::int64_t record_interval(ExperimentConfig const &c)
{
  switch (c.benchmark) {
  case Benchmark::scr:
    return 1;
  case Benchmark::mnist:
    return c.steps_per_task;
  case Benchmark::pe:
    return c.eval_every;
  }
  return 1;
}

std::size_t bin_records(ExperimentConfig const &c)
{
  return static_cast<std::size_t>(std::max<std::int64_t>(1, c.bin_width / record_interval(c)));
}

RunResult run_scr(ExperimentConfig const &c, ModelConfig const &m, std::uint64_t seed, Progress const &progress)
{
  ScrConfig sc;
  sc.m = c.scr.m;
  sc.f = c.scr.f;
  sc.hidden = c.scr.ltu_hidden;
  sc.beta = c.scr.beta;
  ScrState state = scr_init(Rng::substream(seed, "scr"), sc);

  Rng init = Rng::substream(seed, "init");
  SupervisedLearner learner(make_network(c, m, init), optimizer_for(c, m), c.buffer_capacity,
                            {static_cast<Index>(sc.m), 1});

  RunResult out{m.name(), seed, {}, 0};
  out.series.kind = MetricKind::train_mse;
  out.series.steps.reserve(static_cast<std::size_t>(c.total_steps()));
  out.series.values.reserve(static_cast<std::size_t>(c.total_steps()));
  StreamHash hash;
  std::int64_t step = 0;
  for (std::int64_t k = 0; k < c.tasks; ++k) {
    if (k > 0) {
      scr_advance_task(state);
    }
    for (std::int64_t t = 0; t < c.steps_per_task; ++t) {
      ScrExample const e = scr_next_example(state);
      Vec<float> const x = e.x.cast<float>();
      auto const y = static_cast<float>(e.y);
      hash.add(x);
      hash.add(y);
      out.series.record(++step, learner.train_regression(x, y));
    }
    maybe_checkpoint(c, m, seed, k + 1, learner.network());
    report(progress, m, seed, k + 1, c.tasks);
  }
  out.data_hash = hash.value();
  return out;
}

RunResult run_mnist(ExperimentConfig const &c, ModelConfig const &m, std::uint64_t seed, MnistDataset const &data,
                    Progress const &progress)
{
  auto const train_count = static_cast<std::int64_t>(data.train_x.cols());
  if (c.steps_per_task * c.batch_size > train_count) {
    throw std::invalid_argument("run_mnist: steps_per_task * batch_size = " +
                                std::to_string(c.steps_per_task * c.batch_size) + " exceeds the " +
                                std::to_string(train_count) + " training images");
  }
  Rng task_rng = Rng::substream(seed, "mnist-task");
  Rng data_rng = Rng::substream(seed, "mnist-data");
  Rng init = Rng::substream(seed, "init");
  SupervisedLearner learner(make_network(c, m, init), optimizer_for(c, m), c.buffer_capacity, {49, 10});

  RunResult out{m.name(), seed, {}, 0};
  out.series.kind = MetricKind::test_accuracy;
  StreamHash hash;
  std::vector<Index> order(static_cast<std::size_t>(train_count));
  Index const b = c.batch_size;
  Mat<float> x(49, b);
  Mat<float> onehot(10, b);
  for (std::int64_t k = 0; k < c.tasks; ++k) {
    PermutedMnistTask const task = mnist_make_task(data, task_rng);
    std::iota(order.begin(), order.end(), Index(0));
    data_rng.shuffle(order.begin(), order.end());
    for (std::int64_t j = 0; j < c.steps_per_task; ++j) {
      onehot.setZero();
      for (Index i = 0; i < b; ++i) {
        Index const idx = order[static_cast<std::size_t>(j * b + i)];
        x.col(i) = task.train_x.col(idx);
        onehot(task.train_y[static_cast<std::size_t>(idx)], i) = 1.0f;
      }
      hash.add(x);
      hash.add(onehot);
      learner.train_classification(x, onehot);
    }
    // Test with the buffer frozen as it stands at the end of the task.
    Index const tests = task.test_x.cols();
    Index correct = 0;
    Index const chunk = 1000;
    for (Index start = 0; start < tests; start += chunk) {
      Index const len = std::min(chunk, tests - start);
      Mat<float> const logits = learner.predict(task.test_x.middleCols(start, len));
      for (Index i = 0; i < len; ++i) {
        Index best = 0;
        logits.col(i).maxCoeff(&best);
        correct += best == task.test_y[static_cast<std::size_t>(start + i)] ? 1 : 0;
      }
    }
    out.series.record((k + 1) * c.steps_per_task, static_cast<double>(correct) / static_cast<double>(tests));
    maybe_checkpoint(c, m, seed, k + 1, learner.network());
    report(progress, m, seed, k + 1, c.tasks);
  }
  out.data_hash = hash.value();
  return out;
}

RunResult run_pe(ExperimentConfig const &c, ModelConfig const &m, std::uint64_t seed, Progress const &progress)
{
  Rng task_rng = Rng::substream(seed, "pe-task");
  Rng data_rng = Rng::substream(seed, "pe-data");
  Rng init = Rng::substream(seed, "init");
  auto const gamma = static_cast<float>(c.pe.gamma);
  TdLearner learner(make_network(c, m, init), optimizer_for(c, m), c.buffer_capacity, c.pe.feature_dim, gamma);

  RunResult out{m.name(), seed, {}, 0};
  out.series.kind = MetricKind::msve;
  StreamHash hash;
  std::int64_t step = 0;
  for (std::int64_t k = 0; k < c.tasks; ++k) {
    BoyanTask const task = boyan_generate(task_rng, c.pe.states, c.pe.feature_dim, c.pe.gamma);
    Mat<float> const features = task.phi.cast<float>();
    Index s = sample_index(task.mu, data_rng);
    for (std::int64_t t = 0; t < c.steps_per_task; ++t) {
      BoyanStep const st = boyan_step(task, s, data_rng);
      Transition<float> const tr{st.transition.phi.cast<float>(), static_cast<float>(st.reward),
                                 st.transition.phi_next.cast<float>()};
      hash.add(tr.phi);
      hash.add(tr.reward);
      hash.add(tr.phi_next);
      learner.observe(tr);
      ++step;
      if (step % c.eval_every == 0) {
        out.series.record(step, msve(learner.values(features), task));
      }
      s = st.next;
    }
    maybe_checkpoint(c, m, seed, k + 1, learner.network());
    report(progress, m, seed, k + 1, c.tasks);
  }
  out.data_hash = hash.value();
  return out;
}

MnistDataset load_mnist_for(ExperimentConfig const &config)
{
  return mnist_prepare(mnist_load(data_dir(config.mnist.data_dir)));
}

std::vector<ModelRuns> run_experiment(ExperimentConfig const &config, unsigned jobs, MnistDataset const *mnist,
                                      Progress const &progress)
{
  validate(config);
  MnistDataset loaded;
  if (config.benchmark == Benchmark::mnist && mnist == nullptr) {
    loaded = load_mnist_for(config);
    mnist = &loaded;
  }
  for (auto const &m : config.models) {
    if (config.benchmark == Benchmark::pe && m.kind == ModelKind::rnn) {
      std::cerr << "warning: the rnn learner on policy evaluation unrolls " << (config.buffer_capacity + 1) * m.layers
                << " recurrent cells per forward pass and trains slowly\n";
    }
  }

  std::vector<ModelRuns> out;
  for (auto const &m : config.models) {
    out.push_back({m, std::vector<RunResult>(config.seeds.size())});
  }
  std::size_t const total = config.models.size() * config.seeds.size();
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (std::size_t job = next++; job < total; job = next++) {
      std::size_t const mi = job / config.seeds.size();
      std::size_t const si = job % config.seeds.size();
      ModelConfig const &m = config.models[mi];
      std::uint64_t const seed = config.seeds[si];
      try {
        RunResult r;
        switch (config.benchmark) {
        case Benchmark::scr:
          r = run_scr(config, m, seed, progress);
          break;
        case Benchmark::mnist:
          r = run_mnist(config, m, seed, *mnist, progress);
          break;
        case Benchmark::pe:
          r = run_pe(config, m, seed, progress);
          break;
        }
        out[mi].runs[si] = std::move(r);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) {
          failure = std::current_exception();
        }
        next = total;
      }
    }
  };

  unsigned const threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(total)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) {
      pool.emplace_back(worker);
    }
    for (auto &t : pool) {
      t.join();
    }
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
  return out;
}

AggregateSeries summarize(ExperimentConfig const &config, ModelRuns const &runs)
{
  std::vector<BinnedSeries> binned;
  for (auto const &r : runs.runs) {
    binned.push_back(bin_average(r.series, bin_records(config)));
  }
  return aggregate(binned);
}

} // namespace ercl
