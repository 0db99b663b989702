#include "ercl/config.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace ercl {

std::string to_string(Benchmark b)
{
  switch (b) {
  case Benchmark::scr:
    return "scr";
  case Benchmark::mnist:
    return "mnist";
  case Benchmark::pe:
    return "pe";
  }
  return "unknown";
}

Benchmark parse_benchmark(std::string const &name)
{
  for (Benchmark b : {Benchmark::scr, Benchmark::mnist, Benchmark::pe}) {
    if (to_string(b) == name) {
      return b;
    }
  }
  throw std::invalid_argument("unknown benchmark '" + name + "' (expected scr, mnist, pe)");
}

namespace {

std::vector<std::uint64_t> seed_range(std::uint64_t n)
{
  std::vector<std::uint64_t> s(n);
  std::iota(s.begin(), s.end(), std::uint64_t(0));
  return s;
}

ModelConfig model(ModelKind kind, int layers, int hidden, Activation act, double lr)
{
  ModelConfig m;
  m.kind = kind;
  m.layers = layers;
  m.hidden = hidden;
  m.activation = act;
  m.lr = lr;
  return m;
}

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation parse_activation(std::string const &s)
{
  if (s == "relu") {
    return Activation::relu;
  }
  if (s == "tanh") {
    return Activation::tanh;
  }
  throw std::invalid_argument("unknown activation '" + s + "' (expected relu or tanh)");
}

} // namespace

ExperimentConfig paper_config(Benchmark b)
{
  ExperimentConfig c;
  c.benchmark = b;
  c.buffer_capacity = 100;
  c.seeds = seed_range(20);
  switch (b) {
  case Benchmark::scr:
    c.tasks = 1000;
    c.steps_per_task = 10000;
    c.batch_size = 1;
    c.bin_width = 50000;
    c.models = {
      model(ModelKind::mlp, 2, 20, Activation::relu, 0.01),
      model(ModelKind::ermlp, 2, 20, Activation::relu, 0.01),
      model(ModelKind::rnn, 1, 20, Activation::tanh, 0.001),
      model(ModelKind::transformer, 2, 0, Activation::relu, 0.0001),
    };
    c.output_dir = "out/scr";
    break;
  case Benchmark::mnist:
    c.tasks = 7000;
    c.steps_per_task = 150;
    c.batch_size = 400;
    c.bin_width = 150;
    c.models = {
      model(ModelKind::mlp, 3, 2000, Activation::relu, 0.001),
      model(ModelKind::transformer, 10, 0, Activation::relu, 0.0005),
    };
    c.output_dir = "out/mnist";
    break;
  case Benchmark::pe:
    c.tasks = 5000;
    c.steps_per_task = 500;
    c.batch_size = 1;
    c.bin_width = 10000;
    c.models = {
      model(ModelKind::mlp, 2, 30, Activation::relu, 0.003),
      model(ModelKind::ermlp, 2, 30, Activation::relu, 0.003),
      model(ModelKind::rnn, 6, 9, Activation::tanh, 0.001),
      model(ModelKind::transformer, 6, 0, Activation::relu, 0.001),
    };
    c.output_dir = "out/pe";
    break;
  }
  return c;
}

ExperimentConfig config_from_json(nlohmann::json const &j)
{
  ExperimentConfig c = paper_config(parse_benchmark(j.at("benchmark").get<std::string>()));
  c.tasks = j.value("tasks", c.tasks);
  c.steps_per_task = j.value("steps_per_task", c.steps_per_task);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.buffer_capacity = j.value("buffer_capacity", c.buffer_capacity);
  if (j.contains("seeds")) {
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  } else if (j.contains("seed_count")) {
    c.seeds = seed_range(j.at("seed_count").get<std::uint64_t>());
  }
  c.bin_width = j.value("bin_width", c.bin_width);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.checkpoint_every_tasks = j.value("checkpoint_every_tasks", c.checkpoint_every_tasks);
  c.output_dir = j.value("output_dir", c.output_dir.string());
  if (j.contains("scr")) {
    auto const &s = j.at("scr");
    c.scr.m = s.value("m", c.scr.m);
    c.scr.f = s.value("f", c.scr.f);
    c.scr.ltu_hidden = s.value("ltu_hidden", c.scr.ltu_hidden);
    c.scr.beta = s.value("beta", c.scr.beta);
  }
  if (j.contains("mnist")) {
    c.mnist.data_dir = j.at("mnist").value("data_dir", c.mnist.data_dir);
  }
  if (j.contains("pe")) {
    auto const &p = j.at("pe");
    c.pe.states = p.value("states", c.pe.states);
    c.pe.feature_dim = p.value("feature_dim", c.pe.feature_dim);
    c.pe.gamma = p.value("gamma", c.pe.gamma);
  }
  if (j.contains("optimizer")) {
    auto const &o = j.at("optimizer");
    c.optimizer.beta1 = o.value("beta1", c.optimizer.beta1);
    c.optimizer.beta2 = o.value("beta2", c.optimizer.beta2);
    c.optimizer.eps = o.value("eps", c.optimizer.eps);
    c.optimizer.weight_decay = o.value("weight_decay", c.optimizer.weight_decay);
  }
  if (j.contains("models")) {
    c.models.clear();
    for (auto const &mj : j.at("models")) {
      ModelConfig m;
      m.kind = parse_model_kind(mj.at("kind").get<std::string>());
      m.layers = mj.value("layers", m.layers);
      m.hidden = mj.value("hidden", m.hidden);
      m.key_dim = mj.value("key_dim", m.key_dim);
      m.activation = parse_activation(mj.value("activation", to_string(m.activation)));
      m.lr = mj.at("lr").get<double>();
      c.models.push_back(m);
    }
  }
  return c;
}

nlohmann::json config_to_json(ExperimentConfig const &c)
{
  nlohmann::json models = nlohmann::json::array();
  for (auto const &m : c.models) {
    nlohmann::json mj = {{"kind", to_string(m.kind)}, {"layers", m.layers}, {"lr", m.lr}};
    if (m.kind != ModelKind::transformer) {
      mj["hidden"] = m.hidden;
      mj["activation"] = to_string(m.activation);
    } else if (m.key_dim > 0) {
      mj["key_dim"] = m.key_dim;
    }
    models.push_back(std::move(mj));
  }
  nlohmann::json j = {
    {"benchmark", to_string(c.benchmark)},
    {"tasks", c.tasks},
    {"steps_per_task", c.steps_per_task},
    {"batch_size", c.batch_size},
    {"buffer_capacity", c.buffer_capacity},
    {"seeds", c.seeds},
    {"bin_width", c.bin_width},
    {"eval_every", c.eval_every},
    {"checkpoint_every_tasks", c.checkpoint_every_tasks},
    {"output_dir", c.output_dir.string()},
    {"optimizer",
     {{"beta1", c.optimizer.beta1},
      {"beta2", c.optimizer.beta2},
      {"eps", c.optimizer.eps},
      {"weight_decay", c.optimizer.weight_decay}}},
    {"models", models},
  };
  switch (c.benchmark) {
  case Benchmark::scr:
    j["scr"] = {{"m", c.scr.m}, {"f", c.scr.f}, {"ltu_hidden", c.scr.ltu_hidden}, {"beta", c.scr.beta}};
    break;
  case Benchmark::mnist:
    j["mnist"] = {{"data_dir", c.mnist.data_dir}};
    break;
  case Benchmark::pe:
    j["pe"] = {{"states", c.pe.states}, {"feature_dim", c.pe.feature_dim}, {"gamma", c.pe.gamma}};
    break;
  }
  return j;
}

ExperimentConfig load_config(std::filesystem::path const &path)
{
  std::ifstream is(path);
  if (!is) {
    throw std::runtime_error("cannot open config " + path.string());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (nlohmann::json::parse_error const &e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  ExperimentConfig c = config_from_json(j);
  validate(c);
  return c;
}

void validate(ExperimentConfig const &c)
{
  auto fail = [](std::string const &msg) { throw std::invalid_argument("invalid config: " + msg); };
  if (c.tasks < 1) {
    fail("tasks must be >= 1");
  }
  if (c.steps_per_task < 1) {
    fail("steps_per_task must be >= 1");
  }
  if (c.batch_size < 1) {
    fail("batch_size must be >= 1");
  }
  if (c.benchmark != Benchmark::mnist && c.batch_size != 1) {
    fail("scr and pe run with batch_size 1");
  }
  if (c.buffer_capacity < 1) {
    fail("buffer_capacity must be >= 1");
  }
  if (c.seeds.empty()) {
    fail("at least one seed is required");
  }
  if (c.bin_width < 1) {
    fail("bin_width must be >= 1");
  }
  if (c.eval_every < 1) {
    fail("eval_every must be >= 1");
  }
  if (c.models.empty()) {
    fail("no models listed");
  }
  if (c.benchmark == Benchmark::scr && (c.scr.f <= 0 || c.scr.f >= c.scr.m)) {
    fail("scr.f must satisfy 0 < f < m");
  }
  if (c.benchmark == Benchmark::pe) {
    if (c.pe.states < 3 || c.pe.feature_dim < 1) {
      fail("pe.states must be >= 3 and pe.feature_dim >= 1");
    }
    if (!(c.pe.gamma >= 0.0 && c.pe.gamma < 1.0)) {
      fail("pe.gamma must lie in [0, 1)");
    }
  }
  InputShape const shape = input_shape(c);
  for (auto const &m : c.models) {
    if (m.layers < 1) {
      fail(m.name() + ": layers must be >= 1");
    }
    if (m.kind != ModelKind::transformer && m.hidden < 1) {
      fail(m.name() + ": hidden must be >= 1");
    }
    if (!(m.lr > 0.0)) {
      fail(m.name() + ": lr must be positive");
    }
    if (m.kind == ModelKind::rnn && m.hidden < shape.outputs) {
      fail("rnn: hidden width is smaller than the readout width");
    }
  }
}

ExperimentConfig scaled(ExperimentConfig c, double factor)
{
  if (!(factor >= 1.0)) {
    throw std::invalid_argument("scale factor must be >= 1");
  }
  c.tasks = std::max<std::int64_t>(1, std::llround(static_cast<double>(c.tasks) / factor));
  return c;
}

std::uint64_t config_hash(ExperimentConfig const &c)
{
  nlohmann::json j = config_to_json(c);
  j.erase("output_dir");
  return fnv1a(j.dump());
}

InputShape input_shape(ExperimentConfig const &c)
{
  switch (c.benchmark) {
  case Benchmark::scr:
    return {c.scr.m, 1, 1};
  case Benchmark::mnist:
    return {49, 10, 10};
  case Benchmark::pe:
    return {c.pe.feature_dim, c.pe.feature_dim + 1, 1};
  }
  throw std::logic_error("unknown benchmark");
}

Network<float> make_network(ExperimentConfig const &c, ModelConfig const &m, Rng &rng)
{
  InputShape const s = input_shape(c);
  Index const tokens = static_cast<Index>(c.buffer_capacity) + 1;
  ReadoutSpec const readout = s.outputs == 1 ? ReadoutSpec::scalar() : ReadoutSpec::logits(s.outputs);
  auto widths = [&](Index input) {
    std::vector<Index> w{input};
    for (int i = 0; i < m.layers; ++i) {
      w.push_back(m.hidden);
    }
    w.push_back(s.outputs);
    return w;
  };
  switch (m.kind) {
  case ModelKind::mlp:
    return Network<float>::mlp(init_mlp<float>(rng, widths(s.features), m.activation));
  case ModelKind::ermlp:
    return Network<float>::ermlp(init_mlp<float>(rng, widths(s.d_model() * tokens), m.activation));
  case ModelKind::rnn:
    return Network<float>::rnn(init_rnn<float>(rng, s.d_model(), m.hidden, m.layers), readout);
  case ModelKind::transformer: {
    Index const dk = m.key_dim > 0 ? m.key_dim : default_key_dim(s.d_model());
    return Network<float>::transformer(init_transformer<float>(rng, m.layers, s.d_model(), dk), readout);
  }
  }
  throw std::logic_error("unknown model kind");
}

} // namespace ercl
