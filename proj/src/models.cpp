#include "ercl/checkpoint.hpp"
#include "ercl/models.hpp"

#include <fstream>
#include <limits>
#include <stdexcept>

namespace ercl {

std::string to_string(ModelKind kind)
{
  switch (kind) {
  case ModelKind::mlp:
    return "mlp";
  case ModelKind::ermlp:
    return "ermlp";
  case ModelKind::rnn:
    return "rnn";
  case ModelKind::transformer:
    return "transformer";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string const &name)
{
  for (ModelKind k : {ModelKind::mlp, ModelKind::ermlp, ModelKind::rnn, ModelKind::transformer}) {
    if (to_string(k) == name) {
      return k;
    }
  }
  throw std::invalid_argument("unknown model kind '" + name + "' (expected mlp, ermlp, rnn, transformer)");
}

void save_checkpoint(std::filesystem::path const &path, std::string const &model,
                     std::vector<Mat<float> const *> const &tensors)
{
  std::ofstream os(path);
  if (!os) {
    throw std::runtime_error("cannot write checkpoint " + path.string());
  }
  os.precision(std::numeric_limits<float>::max_digits10);
  os << "ercl-checkpoint " << kCheckpointVersion << "\n";
  os << "model " << model << "\n";
  os << "tensors " << tensors.size() << "\n";
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    Mat<float> const &m = *tensors[t];
    os << "tensor " << t << " " << m.rows() << " " << m.cols() << "\n";
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) {
        os << m(i, j) << (j + 1 < m.cols() ? ' ' : '\n');
      }
    }
  }
  if (!os) {
    throw std::runtime_error("error writing checkpoint " + path.string());
  }
}

Checkpoint load_checkpoint(std::filesystem::path const &path)
{
  std::ifstream is(path);
  if (!is) {
    throw std::runtime_error("cannot open checkpoint " + path.string());
  }
  auto expect = [&](std::string const &word) {
    std::string got;
    if (!(is >> got) || got != word) {
      throw std::runtime_error("checkpoint " + path.string() + ": expected '" + word + "', got '" + got + "'");
    }
  };
  int version = 0;
  expect("ercl-checkpoint");
  is >> version;
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint " + path.string() + ": unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  expect("model");
  is >> ckpt.model;
  std::size_t count = 0;
  expect("tensors");
  is >> count;
  for (std::size_t t = 0; t < count; ++t) {
    std::size_t index = 0;
    Index rows = 0, cols = 0;
    expect("tensor");
    is >> index >> rows >> cols;
    if (!is || index != t || rows < 0 || cols < 0) {
      throw std::runtime_error("checkpoint " + path.string() + ": bad manifest for tensor " + std::to_string(t));
    }
    Mat<float> m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < cols; ++j) {
        is >> m(i, j);
      }
    }
    if (!is) {
      throw std::runtime_error("checkpoint " + path.string() + ": truncated values in tensor " + std::to_string(t));
    }
    ckpt.tensors.push_back(std::move(m));
  }
  return ckpt;
}

void restore(Network<float> &net, Checkpoint const &ckpt)
{
  auto targets = net.tensors();
  if (ckpt.model != to_string(net.kind()) || targets.size() != ckpt.tensors.size()) {
    throw std::invalid_argument("restore: checkpoint for '" + ckpt.model + "' with " +
                                std::to_string(ckpt.tensors.size()) + " tensors does not fit a " +
                                to_string(net.kind()) + " network with " + std::to_string(targets.size()));
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i]->rows() != ckpt.tensors[i].rows() || targets[i]->cols() != ckpt.tensors[i].cols()) {
      throw ShapeError("restore: tensor " + std::to_string(i) + " shape mismatch");
    }
    *targets[i] = ckpt.tensors[i];
  }
}

} // namespace ercl
