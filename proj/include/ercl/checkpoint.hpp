#pragma once

// Versioned text checkpoint: a manifest line per tensor followed by its
// row-major values printed with round-trip precision.
//
//   ercl-checkpoint 1
//   model transformer
//   tensors 6
//   tensor 0 11 21
//   <231 values>
//   ...

#include "models.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ercl {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint
{
  std::string model;
  std::vector<Mat<float>> tensors;
};

void save_checkpoint(std::filesystem::path const &path, std::string const &model,
                     std::vector<Mat<float> const *> const &tensors);
Checkpoint load_checkpoint(std::filesystem::path const &path);

/// Overwrite the network's weights; shapes must match exactly.
void restore(Network<float> &net, Checkpoint const &ckpt);

} // namespace ercl
