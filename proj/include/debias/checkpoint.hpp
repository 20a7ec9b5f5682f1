#pragma once

// Text checkpoint of MlpParams. Layout:
//
//   debias-checkpoint v1
//   config_hash <16 hex digits>
//   shape <input_dim> <hidden_width> <depth> <num_classes> <detector_outputs>
//   tensor <name> <rows> <cols>
//   <rows lines of cols space-separated values>
//   ...
//   end
//
// Tensors appear in the order encoder.<i>.weight, encoder.<i>.bias, ...,
// main.weight, main.bias, detector.weight, detector.bias. Biases are stored
// as 1 x n. Values are shortest round-trip decimals, so a load restores the
// parameters bit for bit.

#include <cstdint>
#include <filesystem>
#include <string>

#include "debias/mlp.hpp"

namespace debias {

struct Checkpoint {
  MlpParams params;
  std::uint64_t config_hash = 0;
};

std::string checkpoint_text(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& text);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
// Throws DataError on a malformed or truncated file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace debias
