#pragma once

// Raw little-endian tensors with a JSON sidecar: `name.bin` holds the values,
// `name.json` holds {"name", "shape", "dtype"}. dtype is "float64" or
// "float32"; values are always loaded as double.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "alignscan/model.hpp"
#include "alignscan/tensor.hpp"

namespace alignscan {

struct RawTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

/// `bin_path` is the data file; the sidecar sits next to it with a .json
/// extension.
void save_tensor(const std::filesystem::path& bin_path, const RawTensor& t,
                 const std::string& dtype = "float64");
RawTensor load_tensor(const std::filesystem::path& bin_path);

void save_token_tensor(const std::filesystem::path& bin_path,
                       const std::string& name, const TokenTensor& x);
/// Accepts rank 2 (tokens x channels, batch 1) or rank 3 tensors.
TokenTensor load_token_tensor(const std::filesystem::path& bin_path);

/// One tensor pair per weight, named block<i>.<field> and
/// block<i>.dir<m>.<field>.
void save_weights(const std::filesystem::path& dir,
                  std::span<const BlockWeights> weights);
std::vector<BlockWeights> load_weights(const std::filesystem::path& dir,
                                       const ModelConfig& cfg);

}  // namespace alignscan
