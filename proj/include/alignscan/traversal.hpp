#pragma once

// Scan orders over a 2D token grid (cross-scan) and the inverse reordering
// plus summation of per-direction outputs (cross-merge).

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "alignscan/tensor.hpp"

namespace alignscan {

struct TokenGrid {
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t size() const { return height * width; }
};

enum class ScanDirection {
  ForwardRowMajor,
  BackwardRowMajor,
  SnakeForward,
  SnakeBackward,
};

std::string_view to_string(ScanDirection d);

/// perm[i] is the original (row-major) grid index visited at scan step i.
struct ScanPath {
  ScanDirection direction = ScanDirection::ForwardRowMajor;
  std::vector<std::size_t> perm;
};

ScanPath build_path(TokenGrid grid, ScanDirection direction);

/// Direction sets used by the block stack.
enum class PathSet {
  Vim,    // forward + backward row-major
  Snake,  // Vim plus both snake orders
};

std::vector<ScanPath> build_paths(TokenGrid grid, PathSet set);

bool is_permutation(std::span<const std::size_t> perm);
std::vector<std::size_t> inverse_permutation(std::span<const std::size_t> perm);

/// Output token i is input token perm[i].
TokenTensor permute(const TokenTensor& x, std::span<const std::size_t> perm);
inline TokenTensor permute(const TokenTensor& x, const ScanPath& path) {
  return permute(x, path.perm);
}

/// Output token perm[i] is input token i.
TokenTensor unpermute(const TokenTensor& x, std::span<const std::size_t> perm);

struct PathOutput {
  TokenTensor y;  // in scan order of `path`
  ScanPath path;
};

/// Restore each output to grid order and sum them elementwise.
TokenTensor cross_merge(std::span<const PathOutput> outputs);

}  // namespace alignscan
