#include "alignscan/traversal.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "alignscan/error.hpp"

namespace alignscan {

std::string_view to_string(ScanDirection d) {
  switch (d) {
    case ScanDirection::ForwardRowMajor: return "forward";
    case ScanDirection::BackwardRowMajor: return "backward";
    case ScanDirection::SnakeForward: return "snake_forward";
    case ScanDirection::SnakeBackward: return "snake_backward";
  }
  return "unknown";
}

ScanPath build_path(TokenGrid grid, ScanDirection direction) {
  if (grid.height == 0 || grid.width == 0) {
    throw StructuralError("build_path: grid dimensions must be >= 1");
  }
  ScanPath path{direction, std::vector<std::size_t>(grid.size())};
  std::iota(path.perm.begin(), path.perm.end(), std::size_t{0});
  if (direction == ScanDirection::SnakeForward ||
      direction == ScanDirection::SnakeBackward) {
    for (std::size_t r = 1; r < grid.height; r += 2) {
      auto row = path.perm.begin() + static_cast<std::ptrdiff_t>(r * grid.width);
      std::reverse(row, row + static_cast<std::ptrdiff_t>(grid.width));
    }
  }
  if (direction == ScanDirection::BackwardRowMajor ||
      direction == ScanDirection::SnakeBackward) {
    std::reverse(path.perm.begin(), path.perm.end());
  }
  return path;
}

std::vector<ScanPath> build_paths(TokenGrid grid, PathSet set) {
  std::vector<ScanPath> paths{build_path(grid, ScanDirection::ForwardRowMajor),
                              build_path(grid, ScanDirection::BackwardRowMajor)};
  if (set == PathSet::Snake) {
    paths.push_back(build_path(grid, ScanDirection::SnakeForward));
    paths.push_back(build_path(grid, ScanDirection::SnakeBackward));
  }
  return paths;
}

bool is_permutation(std::span<const std::size_t> perm) {
  std::vector<bool> seen(perm.size(), false);
  for (std::size_t p : perm) {
    if (p >= perm.size() || seen[p]) return false;
    seen[p] = true;
  }
  return true;
}

std::vector<std::size_t> inverse_permutation(std::span<const std::size_t> perm) {
  if (!is_permutation(perm)) {
    throw StructuralError("inverse_permutation: not a permutation");
  }
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return inv;
}

TokenTensor permute(const TokenTensor& x, std::span<const std::size_t> perm) {
  if (perm.size() != x.tokens()) {
    throw StructuralError("permute: permutation length " +
                          std::to_string(perm.size()) + " for " +
                          std::to_string(x.tokens()) + " tokens");
  }
  TokenTensor out(x.batch(), x.tokens(), x.channels());
  for (std::size_t b = 0; b < x.batch(); ++b) {
    for (std::size_t i = 0; i < perm.size(); ++i) {
      auto src = x.token(b, perm[i]);
      std::copy(src.begin(), src.end(), out.token(b, i).begin());
    }
  }
  return out;
}

TokenTensor unpermute(const TokenTensor& x, std::span<const std::size_t> perm) {
  if (perm.size() != x.tokens()) {
    throw StructuralError("unpermute: permutation length mismatch");
  }
  TokenTensor out(x.batch(), x.tokens(), x.channels());
  for (std::size_t b = 0; b < x.batch(); ++b) {
    for (std::size_t i = 0; i < perm.size(); ++i) {
      auto src = x.token(b, i);
      std::copy(src.begin(), src.end(), out.token(b, perm[i]).begin());
    }
  }
  return out;
}

TokenTensor cross_merge(std::span<const PathOutput> outputs) {
  if (outputs.empty()) {
    throw StructuralError("cross_merge: no outputs");
  }
  const TokenTensor& first = outputs.front().y;
  TokenTensor merged(first.batch(), first.tokens(), first.channels());
  for (const auto& o : outputs) {
    if (!o.y.same_shape(first) || o.path.perm.size() != first.tokens()) {
      throw StructuralError("cross_merge: outputs differ in shape");
    }
    if (!is_permutation(o.path.perm)) {
      throw StructuralError("cross_merge: path is not a permutation");
    }
    for (std::size_t b = 0; b < first.batch(); ++b) {
      for (std::size_t i = 0; i < first.tokens(); ++i) {
        auto src = o.y.token(b, i);
        auto dst = merged.token(b, o.path.perm[i]);
        for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
      }
    }
  }
  return merged;
}

}  // namespace alignscan
