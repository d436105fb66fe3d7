#pragma once

// Token importance from scan outputs, top-k selection and position maps that
// record which original token indices survive each pruning stage.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "alignscan/tensor.hpp"
#include "alignscan/traversal.hpp"

namespace alignscan {

enum class ImportanceMetric {
  ClippedMean,    // mean_d max(0, y_d)
  L1Norm,         // mean_d |y_d|
  L2Norm,         // sqrt(mean_d y_d^2)
  UnclippedMean,  // mean_d y_d
};

std::string_view to_string(ImportanceMetric m);
/// Accepts the to_string spellings; throws ConfigError otherwise.
ImportanceMetric parse_metric(std::string_view name);

struct ImportanceScores {
  std::size_t batch = 0;
  std::size_t tokens = 0;
  std::vector<double> scores;  // batch x tokens
  ImportanceMetric metric = ImportanceMetric::ClippedMean;

  double at(std::size_t b, std::size_t t) const { return scores[b * tokens + t]; }
  std::span<const double> row(std::size_t b) const {
    return {scores.data() + b * tokens, tokens};
  }
};

/// Score of a single token's channel vector.
double token_importance(std::span<const double> channels, ImportanceMetric m);

ImportanceScores importance_scores(const TokenTensor& y, ImportanceMetric m);

/// Per-direction scores averaged arithmetically. All tensors must be in the
/// same (original index) token order.
ImportanceScores importance_scores(std::span<const TokenTensor> y_dirs,
                                   ImportanceMetric m);

/// Keep/prune record over `original_len` positions.
class PositionMap {
 public:
  PositionMap() = default;

  static PositionMap all_keep(std::size_t original_len);
  /// `indices` must be strictly increasing and < original_len.
  static PositionMap from_indices(std::size_t original_len,
                                  std::vector<std::size_t> indices);
  static PositionMap from_mask(const std::vector<bool>& keep);

  std::size_t original_len() const { return keep_.size(); }
  std::size_t kept_count() const { return remaining_.size(); }
  bool kept(std::size_t i) const { return keep_[i]; }
  bool is_all_keep() const { return remaining_.size() == keep_.size(); }
  const std::vector<bool>& keep() const { return keep_; }
  const std::vector<std::size_t>& remaining_indices() const { return remaining_; }

  friend bool operator==(const PositionMap&, const PositionMap&) = default;

 private:
  std::vector<bool> keep_;
  std::vector<std::size_t> remaining_;
};

struct PruneConfig {
  double keep_rate = 0.7;
  std::vector<std::size_t> prune_after_layers;
  ImportanceMetric metric = ImportanceMetric::ClippedMean;

  void validate() const;
};

/// round(keep_rate * current), at least 1.
std::size_t keep_count_for(double keep_rate, std::size_t current);

/// Highest `keep_count` scores; ties keep the lower index. The map's
/// remaining indices are ascending whatever the score order.
PositionMap select_tokens(std::span<const double> scores, std::size_t keep_count);
std::vector<PositionMap> select_tokens(const ImportanceScores& s,
                                       std::size_t keep_count);

/// `inner` is defined over the survivors of `outer`; the result is over
/// outer's original index space.
PositionMap compose_maps(const PositionMap& outer, const PositionMap& inner);

/// Kept tokens of `x` (tokens == map.original_len()) in ascending index order.
TokenTensor gather_kept(const TokenTensor& x, const PositionMap& map);

/// Inverse of gather_kept; pruned positions receive `fill`.
TokenTensor scatter_kept(const TokenTensor& kept, const PositionMap& map,
                         double fill = 0.0);

/// A pruned token set seen along one scan path.
struct ScanOrderView {
  /// Keep record indexed by scan step rather than grid index.
  PositionMap scan_map;
  /// local_perm[j] is the index, within the ascending survivor list, of the
  /// j-th survivor encountered along the path.
  std::vector<std::size_t> local_perm;
};

ScanOrderView scan_order(const PositionMap& grid_map, const ScanPath& path);

}  // namespace alignscan
