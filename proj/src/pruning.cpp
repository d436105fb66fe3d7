#include "alignscan/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "alignscan/error.hpp"

namespace alignscan {

std::string_view to_string(ImportanceMetric m) {
  switch (m) {
    case ImportanceMetric::ClippedMean: return "clipped_mean";
    case ImportanceMetric::L1Norm: return "l1";
    case ImportanceMetric::L2Norm: return "l2";
    case ImportanceMetric::UnclippedMean: return "unclipped_mean";
  }
  return "unknown";
}

ImportanceMetric parse_metric(std::string_view name) {
  for (auto m : {ImportanceMetric::ClippedMean, ImportanceMetric::L1Norm,
                 ImportanceMetric::L2Norm, ImportanceMetric::UnclippedMean}) {
    if (name == to_string(m)) return m;
  }
  throw ConfigError("unknown importance metric '" + std::string(name) + "'");
}

double token_importance(std::span<const double> channels, ImportanceMetric m) {
  if (channels.empty()) {
    throw StructuralError("token_importance: empty channel dimension");
  }
  double acc = 0.0;
  switch (m) {
    case ImportanceMetric::ClippedMean:
      for (double v : channels) acc += std::max(0.0, v);
      break;
    case ImportanceMetric::L1Norm:
      for (double v : channels) acc += std::abs(v);
      break;
    case ImportanceMetric::L2Norm:
      for (double v : channels) acc += v * v;
      return std::sqrt(acc / static_cast<double>(channels.size()));
    case ImportanceMetric::UnclippedMean:
      for (double v : channels) acc += v;
      break;
  }
  return acc / static_cast<double>(channels.size());
}

ImportanceScores importance_scores(const TokenTensor& y, ImportanceMetric m) {
  if (y.channels() == 0) {
    throw StructuralError("importance_scores: empty channel dimension");
  }
  ImportanceScores s{y.batch(), y.tokens(), {}, m};
  s.scores.resize(y.batch() * y.tokens());
  for (std::size_t b = 0; b < y.batch(); ++b) {
    for (std::size_t t = 0; t < y.tokens(); ++t) {
      s.scores[b * y.tokens() + t] = token_importance(y.token(b, t), m);
    }
  }
  return s;
}

ImportanceScores importance_scores(std::span<const TokenTensor> y_dirs,
                                   ImportanceMetric m) {
  if (y_dirs.empty()) {
    throw StructuralError("importance_scores: no directions");
  }
  ImportanceScores total = importance_scores(y_dirs.front(), m);
  for (std::size_t d = 1; d < y_dirs.size(); ++d) {
    if (!y_dirs[d].same_shape(y_dirs.front())) {
      throw StructuralError("importance_scores: direction shapes differ");
    }
    const ImportanceScores part = importance_scores(y_dirs[d], m);
    for (std::size_t i = 0; i < total.scores.size(); ++i) {
      total.scores[i] += part.scores[i];
    }
  }
  const double n = static_cast<double>(y_dirs.size());
  for (double& v : total.scores) v /= n;
  return total;
}

PositionMap PositionMap::all_keep(std::size_t original_len) {
  PositionMap m;
  m.keep_.assign(original_len, true);
  m.remaining_.resize(original_len);
  std::iota(m.remaining_.begin(), m.remaining_.end(), std::size_t{0});
  return m;
}

PositionMap PositionMap::from_indices(std::size_t original_len,
                                      std::vector<std::size_t> indices) {
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= original_len) {
      throw StructuralError("PositionMap: index " + std::to_string(indices[i]) +
                            " out of range for length " +
                            std::to_string(original_len));
    }
    if (i > 0 && indices[i] <= indices[i - 1]) {
      throw StructuralError("PositionMap: indices must be strictly increasing");
    }
  }
  PositionMap m;
  m.keep_.assign(original_len, false);
  for (std::size_t i : indices) m.keep_[i] = true;
  m.remaining_ = std::move(indices);
  return m;
}

PositionMap PositionMap::from_mask(const std::vector<bool>& keep) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) idx.push_back(i);
  }
  return from_indices(keep.size(), std::move(idx));
}

void PruneConfig::validate() const {
  if (!(keep_rate > 0.0 && keep_rate <= 1.0)) {
    throw ConfigError("keep_rate must lie in (0, 1]");
  }
  for (std::size_t i = 0; i < prune_after_layers.size(); ++i) {
    if (prune_after_layers[i] == 0) {
      throw ConfigError("prune_after_layers are 1-based");
    }
    if (i > 0 && prune_after_layers[i] <= prune_after_layers[i - 1]) {
      throw ConfigError("prune_after_layers must be strictly increasing");
    }
  }
}

std::size_t keep_count_for(double keep_rate, std::size_t current) {
  if (!(keep_rate > 0.0 && keep_rate <= 1.0)) {
    throw DomainError("keep_count_for: keep_rate must lie in (0, 1]");
  }
  const auto k = static_cast<std::size_t>(
      std::lround(keep_rate * static_cast<double>(current)));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(current, 1));
}

PositionMap select_tokens(std::span<const double> scores,
                          std::size_t keep_count) {
  if (keep_count < 1 || keep_count > scores.size()) {
    throw DomainError("select_tokens: keep_count " + std::to_string(keep_count) +
                      " outside [1, " + std::to_string(scores.size()) + "]");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw DomainError("select_tokens: NaN score");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto more_important = [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  };
  const auto cut = order.begin() + static_cast<std::ptrdiff_t>(keep_count);
  std::nth_element(order.begin(), cut - 1, order.end(), more_important);
  std::vector<std::size_t> kept(order.begin(), cut);
  std::sort(kept.begin(), kept.end());
  return PositionMap::from_indices(scores.size(), std::move(kept));
}

std::vector<PositionMap> select_tokens(const ImportanceScores& s,
                                       std::size_t keep_count) {
  std::vector<PositionMap> maps;
  maps.reserve(s.batch);
  for (std::size_t b = 0; b < s.batch; ++b) {
    maps.push_back(select_tokens(s.row(b), keep_count));
  }
  return maps;
}

PositionMap compose_maps(const PositionMap& outer, const PositionMap& inner) {
  if (inner.original_len() != outer.kept_count()) {
    throw StructuralError("compose_maps: inner map covers " +
                          std::to_string(inner.original_len()) +
                          " tokens, outer keeps " +
                          std::to_string(outer.kept_count()));
  }
  std::vector<std::size_t> idx;
  idx.reserve(inner.kept_count());
  for (std::size_t j : inner.remaining_indices()) {
    idx.push_back(outer.remaining_indices()[j]);
  }
  return PositionMap::from_indices(outer.original_len(), std::move(idx));
}

TokenTensor gather_kept(const TokenTensor& x, const PositionMap& map) {
  if (x.tokens() != map.original_len()) {
    throw StructuralError("gather_kept: token count does not match map");
  }
  TokenTensor out(x.batch(), map.kept_count(), x.channels());
  for (std::size_t b = 0; b < x.batch(); ++b) {
    for (std::size_t j = 0; j < map.kept_count(); ++j) {
      auto src = x.token(b, map.remaining_indices()[j]);
      std::copy(src.begin(), src.end(), out.token(b, j).begin());
    }
  }
  return out;
}

TokenTensor scatter_kept(const TokenTensor& kept, const PositionMap& map,
                         double fill) {
  if (kept.tokens() != map.kept_count()) {
    throw StructuralError("scatter_kept: token count does not match map");
  }
  TokenTensor out(kept.batch(), map.original_len(), kept.channels(), fill);
  for (std::size_t b = 0; b < kept.batch(); ++b) {
    for (std::size_t j = 0; j < map.kept_count(); ++j) {
      auto src = kept.token(b, j);
      std::copy(src.begin(), src.end(),
                out.token(b, map.remaining_indices()[j]).begin());
    }
  }
  return out;
}

ScanOrderView scan_order(const PositionMap& grid_map, const ScanPath& path) {
  if (path.perm.size() != grid_map.original_len()) {
    throw StructuralError("scan_order: path length does not match map");
  }
  // rank[g] = position of grid index g in the ascending survivor list.
  std::vector<std::size_t> rank(grid_map.original_len(), 0);
  for (std::size_t j = 0; j < grid_map.kept_count(); ++j) {
    rank[grid_map.remaining_indices()[j]] = j;
  }
  ScanOrderView view;
  std::vector<std::size_t> scan_kept;
  scan_kept.reserve(grid_map.kept_count());
  view.local_perm.reserve(grid_map.kept_count());
  for (std::size_t i = 0; i < path.perm.size(); ++i) {
    const std::size_t g = path.perm[i];
    if (grid_map.kept(g)) {
      scan_kept.push_back(i);
      view.local_perm.push_back(rank[g]);
    }
  }
  view.scan_map =
      PositionMap::from_indices(grid_map.original_len(), std::move(scan_kept));
  return view;
}

}  // namespace alignscan
