#pragma once

// Closed-form multiply-accumulate accounting for the block stack, and the
// same report assembled from counters recorded during a forward pass.
//
// One MAC is one multiply paired with one add; `flops` fields are 2 * MACs.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "alignscan/model.hpp"

namespace alignscan {

struct LayerFlops {
  std::size_t layer = 0;   // 1-based
  std::size_t tokens = 0;  // alive tokens entering the layer
  std::uint64_t projections = 0;
  std::uint64_t scan_kept = 0;
  std::uint64_t scan_pruned = 0;
  std::uint64_t gating = 0;
  std::uint64_t output_projection = 0;

  std::uint64_t total() const {
    return projections + scan_kept + scan_pruned + gating + output_projection;
  }
  friend bool operator==(const LayerFlops&, const LayerFlops&) = default;
};

struct FlopsTotals {
  std::uint64_t projections = 0;
  std::uint64_t scan_kept = 0;
  std::uint64_t scan_pruned = 0;
  std::uint64_t gating = 0;
  std::uint64_t output_projection = 0;
  std::uint64_t macs = 0;

  std::uint64_t flops() const { return 2 * macs; }
  friend bool operator==(const FlopsTotals&, const FlopsTotals&) = default;
};

struct FlopsReport {
  std::vector<LayerFlops> dense_layers;
  std::vector<LayerFlops> pruned_layers;
  FlopsTotals dense;
  FlopsTotals pruned;
  double reduction_percent = 0.0;  // 100 * (1 - pruned / dense)
  double dense_scan_share = 0.0;   // scan MACs / total MACs, dense model

  friend bool operator==(const FlopsReport&, const FlopsReport&) = default;
};

/// Alive token count entering each layer under cfg's schedule.
std::vector<std::size_t> tokens_per_layer(const ModelConfig& cfg);

FlopsReport count_flops(const ModelConfig& cfg);

FlopsTotals sum_layers(std::span<const LayerFlops> layers);
std::vector<LayerFlops> layers_from_work(std::span<const BlockWork> work);

/// Runs the dense and pruned forward passes with instrumentation and builds
/// the report from the recorded counters.
FlopsReport measure_flops(const ModelConfig& cfg);

}  // namespace alignscan
