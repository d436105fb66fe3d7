#include "alignscan/flops.hpp"

namespace alignscan {

namespace {

FlopsReport assemble(std::vector<LayerFlops> dense,
                     std::vector<LayerFlops> pruned) {
  FlopsReport r;
  r.dense_layers = std::move(dense);
  r.pruned_layers = std::move(pruned);
  r.dense = sum_layers(r.dense_layers);
  r.pruned = sum_layers(r.pruned_layers);
  if (r.dense.macs > 0) {
    r.reduction_percent =
        100.0 * (1.0 - static_cast<double>(r.pruned.macs) /
                           static_cast<double>(r.dense.macs));
    r.dense_scan_share =
        static_cast<double>(r.dense.scan_kept + r.dense.scan_pruned) /
        static_cast<double>(r.dense.macs);
  }
  return r;
}

LayerFlops analytic_layer(const ModelConfig& cfg, std::size_t layer,
                          std::size_t alive) {
  const std::uint64_t b = cfg.batch;
  const std::uint64_t k = alive;
  const std::uint64_t n = cfg.grid.size();
  const std::uint64_t d = cfg.embed_dim;
  const std::uint64_t di = cfg.inner_dim;
  const std::uint64_t ns = cfg.state_dim;
  const std::uint64_t dirs = cfg.directions();

  LayerFlops l;
  l.layer = layer;
  l.tokens = alive;
  l.projections = b * k * (2 * d * di + dirs * (di + 2 * di * ns));
  l.scan_kept = b * dirs * k * di * ns * kKeptMacsPerState;
  l.scan_pruned = b * dirs * (n - k) * di * ns * kPrunedMacsPerState;
  l.gating = b * dirs * k * di;
  l.output_projection = b * k * di * d;
  return l;
}

}  // namespace

std::vector<std::size_t> tokens_per_layer(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> alive(cfg.depth);
  std::size_t current = cfg.grid.size();
  auto stage = cfg.prune.prune_after_layers.begin();
  for (std::size_t layer = 1; layer <= cfg.depth; ++layer) {
    alive[layer - 1] = current;
    if (stage != cfg.prune.prune_after_layers.end() && *stage == layer) {
      current = keep_count_for(cfg.prune.keep_rate, current);
      ++stage;
    }
  }
  return alive;
}

FlopsTotals sum_layers(std::span<const LayerFlops> layers) {
  FlopsTotals t;
  for (const auto& l : layers) {
    t.projections += l.projections;
    t.scan_kept += l.scan_kept;
    t.scan_pruned += l.scan_pruned;
    t.gating += l.gating;
    t.output_projection += l.output_projection;
    t.macs += l.total();
  }
  return t;
}

FlopsReport count_flops(const ModelConfig& cfg) {
  const std::vector<std::size_t> alive = tokens_per_layer(cfg);
  std::vector<LayerFlops> dense;
  std::vector<LayerFlops> pruned;
  for (std::size_t layer = 1; layer <= cfg.depth; ++layer) {
    dense.push_back(analytic_layer(cfg, layer, cfg.grid.size()));
    pruned.push_back(analytic_layer(cfg, layer, alive[layer - 1]));
  }
  return assemble(std::move(dense), std::move(pruned));
}

std::vector<LayerFlops> layers_from_work(std::span<const BlockWork> work) {
  std::vector<LayerFlops> layers;
  layers.reserve(work.size());
  for (std::size_t i = 0; i < work.size(); ++i) {
    const BlockWork& w = work[i];
    LayerFlops l;
    l.layer = i + 1;
    l.tokens = w.tokens;
    l.projections = w.projection_macs;
    l.scan_kept = w.scan.kept_macs;
    l.scan_pruned = w.scan.pruned_macs;
    l.gating = w.gating_macs;
    l.output_projection = w.output_macs;
    layers.push_back(l);
  }
  return layers;
}

FlopsReport measure_flops(const ModelConfig& cfg) {
  cfg.validate();
  const std::vector<BlockWeights> weights = init_weights(cfg);
  const TokenTensor x = make_input(cfg, cfg.seed + 1);

  ModelConfig dense_cfg = cfg;
  dense_cfg.prune.prune_after_layers.clear();

  std::vector<BlockWork> dense_work;
  std::vector<BlockWork> pruned_work;
  ForwardOptions opts;
  opts.work = &dense_work;
  model_forward(x, dense_cfg, weights, opts);
  opts.work = &pruned_work;
  model_forward(x, cfg, weights, opts);
  return assemble(layers_from_work(dense_work), layers_from_work(pruned_work));
}

}  // namespace alignscan
