#include "alignscan/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "alignscan/aligned_scan.hpp"
#include "alignscan/error.hpp"

namespace alignscan {

namespace {

using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;

Matrix normal_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                     double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols,
                   const char* name) {
  if (static_cast<std::size_t>(m.rows()) != rows ||
      static_cast<std::size_t>(m.cols()) != cols) {
    throw StructuralError(std::string("weights: ") + name + " is " +
                          std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()) + ", expected " +
                          std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (!m.allFinite()) {
    throw StructuralError(std::string("weights: ") + name +
                          " has non-finite entries");
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (depth == 0 || embed_dim == 0 || inner_dim == 0 || state_dim == 0) {
    throw ConfigError("depth, embed_dim, inner_dim and state_dim must be >= 1");
  }
  if (grid.height == 0 || grid.width == 0) {
    throw ConfigError("grid dimensions must be >= 1");
  }
  if (batch == 0) throw ConfigError("batch must be >= 1");
  prune.validate();
  if (!prune.prune_after_layers.empty() &&
      prune.prune_after_layers.back() > depth) {
    throw ConfigError("prune_after_layers entry " +
                      std::to_string(prune.prune_after_layers.back()) +
                      " exceeds depth " + std::to_string(depth));
  }
}

ModelConfig vim_s_surrogate() {
  ModelConfig cfg;
  cfg.depth = 24;
  cfg.embed_dim = 384;
  cfg.inner_dim = 768;
  cfg.state_dim = 16;
  cfg.grid = {14, 14};
  cfg.prune.keep_rate = 0.7;
  cfg.prune.prune_after_layers = {5, 10, 15, 20};
  cfg.prune.metric = ImportanceMetric::ClippedMean;
  return cfg;
}

double softplus(double x) { return x > 20.0 ? x : std::log1p(std::exp(x)); }

double silu(double x) { return x / (1.0 + std::exp(-x)); }

std::vector<BlockWeights> init_weights(const ModelConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const std::size_t d = cfg.embed_dim;
  const std::size_t di = cfg.inner_dim;
  const std::size_t ns = cfg.state_dim;
  const double in_scale = 1.0 / std::sqrt(static_cast<double>(d));
  const double inner_scale = 1.0 / std::sqrt(static_cast<double>(di));
  const double out_scale = inner_scale / static_cast<double>(cfg.depth);
  std::uniform_real_distribution<double> log_dt(std::log(kDeltaMin),
                                                std::log(kDeltaMax));

  std::vector<BlockWeights> blocks(cfg.depth);
  for (auto& w : blocks) {
    w.in_proj = normal_matrix(rng, d, di, in_scale);
    w.gate_proj = normal_matrix(rng, d, di, in_scale);
    // No normalization layers, and the gate makes each block quadratic in its
    // input, so residual updates are scaled down by the depth.
    w.out_proj = normal_matrix(rng, di, d, out_scale);
    w.directions.resize(cfg.directions());
    for (auto& dir : w.directions) {
      dir.ssm.state_dim = ns;
      dir.ssm.channel_dim = di;
      dir.ssm.mode = SsmMode::Selective;
      dir.ssm.a_diag.resize(di * ns);
      for (std::size_t c = 0; c < di; ++c) {
        for (std::size_t n = 0; n < ns; ++n) {
          dir.ssm.a_diag[c * ns + n] = -static_cast<double>(n + 1);
        }
      }
      dir.delta_proj = Eigen::Map<const Eigen::VectorXd>(
          normal_matrix(rng, di, 1, 0.1 * inner_scale).data(),
          static_cast<Eigen::Index>(di));
      dir.delta_bias.resize(static_cast<Eigen::Index>(di));
      for (Eigen::Index c = 0; c < dir.delta_bias.size(); ++c) {
        // Inverse softplus of a log-uniform timescale.
        const double dt = std::exp(log_dt(rng));
        dir.delta_bias[c] = dt + std::log(-std::expm1(-dt));
      }
      dir.b_proj = normal_matrix(rng, di, ns, inner_scale);
      dir.c_proj = normal_matrix(rng, di, ns, inner_scale);
    }
  }
  return blocks;
}

void validate_weights(const ModelConfig& cfg,
                      std::span<const BlockWeights> weights) {
  if (weights.size() != cfg.depth) {
    throw StructuralError("weights: " + std::to_string(weights.size()) +
                          " blocks for depth " + std::to_string(cfg.depth));
  }
  for (const auto& w : weights) {
    require_shape(w.in_proj, cfg.embed_dim, cfg.inner_dim, "in_proj");
    require_shape(w.gate_proj, cfg.embed_dim, cfg.inner_dim, "gate_proj");
    require_shape(w.out_proj, cfg.inner_dim, cfg.embed_dim, "out_proj");
    if (w.directions.size() != cfg.directions()) {
      throw StructuralError("weights: wrong number of scan directions");
    }
    for (const auto& dir : w.directions) {
      if (dir.ssm.channel_dim != cfg.inner_dim ||
          dir.ssm.state_dim != cfg.state_dim) {
        throw StructuralError("weights: state space dims do not match config");
      }
      dir.ssm.validate();
      if (static_cast<std::size_t>(dir.delta_proj.size()) != cfg.inner_dim ||
          static_cast<std::size_t>(dir.delta_bias.size()) != cfg.inner_dim ||
          !dir.delta_proj.allFinite() || !dir.delta_bias.allFinite()) {
        throw StructuralError("weights: bad delta projection");
      }
      require_shape(dir.b_proj, cfg.inner_dim, cfg.state_dim, "b_proj");
      require_shape(dir.c_proj, cfg.inner_dim, cfg.state_dim, "c_proj");
    }
  }
}

BlockOutput block_forward(const TokenTensor& t_prev, const BlockWeights& w,
                          std::span<const ScanPath> paths,
                          std::span<const PositionMap> maps,
                          const ForwardOptions& opts) {
  const std::size_t batch = t_prev.batch();
  const std::size_t kept = t_prev.tokens();
  const std::size_t d = t_prev.channels();
  const auto di = static_cast<std::size_t>(w.in_proj.cols());
  if (static_cast<std::size_t>(w.in_proj.rows()) != d) {
    throw StructuralError("block_forward: token width " + std::to_string(d) +
                          " does not match in_proj");
  }
  if (paths.size() != w.directions.size()) {
    throw StructuralError("block_forward: " + std::to_string(paths.size()) +
                          " paths for " + std::to_string(w.directions.size()) +
                          " direction weight sets");
  }
  if (maps.size() != batch) {
    throw StructuralError("block_forward: one position map per batch item");
  }
  for (const auto& m : maps) {
    if (m.kept_count() != kept) {
      throw StructuralError("block_forward: map keeps " +
                            std::to_string(m.kept_count()) + " tokens, input has " +
                            std::to_string(kept));
    }
    for (const auto& p : paths) {
      if (p.perm.size() != m.original_len()) {
        throw StructuralError("block_forward: path length does not match map");
      }
    }
  }

  const auto rows = static_cast<Eigen::Index>(batch * kept);
  const ConstMap t_in(t_prev.values().data(), rows, static_cast<Eigen::Index>(d));
  const Matrix x_proj = t_in * w.in_proj;
  Matrix gate = t_in * w.gate_proj;
  gate = gate.unaryExpr([](double v) { return silu(v); });

  BlockWork work;
  work.tokens = kept;
  work.projection_macs = 2ULL * batch * kept * d * di;

  BlockOutput out;
  out.y_dirs.reserve(paths.size());
  Matrix merged = Matrix::Zero(rows, static_cast<Eigen::Index>(di));
  const auto ns = static_cast<std::size_t>(w.directions.front().ssm.state_dim);

  for (std::size_t m = 0; m < paths.size(); ++m) {
    const DirectionWeights& dir = w.directions[m];
    TokenTensor y_dir(batch, kept, di);
    for (std::size_t b = 0; b < batch; ++b) {
      const ScanOrderView view = scan_order(maps[b], paths[m]);

      TokenTensor xs(1, kept, di);
      MutMap xs_mat(xs.values().data(), static_cast<Eigen::Index>(kept),
                    static_cast<Eigen::Index>(di));
      for (std::size_t j = 0; j < kept; ++j) {
        xs_mat.row(static_cast<Eigen::Index>(j)) =
            x_proj.row(static_cast<Eigen::Index>(b * kept + view.local_perm[j]));
      }
      const Eigen::VectorXd delta_raw = xs_mat * dir.delta_proj;
      const Matrix b_mat = xs_mat * dir.b_proj;
      const Matrix c_mat = xs_mat * dir.c_proj;

      std::vector<StepParams> params(kept);
      for (std::size_t j = 0; j < kept; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        auto& p = params[j];
        p.delta.resize(di);
        for (std::size_t c = 0; c < di; ++c) {
          p.delta[c] =
              softplus(delta_raw[jj] + dir.delta_bias[static_cast<Eigen::Index>(c)]);
        }
        p.b_in.assign(b_mat.row(jj).data(), b_mat.row(jj).data() + ns);
        p.c_out.assign(c_mat.row(jj).data(), c_mat.row(jj).data() + ns);
      }

      ScanOptions scan_opts;
      scan_opts.threads = opts.threads;
      scan_opts.counters = &work.scan;
      ScanOutput scanned;
      if (view.scan_map.is_all_keep()) {
        scanned = scan_recurrent(dir.ssm, params, xs, scan_opts);
      } else if (opts.scan == PrunedScan::Aligned) {
        AlignedScanOptions aligned_opts;
        aligned_opts.threads = scan_opts.threads;
        aligned_opts.counters = scan_opts.counters;
        scanned = scan_aligned(dir.ssm, {xs, params, view.scan_map}, aligned_opts);
      } else {
        scanned = scan_condensed_naive(dir.ssm, xs, params, scan_opts);
      }

      for (std::size_t j = 0; j < kept; ++j) {
        auto src = scanned.y.token(0, j);
        std::copy(src.begin(), src.end(),
                  y_dir.token(b, view.local_perm[j]).begin());
      }
    }
    work.projection_macs += batch * kept * (di + 2ULL * di * ns);

    const ConstMap y_mat(y_dir.values().data(), rows, static_cast<Eigen::Index>(di));
    merged.array() += y_mat.array() * gate.array();
    work.gating_macs += batch * kept * di;
    out.y_dirs.push_back(std::move(y_dir));
  }

  out.t_out = TokenTensor(batch, kept, d);
  MutMap t_out(out.t_out.values().data(), rows, static_cast<Eigen::Index>(d));
  t_out.noalias() = merged * w.out_proj;
  t_out += t_in;
  work.output_macs = batch * kept * di * d;

  if (opts.work) opts.work->push_back(work);
  return out;
}

ForwardResult model_forward(const TokenTensor& x0, const ModelConfig& cfg,
                            std::span<const BlockWeights> weights,
                            const ForwardOptions& opts) {
  cfg.validate();
  validate_weights(cfg, weights);
  const std::size_t grid_n = cfg.grid.size();
  if (x0.tokens() != grid_n || x0.channels() != cfg.embed_dim) {
    throw StructuralError("model_forward: input must be batch x " +
                          std::to_string(grid_n) + " x " +
                          std::to_string(cfg.embed_dim));
  }
  const std::vector<ScanPath> paths = build_paths(cfg.grid, cfg.paths);

  ForwardResult result;
  result.final_maps.assign(x0.batch(), PositionMap::all_keep(grid_n));
  TokenTensor tokens = x0;
  auto next_stage = cfg.prune.prune_after_layers.begin();

  for (std::size_t layer = 1; layer <= cfg.depth; ++layer) {
    BlockOutput block = block_forward(tokens, weights[layer - 1], paths,
                                      result.final_maps, opts);
    tokens = std::move(block.t_out);
    if (next_stage == cfg.prune.prune_after_layers.end() || *next_stage != layer) {
      continue;
    }
    ++next_stage;

    PruneStage stage;
    stage.after_layer = layer;
    stage.scores = importance_scores(block.y_dirs, cfg.prune.metric);
    const std::size_t keep = keep_count_for(cfg.prune.keep_rate, tokens.tokens());
    const std::vector<PositionMap> local = select_tokens(stage.scores, keep);

    TokenTensor shrunk(tokens.batch(), keep, tokens.channels());
    for (std::size_t b = 0; b < tokens.batch(); ++b) {
      for (std::size_t j = 0; j < keep; ++j) {
        auto src = tokens.token(b, local[b].remaining_indices()[j]);
        std::copy(src.begin(), src.end(), shrunk.token(b, j).begin());
      }
      result.final_maps[b] = compose_maps(result.final_maps[b], local[b]);
    }
    tokens = std::move(shrunk);
    stage.maps = result.final_maps;
    result.stages.push_back(std::move(stage));
  }
  result.features = std::move(tokens);
  return result;
}

TokenTensor make_input(const ModelConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  TokenTensor x(cfg.batch, cfg.grid.size(), cfg.embed_dim);
  for (double& v : x.values()) v = dist(rng);
  return x;
}

}  // namespace alignscan
