#pragma once

// Desk-scale stack of bidirectional selective-scan blocks with token pruning
// at scheduled layers. Each block projects the tokens to an inner width,
// scans the projection along every path with input-dependent (delta, B, C),
// gates each direction with silu(z), merges the directions by summation and
// adds the projected result back onto the residual stream.
//
// This is a surrogate: no conv branch, no normalization, no class token.

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "alignscan/pruning.hpp"
#include "alignscan/ssm.hpp"
#include "alignscan/tensor.hpp"
#include "alignscan/traversal.hpp"

namespace alignscan {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Scan parameters of one direction.
struct DirectionWeights {
  StateSpace ssm;             // inner_dim channels, Selective
  Eigen::VectorXd delta_proj;  // inner_dim -> 1
  Eigen::VectorXd delta_bias;  // one per channel
  Matrix b_proj;               // inner_dim x state_dim
  Matrix c_proj;               // inner_dim x state_dim
};

struct BlockWeights {
  Matrix in_proj;    // embed_dim x inner_dim
  Matrix gate_proj;  // embed_dim x inner_dim
  Matrix out_proj;   // inner_dim x embed_dim
  std::vector<DirectionWeights> directions;
};

struct ModelConfig {
  std::size_t depth = 4;
  std::size_t embed_dim = 8;
  std::size_t inner_dim = 16;
  std::size_t state_dim = 4;
  TokenGrid grid{4, 4};
  PruneConfig prune;
  std::uint64_t seed = 0;
  PathSet paths = PathSet::Vim;
  std::size_t batch = 1;

  std::size_t directions() const { return paths == PathSet::Vim ? 2 : 4; }
  /// Throws ConfigError.
  void validate() const;
};

/// depth 24, D=384, D'=768, 14x14 grid, prune after 5/10/15/20 at 0.7.
ModelConfig vim_s_surrogate();

/// Initial softplus(delta_bias) range.
inline constexpr double kDeltaMin = 1e-3;
inline constexpr double kDeltaMax = 0.1;

std::vector<BlockWeights> init_weights(const ModelConfig& cfg);

/// Throws StructuralError on shape mismatch or non-finite entries.
void validate_weights(const ModelConfig& cfg,
                      std::span<const BlockWeights> weights);

double softplus(double x);
double silu(double x);

enum class PrunedScan {
  Aligned,    // position-map kernel
  Condensed,  // survivors scanned as if adjacent
};

/// Multiply-accumulates of one block, counted where they are performed.
struct BlockWork {
  std::size_t tokens = 0;
  std::uint64_t projection_macs = 0;  // in/gate projections and delta/B/C
  std::uint64_t gating_macs = 0;      // y * silu(z) accumulated over paths
  std::uint64_t output_macs = 0;      // out projection
  OpCounters scan;
};

struct ForwardOptions {
  PrunedScan scan = PrunedScan::Aligned;
  unsigned threads = 1;
  /// When set, one entry per executed block is appended.
  std::vector<BlockWork>* work = nullptr;
};

struct BlockOutput {
  TokenTensor t_out;
  /// Ungated scan output per path, tokens in ascending original index order.
  std::vector<TokenTensor> y_dirs;
};

/// `t_prev` holds the currently kept tokens (ascending original index) and
/// `maps[b]` records their positions on the full grid, one map per batch item.
BlockOutput block_forward(const TokenTensor& t_prev, const BlockWeights& w,
                          std::span<const ScanPath> paths,
                          std::span<const PositionMap> maps,
                          const ForwardOptions& opts = {});

struct PruneStage {
  std::size_t after_layer = 0;
  /// Scores of the tokens alive before this stage.
  ImportanceScores scores;
  /// Survivors after this stage, over the full grid, one per batch item.
  std::vector<PositionMap> maps;
};

struct ForwardResult {
  TokenTensor features;
  std::vector<PositionMap> final_maps;
  std::vector<PruneStage> stages;
};

ForwardResult model_forward(const TokenTensor& x0, const ModelConfig& cfg,
                            std::span<const BlockWeights> weights,
                            const ForwardOptions& opts = {});

/// Deterministic standard-normal input for cfg (batch x grid x embed_dim).
TokenTensor make_input(const ModelConfig& cfg, std::uint64_t seed);

}  // namespace alignscan
