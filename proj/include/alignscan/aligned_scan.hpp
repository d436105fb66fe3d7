#pragma once

// Scan over a pruned token sequence that keeps every surviving token at its
// original sequential position. The kernel walks all original positions: a
// kept position takes a full step (discretize, inject input, read out), a
// pruned position only decays the hidden state, h <- a_bar * h, so the gap
// between two survivors q_i < q_{i+1} contributes a_bar^(q_{i+1} - q_i).
//
// a_bar at a pruned position is the one derived from the most recent kept
// token's timescale (the first kept token's for a leading pruned run, where
// the state is still zero anyway).

#include <span>

#include "alignscan/pruning.hpp"
#include "alignscan/ssm.hpp"
#include "alignscan/tensor.hpp"

namespace alignscan {

struct AlignedScanInput {
  /// Kept tokens only, in scan order (K tokens).
  const TokenTensor& x_remaining;
  /// One entry (LTI), K entries, or batch * K entries.
  std::span<const StepParams> params_remaining;
  /// Keep record over the N original scan positions.
  const PositionMap& map;
};

struct AlignedScanOptions : ScanOptions {
  /// Collapse each pruned run of length g into one multiply by a_bar^g
  /// (repeated squaring) instead of g single decays. Not combinable with
  /// keep_trace.
  bool gap_power_fast_path = false;
};

/// Output y has K tokens aligned with x_remaining. h_final is the state at
/// the last original position. With keep_trace, h_trace covers all N
/// original positions, pruned ones included.
ScanOutput scan_aligned(const StateSpace& ss, const AlignedScanInput& in,
                        const AlignedScanOptions& opts = {});

/// Baseline that relabels survivors 0..K-1 and scans them as if adjacent.
ScanOutput scan_condensed_naive(const StateSpace& ss,
                                const TokenTensor& x_remaining,
                                std::span<const StepParams> params_remaining,
                                const ScanOptions& opts = {});

/// Dense reference for scan_aligned: scan_recurrent over the full N-token
/// sequence with inputs zeroed at pruned positions and their timescale
/// replaced by the one scan_aligned would use. The returned y has N tokens;
/// gather_kept(y, map) is the ground truth for scan_aligned's output.
ScanOutput oracle_zeroed_scan(const StateSpace& ss, const TokenTensor& x_full,
                              std::span<const StepParams> params_full,
                              const PositionMap& map,
                              const ScanOptions& opts = {});

/// base^exponent by repeated squaring.
double power_by_squaring(double base, std::size_t exponent);

}  // namespace alignscan
