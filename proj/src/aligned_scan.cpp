#include "alignscan/aligned_scan.hpp"

#include <algorithm>
#include <bit>
#include <string>
#include <vector>

#include "alignscan/error.hpp"
#include "scan_kernel.hpp"

namespace alignscan {

namespace {

std::uint64_t squaring_multiplies(std::size_t exponent) {
  if (exponent == 0) return 0;
  // bit_width - 1 squarings plus one multiply per set bit.
  return static_cast<std::uint64_t>(std::bit_width(exponent) - 1 +
                                    std::popcount(exponent));
}

}  // namespace

double power_by_squaring(double base, std::size_t exponent) {
  double result = 1.0;
  while (exponent != 0) {
    if (exponent & 1U) result *= base;
    base *= base;
    exponent >>= 1U;
  }
  return result;
}

ScanOutput scan_aligned(const StateSpace& ss, const AlignedScanInput& in,
                        const AlignedScanOptions& opts) {
  ss.validate();
  const PositionMap& map = in.map;
  const TokenTensor& x = in.x_remaining;
  const std::size_t kept = map.kept_count();
  if (kept == 0) {
    throw DomainError("scan_aligned: position map keeps no tokens");
  }
  if (x.tokens() != kept) {
    throw StructuralError("scan_aligned: " + std::to_string(x.tokens()) +
                          " remaining tokens but the map keeps " +
                          std::to_string(kept));
  }
  if (x.channels() != ss.channel_dim) {
    throw StructuralError("scan_aligned: channel mismatch");
  }
  if (opts.gap_power_fast_path && opts.keep_trace) {
    throw UnsupportedModeError(
        "scan_aligned: keep_trace is not available with the gap fast path");
  }
  const std::size_t batch = x.batch();
  const std::size_t chans = ss.channel_dim;
  const std::size_t ns = ss.state_dim;
  const std::size_t positions = map.original_len();
  const detail::ParamIndex index(ss, in.params_remaining, batch, kept,
                                 "scan_aligned");
  const auto& keep = map.keep();

  ScanOutput out;
  out.y = TokenTensor(batch, kept, chans);
  out.h_final.assign(batch * chans * ns, 0.0);
  if (opts.keep_trace) {
    out.trace_positions = positions;
    out.h_trace.assign(batch * positions * chans * ns, 0.0);
  }

  const OpCounters work = detail::for_each_lane(
      batch, chans, opts.threads,
      [&](std::size_t b, std::size_t c, OpCounters& k) {
        double* h = out.h_final.data() + (b * chans + c) * ns;
        const auto a_row = ss.a_row(c);
        std::vector<double> a_bar(ns);
        const StepParams& first = index.at(b, 0);
        for (std::size_t n = 0; n < ns; ++n) {
          a_bar[n] = zoh_element(first.delta[c], a_row[n], 0.0).a_bar;
        }

        std::size_t j = 0;
        if (!opts.gap_power_fast_path) {
          for (std::size_t i = 0; i < positions; ++i) {
            if (keep[i]) {
              out.y.at(b, j, c) = detail::kept_step(
                  index.at(b, j), a_row, c, ns, x.at(b, j, c), h, a_bar.data());
              detail::count_kept(k, ns);
              ++j;
            } else {
              detail::pruned_step(h, a_bar.data(), ns);
              detail::count_pruned(k, ns);
            }
            if (opts.keep_trace) {
              std::copy(h, h + ns,
                        out.h_trace.begin() +
                            ((b * positions + i) * chans + c) * ns);
            }
          }
          return;
        }

        std::size_t gap = 0;
        const auto flush_gap = [&] {
          if (gap == 0) return;
          for (std::size_t n = 0; n < ns; ++n) {
            h[n] *= power_by_squaring(a_bar[n], gap);
          }
          k.pruned_steps += gap;
          k.pruned_macs += ns * (squaring_multiplies(gap) + 1);
          gap = 0;
        };
        for (std::size_t i = 0; i < positions; ++i) {
          if (!keep[i]) {
            ++gap;
            continue;
          }
          flush_gap();
          out.y.at(b, j, c) = detail::kept_step(index.at(b, j), a_row, c, ns,
                                                x.at(b, j, c), h, a_bar.data());
          detail::count_kept(k, ns);
          ++j;
        }
        flush_gap();
      });
  if (opts.counters) *opts.counters += work;
  return out;
}

ScanOutput scan_condensed_naive(const StateSpace& ss,
                                const TokenTensor& x_remaining,
                                std::span<const StepParams> params_remaining,
                                const ScanOptions& opts) {
  return scan_recurrent(ss, params_remaining, x_remaining, opts);
}

ScanOutput oracle_zeroed_scan(const StateSpace& ss, const TokenTensor& x_full,
                              std::span<const StepParams> params_full,
                              const PositionMap& map, const ScanOptions& opts) {
  const std::size_t positions = map.original_len();
  if (x_full.tokens() != positions) {
    throw StructuralError("oracle_zeroed_scan: input has " +
                          std::to_string(x_full.tokens()) +
                          " tokens, map covers " + std::to_string(positions));
  }
  if (map.kept_count() == 0) {
    throw DomainError("oracle_zeroed_scan: position map keeps no tokens");
  }

  TokenTensor x = x_full;
  for (std::size_t b = 0; b < x.batch(); ++b) {
    for (std::size_t i = 0; i < positions; ++i) {
      if (!map.kept(i)) {
        auto tok = x.token(b, i);
        std::fill(tok.begin(), tok.end(), 0.0);
      }
    }
  }

  if (params_full.size() == 1) {
    return scan_recurrent(ss, params_full, x, opts);
  }

  // Pruned positions take the step parameters of the kept position whose
  // a_bar the aligned kernel would reuse.
  std::vector<std::size_t> source(positions);
  const std::size_t first_kept = map.remaining_indices().front();
  std::size_t last_kept = first_kept;
  for (std::size_t i = 0; i < positions; ++i) {
    if (map.kept(i)) last_kept = i;
    source[i] = map.kept(i) ? i : last_kept;
  }
  const std::size_t rows = params_full.size() / positions;
  if (rows * positions != params_full.size()) {
    throw StructuralError("oracle_zeroed_scan: parameter count mismatch");
  }
  std::vector<StepParams> params(params_full.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < positions; ++i) {
      params[r * positions + i] = params_full[r * positions + source[i]];
    }
  }
  return scan_recurrent(ss, params, x, opts);
}

}  // namespace alignscan
