#pragma once

// Shared inner loops for the dense, aligned and condensed scans. Every scan
// goes through kept_step so that identical inputs take an identical
// floating-point path.

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "alignscan/error.hpp"
#include "alignscan/ssm.hpp"

namespace alignscan::detail {

/// Resolves StepParams for (batch item, step) from the three accepted
/// layouts: a single broadcast entry, one per step, or batch * steps.
class ParamIndex {
 public:
  ParamIndex(const StateSpace& ss, std::span<const StepParams> params,
             std::size_t batch, std::size_t steps, const char* who)
      : params_(params), steps_(steps) {
    if (params.empty()) {
      throw StructuralError(std::string(who) + ": no step parameters");
    }
    if (ss.mode == SsmMode::LTI) {
      if (params.size() != 1) {
        throw StructuralError(std::string(who) +
                              ": LTI mode takes exactly one StepParams");
      }
    } else if (params.size() == steps) {
      per_batch_ = false;
    } else if (params.size() == batch * steps && batch > 1) {
      per_batch_ = true;
    } else {
      throw StructuralError(std::string(who) + ": " +
                            std::to_string(params.size()) +
                            " step parameters for " + std::to_string(steps) +
                            " steps");
    }
    for (const auto& p : params) p.validate(ss);
  }

  const StepParams& at(std::size_t b, std::size_t step) const {
    if (params_.size() == 1) return params_[0];
    return per_batch_ ? params_[b * steps_ + step] : params_[step];
  }

 private:
  std::span<const StepParams> params_;
  std::size_t steps_;
  bool per_batch_ = false;
};

/// Full-cost step: discretize, update the state, read out y.
inline double kept_step(const StepParams& p, std::span<const double> a_row,
                        std::size_t c, std::size_t state_dim, double x,
                        double* h, double* a_bar_cache) {
  double y = 0.0;
  for (std::size_t n = 0; n < state_dim; ++n) {
    const ZohElement z = zoh_element(p.delta[c], a_row[n], p.b(c, n, state_dim));
    a_bar_cache[n] = z.a_bar;
    h[n] = z.a_bar * h[n] + z.b_bar * x;
    y += p.c(c, n, state_dim) * h[n];
  }
  return y;
}

/// Pruned position: state decay only.
inline void pruned_step(double* h, const double* a_bar_cache,
                        std::size_t state_dim) {
  for (std::size_t n = 0; n < state_dim; ++n) h[n] *= a_bar_cache[n];
}

inline void count_kept(OpCounters& k, std::size_t state_dim) {
  k.kept_steps += 1;
  k.kept_macs += kKeptMacsPerState * state_dim;
  k.transcendentals += kKeptTranscendentalsPerState * state_dim;
  k.outputs_written += 1;
}

inline void count_pruned(OpCounters& k, std::size_t state_dim) {
  k.pruned_steps += 1;
  k.pruned_macs += kPrunedMacsPerState * state_dim;
}

/// Runs fn(b, c, counters) for every lane, optionally on several threads.
/// Lanes write disjoint outputs, so the split does not change results.
template <class LaneFn>
OpCounters for_each_lane(std::size_t batch, std::size_t channels,
                         unsigned threads, LaneFn&& fn) {
  const std::size_t lanes = batch * channels;
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(threads, lanes));
  std::vector<OpCounters> partial(workers);
  auto run_range = [&](std::size_t w) {
    const std::size_t begin = lanes * w / workers;
    const std::size_t end = lanes * (w + 1) / workers;
    for (std::size_t lane = begin; lane < end; ++lane) {
      fn(lane / channels, lane % channels, partial[w]);
    }
  };
  if (workers == 1) {
    run_range(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run_range, w);
  }
  OpCounters total;
  for (const auto& p : partial) total += p;
  return total;
}

}  // namespace alignscan::detail
