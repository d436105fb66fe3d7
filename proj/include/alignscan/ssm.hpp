#pragma once

// Discretized state space layer: zero-order-hold discretization and the two
// reference evaluations of the discrete system (sequential recurrence and, for
// time-invariant parameters, the equivalent causal convolution).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "alignscan/tensor.hpp"

namespace alignscan {

enum class SsmMode { LTI, Selective };

/// Diagonal evolution matrix, one diagonal of length state_dim per channel.
struct StateSpace {
  std::size_t state_dim = 0;
  std::size_t channel_dim = 0;
  std::vector<double> a_diag;  // channel_dim x state_dim, all < 0
  SsmMode mode = SsmMode::Selective;

  double a(std::size_t channel, std::size_t n) const {
    return a_diag[channel * state_dim + n];
  }
  std::span<const double> a_row(std::size_t channel) const {
    return {a_diag.data() + channel * state_dim, state_dim};
  }

  /// Throws StructuralError on bad dims and DomainError on a >= 0.
  void validate() const;
};

/// Per-step discretization inputs.
///
/// `b_in` and `c_out` are either shared by all channels (state_dim values,
/// the usual selective-scan layout) or given per channel
/// (channel_dim x state_dim values).
struct StepParams {
  std::vector<double> delta;  // channel_dim, >= 0
  std::vector<double> b_in;
  std::vector<double> c_out;

  double b(std::size_t channel, std::size_t n, std::size_t state_dim) const {
    return b_in.size() == state_dim ? b_in[n] : b_in[channel * state_dim + n];
  }
  double c(std::size_t channel, std::size_t n, std::size_t state_dim) const {
    return c_out.size() == state_dim ? c_out[n]
                                     : c_out[channel * state_dim + n];
  }

  void validate(const StateSpace& ss) const;
};

struct DiscretizedParams {
  std::size_t channel_dim = 0;
  std::size_t state_dim = 0;
  std::vector<double> a_bar;  // channel_dim x state_dim
  std::vector<double> b_bar;  // channel_dim x state_dim
};

/// Work performed by a scan, summed over all (batch, channel) lanes.
///
/// One kept step costs, per state element, one multiply-accumulate each for
/// the B scaling, the state decay, the input injection and the C readout,
/// plus two transcendentals (exp and expm1). A pruned step costs exactly
/// one multiply per state element.
struct OpCounters {
  std::uint64_t kept_steps = 0;
  std::uint64_t pruned_steps = 0;
  std::uint64_t kept_macs = 0;
  std::uint64_t pruned_macs = 0;
  std::uint64_t transcendentals = 0;
  std::uint64_t outputs_written = 0;

  OpCounters& operator+=(const OpCounters& o);
  friend bool operator==(const OpCounters&, const OpCounters&) = default;
};

inline constexpr std::uint64_t kKeptMacsPerState = 4;
inline constexpr std::uint64_t kKeptTranscendentalsPerState = 2;
inline constexpr std::uint64_t kPrunedMacsPerState = 1;

struct ScanOutput {
  TokenTensor y;
  std::vector<double> h_final;  // batch x channel x state
  std::vector<double> h_trace;  // batch x position x channel x state, opt-in
  std::size_t trace_positions = 0;

  double trace(std::size_t b, std::size_t pos, std::size_t c, std::size_t n,
               std::size_t channels, std::size_t state_dim) const {
    return h_trace[((b * trace_positions + pos) * channels + c) * state_dim +
                   n];
  }
};

struct ScanOptions {
  bool keep_trace = false;
  /// Lanes are split across this many threads; results are bitwise
  /// identical to the single-threaded run.
  unsigned threads = 1;
  OpCounters* counters = nullptr;
};

/// Zero-order hold for a single diagonal element.
struct ZohElement {
  double a_bar;
  double b_bar;
};

/// Below this |delta * a| the series limit b_bar = delta * b is used.
inline constexpr double kZohSeriesThreshold = 1e-8;

inline ZohElement zoh_element(double delta, double a, double b) {
  const double x = delta * a;
  const double a_bar = std::exp(x);
  if (std::abs(x) < kZohSeriesThreshold) {
    return {a_bar, delta * b};
  }
  return {a_bar, std::expm1(x) / x * delta * b};
}

DiscretizedParams discretize_zoh(const StateSpace& ss, const StepParams& p);

/// Sequential evaluation of h_t = a_bar*h_{t-1} + b_bar*x_t, y_t = C h_t with
/// h_{-1} = 0, independently for every (batch, channel) lane.
///
/// `params` holds one entry (LTI broadcast), one per token (shared across the
/// batch) or batch*tokens entries (batch-major).
ScanOutput scan_recurrent(const StateSpace& ss,
                          std::span<const StepParams> params,
                          const TokenTensor& x, const ScanOptions& opts = {});

/// Per-channel causal kernel (C b_bar, C a_bar b_bar, ...), channel x length.
std::vector<double> convolution_kernel(const StateSpace& ss,
                                       const StepParams& p,
                                       std::size_t length);

/// y = x * K evaluated as an explicit causal convolution. LTI only.
ScanOutput scan_convolution(const StateSpace& ss, const StepParams& p,
                            const TokenTensor& x);

/// Small single-channel LTI system with a dense state matrix, used to check
/// the diagonal parameterization against the general ZOH formula.
struct DenseLtiSystem {
  std::size_t state_dim = 0;
  std::vector<double> a;  // state_dim x state_dim row-major
  std::vector<double> b;  // state_dim
  std::vector<double> c;  // state_dim
  double delta = 0.0;
};

struct DenseDiscretized {
  std::vector<double> a_bar;  // state_dim x state_dim row-major
  std::vector<double> b_bar;  // state_dim
};

DenseDiscretized discretize_zoh_dense(const DenseLtiSystem& sys);
std::vector<double> scan_dense_lti(const DenseLtiSystem& sys,
                                   std::span<const double> x);

}  // namespace alignscan
