#include "alignscan/ssm.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <string>

#include "alignscan/error.hpp"
#include "scan_kernel.hpp"

namespace alignscan {

void StateSpace::validate() const {
  if (state_dim == 0 || channel_dim == 0) {
    throw StructuralError("StateSpace: dimensions must be >= 1");
  }
  if (a_diag.size() != state_dim * channel_dim) {
    throw StructuralError("StateSpace: a_diag has " +
                          std::to_string(a_diag.size()) + " entries, expected " +
                          std::to_string(state_dim * channel_dim));
  }
  for (double a : a_diag) {
    if (!(a < 0.0)) {
      throw DomainError("StateSpace: a_diag entries must be strictly negative");
    }
  }
}

void StepParams::validate(const StateSpace& ss) const {
  if (delta.size() != ss.channel_dim) {
    throw StructuralError("StepParams: delta has " +
                          std::to_string(delta.size()) + " entries, expected " +
                          std::to_string(ss.channel_dim));
  }
  const auto ok = [&](std::size_t n) {
    return n == ss.state_dim || n == ss.state_dim * ss.channel_dim;
  };
  if (!ok(b_in.size()) || !ok(c_out.size())) {
    throw StructuralError("StepParams: B/C length must be state_dim or "
                          "channel_dim * state_dim");
  }
  for (double d : delta) {
    if (!(d >= 0.0)) throw DomainError("StepParams: delta must be >= 0");
  }
}

OpCounters& OpCounters::operator+=(const OpCounters& o) {
  kept_steps += o.kept_steps;
  pruned_steps += o.pruned_steps;
  kept_macs += o.kept_macs;
  pruned_macs += o.pruned_macs;
  transcendentals += o.transcendentals;
  outputs_written += o.outputs_written;
  return *this;
}

DiscretizedParams discretize_zoh(const StateSpace& ss, const StepParams& p) {
  ss.validate();
  p.validate(ss);
  DiscretizedParams d{ss.channel_dim, ss.state_dim, {}, {}};
  d.a_bar.resize(ss.channel_dim * ss.state_dim);
  d.b_bar.resize(ss.channel_dim * ss.state_dim);
  for (std::size_t c = 0; c < ss.channel_dim; ++c) {
    for (std::size_t n = 0; n < ss.state_dim; ++n) {
      const auto z = zoh_element(p.delta[c], ss.a(c, n), p.b(c, n, ss.state_dim));
      d.a_bar[c * ss.state_dim + n] = z.a_bar;
      d.b_bar[c * ss.state_dim + n] = z.b_bar;
    }
  }
  return d;
}

ScanOutput scan_recurrent(const StateSpace& ss,
                          std::span<const StepParams> params,
                          const TokenTensor& x, const ScanOptions& opts) {
  ss.validate();
  if (x.channels() != ss.channel_dim) {
    throw StructuralError("scan_recurrent: input has " +
                          std::to_string(x.channels()) + " channels, expected " +
                          std::to_string(ss.channel_dim));
  }
  const std::size_t batch = x.batch();
  const std::size_t len = x.tokens();
  const std::size_t chans = ss.channel_dim;
  const std::size_t ns = ss.state_dim;
  const detail::ParamIndex index(ss, params, batch, len, "scan_recurrent");

  ScanOutput out;
  out.y = TokenTensor(batch, len, chans);
  out.h_final.assign(batch * chans * ns, 0.0);
  if (opts.keep_trace) {
    out.trace_positions = len;
    out.h_trace.assign(batch * len * chans * ns, 0.0);
  }

  const OpCounters work = detail::for_each_lane(
      batch, chans, opts.threads,
      [&](std::size_t b, std::size_t c, OpCounters& k) {
        double* h = out.h_final.data() + (b * chans + c) * ns;
        std::vector<double> a_bar(ns);
        const auto a_row = ss.a_row(c);
        for (std::size_t t = 0; t < len; ++t) {
          out.y.at(b, t, c) = detail::kept_step(index.at(b, t), a_row, c, ns,
                                                x.at(b, t, c), h, a_bar.data());
          detail::count_kept(k, ns);
          if (opts.keep_trace) {
            std::copy(h, h + ns,
                      out.h_trace.begin() + ((b * len + t) * chans + c) * ns);
          }
        }
      });
  if (opts.counters) *opts.counters += work;
  return out;
}

std::vector<double> convolution_kernel(const StateSpace& ss,
                                       const StepParams& p,
                                       std::size_t length) {
  if (ss.mode != SsmMode::LTI) {
    throw UnsupportedModeError(
        "convolution_kernel: convolution form needs time-invariant parameters");
  }
  const DiscretizedParams d = discretize_zoh(ss, p);
  const std::size_t ns = ss.state_dim;
  std::vector<double> kernel(ss.channel_dim * length, 0.0);
  std::vector<double> power(ns);
  for (std::size_t c = 0; c < ss.channel_dim; ++c) {
    // power[n] tracks a_bar^k * b_bar for the current lag k.
    for (std::size_t n = 0; n < ns; ++n) power[n] = d.b_bar[c * ns + n];
    for (std::size_t k = 0; k < length; ++k) {
      double value = 0.0;
      for (std::size_t n = 0; n < ns; ++n) {
        value += p.c(c, n, ns) * power[n];
        power[n] *= d.a_bar[c * ns + n];
      }
      kernel[c * length + k] = value;
    }
  }
  return kernel;
}

ScanOutput scan_convolution(const StateSpace& ss, const StepParams& p,
                            const TokenTensor& x) {
  ss.validate();
  if (ss.mode != SsmMode::LTI) {
    throw UnsupportedModeError(
        "scan_convolution: convolution form needs time-invariant parameters");
  }
  if (x.channels() != ss.channel_dim) {
    throw StructuralError("scan_convolution: channel mismatch");
  }
  const std::size_t len = x.tokens();
  const std::vector<double> kernel = convolution_kernel(ss, p, len);
  ScanOutput out;
  out.y = TokenTensor(x.batch(), len, ss.channel_dim);
  for (std::size_t b = 0; b < x.batch(); ++b) {
    for (std::size_t c = 0; c < ss.channel_dim; ++c) {
      for (std::size_t t = 0; t < len; ++t) {
        double acc = 0.0;
        for (std::size_t s = 0; s <= t; ++s) {
          acc += kernel[c * len + (t - s)] * x.at(b, s, c);
        }
        out.y.at(b, t, c) = acc;
      }
    }
  }

  // Final state in closed form: h_{L-1} = sum_s a_bar^{L-1-s} b_bar x_s.
  const DiscretizedParams d = discretize_zoh(ss, p);
  const std::size_t ns = ss.state_dim;
  out.h_final.assign(x.batch() * ss.channel_dim * ns, 0.0);
  for (std::size_t b = 0; b < x.batch(); ++b) {
    for (std::size_t c = 0; c < ss.channel_dim; ++c) {
      for (std::size_t n = 0; n < ns; ++n) {
        double h = 0.0;
        double weight = d.b_bar[c * ns + n];
        for (std::size_t s = len; s-- > 0;) {
          h += weight * x.at(b, s, c);
          weight *= d.a_bar[c * ns + n];
        }
        out.h_final[(b * ss.channel_dim + c) * ns + n] = h;
      }
    }
  }
  return out;
}

DenseDiscretized discretize_zoh_dense(const DenseLtiSystem& sys) {
  const auto dim = static_cast<Eigen::Index>(sys.state_dim);
  if (dim == 0 || sys.a.size() != sys.state_dim * sys.state_dim ||
      sys.b.size() != sys.state_dim || sys.c.size() != sys.state_dim) {
    throw StructuralError("discretize_zoh_dense: inconsistent dimensions");
  }
  if (!(sys.delta >= 0.0)) {
    throw DomainError("discretize_zoh_dense: delta must be >= 0");
  }
  using RowMat =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMat> a(sys.a.data(), dim, dim);
  const Eigen::Map<const Eigen::VectorXd> b(sys.b.data(), dim);

  const RowMat da = sys.delta * a;
  const RowMat a_bar = da.exp();
  Eigen::VectorXd b_bar;
  if (sys.delta == 0.0) {
    b_bar = Eigen::VectorXd::Zero(dim);
  } else {
    const Eigen::FullPivLU<RowMat> lu(da);
    if (!lu.isInvertible()) {
      throw DomainError("discretize_zoh_dense: delta * A is singular");
    }
    b_bar = lu.solve((a_bar - RowMat::Identity(dim, dim)) * (sys.delta * b));
  }
  DenseDiscretized out;
  out.a_bar.assign(a_bar.data(), a_bar.data() + dim * dim);
  out.b_bar.assign(b_bar.data(), b_bar.data() + dim);
  return out;
}

std::vector<double> scan_dense_lti(const DenseLtiSystem& sys,
                                   std::span<const double> x) {
  const DenseDiscretized d = discretize_zoh_dense(sys);
  const std::size_t ns = sys.state_dim;
  std::vector<double> h(ns, 0.0);
  std::vector<double> next(ns);
  std::vector<double> y(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    for (std::size_t i = 0; i < ns; ++i) {
      double acc = d.b_bar[i] * x[t];
      for (std::size_t j = 0; j < ns; ++j) acc += d.a_bar[i * ns + j] * h[j];
      next[i] = acc;
    }
    h.swap(next);
    double out = 0.0;
    for (std::size_t i = 0; i < ns; ++i) out += sys.c[i] * h[i];
    y[t] = out;
  }
  return y;
}

}  // namespace alignscan
