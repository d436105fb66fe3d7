#include "alignscan/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "alignscan/aligned_scan.hpp"

namespace alignscan {

namespace {

std::size_t uniform_size(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

bool has_interior_gap(const PositionMap& m) {
  const auto& idx = m.remaining_indices();
  for (std::size_t i = 1; i < idx.size(); ++i) {
    if (idx[i] - idx[i - 1] > 1) return true;
  }
  return false;
}

PositionMap random_map(std::mt19937_64& rng, std::size_t n,
                       const InstanceLimits& limits) {
  if (limits.no_prune) return PositionMap::all_keep(n);
  std::uniform_real_distribution<double> frac(0.0, limits.max_prune_fraction);
  for (;;) {
    const auto pruned =
        static_cast<std::size_t>(std::floor(frac(rng) * static_cast<double>(n)));
    const std::size_t kept = std::max<std::size_t>(1, n - pruned);
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(kept);
    std::sort(all.begin(), all.end());
    PositionMap m = PositionMap::from_indices(n, std::move(all));
    if (!limits.interior_prune || has_interior_gap(m)) return m;
  }
}

StepParams random_step(std::mt19937_64& rng, std::size_t chans, std::size_t ns,
                       bool per_channel_bc) {
  std::uniform_real_distribution<double> delta(0.01, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  StepParams p;
  p.delta.resize(chans);
  for (double& d : p.delta) d = delta(rng);
  const std::size_t bc = per_channel_bc ? chans * ns : ns;
  p.b_in.resize(bc);
  p.c_out.resize(bc);
  for (double& v : p.b_in) v = normal(rng);
  for (double& v : p.c_out) v = normal(rng);
  return p;
}

SuiteResult suite_oracle(std::mt19937_64& rng, unsigned threads) {
  SuiteResult r{"oracle_equivalence", true, 0, 0.0, {}};
  for (SsmMode mode : {SsmMode::LTI, SsmMode::Selective}) {
    for (int i = 0; i < 100; ++i) {
      const ScanInstance inst = random_instance(rng, mode);
      AlignedScanOptions opts;
      opts.threads = threads;
      const ScanOutput aligned =
          scan_aligned(inst.ss, {inst.x_remaining, inst.params_remaining, inst.map}, opts);
      const ScanOutput oracle =
          oracle_zeroed_scan(inst.ss, inst.x_full, inst.params_full, inst.map);
      r.worst = std::max(r.worst,
                         max_abs_diff(aligned.y, gather_kept(oracle.y, inst.map)));
      ++r.instances;
    }
  }
  r.passed = r.worst <= 1e-12;
  r.detail = "max |aligned - oracle| at kept positions";
  return r;
}

SuiteResult suite_no_prune(std::mt19937_64& rng, unsigned threads) {
  SuiteResult r{"no_prune_identity", true, 0, 0.0, {}};
  InstanceLimits limits;
  limits.no_prune = true;
  for (int i = 0; i < 50; ++i) {
    const SsmMode mode = i % 2 == 0 ? SsmMode::Selective : SsmMode::LTI;
    const ScanInstance inst = random_instance(rng, mode, limits);
    AlignedScanOptions opts;
    opts.threads = threads;
    const ScanOutput aligned =
        scan_aligned(inst.ss, {inst.x_remaining, inst.params_remaining, inst.map}, opts);
    ScanOptions dense_opts;
    dense_opts.threads = threads;
    const ScanOutput dense =
        scan_recurrent(inst.ss, inst.params_full, inst.x_full, dense_opts);
    if (!(aligned.y == dense.y) || aligned.h_final != dense.h_final) {
      r.passed = false;
      r.worst = std::max(r.worst, max_abs_diff(aligned.y, dense.y));
    }
    ++r.instances;
  }
  r.detail = "bitwise equality with the dense recurrence";
  return r;
}

SuiteResult suite_convolution(std::mt19937_64& rng) {
  SuiteResult r{"lti_convolution", true, 0, 0.0, {}};
  InstanceLimits limits;
  limits.max_tokens = 32;
  limits.no_prune = true;
  for (int i = 0; i < 100; ++i) {
    const ScanInstance inst = random_instance(rng, SsmMode::LTI, limits);
    const ScanOutput rec = scan_recurrent(inst.ss, inst.params_full, inst.x_full);
    const ScanOutput conv =
        scan_convolution(inst.ss, inst.params_full.front(), inst.x_full);
    r.worst = std::max(r.worst, relative_error(conv.y, rec.y));
    ++r.instances;
  }
  r.passed = r.worst <= 1e-10;
  r.detail = "relative error convolution vs recurrence";
  return r;
}

SuiteResult suite_divergence(std::mt19937_64& rng) {
  SuiteResult r{"condensed_divergence", true, 0, 0.0, {}};
  InstanceLimits limits;
  limits.interior_prune = true;
  std::size_t diverged = 0;
  double aligned_worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const SsmMode mode = i % 2 == 0 ? SsmMode::Selective : SsmMode::LTI;
    const ScanInstance inst = random_instance(rng, mode, limits);
    const TokenTensor truth = gather_kept(
        oracle_zeroed_scan(inst.ss, inst.x_full, inst.params_full, inst.map).y,
        inst.map);
    const ScanOutput condensed =
        scan_condensed_naive(inst.ss, inst.x_remaining, inst.params_remaining);
    const ScanOutput aligned =
        scan_aligned(inst.ss, {inst.x_remaining, inst.params_remaining, inst.map});
    if (max_abs_diff(condensed.y, truth) > 1e-6) ++diverged;
    aligned_worst = std::max(aligned_worst, max_abs_diff(aligned.y, truth));
    ++r.instances;
  }
  const double rate = static_cast<double>(diverged) / static_cast<double>(r.instances);
  r.worst = aligned_worst;
  r.passed = rate >= 0.99 && aligned_worst <= 1e-12;
  std::ostringstream d;
  d << "condensed diverged in " << diverged << "/" << r.instances
    << ", max |aligned - oracle|";
  r.detail = d.str();
  return r;
}

SuiteResult suite_gap_power(std::mt19937_64& rng) {
  SuiteResult r{"gap_power_identity", true, 0, 0.0, {}};
  for (int i = 0; i < 100; ++i) {
    const ScanInstance inst = random_instance(rng, SsmMode::LTI);
    const StateSpace& ss = inst.ss;
    const std::size_t ns = ss.state_dim;
    const std::size_t chans = ss.channel_dim;
    AlignedScanOptions traced;
    traced.keep_trace = true;
    const ScanOutput loop =
        scan_aligned(ss, {inst.x_remaining, inst.params_remaining, inst.map}, traced);
    const DiscretizedParams d = discretize_zoh(ss, inst.params_full.front());
    const auto& q = inst.map.remaining_indices();
    for (std::size_t b = 0; b < inst.x_full.batch(); ++b) {
      for (std::size_t j = 1; j < q.size(); ++j) {
        const auto gap = static_cast<double>(q[j] - q[j - 1]);
        for (std::size_t c = 0; c < chans; ++c) {
          for (std::size_t n = 0; n < ns; ++n) {
            const double expect =
                std::pow(d.a_bar[c * ns + n], gap) *
                    loop.trace(b, q[j - 1], c, n, chans, ns) +
                d.b_bar[c * ns + n] * inst.x_remaining.at(b, j, c);
            r.worst = std::max(
                r.worst, std::abs(loop.trace(b, q[j], c, n, chans, ns) - expect));
          }
        }
      }
    }
    AlignedScanOptions fast;
    fast.gap_power_fast_path = true;
    const ScanOutput collapsed =
        scan_aligned(ss, {inst.x_remaining, inst.params_remaining, inst.map}, fast);
    r.worst = std::max(r.worst, max_abs_diff(collapsed.y, loop.y));
    for (std::size_t k = 0; k < loop.h_final.size(); ++k) {
      r.worst = std::max(r.worst, std::abs(collapsed.h_final[k] - loop.h_final[k]));
    }
    ++r.instances;
  }
  r.passed = r.worst <= 1e-12;
  r.detail = "max error of a_bar^gap identity and fast path";
  return r;
}

}  // namespace

ScanInstance random_instance(std::mt19937_64& rng, SsmMode mode,
                             const InstanceLimits& limits) {
  ScanInstance inst;
  const std::size_t min_tokens = limits.interior_prune ? 3 : 1;
  const std::size_t n = uniform_size(rng, min_tokens, limits.max_tokens);
  const std::size_t chans = uniform_size(rng, 1, limits.max_channels);
  const std::size_t ns = uniform_size(rng, 1, limits.max_state);
  const std::size_t batch = uniform_size(rng, 1, limits.max_batch);

  inst.ss.state_dim = ns;
  inst.ss.channel_dim = chans;
  inst.ss.mode = mode;
  inst.ss.a_diag.resize(chans * ns);
  std::uniform_real_distribution<double> a_dist(0.1, 2.0);
  for (double& a : inst.ss.a_diag) a = -a_dist(rng);

  const bool per_channel_bc = std::bernoulli_distribution(0.5)(rng);
  const std::size_t steps = mode == SsmMode::LTI ? 1 : n;
  for (std::size_t t = 0; t < steps; ++t) {
    inst.params_full.push_back(random_step(rng, chans, ns, per_channel_bc));
  }

  inst.x_full = TokenTensor(batch, n, chans);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : inst.x_full.values()) v = normal(rng);

  inst.map = random_map(rng, n, limits);
  inst.x_remaining = gather_kept(inst.x_full, inst.map);
  if (mode == SsmMode::LTI) {
    inst.params_remaining = inst.params_full;
  } else {
    for (std::size_t q : inst.map.remaining_indices()) {
      inst.params_remaining.push_back(inst.params_full[q]);
    }
  }
  return inst;
}

double relative_error(const TokenTensor& a, const TokenTensor& b) {
  double scale = 0.0;
  for (double v : b.values()) scale = std::max(scale, std::abs(v));
  return max_abs_diff(a, b) / std::max(scale, 1e-300);
}

bool VerifyReport::passed() const {
  return std::all_of(suites.begin(), suites.end(),
                     [](const SuiteResult& s) { return s.passed; });
}

std::string VerifyReport::summary() const {
  std::ostringstream out;
  for (const auto& s : suites) {
    out << (s.passed ? "PASS " : "FAIL ") << s.name << " instances=" << s.instances
        << " " << s.detail << " = " << s.worst << '\n';
  }
  out << (passed() ? "verify: all suites passed" : "verify: FAILED") << '\n';
  return out.str();
}

VerifyReport run_verification(std::uint64_t seed, unsigned threads) {
  std::mt19937_64 rng(seed);
  VerifyReport report;
  report.suites.push_back(suite_oracle(rng, threads));
  report.suites.push_back(suite_no_prune(rng, threads));
  report.suites.push_back(suite_convolution(rng));
  report.suites.push_back(suite_divergence(rng));
  report.suites.push_back(suite_gap_power(rng));
  return report;
}

}  // namespace alignscan
