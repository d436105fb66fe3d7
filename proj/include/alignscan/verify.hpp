#pragma once

// Randomized equivalence suites for the scan kernels. Used by the `verify`
// subcommand and shared with the test suites for instance generation.

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "alignscan/pruning.hpp"
#include "alignscan/ssm.hpp"
#include "alignscan/tensor.hpp"

namespace alignscan {

struct InstanceLimits {
  std::size_t max_tokens = 64;
  std::size_t max_state = 8;
  std::size_t max_channels = 8;
  std::size_t max_batch = 2;
  double max_prune_fraction = 0.9;
  /// Force at least one pruned position strictly between two kept ones.
  bool interior_prune = false;
  /// Force an all-keep map.
  bool no_prune = false;
};

/// A full-length problem and its pruned counterpart.
struct ScanInstance {
  StateSpace ss;
  TokenTensor x_full;
  std::vector<StepParams> params_full;  // 1 (LTI) or N
  PositionMap map;
  TokenTensor x_remaining;
  std::vector<StepParams> params_remaining;  // 1 (LTI) or K
};

ScanInstance random_instance(std::mt19937_64& rng, SsmMode mode,
                             const InstanceLimits& limits = {});

/// max |a - b| / max(max |b|, 1e-300).
double relative_error(const TokenTensor& a, const TokenTensor& b);

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::size_t instances = 0;
  double worst = 0.0;  // suite-specific error measure
  std::string detail;
};

struct VerifyReport {
  std::vector<SuiteResult> suites;

  bool passed() const;
  /// One "PASS name ..." / "FAIL name ..." line per suite.
  std::string summary() const;
};

VerifyReport run_verification(std::uint64_t seed = 20240611,
                              unsigned threads = 1);

}  // namespace alignscan
