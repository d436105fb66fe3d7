#pragma once

// JSON forms of configs and results. Every to_json/from_json pair is a
// fixed point: parse(serialize(parse(text))) == parse(text).

#include <filesystem>
#include <json.hpp>
#include <string>

#include "alignscan/bench.hpp"
#include "alignscan/flops.hpp"
#include "alignscan/model.hpp"
#include "alignscan/pruning.hpp"

namespace alignscan {

using Json = nlohmann::json;

/// Environment variable that replaces the config's seed when set.
inline constexpr const char* kSeedEnvVar = "ALIGNED_SCAN_SEED";

Json config_to_json(const ModelConfig& cfg);
/// Throws ConfigError on unknown keys, wrong types or invalid values.
ModelConfig config_from_json(const Json& j);
ModelConfig load_config_file(const std::filesystem::path& path);
ModelConfig parse_config(const std::string& text);
/// Applies ALIGNED_SCAN_SEED if present; throws ConfigError if malformed.
void apply_seed_override(ModelConfig& cfg);

/// 16 hex digits of FNV-1a over the canonical config JSON.
std::string config_digest(const ModelConfig& cfg);

Json flops_to_json(const FlopsReport& r);
FlopsReport flops_from_json(const Json& j);

Json bench_to_json(const BenchResult& r);
BenchResult bench_from_json(const Json& j);
std::string bench_csv_header();
std::string bench_csv_row(const BenchResult& r);

/// Array of kept original indices.
Json map_to_json(const PositionMap& m);
PositionMap map_from_json(const Json& j, std::size_t original_len);

Json scores_to_json(const ImportanceScores& s);

Json prune_sim_to_json(const ModelConfig& cfg, const ForwardResult& r);

}  // namespace alignscan
