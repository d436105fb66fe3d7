#include "alignscan/serialize.hpp"

#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "alignscan/error.hpp"

namespace alignscan {

namespace {

void reject_unknown_keys(const Json& j, const std::set<std::string>& allowed,
                         const char* where) {
  if (!j.is_object()) {
    throw ConfigError(std::string(where) + " must be a JSON object");
  }
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

template <class T>
T read(const Json& j, const char* key, T fallback, bool required = false) {
  if (!j.contains(key)) {
    if (required) throw ConfigError(std::string("missing key '") + key + "'");
    return fallback;
  }
  try {
    if constexpr (std::is_unsigned_v<T>) {
      if (!j.at(key).is_number_unsigned()) {
        throw ConfigError(std::string("key '") + key +
                          "' must be a non-negative integer");
      }
    }
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("key '") + key + "': " + e.what());
  }
}

std::string_view path_set_name(PathSet p) {
  return p == PathSet::Vim ? "vim" : "snake";
}

PathSet parse_path_set(const std::string& s) {
  if (s == "vim") return PathSet::Vim;
  if (s == "snake") return PathSet::Snake;
  throw ConfigError("unknown paths '" + s + "' (expected vim or snake)");
}

Json layer_to_json(const LayerFlops& l) {
  return Json{{"layer", l.layer},
              {"tokens", l.tokens},
              {"projections", l.projections},
              {"scan_kept", l.scan_kept},
              {"scan_pruned", l.scan_pruned},
              {"gating", l.gating},
              {"output_projection", l.output_projection},
              {"macs", l.total()},
              {"flops", 2 * l.total()}};
}

LayerFlops layer_from_json(const Json& j) {
  LayerFlops l;
  l.layer = j.at("layer").get<std::size_t>();
  l.tokens = j.at("tokens").get<std::size_t>();
  l.projections = j.at("projections").get<std::uint64_t>();
  l.scan_kept = j.at("scan_kept").get<std::uint64_t>();
  l.scan_pruned = j.at("scan_pruned").get<std::uint64_t>();
  l.gating = j.at("gating").get<std::uint64_t>();
  l.output_projection = j.at("output_projection").get<std::uint64_t>();
  return l;
}

Json totals_to_json(const FlopsTotals& t) {
  return Json{{"projections", t.projections},
              {"scan_kept", t.scan_kept},
              {"scan_pruned", t.scan_pruned},
              {"gating", t.gating},
              {"output_projection", t.output_projection},
              {"macs", t.macs},
              {"flops", t.flops()}};
}

}  // namespace

Json config_to_json(const ModelConfig& cfg) {
  return Json{
      {"depth", cfg.depth},
      {"embed_dim", cfg.embed_dim},
      {"inner_dim", cfg.inner_dim},
      {"state_dim", cfg.state_dim},
      {"grid", {{"height", cfg.grid.height}, {"width", cfg.grid.width}}},
      {"prune",
       {{"keep_rate", cfg.prune.keep_rate},
        {"prune_after_layers", cfg.prune.prune_after_layers},
        {"metric", std::string(to_string(cfg.prune.metric))}}},
      {"seed", cfg.seed},
      {"paths", std::string(path_set_name(cfg.paths))},
      {"batch", cfg.batch},
  };
}

ModelConfig config_from_json(const Json& j) {
  reject_unknown_keys(j,
                      {"depth", "embed_dim", "inner_dim", "state_dim", "grid",
                       "prune", "seed", "paths", "batch"},
                      "config");
  ModelConfig cfg;
  cfg.depth = read<std::size_t>(j, "depth", 0, true);
  cfg.embed_dim = read<std::size_t>(j, "embed_dim", 0, true);
  cfg.inner_dim = read<std::size_t>(j, "inner_dim", 0, true);
  cfg.state_dim = read<std::size_t>(j, "state_dim", 0, true);
  if (!j.contains("grid")) throw ConfigError("missing key 'grid'");
  const Json& grid = j.at("grid");
  reject_unknown_keys(grid, {"height", "width"}, "grid");
  cfg.grid.height = read<std::size_t>(grid, "height", 0, true);
  cfg.grid.width = read<std::size_t>(grid, "width", 0, true);
  if (j.contains("prune")) {
    const Json& p = j.at("prune");
    reject_unknown_keys(p, {"keep_rate", "prune_after_layers", "metric"},
                        "prune");
    cfg.prune.keep_rate = read<double>(p, "keep_rate", cfg.prune.keep_rate);
    cfg.prune.prune_after_layers = read<std::vector<std::size_t>>(
        p, "prune_after_layers", {});
    cfg.prune.metric = parse_metric(
        read<std::string>(p, "metric", std::string(to_string(cfg.prune.metric))));
  }
  cfg.seed = read<std::uint64_t>(j, "seed", 0);
  cfg.paths = parse_path_set(read<std::string>(j, "paths", "vim"));
  cfg.batch = read<std::size_t>(j, "batch", 1);
  cfg.validate();
  return cfg;
}

ModelConfig parse_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

ModelConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void apply_seed_override(ModelConfig& cfg) {
  const char* env = std::getenv(kSeedEnvVar);
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (errno != 0 || end == env || *end != '\0' || env[0] == '-') {
    throw ConfigError(std::string(kSeedEnvVar) + " must be a non-negative integer");
  }
  cfg.seed = v;
}

std::string config_digest(const ModelConfig& cfg) {
  const std::string canonical = config_to_json(cfg).dump();
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char ch : canonical) {
    hash ^= ch;
    hash *= 1099511628211ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[hash & 0xFU];
    hash >>= 4U;
  }
  return out;
}

Json flops_to_json(const FlopsReport& r) {
  Json dense_layers = Json::array();
  Json pruned_layers = Json::array();
  for (const auto& l : r.dense_layers) dense_layers.push_back(layer_to_json(l));
  for (const auto& l : r.pruned_layers) pruned_layers.push_back(layer_to_json(l));
  return Json{{"convention", "macs = multiply-accumulates; flops = 2 * macs"},
              {"dense", totals_to_json(r.dense)},
              {"pruned", totals_to_json(r.pruned)},
              {"reduction_percent", r.reduction_percent},
              {"dense_scan_share", r.dense_scan_share},
              {"dense_layers", dense_layers},
              {"pruned_layers", pruned_layers}};
}

FlopsReport flops_from_json(const Json& j) {
  FlopsReport r;
  try {
    for (const auto& l : j.at("dense_layers")) r.dense_layers.push_back(layer_from_json(l));
    for (const auto& l : j.at("pruned_layers")) r.pruned_layers.push_back(layer_from_json(l));
    r.dense = sum_layers(r.dense_layers);
    r.pruned = sum_layers(r.pruned_layers);
    r.reduction_percent = j.at("reduction_percent").get<double>();
    r.dense_scan_share = j.at("dense_scan_share").get<double>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed FLOPs report: ") + e.what());
  }
  if (j.at("dense").at("macs").get<std::uint64_t>() != r.dense.macs ||
      j.at("pruned").at("macs").get<std::uint64_t>() != r.pruned.macs) {
    throw ConfigError("malformed FLOPs report: totals disagree with layers");
  }
  return r;
}

Json bench_to_json(const BenchResult& r) {
  return Json{{"config_digest", r.config_digest},
              {"mode", std::string(to_string(r.mode))},
              {"repeats", r.repeats},
              {"warmup", r.warmup},
              {"threads", r.threads},
              {"median_ms", r.median_ms},
              {"min_ms", r.min_ms},
              {"max_ms", r.max_ms},
              {"tokens_per_sec", r.tokens_per_sec},
              {"baseline_median_ms", r.baseline_median_ms},
              {"speedup", r.speedup},
              {"timer_resolution_ok", r.timer_resolution_ok},
              {"work_deterministic", r.work_deterministic}};
}

BenchResult bench_from_json(const Json& j) {
  BenchResult r;
  try {
    r.config_digest = j.at("config_digest").get<std::string>();
    r.mode = parse_bench_mode(j.at("mode").get<std::string>());
    r.repeats = j.at("repeats").get<int>();
    r.warmup = j.at("warmup").get<int>();
    r.threads = j.at("threads").get<unsigned>();
    r.median_ms = j.at("median_ms").get<double>();
    r.min_ms = j.at("min_ms").get<double>();
    r.max_ms = j.at("max_ms").get<double>();
    r.tokens_per_sec = j.at("tokens_per_sec").get<double>();
    r.baseline_median_ms = j.at("baseline_median_ms").get<double>();
    r.speedup = j.at("speedup").get<double>();
    r.timer_resolution_ok = j.at("timer_resolution_ok").get<bool>();
    r.work_deterministic = j.at("work_deterministic").get<bool>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed bench result: ") + e.what());
  }
  return r;
}

std::string bench_csv_header() { return "config_digest,mode,median_ms,speedup"; }

std::string bench_csv_row(const BenchResult& r) {
  std::ostringstream out;
  out.precision(17);
  out << r.config_digest << ',' << to_string(r.mode) << ',' << r.median_ms << ','
      << r.speedup;
  return out.str();
}

Json map_to_json(const PositionMap& m) { return Json(m.remaining_indices()); }

PositionMap map_from_json(const Json& j, std::size_t original_len) {
  try {
    return PositionMap::from_indices(original_len,
                                     j.get<std::vector<std::size_t>>());
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("position map must be an index array: ") +
                      e.what());
  }
}

Json scores_to_json(const ImportanceScores& s) {
  Json rows = Json::array();
  for (std::size_t b = 0; b < s.batch; ++b) {
    auto row = s.row(b);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return Json{{"metric", std::string(to_string(s.metric))}, {"scores", rows}};
}

Json prune_sim_to_json(const ModelConfig& cfg, const ForwardResult& r) {
  Json stages = Json::array();
  std::size_t before = cfg.grid.size();
  for (const auto& stage : r.stages) {
    Json maps = Json::array();
    for (const auto& m : stage.maps) maps.push_back(map_to_json(m));
    const std::size_t after =
        stage.maps.empty() ? before : stage.maps.front().kept_count();
    stages.push_back(Json{{"after_layer", stage.after_layer},
                          {"tokens_before", before},
                          {"tokens_after", after},
                          {"maps", maps},
                          {"scores", scores_to_json(stage.scores)}});
    before = after;
  }
  Json final_maps = Json::array();
  for (const auto& m : r.final_maps) final_maps.push_back(map_to_json(m));
  return Json{{"config_digest", config_digest(cfg)},
              {"grid", {{"height", cfg.grid.height}, {"width", cfg.grid.width}}},
              {"original_tokens", cfg.grid.size()},
              {"final_tokens", r.features.tokens()},
              {"stages", stages},
              {"final_maps", final_maps}};
}

}  // namespace alignscan
