#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "alignscan/error.hpp"
#include "alignscan/serialize.hpp"
#include "alignscan/tensor_io.hpp"

using namespace alignscan;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const char* name) {
  const fs::path dir = fs::temp_directory_path() / "alignscan_test_io" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kToy = R"({
  "depth": 2, "embed_dim": 8, "inner_dim": 16, "state_dim": 4,
  "grid": {"height": 4, "width": 4},
  "prune": {"keep_rate": 0.5, "prune_after_layers": [1], "metric": "l2"},
  "seed": 9
})";

}  // namespace

TEST_CASE("config parse and defaults") {
  const ModelConfig cfg = parse_config(kToy);
  CHECK(cfg.depth == 2);
  CHECK(cfg.grid.size() == 16);
  CHECK(cfg.prune.metric == ImportanceMetric::L2Norm);
  CHECK(cfg.prune.prune_after_layers == std::vector<std::size_t>{1});
  CHECK(cfg.paths == PathSet::Vim);
  CHECK(cfg.batch == 1);
  CHECK(cfg.seed == 9);
}

TEST_CASE("config json is a fixed point") {
  const ModelConfig cfg = parse_config(kToy);
  const Json j = config_to_json(cfg);
  CHECK(config_to_json(config_from_json(j)) == j);
  CHECK(config_to_json(config_from_json(config_to_json(vim_s_surrogate()))) ==
        config_to_json(vim_s_surrogate()));
}

TEST_CASE("bad configs are rejected") {
  CHECK_THROWS_AS(parse_config("{"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"depth": 2})"), ConfigError);
  Json j = Json::parse(kToy);
  j["colour"] = "blue";
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = Json::parse(kToy);
  j["prune"]["keep_rat"] = 0.5;
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = Json::parse(kToy);
  j["depth"] = -1;
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = Json::parse(kToy);
  j["prune"]["keep_rate"] = 1.5;
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = Json::parse(kToy);
  j["prune"]["prune_after_layers"] = {3};
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = Json::parse(kToy);
  j["paths"] = "zigzag";
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  CHECK_THROWS_AS(load_config_file("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("seed override from the environment") {
  ModelConfig cfg = parse_config(kToy);
  ::setenv(kSeedEnvVar, "1234", 1);
  apply_seed_override(cfg);
  CHECK(cfg.seed == 1234);
  ::setenv(kSeedEnvVar, "12x", 1);
  CHECK_THROWS_AS(apply_seed_override(cfg), ConfigError);
  ::unsetenv(kSeedEnvVar);
  apply_seed_override(cfg);
  CHECK(cfg.seed == 1234);
}

TEST_CASE("config digest") {
  ModelConfig cfg = parse_config(kToy);
  const std::string d = config_digest(cfg);
  CHECK(d.size() == 16);
  CHECK(d == config_digest(parse_config(kToy)));
  cfg.prune.keep_rate = 0.6;
  CHECK(d != config_digest(cfg));
}

TEST_CASE("tensor round trip in both dtypes") {
  const fs::path dir = scratch("tensor");
  const RawTensor t{"probe", {2, 3}, {1.0, -2.5, 3.25, 0.0, 1e-3, 7.0}};
  save_tensor(dir / "a.bin", t);
  const RawTensor back = load_tensor(dir / "a.bin");
  CHECK(back.name == "probe");
  CHECK(back.shape == t.shape);
  CHECK(back.values == t.values);
  CHECK(fs::file_size(dir / "a.bin") == 6 * 8);

  save_tensor(dir / "b.bin", t, "float32");
  const RawTensor narrow = load_tensor(dir / "b.bin");
  CHECK(fs::file_size(dir / "b.bin") == 6 * 4);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(narrow.values[i] == static_cast<double>(static_cast<float>(t.values[i])));
  }

  const Json meta = Json::parse(std::ifstream(dir / "a.json"));
  CHECK(meta.at("dtype") == "float64");
  CHECK(meta.at("shape") == Json::array({2, 3}));
}

TEST_CASE("token tensors load from rank 2 and rank 3") {
  const fs::path dir = scratch("tokens");
  TokenTensor x(2, 3, 4);
  for (std::size_t i = 0; i < x.size(); ++i) x.values()[i] = 0.5 * i;
  save_token_tensor(dir / "x.bin", "x", x);
  CHECK(load_token_tensor(dir / "x.bin") == x);

  save_tensor(dir / "m.bin", {"m", {3, 2}, {1, 2, 3, 4, 5, 6}});
  const TokenTensor m = load_token_tensor(dir / "m.bin");
  CHECK(m.batch() == 1);
  CHECK(m.tokens() == 3);
  CHECK(m.at(0, 2, 1) == 6.0);

  save_tensor(dir / "v.bin", {"v", {6}, {1, 2, 3, 4, 5, 6}});
  CHECK_THROWS_AS(load_token_tensor(dir / "v.bin"), StructuralError);
}

TEST_CASE("tensor io errors") {
  const fs::path dir = scratch("errors");
  CHECK_THROWS_AS(load_tensor(dir / "missing.bin"), IoError);
  save_tensor(dir / "t.bin", {"t", {4}, {1, 2, 3, 4}});
  fs::resize_file(dir / "t.bin", 3 * 8);
  CHECK_THROWS_AS(load_tensor(dir / "t.bin"), IoError);
  std::ofstream(dir / "t.json") << "not json";
  CHECK_THROWS_AS(load_tensor(dir / "t.bin"), IoError);
  CHECK_THROWS_AS(save_tensor(dir / "u.bin", {"u", {4}, {1, 2, 3, 4}}, "int8"), IoError);
  CHECK_THROWS_AS(save_tensor(dir / "u.bin", {"u", {5}, {1, 2, 3, 4}}), StructuralError);
}

TEST_CASE("weights round trip reproduces the forward pass") {
  const fs::path dir = scratch("weights");
  ModelConfig cfg = parse_config(kToy);
  cfg.paths = PathSet::Snake;
  const auto w = init_weights(cfg);
  save_weights(dir, w);
  CHECK(fs::exists(dir / "block1.in_proj.bin"));
  CHECK(fs::exists(dir / "block0.dir3.a_diag.json"));
  const auto back = load_weights(dir, cfg);
  const TokenTensor x = make_input(cfg, 2);
  CHECK(model_forward(x, cfg, w).features == model_forward(x, cfg, back).features);

  ModelConfig wider = cfg;
  wider.inner_dim = 17;
  CHECK_THROWS_AS(load_weights(dir, wider), StructuralError);
}

TEST_CASE("position maps and prune simulation json") {
  const auto m = PositionMap::from_indices(6, {1, 4});
  CHECK(map_to_json(m) == Json::array({1, 4}));
  CHECK(map_from_json(map_to_json(m), 6) == m);
  CHECK_THROWS_AS(map_from_json(Json::array({4, 1}), 6), StructuralError);
  CHECK_THROWS_AS(map_from_json(Json("x"), 6), ConfigError);

  const ModelConfig cfg = parse_config(kToy);
  const auto r = model_forward(make_input(cfg, 0), cfg, init_weights(cfg));
  const Json j = prune_sim_to_json(cfg, r);
  REQUIRE(j.at("stages").size() == 1);
  const Json& s = j.at("stages")[0];
  CHECK(s.at("after_layer") == 1);
  CHECK(s.at("tokens_before") == 16);
  CHECK(s.at("tokens_after") == 8);
  CHECK(s.at("maps")[0].size() == 8);
  CHECK(j.at("final_tokens") == 8);
}
