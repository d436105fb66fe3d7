// Command-line front end. Talks to the library only through the C API.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "alignscan.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitConfigError = 2;

struct ConfigDeleter {
  void operator()(as_config* c) const { as_config_free(c); }
};
struct ModelDeleter {
  void operator()(as_model* m) const { as_model_free(m); }
};
struct BenchDeleter {
  void operator()(as_bench_result* r) const { as_bench_result_free(r); }
};
struct StringDeleter {
  void operator()(char* s) const { as_string_free(s); }
};
using ConfigPtr = std::unique_ptr<as_config, ConfigDeleter>;
using ModelPtr = std::unique_ptr<as_model, ModelDeleter>;
using BenchPtr = std::unique_ptr<as_bench_result, BenchDeleter>;
using StringPtr = std::unique_ptr<char, StringDeleter>;

class CliError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void check(as_status status, const std::string& what) {
  if (status != AS_OK) {
    throw CliError(what + ": " + as_status_name(status) + ": " + as_last_error());
  }
}

ConfigPtr load_config(const std::string& path,
                      std::optional<double> keep_rate) {
  as_config* raw = nullptr;
  check(as_config_from_file(path.c_str(), &raw), "config '" + path + "'");
  ConfigPtr cfg(raw);
  check(as_config_apply_env(cfg.get()), "seed override");
  if (keep_rate) {
    check(as_config_set_keep_rate(cfg.get(), *keep_rate), "--keep-rate");
  }
  return cfg;
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text << '\n';
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw CliError("cannot write '" + out_path + "'");
  out << text << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Token pruning with position-aligned selective scans"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::optional<double> keep_rate;
  unsigned threads = 1;

  auto* verify = app.add_subcommand("verify", "Run the kernel equivalence suites");
  std::uint64_t verify_seed = 20240611;
  verify->add_option("--seed", verify_seed, "Instance generator seed");
  verify->add_option("--threads", threads, "Lane threads")->check(CLI::PositiveNumber);

  auto* flops = app.add_subcommand("flops", "Emit the multiply-accumulate report");
  flops->add_option("--config", config_path, "Model config JSON")->required();
  flops->add_option("--keep-rate", keep_rate, "Override the per-stage keep rate");
  flops->add_option("--out", out_path, "Write JSON here instead of stdout");

  auto* bench = app.add_subcommand("bench", "Time forward passes against dense");
  std::string mode = "aligned";
  int repeats = 5;
  int warmup = 2;
  std::string csv_path;
  bench->add_option("--config", config_path, "Model config JSON")->required();
  bench->add_option("--mode", mode, "dense, aligned or condensed")
      ->check(CLI::IsMember({"dense", "aligned", "condensed"}));
  bench->add_option("--repeats", repeats, "Timed repeats (>= 5)");
  bench->add_option("--warmup", warmup, "Untimed warmup runs (>= 2)");
  bench->add_option("--threads", threads, "Lane threads")->check(CLI::PositiveNumber);
  bench->add_option("--keep-rate", keep_rate, "Override the per-stage keep rate");
  bench->add_option("--csv", csv_path, "Append a CSV row to this file");
  bench->add_option("--out", out_path, "Write JSON here instead of stdout");

  auto* sim = app.add_subcommand("prune-sim", "Emit per-stage position maps and scores");
  std::string input_path;
  std::string weights_dir;
  std::string dump_path;
  std::string save_weights_dir;
  sim->add_option("--config", config_path, "Model config JSON")->required();
  sim->add_option("--input", input_path, "Input tokens (.bin with .json sidecar)");
  sim->add_option("--weights", weights_dir, "Directory of weight tensors");
  sim->add_option("--save-weights", save_weights_dir, "Write the weights used here");
  sim->add_option("--dump", dump_path, "Write final features (.bin + .json)");
  sim->add_option("--keep-rate", keep_rate, "Override the per-stage keep rate");
  sim->add_option("--threads", threads, "Lane threads")->check(CLI::PositiveNumber);
  sim->add_option("--out", out_path, "Write JSON here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfigError;
  }

  try {
    if (verify->parsed()) {
      int passed = 0;
      char* report = nullptr;
      check(as_verify(verify_seed, threads, &passed, &report), "verify");
      StringPtr owned(report);
      std::cout << report;
      return passed ? kExitOk : kExitVerifyFailed;
    }

    ConfigPtr cfg = load_config(config_path, keep_rate);

    if (flops->parsed()) {
      char* json = nullptr;
      check(as_flops_json(cfg.get(), &json), "flops");
      StringPtr owned(json);
      emit(json, out_path);
      return kExitOk;
    }

    if (bench->parsed()) {
      as_bench_result* raw = nullptr;
      check(as_bench_run(cfg.get(), mode.c_str(), repeats, warmup, threads, &raw),
            "bench");
      BenchPtr result(raw);
      char* json = nullptr;
      check(as_bench_result_json(result.get(), &json), "bench");
      StringPtr owned(json);
      emit(json, out_path);
      if (!csv_path.empty()) {
        const bool fresh = !std::ifstream(csv_path).good();
        std::ofstream csv(csv_path, std::ios::app);
        if (!csv) throw CliError("cannot write '" + csv_path + "'");
        char* row = nullptr;
        check(as_bench_result_csv_row(result.get(), &row), "bench");
        StringPtr owned_row(row);
        if (fresh) csv << as_bench_csv_header() << '\n';
        csv << row << '\n';
      }
      return kExitOk;
    }

    if (sim->parsed()) {
      as_model* raw = nullptr;
      check(as_model_create(cfg.get(),
                            weights_dir.empty() ? nullptr : weights_dir.c_str(), &raw),
            "model");
      ModelPtr model(raw);
      check(as_model_set_threads(model.get(), threads), "--threads");
      if (!save_weights_dir.empty()) {
        check(as_model_save_weights(model.get(), save_weights_dir.c_str()),
              "save weights");
      }
      char* json = nullptr;
      check(as_model_prune_sim_json(model.get(),
                                    input_path.empty() ? nullptr : input_path.c_str(),
                                    dump_path.empty() ? nullptr : dump_path.c_str(),
                                    &json),
            "prune-sim");
      StringPtr owned(json);
      emit(json, out_path);
      return kExitOk;
    }
  } catch (const CliError& e) {
    std::cerr << "alignscan: " << e.what() << '\n';
    return kExitConfigError;
  }
  return kExitOk;
}
