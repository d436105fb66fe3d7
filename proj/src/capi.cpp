#include "alignscan.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include "alignscan/aligned_scan.hpp"
#include "alignscan/error.hpp"
#include "alignscan/flops.hpp"
#include "alignscan/serialize.hpp"
#include "alignscan/tensor_io.hpp"
#include "alignscan/verify.hpp"

struct as_config {
  alignscan::ModelConfig cfg;
};

struct as_model {
  alignscan::ModelConfig cfg;
  std::vector<alignscan::BlockWeights> weights;
  unsigned threads = 1;
};

struct as_bench_result {
  alignscan::BenchResult result;
};

namespace {

thread_local std::string g_last_error;

as_status fail(as_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <class Fn>
as_status guarded(Fn&& fn) {
  try {
    fn();
    return AS_OK;
  } catch (const alignscan::StructuralError& e) {
    return fail(AS_ERR_STRUCTURAL, e.what());
  } catch (const alignscan::DomainError& e) {
    return fail(AS_ERR_DOMAIN, e.what());
  } catch (const alignscan::UnsupportedModeError& e) {
    return fail(AS_ERR_UNSUPPORTED, e.what());
  } catch (const alignscan::ConfigError& e) {
    return fail(AS_ERR_CONFIG, e.what());
  } catch (const alignscan::IoError& e) {
    return fail(AS_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(AS_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(AS_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(AS_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

#define AS_REQUIRE(cond)                                               \
  do {                                                                 \
    if (!(cond)) return fail(AS_ERR_INVALID_ARGUMENT, #cond " failed"); \
  } while (0)

}  // namespace

extern "C" {

const char* as_version(void) { return "0.1.0"; }

const char* as_status_name(as_status status) {
  switch (status) {
    case AS_OK: return "ok";
    case AS_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case AS_ERR_STRUCTURAL: return "structural";
    case AS_ERR_DOMAIN: return "domain";
    case AS_ERR_UNSUPPORTED: return "unsupported";
    case AS_ERR_CONFIG: return "config";
    case AS_ERR_IO: return "io";
    case AS_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* as_last_error(void) { return g_last_error.c_str(); }

void as_string_free(char* s) { std::free(s); }

as_status as_config_from_file(const char* path, as_config** out) {
  AS_REQUIRE(path != nullptr && out != nullptr);
  *out = nullptr;
  return guarded([&] { *out = new as_config{alignscan::load_config_file(path)}; });
}

as_status as_config_from_json(const char* json, as_config** out) {
  AS_REQUIRE(json != nullptr && out != nullptr);
  *out = nullptr;
  return guarded([&] { *out = new as_config{alignscan::parse_config(json)}; });
}

void as_config_free(as_config* cfg) { delete cfg; }

as_status as_config_apply_env(as_config* cfg) {
  AS_REQUIRE(cfg != nullptr);
  return guarded([&] { alignscan::apply_seed_override(cfg->cfg); });
}

as_status as_config_set_keep_rate(as_config* cfg, double keep_rate) {
  AS_REQUIRE(cfg != nullptr);
  return guarded([&] {
    alignscan::ModelConfig next = cfg->cfg;
    next.prune.keep_rate = keep_rate;
    next.validate();
    cfg->cfg = next;
  });
}

as_status as_config_to_json(const as_config* cfg, char** out) {
  AS_REQUIRE(cfg != nullptr && out != nullptr);
  return guarded(
      [&] { *out = dup_string(alignscan::config_to_json(cfg->cfg).dump(2)); });
}

as_status as_flops_json(const as_config* cfg, char** out) {
  AS_REQUIRE(cfg != nullptr && out != nullptr);
  return guarded([&] {
    *out = dup_string(
        alignscan::flops_to_json(alignscan::count_flops(cfg->cfg)).dump(2));
  });
}

as_status as_bench_run(const as_config* cfg, const char* mode, int repeats,
                       int warmup, unsigned threads, as_bench_result** out) {
  AS_REQUIRE(cfg != nullptr && mode != nullptr && out != nullptr);
  *out = nullptr;
  return guarded([&] {
    const alignscan::BenchMode m = alignscan::parse_bench_mode(mode);
    *out = new as_bench_result{
        alignscan::run_benchmark(cfg->cfg, m, repeats, warmup, threads)};
  });
}

void as_bench_result_free(as_bench_result* r) { delete r; }

double as_bench_result_speedup(const as_bench_result* r) {
  return r != nullptr ? r->result.speedup : 0.0;
}

as_status as_bench_result_json(const as_bench_result* r, char** out) {
  AS_REQUIRE(r != nullptr && out != nullptr);
  return guarded(
      [&] { *out = dup_string(alignscan::bench_to_json(r->result).dump(2)); });
}

const char* as_bench_csv_header(void) {
  static const std::string header = alignscan::bench_csv_header();
  return header.c_str();
}

as_status as_bench_result_csv_row(const as_bench_result* r, char** out) {
  AS_REQUIRE(r != nullptr && out != nullptr);
  return guarded([&] { *out = dup_string(alignscan::bench_csv_row(r->result)); });
}

as_status as_model_create(const as_config* cfg, const char* weights_dir,
                          as_model** out) {
  AS_REQUIRE(cfg != nullptr && out != nullptr);
  *out = nullptr;
  return guarded([&] {
    auto model = std::make_unique<as_model>();
    model->cfg = cfg->cfg;
    model->weights = weights_dir != nullptr
                         ? alignscan::load_weights(weights_dir, cfg->cfg)
                         : alignscan::init_weights(cfg->cfg);
    *out = model.release();
  });
}

void as_model_free(as_model* model) { delete model; }

as_status as_model_set_threads(as_model* model, unsigned threads) {
  AS_REQUIRE(model != nullptr && threads >= 1);
  model->threads = threads;
  return AS_OK;
}

as_status as_model_save_weights(const as_model* model, const char* dir) {
  AS_REQUIRE(model != nullptr && dir != nullptr);
  return guarded([&] { alignscan::save_weights(dir, model->weights); });
}

as_status as_model_forward(as_model* model, const double* input, size_t batch,
                           size_t tokens, size_t embed_dim, double* features,
                           size_t features_capacity, size_t* out_tokens) {
  AS_REQUIRE(model != nullptr && input != nullptr && features != nullptr &&
             out_tokens != nullptr);
  return guarded([&] {
    alignscan::TokenTensor x(
        batch, tokens, embed_dim,
        std::vector<double>(input, input + batch * tokens * embed_dim));
    alignscan::ModelConfig cfg = model->cfg;
    cfg.batch = batch;
    alignscan::ForwardOptions opts;
    opts.threads = model->threads;
    const alignscan::ForwardResult r =
        alignscan::model_forward(x, cfg, model->weights, opts);
    if (r.features.size() > features_capacity) {
      throw alignscan::StructuralError(
          "as_model_forward: features buffer holds " +
          std::to_string(features_capacity) + " values, need " +
          std::to_string(r.features.size()));
    }
    std::copy(r.features.values().begin(), r.features.values().end(), features);
    *out_tokens = r.features.tokens();
  });
}

as_status as_model_prune_sim_json(as_model* model, const char* input_path,
                                  const char* dump_path, char** out) {
  AS_REQUIRE(model != nullptr && out != nullptr);
  return guarded([&] {
    alignscan::ModelConfig cfg = model->cfg;
    alignscan::TokenTensor x;
    if (input_path != nullptr) {
      x = alignscan::load_token_tensor(input_path);
      cfg.batch = x.batch();
    } else {
      x = alignscan::make_input(cfg, cfg.seed + 1);
    }
    alignscan::ForwardOptions opts;
    opts.threads = model->threads;
    const alignscan::ForwardResult r =
        alignscan::model_forward(x, cfg, model->weights, opts);
    if (dump_path != nullptr) {
      alignscan::save_token_tensor(dump_path, "features", r.features);
    }
    *out = dup_string(alignscan::prune_sim_to_json(cfg, r).dump(2));
  });
}

as_status as_scan_aligned(size_t positions, const unsigned char* keep_mask,
                          size_t channels, size_t state_dim,
                          const double* a_diag, const double* delta,
                          const double* b, const double* c, const double* x,
                          double* y) {
  AS_REQUIRE(keep_mask != nullptr && a_diag != nullptr && delta != nullptr &&
             b != nullptr && c != nullptr && x != nullptr && y != nullptr);
  return guarded([&] {
    std::vector<bool> mask(positions);
    for (size_t i = 0; i < positions; ++i) mask[i] = keep_mask[i] != 0;
    const alignscan::PositionMap map = alignscan::PositionMap::from_mask(mask);
    const size_t kept = map.kept_count();

    alignscan::StateSpace ss;
    ss.state_dim = state_dim;
    ss.channel_dim = channels;
    ss.mode = alignscan::SsmMode::Selective;
    ss.a_diag.assign(a_diag, a_diag + channels * state_dim);

    std::vector<alignscan::StepParams> params(kept);
    for (size_t j = 0; j < kept; ++j) {
      params[j].delta.assign(delta + j * channels, delta + (j + 1) * channels);
      params[j].b_in.assign(b + j * state_dim, b + (j + 1) * state_dim);
      params[j].c_out.assign(c + j * state_dim, c + (j + 1) * state_dim);
    }
    const alignscan::TokenTensor xs(1, kept, channels,
                                    std::vector<double>(x, x + kept * channels));
    const alignscan::ScanOutput r = alignscan::scan_aligned(ss, {xs, params, map});
    std::copy(r.y.values().begin(), r.y.values().end(), y);
  });
}

as_status as_verify(uint64_t seed, unsigned threads, int* passed, char** report) {
  AS_REQUIRE(passed != nullptr && threads >= 1);
  return guarded([&] {
    const alignscan::VerifyReport r = alignscan::run_verification(seed, threads);
    *passed = r.passed() ? 1 : 0;
    if (report != nullptr) *report = dup_string(r.summary());
  });
}

}  // extern "C"
