#include "alignscan/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>

#include "alignscan/error.hpp"
#include "alignscan/serialize.hpp"

namespace alignscan {

namespace fs = std::filesystem;

namespace {

template <class U>
U to_little_endian(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    U out = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      out = static_cast<U>((out << 8U) | ((v >> (8U * i)) & 0xFFU));
    }
    return out;
  } else {
    return v;
  }
}

fs::path sidecar(const fs::path& bin_path) {
  fs::path p = bin_path;
  return p.replace_extension(".json");
}

std::size_t element_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return n;
}

RawTensor from_matrix(std::string name, const Matrix& m) {
  return {std::move(name),
          {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
          std::vector<double>(m.data(), m.data() + m.size())};
}

RawTensor from_vector(std::string name, std::span<const double> v) {
  return {std::move(name), {v.size()}, std::vector<double>(v.begin(), v.end())};
}

Matrix to_matrix(const RawTensor& t, std::size_t rows, std::size_t cols) {
  if (t.shape != std::vector<std::size_t>{rows, cols}) {
    throw StructuralError("weights: " + t.name + " has the wrong shape");
  }
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::copy(t.values.begin(), t.values.end(), m.data());
  return m;
}

std::vector<double> to_vector(const RawTensor& t, std::size_t n) {
  if (t.values.size() != n) {
    throw StructuralError("weights: " + t.name + " has the wrong size");
  }
  return t.values;
}

}  // namespace

void save_tensor(const fs::path& bin_path, const RawTensor& t,
                 const std::string& dtype) {
  if (element_count(t.shape) != t.values.size()) {
    throw StructuralError("save_tensor: shape does not match value count");
  }
  if (dtype != "float64" && dtype != "float32") {
    throw IoError("save_tensor: unsupported dtype '" + dtype + "'");
  }
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw IoError("cannot write '" + bin_path.string() + "'");
  for (double v : t.values) {
    if (dtype == "float64") {
      const auto bits = to_little_endian(std::bit_cast<std::uint64_t>(v));
      bin.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    } else {
      const auto bits =
          to_little_endian(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      bin.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
  std::ofstream meta(sidecar(bin_path));
  if (!bin || !meta) throw IoError("cannot write '" + bin_path.string() + "'");
  meta << Json{{"name", t.name}, {"shape", t.shape}, {"dtype", dtype}}.dump(2)
       << '\n';
}

RawTensor load_tensor(const fs::path& bin_path) {
  std::ifstream meta_in(sidecar(bin_path));
  if (!meta_in) {
    throw IoError("missing sidecar '" + sidecar(bin_path).string() + "'");
  }
  RawTensor t;
  std::string dtype;
  try {
    const Json meta = Json::parse(meta_in);
    t.name = meta.at("name").get<std::string>();
    t.shape = meta.at("shape").get<std::vector<std::size_t>>();
    dtype = meta.at("dtype").get<std::string>();
  } catch (const Json::exception& e) {
    throw IoError("bad sidecar for '" + bin_path.string() + "': " + e.what());
  }
  const std::size_t width = dtype == "float64"   ? 8
                            : dtype == "float32" ? 4
                                                 : 0;
  if (width == 0) throw IoError("unsupported dtype '" + dtype + "'");

  const std::size_t count = element_count(t.shape);
  std::ifstream bin(bin_path, std::ios::binary | std::ios::ate);
  if (!bin) throw IoError("cannot read '" + bin_path.string() + "'");
  const auto bytes = static_cast<std::size_t>(bin.tellg());
  if (bytes != count * width) {
    throw IoError("'" + bin_path.string() + "' holds " + std::to_string(bytes) +
                  " bytes, sidecar implies " + std::to_string(count * width));
  }
  bin.seekg(0);
  t.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (width == 8) {
      std::uint64_t bits = 0;
      bin.read(reinterpret_cast<char*>(&bits), sizeof bits);
      t.values[i] = std::bit_cast<double>(to_little_endian(bits));
    } else {
      std::uint32_t bits = 0;
      bin.read(reinterpret_cast<char*>(&bits), sizeof bits);
      t.values[i] = std::bit_cast<float>(to_little_endian(bits));
    }
  }
  if (!bin) throw IoError("short read on '" + bin_path.string() + "'");
  return t;
}

void save_token_tensor(const fs::path& bin_path, const std::string& name,
                       const TokenTensor& x) {
  auto v = x.values();
  save_tensor(bin_path, {name, {x.batch(), x.tokens(), x.channels()},
                         std::vector<double>(v.begin(), v.end())});
}

TokenTensor load_token_tensor(const fs::path& bin_path) {
  RawTensor t = load_tensor(bin_path);
  if (t.shape.size() == 2) {
    return TokenTensor(1, t.shape[0], t.shape[1], std::move(t.values));
  }
  if (t.shape.size() == 3) {
    return TokenTensor(t.shape[0], t.shape[1], t.shape[2], std::move(t.values));
  }
  throw StructuralError("'" + bin_path.string() +
                        "' must be rank 2 or 3 to hold tokens");
}

void save_weights(const fs::path& dir, std::span<const BlockWeights> weights) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const BlockWeights& w = weights[i];
    const std::string base = "block" + std::to_string(i);
    const auto put = [&](const RawTensor& t) { save_tensor(dir / (t.name + ".bin"), t); };
    put(from_matrix(base + ".in_proj", w.in_proj));
    put(from_matrix(base + ".gate_proj", w.gate_proj));
    put(from_matrix(base + ".out_proj", w.out_proj));
    for (std::size_t m = 0; m < w.directions.size(); ++m) {
      const DirectionWeights& d = w.directions[m];
      const std::string dbase = base + ".dir" + std::to_string(m);
      put({dbase + ".a_diag",
           {d.ssm.channel_dim, d.ssm.state_dim},
           d.ssm.a_diag});
      put(from_vector(dbase + ".delta_proj",
                      {d.delta_proj.data(), static_cast<std::size_t>(d.delta_proj.size())}));
      put(from_vector(dbase + ".delta_bias",
                      {d.delta_bias.data(), static_cast<std::size_t>(d.delta_bias.size())}));
      put(from_matrix(dbase + ".b_proj", d.b_proj));
      put(from_matrix(dbase + ".c_proj", d.c_proj));
    }
  }
}

std::vector<BlockWeights> load_weights(const fs::path& dir,
                                       const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.embed_dim;
  const std::size_t di = cfg.inner_dim;
  const std::size_t ns = cfg.state_dim;
  const auto get = [&](const std::string& name) {
    return load_tensor(dir / (name + ".bin"));
  };
  std::vector<BlockWeights> blocks(cfg.depth);
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    BlockWeights& w = blocks[i];
    const std::string base = "block" + std::to_string(i);
    w.in_proj = to_matrix(get(base + ".in_proj"), d, di);
    w.gate_proj = to_matrix(get(base + ".gate_proj"), d, di);
    w.out_proj = to_matrix(get(base + ".out_proj"), di, d);
    w.directions.resize(cfg.directions());
    for (std::size_t m = 0; m < w.directions.size(); ++m) {
      DirectionWeights& dw = w.directions[m];
      const std::string dbase = base + ".dir" + std::to_string(m);
      dw.ssm.channel_dim = di;
      dw.ssm.state_dim = ns;
      dw.ssm.mode = SsmMode::Selective;
      dw.ssm.a_diag = to_vector(get(dbase + ".a_diag"), di * ns);
      const auto dp = to_vector(get(dbase + ".delta_proj"), di);
      const auto db = to_vector(get(dbase + ".delta_bias"), di);
      dw.delta_proj = Eigen::Map<const Eigen::VectorXd>(dp.data(), static_cast<Eigen::Index>(di));
      dw.delta_bias = Eigen::Map<const Eigen::VectorXd>(db.data(), static_cast<Eigen::Index>(di));
      dw.b_proj = to_matrix(get(dbase + ".b_proj"), di, ns);
      dw.c_proj = to_matrix(get(dbase + ".c_proj"), di, ns);
    }
  }
  validate_weights(cfg, blocks);
  return blocks;
}

}  // namespace alignscan
