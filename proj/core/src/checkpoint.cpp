// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "rlsr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rlsr/errors.hpp"

namespace rlsr::ckpt {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <class U>
U get_le(const char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    v |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

struct Array {
  std::string name;
  ad::Shape shape;
  const std::vector<double>* values;
};

std::string_view dtype_name(Dtype d) { return d == Dtype::kF64 ? "f64" : "f32"; }

Dtype parse_dtype(const std::string& s) {
  if (s == "f64") return Dtype::kF64;
  if (s == "f32") return Dtype::kF32;
  throw IoError("unknown dtype " + s);
}

json policy_to_json(const policy::PolicyConfig& c) {
  return {{"d_model", c.d_model}, {"layers", c.layers},   {"heads", c.heads},
          {"ffn_mult", c.ffn_mult}, {"context", c.context}, {"vocab", c.vocab}};
}

policy::PolicyConfig policy_from_json(const json& j) {
  policy::PolicyConfig c;
  c.d_model = j.at("d_model").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.ffn_mult = j.at("ffn_mult").get<std::size_t>();
  c.context = j.at("context").get<std::size_t>();
  c.vocab = j.at("vocab").get<std::size_t>();
  return c;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("write failure on " + p.string());
}

}  // namespace

void save(const fs::path& dir, const policy::Policy& policy, const ad::OptimizerState* optimizer,
          const Manifest& manifest) {
  std::vector<Array> arrays;
  for (const auto& p : policy.parameters()) arrays.push_back({p.name, p.value.shape, &p.value.data});
  if (optimizer != nullptr) {
    const auto& params = policy.parameters();
    if (!optimizer->m.empty()) {
      if (optimizer->m.size() != params.size()) {
        throw DimensionError("optimizer state does not match policy parameters");
      }
      for (std::size_t i = 0; i < params.size(); ++i) {
        arrays.push_back({"adam.m/" + params[i].name, params[i].value.shape, &optimizer->m[i]});
        arrays.push_back({"adam.v/" + params[i].name, params[i].value.shape, &optimizer->v[i]});
      }
    }
  }

  const std::size_t width = manifest.dtype == Dtype::kF64 ? 8 : 4;
  json index = json::array();
  std::size_t offset = 0;
  for (const auto& a : arrays) {
    index.push_back({{"name", a.name},
                     {"dtype", dtype_name(manifest.dtype)},
                     {"shape", a.shape},
                     {"offset", offset}});
    offset += a.values->size() * width;
  }
  const std::string header = index.dump();
  std::string blob;
  blob.reserve(8 + header.size() + offset);
  put_le<std::uint64_t>(blob, header.size());
  blob += header;
  for (const auto& a : arrays) {
    for (double v : *a.values) {
      if (manifest.dtype == Dtype::kF64) {
        put_le<std::uint64_t>(blob, std::bit_cast<std::uint64_t>(v));
      } else {
        put_le<std::uint32_t>(blob, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      }
    }
  }

  json m = {{"format_version", manifest.format_version},
            {"policy", policy_to_json(manifest.policy)},
            {"step", manifest.step},
            {"seed_lineage", manifest.seed_lineage},
            {"mode", manifest.mode},
            {"dtype", dtype_name(manifest.dtype)},
            {"has_optimizer", optimizer != nullptr && !optimizer->m.empty()},
            {"train_config", json::parse(manifest.train_config_json)}};
  if (optimizer != nullptr) {
    m["optimizer"] = {{"lr", optimizer->lr},       {"beta1", optimizer->beta1},
                      {"beta2", optimizer->beta2}, {"eps", optimizer->eps},
                      {"weight_decay", optimizer->weight_decay}, {"step", optimizer->step}};
  }

  fs::path target = dir;
  if (target.has_filename() == false) target = target.parent_path();
  const fs::path tmp = target.string() + ".tmp";
  std::error_code ec;
  fs::remove_all(tmp, ec);
  fs::create_directories(tmp, ec);
  if (ec) throw IoError("cannot create " + tmp.string() + ": " + ec.message());
  write_file(tmp / "params.bin", blob);
  write_file(tmp / "manifest.json", m.dump(2) + "\n");
  fs::remove_all(target, ec);
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("cannot move checkpoint into " + target.string() + ": " + ec.message());
}

Checkpoint load(const fs::path& dir) {
  json m;
  try {
    m = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw IoError("malformed manifest in " + dir.string() + ": " + e.what());
  }
  const std::string blob = read_file(dir / "params.bin");
  try {
    Manifest man;
    man.format_version = m.at("format_version").get<int>();
    if (man.format_version != kFormatVersion) {
      throw IoError("unsupported checkpoint format version " + std::to_string(man.format_version));
    }
    man.policy = policy_from_json(m.at("policy"));
    man.step = m.at("step").get<std::int64_t>();
    man.seed_lineage = m.at("seed_lineage").get<std::vector<std::uint64_t>>();
    man.mode = m.at("mode").get<std::string>();
    man.dtype = parse_dtype(m.at("dtype").get<std::string>());
    man.train_config_json = m.at("train_config").dump();

    if (blob.size() < 8) throw IoError("params.bin truncated");
    const auto hlen = get_le<std::uint64_t>(blob.data());
    if (8 + hlen > blob.size()) throw IoError("params.bin header truncated");
    const json index = json::parse(blob.substr(8, hlen));
    const char* data = blob.data() + 8 + hlen;
    const std::size_t data_size = blob.size() - 8 - hlen;

    std::vector<ad::Parameter> params;
    std::vector<std::vector<double>> moments_m, moments_v;
    for (const auto& e : index) {
      const auto name = e.at("name").get<std::string>();
      const auto shape = e.at("shape").get<ad::Shape>();
      const auto dtype = parse_dtype(e.at("dtype").get<std::string>());
      const auto offset = e.at("offset").get<std::size_t>();
      const std::size_t width = dtype == Dtype::kF64 ? 8 : 4;
      const std::size_t n = ad::numel(shape);
      if (offset + n * width > data_size) throw IoError("array " + name + " overruns params.bin");
      std::vector<double> values(n);
      for (std::size_t i = 0; i < n; ++i) {
        const char* p = data + offset + i * width;
        values[i] = dtype == Dtype::kF64
                        ? std::bit_cast<double>(get_le<std::uint64_t>(p))
                        : static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(p)));
      }
      if (name.starts_with("adam.m/")) {
        moments_m.push_back(std::move(values));
      } else if (name.starts_with("adam.v/")) {
        moments_v.push_back(std::move(values));
      } else {
        params.emplace_back(name, ad::Tensor(shape, std::move(values)));
      }
    }
    Checkpoint ck{policy::Policy(man.policy, std::move(params)), std::nullopt, man};
    if (auto it = m.find("optimizer"); it != m.end()) {
      ad::OptimizerState st;
      st.lr = it->at("lr").get<double>();
      st.beta1 = it->at("beta1").get<double>();
      st.beta2 = it->at("beta2").get<double>();
      st.eps = it->at("eps").get<double>();
      st.weight_decay = it->at("weight_decay").get<double>();
      st.step = it->at("step").get<std::int64_t>();
      st.m = std::move(moments_m);
      st.v = std::move(moments_v);
      ck.optimizer = std::move(st);
    }
    return ck;
  } catch (const json::exception& e) {
    throw IoError("malformed checkpoint in " + dir.string() + ": " + e.what());
  }
}

}  // namespace rlsr::ckpt
