// Copyright (c) 2026 The PVT Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pvt/container.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include "json.hpp"
#include "spdlog/spdlog.h"

namespace pvt {

static_assert(std::endian::native == std::endian::little,
              "the container writer assumes a little-endian host");

namespace {

constexpr std::size_t kMagicLen = 5;
constexpr std::size_t kHeaderLen = kMagicLen + 4 + 8;

std::size_t Align8(std::size_t n) { return (n + 7) & ~std::size_t{7}; }

template <typename U>
void PutLe(std::vector<char>* out, U v) {
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out->insert(out->end(), buf, buf + sizeof(U));
}

template <typename U>
U GetLe(const std::vector<char>& in, std::size_t pos) {
  U v;
  std::memcpy(&v, in.data() + pos, sizeof(U));
  return v;
}

}  // namespace

const NamedTensor* TensorContainer::Find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void TensorContainer::Add(std::string name, Shape shape, std::vector<float> data) {
  if (Find(name)) throw ValidationError("container: duplicate tensor name " + name);
  if (static_cast<std::size_t>(ShapeSize(shape)) != data.size()) {
    throw ValidationError("container: tensor " + name + " has " + std::to_string(data.size()) +
                          " values for shape " + ShapeString(shape));
  }
  tensors.push_back({std::move(name), std::move(shape), std::move(data)});
}

std::vector<char> SerializeContainer(const TensorContainer& c) {
  nlohmann::json meta;
  meta["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  std::set<std::string> names;
  for (const auto& t : c.tensors) {
    if (!names.insert(t.name).second) {
      throw ValidationError("container: duplicate tensor name " + t.name);
    }
    const std::size_t nbytes = t.data.size() * sizeof(float);
    meta["tensors"].push_back({{"name", t.name},
                               {"shape", t.shape},
                               {"dtype", "f32"},
                               {"offset", offset},
                               {"nbytes", nbytes}});
    offset = Align8(offset + nbytes);
  }
  meta["attrs"] = c.attrs;
  const std::string meta_str = meta.dump();

  std::vector<char> out;
  out.insert(out.end(), kContainerMagic, kContainerMagic + kMagicLen);
  PutLe<uint32_t>(&out, kContainerVersion);
  PutLe<uint64_t>(&out, meta_str.size());
  out.insert(out.end(), meta_str.begin(), meta_str.end());
  out.resize(Align8(out.size()), '\0');
  const std::size_t base = out.size();
  out.resize(base + offset, '\0');
  std::size_t pos = 0;
  for (const auto& t : c.tensors) {
    const std::size_t nbytes = t.data.size() * sizeof(float);
    if (nbytes) std::memcpy(out.data() + base + pos, t.data.data(), nbytes);
    pos = Align8(pos + nbytes);
  }
  return out;
}

TensorContainer ParseContainer(const std::vector<char>& bytes) {
  if (bytes.size() < kHeaderLen) {
    throw FormatError("container: truncated header (" + std::to_string(bytes.size()) + " bytes)");
  }
  if (std::memcmp(bytes.data(), kContainerMagic, kMagicLen) != 0) {
    throw FormatError("container: bad magic, expected PVTK1");
  }
  const uint32_t version = GetLe<uint32_t>(bytes, kMagicLen);
  if (version != kContainerVersion) {
    throw FormatError("container: unsupported format version " + std::to_string(version) +
                      " (this build reads version " + std::to_string(kContainerVersion) + ")");
  }
  const uint64_t meta_len = GetLe<uint64_t>(bytes, kMagicLen + 4);
  if (meta_len > bytes.size() - kHeaderLen) {
    throw FormatError("container: truncated metadata (" + std::to_string(meta_len) +
                      " bytes declared)");
  }
  const std::size_t base = Align8(kHeaderLen + meta_len);
  if (base > bytes.size()) throw FormatError("container: truncated before payload");
  const std::size_t payload = bytes.size() - base;

  TensorContainer c;
  try {
    const auto meta = nlohmann::json::parse(bytes.begin() + kHeaderLen,
                                            bytes.begin() + kHeaderLen + meta_len);
    if (meta.contains("attrs")) {
      c.attrs = meta.at("attrs").get<std::map<std::string, std::string>>();
    }
    for (const auto& jt : meta.at("tensors")) {
      NamedTensor t;
      t.name = jt.at("name").get<std::string>();
      t.shape = jt.at("shape").get<Shape>();
      if (jt.at("dtype").get<std::string>() != "f32") {
        throw FormatError("container: tensor " + t.name + " has unsupported dtype");
      }
      for (int64_t d : t.shape) {
        if (d < 0) throw FormatError("container: tensor " + t.name + " has a negative dimension");
      }
      const auto offset = jt.at("offset").get<uint64_t>();
      const auto nbytes = jt.at("nbytes").get<uint64_t>();
      const auto count = static_cast<uint64_t>(ShapeSize(t.shape));
      if (nbytes != count * sizeof(float) || offset % 8 != 0 || offset > payload ||
          nbytes > payload - offset) {
        throw FormatError("container: tensor " + t.name + " has inconsistent offset/size");
      }
      t.data.resize(count);
      if (nbytes) std::memcpy(t.data.data(), bytes.data() + base + offset, nbytes);
      if (c.Find(t.name)) throw FormatError("container: duplicate tensor name " + t.name);
      c.tensors.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("container: malformed metadata: ") + e.what());
  }
  return c;
}

void WriteContainer(const std::string& path, const TensorContainer& c) {
  const std::vector<char> bytes = SerializeContainer(c);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

TensorContainer ReadContainer(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return ParseContainer(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

std::string ConfigHash(const std::string& canonical_config) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_config) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

template <typename T>
std::vector<float> ToF32(const Tensor<T>& t) {
  return std::vector<float>(t.vec().begin(), t.vec().end());
}

template <typename T>
void FromF32(const NamedTensor& src, Tensor<T>* dst) {
  if (src.shape != dst->shape()) {
    throw FormatError("checkpoint: tensor " + src.name + " has shape " + ShapeString(src.shape) +
                      ", model expects " + ShapeString(dst->shape()));
  }
  for (std::size_t i = 0; i < src.data.size(); ++i) (*dst)[i] = static_cast<T>(src.data[i]);
}

}  // namespace

template <typename T>
TensorContainer MakeCheckpoint(const ParamStore<T>& params, const OptimizerState<T>* opt,
                               const std::string& kind, const std::string& config_json) {
  TensorContainer c;
  for (const auto& p : params.params()) {
    c.Add(p.name, p.param->value.shape(), ToF32(p.param->value));
  }
  for (const auto& b : params.buffers()) c.Add(b.name, b.buffer->shape(), ToF32(*b.buffer));
  if (opt && opt->kind != OptimizerKind::kNone) {
    for (const auto& [name, m] : opt->first_moment) c.Add("optim.m." + name, m.shape(), ToF32(m));
    for (const auto& [name, v] : opt->second_moment) c.Add("optim.v." + name, v.shape(), ToF32(v));
    c.attrs["optim.kind"] = opt->kind == OptimizerKind::kAdam ? "adam" : "sgd";
    c.attrs["optim.step"] = std::to_string(opt->step);
    c.attrs["optim.lr"] = nlohmann::json(opt->lr).dump();
  }
  c.attrs["kind"] = kind;
  c.attrs["config"] = config_json;
  c.attrs["config_hash"] = ConfigHash(config_json);
  return c;
}

template <typename T>
void SaveCheckpoint(const std::string& path, const ParamStore<T>& params,
                    const OptimizerState<T>* opt, const std::string& kind,
                    const std::string& config_json) {
  WriteContainer(path, MakeCheckpoint(params, opt, kind, config_json));
}

template <typename T>
void RestoreCheckpoint(const TensorContainer& c, const ParamStore<T>& params,
                       OptimizerState<T>* opt, const std::string& expected_config_json) {
  if (!expected_config_json.empty()) {
    const std::string expected = ConfigHash(expected_config_json);
    const auto it = c.attrs.find("config_hash");
    const std::string stored = it == c.attrs.end() ? std::string("<none>") : it->second;
    if (stored != expected) {
      throw FormatError("checkpoint: config hash mismatch: checkpoint has " + stored +
                        ", current config has " + expected);
    }
  }
  std::set<std::string> used;
  for (const auto& p : params.params()) {
    const NamedTensor* t = c.Find(p.name);
    if (!t) throw FormatError("checkpoint: missing tensor " + p.name);
    FromF32(*t, &p.param->value);
    used.insert(p.name);
  }
  for (const auto& b : params.buffers()) {
    const NamedTensor* t = c.Find(b.name);
    if (!t) throw FormatError("checkpoint: missing tensor " + b.name);
    FromF32(*t, b.buffer);
    used.insert(b.name);
  }
  const bool has_optim = c.attrs.count("optim.kind") > 0;
  if (opt && has_optim) {
    opt->kind = c.attrs.at("optim.kind") == "adam" ? OptimizerKind::kAdam : OptimizerKind::kSgd;
    opt->step = std::stoll(c.attrs.at("optim.step"));
    opt->lr = nlohmann::json::parse(c.attrs.at("optim.lr")).get<double>();
    opt->first_moment.clear();
    opt->second_moment.clear();
  }
  for (const auto& t : c.tensors) {
    if (used.count(t.name)) continue;
    const bool m = t.name.rfind("optim.m.", 0) == 0;
    const bool v = t.name.rfind("optim.v.", 0) == 0;
    if (m || v) {
      if (opt && has_optim) {
        Tensor<T> value(t.shape);
        FromF32(t, &value);
        (m ? opt->first_moment : opt->second_moment)[t.name.substr(8)] = std::move(value);
      }
      continue;
    }
    spdlog::warn("checkpoint: ignoring unknown tensor {}", t.name);
  }
}

template <typename T>
void LoadCheckpoint(const std::string& path, const ParamStore<T>& params,
                    OptimizerState<T>* opt, const std::string& expected_config_json) {
  const TensorContainer c = ReadContainer(path);
  try {
    RestoreCheckpoint(c, params, opt, expected_config_json);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

#define PVT_INSTANTIATE_CHECKPOINT(T)                                                       \
  template TensorContainer MakeCheckpoint(const ParamStore<T>&, const OptimizerState<T>*,  \
                                          const std::string&, const std::string&);         \
  template void SaveCheckpoint(const std::string&, const ParamStore<T>&,                   \
                               const OptimizerState<T>*, const std::string&,               \
                               const std::string&);                                        \
  template void RestoreCheckpoint(const TensorContainer&, const ParamStore<T>&,            \
                                  OptimizerState<T>*, const std::string&);                 \
  template void LoadCheckpoint(const std::string&, const ParamStore<T>&, OptimizerState<T>*, \
                               const std::string&);

PVT_INSTANTIATE_CHECKPOINT(float)
PVT_INSTANTIATE_CHECKPOINT(double)

}  // namespace pvt
