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

#include "pvt/config.h"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "toml.hpp"

namespace pvt {

namespace {

using json = nlohmann::json;

// Typed access to one TOML table that remembers which keys were consumed.
class Section {
 public:
  Section(const toml::table* table, std::string name, std::string origin)
      : table_(table), name_(std::move(name)), origin_(std::move(origin)) {}

  void Int(const char* key, int* out) {
    if (const toml::node* n = Take(key)) {
      const auto v = n->value<int64_t>();
      if (!n->is_integer() || !v) Fail(key, "an integer");
      *out = static_cast<int>(*v);
    }
  }
  void U64(const char* key, uint64_t* out) {
    if (const toml::node* n = Take(key)) {
      const auto v = n->value<int64_t>();
      if (!n->is_integer() || !v || *v < 0) Fail(key, "a non-negative integer");
      *out = static_cast<uint64_t>(*v);
    }
  }
  void Double(const char* key, double* out) {
    if (const toml::node* n = Take(key)) {
      if (!n->is_number()) Fail(key, "a number");
      *out = *n->value<double>();
    }
  }
  void Bool(const char* key, bool* out) {
    if (const toml::node* n = Take(key)) {
      if (!n->is_boolean()) Fail(key, "a boolean");
      *out = *n->value<bool>();
    }
  }
  void String(const char* key, std::string* out) {
    if (const toml::node* n = Take(key)) {
      if (!n->is_string()) Fail(key, "a string");
      *out = *n->value<std::string>();
    }
  }
  bool IntList(const char* key, std::vector<int>* out) {
    const toml::node* n = Take(key);
    if (!n) return false;
    const toml::array* arr = n->as_array();
    if (!arr) Fail(key, "an array of integers");
    out->clear();
    for (const toml::node& e : *arr) {
      if (!e.is_integer()) Fail(key, "an array of integers");
      out->push_back(static_cast<int>(*e.value<int64_t>()));
    }
    return true;
  }
  bool Has(const char* key) const { return table_ && table_->contains(key); }

  void Finish() const {
    if (!table_) return;
    for (const auto& [k, v] : *table_) {
      const std::string key(k.str());
      if (!used_.count(key)) {
        throw ValidationError(origin_ + ": unknown key '" + key + "' in [" + name_ + "]");
      }
    }
  }

 private:
  const toml::node* Take(const char* key) {
    if (!table_) return nullptr;
    const toml::node* n = table_->get(key);
    if (n) used_.insert(key);
    return n;
  }
  [[noreturn]] void Fail(const char* key, const char* expected) const {
    throw ValidationError(origin_ + ": [" + name_ + "]." + key + " must be " + expected);
  }

  const toml::table* table_;
  std::string name_;
  std::string origin_;
  std::set<std::string> used_;
};

void ReadFeatures(Section& s, FbankConfig* c) {
  s.Int("n_mels", &c->n_mels);
  s.Double("win_ms", &c->win_ms);
  s.Double("hop_ms", &c->hop_ms);
  s.Int("fft_size", &c->fft_size);
  s.Double("fmin", &c->fmin);
  s.Double("fmax", &c->fmax);
  s.Double("log_floor", &c->log_floor);
  s.Double("preemph", &c->preemph);
  s.Bool("apply_cmn", &c->apply_cmn);
}

void ReadMdtc(Section& s, MdtcConfig* c) {
  s.Int("input_dim", &c->input_dim);
  s.Int("channels", &c->channels);
  s.Int("stacks", &c->stacks);
  s.IntList("dilations", &c->dilations);
  s.Int("kernel", &c->kernel);
  s.Int("se_reduction", &c->se_reduction);
  s.Int("se_window", &c->se_window);
  s.Bool("causal", &c->causal);
  s.Double("bn_momentum", &c->bn_momentum);
}

void ReadKwsTrain(Section& s, KwsTrainConfig* c) {
  s.Double("lr", &c->lr);
  s.Int("batch_size", &c->batch_size);
  s.Double("decay_factor", &c->decay_factor);
  s.Int("min_epochs", &c->min_epochs);
  s.Int("max_epochs", &c->max_epochs);
  s.Bool("early_stopping", &c->early_stopping);
  s.Double("loss_clamp", &c->loss_clamp);
  s.Double("grad_clip", &c->grad_clip);
  s.Double("val_fraction", &c->val_fraction);
  s.Bool("spec_augment", &c->spec_augment);
  s.Int("time_mask_max", &c->augment.time_mask_max);
  s.Int("freq_mask_max", &c->augment.freq_mask_max);
  s.Int("n_time_masks", &c->augment.n_time_masks);
  s.Int("n_freq_masks", &c->augment.n_freq_masks);
  s.Int("variant1", &c->variant1);
  s.Int("variant2", &c->variant2);
  s.Int("variant3", &c->variant3);
  s.Int("negative_cuts", &c->negative_cuts);
  s.U64("seed", &c->seed);
}

void ReadDetector(Section& s, DetectorConfig* c) {
  s.Double("gamma", &c->gamma);
  s.Int("smoothing_window", &c->smoothing_window);
}

void ReadSv(Section& s, RunConfig* rc, const std::string& origin) {
  if (s.Has("preset")) {
    s.String("preset", &rc->sv_preset);
    rc->sv = SvConfig::Preset(rc->sv_preset);
  }
  SvConfig& c = rc->sv;
  s.Int("input_dim", &c.input_dim);
  s.Int("stem_channels", &c.stem_channels);
  std::vector<int> channels, blocks, strides;
  for (const auto& st : c.stages) {
    channels.push_back(st.channels);
    blocks.push_back(st.blocks);
    strides.push_back(st.stride);
  }
  const bool any = s.IntList("stage_channels", &channels) | s.IntList("stage_blocks", &blocks) |
                   s.IntList("stage_strides", &strides);
  if (any) {
    if (channels.size() != blocks.size() || channels.size() != strides.size()) {
      throw ValidationError(origin + ": [sv] stage_channels, stage_blocks and stage_strides "
                            "must have the same length");
    }
    c.stages.clear();
    for (std::size_t i = 0; i < channels.size(); ++i) {
      c.stages.push_back({channels[i], blocks[i], strides[i]});
    }
  }
  s.Int("se_reduction", &c.se_reduction);
  std::string pooling = PoolingKindName(c.pooling);
  s.String("pooling", &pooling);
  c.pooling = ParsePoolingKind(pooling);
  s.Int("attention_dim", &c.attention_dim);
  s.Int("embedding_dim", &c.embedding_dim);
  s.Double("bn_momentum", &c.bn_momentum);
  s.Double("arcface_scale", &c.arcface_scale);
  s.Double("arcface_margin", &c.arcface_margin);
  s.Double("supcon_temperature", &c.supcon_temperature);
  s.Double("supcon_weight", &c.supcon_weight);

  SvTrainConfig& t = rc->sv_train;
  s.Double("lr", &t.lr);
  s.Int("lr_step_epochs", &t.lr_step_epochs);
  s.Double("lr_decay", &t.lr_decay);
  s.Int("epochs", &t.epochs);
  s.Double("momentum", &t.momentum);
  s.Double("weight_decay", &t.weight_decay);
  s.Double("grad_clip", &t.grad_clip);
  s.Int("batch_size", &t.batch_size);
  s.Int("crop_frames", &t.crop_frames);
  s.U64("seed", &t.seed);
  s.Double("finetune_lr", &t.finetune_lr);
  s.Int("finetune_epochs", &t.finetune_epochs);
  s.Double("finetune_switch_loss", &t.finetune_switch_loss);
  std::string freeze = FreezePolicyName(t.freeze);
  s.String("freeze", &freeze);
  t.freeze = ParseFreezePolicy(freeze);

  SvAugmentConfig& a = rc->sv_augment;
  s.String("noise_manifest", &a.noise_manifest);
  s.String("rir_manifest", &a.rir_manifest);
  s.Int("augment_copies", &a.copies);
  s.Double("snr_db_min", &a.snr_db_min);
  s.Double("snr_db_max", &a.snr_db_max);
}

void ReadEval(Section& s, EvalConfig* c) {
  s.Double("alpha", &c->alpha);
  s.String("kws_checkpoint", &c->kws_checkpoint);
  s.String("sv_checkpoint", &c->sv_checkpoint);
  s.String("sv_checkpoint2", &c->sv_checkpoint2);
  s.String("enroll_manifest", &c->enroll_manifest);
  s.String("test_manifest", &c->test_manifest);
  s.String("trials", &c->trials);
  s.Int("threads", &c->threads);
}

void ResolvePath(const std::filesystem::path& base, std::string* p) {
  if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).string();
}

}  // namespace

void RunConfig::Validate() const {
  features.Validate(kSampleRate);
  mdtc.Validate();
  PVT_CHECK(mdtc.input_dim == features.n_mels, "config: [mdtc].input_dim must equal [features].n_mels");
  kws_train.Validate();
  detector.Validate();
  sv.Validate();
  PVT_CHECK(sv.input_dim == features.n_mels, "config: [sv].input_dim must equal [features].n_mels");
  sv_train.Validate();
  PVT_CHECK(sv_augment.copies >= 0, "config: [sv].augment_copies must be >= 0");
  PVT_CHECK(sv_augment.snr_db_min <= sv_augment.snr_db_max, "config: [sv] snr_db_min > snr_db_max");
  PVT_CHECK(eval.alpha >= 0.0, "config: [eval].alpha must be >= 0");
  PVT_CHECK(eval.threads >= 0, "config: [eval].threads must be >= 0");
}

RunConfig ParseRunConfig(const std::string& toml_text, const std::string& origin) {
  toml::table doc;
  try {
    doc = toml::parse(toml_text, origin);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << origin << ": " << e.description() << " (line " << e.source().begin.line << ")";
    throw ValidationError(os.str());
  }
  static const std::set<std::string> kSections = {"features", "mdtc", "kws_train",
                                                  "detector", "sv", "eval"};
  for (const auto& [k, v] : doc) {
    const std::string key(k.str());
    if (!kSections.count(key)) {
      throw ValidationError(origin + ": unknown section or key '" + key + "'");
    }
    if (!v.is_table()) throw ValidationError(origin + ": '" + key + "' must be a table");
  }
  RunConfig rc;
  auto section = [&](const char* name) { return Section(doc[name].as_table(), name, origin); };
  {
    Section s = section("features");
    ReadFeatures(s, &rc.features);
    s.Finish();
  }
  {
    Section s = section("mdtc");
    ReadMdtc(s, &rc.mdtc);
    s.Finish();
  }
  {
    Section s = section("kws_train");
    ReadKwsTrain(s, &rc.kws_train);
    s.Finish();
  }
  {
    Section s = section("detector");
    ReadDetector(s, &rc.detector);
    s.Finish();
  }
  {
    Section s = section("sv");
    ReadSv(s, &rc, origin);
    s.Finish();
  }
  {
    Section s = section("eval");
    ReadEval(s, &rc.eval);
    s.Finish();
  }
  rc.Validate();
  return rc;
}

RunConfig LoadRunConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig rc = ParseRunConfig(ss.str(), path);
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  for (std::string* p : {&rc.eval.kws_checkpoint, &rc.eval.sv_checkpoint, &rc.eval.sv_checkpoint2,
                         &rc.eval.enroll_manifest, &rc.eval.test_manifest, &rc.eval.trials,
                         &rc.sv_augment.noise_manifest, &rc.sv_augment.rir_manifest}) {
    ResolvePath(base, p);
  }
  return rc;
}

namespace {

json FeaturesJson(const FbankConfig& f) {
  return {{"n_mels", f.n_mels},       {"win_ms", f.win_ms},     {"hop_ms", f.hop_ms},
          {"fft_size", f.fft_size},   {"fmin", f.fmin},         {"fmax", f.fmax},
          {"log_floor", f.log_floor}, {"preemph", f.preemph},   {"apply_cmn", f.apply_cmn}};
}

void FeaturesFromJson(const json& j, FbankConfig* f) {
  f->n_mels = j.at("n_mels");
  f->win_ms = j.at("win_ms");
  f->hop_ms = j.at("hop_ms");
  f->fft_size = j.at("fft_size");
  f->fmin = j.at("fmin");
  f->fmax = j.at("fmax");
  f->log_floor = j.at("log_floor");
  f->preemph = j.at("preemph");
  f->apply_cmn = j.at("apply_cmn");
}

json ParseJson(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string(what) + ": malformed config JSON: " + e.what());
  }
}

}  // namespace

std::string KwsModelConfigJson(const FbankConfig& features, const MdtcConfig& m) {
  json j;
  j["kind"] = "mdtc";
  j["features"] = FeaturesJson(features);
  j["mdtc"] = {{"input_dim", m.input_dim}, {"channels", m.channels},
               {"stacks", m.stacks},       {"dilations", m.dilations},
               {"kernel", m.kernel},       {"se_reduction", m.se_reduction},
               {"se_window", m.se_window}, {"causal", m.causal},
               {"bn_momentum", m.bn_momentum}};
  return j.dump();
}

std::string SvModelConfigJson(const FbankConfig& features, const SvConfig& s) {
  json j;
  j["kind"] = "sv";
  j["features"] = FeaturesJson(features);
  json stages = json::array();
  for (const auto& st : s.stages) stages.push_back({st.channels, st.blocks, st.stride});
  j["sv"] = {{"input_dim", s.input_dim},
             {"stem_channels", s.stem_channels},
             {"stages", stages},
             {"se_reduction", s.se_reduction},
             {"pooling", PoolingKindName(s.pooling)},
             {"attention_dim", s.attention_dim},
             {"embedding_dim", s.embedding_dim},
             {"bn_momentum", s.bn_momentum},
             {"arcface_scale", s.arcface_scale},
             {"arcface_margin", s.arcface_margin},
             {"supcon_temperature", s.supcon_temperature},
             {"supcon_weight", s.supcon_weight}};
  return j.dump();
}

void ParseKwsModelConfigJson(const std::string& text, FbankConfig* features, MdtcConfig* m) {
  const json j = ParseJson(text, "kws checkpoint");
  try {
    if (j.at("kind") != "mdtc") throw FormatError("checkpoint does not hold a keyword model");
    FeaturesFromJson(j.at("features"), features);
    const json& c = j.at("mdtc");
    m->input_dim = c.at("input_dim");
    m->channels = c.at("channels");
    m->stacks = c.at("stacks");
    m->dilations = c.at("dilations").get<std::vector<int>>();
    m->kernel = c.at("kernel");
    m->se_reduction = c.at("se_reduction");
    m->se_window = c.at("se_window");
    m->causal = c.at("causal");
    m->bn_momentum = c.at("bn_momentum");
  } catch (const json::exception& e) {
    throw FormatError(std::string("kws checkpoint config: ") + e.what());
  }
}

void ParseSvModelConfigJson(const std::string& text, FbankConfig* features, SvConfig* s) {
  const json j = ParseJson(text, "sv checkpoint");
  try {
    if (j.at("kind") != "sv") throw FormatError("checkpoint does not hold a speaker model");
    FeaturesFromJson(j.at("features"), features);
    const json& c = j.at("sv");
    s->input_dim = c.at("input_dim");
    s->stem_channels = c.at("stem_channels");
    s->stages.clear();
    for (const auto& st : c.at("stages")) s->stages.push_back({st.at(0), st.at(1), st.at(2)});
    s->se_reduction = c.at("se_reduction");
    s->pooling = ParsePoolingKind(c.at("pooling").get<std::string>());
    s->attention_dim = c.at("attention_dim");
    s->embedding_dim = c.at("embedding_dim");
    s->bn_momentum = c.at("bn_momentum");
    s->arcface_scale = c.at("arcface_scale");
    s->arcface_margin = c.at("arcface_margin");
    s->supcon_temperature = c.at("supcon_temperature");
    s->supcon_weight = c.at("supcon_weight");
  } catch (const json::exception& e) {
    throw FormatError(std::string("sv checkpoint config: ") + e.what());
  }
}

}  // namespace pvt
