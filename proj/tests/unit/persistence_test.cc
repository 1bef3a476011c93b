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

#include <fstream>
#include <sstream>

#include "cli.h"
#include "gtest/gtest.h"
#include "json.hpp"
#include "pvt/config.h"
#include "pvt/container.h"
#include "pvt/pipeline.h"
#include "pvt/synthetic.h"
#include "spdlog/sinks/ringbuffer_sink.h"
#include "spdlog/spdlog.h"
#include "testing.h"

namespace pvt {
namespace {

std::vector<char> ReadBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

std::string ReadString(const std::string& path) {
  const auto b = ReadBytes(path);
  return std::string(b.begin(), b.end());
}

void WriteString(const std::string& path, const std::string& text) {
  std::ofstream(path) << text;
}

TensorContainer Sample() {
  TensorContainer c;
  c.Add("a.weight", {2, 3}, {1, 2, 3, 4, 5, 6});
  c.Add("b", {1}, {-0.5f});
  c.Add("empty", {0}, {});
  c.attrs["kind"] = "test";
  return c;
}

TEST(Container, RoundTripIsExact) {
  const TensorContainer c = Sample();
  const std::vector<char> bytes = SerializeContainer(c);
  const TensorContainer back = ParseContainer(bytes);
  ASSERT_EQ(back.tensors.size(), 3u);
  EXPECT_EQ(back.Find("a.weight")->shape, (Shape{2, 3}));
  EXPECT_EQ(back.Find("a.weight")->data, c.tensors[0].data);
  EXPECT_EQ(back.Find("b")->data, std::vector<float>{-0.5f});
  EXPECT_EQ(back.attrs.at("kind"), "test");
  // Serializing again gives the same bytes.
  EXPECT_EQ(SerializeContainer(back), bytes);
}

TEST(Container, TruncationAndBadHeadersRejected) {
  const std::vector<char> bytes = SerializeContainer(Sample());
  for (std::size_t cut : {std::size_t{0}, std::size_t{4}, std::size_t{12}, std::size_t{30},
                          bytes.size() - 1}) {
    const std::vector<char> head(bytes.begin(), bytes.begin() + static_cast<long>(cut));
    EXPECT_THROW(ParseContainer(head), FormatError) << cut;
  }
  std::vector<char> magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(ParseContainer(magic), FormatError);
  std::vector<char> version = bytes;
  const uint32_t v999 = 999;
  std::memcpy(version.data() + 5, &v999, 4);
  try {
    ParseContainer(version);
    FAIL() << "version 999 accepted";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("999"), std::string::npos) << e.what();
  }
}

TEST(Container, DuplicateAndMismatchedTensorsRejected) {
  TensorContainer c;
  c.Add("x", {2}, {1, 2});
  EXPECT_THROW(c.Add("x", {1}, {1}), ValidationError);
  EXPECT_THROW(c.Add("y", {3}, {1}), ValidationError);
}

MdtcConfig TinyMdtc() {
  MdtcConfig cfg;
  cfg.channels = 8;
  cfg.stacks = 1;
  cfg.dilations = {1, 2};
  cfg.se_reduction = 2;
  return cfg;
}

TEST(Checkpoint, RestoreIsBitIdenticalWithOptimizerState) {
  testing::TempDir dir("ckpt");
  auto model = MdtcModel<float>::Build(TinyMdtc(), 1);
  auto params = model.Params();
  for (const auto& p : params.params()) p.param->grad.Fill(0.01f);
  auto opt = MakeAdam<float>(0.002);
  AdamStep(params, &opt);
  const std::string cfg_json = KwsModelConfigJson(FbankConfig(), TinyMdtc());
  SaveCheckpoint(dir.file("m.ckpt"), params, &opt, "kws", cfg_json);

  auto other = MdtcModel<float>::Build(TinyMdtc(), 2);
  OptimizerState<float> opt2;
  LoadCheckpoint(dir.file("m.ckpt"), other.Params(), &opt2, cfg_json);
  auto p2 = other.Params();
  for (std::size_t i = 0; i < params.params().size(); ++i) {
    const auto& a = params.params()[i].param->value;
    EXPECT_TRUE(testing::BitEqual(a.data(), p2.params()[i].param->value.data(), a.size()));
  }
  EXPECT_EQ(opt2.kind, OptimizerKind::kAdam);
  EXPECT_EQ(opt2.step, opt.step);
  EXPECT_EQ(opt2.first_moment.size(), opt.first_moment.size());
  FeatureMatrix f(50, 80, 0.25f);
  EXPECT_EQ(model.Posteriors(f).posteriors, other.Posteriors(f).posteriors);
}

TEST(Checkpoint, ConfigHashMismatchNamesBothHashes) {
  testing::TempDir dir("hash");
  auto model = MdtcModel<float>::Build(TinyMdtc(), 1);
  const std::string saved = KwsModelConfigJson(FbankConfig(), TinyMdtc());
  SaveCheckpoint(dir.file("m.ckpt"), model.Params(), static_cast<OptimizerState<float>*>(nullptr),
                 "kws", saved);
  MdtcConfig wider = TinyMdtc();
  wider.kernel = 3;
  const std::string expected = KwsModelConfigJson(FbankConfig(), wider);
  auto other = MdtcModel<float>::Build(wider, 1);
  try {
    LoadCheckpoint(dir.file("m.ckpt"), other.Params(),
                   static_cast<OptimizerState<float>*>(nullptr), expected);
    FAIL() << "mismatched config accepted";
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(ConfigHash(saved)), std::string::npos) << msg;
    EXPECT_NE(msg.find(ConfigHash(expected)), std::string::npos) << msg;
  }
}

TEST(Checkpoint, UnknownTensorIsIgnoredWithWarning) {
  auto model = MdtcModel<float>::Build(TinyMdtc(), 1);
  TensorContainer c = MakeCheckpoint(model.Params(), static_cast<OptimizerState<float>*>(nullptr),
                                     "kws", "{}");
  c.Add("stray.tensor", {1}, {3.0f});
  auto sink = std::make_shared<spdlog::sinks::ringbuffer_sink_mt>(16);
  auto previous = spdlog::default_logger();
  spdlog::set_default_logger(std::make_shared<spdlog::logger>("capture", sink));
  auto other = MdtcModel<float>::Build(TinyMdtc(), 2);
  EXPECT_NO_THROW(
      RestoreCheckpoint(c, other.Params(), static_cast<OptimizerState<float>*>(nullptr), ""));
  spdlog::set_default_logger(previous);
  bool warned = false;
  for (const auto& line : sink->last_formatted()) {
    warned = warned || line.find("stray.tensor") != std::string::npos;
  }
  EXPECT_TRUE(warned);
  // A missing tensor is an error.
  TensorContainer partial;
  EXPECT_THROW(RestoreCheckpoint(partial, other.Params(),
                                 static_cast<OptimizerState<float>*>(nullptr), ""),
               FormatError);
}

TEST(Config, UnknownKeysAndSectionsRejected) {
  EXPECT_NO_THROW(ParseRunConfig("[mdtc]\nchannels = 32\n"));
  try {
    ParseRunConfig("[mdtc]\nchanels = 32\n", "x.toml");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("chanels"), std::string::npos);
  }
  EXPECT_THROW(ParseRunConfig("[mdtcc]\nchannels = 32\n"), ValidationError);
  EXPECT_THROW(ParseRunConfig("[mdtc]\nchannels = \"wide\"\n"), ValidationError);
  EXPECT_THROW(ParseRunConfig("[detector]\ngamma = 2.0\n"), ValidationError);
  EXPECT_THROW(ParseRunConfig("[mdtc\n"), ValidationError);
  const RunConfig rc = ParseRunConfig("[sv]\npreset = \"tiny\"\nembedding_dim = 32\n");
  EXPECT_EQ(rc.sv.stem_channels, SvConfig::Preset("tiny").stem_channels);
  EXPECT_EQ(rc.sv.embedding_dim, 32);
}

TEST(Config, ModelJsonRoundTrip) {
  MdtcConfig m = TinyMdtc();
  FbankConfig f;
  f.n_mels = 40;
  FbankConfig f2;
  MdtcConfig m2;
  ParseKwsModelConfigJson(KwsModelConfigJson(f, m), &f2, &m2);
  EXPECT_EQ(m2.Fingerprint(), m.Fingerprint());
  EXPECT_EQ(f2.n_mels, 40);
  SvConfig s = SvConfig::Preset("tiny");
  SvConfig s2;
  ParseSvModelConfigJson(SvModelConfigJson(f, s), &f2, &s2);
  EXPECT_EQ(s2.Fingerprint(), s.Fingerprint());
  EXPECT_THROW(ParseKwsModelConfigJson(SvModelConfigJson(f, s), &f2, &m2), FormatError);
}

int RunPvt(std::vector<std::string> args) {
  args.insert(args.begin(), "pvt");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return RunCli(static_cast<int>(argv.size()), argv.data());
}

// A two-speaker corpus with untrained tiny models: enough to drive every
// subcommand end to end.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir("cli");
    SyntheticConfig sc;
    sc.n_speakers = 2;
    SyntheticLayout layout;
    layout.train_pos = layout.train_neg = 2;
    layout.enroll = 1;
    layout.dev_pos = layout.dev_neg = 1;
    layout.eval_pos = layout.eval_neg = 1;
    files_ = new SyntheticCorpusFiles(GenerateSyntheticCorpus(dir_->file("corpus"), sc, layout));
    auto kws = MdtcModel<float>::Build(TinyMdtc(), 1);
    SaveKwsCheckpoint(dir_->file("kws.ckpt"), FbankConfig(), &kws);
    auto sv = SvModel<float>::Build(SvConfig::Preset("tiny"), 2, 1);
    SaveSvCheckpoint(dir_->file("sv.ckpt"), FbankConfig(), &sv);
    // gamma near zero makes the untrained detector fire everywhere.
    WriteString(dir_->file("run.toml"),
                "[detector]\ngamma = 1e-6\n"
                "[sv]\npreset = \"tiny\"\nepochs = 1\nbatch_size = 4\ncrop_frames = 30\n"
                "finetune_epochs = 1\n"
                "[kws_train]\nmax_epochs = 1\nmin_epochs = 1\nbatch_size = 8\nval_fraction = 0.0\n"
                "[mdtc]\nchannels = 8\nstacks = 1\ndilations = [1, 2]\nse_reduction = 2\n"
                "[eval]\nkws_checkpoint = \"kws.ckpt\"\nsv_checkpoint = \"sv.ckpt\"\n"
                "enroll_manifest = \"corpus/enroll.jsonl\"\ntest_manifest = \"corpus/dev.jsonl\"\n"
                "trials = \"corpus/dev_trials.txt\"\nthreads = 2\n");
  }
  static void TearDownTestSuite() {
    delete files_;
    delete dir_;
  }
  static std::string Cfg() { return dir_->file("run.toml"); }
  static std::string Out(const std::string& name) { return dir_->file(name); }

  static testing::TempDir* dir_;
  static SyntheticCorpusFiles* files_;
};

testing::TempDir* CliTest::dir_ = nullptr;
SyntheticCorpusFiles* CliTest::files_ = nullptr;

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(RunPvt({"--help"}), kExitOk);
  EXPECT_EQ(RunPvt({}), kExitValidation);
  EXPECT_EQ(RunPvt({"bogus"}), kExitValidation);
  // Missing required --out.
  EXPECT_EQ(RunPvt({"features", "--config", Cfg()}), kExitValidation);
  // Config that does not exist.
  EXPECT_EQ(RunPvt({"features", "--config", Out("nope.toml"), "--out", Out("f0")}), kExitValidation);
  WriteString(Out("bad.toml"), "[mdtc]\nwidth = 3\n");
  EXPECT_EQ(RunPvt({"features", "--config", Out("bad.toml"), "--out", Out("f1")}), kExitValidation);
  // A manifest pointing at a missing wav is an I/O failure.
  WriteString(Out("ghost.jsonl"), R"({"utt_id":"g","wav_path":"ghost.wav","label":"negative"})"
                                  "\n");
  EXPECT_EQ(RunPvt({"features", "--config", Cfg(), "--out", Out("f2"), "--manifest",
                 Out("ghost.jsonl")}),
            kExitRuntime);
  EXPECT_EQ(RunPvt({"features", "--config", Cfg(), "--out", Out("f3"), "--manifest",
                 files_->enroll_manifest}),
            kExitOk);
  const TensorContainer feats = ReadContainer(Out("f3/features.pvtk"));
  EXPECT_EQ(feats.tensors.size(), ReadManifest(files_->enroll_manifest).size());
}

TEST_F(CliTest, DetectWritesOneEventPerUtterance) {
  ASSERT_EQ(RunPvt({"detect", "--config", Cfg(), "--out", Out("d1"), "--manifest",
                 files_->dev_manifest}),
            kExitOk);
  std::istringstream lines(ReadString(Out("d1/events.jsonl")));
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.at("fired").get<bool>());
    EXPECT_LE(j.at("start_frame").get<int64_t>(), j.at("middle_frame").get<int64_t>());
    EXPECT_LE(j.at("middle_frame").get<int64_t>(), j.at("end_frame").get<int64_t>());
    ++n;
  }
  EXPECT_EQ(n, ReadManifest(files_->dev_manifest).size());
}

TEST_F(CliTest, ScoringIsDeterministicAcrossRunsAndThreads) {
  ASSERT_EQ(RunPvt({"score", "--config", Cfg(), "--out", Out("s1")}), kExitOk);
  ASSERT_EQ(RunPvt({"score", "--config", Cfg(), "--out", Out("s2")}), kExitOk);
  EXPECT_EQ(ReadBytes(Out("s1/scores.txt")), ReadBytes(Out("s2/scores.txt")));
  EXPECT_EQ(ReadTrials(files_->dev_trials).size(),
            ReadScores(Out("s1/scores.txt"), ReadTrials(files_->dev_trials)).size());
  ASSERT_EQ(RunPvt({"evaluate", "--config", Cfg(), "--out", Out("e1"), "--scores",
                 Out("s1/scores.txt")}),
            kExitOk);
  const auto cost = nlohmann::json::parse(ReadString(Out("e1/cost.json")));
  EXPECT_GE(cost.at("min_cd").get<double>(), 0.0);
  EXPECT_EQ(ReadString(Out("e1/det.csv")).rfind("threshold,far,frr\n", 0), 0u);
  ASSERT_EQ(RunPvt({"enroll", "--config", Cfg(), "--out", Out("p1")}), kExitOk);
  EXPECT_FALSE(ReadString(Out("p1/profiles.jsonl")).empty());
}

TEST_F(CliTest, TrainingCommandsWriteCheckpoints) {
  ASSERT_EQ(RunPvt({"train-kws", "--config", Cfg(), "--out", Out("k1"), "--manifest",
                 files_->train_manifest, "--seed", "3"}),
            kExitOk);
  EXPECT_NO_THROW(LoadKwsCheckpoint(Out("k1/kws.ckpt")));
  ASSERT_EQ(RunPvt({"train-sv", "--config", Cfg(), "--out", Out("v1"), "--manifest",
                 files_->train_manifest}),
            kExitOk);
  ASSERT_EQ(RunPvt({"finetune-sv", "--config", Cfg(), "--out", Out("v2"), "--init",
                 Out("v1/sv.ckpt"), "--manifest", files_->train_manifest}),
            kExitOk);
  EXPECT_NO_THROW(LoadSvCheckpoint(Out("v2/sv.ckpt")));
  ASSERT_EQ(RunPvt({"rtf", "--config", Cfg(), "--out", Out("r1")}), kExitOk);
  const auto rtf = nlohmann::json::parse(ReadString(Out("r1/rtf.json")));
  EXPECT_GT(rtf.size(), 0u);
}

}  // namespace
}  // namespace pvt
