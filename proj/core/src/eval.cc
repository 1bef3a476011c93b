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

#include "pvt/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "pvt/common.h"

namespace pvt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Split {
  std::vector<double> target_scores;     // fired targets, ascending
  std::vector<double> nontarget_scores;  // fired nontargets, ascending
  int64_t n_target = 0;
  int64_t n_nontarget = 0;
};

Split SplitScores(const std::vector<ScoredTrial>& trials) {
  Split s;
  for (const auto& t : trials) {
    if (t.sv_score.has_value() && !t.kws_fired) {
      throw ValidationError("scored trial " + t.trial.test_utt_id + " has a score but did not fire");
    }
    if (t.trial.target) {
      ++s.n_target;
      if (t.sv_score) s.target_scores.push_back(*t.sv_score);
    } else {
      ++s.n_nontarget;
      if (t.sv_score) s.nontarget_scores.push_back(*t.sv_score);
    }
  }
  if (s.n_target == 0 || s.n_nontarget == 0) {
    throw ValidationError("metrics need at least one target and one nontarget trial");
  }
  std::sort(s.target_scores.begin(), s.target_scores.end());
  std::sort(s.nontarget_scores.begin(), s.nontarget_scores.end());
  return s;
}

std::string FormatDouble(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

nlohmann::json ThresholdJson(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

}  // namespace

ErrorRates FarFrr(const std::vector<ScoredTrial>& trials, double delta) {
  const Split s = SplitScores(trials);
  const auto rejected_targets =
      s.n_target - static_cast<int64_t>(s.target_scores.end() -
                                        std::lower_bound(s.target_scores.begin(), s.target_scores.end(), delta));
  const auto accepted_nontargets = static_cast<int64_t>(
      s.nontarget_scores.end() -
      std::lower_bound(s.nontarget_scores.begin(), s.nontarget_scores.end(), delta));
  ErrorRates r;
  r.frr = static_cast<double>(rejected_targets) / static_cast<double>(s.n_target);
  r.far = static_cast<double>(accepted_nontargets) / static_cast<double>(s.n_nontarget);
  return r;
}

std::vector<DetPoint> DetCurve(const std::vector<ScoredTrial>& trials) {
  const Split s = SplitScores(trials);
  std::vector<double> thresholds;
  thresholds.reserve(s.target_scores.size() + s.nontarget_scores.size() + 2);
  std::merge(s.target_scores.begin(), s.target_scores.end(), s.nontarget_scores.begin(),
             s.nontarget_scores.end(), std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.insert(thresholds.begin(), -kInf);
  thresholds.push_back(kInf);

  std::vector<DetPoint> curve;
  curve.reserve(thresholds.size());
  // Two pointers: number of fired scores strictly below the threshold.
  std::size_t below_t = 0, below_n = 0;
  const int64_t unfired_t = s.n_target - static_cast<int64_t>(s.target_scores.size());
  for (double th : thresholds) {
    while (below_t < s.target_scores.size() && s.target_scores[below_t] < th) ++below_t;
    while (below_n < s.nontarget_scores.size() && s.nontarget_scores[below_n] < th) ++below_n;
    DetPoint p;
    p.threshold = th;
    p.frr = static_cast<double>(unfired_t + static_cast<int64_t>(below_t)) /
            static_cast<double>(s.n_target);
    p.far = static_cast<double>(static_cast<int64_t>(s.nontarget_scores.size() - below_n)) /
            static_cast<double>(s.n_nontarget);
    curve.push_back(p);
  }
  return curve;
}

double EerFromCurve(const std::vector<DetPoint>& curve) {
  PVT_CHECK(!curve.empty(), "eer: empty DET table");
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const double d = curve[i].frr - curve[i].far;
    if (d < 0.0) continue;
    if (d == 0.0) return curve[i].frr;
    if (i == 0) return 0.5 * (curve[0].frr + curve[0].far);
    const DetPoint& a = curve[i - 1];
    const DetPoint& b = curve[i];
    const double da = a.frr - a.far;
    const double u = -da / (d - da);
    return a.far + u * (b.far - a.far);
  }
  // Unreachable for a complete table: the +inf row has FAR = 0.
  return curve.back().frr;
}

double Eer(const std::vector<ScoredTrial>& trials) { return EerFromCurve(DetCurve(trials)); }

double DetectionCost(double frr, double far, double alpha) { return frr + alpha * far; }

MinCost MinCd(const std::vector<ScoredTrial>& trials, double alpha) {
  const std::vector<DetPoint> curve = DetCurve(trials);
  MinCost best;
  best.min_cd = kInf;
  for (const auto& p : curve) {
    const double cd = DetectionCost(p.frr, p.far, alpha);
    if (cd < best.min_cd) {
      best.min_cd = cd;
      best.threshold = p.threshold;
    }
  }
  return best;
}

CostReport BuildCostReport(const std::vector<ScoredTrial>& trials, double alpha) {
  CostReport r;
  r.alpha = alpha;
  const std::vector<DetPoint> curve = DetCurve(trials);
  r.min_cd = kInf;
  for (const auto& p : curve) {
    const double cd = DetectionCost(p.frr, p.far, alpha);
    r.table.push_back({p.threshold, p.far, p.frr, cd});
    if (cd < r.min_cd) {
      r.min_cd = cd;
      r.threshold = p.threshold;
    }
  }
  r.eer = EerFromCurve(curve);
  for (const auto& t : trials) (t.trial.target ? r.n_target : r.n_nontarget)++;
  return r;
}

std::string CostReport::ToJson() const {
  nlohmann::json j;
  j["alpha"] = alpha;
  j["min_cd"] = min_cd;
  j["threshold"] = ThresholdJson(threshold);
  j["eer"] = eer;
  j["n_target"] = n_target;
  j["n_nontarget"] = n_nontarget;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : table) {
    rows.push_back({{"threshold", ThresholdJson(row.threshold)},
                    {"far", row.far},
                    {"frr", row.frr},
                    {"cd", row.cd}});
  }
  j["table"] = std::move(rows);
  return j.dump(2);
}

double TransferCost(const std::vector<ScoredTrial>& trials, double threshold, double alpha) {
  const ErrorRates r = FarFrr(trials, threshold);
  return DetectionCost(r.frr, r.far, alpha);
}

double ThresholdTransfer(const CostReport& dev, const std::vector<ScoredTrial>& eval) {
  return TransferCost(eval, dev.threshold, dev.alpha);
}

double Rtf(double processing_seconds, double audio_seconds) {
  PVT_CHECK(audio_seconds > 0.0, "rtf: audio duration must be > 0");
  PVT_CHECK(processing_seconds >= 0.0, "rtf: processing time must be >= 0");
  return processing_seconds / audio_seconds;
}

double SvNormalizedRtf(double sv_processing_seconds, double total_eval_audio_seconds) {
  PVT_CHECK(total_eval_audio_seconds > 0.0, "sv rtf: evaluation set duration must be > 0");
  return Rtf(sv_processing_seconds, total_eval_audio_seconds);
}

// ------------------------------------------------------------------ files --

std::vector<Trial> ReadTrials(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trials file " + path);
  std::vector<Trial> trials;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream is(line);
    Trial t;
    std::string label, extra;
    if (!(is >> t.enroll_speaker_id)) continue;
    if (!(is >> t.test_utt_id >> label) || (is >> extra)) {
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": expected 'enroll_speaker test_utt label'");
    }
    if (label == "target") {
      t.target = true;
    } else if (label != "nontarget") {
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": label must be target or nontarget, got " + label);
    }
    trials.push_back(std::move(t));
  }
  return trials;
}

void WriteTrials(const std::string& path, const std::vector<Trial>& trials) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trials file " + path);
  for (const auto& t : trials) {
    out << t.enroll_speaker_id << ' ' << t.test_utt_id << ' '
        << (t.target ? "target" : "nontarget") << '\n';
  }
}

std::string FormatScoreLine(const ScoredTrial& t) {
  return t.trial.enroll_speaker_id + " " + t.trial.test_utt_id + " " +
         (t.sv_score ? FormatDouble(*t.sv_score) : std::string("none"));
}

void WriteScores(const std::string& path, const std::vector<ScoredTrial>& trials) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write scores file " + path);
  for (const auto& t : trials) out << FormatScoreLine(t) << '\n';
}

std::vector<ScoredTrial> ReadScores(const std::string& path, const std::vector<Trial>& trials) {
  std::map<std::pair<std::string, std::string>, bool> labels;
  for (const auto& t : trials) labels[{t.enroll_speaker_id, t.test_utt_id}] = t.target;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scores file " + path);
  std::vector<ScoredTrial> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream is(line);
    ScoredTrial s;
    std::string score;
    if (!(is >> s.trial.enroll_speaker_id)) continue;
    if (!(is >> s.trial.test_utt_id >> score)) {
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": expected 'enroll_speaker test_utt score'");
    }
    const auto it = labels.find({s.trial.enroll_speaker_id, s.trial.test_utt_id});
    if (it == labels.end()) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": trial " +
                            s.trial.enroll_speaker_id + " " + s.trial.test_utt_id +
                            " is not in the trial list");
    }
    s.trial.target = it->second;
    if (score != "none") {
      try {
        std::size_t used = 0;
        s.sv_score = std::stod(score, &used);
        if (used != score.size()) throw std::invalid_argument(score);
      } catch (const std::exception&) {
        throw ValidationError(path + ":" + std::to_string(lineno) + ": bad score '" + score + "'");
      }
      s.kws_fired = true;
    }
    out.push_back(std::move(s));
  }
  return out;
}

void WriteDetCsv(const std::string& path, const std::vector<DetPoint>& curve) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "threshold,far,frr\n";
  for (const auto& p : curve) {
    out << FormatDouble(p.threshold) << ',' << FormatDouble(p.far) << ',' << FormatDouble(p.frr)
        << '\n';
  }
}

}  // namespace pvt
