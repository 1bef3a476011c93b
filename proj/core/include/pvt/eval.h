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

#ifndef PVT_EVAL_H_
#define PVT_EVAL_H_

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace pvt {

inline constexpr double kDefaultCostAlpha = 19.0;

struct Trial {
  std::string enroll_speaker_id;
  std::string test_utt_id;
  bool target = false;
};

// sv_score is present iff the keyword detector fired.
struct ScoredTrial {
  Trial trial;
  bool kws_fired = false;
  std::optional<double> sv_score;
};

struct ErrorRates {
  double far = 0.0;
  double frr = 0.0;
};

// A trial is accepted at threshold delta iff the detector fired and
// sv_score >= delta. FRR = rejected targets / targets, FAR = accepted
// nontargets / nontargets. Needs both classes.
ErrorRates FarFrr(const std::vector<ScoredTrial>& trials, double delta);

struct DetPoint {
  double threshold = 0.0;
  double far = 0.0;
  double frr = 0.0;
};

// Thresholds -inf, every distinct score ascending, +inf.
std::vector<DetPoint> DetCurve(const std::vector<ScoredTrial>& trials);

// Crossing of FAR and FRR along the DET table. When FRR - FAR changes sign
// between adjacent rows the crossing is linearly interpolated; an exact tie
// returns the common rate.
double Eer(const std::vector<ScoredTrial>& trials);
double EerFromCurve(const std::vector<DetPoint>& curve);

// FRR + alpha * FAR.
double DetectionCost(double frr, double far, double alpha = kDefaultCostAlpha);

struct MinCost {
  double min_cd = 0.0;
  double threshold = 0.0;  // smallest minimizing threshold
};

MinCost MinCd(const std::vector<ScoredTrial>& trials, double alpha = kDefaultCostAlpha);

struct CostRow {
  double threshold = 0.0;
  double far = 0.0;
  double frr = 0.0;
  double cd = 0.0;
};

struct CostReport {
  double alpha = kDefaultCostAlpha;
  std::vector<CostRow> table;
  double min_cd = 0.0;
  double threshold = 0.0;
  double eer = 0.0;
  int64_t n_target = 0;
  int64_t n_nontarget = 0;

  std::string ToJson() const;
};

CostReport BuildCostReport(const std::vector<ScoredTrial>& trials,
                           double alpha = kDefaultCostAlpha);

// Actual cost of applying a threshold tuned elsewhere.
double TransferCost(const std::vector<ScoredTrial>& trials, double threshold,
                    double alpha = kDefaultCostAlpha);
double ThresholdTransfer(const CostReport& dev, const std::vector<ScoredTrial>& eval);

double Rtf(double processing_seconds, double audio_seconds);
// SV processing time over the duration of the whole evaluation set (not only
// the triggered segments).
double SvNormalizedRtf(double sv_processing_seconds, double total_eval_audio_seconds);

// "enroll_speaker test_utt label" per line; label is target or nontarget.
std::vector<Trial> ReadTrials(const std::string& path);
void WriteTrials(const std::string& path, const std::vector<Trial>& trials);

// "enroll_speaker test_utt score" per line; score "none" when not fired.
std::string FormatScoreLine(const ScoredTrial& t);
void WriteScores(const std::string& path, const std::vector<ScoredTrial>& trials);
// Labels come from the trial list, matched on (enroll, test).
std::vector<ScoredTrial> ReadScores(const std::string& path, const std::vector<Trial>& trials);

void WriteDetCsv(const std::string& path, const std::vector<DetPoint>& curve);

}  // namespace pvt

#endif  // PVT_EVAL_H_
