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

// Writes the synthetic multi-speaker keyword corpus used by the tests and
// the demo walkthrough in the README.

#include <iostream>

#include "CLI11.hpp"
#include "pvt/synthetic.h"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic keyword corpus", "pvt-synth"};
  std::string out;
  pvt::SyntheticConfig cfg;
  pvt::SyntheticLayout layout;
  app.add_option("--out", out, "output directory")->required();
  app.add_option("--speakers", cfg.n_speakers, "number of speakers")->check(CLI::Range(2, 1000));
  app.add_option("--seed", cfg.seed, "random seed");
  app.add_option("--train-pos", layout.train_pos, "keyword utterances per speaker for training");
  app.add_option("--train-neg", layout.train_neg, "other utterances per speaker for training");
  CLI11_PARSE(app, argc, argv);
  try {
    const pvt::SyntheticCorpusFiles f = pvt::GenerateSyntheticCorpus(out, cfg, layout);
    std::cout << f.train_manifest << "\n" << f.enroll_manifest << "\n" << f.dev_manifest << "\n"
              << f.eval_manifest << "\n" << f.dev_trials << "\n" << f.eval_trials << "\n";
  } catch (const std::exception& e) {
    std::cerr << "pvt-synth: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
