#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mmlda/hierarchy.hpp"

namespace mmlda {

// Config-driven experiment harness: generate -> preprocess -> train ->
// predict -> evaluate -> report. One invocation is one independent run;
// everything is deterministic given config + seed.

struct SynthSource {
  std::string kind = "default";  // "default" | "complementary" | "params"
  int docs = 60;
  double concentration = 0.05;
  std::uint64_t params_seed = 1;
  std::string params_path;  // kind == "params"
};

struct PreprocessSource {
  std::string signal_path;
  std::string kind = "eda";   // "eda" | "rri"
  std::string codebook_path;  // reused when set and present, else fitted
  std::string modality = "eda";
  int codebook_size = 128;
  int iterations = 50;
  double window_seconds = 1.0;
  double highpass_hz = 0.05;
  double smooth_seconds = 1.0;
  double resample_hz = 4.0;  // rri interval stream rate
};

struct ExperimentConfig {
  std::string corpus_path;  // exactly one of corpus_path / synth
  bool has_synth = false;
  SynthSource synth;
  HierarchySpec hierarchy;
  bool has_split = false;
  std::map<std::string, std::pair<int, int>> split;  // label -> (train, test)
  std::string lexicon_path;
  std::string lexicon_modality = "word";
  std::string out_dir;
  std::uint64_t seed = 1;
  int runs = 10;  // compare repetitions
  bool has_preprocess = false;
  PreprocessSource preprocess;

  void validate() const;  // throws ConfigError; checks referenced inputs exist
  static ExperimentConfig load(const std::string& path);
};

// Model-side defaults: concepts I{eda,rri}/V{vision}/W{word} with K 4/4/34,
// top K 28.
HierarchySpec default_hierarchy_spec();

// Each command writes its artifacts under config.out_dir and prints a short
// summary line; errors propagate as exceptions.
void cmd_synth(const ExperimentConfig& config);
void cmd_preprocess(const ExperimentConfig& config);
void cmd_train(const ExperimentConfig& config);
void cmd_predict(const ExperimentConfig& config, const std::string& source_concept,
                 const std::string& target);
void cmd_eval(const ExperimentConfig& config);
void cmd_compare(const ExperimentConfig& config);
void cmd_report(const ExperimentConfig& config);

}  // namespace mmlda
