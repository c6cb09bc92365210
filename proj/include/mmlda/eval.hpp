#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmlda/corpus.hpp"
#include "mmlda/hierarchy.hpp"

namespace mmlda {

// Metrics and baselines: Rand index against label partitions, KL divergence
// of cross-modal predictions, and chance-level estimators.

// Fraction of item pairs on which two partitions agree. Requires equal
// lengths >= 2. Invariant under relabeling of either argument.
double rand_index(const std::vector<int>& a, const std::vector<int>& b);

// Dense integer codes assigned by first appearance.
std::vector<int> categorize(const std::vector<std::string>& labels);

// Monte Carlo mean Rand index between the reference and uniform-random
// K-category assignments.
double chance_rand(const std::vector<int>& reference, int k, int trials, std::uint64_t seed);

// Same, with random partitions matching the reference's cluster sizes.
double chance_rand_sized(const std::vector<int>& reference, int trials, std::uint64_t seed);

// KL(normalized actual || predicted), natural log, 0 log 0 = 0. A predicted
// zero on the support yields infinity (impossible with smoothed models).
double kl_divergence(const SparseCounts& actual, const std::vector<double>& predicted);

// kl_divergence against the uniform distribution over the dimension.
double uniform_kl(const SparseCounts& actual, int dimension);

struct Restricted {
  SparseCounts actual;            // indices remapped to lexicon positions
  std::vector<double> predicted;  // renormalized over the lexicon
  bool excluded = false;          // actual carries no mass on the lexicon
};

Restricted restrict_lexicon(const SparseCounts& actual, const std::vector<double>& predicted,
                            const Lexicon& lexicon);

struct KlRow {
  std::string doc_id;
  std::string source;  // observed concept id
  std::string target;  // predicted modality id
  double kl_predicted = 0.0;
  double kl_uniform = 0.0;
  double kl_predicted_lex = 0.0;  // valid only when lex_applies && !lex_excluded
  double kl_uniform_lex = 0.0;
  bool lex_applies = false;
  bool lex_excluded = false;
};

struct TargetSummary {
  std::string source;
  std::string target;
  int rows = 0;
  double mean_predicted = 0.0;
  double sd_predicted = 0.0;
  double mean_uniform = 0.0;
  double sd_uniform = 0.0;
  int lex_rows = 0;  // lexicon rows contributing to the lex means
  double mean_predicted_lex = 0.0;
  double sd_predicted_lex = 0.0;
  double mean_uniform_lex = 0.0;
  double sd_uniform_lex = 0.0;
};

struct EvalReport {
  double rand = -1.0;         // readout-concept classify vs labels; -1 if no labels
  double chance = -1.0;       // uniform-assignment chance baseline for the same partition
  double chance_sized = -1.0; // size-matched variant
  std::vector<KlRow> rows;
  std::vector<TargetSummary> summary;
};

// Cross-modal prediction quality on a test corpus: one row per (document,
// source concept, target modality) where the source is observed, the target
// lies outside the source concept, and the document has target counts.
// Rand figures use the first lower concept's classify output against the
// corpus labels.
EvalReport evaluate_predictions(const HierarchyModel& model, const Corpus& test,
                                const Lexicon* lexicon = nullptr);

void save_report(const EvalReport& report, const std::string& rows_path,
                 const std::string& summary_path);

}  // namespace mmlda
