#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmlda/corpus.hpp"
#include "mmlda/topic_model.hpp"

namespace mmlda {

// Two-layer composition: per-concept topic models over disjoint modality
// groups, integrated by a top model whose observations are pseudo-counts
// encoding the lower category distributions. Layers exchange per-document
// category distributions: upward after each lower Gibbs block, downward as
// a bias on the next block.

struct LowerSpec {
  std::string id;                       // concept id, e.g. "I", "V", "W"
  std::vector<std::string> modalities;  // corpus modalities owned by this concept
  int k = 1;                            // category count of the concept
};

struct HierarchySpec {
  std::vector<LowerSpec> lower;
  int top_k = 1;
  double alpha = 1.0;
  double beta = 1.0;
  int rounds = 10;
  int lower_sweeps = 100;
  int top_sweeps = 200;
  int weight = 100;  // pseudo-count budget per upward message row

  int concept_index(const std::string& id) const;              // -1 if unknown
  int concept_for_modality(const std::string& modality) const;  // -1 if unclaimed
  void validate() const;                  // shape and uniqueness, throws ConfigError
  void validate(const Corpus& corpus) const;  // additionally modality coverage
};

struct Message {
  bool upward = true;
  std::string concept_id;
  Array2D<double> rows;  // docs x K^C, each row on the simplex

  void check_simplex() const;  // throws InternalError if any row is off the simplex
};

struct RoundDiagnostics {
  int round = 0;
  double top_loglik = 0.0;
  // mean L2 change of each concept's upward message vs the previous round
  std::vector<double> message_delta;
};

struct HierarchyModel {
  HierarchySpec spec;
  std::vector<FittedModel> lower;  // aligned with spec.lower
  FittedModel top;                 // modalities are the concept ids, dimension K^C
  std::vector<RoundDiagnostics> diagnostics;
};

// Upward message: the alpha-smoothed per-document category distribution of
// the lower model's current state (its theta).
Message lower_infer(const FittedModel& lower_model, const std::string& concept_id);

// round(weight * p) pseudo-counts over the concept's category vocabulary
SparseCounts encode_upward_row(const double* p, int k, int weight);
Corpus encode_upward(const std::vector<Message>& upward, const HierarchySpec& spec,
                     const std::vector<std::string>& doc_ids);

// Downward message for each concept: rows of sum_k phi^C[k][.] * theta[j][k]
std::vector<Message> downward_messages(const FittedModel& top_model, const HierarchySpec& spec);

// Fits the top model on the encoded upward messages and returns its
// downward messages.
std::pair<FittedModel, std::vector<Message>> top_update(const std::vector<Message>& upward,
                                                        const HierarchySpec& spec,
                                                        const std::vector<std::string>& doc_ids,
                                                        std::uint64_t top_seed);

HierarchyModel train_hierarchy(const Corpus& corpus, const HierarchySpec& spec, std::uint64_t seed);

// Cross-modal prediction: observed modalities -> source concept posteriors
// -> top posterior -> target concept distribution -> target features. When
// the target's own concept is observed this reduces to predict_modality on
// that concept's model.
std::vector<double> predict_cross(const HierarchyModel& model, const Document& observed,
                                  const std::string& target);

// seed stream of one (concept, round) Gibbs block; round counts from 1 and
// the top model uses concept id "" (exposed so tests can reproduce blocks)
std::uint64_t hierarchy_seed(std::uint64_t seed, const std::string& concept_id, int round);

void save_hierarchy(const HierarchyModel& model, const std::string& path);
HierarchyModel load_hierarchy(const std::string& path);

}  // namespace mmlda
