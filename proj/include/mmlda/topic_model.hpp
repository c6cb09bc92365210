#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mmlda/array2d.hpp"
#include "mmlda/corpus.hpp"
#include "mmlda/rng.hpp"

namespace mmlda {

// Collapsed-Gibbs engine for multimodal LDA. A single modality gives plain
// LDA; every modality of a document shares one category distribution.

struct ModelConfig {
  int K = 1;
  double alpha = 1.0;
  std::map<std::string, double> beta;  // per modality id
  int sweeps = 500;
  int burn_in = 100;
  std::uint64_t seed = 0;
  // optional early stop: fraction of tokens changing assignment per sweep
  // stays below the threshold for `patience` consecutive sweeps
  bool early_stop = false;
  double early_stop_threshold = 0.01;
  int early_stop_patience = 10;

  double beta_for(const std::string& modality) const;
  void validate(const std::vector<ModalitySpec>& specs) const;  // throws ConfigError
};

// Count-vector corpus flattened to per-token feature lists. Token order is
// (document, modality, sparse-entry, repetition) and fixes the Gibbs scan
// order.
struct TokenizedCorpus {
  std::vector<ModalitySpec> specs;
  std::vector<std::string> doc_ids;
  std::vector<std::vector<std::vector<int>>> tokens;  // [doc][modality][instance] -> feature
  std::vector<int> doc_totals;

  int docs() const { return static_cast<int>(doc_ids.size()); }
  int n_modalities() const { return static_cast<int>(specs.size()); }
  long long total_tokens() const;

  static TokenizedCorpus from(const Corpus& corpus);
};

struct TopicState {
  std::vector<std::vector<std::vector<int>>> z;  // parallel to TokenizedCorpus::tokens
  Array2D<int> n_doc;                            // docs x K
  std::vector<Array2D<int>> n_feat;              // per modality: W x K
  std::vector<std::vector<int>> n_cat;           // per modality: K

  // verifies the count tables against a rebuild from assignments;
  // throws InternalError on any mismatch
  void check_consistent(const TokenizedCorpus& tc, int K) const;
};

// Per-document distribution over K categories multiplied into every token
// conditional of that document. Empty means uniform (no bias).
using BiasField = Array2D<double>;

struct FittedModel {
  ModelConfig config;
  std::vector<ModalitySpec> modalities;
  std::vector<std::string> doc_ids;
  Array2D<double> theta;              // docs x K
  std::vector<Array2D<double>> phi;   // per modality: K x W
  TopicState state;                   // empty for models loaded from disk

  int modality_index(const std::string& id) const;
  int doc_index(const std::string& id) const;  // -1 if unknown
};

// --- training ---------------------------------------------------------

TopicState init_assignments(const TokenizedCorpus& tc, const ModelConfig& config, Rng& rng);
TopicState init_assignments(const Corpus& corpus, const ModelConfig& config);

// One full resampling pass over every token; returns the number of tokens
// whose assignment changed.
long long gibbs_sweep(TopicState& state, const TokenizedCorpus& tc, const ModelConfig& config,
                      const BiasField* bias, Rng& rng);

Array2D<double> estimate_theta(const TokenizedCorpus& tc, const ModelConfig& config,
                               const TopicState& state);
std::vector<Array2D<double>> estimate_phi(const TokenizedCorpus& tc, const ModelConfig& config,
                                          const TopicState& state);

FittedModel fit(const TokenizedCorpus& tc, const ModelConfig& config,
                const BiasField* bias = nullptr);
FittedModel fit(const Corpus& corpus, const ModelConfig& config, const BiasField* bias = nullptr);

// --- evaluation / inference ------------------------------------------

double log_likelihood(const FittedModel& model, const Corpus& corpus);

struct InferOptions {
  int sweeps = 200;
  int burn_in = 50;
};

// Held-out category posterior with phi fixed; documents with no tokens get
// the uniform distribution.
std::vector<double> infer_new(const FittedModel& model, const Document& observed,
                              const InferOptions& opt, std::uint64_t seed);
std::vector<double> infer_new(const FittedModel& model, const Document& observed);

// argmax of infer_new, ties toward the lowest index; seeded from the model
// seed and the document id
int classify(const FittedModel& model, const Document& observed);

// distribution over the target modality's features given the other
// modalities (target counts in `observed`, if any, are ignored)
std::vector<double> predict_modality(const FittedModel& model, const Document& observed,
                                     const std::string& target);
std::vector<double> predict_modality(const FittedModel& model, const Document& observed,
                                     const std::string& target, const InferOptions& opt,
                                     std::uint64_t seed);

// Batch held-out inference, one posterior row per document. OpenMP-parallel
// across documents; per-document seeds derive from (seed, document id) so
// the result is independent of scheduling.
Array2D<double> infer_many(const FittedModel& model, const Corpus& corpus,
                           const InferOptions& opt, std::uint64_t seed);

struct GridRow {
  int k;
  double loglik;
};

struct GridResult {
  int best_k = 0;  // argmax log-likelihood, ties toward the lowest K
  std::vector<GridRow> table;
};

// Trains one model per K in [k_min, k_max] (seed derived per K). When
// `heldout` is given the score is held-out likelihood via infer_new instead
// of training likelihood.
GridResult grid_search_k(const Corpus& corpus, int k_min, int k_max, const ModelConfig& base,
                         const Corpus* heldout = nullptr);

// --- serialization ----------------------------------------------------

// config + theta + phi + seed; Gibbs state is not persisted
void save_model(const FittedModel& model, const std::string& path);
FittedModel load_model(const std::string& path);

// stream seed used by classify/predict for a given document
std::uint64_t doc_stream_seed(const ModelConfig& config, const std::string& doc_id);

}  // namespace mmlda
