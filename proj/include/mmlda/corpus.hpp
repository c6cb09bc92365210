#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mmlda/errors.hpp"

namespace mmlda {

// (feature index, count) pairs; counts are nonnegative integers
using SparseCounts = std::vector<std::pair<int, int>>;

inline long long total_count(const SparseCounts& c) {
  long long t = 0;
  for (auto& [w, n] : c) t += n;
  return t;
}

struct ModalitySpec {
  std::string id;
  int dimension = 0;  // vocabulary size of the modality

  friend bool operator==(const ModalitySpec&, const ModalitySpec&) = default;
};

// One data item. A modality absent from `counts` contributes no tokens.
struct Document {
  std::string id;
  std::map<std::string, SparseCounts> counts;

  friend bool operator==(const Document&, const Document&) = default;
};

struct Corpus {
  std::vector<ModalitySpec> specs;
  std::vector<Document> documents;
  std::map<std::string, std::string> labels;  // document id -> category label
  std::map<std::string, std::vector<std::string>> vocab;  // optional, per modality

  int size() const { return static_cast<int>(documents.size()); }

  // index into specs, or -1
  int modality_index(const std::string& id) const;
  const ModalitySpec& modality(const std::string& id) const;  // throws ConfigError

  // throws ValidationError naming the offending document/modality
  void validate() const;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

// Feature subset of one modality, used to restrict word predictions.
struct Lexicon {
  std::string modality;
  std::vector<int> indices;  // sorted, unique, all < modality dimension
};

Corpus load_corpus(const std::string& path);
void save_corpus(const Corpus& corpus, const std::string& path);

// One entry per line: either a feature index or a word string resolved
// against the corpus vocab table for `modality`.
Lexicon load_lexicon(const std::string& path, const Corpus& corpus, const std::string& modality);

// Deterministic per-label split; first element of each pair is the train
// count, second the test count, and they must sum to the label's size.
std::pair<Corpus, Corpus> split_stratified(
    const Corpus& corpus,
    const std::map<std::string, std::pair<int, int>>& per_category_counts,
    std::uint64_t seed);

// Sub-corpus containing only the named modalities (documents keep their ids
// and labels; counts of other modalities are dropped).
Corpus restrict_modalities(const Corpus& corpus, const std::vector<std::string>& modality_ids);

// Copy of `doc` without the target modality's counts.
Document strip_modality(const Document& doc, const std::string& modality_id);

}  // namespace mmlda
