#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mmlda/array2d.hpp"
#include "mmlda/corpus.hpp"
#include "mmlda/hierarchy.hpp"

namespace mmlda {

// Samples corpora from the two-layer generative process with known
// parameters and labels, providing ground truth for recovery and
// prediction experiments.

struct GenParams {
  HierarchySpec spec;              // true latent structure (top_k, concepts, K per concept)
  std::vector<double> top_prior;   // top-category distribution, length spec.top_k
  std::vector<int> top_counts;     // exact composition; empty means sample from top_prior
  // concept id -> top_k x K^C rows P(concept category | top category)
  std::map<std::string, Array2D<double>> mapping;
  // modality id -> K^C x W rows, K^C of the owning concept
  std::map<std::string, Array2D<double>> phi;
  std::map<std::string, int> tokens_per_doc;
  int docs = 0;
  std::vector<std::string> labels;  // top category index -> label

  void validate() const;  // throws ValidationError
};

struct GroundTruth {
  std::vector<int> top_category;  // per document
  std::map<std::string, std::vector<int>> concept_category;
  GenParams params;
};

// Near-block-diagonal parameters: each category keeps 1 - concentration of
// its mass on a private feature block, spilling the rest uniformly (with a
// seeded jitter) over the remainder; concept mappings are near-identity.
// Requires 0 < concentration <= 1 and every dimension >= its concept's K.
GenParams make_separable_params(const HierarchySpec& spec, const std::map<std::string, int>& dims,
                                const std::map<std::string, int>& tokens_per_doc, int docs,
                                double concentration, std::uint64_t seed);

// Desk-scale default mirroring the reference shape: 60 documents, four top
// categories sized (8, 26, 18, 6), physiology modalities eda/rri (dim 128),
// vision (dim 256), word (dim 512). docs other than 60 scale the sizes.
GenParams default_gen_params(int docs = 60, double concentration = 0.05, std::uint64_t seed = 1);

// Complementary-signal variant: eda rows depend only on the high bit of the
// interoception category and rri rows only on the low bit, so either
// physiology modality alone identifies two categories and both together
// identify four.
GenParams make_complementary_params(int docs, double concentration, std::uint64_t seed);

std::pair<Corpus, GroundTruth> sample_corpus(const GenParams& params, std::uint64_t seed);

void save_gen_params(const GenParams& params, const std::string& path);
GenParams load_gen_params(const std::string& path);
void save_ground_truth(const GroundTruth& truth, const std::string& path);
GroundTruth load_ground_truth(const std::string& path);

}  // namespace mmlda
