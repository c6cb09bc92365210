#pragma once

#include <cstdint>
#include <vector>

#include "mmlda/corpus.hpp"
#include "mmlda/preprocess.hpp"
#include "mmlda/topic_model.hpp"

namespace mmlda::ref {

// Serial reference implementations of the parallel kernels. Outputs are
// bit-identical to the parallel versions for any thread count; kept for
// testing and benchmarking.

double log_likelihood(const FittedModel& model, const Corpus& corpus);

Array2D<double> infer_many(const FittedModel& model, const Corpus& corpus,
                           const InferOptions& opt, std::uint64_t seed);

std::vector<int> encode_codes(const std::vector<std::vector<double>>& windows,
                              const Codebook& cb);

double chance_rand(const std::vector<int>& reference, int k, int trials, std::uint64_t seed);

}  // namespace mmlda::ref
