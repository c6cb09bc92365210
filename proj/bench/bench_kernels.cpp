// Times each OpenMP kernel against its serial reference and checks that the
// outputs are identical. Run with --quick for a smaller configuration.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "mmlda/eval.hpp"
#include "mmlda/preprocess.hpp"
#include "mmlda/reference.hpp"
#include "mmlda/rng.hpp"
#include "mmlda/synth.hpp"
#include "mmlda/topic_model.hpp"

using namespace mmlda;
using Clock = std::chrono::steady_clock;

namespace {

template <typename F>
double best_ms(F&& fn, int reps) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    fn();
    const auto t1 = Clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void row(const char* kernel, const std::string& size, double serial_ms, double parallel_ms,
         bool equal) {
  std::printf("%-14s %-18s %10.2f %10.2f %8.2fx   %s\n", kernel, size.c_str(), serial_ms,
              parallel_ms, serial_ms / parallel_ms, equal ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  bool quick = false;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--quick") == 0) quick = true;

  const int docs = quick ? 60 : 300;
  const int trials = quick ? 500 : 5000;
  const int n_windows = quick ? 2000 : 20000;
  const int reps = quick ? 2 : 3;

  std::printf("%-14s %-18s %10s %10s %9s   %s\n", "kernel", "size", "serial", "parallel",
              "speedup", "check");

  GenParams params = default_gen_params(docs);
  auto [corpus, truth] = sample_corpus(params, 7);
  ModelConfig cfg;
  cfg.K = 4;
  cfg.alpha = 1.0;
  for (const auto& s : corpus.specs) cfg.beta[s.id] = 1.0;
  cfg.sweeps = quick ? 50 : 200;
  cfg.burn_in = cfg.sweeps / 5;
  cfg.seed = 11;
  FittedModel model = fit(corpus, cfg);

  {
    double serial = 0.0, parallel = 0.0;
    double s_ms = best_ms([&] { serial = ref::log_likelihood(model, corpus); }, reps);
    double p_ms = best_ms([&] { parallel = log_likelihood(model, corpus); }, reps);
    row("log_likelihood", std::to_string(docs) + " docs", s_ms, p_ms, serial == parallel);
  }

  {
    InferOptions opt;
    opt.sweeps = quick ? 50 : 100;
    opt.burn_in = opt.sweeps / 4;
    Array2D<double> serial(1, 1), parallel(1, 1);
    double s_ms = best_ms([&] { serial = ref::infer_many(model, corpus, opt, 3); }, reps);
    double p_ms = best_ms([&] { parallel = infer_many(model, corpus, opt, 3); }, reps);
    row("infer_many", std::to_string(docs) + " docs", s_ms, p_ms, serial == parallel);
  }

  {
    Rng rng(5);
    Signal noise;
    noise.rate = 4.0;
    for (int i = 0; i < n_windows; ++i) noise.samples.push_back(rng.uniform01() * 2.0 - 1.0);
    std::vector<std::vector<double>> windows = make_windows(noise, 4, 2);
    Codebook cb = fit_codebook(windows, 128, 10, 17);
    std::vector<int> serial, parallel;
    double s_ms = best_ms([&] { serial = ref::encode_codes(windows, cb); }, reps);
    double p_ms = best_ms([&] { parallel = encode_codes(windows, cb); }, reps);
    row("encode_codes", std::to_string(windows.size()) + " windows", s_ms, p_ms,
        serial == parallel);
  }

  {
    std::vector<int> reference;
    for (int i = 0; i < 60; ++i) reference.push_back(i % 4);
    double serial = 0.0, parallel = 0.0;
    double s_ms = best_ms([&] { serial = ref::chance_rand(reference, 4, trials, 23); }, reps);
    double p_ms = best_ms([&] { parallel = chance_rand(reference, 4, trials, 23); }, reps);
    row("chance_rand", std::to_string(trials) + " trials", s_ms, p_ms, serial == parallel);
  }

  return 0;
}
