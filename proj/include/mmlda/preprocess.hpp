#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mmlda/array2d.hpp"
#include "mmlda/corpus.hpp"

namespace mmlda {

// Converts raw modality data (waveforms, dense feature vectors, token lists)
// into the discrete count vectors the models consume. All operations are pure.

struct Signal {
  std::vector<double> samples;
  double rate = 1.0;  // samples per second

  void validate() const;  // rate > 0, all samples finite
};

// First-order (single-pole RC) high-pass. Requires cutoff < rate/2.
Signal highpass(const Signal& in, double cutoff_hz);

// Centered moving mean; edges shrink to the available samples.
// Requires window_seconds * rate >= 1.
Signal moving_average(const Signal& in, double window_seconds);

// Zero mean, unit population standard deviation. Requires length >= 2 and
// nonzero variance.
Signal standardize(const Signal& in);

// Local maxima with the given prominence, thinned greedily by height so no
// two survivors are closer than min_distance. Returns sample indices in order.
std::vector<int> find_peaks(const Signal& in, double min_distance_seconds,
                            double min_prominence);

struct RriPoint {
  double time;      // time of the closing peak, seconds
  double interval;  // distance to the previous peak, seconds
};

// Peak-to-peak intervals of a heartbeat-like waveform. Defaults are
// calibrated for standardized input. Fewer than two peaks yields an empty
// list. Requires length >= 3.
std::vector<RriPoint> detect_rri(const Signal& waveform, double min_distance_seconds = 0.4,
                                 double min_prominence = 0.3);

// Akima piecewise cubic through (times, values). Requires >= 5 points with
// strictly increasing times. Reproduces straight lines exactly and passes
// through every knot.
class AkimaSpline {
 public:
  AkimaSpline(std::vector<double> times, std::vector<double> values);
  double operator()(double t) const;  // end segments extrapolate

 private:
  std::vector<double> t_, y_, s_;  // knots and Akima slopes
};

// Evaluates the Akima interpolant on a uniform grid at target_rate spanning
// [times.front(), times.back()].
Signal akima_resample(const std::vector<double>& times, const std::vector<double>& values,
                      double target_rate);

struct Codebook {
  Array2D<double> centers;  // C x D
  int window = 0;           // D, samples per window
  int stride = 0;           // samples between window starts
};

// Sliding windows over the samples; count = floor((len - window)/stride) + 1.
std::vector<std::vector<double>> make_windows(const Signal& in, int window, int stride);

// k-means with seeded k-means++ initialization. Within-cluster sum of
// squares is non-increasing per Lloyd iteration (appended to *distortion
// when given). stride 0 means window/2, minimum 1.
Codebook fit_codebook(const std::vector<std::vector<double>>& windows, int codebook_size,
                      int iterations, std::uint64_t seed, int stride = 0,
                      std::vector<double>* distortion = nullptr);

// Mean squared distance of each window to its nearest center.
double codebook_distortion(const Codebook& cb, const std::vector<std::vector<double>>& windows);

int nearest_center(const Codebook& cb, const double* v);  // lowest index on ties

// Nearest-center code of every window, parallel across windows.
std::vector<int> encode_codes(const std::vector<std::vector<double>>& windows,
                              const Codebook& cb);

// Histogram of nearest-center codes over sliding windows. Requires
// signal length >= window.
SparseCounts encode_counts(const Signal& in, const Codebook& cb);

struct BowResult {
  SparseCounts counts;
  int dropped = 0;  // out-of-vocabulary tokens
};

BowResult bag_of_words(const std::vector<std::string>& tokens,
                       const std::vector<std::string>& vocab);

// Nonnegative vector to pseudo-counts: round(total * v / sum(v)).
// Requires all entries >= 0 with positive sum.
SparseCounts featurize_dense(const std::vector<double>& v, int total_pseudo_count);

// Raw-signal text file: either "rate <hz>" followed by one value per line,
// or two columns (time value) with uniform spacing.
Signal load_signal(const std::string& path);
void save_signal(const Signal& s, const std::string& path);

// Two-column (time value) file, spacing unconstrained; feed to akima_resample.
std::pair<std::vector<double>, std::vector<double>> load_points(const std::string& path);

void save_codebook(const Codebook& cb, const std::string& path);
Codebook load_codebook(const std::string& path);

}  // namespace mmlda
