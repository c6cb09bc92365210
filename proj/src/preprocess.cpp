#include "mmlda/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "mmlda/errors.hpp"
#include "mmlda/rng.hpp"

namespace mmlda {

void Signal::validate() const {
  if (!(rate > 0.0) || !std::isfinite(rate))
    throw ValidationError("signal: rate must be positive and finite");
  for (size_t i = 0; i < samples.size(); ++i)
    if (!std::isfinite(samples[i]))
      throw ValidationError(strfmt("signal: non-finite sample at index %zu", i));
}

Signal highpass(const Signal& in, double cutoff_hz) {
  in.validate();
  if (!(cutoff_hz > 0.0)) throw ConfigError("highpass: cutoff must be > 0");
  if (cutoff_hz >= in.rate / 2.0)
    throw ConfigError(strfmt("highpass: cutoff %g Hz reaches Nyquist of %g Hz rate",
                             cutoff_hz, in.rate));
  const double rc = 1.0 / (2.0 * std::numbers::pi * cutoff_hz);
  const double dt = 1.0 / in.rate;
  const double a = rc / (rc + dt);
  Signal out;
  out.rate = in.rate;
  out.samples.resize(in.samples.size());
  if (in.samples.empty()) return out;
  out.samples[0] = in.samples[0];
  for (size_t i = 1; i < in.samples.size(); ++i)
    out.samples[i] = a * (out.samples[i - 1] + in.samples[i] - in.samples[i - 1]);
  return out;
}

Signal moving_average(const Signal& in, double window_seconds) {
  in.validate();
  const int w = static_cast<int>(std::llround(window_seconds * in.rate));
  if (w < 1) throw ConfigError("moving_average: window shorter than one sample");
  const int n = static_cast<int>(in.samples.size());
  Signal out;
  out.rate = in.rate;
  out.samples.resize(in.samples.size());
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - (w - 1) / 2);
    const int hi = std::min(n - 1, i + w / 2);
    double sum = 0.0;
    for (int j = lo; j <= hi; ++j) sum += in.samples[j];
    out.samples[static_cast<size_t>(i)] = sum / (hi - lo + 1);
  }
  return out;
}

Signal standardize(const Signal& in) {
  in.validate();
  const size_t n = in.samples.size();
  if (n < 2) throw ValidationError("standardize: need at least 2 samples");
  double mean = 0.0;
  for (double v : in.samples) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : in.samples) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double sd = std::sqrt(var);
  if (sd < 1e-12 * std::max(1.0, std::abs(mean)))
    throw ValidationError("standardize: zero variance");
  Signal out;
  out.rate = in.rate;
  out.samples.resize(n);
  for (size_t i = 0; i < n; ++i) out.samples[i] = (in.samples[i] - mean) / sd;
  return out;
}

// prominence: drop from the peak to the higher of the two bases, where each
// base is the minimum between the peak and the nearest higher sample (or edge)
static double prominence_at(const std::vector<double>& x, int p) {
  const int n = static_cast<int>(x.size());
  double left_min = x[static_cast<size_t>(p)];
  for (int i = p - 1; i >= 0; --i) {
    if (x[static_cast<size_t>(i)] > x[static_cast<size_t>(p)]) break;
    left_min = std::min(left_min, x[static_cast<size_t>(i)]);
  }
  double right_min = x[static_cast<size_t>(p)];
  for (int i = p + 1; i < n; ++i) {
    if (x[static_cast<size_t>(i)] > x[static_cast<size_t>(p)]) break;
    right_min = std::min(right_min, x[static_cast<size_t>(i)]);
  }
  return x[static_cast<size_t>(p)] - std::max(left_min, right_min);
}

std::vector<int> find_peaks(const Signal& in, double min_distance_seconds,
                            double min_prominence) {
  in.validate();
  if (!(min_distance_seconds > 0.0)) throw ConfigError("find_peaks: min distance must be > 0");
  if (min_prominence < 0.0) throw ConfigError("find_peaks: prominence must be >= 0");
  const auto& x = in.samples;
  const int n = static_cast<int>(x.size());
  if (n < 3) throw ValidationError("find_peaks: need at least 3 samples");

  std::vector<int> cand;
  for (int i = 1; i < n - 1;) {
    if (x[static_cast<size_t>(i)] <= x[static_cast<size_t>(i - 1)]) {
      ++i;
      continue;
    }
    int j = i;  // plateau end
    while (j + 1 < n && x[static_cast<size_t>(j + 1)] == x[static_cast<size_t>(i)]) ++j;
    if (j + 1 < n && x[static_cast<size_t>(j + 1)] < x[static_cast<size_t>(i)] &&
        prominence_at(x, i) >= min_prominence)
      cand.push_back(i);
    i = j + 1;
  }

  const int min_gap = std::max(1, static_cast<int>(std::llround(min_distance_seconds * in.rate)));
  std::vector<int> order(cand.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return x[static_cast<size_t>(cand[static_cast<size_t>(a)])] >
           x[static_cast<size_t>(cand[static_cast<size_t>(b)])];
  });
  std::vector<char> removed(cand.size(), 0);
  std::vector<int> kept;
  for (int oi : order) {
    if (removed[static_cast<size_t>(oi)]) continue;
    const int p = cand[static_cast<size_t>(oi)];
    kept.push_back(p);
    for (size_t c = 0; c < cand.size(); ++c)
      if (!removed[c] && cand[c] != p && std::abs(cand[c] - p) < min_gap) removed[c] = 1;
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

std::vector<RriPoint> detect_rri(const Signal& waveform, double min_distance_seconds,
                                 double min_prominence) {
  std::vector<int> peaks = find_peaks(waveform, min_distance_seconds, min_prominence);
  std::vector<RriPoint> out;
  for (size_t i = 1; i < peaks.size(); ++i) {
    const double t0 = peaks[i - 1] / waveform.rate;
    const double t1 = peaks[i] / waveform.rate;
    out.push_back({t1, t1 - t0});
  }
  return out;
}

AkimaSpline::AkimaSpline(std::vector<double> times, std::vector<double> values)
    : t_(std::move(times)), y_(std::move(values)) {
  const size_t n = t_.size();
  if (n != y_.size()) throw ValidationError("akima: times and values differ in length");
  if (n < 5) throw ValidationError("akima: need at least 5 points");
  for (size_t i = 0; i + 1 < n; ++i)
    if (!(t_[i] < t_[i + 1])) throw ValidationError("akima: times must be strictly increasing");

  // segment slopes padded with two quadratic-extrapolated entries per side
  std::vector<double> m(n + 3);
  for (size_t i = 0; i + 1 < n; ++i) m[i + 2] = (y_[i + 1] - y_[i]) / (t_[i + 1] - t_[i]);
  m[1] = 2.0 * m[2] - m[3];
  m[0] = 2.0 * m[1] - m[2];
  m[n + 1] = 2.0 * m[n] - m[n - 1];
  m[n + 2] = 2.0 * m[n + 1] - m[n];

  s_.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const double w1 = std::abs(m[i + 3] - m[i + 2]);
    const double w2 = std::abs(m[i + 1] - m[i]);
    if (w1 + w2 == 0.0)
      s_[i] = 0.5 * (m[i + 1] + m[i + 2]);
    else
      s_[i] = (w1 * m[i + 1] + w2 * m[i + 2]) / (w1 + w2);
  }
}

double AkimaSpline::operator()(double t) const {
  const size_t n = t_.size();
  size_t i = std::upper_bound(t_.begin(), t_.end(), t) - t_.begin();
  i = (i == 0) ? 0 : std::min(i - 1, n - 2);
  const double h = t_[i + 1] - t_[i];
  const double mi = (y_[i + 1] - y_[i]) / h;
  const double c2 = (3.0 * mi - 2.0 * s_[i] - s_[i + 1]) / h;
  const double c3 = (s_[i] + s_[i + 1] - 2.0 * mi) / (h * h);
  const double d = t - t_[i];
  return y_[i] + d * (s_[i] + d * (c2 + d * c3));
}

Signal akima_resample(const std::vector<double>& times, const std::vector<double>& values,
                      double target_rate) {
  if (!(target_rate > 0.0)) throw ConfigError("akima_resample: rate must be > 0");
  AkimaSpline spline(times, values);
  const double t0 = times.front();
  const double span = times.back() - t0;
  const size_t count = static_cast<size_t>(std::floor(span * target_rate + 1e-9)) + 1;
  Signal out;
  out.rate = target_rate;
  out.samples.resize(count);
  for (size_t i = 0; i < count; ++i)
    out.samples[i] = spline(t0 + static_cast<double>(i) / target_rate);
  return out;
}

std::vector<std::vector<double>> make_windows(const Signal& in, int window, int stride) {
  in.validate();
  if (window < 1 || stride < 1) throw ConfigError("make_windows: window and stride must be >= 1");
  const int n = static_cast<int>(in.samples.size());
  std::vector<std::vector<double>> out;
  for (int start = 0; start + window <= n; start += stride)
    out.emplace_back(in.samples.begin() + start, in.samples.begin() + start + window);
  return out;
}

static double sq_dist(const double* a, const double* b, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

// assignment step; parallel slots, deterministic for any thread count
static void assign_nearest(const std::vector<std::vector<double>>& windows,
                           const Array2D<double>& centers, std::vector<int>& assign) {
  const int n = static_cast<int>(windows.size());
  const int c = centers.rows();
  const int d = centers.cols();
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    int best = 0;
    double best_d = sq_dist(windows[static_cast<size_t>(i)].data(), centers.row(0), d);
    for (int j = 1; j < c; ++j) {
      const double dj = sq_dist(windows[static_cast<size_t>(i)].data(), centers.row(j), d);
      if (dj < best_d) {
        best_d = dj;
        best = j;
      }
    }
    assign[static_cast<size_t>(i)] = best;
  }
}

static double wcss(const std::vector<std::vector<double>>& windows, const Array2D<double>& centers,
                   const std::vector<int>& assign) {
  double total = 0.0;
  for (size_t i = 0; i < windows.size(); ++i)
    total += sq_dist(windows[i].data(), centers.row(assign[i]), centers.cols());
  return total;
}

Codebook fit_codebook(const std::vector<std::vector<double>>& windows, int codebook_size,
                      int iterations, std::uint64_t seed, int stride,
                      std::vector<double>* distortion) {
  const int n = static_cast<int>(windows.size());
  const int c = codebook_size;
  if (c < 1) throw ConfigError("fit_codebook: size must be >= 1");
  if (iterations < 1) throw ConfigError("fit_codebook: iterations must be >= 1");
  if (n < c) throw ValidationError(strfmt("fit_codebook: %d windows < %d centers", n, c));
  const int d = static_cast<int>(windows[0].size());
  for (const auto& w : windows)
    if (static_cast<int>(w.size()) != d)
      throw ValidationError("fit_codebook: windows differ in dimension");

  Rng rng(seed);
  Array2D<double> centers(c, d, 0.0);

  // k-means++ seeding
  std::vector<double> min_d(static_cast<size_t>(n), std::numeric_limits<double>::infinity());
  int first = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
  std::copy_n(windows[static_cast<size_t>(first)].data(), d, centers.row(0));
  for (int j = 1; j < c; ++j) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const double dj = sq_dist(windows[static_cast<size_t>(i)].data(), centers.row(j - 1), d);
      min_d[static_cast<size_t>(i)] = std::min(min_d[static_cast<size_t>(i)], dj);
      total += min_d[static_cast<size_t>(i)];
    }
    int pick;
    if (total > 0.0)
      pick = rng.categorical(min_d.data(), n);
    else
      pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    std::copy_n(windows[static_cast<size_t>(pick)].data(), d, centers.row(j));
  }

  std::vector<int> assign(static_cast<size_t>(n), -1);
  std::vector<int> prev;
  for (int it = 0; it < iterations; ++it) {
    assign_nearest(windows, centers, assign);
    if (distortion) distortion->push_back(wcss(windows, centers, assign));
    if (assign == prev) break;
    prev = assign;
    std::vector<double> sum(static_cast<size_t>(c) * static_cast<size_t>(d), 0.0);
    std::vector<int> count(static_cast<size_t>(c), 0);
    for (int i = 0; i < n; ++i) {
      const int a = assign[static_cast<size_t>(i)];
      ++count[static_cast<size_t>(a)];
      const double* w = windows[static_cast<size_t>(i)].data();
      double* row = sum.data() + static_cast<size_t>(a) * static_cast<size_t>(d);
      for (int k = 0; k < d; ++k) row[k] += w[k];
    }
    for (int j = 0; j < c; ++j) {
      if (count[static_cast<size_t>(j)] == 0) continue;  // empty cluster keeps its center
      const double* row = sum.data() + static_cast<size_t>(j) * static_cast<size_t>(d);
      for (int k = 0; k < d; ++k) centers(j, k) = row[k] / count[static_cast<size_t>(j)];
    }
  }

  Codebook cb;
  cb.centers = std::move(centers);
  cb.window = d;
  cb.stride = stride > 0 ? stride : std::max(1, d / 2);
  return cb;
}

double codebook_distortion(const Codebook& cb, const std::vector<std::vector<double>>& windows) {
  if (windows.empty()) return 0.0;
  std::vector<int> assign(windows.size(), -1);
  assign_nearest(windows, cb.centers, assign);
  return wcss(windows, cb.centers, assign) / static_cast<double>(windows.size());
}

int nearest_center(const Codebook& cb, const double* v) {
  int best = 0;
  double best_d = sq_dist(v, cb.centers.row(0), cb.centers.cols());
  for (int j = 1; j < cb.centers.rows(); ++j) {
    const double dj = sq_dist(v, cb.centers.row(j), cb.centers.cols());
    if (dj < best_d) {
      best_d = dj;
      best = j;
    }
  }
  return best;
}

std::vector<int> encode_codes(const std::vector<std::vector<double>>& windows,
                              const Codebook& cb) {
  std::vector<int> codes(windows.size(), -1);
  if (!windows.empty()) assign_nearest(windows, cb.centers, codes);
  return codes;
}

SparseCounts encode_counts(const Signal& in, const Codebook& cb) {
  if (static_cast<int>(in.samples.size()) < cb.window)
    throw ValidationError(strfmt("encode_counts: %zu samples < window %d", in.samples.size(),
                                 cb.window));
  std::vector<std::vector<double>> windows = make_windows(in, cb.window, cb.stride);
  std::vector<int> hist(static_cast<size_t>(cb.centers.rows()), 0);
  for (int code : encode_codes(windows, cb)) ++hist[static_cast<size_t>(code)];
  SparseCounts counts;
  for (size_t i = 0; i < hist.size(); ++i)
    if (hist[i] > 0) counts.emplace_back(static_cast<int>(i), hist[i]);
  return counts;
}

BowResult bag_of_words(const std::vector<std::string>& tokens,
                       const std::vector<std::string>& vocab) {
  std::map<std::string, int> index;
  for (size_t i = 0; i < vocab.size(); ++i) index.emplace(vocab[i], static_cast<int>(i));
  std::map<int, int> hist;
  BowResult out;
  for (const auto& tok : tokens) {
    auto it = index.find(tok);
    if (it == index.end())
      ++out.dropped;
    else
      ++hist[it->second];
  }
  for (const auto& [w, n] : hist) out.counts.emplace_back(w, n);
  return out;
}

SparseCounts featurize_dense(const std::vector<double>& v, int total_pseudo_count) {
  if (total_pseudo_count < 1) throw ConfigError("featurize_dense: total must be >= 1");
  double sum = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0) || !std::isfinite(v[i]))
      throw ValidationError(strfmt("featurize_dense: entry %zu negative or non-finite", i));
    sum += v[i];
  }
  if (!(sum > 0.0)) throw ValidationError("featurize_dense: all entries zero");
  SparseCounts counts;
  for (size_t i = 0; i < v.size(); ++i) {
    const int n = static_cast<int>(std::llround(total_pseudo_count * v[i] / sum));
    if (n > 0) counts.emplace_back(static_cast<int>(i), n);
  }
  return counts;
}

// ---- files ------------------------------------------------------------

static std::vector<std::string> content_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open signal file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    const size_t start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    lines.push_back(line.substr(start));
  }
  return lines;
}

static std::vector<double> parse_row(const std::string& line, const std::string& path,
                                     size_t want) {
  std::istringstream ss(line);
  std::vector<double> vals;
  double v;
  while (ss >> v) vals.push_back(v);
  std::string trailing;
  if (ss.clear(), ss >> trailing)
    throw FormatError(strfmt("%s: non-numeric field '%s'", path.c_str(), trailing.c_str()));
  if (want != 0 && vals.size() != want)
    throw FormatError(strfmt("%s: expected %zu fields, got %zu in '%s'", path.c_str(), want,
                             vals.size(), line.c_str()));
  return vals;
}

Signal load_signal(const std::string& path) {
  std::vector<std::string> lines = content_lines(path);
  if (lines.empty()) throw FormatError(path + ": empty signal file");
  Signal out;
  if (lines[0].rfind("rate", 0) == 0) {
    std::istringstream ss(lines[0]);
    std::string kw;
    ss >> kw >> out.rate;
    if (!ss || !(out.rate > 0.0)) throw FormatError(path + ": bad rate header");
    for (size_t i = 1; i < lines.size(); ++i)
      out.samples.push_back(parse_row(lines[i], path, 1)[0]);
  } else {
    auto [times, values] = load_points(path);
    if (times.size() < 2) throw FormatError(path + ": need at least 2 rows");
    const double dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
    if (!(dt > 0.0)) throw FormatError(path + ": times must increase");
    for (size_t i = 1; i < times.size(); ++i) {
      const double step = times[i] - times[i - 1];
      if (std::abs(step - dt) > 1e-6 * dt)
        throw FormatError(strfmt("%s: non-uniform spacing at row %zu; resample first",
                                 path.c_str(), i));
    }
    out.rate = 1.0 / dt;
    out.samples = std::move(values);
  }
  out.validate();
  return out;
}

void save_signal(const Signal& s, const std::string& path) {
  s.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  char buf[64];
  std::snprintf(buf, sizeof buf, "rate %.17g\n", s.rate);
  out << buf;
  for (double v : s.samples) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    out << buf;
  }
  if (!out) throw IoError("write failed: " + path);
}

std::pair<std::vector<double>, std::vector<double>> load_points(const std::string& path) {
  std::vector<std::string> lines = content_lines(path);
  std::vector<double> times, values;
  for (const auto& line : lines) {
    std::vector<double> row = parse_row(line, path, 2);
    times.push_back(row[0]);
    values.push_back(row[1]);
  }
  return {std::move(times), std::move(values)};
}

void save_codebook(const Codebook& cb, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "codebook " << cb.centers.rows() << " " << cb.centers.cols() << " " << cb.stride << "\n";
  char buf[64];
  for (int i = 0; i < cb.centers.rows(); ++i) {
    for (int j = 0; j < cb.centers.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", cb.centers(i, j));
      out << (j ? " " : "") << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

Codebook load_codebook(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open codebook file: " + path);
  std::string kw;
  int c = 0, d = 0, stride = 0;
  in >> kw >> c >> d >> stride;
  if (!in || kw != "codebook" || c < 1 || d < 1 || stride < 1)
    throw FormatError(path + ": bad codebook header");
  Codebook cb;
  cb.centers = Array2D<double>(c, d, 0.0);
  cb.window = d;
  cb.stride = stride;
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < d; ++j)
      if (!(in >> cb.centers(i, j)))
        throw FormatError(strfmt("%s: truncated at row %d", path.c_str(), i));
  return cb;
}

}  // namespace mmlda
