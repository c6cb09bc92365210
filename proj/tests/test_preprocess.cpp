#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "mmlda/errors.hpp"
#include "mmlda/preprocess.hpp"
#include "mmlda/rng.hpp"

using namespace mmlda;
namespace fs = std::filesystem;

static fs::path work_dir() {
  fs::path p = fs::temp_directory_path() / "mmlda_test_pre";
  fs::create_directories(p);
  return p;
}

TEST_CASE("signal validation") {
  Signal s{{1.0, 2.0}, 10.0};
  CHECK_NOTHROW(s.validate());
  s.rate = 0.0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s.rate = 10.0;
  s.samples[1] = std::nan("");
  CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("high-pass decays a constant geometrically") {
  Signal in;
  in.rate = 10.0;
  in.samples.assign(50, 2.0);
  Signal out = highpass(in, 1.0);
  const double rc = 1.0 / (2.0 * std::numbers::pi * 1.0);
  const double a = rc / (rc + 0.1);
  // constant input: y[n] = x[0] * a^n in closed form
  for (size_t i = 0; i < out.samples.size(); ++i)
    CHECK(out.samples[i] ==
          doctest::Approx(2.0 * std::pow(a, static_cast<double>(i))).epsilon(1e-12));
  CHECK(out.rate == in.rate);
}

TEST_CASE("high-pass passes a fast sinusoid nearly unchanged") {
  Signal in;
  in.rate = 100.0;
  for (int i = 0; i < 1000; ++i)
    in.samples.push_back(std::sin(2.0 * std::numbers::pi * 5.0 * i / 100.0));
  Signal out = highpass(in, 0.5);
  double peak = 0.0;
  for (size_t i = 500; i < 1000; ++i) peak = std::max(peak, std::abs(out.samples[i]));
  CHECK(peak > 0.95);
  CHECK(peak < 1.01);
}

TEST_CASE("high-pass cutoff bounds") {
  Signal in{{0.0, 1.0, 0.0}, 10.0};
  CHECK_THROWS_AS(highpass(in, 0.0), ConfigError);
  CHECK_THROWS_AS(highpass(in, 5.0), ConfigError);  // at Nyquist
  CHECK_NOTHROW(highpass(in, 4.9));
}

TEST_CASE("moving average matches hand-computed shrinking windows") {
  Signal in{{1.0, 2.0, 3.0, 4.0, 10.0}, 1.0};

  Signal odd = moving_average(in, 3.0);
  CHECK(odd.samples[0] == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(odd.samples[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(odd.samples[2] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(odd.samples[3] == doctest::Approx(17.0 / 3.0).epsilon(1e-12));
  CHECK(odd.samples[4] == doctest::Approx(7.0).epsilon(1e-12));

  // even width leans one sample to the right
  Signal even = moving_average(in, 4.0);
  CHECK(even.samples[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(even.samples[1] == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(even.samples[2] == doctest::Approx(4.75).epsilon(1e-12));
  CHECK(even.samples[3] == doctest::Approx(17.0 / 3.0).epsilon(1e-12));
  CHECK(even.samples[4] == doctest::Approx(7.0).epsilon(1e-12));

  Signal flat{{3.0, 3.0, 3.0, 3.0}, 1.0};
  for (double v : moving_average(flat, 3.0).samples) CHECK(v == 3.0);

  CHECK_THROWS_AS(moving_average(in, 0.4), ConfigError);  // rounds to zero samples
}

TEST_CASE("standardize hits exact moments and is idempotent") {
  Signal in{{0.0, 2.0}, 1.0};
  Signal out = standardize(in);
  CHECK(out.samples[0] == -1.0);
  CHECK(out.samples[1] == 1.0);

  Signal longer{{1.0, 2.0, 3.0, 4.0}, 1.0};
  Signal z = standardize(longer);
  double mean = 0.0, var = 0.0;
  for (double v : z.samples) mean += v;
  mean /= 4.0;
  for (double v : z.samples) var += (v - mean) * (v - mean);
  var /= 4.0;
  CHECK(mean == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(var == doctest::Approx(1.0).epsilon(1e-12));

  Signal zz = standardize(z);
  for (size_t i = 0; i < 4; ++i) CHECK(zz.samples[i] == doctest::Approx(z.samples[i]).epsilon(1e-12));

  CHECK_THROWS_AS(standardize(Signal{{5.0}, 1.0}), ValidationError);
  CHECK_THROWS_AS(standardize(Signal{{5.0, 5.0, 5.0}, 1.0}), ValidationError);
}

TEST_CASE("peak finding on a sinusoid locates every cycle") {
  Signal in;
  in.rate = 100.0;
  for (int i = 0; i < 6000; ++i)
    in.samples.push_back(std::sin(2.0 * std::numbers::pi * i / 100.0));
  std::vector<int> peaks = find_peaks(in, 0.4, 0.5);
  REQUIRE(peaks.size() == 60);
  for (size_t k = 0; k < peaks.size(); ++k)
    CHECK(std::abs(peaks[k] - (25 + 100 * static_cast<int>(k))) <= 1);
}

TEST_CASE("peak finding details: plateaus, ramps, thinning, prominence") {
  Signal plateau{{0.0, 1.0, 1.0, 0.0}, 1.0};
  CHECK(find_peaks(plateau, 1.0, 0.5) == std::vector<int>{1});

  Signal ramp{{0.0, 1.0, 2.0, 3.0, 4.0}, 1.0};
  CHECK(find_peaks(ramp, 1.0, 0.0).empty());

  Signal pair{{0.0, 3.0, 0.0, 2.0, 0.0}, 1.0};
  CHECK(find_peaks(pair, 2.5, 0.0) == std::vector<int>{1});  // taller one wins
  CHECK(find_peaks(pair, 1.5, 0.0) == std::vector<int>{1, 3});

  Signal shoulder{{0.0, 5.0, 4.0, 4.5, 0.0}, 1.0};
  CHECK(find_peaks(shoulder, 1.0, 1.0) == std::vector<int>{1});  // shoulder prominence is 0.5
  CHECK(find_peaks(shoulder, 1.0, 0.4) == std::vector<int>{1, 3});

  CHECK_THROWS_AS(find_peaks(plateau, 0.0, 0.5), ConfigError);
  CHECK_THROWS_AS(find_peaks(plateau, 1.0, -0.1), ConfigError);
  CHECK_THROWS_AS(find_peaks(Signal{{0.0, 1.0}, 1.0}, 1.0, 0.0), ValidationError);
}

TEST_CASE("beat intervals recover a jittered pulse train") {
  const double beats[] = {0.5, 1.4, 2.5, 3.3, 4.5, 5.2, 6.4};
  Signal in;
  in.rate = 50.0;
  for (int i = 0; i <= 350; ++i) {
    const double t = i / 50.0;
    double v = 0.0;
    for (double b : beats) v += std::exp(-std::pow((t - b) / 0.03, 2.0));
    in.samples.push_back(v);
  }
  auto rri = detect_rri(in);
  REQUIRE(rri.size() == 6);
  for (size_t k = 0; k < rri.size(); ++k) {
    CHECK(std::abs(rri[k].time - beats[k + 1]) <= 2.0 / 50.0);
    CHECK(std::abs(rri[k].interval - (beats[k + 1] - beats[k])) <= 2.0 / 50.0);
  }

  Signal flat{{0.0, 0.0, 0.0, 0.0, 0.0}, 50.0};
  CHECK(detect_rri(flat).empty());
}

TEST_CASE("akima spline reproduces lines, quadratics, and knots") {
  std::vector<double> t = {0.0, 1.0, 2.0, 3.0, 4.0, 5.0};
  std::vector<double> lin;
  for (double x : t) lin.push_back(2.0 * x + 1.0);
  AkimaSpline line(t, lin);
  for (double x : {0.5, 2.7, 4.9, 5.5, -0.5})
    CHECK(line(x) == doctest::Approx(2.0 * x + 1.0).epsilon(1e-12));

  std::vector<double> tq = {0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  std::vector<double> quad;
  for (double x : tq) quad.push_back(x * x);
  AkimaSpline parab(tq, quad);
  // uniform spacing gives symmetric slope weights, so knot slopes are exact
  // and the cubic pieces reproduce the quadratic everywhere
  for (double x = 0.0; x <= 6.0; x += 0.01)
    CHECK(std::abs(parab(x) - x * x) < 1e-9);

  std::vector<double> tk = {0.0, 0.3, 1.1, 2.0, 2.2, 3.7, 4.0};
  std::vector<double> yk = {1.0, -2.0, 0.5, 4.0, 4.0, -1.0, 2.5};
  AkimaSpline knots(tk, yk);
  for (size_t i = 0; i < tk.size(); ++i)
    CHECK(knots(tk[i]) == doctest::Approx(yk[i]).epsilon(1e-12));

  CHECK_THROWS_AS(AkimaSpline({0, 1, 2, 3}, {0, 0, 0, 0}), ValidationError);
  CHECK_THROWS_AS(AkimaSpline({0, 1, 1, 2, 3}, {0, 0, 0, 0, 0}), ValidationError);
  CHECK_THROWS_AS(AkimaSpline({0, 1, 2, 3, 4}, {0, 0, 0}), ValidationError);
}

TEST_CASE("akima resampling spans the input on a uniform grid") {
  std::vector<double> t = {0.0, 1.0, 2.0, 3.0, 4.0, 5.0};
  std::vector<double> v;
  for (double x : t) v.push_back(2.0 * x + 1.0);
  Signal s = akima_resample(t, v, 10.0);
  CHECK(s.rate == 10.0);
  REQUIRE(s.samples.size() == 51);
  for (size_t i = 0; i < s.samples.size(); ++i)
    CHECK(s.samples[i] == doctest::Approx(2.0 * (0.1 * static_cast<double>(i)) + 1.0).epsilon(1e-9));

  std::vector<double> t2 = {2.0, 3.0, 4.0, 5.0, 6.0};
  Signal s2 = akima_resample(t2, {1.0, 1.0, 1.0, 1.0, 1.0}, 10.0);
  CHECK(s2.samples.size() == 41);
  CHECK(s2.samples[0] == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(akima_resample(t, v, 0.0), ConfigError);
}

TEST_CASE("window extraction count and content") {
  Signal in{{0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0}, 1.0};
  auto w42 = make_windows(in, 4, 2);
  REQUIRE(w42.size() == 4);
  CHECK(w42[1] == std::vector<double>{2.0, 3.0, 4.0, 5.0});
  CHECK(w42[3] == std::vector<double>{6.0, 7.0, 8.0, 9.0});
  CHECK(make_windows(in, 4, 3).size() == 3);
  CHECK(make_windows(in, 10, 1).size() == 1);
  CHECK(make_windows(Signal{{1.0, 2.0}, 1.0}, 4, 1).empty());
  CHECK_THROWS_AS(make_windows(in, 0, 1), ConfigError);
  CHECK_THROWS_AS(make_windows(in, 2, 0), ConfigError);
}

TEST_CASE("codebook fitting recovers exactly repeated windows") {
  std::vector<std::vector<double>> windows;
  const std::vector<std::vector<double>> points = {{0.0, 0.0}, {5.0, 5.0}, {-3.0, 4.0}};
  for (int rep = 0; rep < 10; ++rep)
    for (const auto& p : points) windows.push_back(p);

  Codebook cb = fit_codebook(windows, 3, 10, 1);
  CHECK(cb.window == 2);
  CHECK(cb.stride == 1);  // window/2 default
  for (const auto& p : points) {
    double best = 1e300;
    for (int j = 0; j < 3; ++j) {
      double d = 0.0;
      for (int k = 0; k < 2; ++k) d += std::pow(cb.centers(j, k) - p[static_cast<size_t>(k)], 2.0);
      best = std::min(best, d);
    }
    CHECK(best < 1e-18);
  }
  CHECK(codebook_distortion(cb, windows) == 0.0);
}

TEST_CASE("codebook fitting: single center, monotone distortion, determinism") {
  Rng rng(9);
  std::vector<std::vector<double>> windows;
  for (int i = 0; i < 30; ++i)
    windows.push_back({rng.uniform01(), rng.uniform01(), rng.uniform01()});

  Codebook one = fit_codebook(windows, 1, 5, 3);
  for (int k = 0; k < 3; ++k) {
    double mean = 0.0;
    for (const auto& w : windows) mean += w[static_cast<size_t>(k)];
    mean /= 30.0;
    CHECK(one.centers(0, k) == doctest::Approx(mean).epsilon(1e-12));
  }

  std::vector<double> wcss;
  Codebook cb = fit_codebook(windows, 4, 15, 3, 2, &wcss);
  CHECK(cb.stride == 2);
  REQUIRE(!wcss.empty());
  for (size_t i = 1; i < wcss.size(); ++i) CHECK(wcss[i] <= wcss[i - 1] + 1e-9);

  Codebook again = fit_codebook(windows, 4, 15, 3, 2, nullptr);
  CHECK(again.centers == cb.centers);

  CHECK_THROWS_AS(fit_codebook(windows, 0, 5, 1), ConfigError);
  CHECK_THROWS_AS(fit_codebook(windows, 4, 0, 1), ConfigError);
  CHECK_THROWS_AS(fit_codebook(windows, 31, 5, 1), ValidationError);
  std::vector<std::vector<double>> ragged = {{1.0, 2.0}, {1.0}};
  CHECK_THROWS_AS(fit_codebook(ragged, 1, 5, 1), ValidationError);
}

TEST_CASE("nearest-center coding matches a brute-force scan") {
  Codebook cb;
  cb.centers = Array2D<double>(4, 3);
  cb.window = 3;
  cb.stride = 1;
  Rng rng(17);
  for (int j = 0; j < 4; ++j)
    for (int k = 0; k < 3; ++k) cb.centers(j, k) = rng.uniform01();
  std::vector<std::vector<double>> windows;
  for (int i = 0; i < 20; ++i)
    windows.push_back({rng.uniform01(), rng.uniform01(), rng.uniform01()});

  std::vector<int> codes = encode_codes(windows, cb);
  REQUIRE(codes.size() == windows.size());
  for (size_t i = 0; i < windows.size(); ++i) {
    int best = 0;
    double best_d = 1e300;
    for (int j = 0; j < 4; ++j) {
      double d = 0.0;
      for (int k = 0; k < 3; ++k) d += std::pow(windows[i][static_cast<size_t>(k)] - cb.centers(j, k), 2.0);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    CHECK(codes[i] == best);
    CHECK(nearest_center(cb, windows[i].data()) == best);
  }

  Codebook tied;
  tied.centers = Array2D<double>(2, 1, 0.0);  // identical centers
  tied.window = 1;
  tied.stride = 1;
  double v = 0.3;
  CHECK(nearest_center(tied, &v) == 0);
}

TEST_CASE("count encoding histograms sliding-window codes") {
  Codebook cb;
  cb.centers = Array2D<double>(2, 2);
  cb.centers(0, 0) = 1.0;
  cb.centers(0, 1) = 1.0;
  cb.centers(1, 0) = 5.0;
  cb.centers(1, 1) = 5.0;
  cb.window = 2;
  cb.stride = 2;

  Signal in{{1.0, 1.0, 1.0, 1.0, 5.0, 5.0}, 1.0};
  CHECK(encode_counts(in, cb) == SparseCounts{{0, 2}, {1, 1}});

  // a trailing sample that does not fill a window changes nothing
  Signal longer{{1.0, 1.0, 1.0, 1.0, 5.0, 5.0, 9.0}, 1.0};
  CHECK(encode_counts(longer, cb) == SparseCounts{{0, 2}, {1, 1}});

  CHECK_THROWS_AS(encode_counts(Signal{{1.0}, 1.0}, cb), ValidationError);
}

TEST_CASE("bag of words counts in-vocabulary tokens and reports the rest") {
  std::vector<std::string> vocab = {"cup", "pen", "book"};
  BowResult r = bag_of_words({"pen", "cup", "pen", "lamp", "book", "pen"}, vocab);
  CHECK(r.counts == SparseCounts{{0, 1}, {1, 3}, {2, 1}});
  CHECK(r.dropped == 1);
  long long kept = total_count(r.counts);
  CHECK(kept + r.dropped == 6);

  BowResult empty = bag_of_words({}, vocab);
  CHECK(empty.counts.empty());
  CHECK(empty.dropped == 0);
}

TEST_CASE("dense featurization rounds proportional pseudo-counts") {
  CHECK(featurize_dense({0.0, 2.0, 0.0, 1.0}, 9) == SparseCounts{{1, 6}, {3, 3}});
  CHECK(featurize_dense({0.0, 0.0, 4.2}, 5) == SparseCounts{{2, 5}});
  // exact halves round away from zero
  CHECK(featurize_dense({1.0, 1.0, 1.0, 1.0}, 10) ==
        SparseCounts{{0, 3}, {1, 3}, {2, 3}, {3, 3}});

  CHECK_THROWS_AS(featurize_dense({1.0}, 0), ConfigError);
  CHECK_THROWS_AS(featurize_dense({1.0, -0.5}, 5), ValidationError);
  CHECK_THROWS_AS(featurize_dense({1.0, std::nan("")}, 5), ValidationError);
  CHECK_THROWS_AS(featurize_dense({0.0, 0.0}, 5), ValidationError);
}

TEST_CASE("signal file round-trips and parses both layouts") {
  fs::path dir = work_dir();
  Signal s{{0.25, -1.5, 3.141592653589793, 1e-7}, 128.0};
  fs::path p1 = dir / "sig1.txt";
  fs::path p2 = dir / "sig2.txt";
  save_signal(s, p1.string());
  Signal back = load_signal(p1.string());
  CHECK(back.rate == s.rate);
  CHECK(back.samples == s.samples);
  save_signal(back, p2.string());
  std::ifstream f1(p1), f2(p2);
  std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);

  fs::path cols = dir / "cols.txt";
  std::ofstream(cols) << "0 1.5\n0.1 2.5\n0.2 3.5\n";
  Signal two = load_signal(cols.string());
  CHECK(two.rate == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(two.samples == std::vector<double>{1.5, 2.5, 3.5});

  fs::path uneven = dir / "uneven.txt";
  std::ofstream(uneven) << "0 1\n0.1 2\n0.3 3\n";
  CHECK_THROWS_AS(load_signal(uneven.string()), FormatError);

  fs::path empty = dir / "empty.txt";
  std::ofstream(empty) << "";
  CHECK_THROWS_AS(load_signal(empty.string()), FormatError);

  fs::path junk = dir / "junk.txt";
  std::ofstream(junk) << "rate abc\n1\n";
  CHECK_THROWS_AS(load_signal(junk.string()), FormatError);

  fs::path words = dir / "words.txt";
  std::ofstream(words) << "one two\n";
  CHECK_THROWS_AS(load_signal(words.string()), FormatError);

  CHECK_THROWS_AS(load_signal((dir / "absent.txt").string()), IoError);
}

TEST_CASE("point file loads as parallel vectors") {
  fs::path p = work_dir() / "points.txt";
  std::ofstream(p) << "0.5 1.0\n0.9 2.0\n2.0 -1.0\n";
  auto [times, values] = load_points(p.string());
  CHECK(times == std::vector<double>{0.5, 0.9, 2.0});
  CHECK(values == std::vector<double>{1.0, 2.0, -1.0});
}

TEST_CASE("codebook file round-trip and error paths") {
  fs::path dir = work_dir();
  Codebook cb;
  cb.centers = Array2D<double>(2, 3);
  double vals[2][3] = {{0.5, -1.25, 3.75}, {1e-3, 2.0, -7.5}};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) cb.centers(i, j) = vals[i][j];
  cb.window = 3;
  cb.stride = 2;
  fs::path p = dir / "cb.txt";
  save_codebook(cb, p.string());
  Codebook back = load_codebook(p.string());
  CHECK(back.centers == cb.centers);
  CHECK(back.window == 3);
  CHECK(back.stride == 2);

  fs::path bad = dir / "cb_bad.txt";
  std::ofstream(bad) << "notacodebook 1 1 1\n0\n";
  CHECK_THROWS_AS(load_codebook(bad.string()), FormatError);

  fs::path trunc = dir / "cb_trunc.txt";
  std::ofstream(trunc) << "codebook 2 3 1\n1 2 3\n4 5\n";
  CHECK_THROWS_AS(load_codebook(trunc.string()), FormatError);

  CHECK_THROWS_AS(load_codebook((dir / "absent_cb.txt").string()), IoError);
}
