#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "isac/detector.hpp"

namespace {

using namespace isac;

DetectionGrid blank_grid(int nn, int nt, int np) {
  DetectionGrid g;
  for (int i = 0; i < nn; ++i) g.doppler.push_back(i);
  for (int i = 0; i < nt; ++i) g.delay.push_back(1e-9 * i);
  for (int i = 0; i < np; ++i) g.angle_sin.push_back(-0.5 + 0.01 * i);
  g.stat.assign(g.cells(), 0.0);
  g.amplitude.assign(g.cells(), Complex{});
  return g;
}

void fill_exponential(DetectionGrid& g, Rng& rng) {
  std::exponential_distribution<double> e(1.0);
  for (double& v : g.stat) v = e(rng);
}

// P(l > alpha X_(k)) for an exponential cell over R exponential references.
double closed_form_pfa(double alpha, int reference, int k) {
  double p = 1.0;
  for (int i = 0; i < k; ++i) p *= (reference - i) / (reference - i + alpha);
  return p;
}

double closed_form_alpha(double p_fa, int reference, int k) {
  double lo = 0, hi = 1;
  while (closed_form_pfa(hi, reference, k) > p_fa) hi *= 2;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (closed_form_pfa(mid, reference, k) > p_fa ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Brute-force threshold of one cell, written from the definition.
double oracle_threshold(const DetectionGrid& g, const CfarConfig& c, int in, int it, int ip) {
  std::vector<double> ref;
  for (int p = ip - c.window[2]; p <= ip + c.window[2]; ++p)
    for (int t = it - c.window[1]; t <= it + c.window[1]; ++t)
      for (int n = in - c.window[0]; n <= in + c.window[0]; ++n) {
        if (p < 0 || t < 0 || n < 0 || p >= g.n_angle() || t >= g.n_delay() || n >= g.n_doppler())
          continue;
        if (std::abs(p - ip) <= c.guard[2] && std::abs(t - it) <= c.guard[1] &&
            std::abs(n - in) <= c.guard[0])
          continue;
        ref.push_back(g.stat[g.index(n, t, p)]);
      }
  if (ref.empty()) return std::numeric_limits<double>::infinity();
  std::sort(ref.begin(), ref.end());
  const int k = static_cast<int>(std::ceil(c.k_fraction * ref.size() - 1e-12));
  const auto it_alpha = c.edge_alpha.find(static_cast<int>(ref.size()));
  const double alpha = it_alpha == c.edge_alpha.end() ? c.alpha : it_alpha->second;
  return alpha * ref[k - 1];
}

TEST(CfarGeometry, DefaultsAndValidation) {
  CfarConfig c;
  EXPECT_EQ(c.reference_cells(), 125 - 27);
  EXPECT_EQ(c.order_index(98), 74);  // ceil(0.75 * 98)
  EXPECT_EQ(c.order_index(4), 3);
  c.guard = {2, 1, 1};
  EXPECT_THROW(c.validate(), Error);
  c = CfarConfig{};
  c.alpha = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(CfarGeometry, ReachableCountsMatchEnumeration) {
  for (CfarConfig c : {CfarConfig{}, CfarConfig{{3, 2, 1}, {1, 0, 0}}}) {
    auto g = blank_grid(2 * c.window[0] + 3, 2 * c.window[1] + 3, 2 * c.window[2] + 3);
    std::vector<int> seen;
    for (int p = 0; p < g.n_angle(); ++p)
      for (int t = 0; t < g.n_delay(); ++t)
        for (int n = 0; n < g.n_doppler(); ++n) {
          int count = 0;
          for (int pp = p - c.window[2]; pp <= p + c.window[2]; ++pp)
            for (int tt = t - c.window[1]; tt <= t + c.window[1]; ++tt)
              for (int nn = n - c.window[0]; nn <= n + c.window[0]; ++nn) {
                if (pp < 0 || tt < 0 || nn < 0 || pp >= g.n_angle() || tt >= g.n_delay() ||
                    nn >= g.n_doppler())
                  continue;
                if (std::abs(pp - p) <= c.guard[2] && std::abs(tt - t) <= c.guard[1] &&
                    std::abs(nn - n) <= c.guard[0])
                  continue;
                ++count;
              }
          seen.push_back(count);
        }
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    EXPECT_EQ(c.reachable_reference_counts(), seen);
  }
}

TEST(Cfar, ThresholdsMatchBruteForce) {
  Rng rng(1);
  auto g = blank_grid(9, 8, 7);
  fill_exponential(g, rng);
  CfarConfig c;
  c.alpha = 3.0;
  for (int r : c.reachable_reference_counts()) c.edge_alpha[r] = 2.0 + 0.01 * r;
  c.edge_alpha.erase(c.reference_cells());
  const auto th = os_cfar_thresholds(g, c);
  for (int p = 0; p < g.n_angle(); ++p)
    for (int t = 0; t < g.n_delay(); ++t)
      for (int n = 0; n < g.n_doppler(); ++n)
        EXPECT_DOUBLE_EQ(th[g.index(n, t, p)], oracle_threshold(g, c, n, t, p));
}

TEST(Cfar, DetectionsAreExactlyCellsAboveThreshold) {
  Rng rng(2);
  auto g = blank_grid(10, 9, 8);
  CfarConfig c;
  c.alpha = 1.5;
  for (int rep = 0; rep < 5; ++rep) {
    fill_exponential(g, rng);
    const auto th = os_cfar_thresholds(g, c);
    std::vector<std::size_t> expect;
    for (std::size_t k = 0; k < g.cells(); ++k)
      if (g.stat[k] > th[k]) expect.push_back(k);
    std::vector<std::size_t> got;
    for (const auto& d : os_cfar(g, c)) {
      const auto k = g.index(d.i_doppler, d.i_delay, d.i_angle);
      got.push_back(k);
      EXPECT_DOUBLE_EQ(d.threshold, th[k]);
      EXPECT_GT(d.stat, d.threshold);
    }
    std::sort(got.begin(), got.end());
    EXPECT_EQ(got, expect);
  }
}

TEST(Cfar, ConstantMapHasNoDetections) {
  auto g = blank_grid(8, 8, 8);
  std::fill(g.stat.begin(), g.stat.end(), 4.2);
  CfarConfig c;
  c.alpha = 1.0001;
  EXPECT_TRUE(os_cfar(g, c).empty());
}

TEST(Cfar, WindowLargerThanGridRejected) {
  auto g = blank_grid(4, 8, 8);
  EXPECT_THROW(os_cfar(g, CfarConfig{}), Error);
}

TEST(Cfar, StrongCellAlwaysDetected) {
  Rng cal(3);
  const CfarConfig c = calibrate_cfar(1e-4, CfarConfig{}, cal, 50000);
  const int trials = 2000;
  auto g = blank_grid(16, 17, 25);
  int found = 0;
  std::size_t others = 0;
  for (int t = 0; t < trials; ++t) {
    Rng rng(1000 + t);
    fill_exponential(g, rng);
    const std::size_t hot = g.index(7, 8, 12);
    g.stat[hot] = 1e6;
    for (const auto& d : os_cfar(g, c)) {
      if (g.index(d.i_doppler, d.i_delay, d.i_angle) == hot) {
        ++found;
      } else {
        ++others;
      }
    }
  }
  EXPECT_GE(found, 0.999 * trials);
  // Everything else is an ordinary false alarm.
  const double rate = double(others) / (double(trials) * (g.cells() - 1));
  EXPECT_GE(rate, 1e-4 / 3);
  EXPECT_LE(rate, 3e-4);
}

TEST(Calibration, MatchesClosedFormWithinTwentyPercent) {
  const CfarConfig geom;
  const int r = geom.reference_cells();
  const int k = geom.order_index(r);
  double prev = 0;
  for (double pfa : {1e-1, 1e-2, 1e-3, 1e-4}) {
    Rng rng(9);
    const auto c = calibrate_cfar(pfa, geom, rng);
    EXPECT_GT(c.alpha, prev);
    prev = c.alpha;
    EXPECT_NEAR(closed_form_pfa(c.alpha, r, k) / pfa, 1.0, 0.2) << pfa;
    EXPECT_NEAR(c.alpha / closed_form_alpha(pfa, r, k), 1.0, 0.05) << pfa;
    for (const auto& [ref, a] : c.edge_alpha) {
      EXPECT_NEAR(closed_form_pfa(a, ref, c.order_index(ref)) / pfa, 1.0, 0.2)
          << "pfa " << pfa << " R=" << ref;
    }
  }
}

TEST(Calibration, ClosedFormOracleSelfCheck) {
  // R = 1, k = 1: P(l > alpha x) = 1 / (1 + alpha).
  EXPECT_NEAR(closed_form_pfa(3.0, 1, 1), 0.25, 1e-15);
  // Monte-Carlo check of the formula at the default geometry.
  Rng rng(4);
  std::exponential_distribution<double> e(1.0);
  const double alpha = 2.0;
  int hits = 0;
  const int n = 200000;
  std::vector<double> ref(98);
  for (int t = 0; t < n; ++t) {
    for (double& v : ref) v = e(rng);
    std::nth_element(ref.begin(), ref.begin() + 73, ref.end());
    hits += e(rng) > alpha * ref[73];
  }
  const double p = closed_form_pfa(alpha, 98, 74);
  EXPECT_NEAR(hits / double(n), p, 4 * std::sqrt(p / n));
}

TEST(Calibration, HalfAtMedianNearOne) {
  CfarConfig geom;
  geom.k_fraction = 0.5;
  Rng rng(5);
  const auto c = calibrate_cfar(0.5, geom, rng);
  EXPECT_GE(c.alpha, 0.5);
  EXPECT_LE(c.alpha, 2.0);
}

TEST(Calibration, DeterministicAndValidated) {
  Rng a(17), b(17);
  EXPECT_EQ(calibrate_cfar(1e-2, CfarConfig{}, a, 20000).alpha,
            calibrate_cfar(1e-2, CfarConfig{}, b, 20000).alpha);
  Rng c(1);
  EXPECT_THROW(calibrate_cfar(0.0, CfarConfig{}, c), Error);
  EXPECT_THROW(calibrate_cfar(1.0, CfarConfig{}, c), Error);
  // A single reference cell cannot reach 1e-12 below alpha = 1e8.
  CfarConfig tiny{{1, 0, 0}, {0, 0, 0}};
  EXPECT_THROW(calibrate_cfar(1e-12, tiny, c, 1000), Error);
}

TEST(Calibration, EmpiricalRateOnExponentialMaps) {
  Rng cal(6);
  const auto c = calibrate_cfar(1e-2, CfarConfig{}, cal);
  auto g = blank_grid(16, 17, 25);
  Rng rng(7);
  std::size_t cells = 0, alarms = 0;
  while (cells < 1000000) {
    fill_exponential(g, rng);
    alarms += os_cfar(g, c).size();
    cells += g.cells();
  }
  const double rate = double(alarms) / cells;
  EXPECT_GE(rate, 1e-2 / 3);
  EXPECT_LE(rate, 3e-2);
  EXPECT_NEAR(rate, 1e-2, 1e-3);
}

}  // namespace
