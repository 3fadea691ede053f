#include <gtest/gtest.h>

#include <cmath>

#include "isac/tracker.hpp"

namespace {

using namespace isac;

constexpr double kC = 299792458.0;

Detection at(double x, double y, double stat) {
  Detection d;
  d.delay = 2 * std::hypot(x, y) / kC;
  d.angle = std::atan2(x, y);
  d.stat = stat;
  return d;
}

TEST(Fuse, SinglePoint) {
  const Vec2 c = fuse_center({at(0, 50, 3.0)}, kC);
  EXPECT_NEAR(c.x, 0, 1e-12);
  EXPECT_NEAR(c.y, 50, 1e-9);
}

TEST(Fuse, SymmetricPair) {
  const Vec2 c = fuse_center({at(0, 49, 2.0), at(0, 51, 2.0)}, kC);
  EXPECT_NEAR(c.y, 50, 1e-9);
}

TEST(Fuse, LikelihoodWeighted) {
  const Vec2 c = fuse_center({at(0, 50, 9.0), at(0, 60, 1.0)}, kC);
  EXPECT_NEAR(c.x, 0, 1e-12);
  EXPECT_NEAR(c.y, 51, 1e-9);
  EXPECT_THROW(fuse_center({}, kC), Error);
}

TEST(Fuse, OffAxisPolarMapping) {
  const Vec2 c = fuse_center({at(10, 20, 1.0), at(-4, 30, 3.0)}, kC);
  EXPECT_NEAR(c.x, 0.25 * 10 + 0.75 * -4, 1e-9);
  EXPECT_NEAR(c.y, 0.25 * 20 + 0.75 * 30, 1e-9);
}

TEST(Predict, Examples) {
  auto p = predict({{1, 0}, {2, 0}, {3, 0}});
  EXPECT_DOUBLE_EQ(p.position.x, 4.0);
  EXPECT_NEAR(p.angle, kPi / 2, 1e-15);
  // x(t) = t^2 / 2 at t = 1, 2, 3
  p = predict({{0.5, 10}, {2.0, 10}, {4.5, 10}});
  EXPECT_DOUBLE_EQ(p.position.x, 8.0);
  p = predict({{5, 5}, {5, 5}, {5, 5}});
  EXPECT_NEAR(p.angle, kPi / 4, 1e-15);
  EXPECT_NEAR(p.distance, std::sqrt(50.0), 1e-12);
  EXPECT_THROW(predict({{1, 1}, {1, 1}}), Error);
  EXPECT_THROW(predict({{0, 0}, {0, 0}, {0, 0}}), Error);
}

TEST(Predict, ExactOnRandomConstantAcceleration) {
  Rng rng(21);
  std::uniform_real_distribution<double> u(-1, 1);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Vec2 x0{40 * u(rng), 60 + 30 * u(rng)}, v{15 * u(rng), 15 * u(rng)}, a{3 * u(rng), 3 * u(rng)};
    const double dt = 0.1;
    auto pos = [&](int k) { return x0 + v * (k * dt) + a * (0.5 * k * k * dt * dt); };
    const auto p = predict({pos(0), pos(1), pos(2)});
    worst = std::max(worst, (p.position - pos(3)).norm());
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Beamwidth, Examples) {
  const std::vector<double> fov{7, 10, 15, 20};
  // 2 atan(2.25 / 40) + 3 = 9.44 degrees
  EXPECT_NEAR(rad2deg(2 * std::atan(2.25 / 40)) + 3, 9.44, 0.005);
  EXPECT_EQ(select_beamwidth(40, 4.5, fov, 3), 10.0);
  EXPECT_EQ(select_beamwidth(1e9, 4.5, fov, 3), 7.0);
  EXPECT_EQ(select_beamwidth(5, 4.5, fov, 3), 20.0);
  EXPECT_THROW(select_beamwidth(5, 4.5, {}, 3), Error);
}

TEST(Beamwidth, MonotoneInDistance) {
  const std::vector<double> fov{7, 10, 15, 20};
  double prev = 90;
  for (double d = 2; d < 300; d += 0.5) {
    const double w = select_beamwidth(d, 4.5, fov, 3);
    EXPECT_LE(w, prev);
    prev = w;
  }
}

TEST(Placement, Examples) {
  SystemConfig cfg;
  // sin(5 deg) = 0.0872: 10 degrees spans 5.58 beams of 2/64.
  EXPECT_NEAR(std::sin(deg2rad(5)), 0.0872, 5e-5);
  auto pl = place_rx_codebook(0.0, 10.0, cfg);
  EXPECT_EQ(pl.size, 8);
  EXPECT_EQ(pl.first_bin, -4);
  pl = place_rx_codebook(0.0, 7.0, cfg);
  EXPECT_EQ(pl.size, 6);
  const auto cb = pl.build(cfg.N_a);
  EXPECT_LE(cb.covered_lo(), std::sin(deg2rad(-3.5)));
  EXPECT_GE(cb.covered_hi(), std::sin(deg2rad(3.5)));
}

TEST(Placement, ShiftsWithOneDftBeam) {
  SystemConfig cfg;
  for (int k = -5; k < 5; ++k) {
    const auto a = place_rx_codebook(std::asin(2.0 * k / 64), 7.0, cfg);
    const auto b = place_rx_codebook(std::asin(2.0 * (k + 1) / 64), 7.0, cfg);
    EXPECT_EQ(a.size, b.size);
    EXPECT_EQ(b.first_bin, a.first_bin + 1);
  }
}

TEST(Placement, CoversLobeWithGuardAndExceedsRfChains) {
  SystemConfig cfg;
  cfg.N_a = 32;
  for (double w : {7.0, 10.0, 15.0, 20.0}) {
    for (double phi = -1.0; phi <= 1.0; phi += 0.05) {
      const auto pl = place_rx_codebook(phi, w, cfg);
      EXPECT_GT(pl.size, cfg.N_rf);
      EXPECT_EQ(pl.size % 2, 0);
      const auto cb = pl.build(cfg.N_a);
      const double half = deg2rad(w) / 2;
      if (pl.first_bin > -16 && pl.first_bin + pl.size < 16) {
        EXPECT_LE(cb.covered_lo(), std::sin(phi - half) + 1e-12);
        EXPECT_GE(cb.covered_hi(), std::sin(phi + half) - 1e-12);
      }
    }
  }
}

TEST(Track, WarmupThenExactPrediction) {
  SystemConfig cfg;
  TrackerSettings settings;
  TrackState st;
  const Vec2 pts[3] = {{1, 40}, {1.5, 40.8}, {2.2, 41.7}};
  for (int i = 0; i < 3; ++i) {
    EXPECT_FALSE(st.ready());
    warmup_epoch(st, pts[i], cfg, settings);
  }
  ASSERT_TRUE(st.ready());
  const Vec2 expect = pts[2] * 3.0 - pts[1] * 3.0 + pts[0];
  EXPECT_NEAR((st.prediction->position - expect).norm(), 0.0, 1e-12);
  EXPECT_EQ(st.beamwidth_deg, select_beamwidth(expect.norm(), settings.target_extent, cfg.fov_set,
                                               settings.margin_deg));
  EXPECT_EQ(st.warmup_epochs, 3);
}

TEST(Track, CoastsOnMissedEpoch) {
  SystemConfig cfg;
  TrackerSettings settings;
  TrackState st;
  for (Vec2 p : {Vec2{0, 40}, Vec2{0, 41}, Vec2{0, 42}}) warmup_epoch(st, p, cfg, settings);
  const Vec2 predicted = st.prediction->position;
  track_epoch(st, {}, cfg, settings);
  EXPECT_EQ(st.history.back(), predicted);
  EXPECT_EQ(st.coasted_epochs, 1);
  EXPECT_NEAR(st.prediction->position.y, 44.0, 1e-12);
}

TEST(Track, StationaryFixedPoint) {
  SystemConfig cfg;
  TrackerSettings settings;
  TrackState st;
  const Vec2 x{3, 50};
  for (int i = 0; i < 3; ++i) warmup_epoch(st, x, cfg, settings);
  for (int i = 0; i < 5; ++i) {
    track_epoch(st, {at(x.x, x.y, 1.0)}, cfg, settings);
    EXPECT_NEAR((st.prediction->position - x).norm(), 0.0, 1e-9);
  }
}

TEST(Track, FixedWidthOverridesSelection) {
  SystemConfig cfg;
  TrackerSettings settings;
  settings.fixed_width = 15.0;
  TrackState st;
  for (Vec2 p : {Vec2{0, 90}, Vec2{0, 91}, Vec2{0, 92}}) warmup_epoch(st, p, cfg, settings);
  EXPECT_EQ(st.beamwidth_deg, 15.0);
}

TEST(Track, ExactOnQuadraticTrajectory) {
  SystemConfig cfg;
  TrackerSettings settings;
  TrackState st;
  const Vec2 x0{-10, 50}, v{8, 1}, a{-1.5, 0.8};
  const double dt = 0.1;
  auto pos = [&](int k) { return x0 + v * (k * dt) + a * (0.5 * k * k * dt * dt); };
  for (int k = 0; k < 3; ++k) warmup_epoch(st, pos(k), cfg, settings);
  for (int k = 3; k < 50; ++k) {
    EXPECT_LT((st.prediction->position - pos(k)).norm(), 1e-9) << k;
    const Vec2 p = pos(k);
    track_epoch(st, {at(p.x, p.y, 1.0)}, cfg, settings);
  }
}

}  // namespace
