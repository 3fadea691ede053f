#include "isac/array.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <Eigen/QR>

namespace isac {

CVector steering_sin(double s, int n_a) {
  CVector a(n_a);
  for (int i = 0; i < n_a; ++i) a[i] = std::polar(1.0, kPi * i * s);
  return a;
}

CVector steering(double phi, int n_a) {
  if (!(std::abs(phi) < kPi / 2)) throw Error("steering: angle outside the field of view");
  if (n_a < 1) throw Error("steering: n_a must be >= 1");
  return steering_sin(std::sin(phi), n_a);
}

int nearest_dft_bin(double s, int n_a) {
  return static_cast<int>(std::lround(s * n_a / 2.0));
}

DftCodebook codebook_from_bins(int n_a, int first_bin, int d_size) {
  if (d_size < 1 || d_size > n_a) {
    throw Error("codebook: D = " + std::to_string(d_size) + " must lie in [1, N_a = " +
                std::to_string(n_a) + "]");
  }
  const int last_bin = first_bin + d_size - 1;
  if (first_bin < -n_a / 2 || last_bin > n_a / 2 - 1) {
    throw Error("codebook: region exceeds codebook span (bins " + std::to_string(first_bin) +
                ".." + std::to_string(last_bin) + ")");
  }
  DftCodebook cb;
  cb.n_a = n_a;
  cb.bins.resize(d_size);
  std::iota(cb.bins.begin(), cb.bins.end(), first_bin);
  cb.columns.resize(n_a, d_size);
  const double norm = 1.0 / std::sqrt(static_cast<double>(n_a));
  for (int d = 0; d < d_size; ++d) cb.columns.col(d) = steering_sin(cb.beam_center(d), n_a) * norm;
  return cb;
}

DftCodebook build_codebook(int n_a, double center_sin, int d_size) {
  if (!(center_sin >= -1.0 && center_sin <= 1.0)) {
    throw Error("codebook: center outside [-1, 1] in beam-space");
  }
  return codebook_from_bins(n_a, nearest_dft_bin(center_sin, n_a) - d_size / 2, d_size);
}

DftCodebook build_codebook(const SystemConfig& cfg, double center_sin, int d_size) {
  return build_codebook(cfg.N_a, center_sin, d_size);
}

RxReductionPlan draw_reduction_plan(const DftCodebook& codebook, int blocks, int n_rf, Rng& rng) {
  if (n_rf < 1 || n_rf > codebook.size()) {
    throw Error("reduction plan: N_rf must lie in [1, D]");
  }
  RxReductionPlan plan;
  plan.combiners.reserve(blocks);
  plan.selected.reserve(blocks);
  std::vector<int> pool(codebook.size());
  for (int b = 0; b < blocks; ++b) {
    std::iota(pool.begin(), pool.end(), 0);
    // Partial Fisher-Yates: first n_rf entries are a uniform draw without replacement.
    for (int i = 0; i < n_rf; ++i) {
      std::uniform_int_distribution<int> pick(i, codebook.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    std::vector<int> chosen(pool.begin(), pool.begin() + n_rf);
    CMatrix u(codebook.n_a, n_rf);
    for (int r = 0; r < n_rf; ++r) u.col(r) = codebook.columns.col(chosen[r]);
    plan.combiners.push_back(std::move(u));
    plan.selected.push_back(std::move(chosen));
  }
  return plan;
}

double TxBeam::gain_sin(double s) const {
  return std::norm(steering_sin(s, static_cast<int>(weights.size())).dot(weights));
}

double TxBeam::gain(double phi) const { return gain_sin(std::sin(phi)); }

CVector design_flat_top(double s_lo, double s_hi, int n_a) {
  if (!(s_hi > s_lo)) throw Error("tx beam: empty main lobe");
  if (s_lo <= -1.0 || s_hi >= 1.0) throw Error("tx beam: main lobe leaves the visible region");
  const double beam = dft_beamwidth(n_a);
  const double span = s_hi - s_lo;
  const double center = 0.5 * (s_lo + s_hi);
  if (span < 0.5 * beam) {
    throw Error("tx beam: lobe of " + std::to_string(span) +
                " in beam-space is narrower than one DFT beam (" + std::to_string(beam) + ")");
  }
  if (span <= beam * (1.0 + 1e-9)) {
    return steering_sin(center, n_a) / std::sqrt(static_cast<double>(n_a));
  }

  // One full period of beam-space, centered on the lobe, sampled 16x finer
  // than the DFT grid. Points inside the transition band are left free.
  const int grid = 16 * n_a;
  const double half = 0.5 * span;
  const double phase_ref = 0.5 * (n_a - 1);
  std::vector<double> offsets;
  std::vector<Complex> desired;
  offsets.reserve(grid);
  desired.reserve(grid);
  for (int k = 0; k < grid; ++k) {
    const double q = -1.0 + 2.0 * (k + 0.5) / grid;
    if (std::abs(q) <= half) {
      offsets.push_back(q);
      desired.push_back(std::polar(1.0, -kPi * phase_ref * q));
    } else if (std::abs(q) > half + beam) {
      offsets.push_back(q);
      desired.push_back(0.0);
    }
  }
  const Eigen::Index rows = static_cast<Eigen::Index>(offsets.size());
  CMatrix a(rows, n_a);
  CVector d(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (int i = 0; i < n_a; ++i) a(r, i) = std::polar(1.0, -kPi * i * offsets[r]);
    d[r] = desired[r];
  }
  // Solved around the lobe center then modulated to it, so shifting the lobe
  // shifts the pattern exactly.
  CVector f = a.householderQr().solve(d);
  for (int i = 0; i < n_a; ++i) f[i] *= std::polar(1.0, kPi * i * center);
  return f / f.norm();
}

TxBeam design_tx_beam(double phi0, double width_deg, int n_a) {
  if (!(width_deg > 0.0)) throw Error("tx beam: width must be > 0");
  const double half = deg2rad(width_deg) / 2.0;
  if (!(phi0 - half > -kPi / 2 && phi0 + half < kPi / 2)) {
    throw Error("tx beam: main lobe leaves the visible region");
  }
  TxBeam beam;
  beam.center = phi0;
  beam.width_deg = width_deg;
  beam.lobe_lo = std::sin(phi0 - half);
  beam.lobe_hi = std::sin(phi0 + half);
  beam.weights = design_flat_top(beam.lobe_lo, beam.lobe_hi, n_a);
  return beam;
}

bool in_mainlobe(const TxBeam& beam, double phi) {
  const double s = std::sin(phi);
  return s >= beam.lobe_lo && s <= beam.lobe_hi;
}

void write_beam_pattern_csv(std::ostream& out, const TxBeam& beam, int points) {
  out << "sin_angle,angle_deg,gain_db\n";
  for (int k = 0; k < points; ++k) {
    const double s = -1.0 + 2.0 * (k + 0.5) / points;
    out << s << ',' << rad2deg(std::asin(s)) << ',' << lin2db(std::max(beam.gain_sin(s), 1e-30))
        << '\n';
  }
}

}  // namespace isac
