#pragma once

#include <iosfwd>
#include <vector>

#include "isac/config.hpp"
#include "isac/random.hpp"
#include "isac/types.hpp"

namespace isac {

// Half-wavelength ULA. Angles are measured from boresight (+y axis), so a
// point (x, y) sits at phi = atan(x / y). Beam-space coordinates are
// s = sin(phi); the array pattern is 2-periodic in s.

/// a(phi): element i equals exp(j*pi*i*sin(phi)), i = 0..n_a-1.
CVector steering(double phi, int n_a);

/// Same response parameterized directly by s = sin(phi); defined for any real s.
CVector steering_sin(double s, int n_a);

/// Width of one DFT beam in beam-space.
inline double dft_beamwidth(int n_a) { return 2.0 / n_a; }

/// D contiguous columns of the n_a-point Fourier basis. Column d points at
/// s_d = 2 * k_d / n_a where k_d runs over consecutive integers in
/// [-n_a/2, n_a/2 - 1]; columns are normalized by sqrt(n_a).
struct DftCodebook {
  int n_a = 0;
  std::vector<int> bins;        // k_d for each column
  CMatrix columns;              // n_a x D

  int size() const { return static_cast<int>(bins.size()); }
  double beam_center(int d) const { return 2.0 * bins[d] / n_a; }
  /// Covered beam-space interval [first center - 1/n_a, last center + 1/n_a].
  double covered_lo() const { return beam_center(0) - 1.0 / n_a; }
  double covered_hi() const { return beam_center(size() - 1) + 1.0 / n_a; }
};

/// Index of the DFT bin nearest to beam-space coordinate s.
int nearest_dft_bin(double s, int n_a);

/// Builds a codebook of d_size beams around center_sin. The center bin
/// round(center_sin * n_a / 2) sits at position floor(d_size / 2).
/// Throws if d_size > n_a or any bin falls outside [-n_a/2, n_a/2 - 1].
DftCodebook build_codebook(int n_a, double center_sin, int d_size);
DftCodebook build_codebook(const SystemConfig& cfg, double center_sin, int d_size);

/// Codebook from an explicit first bin.
DftCodebook codebook_from_bins(int n_a, int first_bin, int d_size);

/// One N_a x N_rf orthonormal combiner per block, built from codebook columns.
struct RxReductionPlan {
  std::vector<CMatrix> combiners;           // U_b
  std::vector<std::vector<int>> selected;   // codebook column indices per block

  int blocks() const { return static_cast<int>(combiners.size()); }
};

/// Per block, draws n_rf distinct codebook columns uniformly without replacement.
RxReductionPlan draw_reduction_plan(const DftCodebook& codebook, int blocks, int n_rf, Rng& rng);

/// Single-stream transmit beamformer with a nominal flat-top main lobe.
struct TxBeam {
  CVector weights;       // unit norm
  double center = 0.0;   // rad
  double width_deg = 0.0;
  double lobe_lo = 0.0;  // beam-space interval of the nominal main lobe
  double lobe_hi = 0.0;

  /// |a^H(phi) f|^2
  double gain(double phi) const;
  double gain_sin(double s) const;
};

/// Least-squares flat-top beam over the interval [s_lo, s_hi]. Fits the
/// array pattern on a dense grid spanning one period of beam-space centered
/// on the lobe: 1 in the passband, 0 outside a one-DFT-beam transition
/// band, then normalizes. A lobe no wider than one DFT beam degenerates to a
/// single matched column. Throws if the lobe is narrower than one DFT beam
/// or leaves the visible region.
CVector design_flat_top(double s_lo, double s_hi, int n_a);

/// Beam pointed at phi0 covering [phi0 - width/2, phi0 + width/2].
TxBeam design_tx_beam(double phi0, double width_deg, int n_a);

/// Closed-interval test against the nominal lobe.
bool in_mainlobe(const TxBeam& beam, double phi);

/// Writes `sin_angle,angle_deg,gain_db` rows over a uniform beam-space grid.
void write_beam_pattern_csv(std::ostream& out, const TxBeam& beam, int points = 1024);

}  // namespace isac
