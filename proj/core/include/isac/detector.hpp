#pragma once

#include <array>
#include <map>
#include <iosfwd>
#include <memory>
#include <vector>

#include "isac/array.hpp"
#include "isac/channel.hpp"
#include "isac/config.hpp"
#include "isac/random.hpp"
#include "isac/types.hpp"

namespace isac {

/// Shape of the delay-Doppler-angle search grid.
///
/// Doppler cells are spaced 1 / (L_nu T_0) with L_nu = B N doppler_oversample
/// and centered on zero; delay cells are spaced 1 / (L_tau delta_f) with
/// L_tau = M delay_oversample, starting at zero. With unit oversampling these
/// are the natural resolutions 1/(B N T_0) and 1/W. Angle cells are uniform in
/// beam-space at angle_per_beam points per DFT beam.
struct GridSpec {
  int doppler_oversample = 1;
  int delay_oversample = 1;
  int doppler_cells = 0;   // 0: all L_nu bins (spans +-1/(2 T_0))
  int delay_cells = 0;     // 0: every bin with delay < T_cp
  int angle_per_beam = 4;
  int angle_cells = 0;     // 0: D * angle_per_beam + 1 covering the codebook region

  bool operator==(const GridSpec&) const = default;
};

const std::vector<std::string>& grid_keys();
GridSpec grid_spec_from(const KeyValueFile& kv);

/// GLRT map over (Doppler, delay, angle). Cell storage order is
/// [angle][delay][Doppler].
struct DetectionGrid {
  std::vector<double> doppler;    // Hz, strictly increasing
  std::vector<double> delay;      // s, residual after delay_offset, strictly increasing
  std::vector<double> angle_sin;  // beam-space, strictly increasing
  double delay_offset = 0.0;
  int fft_doppler = 0;            // L_nu
  int fft_delay = 0;              // L_tau
  std::vector<double> stat;       // l >= 0
  std::vector<Complex> amplitude; // h'

  int n_doppler() const { return static_cast<int>(doppler.size()); }
  int n_delay() const { return static_cast<int>(delay.size()); }
  int n_angle() const { return static_cast<int>(angle_sin.size()); }
  std::size_t cells() const { return doppler.size() * delay.size() * angle_sin.size(); }
  std::size_t index(int i_nu, int i_tau, int i_phi) const {
    return (static_cast<std::size_t>(i_phi) * delay.size() + i_tau) * doppler.size() + i_nu;
  }
  double angle(int i_phi) const { return std::asin(angle_sin[i_phi]); }
};

/// Builds empty axes for an epoch. Throws if the delay axis reaches T_cp or
/// an axis is empty.
DetectionGrid make_grid(const SystemConfig& cfg, const GridSpec& spec, const DftCodebook& codebook,
                        double delay_offset = 0.0);

struct GlrtValue {
  double stat = 0.0;   // l
  Complex amplitude;   // h'
};

/// Brute-force GLRT at one (nu, tau, phi): assembles
/// G_b = T(tau, nu) (x) U_b^H a(phi) a^H(phi) f as a dense matrix for every
/// block and evaluates the closed-form amplitude and statistic. `delay` is the
/// residual delay. Cells with a vanishing denominator return zeros.
GlrtValue glrt_statistic_oracle(const RxBlocks& rx, const std::vector<OfdmFrame>& frames,
                                const RxReductionPlan& plan, const TxBeam& beam,
                                const SystemConfig& cfg, double doppler, double delay, double phi);

/// |a^H(phi) f|^2 sum_b ||U_b^H a(phi)||^2 ||zeta_b||^2, the GLRT denominator.
double glrt_denominator(double phi, const std::vector<OfdmFrame>& frames,
                        const RxReductionPlan& plan, const TxBeam& beam);

/// Fast GLRT over every grid cell. Per (block, angle) the receive samples are
/// combined to one scalar per (symbol, subcarrier); the Doppler and delay
/// phase sums for all cells then come from one zero-padded 2-D FFT over
/// (global symbol, subcarrier). Reusable workspace; not thread-safe, use one
/// instance per thread.
class GlrtEngine {
 public:
  GlrtEngine(const SystemConfig& cfg, const GridSpec& spec);
  ~GlrtEngine();
  GlrtEngine(GlrtEngine&&) noexcept;
  GlrtEngine& operator=(GlrtEngine&&) noexcept;

  /// Fills grid.stat and grid.amplitude.
  void evaluate(const RxBlocks& rx, const std::vector<OfdmFrame>& frames,
                const RxReductionPlan& plan, const TxBeam& beam, DetectionGrid& grid);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Convenience wrapper building a one-off engine.
DetectionGrid glrt_map_fast(const RxBlocks& rx, const std::vector<OfdmFrame>& frames,
                            const RxReductionPlan& plan, const TxBeam& beam,
                            const DetectionGrid& axes, const SystemConfig& cfg,
                            const GridSpec& spec);

struct Detection {
  int i_doppler = 0;
  int i_delay = 0;
  int i_angle = 0;
  double doppler = 0.0;  // Hz
  double delay = 0.0;    // s, absolute (offset + residual)
  double angle = 0.0;    // rad
  double stat = 0.0;
  double threshold = 0.0;
  Complex amplitude;
};

/// OS-CFAR settings. Axes are ordered (Doppler, delay, angle).
struct CfarConfig {
  std::array<int, 3> window{2, 2, 2};  // half-sizes
  std::array<int, 3> guard{1, 1, 1};   // half-sizes
  double k_fraction = 0.75;            // k = ceil(k_fraction * |reference|)
  double alpha = 1.0;
  double p_fa = 1e-4;
  // Scale factors of edge-clipped windows, keyed by their reference count.
  // Counts without an entry use alpha.
  std::map<int, double> edge_alpha;

  void validate() const;
  int reference_cells() const;  // unclipped reference count
  int order_index(int reference) const;
  double alpha_for(int reference) const;
  /// Reference counts of every window shape that edge clipping can produce
  /// on a grid at least 2w+1 cells long per axis, full window included.
  std::vector<int> reachable_reference_counts() const;
};

const std::vector<std::string>& cfar_keys();
/// Window geometry from config; alpha is left for calibration.
CfarConfig cfar_geometry_from(const KeyValueFile& kv);

/// Cells whose statistic exceeds alpha times the k-th smallest reference
/// value of their (edge-clipped) window minus guard region.
std::vector<Detection> os_cfar(const DetectionGrid& grid, const CfarConfig& cfar);

/// Per-cell thresholds alpha * X_(k); cells without reference cells get +inf.
std::vector<double> os_cfar_thresholds(const DetectionGrid& grid, const CfarConfig& cfar);

/// Chooses alpha so that, on unit-mean exponential reference windows of the
/// configured geometry, the per-cell false-alarm probability equals p_fa.
/// Each Monte-Carlo window yields the order statistic X_(k), drawn directly
/// through its Beta law; the false-alarm rate at alpha is estimated as
/// mean(exp(-alpha X_(k))), the exceedance probability of an independent
/// exponential cell under test. alpha solves that monotone curve by a
/// bracketed Newton search. Clipped window shapes are calibrated
/// the same way into edge_alpha.
CfarConfig calibrate_cfar(double p_fa, const CfarConfig& geometry, Rng& rng,
                          int windows = 200000);

/// `i_doppler,i_delay,i_angle,doppler_hz,delay_s,angle_rad,stat,threshold,h_re,h_im`
void write_detections_csv(std::ostream& out, const std::vector<Detection>& dets);
void write_detections_json(std::ostream& out, const std::vector<Detection>& dets);
/// Full map, one row per cell: `i_doppler,i_delay,i_angle,doppler_hz,delay_s,angle_rad,stat`.
void write_grid_csv(std::ostream& out, const DetectionGrid& grid);

}  // namespace isac
