#pragma once

#include <iosfwd>
#include <vector>

#include "isac/array.hpp"
#include "isac/config.hpp"
#include "isac/random.hpp"
#include "isac/scene.hpp"
#include "isac/types.hpp"

namespace isac {

/// One block of data symbols zeta[n, m]: N symbols x M subcarriers, unit modulus.
using OfdmFrame = CMatrix;

/// I.i.d. uniform QPSK frame.
OfdmFrame generate_frame(int n_symbols, int n_subcarriers, Rng& rng);

/// B independent frames, one per block of an epoch.
std::vector<OfdmFrame> generate_frames(const SystemConfig& cfg, Rng& rng);

/// Reduced-dimension receive samples of one epoch. blocks[b] is
/// N_rf x (N*M); column n*M + m holds r_b[n, m].
struct RxBlocks {
  int n_symbols = 0;
  int n_subcarriers = 0;
  int n_rf = 0;
  /// Receive-window offset subtracted from every two-way delay before the
  /// subcarrier phase is applied; the residual must lie in [0, T_cp).
  double delay_offset = 0.0;
  std::vector<CMatrix> blocks;

  int n_blocks() const { return static_cast<int>(blocks.size()); }
  Complex& at(int b, int n, int m, int chain) { return blocks[b](chain, n * n_subcarriers + m); }
  Complex at(int b, int n, int m, int chain) const {
    return blocks[b](chain, n * n_subcarriers + m);
  }
};

/// Received samples for the extended target:
///   r_b[n,m] = sum_p h_p sqrt(P_tx) U_b^H a(phi_p) a^H(phi_p) f zeta_b[n,m]
///              * exp(j 2 pi ((b N + n) T_0 nu_p - m delta_f (tau_p - offset))) + U_b^H w,
/// with w ~ CN(0, N_0 W I). Doppler phase runs on the global symbol index so
/// it stays continuous across blocks. Geometry is frozen over the epoch.
/// Throws if a residual delay falls outside [0, T_cp) or dimensions disagree.
RxBlocks simulate_epoch_rx(const std::vector<ScatterPath>& paths,
                           const std::vector<OfdmFrame>& frames, const TxBeam& beam,
                           const RxReductionPlan& plan, const SystemConfig& cfg,
                           double delay_offset, Rng& rng);

/// Downlink line-of-sight channel of the user (one receive antenna).
struct CommLink {
  double angle = 0.0;     // rad
  double distance = 0.0;  // m
  double gain = 0.0;      // |rho_0|^2
};

/// Free-space gain lambda^2 / ((4 pi)^2 d0^2).
double comm_gain(double d0, const SystemConfig& cfg);

CommLink comm_link(Vec2 user, const SystemConfig& cfg);

/// Binary dump: magic "ISACRX01", then little-endian uint32 B, N, M, N_rf,
/// float64 delay_offset, then for b, n, m, chain: float64 re, float64 im.
void write_rx_blocks(std::ostream& out, const RxBlocks& rx);
RxBlocks read_rx_blocks(std::istream& in);

}  // namespace isac
