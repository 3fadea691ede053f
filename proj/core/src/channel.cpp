#include "isac/channel.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

namespace isac {
namespace {

constexpr char kRxMagic[8] = {'I', 'S', 'A', 'C', 'R', 'X', '0', '1'};

static_assert(std::endian::native == std::endian::little, "rx dump assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error("rx dump: truncated input");
  return v;
}

}  // namespace

OfdmFrame generate_frame(int n_symbols, int n_subcarriers, Rng& rng) {
  if (n_symbols < 1 || n_subcarriers < 1) throw Error("generate_frame: N and M must be >= 1");
  constexpr double h = 1.0 / std::numbers::sqrt2;
  static const Complex qpsk[4] = {Complex(h, h), Complex(-h, h), Complex(-h, -h), Complex(h, -h)};
  std::uniform_int_distribution<int> pick(0, 3);
  OfdmFrame frame(n_symbols, n_subcarriers);
  for (int n = 0; n < n_symbols; ++n) {
    for (int m = 0; m < n_subcarriers; ++m) frame(n, m) = qpsk[pick(rng)];
  }
  return frame;
}

std::vector<OfdmFrame> generate_frames(const SystemConfig& cfg, Rng& rng) {
  std::vector<OfdmFrame> frames;
  frames.reserve(cfg.B);
  for (int b = 0; b < cfg.B; ++b) frames.push_back(generate_frame(cfg.N, cfg.M, rng));
  return frames;
}

RxBlocks simulate_epoch_rx(const std::vector<ScatterPath>& paths,
                           const std::vector<OfdmFrame>& frames, const TxBeam& beam,
                           const RxReductionPlan& plan, const SystemConfig& cfg,
                           double delay_offset, Rng& rng) {
  const int n_blocks = plan.blocks();
  if (static_cast<int>(frames.size()) != n_blocks) {
    throw Error("simulate_epoch_rx: frame count does not match block count");
  }
  if (beam.weights.size() != cfg.N_a) throw Error("simulate_epoch_rx: beam size != N_a");
  const int n_sym = cfg.N;
  const int n_sc = cfg.M;
  for (const auto& f : frames) {
    if (f.rows() != n_sym || f.cols() != n_sc) throw Error("simulate_epoch_rx: frame size mismatch");
  }
  for (const auto& p : paths) {
    const double residual = p.delay - delay_offset;
    if (!(residual >= 0.0 && residual < cfg.T_cp)) {
      throw Error("simulate_epoch_rx: residual delay " + std::to_string(residual) +
                  " s outside the cyclic prefix [0, T_cp)");
    }
  }

  const double t0 = cfg.T0();
  const double amp = std::sqrt(cfg.P_tx);
  const int n_paths = static_cast<int>(paths.size());

  // Per-path subcarrier phasors and array responses are shared by all blocks.
  std::vector<CVector> delay_phasor(n_paths, CVector(n_sc));
  std::vector<CVector> steer(n_paths);
  std::vector<Complex> tx_gain(n_paths);
  for (int p = 0; p < n_paths; ++p) {
    const double residual = paths[p].delay - delay_offset;
    for (int m = 0; m < n_sc; ++m) {
      delay_phasor[p][m] = std::polar(1.0, -2.0 * kPi * m * cfg.delta_f * residual);
    }
    steer[p] = steering(paths[p].angle, cfg.N_a);
    tx_gain[p] = steer[p].dot(beam.weights);  // a^H f
  }

  RxBlocks rx;
  rx.n_symbols = n_sym;
  rx.n_subcarriers = n_sc;
  rx.n_rf = cfg.N_rf;
  rx.delay_offset = delay_offset;
  rx.blocks.reserve(n_blocks);

  const double sigma2 = noise_variance(cfg);
  std::normal_distribution<double> gauss(0.0, std::sqrt(sigma2 / 2.0));
  CVector w(cfg.N_a);

  for (int b = 0; b < n_blocks; ++b) {
    const CMatrix& u = plan.combiners[b];
    if (u.rows() != cfg.N_a || u.cols() != cfg.N_rf) {
      throw Error("simulate_epoch_rx: combiner dimensions disagree with N_a x N_rf");
    }
    std::vector<CVector> per_path(n_paths);
    for (int p = 0; p < n_paths; ++p) {
      per_path[p] = (u.adjoint() * steer[p]) * (tx_gain[p] * paths[p].gain * amp);
    }
    CMatrix block = CMatrix::Zero(cfg.N_rf, n_sym * n_sc);
    for (int n = 0; n < n_sym; ++n) {
      const int t = b * n_sym + n;
      for (int p = 0; p < n_paths; ++p) {
        const Complex dop = std::polar(1.0, 2.0 * kPi * t * t0 * paths[p].doppler);
        for (int m = 0; m < n_sc; ++m) {
          block.col(n * n_sc + m) += per_path[p] * (dop * delay_phasor[p][m] * frames[b](n, m));
        }
      }
    }
    if (sigma2 > 0.0) {
      for (int col = 0; col < n_sym * n_sc; ++col) {
        for (int i = 0; i < cfg.N_a; ++i) w[i] = Complex(gauss(rng), gauss(rng));
        block.col(col).noalias() += u.adjoint() * w;
      }
    }
    rx.blocks.push_back(std::move(block));
  }
  return rx;
}

double comm_gain(double d0, const SystemConfig& cfg) {
  if (!(d0 > 0.0)) throw Error("comm_gain: distance must be > 0");
  const double ratio = cfg.wavelength() / (4.0 * kPi * d0);
  return ratio * ratio;
}

CommLink comm_link(Vec2 user, const SystemConfig& cfg) {
  CommLink link;
  link.angle = bearing(user);
  link.distance = user.norm();
  link.gain = comm_gain(link.distance, cfg);
  return link;
}

void write_rx_blocks(std::ostream& out, const RxBlocks& rx) {
  out.write(kRxMagic, sizeof(kRxMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(rx.n_blocks()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(rx.n_symbols));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(rx.n_subcarriers));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(rx.n_rf));
  put<double>(out, rx.delay_offset);
  for (int b = 0; b < rx.n_blocks(); ++b) {
    for (int n = 0; n < rx.n_symbols; ++n) {
      for (int m = 0; m < rx.n_subcarriers; ++m) {
        for (int c = 0; c < rx.n_rf; ++c) {
          const Complex v = rx.at(b, n, m, c);
          put<double>(out, v.real());
          put<double>(out, v.imag());
        }
      }
    }
  }
}

RxBlocks read_rx_blocks(std::istream& in) {
  char magic[sizeof(kRxMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kRxMagic, sizeof(magic)) != 0) {
    throw Error("rx dump: bad magic");
  }
  RxBlocks rx;
  const auto n_blocks = get<std::uint32_t>(in);
  rx.n_symbols = static_cast<int>(get<std::uint32_t>(in));
  rx.n_subcarriers = static_cast<int>(get<std::uint32_t>(in));
  rx.n_rf = static_cast<int>(get<std::uint32_t>(in));
  rx.delay_offset = get<double>(in);
  rx.blocks.assign(n_blocks, CMatrix(rx.n_rf, rx.n_symbols * rx.n_subcarriers));
  for (std::uint32_t b = 0; b < n_blocks; ++b) {
    for (int n = 0; n < rx.n_symbols; ++n) {
      for (int m = 0; m < rx.n_subcarriers; ++m) {
        for (int c = 0; c < rx.n_rf; ++c) {
          const double re = get<double>(in);
          const double im = get<double>(in);
          rx.at(static_cast<int>(b), n, m, c) = Complex(re, im);
        }
      }
    }
  }
  return rx;
}

}  // namespace isac
