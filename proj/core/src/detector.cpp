#include "isac/detector.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <utility>

#include <fftw3.h>

namespace isac {
namespace {

// FFTW planning is not thread-safe; execution of distinct plans is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwPlan {
  fftw_plan plan = nullptr;
  FftwPlan() = default;
  explicit FftwPlan(fftw_plan p) : plan(p) {}
  FftwPlan(const FftwPlan&) = delete;
  FftwPlan& operator=(const FftwPlan&) = delete;
  FftwPlan(FftwPlan&& o) noexcept : plan(std::exchange(o.plan, nullptr)) {}
  FftwPlan& operator=(FftwPlan&& o) noexcept {
    if (this != &o) {
      reset();
      plan = std::exchange(o.plan, nullptr);
    }
    return *this;
  }
  ~FftwPlan() { reset(); }
  void reset() {
    if (plan) {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan);
      plan = nullptr;
    }
  }
};

struct FftwBuffer {
  Complex* data = nullptr;
  explicit FftwBuffer(std::size_t n)
      : data(reinterpret_cast<Complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
    if (!data) throw std::bad_alloc();
  }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  ~FftwBuffer() { fftw_free(data); }
};

fftw_complex* as_fftw(Complex* p) { return reinterpret_cast<fftw_complex*>(p); }

double max_denominator(int n_a, int nm, int blocks) {
  return static_cast<double>(n_a) * n_a * nm * blocks;
}

}  // namespace

const std::vector<std::string>& grid_keys() {
  static const std::vector<std::string> keys{
      "grid.doppler_oversample", "grid.delay_oversample", "grid.doppler_cells",
      "grid.delay_cells",        "grid.angle_per_beam",   "grid.angle_cells"};
  return keys;
}

GridSpec grid_spec_from(const KeyValueFile& kv) {
  GridSpec spec;
  auto set_i = [&](const char* key, int& dst) {
    if (auto v = kv.get_int(key)) dst = static_cast<int>(*v);
  };
  set_i("grid.doppler_oversample", spec.doppler_oversample);
  set_i("grid.delay_oversample", spec.delay_oversample);
  set_i("grid.doppler_cells", spec.doppler_cells);
  set_i("grid.delay_cells", spec.delay_cells);
  set_i("grid.angle_per_beam", spec.angle_per_beam);
  set_i("grid.angle_cells", spec.angle_cells);
  return spec;
}

DetectionGrid make_grid(const SystemConfig& cfg, const GridSpec& spec, const DftCodebook& codebook,
                        double delay_offset) {
  if (spec.doppler_oversample < 1 || spec.delay_oversample < 1 || spec.angle_per_beam < 1) {
    throw Error("grid: oversampling factors must be >= 1");
  }
  DetectionGrid grid;
  grid.delay_offset = delay_offset;
  grid.fft_doppler = cfg.B * cfg.N * spec.doppler_oversample;
  grid.fft_delay = cfg.M * spec.delay_oversample;

  const int n_nu = spec.doppler_cells > 0 ? spec.doppler_cells : grid.fft_doppler;
  if (n_nu > grid.fft_doppler) throw Error("grid: more Doppler cells than FFT bins");
  const double d_nu = 1.0 / (grid.fft_doppler * cfg.T0());
  for (int k = 0; k < n_nu; ++k) grid.doppler.push_back((k - n_nu / 2) * d_nu);

  const double d_tau = 1.0 / (grid.fft_delay * cfg.delta_f);
  int n_tau = spec.delay_cells;
  if (n_tau <= 0) {
    n_tau = 0;
    while (n_tau < grid.fft_delay && n_tau * d_tau < cfg.T_cp * (1.0 - 1e-12)) ++n_tau;
  }
  if (n_tau < 1) throw Error("grid: empty delay axis (T_cp too small)");
  if (n_tau > grid.fft_delay) throw Error("grid: more delay cells than FFT bins");
  if (!((n_tau - 1) * d_tau < cfg.T_cp)) throw Error("grid: delay axis reaches T_cp");
  for (int q = 0; q < n_tau; ++q) grid.delay.push_back(q * d_tau);

  const int p = spec.angle_per_beam;
  const double step = dft_beamwidth(codebook.n_a) / p;
  int n_phi = spec.angle_cells;
  double start = 0.0;
  if (n_phi <= 0) {
    n_phi = codebook.size() * p + 1;
    start = codebook.beam_center(0) - 0.5 * p * step;
  } else {
    const double mid = 0.5 * (codebook.beam_center(0) + codebook.beam_center(codebook.size() - 1));
    start = mid - 0.5 * (n_phi - 1) * step;
  }
  for (int i = 0; i < n_phi; ++i) {
    const double s = start + i * step;
    if (s > -1.0 && s < 1.0) grid.angle_sin.push_back(s);
  }
  if (grid.angle_sin.empty()) throw Error("grid: empty angle axis");
  grid.stat.assign(grid.cells(), 0.0);
  grid.amplitude.assign(grid.cells(), Complex{});
  return grid;
}

double glrt_denominator(double phi, const std::vector<OfdmFrame>& frames,
                        const RxReductionPlan& plan, const TxBeam& beam) {
  const int n_a = static_cast<int>(beam.weights.size());
  const CVector a = steering(phi, n_a);
  const double tx = std::norm(a.dot(beam.weights));
  double sum = 0.0;
  for (int b = 0; b < plan.blocks(); ++b) {
    sum += (plan.combiners[b].adjoint() * a).squaredNorm() * frames[b].squaredNorm();
  }
  return tx * sum;
}

GlrtValue glrt_statistic_oracle(const RxBlocks& rx, const std::vector<OfdmFrame>& frames,
                                const RxReductionPlan& plan, const TxBeam& beam,
                                const SystemConfig& cfg, double doppler, double delay, double phi) {
  const int n_sym = rx.n_symbols;
  const int n_sc = rx.n_subcarriers;
  const int n_rf = rx.n_rf;
  const int nm = n_sym * n_sc;
  const CVector a = steering(phi, cfg.N_a);
  const Complex tx = a.dot(beam.weights);  // a^H f

  Complex num{};
  double den = 0.0;
  for (int b = 0; b < rx.n_blocks(); ++b) {
    const CVector g = (plan.combiners[b].adjoint() * a) * tx;
    CVector tdiag(nm);
    for (int n = 0; n < n_sym; ++n) {
      const double t = static_cast<double>(b * n_sym + n);
      for (int m = 0; m < n_sc; ++m) {
        tdiag[n * n_sc + m] = std::polar(1.0, 2.0 * kPi * (t * cfg.T0() * doppler -
                                                            m * cfg.delta_f * delay));
      }
    }
    // G_b = T (x) g, an (N_rf NM) x NM matrix.
    CMatrix gb = CMatrix::Zero(static_cast<Eigen::Index>(n_rf) * nm, nm);
    for (int k = 0; k < nm; ++k) gb.block(static_cast<Eigen::Index>(k) * n_rf, k, n_rf, 1) = tdiag[k] * g;

    CVector zeta(nm);
    for (int n = 0; n < n_sym; ++n) {
      for (int m = 0; m < n_sc; ++m) zeta[n * n_sc + m] = frames[b](n, m);
    }
    const Eigen::Map<const CVector> r(rx.blocks[b].data(), static_cast<Eigen::Index>(n_rf) * nm);
    const CVector gz = gb * zeta;
    num += r.dot(gz);  // r^H G zeta
    den += gz.squaredNorm();
  }
  if (den <= 1e-24 * max_denominator(cfg.N_a, nm, rx.n_blocks())) return {};
  return {std::norm(num) / den, std::conj(num) / den};
}

struct GlrtEngine::Impl {
  int n_sym;
  int n_sc;
  int n_blocks;
  int n_a;
  int fft_doppler;
  int fft_delay;
  FftwBuffer buffer;
  FftwPlan rows;         // delay axis, FFTW_BACKWARD, first B*N rows only
  FftwPlan cols;         // Doppler axis, FFTW_FORWARD, first `planned_cols` columns
  int planned_cols = -1;

  Impl(const SystemConfig& cfg, const GridSpec& spec)
      : n_sym(cfg.N),
        n_sc(cfg.M),
        n_blocks(cfg.B),
        n_a(cfg.N_a),
        fft_doppler(cfg.B * cfg.N * spec.doppler_oversample),
        fft_delay(cfg.M * spec.delay_oversample),
        buffer(static_cast<std::size_t>(fft_doppler) * fft_delay) {
    std::lock_guard lock(fftw_planner_mutex());
    int n[] = {fft_delay};
    rows = FftwPlan(fftw_plan_many_dft(1, n, n_blocks * n_sym, as_fftw(buffer.data), nullptr, 1,
                                       fft_delay, as_fftw(buffer.data), nullptr, 1, fft_delay,
                                       FFTW_BACKWARD, FFTW_ESTIMATE));
    if (!rows.plan) throw Error("glrt: FFTW planning failed");
  }

  void plan_columns(int columns) {
    if (columns == planned_cols) return;
    cols.reset();
    std::lock_guard lock(fftw_planner_mutex());
    int n[] = {fft_doppler};
    cols = FftwPlan(fftw_plan_many_dft(1, n, columns, as_fftw(buffer.data), nullptr, fft_delay, 1,
                                       as_fftw(buffer.data), nullptr, fft_delay, 1, FFTW_FORWARD,
                                       FFTW_ESTIMATE));
    if (!cols.plan) throw Error("glrt: FFTW planning failed");
    planned_cols = columns;
  }
};

GlrtEngine::GlrtEngine(const SystemConfig& cfg, const GridSpec& spec)
    : impl_(std::make_unique<Impl>(cfg, spec)) {}
GlrtEngine::~GlrtEngine() = default;
GlrtEngine::GlrtEngine(GlrtEngine&&) noexcept = default;
GlrtEngine& GlrtEngine::operator=(GlrtEngine&&) noexcept = default;

void GlrtEngine::evaluate(const RxBlocks& rx, const std::vector<OfdmFrame>& frames,
                          const RxReductionPlan& plan, const TxBeam& beam, DetectionGrid& grid) {
  Impl& e = *impl_;
  if (rx.n_symbols != e.n_sym || rx.n_subcarriers != e.n_sc || rx.n_blocks() != e.n_blocks ||
      plan.blocks() != e.n_blocks || static_cast<int>(frames.size()) != e.n_blocks) {
    throw Error("glrt: receive dimensions disagree with the engine configuration");
  }
  if (grid.fft_doppler != e.fft_doppler || grid.fft_delay != e.fft_delay) {
    throw Error("glrt: grid was built for a different FFT size");
  }
  if (beam.weights.size() != e.n_a) throw Error("glrt: beam size != N_a");
  const int n_nu = grid.n_doppler();
  const int n_tau = grid.n_delay();
  e.plan_columns(n_tau);
  grid.stat.assign(grid.cells(), 0.0);
  grid.amplitude.assign(grid.cells(), Complex{});

  std::vector<double> energies(e.n_blocks);
  for (int b = 0; b < e.n_blocks; ++b) energies[b] = frames[b].squaredNorm();

  const int nm = e.n_sym * e.n_sc;
  const double degenerate = 1e-24 * max_denominator(e.n_a, nm, e.n_blocks);
  Complex* buf = e.buffer.data;
  const std::size_t total = static_cast<std::size_t>(e.fft_doppler) * e.fft_delay;

  for (int i_phi = 0; i_phi < grid.n_angle(); ++i_phi) {
    const CVector a = steering_sin(grid.angle_sin[i_phi], e.n_a);
    const Complex tx = a.dot(beam.weights);
    double den = 0.0;
    std::fill(buf, buf + total, Complex{});
    for (int b = 0; b < e.n_blocks; ++b) {
      const CVector w = plan.combiners[b].adjoint() * a;  // U_b^H a
      den += w.squaredNorm() * energies[b];
      const CMatrix& block = rx.blocks[b];
      for (int n = 0; n < e.n_sym; ++n) {
        Complex* row = buf + static_cast<std::size_t>(b * e.n_sym + n) * e.fft_delay;
        for (int m = 0; m < e.n_sc; ++m) {
          const int col = n * e.n_sc + m;
          row[m] = std::conj(frames[b](n, m)) * w.dot(block.col(col));
        }
      }
    }
    den *= std::norm(tx);
    if (den <= degenerate) continue;

    fftw_execute(e.rows.plan);
    fftw_execute(e.cols.plan);

    const Complex scale = std::conj(tx);
    for (int q = 0; q < n_tau; ++q) {
      for (int k = 0; k < n_nu; ++k) {
        int bin = (k - n_nu / 2) % e.fft_doppler;
        if (bin < 0) bin += e.fft_doppler;
        const Complex c = scale * buf[static_cast<std::size_t>(bin) * e.fft_delay + q];
        const std::size_t idx = grid.index(k, q, i_phi);
        grid.stat[idx] = std::norm(c) / den;
        grid.amplitude[idx] = c / den;
      }
    }
  }
}

DetectionGrid glrt_map_fast(const RxBlocks& rx, const std::vector<OfdmFrame>& frames,
                            const RxReductionPlan& plan, const TxBeam& beam,
                            const DetectionGrid& axes, const SystemConfig& cfg,
                            const GridSpec& spec) {
  GlrtEngine engine(cfg, spec);
  DetectionGrid grid = axes;
  engine.evaluate(rx, frames, plan, beam, grid);
  return grid;
}

}  // namespace isac
