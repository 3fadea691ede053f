#include "isac/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace isac {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

double parse_double(const std::string& key, const std::string& text) {
  // strtod accepts the exponent forms people write in config files (1.6e6).
  const std::string t = trim(text);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(v)) {
    throw Error("config: key '" + key + "' expects a number, got '" + text + "'");
  }
  return v;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool has_section_prefix(const std::string& key) {
  static const char* prefixes[] = {"cfar.", "grid.", "tracker.", "scenario.", "harness."};
  return std::any_of(std::begin(prefixes), std::end(prefixes),
                     [&](const char* p) { return key.rfind(p, 0) == 0; });
}

}  // namespace

KeyValueFile KeyValueFile::parse(const std::string& text, const std::string& origin) {
  KeyValueFile kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw Error(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw Error(origin + ":" + std::to_string(lineno) + ": empty key");
    if (!kv.entries_.emplace(key, value).second) {
      throw Error(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }
  return kv;
}

KeyValueFile KeyValueFile::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("config: cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::optional<double> KeyValueFile::get_double(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return parse_double(key, it->second);
}

std::optional<std::int64_t> KeyValueFile::get_int(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  const std::string& s = it->second;
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error("config: key '" + key + "' expects an integer, got '" + s + "'");
  }
  return v;
}

std::optional<std::uint64_t> KeyValueFile::get_u64(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  const std::string& s = it->second;
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error("config: key '" + key + "' expects an unsigned integer, got '" + s + "'");
  }
  return v;
}

std::optional<std::vector<double>> KeyValueFile::get_doubles(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  std::vector<double> out;
  if (trim(it->second).empty()) return out;
  for (const auto& item : split(it->second, ',')) out.push_back(parse_double(key, item));
  return out;
}

std::optional<std::vector<std::pair<double, double>>> KeyValueFile::get_points(
    const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  std::vector<std::pair<double, double>> out;
  if (trim(it->second).empty()) return out;
  for (const auto& point : split(it->second, ';')) {
    const auto xy = split(point, ',');
    if (xy.size() != 2) {
      throw Error("config: key '" + key + "' expects 'x,y; x,y; ...', got '" + point + "'");
    }
    out.emplace_back(parse_double(key, xy[0]), parse_double(key, xy[1]));
  }
  return out;
}

std::optional<std::string> KeyValueFile::get_string(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void KeyValueFile::require_known(const std::vector<std::string>& known) const {
  for (const auto& [key, value] : entries_) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(origin_ + ": unknown key '" + key + "'");
    }
  }
}

void SystemConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error("config: " + msg); };
  auto positive = [&](const char* name, double v) {
    if (!(v > 0.0)) fail(std::string(name) + " must be > 0, got " + fmt_double(v));
  };
  positive("f_c", f_c);
  positive("W", W);
  positive("delta_f", delta_f);
  positive("c", c);
  positive("delta_T", delta_T);
  if (M < 1) fail("M must be >= 1, got " + std::to_string(M));
  if (N < 1) fail("N must be >= 1, got " + std::to_string(N));
  if (B < 1) fail("B must be >= 1, got " + std::to_string(B));
  if (epochs < 1) fail("epochs must be >= 1, got " + std::to_string(epochs));
  const double band = M * delta_f;
  if (std::abs(W - band) > 1e-12 * std::max(std::abs(W), std::abs(band))) {
    fail("W != M*delta_f: W = " + fmt_double(W) + ", M*delta_f = " + fmt_double(band));
  }
  if (T_cp < 0.0) fail("T_cp must be >= 0, got " + fmt_double(T_cp));
  if (!(T0() > 0.0)) fail("T_0 = 1/delta_f + T_cp must be > 0, got " + fmt_double(T0()));
  if (N_rf < 1) fail("N_rf must be >= 1, got " + std::to_string(N_rf));
  if (!(N_rf < D)) {
    fail("N_rf < D violated: N_rf = " + std::to_string(N_rf) + ", D = " + std::to_string(D));
  }
  if (!(D <= N_a)) {
    fail("D <= N_a violated: D = " + std::to_string(D) + ", N_a = " + std::to_string(N_a));
  }
  if (P_tx < 0.0) fail("P_tx must be >= 0, got " + fmt_double(P_tx));
  if (N_0 < 0.0) fail("N_0 must be >= 0, got " + fmt_double(N_0));
  if (sigma_rcs_total < 0.0) fail("sigma_rcs_total must be >= 0, got " + fmt_double(sigma_rcs_total));
  if (!(P_fa > 0.0 && P_fa < 1.0)) fail("P_fa must lie in (0,1), got " + fmt_double(P_fa));
  if (fov_set.empty()) fail("fov_set must not be empty");
  for (std::size_t i = 0; i < fov_set.size(); ++i) {
    if (!(fov_set[i] > 0.0 && fov_set[i] < 90.0)) {
      fail("fov_set entries must lie in (0,90) degrees, got " + fmt_double(fov_set[i]));
    }
    if (i > 0 && !(fov_set[i] > fov_set[i - 1])) {
      fail("fov_set must be strictly increasing: " + fmt_double(fov_set[i - 1]) + " then " +
           fmt_double(fov_set[i]));
    }
  }
}

const std::vector<std::string>& system_config_keys() {
  static const std::vector<std::string> keys{
      "f_c",  "W",   "delta_f", "M",   "N",   "B",       "T_cp",            "N_a",
      "N_rf", "D",   "P_tx",    "P_tx_dBm", "N_0", "sigma_rcs_total", "sigma_rcs_dBsm",
      "delta_T", "P_fa", "fov_set", "c", "epochs", "seed"};
  return keys;
}

SystemConfig system_config_from(const KeyValueFile& kv) {
  SystemConfig cfg;
  auto set_d = [&](const char* key, double& dst) {
    if (auto v = kv.get_double(key)) dst = *v;
  };
  auto set_i = [&](const char* key, int& dst) {
    if (auto v = kv.get_int(key)) dst = static_cast<int>(*v);
  };
  set_d("f_c", cfg.f_c);
  set_d("W", cfg.W);
  set_d("delta_f", cfg.delta_f);
  set_i("M", cfg.M);
  set_i("N", cfg.N);
  set_i("B", cfg.B);
  // The cyclic prefix defaults to one sixth of the useful symbol time.
  cfg.T_cp = 1.0 / (6.0 * cfg.delta_f);
  set_d("T_cp", cfg.T_cp);
  set_i("N_a", cfg.N_a);
  set_i("N_rf", cfg.N_rf);
  set_i("D", cfg.D);
  if (kv.contains("P_tx") && kv.contains("P_tx_dBm")) {
    throw Error("config: give only one of P_tx and P_tx_dBm");
  }
  set_d("P_tx", cfg.P_tx);
  if (auto v = kv.get_double("P_tx_dBm")) cfg.P_tx = dbm2watt(*v);
  set_d("N_0", cfg.N_0);
  if (kv.contains("sigma_rcs_total") && kv.contains("sigma_rcs_dBsm")) {
    throw Error("config: give only one of sigma_rcs_total and sigma_rcs_dBsm");
  }
  set_d("sigma_rcs_total", cfg.sigma_rcs_total);
  if (auto v = kv.get_double("sigma_rcs_dBsm")) cfg.sigma_rcs_total = db2lin(*v);
  set_d("delta_T", cfg.delta_T);
  set_d("P_fa", cfg.P_fa);
  if (auto v = kv.get_doubles("fov_set")) cfg.fov_set = *v;
  set_d("c", cfg.c);
  set_i("epochs", cfg.epochs);
  if (auto v = kv.get_u64("seed")) cfg.seed = *v;
  return cfg;
}

SystemConfig load_config(const std::filesystem::path& path) {
  const KeyValueFile kv = KeyValueFile::read(path);
  const auto& known = system_config_keys();
  for (const auto& [key, value] : kv.entries()) {
    if (std::find(known.begin(), known.end(), key) == known.end() && !has_section_prefix(key)) {
      throw Error(path.string() + ": unknown key '" + key + "'");
    }
  }
  SystemConfig cfg = system_config_from(kv);
  cfg.validate();
  return cfg;
}

std::string serialize_config(const SystemConfig& cfg) {
  std::ostringstream out;
  out << "f_c = " << fmt_double(cfg.f_c) << "\n";
  out << "W = " << fmt_double(cfg.W) << "\n";
  out << "delta_f = " << fmt_double(cfg.delta_f) << "\n";
  out << "M = " << cfg.M << "\n";
  out << "N = " << cfg.N << "\n";
  out << "B = " << cfg.B << "\n";
  out << "T_cp = " << fmt_double(cfg.T_cp) << "\n";
  out << "N_a = " << cfg.N_a << "\n";
  out << "N_rf = " << cfg.N_rf << "\n";
  out << "D = " << cfg.D << "\n";
  out << "P_tx = " << fmt_double(cfg.P_tx) << "\n";
  out << "N_0 = " << fmt_double(cfg.N_0) << "\n";
  out << "sigma_rcs_total = " << fmt_double(cfg.sigma_rcs_total) << "\n";
  out << "delta_T = " << fmt_double(cfg.delta_T) << "\n";
  out << "P_fa = " << fmt_double(cfg.P_fa) << "\n";
  out << "fov_set = ";
  for (std::size_t i = 0; i < cfg.fov_set.size(); ++i) {
    out << (i ? ", " : "") << fmt_double(cfg.fov_set[i]);
  }
  out << "\n";
  out << "c = " << fmt_double(cfg.c) << "\n";
  out << "epochs = " << cfg.epochs << "\n";
  out << "seed = " << cfg.seed << "\n";
  return out.str();
}

double noise_variance(const SystemConfig& cfg) { return cfg.N_0 * cfg.W; }

}  // namespace isac
