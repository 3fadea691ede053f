#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "isac/types.hpp"

namespace isac {

/// Flat `key = value` configuration text.
///
/// Syntax: one assignment per line, `#` starts a comment, blank lines are
/// ignored, keys may contain dots to group settings (`cfar.window`). Lists are
/// comma separated; point lists separate points with `;` (`0,20; 0,80`).
/// Duplicate keys are an error.
class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValueFile read(const std::filesystem::path& path);

  bool contains(const std::string& key) const { return entries_.count(key) != 0; }
  const std::map<std::string, std::string>& entries() const { return entries_; }
  void set(const std::string& key, std::string value) { entries_[key] = std::move(value); }

  std::optional<double> get_double(const std::string& key) const;
  std::optional<std::int64_t> get_int(const std::string& key) const;
  std::optional<std::uint64_t> get_u64(const std::string& key) const;
  std::optional<std::vector<double>> get_doubles(const std::string& key) const;
  std::optional<std::vector<std::pair<double, double>>> get_points(const std::string& key) const;
  std::optional<std::string> get_string(const std::string& key) const;

  /// Throws if any key is not in `known`.
  void require_known(const std::vector<std::string>& known) const;

 private:
  std::string origin_;
  std::map<std::string, std::string> entries_;
};

/// System constants. Defaults are the reference parameter set
/// (90 GHz carrier, 160 MHz over 100 subcarriers, 64-element array, 4 RF chains).
struct SystemConfig {
  double f_c = 90.0e9;             // Hz
  double W = 160.0e6;              // Hz
  double delta_f = 1.6e6;          // Hz
  int M = 100;                     // subcarriers
  int N = 4;                       // symbols per block
  int B = 4;                       // blocks per epoch
  double T_cp = 1.0 / (6.0 * 1.6e6);  // s
  int N_a = 64;
  int N_rf = 4;
  int D = 5;                       // minimum receive codebook size
  double P_tx = 0.039810717055349734;  // W (16 dBm)
  double N_0 = 2.0e-21;            // W/Hz
  double sigma_rcs_total = 100.0;  // m^2 (20 dBsm)
  double delta_T = 0.1;            // s
  double P_fa = 1.0e-4;
  std::vector<double> fov_set{7.0, 10.0, 15.0, 20.0};  // degrees
  double c = 299792458.0;          // m/s
  int epochs = 400;
  std::uint64_t seed = 1;

  /// Symbol duration including cyclic prefix.
  double T0() const { return 1.0 / delta_f + T_cp; }
  double wavelength() const { return c / f_c; }

  /// Checks every invariant; throws Error naming the field and offending values.
  void validate() const;

  bool operator==(const SystemConfig&) const = default;
};

/// Keys understood by SystemConfig.
const std::vector<std::string>& system_config_keys();

/// Fills a SystemConfig from parsed text. Missing keys keep defaults. Does not validate.
SystemConfig system_config_from(const KeyValueFile& kv);

/// Reads and validates a config file. Keys of other sections (cfar.*,
/// tracker.*, scenario.*, grid.*) are accepted and ignored here.
SystemConfig load_config(const std::filesystem::path& path);

/// Writes every field at full precision, so `load_config` of the result
/// reproduces `cfg` exactly.
std::string serialize_config(const SystemConfig& cfg);

/// Per-sample noise power sigma_n^2 = N_0 * W.
double noise_variance(const SystemConfig& cfg);

}  // namespace isac
