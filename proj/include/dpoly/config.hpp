#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dpoly {

inline constexpr const char* kVersion = "dpoly 0.1.0";

/// Flat key-value run configuration. Precedence: CLI > file > defaults.
/// Serializes losslessly; every output embeds the full configuration so a
/// re-run reproduces the file byte for byte.
struct RunConfig {
  std::string command;
  std::uint64_t seed = 1;
  int workers = 0;  // 0 = DPOLY_WORKERS env or hardware
  std::vector<long> N_list{1024};
  int h = 2;
  double beta_hat = 0.5;
  std::string law = "gaussian";
  std::size_t replicas = 1000;
  std::string out;
  std::string box_mode = "scaled";  // exact | scaled
  double box_factor = 3.0;
  std::map<std::string, std::string> extra;

  void set(const std::string& key, const std::string& value);
  std::string get_extra(const std::string& key, const std::string& fallback) const;

  static RunConfig from_file(const std::string& path);
  void load_file(const std::string& path);

  /// Canonical "key=value" lines (sorted keys, 17 significant digits).
  std::string to_kv() const;
  /// Commented header block for CSV outputs.
  std::string csv_header() const;

  void validate() const;  // throws on malformed fields
};

std::string format_g17(double x);
std::vector<long> parse_long_list(const std::string& s);

}  // namespace dpoly
