#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace spikesift {

struct Config {
  double kappa = 10.0;
  double lambda = 0.4;
  int n_min = 5;
  double l_min_seconds = 10.0;
  double d_max_um = 30.0;
  double mu = 0.6;
  double band_low_hz = 300.0;
  double band_high_hz = 3000.0;
  double tol_ms = 0.5;
  bool invert_polarity = false;
  int threads = 1;

  /// Throws Error naming the first offending key.
  void validate() const;
};

/// Applies `key = value` pairs. Unknown keys are an error.
void apply_setting(Config& config, const std::string& key, const std::string& value);

/// Reads `key = value` lines; `#` starts a comment.
std::map<std::string, std::string> parse_settings(std::istream& in);
Config load_config(const std::filesystem::path& path, Config base = {});

}  // namespace spikesift
