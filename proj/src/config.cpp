#include "spikesift/config.hpp"

#include <cmath>
#include <fstream>
#include <istream>

#include "spikesift/trace.hpp"

namespace spikesift {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) throw Error("config: " + key + " expects a number");
  return v;
}

int to_int(const std::string& key, const std::string& value) {
  const double v = to_double(key, value);
  if (v != std::floor(v)) throw Error("config: " + key + " expects an integer");
  return static_cast<int>(v);
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw Error("config: " + key + " expects true or false");
}

}  // namespace

void Config::validate() const {
  auto positive = [](const char* key, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(std::string("config: ") + key + " must be positive");
  };
  positive("kappa", kappa);
  positive("lambda", lambda);
  positive("n_min", n_min);
  positive("l_min_seconds", l_min_seconds);
  positive("d_max_um", d_max_um);
  positive("mu", mu);
  positive("band_low_hz", band_low_hz);
  positive("band_high_hz", band_high_hz);
  positive("tol_ms", tol_ms);
  positive("threads", threads);
  if (band_low_hz >= band_high_hz) throw Error("config: band_low_hz must be below band_high_hz");
}

void apply_setting(Config& config, const std::string& key, const std::string& value) {
  if (key == "kappa") config.kappa = to_double(key, value);
  else if (key == "lambda") config.lambda = to_double(key, value);
  else if (key == "n_min") config.n_min = to_int(key, value);
  else if (key == "l_min_seconds") config.l_min_seconds = to_double(key, value);
  else if (key == "d_max_um") config.d_max_um = to_double(key, value);
  else if (key == "mu") config.mu = to_double(key, value);
  else if (key == "band_low_hz") config.band_low_hz = to_double(key, value);
  else if (key == "band_high_hz") config.band_high_hz = to_double(key, value);
  else if (key == "tol_ms") config.tol_ms = to_double(key, value);
  else if (key == "invert_polarity") config.invert_polarity = to_bool(key, value);
  else if (key == "threads") config.threads = to_int(key, value);
  else throw Error("config: unknown key '" + key + "'");
}

std::map<std::string, std::string> parse_settings(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error("config line " + std::to_string(number) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw Error("config line " + std::to_string(number) + ": expected key = value");
    }
    out[key] = value;
  }
  return out;
}

Config load_config(const std::filesystem::path& path, Config base) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  for (const auto& [key, value] : parse_settings(in)) apply_setting(base, key, value);
  return base;
}

}  // namespace spikesift
