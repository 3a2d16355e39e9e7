#include "spikesift/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

namespace spikesift {

using nlohmann::json;

std::string DriftRegime::to_string() const {
  std::ostringstream out;
  switch (kind) {
    case DriftKind::None: out << "none"; break;
    case DriftKind::Linear: out << "linear:" << rate_um_per_min; break;
    case DriftKind::Jump: out << "jump:" << jump_um << '@' << jump_time_s; break;
    case DriftKind::Gp: out << "gp:" << gp_scale_um; break;
  }
  return out.str();
}

namespace {

double parse_number(const std::string& text, const std::string& whole) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw Error("bad drift regime '" + whole + "'");
  }
  if (used != text.size() || !std::isfinite(v)) throw Error("bad drift regime '" + whole + "'");
  return v;
}

}  // namespace

DriftRegime parse_drift(const std::string& text) {
  DriftRegime r;
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string tail = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (head == "none" && colon == std::string::npos) return r;
  if (head == "linear" && !tail.empty()) {
    r.kind = DriftKind::Linear;
    r.rate_um_per_min = parse_number(tail, text);
    return r;
  }
  if (head == "jump") {
    const auto at = tail.find('@');
    if (at == std::string::npos) throw Error("bad drift regime '" + text + "'");
    r.kind = DriftKind::Jump;
    r.jump_um = parse_number(tail.substr(0, at), text);
    r.jump_time_s = parse_number(tail.substr(at + 1), text);
    return r;
  }
  if (head == "gp") {
    r.kind = DriftKind::Gp;
    if (colon != std::string::npos) r.gp_scale_um = parse_number(tail, text);
    return r;
  }
  throw Error("bad drift regime '" + text + "'");
}

double GroundTruth::drift_offset(double t_s) const {
  switch (drift.kind) {
    case DriftKind::None: return 0.0;
    case DriftKind::Linear: return drift.rate_um_per_min * t_s / 60.0;
    case DriftKind::Jump: return t_s >= drift.jump_time_s ? drift.jump_um : 0.0;
    case DriftKind::Gp: {
      double sum = 0.0;
      for (std::size_t i = 0; i < gp_frequencies.size(); ++i) {
        sum += std::cos(gp_frequencies[i] * t_s + gp_phases[i]);
      }
      if (gp_frequencies.empty()) return 0.0;
      return drift.gp_scale_um * std::sqrt(2.0 / static_cast<double>(gp_frequencies.size())) * sum;
    }
  }
  return 0.0;
}

double unit_waveform(double t_ms, double width_ms) {
  const double s1 = width_ms / 2.3548;  // FWHM -> sigma
  const double s2 = 2.5 * s1;
  const double c2 = 2.5 * width_ms;
  auto shape = [&](double t) {
    return -std::exp(-t * t / (2 * s1 * s1)) +
           0.3 * std::exp(-(t - c2) * (t - c2) / (2 * s2 * s2));
  };
  return shape(t_ms) / -shape(0.0);
}

double amplitude_at(double amplitude, double d_um) {
  const double f = 1.0 + d_um / 25.0;
  return amplitude / (f * f);
}

namespace {

constexpr double kMadPerSigma = 0.6745;
constexpr double kPreMs = 1.0;
constexpr double kPostMs = 2.5;

std::vector<NeuronPlacement> place_neurons(const GeneratorSpec& spec, const ProbeGeometry& probe,
                                           std::mt19937_64& rng) {
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (const auto& ch : probe.channels()) {
    x_lo = std::min(x_lo, ch.x_um);
    x_hi = std::max(x_hi, ch.x_um);
    y_lo = std::min(y_lo, ch.y_um);
    y_hi = std::max(y_hi, ch.y_um);
  }
  std::uniform_real_distribution<double> ux(x_lo - 10.0, x_hi + 10.0);
  std::uniform_real_distribution<double> uy(y_lo, y_hi);
  std::uniform_real_distribution<double> uz(spec.z_min_um, spec.z_max_um);
  const double unit = spec.noise_sigma > 0.0 ? kMadPerSigma * spec.noise_sigma : 1.0;
  std::uniform_real_distribution<double> ua(spec.amplitude_min_mad * unit,
                                            spec.amplitude_max_mad * unit);
  // Log-uniform rates: most neurons fire slowly, a few fast.
  std::uniform_real_distribution<double> ur(std::log(spec.rate_min_hz), std::log(spec.rate_max_hz));

  std::vector<NeuronPlacement> out;
  constexpr int kAttempts = 10000;
  for (std::size_t n = 0; n < spec.neurons; ++n) {
    bool placed = false;
    for (int attempt = 0; attempt < kAttempts && !placed; ++attempt) {
      NeuronPlacement p{ux(rng), uy(rng), uz(rng), 0.0, 0.0};
      placed = std::all_of(out.begin(), out.end(), [&](const NeuronPlacement& q) {
        return std::hypot(p.x_um - q.x_um, p.y_um - q.y_um, p.z_um - q.z_um) >=
               spec.min_separation_um;
      });
      if (placed) out.push_back(p);
    }
    if (!placed) {
      throw Error("cannot place " + std::to_string(spec.neurons) + " neurons " +
                  std::to_string(spec.min_separation_um) + " um apart on this probe");
    }
  }
  // The drawn amplitude is the peak on the nearest channel; store its
  // value at the source.
  for (auto& p : out) {
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& ch : probe.channels()) {
      nearest = std::min(nearest, std::hypot(ch.x_um - p.x_um, ch.y_um - p.y_um, p.z_um));
    }
    const double f = 1.0 + nearest / 25.0;
    p.amplitude = ua(rng) * f * f;
    p.rate_hz = std::exp(ur(rng));
  }
  return out;
}

std::vector<std::int64_t> spike_train(double rate_hz, double dead_ms, double fs, std::int64_t first,
                                      std::int64_t last, std::mt19937_64& rng) {
  std::vector<std::int64_t> out;
  if (rate_hz <= 0.0) return out;
  const auto dead = static_cast<std::int64_t>(std::ceil(dead_ms * 1e-3 * fs));
  const double mean_gap_s = 1.0 / rate_hz - dead_ms * 1e-3;
  if (mean_gap_s <= 0.0) throw Error("firing rate incompatible with dead time");
  std::exponential_distribution<double> gap(1.0 / mean_gap_s);
  std::int64_t t = static_cast<std::int64_t>(std::llround(gap(rng) * fs));
  while (t < last) {
    if (t >= first) out.push_back(t);
    t += dead + static_cast<std::int64_t>(std::llround(gap(rng) * fs));
  }
  return out;
}

}  // namespace

Synthetic generate(const GeneratorSpec& spec) {
  if (spec.channels == 0 || spec.seconds <= 0.0 || spec.sample_rate <= 0.0 ||
      spec.noise_sigma < 0.0) {
    throw Error("invalid generator spec");
  }
  auto probe = ProbeGeometry::two_column(spec.channels);
  const double fs = spec.sample_rate;
  const auto num_samples = static_cast<std::int64_t>(std::llround(spec.seconds * fs));
  const auto pre = static_cast<std::int64_t>(std::llround(kPreMs * 1e-3 * fs));
  const auto post = static_cast<std::int64_t>(std::llround(kPostMs * 1e-3 * fs));

  std::mt19937_64 rng(spec.seed);
  auto placements = spec.placements.empty() ? place_neurons(spec, probe, rng) : spec.placements;

  GroundTruth truth;
  truth.sample_rate = fs;
  truth.num_samples = num_samples;
  truth.noise_sigma = spec.noise_sigma;
  truth.drift = spec.drift;
  std::uniform_real_distribution<double> uw(0.25, 0.45);
  for (std::size_t i = 0; i < placements.size(); ++i) {
    const auto& p = placements[i];
    TruthNeuron n;
    n.id = static_cast<int>(i);
    n.x_um = p.x_um;
    n.y_um = p.y_um;
    n.z_um = p.z_um;
    n.amplitude = p.amplitude;
    n.rate_hz = p.rate_hz;
    n.width_ms = uw(rng);
    n.spike_times = spike_train(p.rate_hz, spec.dead_time_ms, fs, pre, num_samples - post, rng);
    truth.neurons.push_back(std::move(n));
  }
  if (spec.drift.kind == DriftKind::Gp) {
    constexpr int kFeatures = 64;
    std::normal_distribution<double> omega(0.0, 1.0 / spec.drift.gp_length_s);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    for (int i = 0; i < kFeatures; ++i) {
      truth.gp_frequencies.push_back(omega(rng));
      truth.gp_phases.push_back(phase(rng));
    }
  }

  // Waveforms sampled on the integer grid around each trough.
  std::vector<std::vector<double>> shapes;
  for (const auto& n : truth.neurons) {
    std::vector<double> w(static_cast<std::size_t>(pre + post + 1));
    for (std::int64_t s = -pre; s <= post; ++s) {
      w[static_cast<std::size_t>(s + pre)] = unit_waveform(1e3 * static_cast<double>(s) / fs, n.width_ms);
    }
    shapes.push_back(std::move(w));
  }

  const auto T = static_cast<std::size_t>(num_samples);
  std::vector<std::int16_t> samples(spec.channels * T);
  std::vector<double> buffer(T);
  for (std::size_t c = 0; c < spec.channels; ++c) {
    std::fill(buffer.begin(), buffer.end(), 0.0);
    if (spec.noise_sigma > 0.0) {
      std::seed_seq seq{spec.seed, std::uint64_t{0x6e6f697365}, static_cast<std::uint64_t>(c)};
      std::mt19937_64 noise_rng(seq);
      std::normal_distribution<double> noise(0.0, spec.noise_sigma);
      for (auto& v : buffer) v = noise(noise_rng);
    }
    const Channel& ch = probe.channel(static_cast<int>(c));
    for (std::size_t i = 0; i < truth.neurons.size(); ++i) {
      const auto& n = truth.neurons[i];
      const auto& shape = shapes[i];
      for (auto t : n.spike_times) {
        const double y = n.y_um + truth.drift_offset(static_cast<double>(t) / fs);
        const double d = std::hypot(ch.x_um - n.x_um, ch.y_um - y, n.z_um);
        const double a = amplitude_at(n.amplitude, d);
        double* dst = buffer.data() + (t - pre);
        for (std::size_t s = 0; s < shape.size(); ++s) dst[s] += a * shape[s];
      }
    }
    std::int16_t* out = samples.data() + c * T;
    for (std::size_t t = 0; t < T; ++t) {
      const double v = std::clamp(std::nearbyint(buffer[t]), -32768.0, 32767.0);
      out[t] = static_cast<std::int16_t>(v);
    }
  }
  return {Recording(std::move(samples), T, fs, std::move(probe)), std::move(truth)};
}

void write_truth(const GroundTruth& truth, const std::filesystem::path& path) {
  json doc;
  doc["format"] = "spikesift-truth";
  doc["version"] = 1;
  doc["sample_rate"] = truth.sample_rate;
  doc["num_samples"] = truth.num_samples;
  doc["noise_sigma"] = truth.noise_sigma;
  doc["drift"] = {{"regime", truth.drift.to_string()},
                  {"gp_length_s", truth.drift.gp_length_s},
                  {"gp_frequencies", truth.gp_frequencies},
                  {"gp_phases", truth.gp_phases}};
  json neurons = json::array();
  for (const auto& n : truth.neurons) {
    neurons.push_back({{"id", n.id},
                       {"x_um", n.x_um},
                       {"y_um", n.y_um},
                       {"z_um", n.z_um},
                       {"amplitude", n.amplitude},
                       {"rate_hz", n.rate_hz},
                       {"width_ms", n.width_ms},
                       {"spike_times", n.spike_times}});
  }
  doc["neurons"] = std::move(neurons);
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

GroundTruth read_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  GroundTruth truth;
  try {
    const json doc = json::parse(in);
    if (doc.at("format") != "spikesift-truth") throw Error(path.string() + ": not a truth file");
    truth.sample_rate = doc.at("sample_rate").get<double>();
    truth.num_samples = doc.at("num_samples").get<std::int64_t>();
    truth.noise_sigma = doc.at("noise_sigma").get<double>();
    const auto& drift = doc.at("drift");
    truth.drift = parse_drift(drift.at("regime").get<std::string>());
    truth.drift.gp_length_s = drift.at("gp_length_s").get<double>();
    truth.gp_frequencies = drift.at("gp_frequencies").get<std::vector<double>>();
    truth.gp_phases = drift.at("gp_phases").get<std::vector<double>>();
    for (const auto& jn : doc.at("neurons")) {
      TruthNeuron n;
      n.id = jn.at("id").get<int>();
      n.x_um = jn.at("x_um").get<double>();
      n.y_um = jn.at("y_um").get<double>();
      n.z_um = jn.at("z_um").get<double>();
      n.amplitude = jn.at("amplitude").get<double>();
      n.rate_hz = jn.at("rate_hz").get<double>();
      n.width_ms = jn.at("width_ms").get<double>();
      n.spike_times = jn.at("spike_times").get<std::vector<std::int64_t>>();
      truth.neurons.push_back(std::move(n));
    }
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return truth;
}

}  // namespace spikesift
