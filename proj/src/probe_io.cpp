#include "spikesift/probe_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

namespace spikesift {

namespace fs = std::filesystem;
using nlohmann::json;

ProbeGeometry::ProbeGeometry(std::vector<Channel> channels) : channels_(std::move(channels)) {
  std::sort(channels_.begin(), channels_.end(),
            [](const Channel& a, const Channel& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < channels_.size(); ++i) {
    if (i > 0 && channels_[i].id == channels_[i - 1].id) {
      throw Error("duplicate channel " + std::to_string(channels_[i].id));
    }
    if (channels_[i].id != static_cast<int>(i)) {
      throw Error("channel ids must be dense 0..C-1 (missing " + std::to_string(i) + ")");
    }
  }
  std::set<std::pair<double, double>> positions;
  for (const auto& ch : channels_) {
    if (!std::isfinite(ch.x_um) || !std::isfinite(ch.y_um)) {
      throw Error("non-finite position for channel " + std::to_string(ch.id));
    }
    if (!positions.emplace(ch.x_um, ch.y_um).second) {
      throw Error("channels share position (" + std::to_string(ch.x_um) + ", " +
                  std::to_string(ch.y_um) + ")");
    }
  }

  std::map<double, std::vector<int>> by_x;
  for (const auto& ch : channels_) by_x[ch.x_um].push_back(ch.id);
  for (auto& [x, ids] : by_x) {
    std::sort(ids.begin(), ids.end(),
              [&](int a, int b) { return channels_[a].y_um < channels_[b].y_um; });
    columns_.push_back(std::move(ids));
  }
}

const Channel& ProbeGeometry::channel(int id) const {
  if (id < 0 || id >= static_cast<int>(channels_.size())) {
    throw Error("unknown channel id " + std::to_string(id));
  }
  return channels_[id];
}

std::vector<int> ProbeGeometry::nearest_channels(int id, std::size_t k) const {
  const Channel& origin = channel(id);
  if (k < 1 || k > channels_.size()) throw Error("nearest_channels: k out of range");

  std::vector<std::pair<double, int>> order;
  order.reserve(channels_.size());
  for (const auto& ch : channels_) {
    const double dx = ch.x_um - origin.x_um;
    const double dy = ch.y_um - origin.y_um;
    order.emplace_back(dx * dx + dy * dy, ch.id);
  }
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
  std::vector<int> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = order[i].second;
  return out;
}

ProbeGeometry ProbeGeometry::two_column(std::size_t channels, double pitch_um,
                                        double column_spacing_um) {
  std::vector<Channel> out;
  out.reserve(channels);
  for (std::size_t i = 0; i < channels; ++i) {
    const auto row = static_cast<double>(i / 2);
    const auto col = static_cast<double>(i % 2);
    out.push_back({static_cast<int>(i), col * column_spacing_um, row * pitch_um});
  }
  return ProbeGeometry(std::move(out));
}

Recording::Recording(std::vector<std::int16_t> samples, std::size_t num_samples,
                     double sample_rate, ProbeGeometry geometry)
    : samples_(std::move(samples)),
      num_samples_(num_samples),
      sample_rate_(sample_rate),
      geometry_(std::move(geometry)) {
  if (num_samples_ < 1) throw Error("recording must contain at least one sample");
  if (!(sample_rate_ > 0.0)) throw Error("sample rate must be positive");
  if (geometry_.size() == 0) throw Error("probe has no channels");
  if (samples_.size() != num_samples_ * geometry_.size()) {
    throw Error("sample buffer does not match channel count");
  }
}

ProbeGeometry parse_probe(std::istream& in) {
  std::vector<Channel> channels;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string keyword;
    if (!(ss >> keyword)) continue;
    Channel ch;
    std::string extra;
    if (keyword != "channel" || !(ss >> ch.id >> ch.x_um >> ch.y_um) || (ss >> extra)) {
      throw Error("malformed probe line " + std::to_string(line_no) + ": '" + line + "'");
    }
    channels.push_back(ch);
  }
  if (channels.empty()) throw Error("probe file lists no channels");
  return ProbeGeometry(std::move(channels));
}

ProbeGeometry read_probe(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open probe file " + path.string());
  return parse_probe(in);
}

void write_probe(const ProbeGeometry& geometry, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write probe file " + path.string());
  out << "# channel <id> <x_um> <y_um>\n";
  out.precision(17);
  for (const auto& ch : geometry.channels()) {
    out << "channel " << ch.id << ' ' << ch.x_um << ' ' << ch.y_um << '\n';
  }
}

Recording load_recording(const fs::path& signal, const fs::path& probe, double sample_rate) {
  return load_recording(signal, read_probe(probe), sample_rate);
}

Recording load_recording(const fs::path& signal, ProbeGeometry geometry, double sample_rate) {
  std::ifstream in(signal, std::ios::binary);
  if (!in) throw Error("cannot open signal file " + signal.string());
  const std::size_t channels = geometry.size();
  if (channels == 0) throw Error("probe has no channels");

  const auto bytes = static_cast<std::size_t>(fs::file_size(signal));
  const std::size_t frame_bytes = 2 * channels;
  if (bytes % frame_bytes != 0) {
    throw Error("truncated frame: " + std::to_string(bytes) + " bytes is not a multiple of " +
                std::to_string(frame_bytes));
  }
  const std::size_t frames = bytes / frame_bytes;
  if (frames == 0) throw Error("signal file is empty");

  std::vector<std::int16_t> samples(frames * channels);
  std::vector<unsigned char> block(frame_bytes * 4096);
  std::size_t frame = 0;
  while (frame < frames) {
    const std::size_t n = std::min<std::size_t>(4096, frames - frame);
    in.read(reinterpret_cast<char*>(block.data()), static_cast<std::streamsize>(n * frame_bytes));
    if (!in) throw Error("short read from " + signal.string());
    for (std::size_t f = 0; f < n; ++f) {
      for (std::size_t c = 0; c < channels; ++c) {
        const unsigned char* p = &block[(f * channels + c) * 2];
        const auto v = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
        samples[c * frames + frame + f] = static_cast<std::int16_t>(v);
      }
    }
    frame += n;
  }
  return Recording(std::move(samples), frames, sample_rate, std::move(geometry));
}

void write_signal(const Recording& recording, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write signal file " + path.string());
  const std::size_t channels = recording.num_channels();
  const std::size_t frames = recording.num_samples();
  std::vector<unsigned char> block;
  block.reserve(channels * 2 * 4096);
  for (std::size_t f0 = 0; f0 < frames; f0 += 4096) {
    const std::size_t n = std::min<std::size_t>(4096, frames - f0);
    block.clear();
    for (std::size_t f = f0; f < f0 + n; ++f) {
      for (std::size_t c = 0; c < channels; ++c) {
        const auto v = static_cast<std::uint16_t>(recording.channel(c)[f]);
        block.push_back(static_cast<unsigned char>(v & 0xff));
        block.push_back(static_cast<unsigned char>(v >> 8));
      }
    }
    out.write(reinterpret_cast<const char*>(block.data()),
              static_cast<std::streamsize>(block.size()));
  }
  if (!out) throw Error("failed writing " + path.string());
}

namespace {

json rows_to_json(const std::vector<float>& flat, std::size_t width) {
  json rows = json::array();
  if (width == 0) return rows;
  for (std::size_t r = 0; r * width < flat.size(); ++r) {
    rows.push_back(std::vector<float>(flat.begin() + static_cast<std::ptrdiff_t>(r * width),
                                      flat.begin() + static_cast<std::ptrdiff_t>((r + 1) * width)));
  }
  return rows;
}

std::vector<float> rows_from_json(const json& rows, std::size_t width) {
  std::vector<float> flat;
  for (const auto& row : rows) {
    if (row.size() != width) throw Error("units.json: waveform row has wrong width");
    for (const auto& v : row) flat.push_back(v.get<float>());
  }
  return flat;
}

}  // namespace

void write_results(const SortResult& result, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());

  std::vector<std::pair<std::int64_t, int>> rows;
  for (const auto& unit : result.units) {
    for (auto t : unit.spike_times) rows.emplace_back(t, unit.id);
  }
  std::sort(rows.begin(), rows.end());
  {
    std::ofstream out(dir / "spikes.csv");
    if (!out) throw Error("cannot write " + (dir / "spikes.csv").string());
    out << "unit_id,sample_index\n";
    for (const auto& [t, id] : rows) out << id << ',' << t << '\n';
    if (!out) throw Error("failed writing spikes.csv");
  }

  std::map<std::pair<int, int>, const UnitMatch*> match_of;
  for (const auto& m : result.matches) match_of[{m.segment, m.local_id}] = &m;

  json doc;
  doc["format"] = "spikesift-units";
  doc["version"] = 1;
  doc["sample_rate"] = result.sample_rate;
  doc["num_samples"] = result.num_samples;
  doc["num_channels"] = result.num_channels;
  json segments = json::array();
  for (std::size_t s = 0; s < result.segments.size(); ++s) {
    const auto& seg = result.segments[s];
    json js;
    js["index"] = s;
    js["begin"] = seg.begin;
    js["end"] = seg.end;
    js["shift_um"] = s < result.segment_shifts.size() ? result.segment_shifts[s] : 0.0;
    json units = json::array();
    for (const auto& u : seg.units) {
      json ju;
      ju["local_id"] = u.local_id;
      const auto it = match_of.find({static_cast<int>(s), u.local_id});
      if (it == match_of.end()) throw Error("sort result lacks a match entry for a unit");
      ju["global_id"] = it->second->global_id;
      ju["previous_local_id"] = it->second->previous_local_id;
      ju["distance"] = it->second->distance;
      ju["ref_channel"] = u.ref_channel;
      ju["channels"] = u.channels;
      ju["width"] = u.width;
      ju["template"] = rows_to_json(u.templ, u.width);
      ju["footprint"] = rows_to_json(u.footprint, u.width);
      units.push_back(std::move(ju));
    }
    js["units"] = std::move(units);
    segments.push_back(std::move(js));
  }
  doc["segments"] = std::move(segments);
  json units = json::array();
  for (const auto& u : result.units) {
    units.push_back({{"id", u.id}, {"spike_count", u.spike_times.size()}, {"segments", u.segments}});
  }
  doc["units"] = std::move(units);

  std::ofstream out(dir / "units.json");
  if (!out) throw Error("cannot write " + (dir / "units.json").string());
  out << doc.dump(1) << '\n';
  if (!out) throw Error("failed writing units.json");
}

SortResult read_results(const fs::path& dir) {
  std::ifstream jin(dir / "units.json");
  if (!jin) throw Error("cannot open " + (dir / "units.json").string());
  json doc;
  try {
    doc = json::parse(jin);
  } catch (const json::exception& e) {
    throw Error(std::string("units.json: ") + e.what());
  }

  SortResult result;
  try {
    if (doc.at("format") != "spikesift-units") throw Error("units.json: unknown format");
    result.sample_rate = doc.at("sample_rate").get<double>();
    result.num_samples = doc.at("num_samples").get<std::int64_t>();
    result.num_channels = doc.at("num_channels").get<int>();
    for (const auto& js : doc.at("segments")) {
      const int s = static_cast<int>(result.segments.size());
      SegmentResult seg;
      seg.begin = js.at("begin").get<std::int64_t>();
      seg.end = js.at("end").get<std::int64_t>();
      result.segment_shifts.push_back(js.at("shift_um").get<double>());
      for (const auto& ju : js.at("units")) {
        Unit u;
        u.local_id = ju.at("local_id").get<int>();
        u.ref_channel = ju.at("ref_channel").get<int>();
        u.channels = ju.at("channels").get<std::vector<int>>();
        u.width = ju.at("width").get<std::size_t>();
        u.templ = rows_from_json(ju.at("template"), u.width);
        u.footprint = rows_from_json(ju.at("footprint"), u.width);
        result.matches.push_back({s, u.local_id, ju.at("global_id").get<int>(),
                                  ju.at("previous_local_id").get<int>(),
                                  ju.at("distance").get<double>()});
        seg.units.push_back(std::move(u));
      }
      result.segments.push_back(std::move(seg));
    }
    for (const auto& ju : doc.at("units")) {
      GlobalUnit g;
      g.id = ju.at("id").get<int>();
      g.segments = ju.at("segments").get<std::vector<int>>();
      result.units.push_back(std::move(g));
    }
  } catch (const json::exception& e) {
    throw Error(std::string("units.json: ") + e.what());
  }

  std::map<int, std::size_t> unit_index;
  for (std::size_t i = 0; i < result.units.size(); ++i) unit_index[result.units[i].id] = i;

  std::ifstream cin(dir / "spikes.csv");
  if (!cin) throw Error("cannot open " + (dir / "spikes.csv").string());
  std::string line;
  if (!std::getline(cin, line) || line != "unit_id,sample_index") {
    throw Error("spikes.csv: missing header");
  }
  while (std::getline(cin, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    int id = 0;
    char comma = 0;
    std::int64_t t = 0;
    if (!(ss >> id >> comma >> t) || comma != ',') throw Error("spikes.csv: malformed row " + line);
    const auto it = unit_index.find(id);
    if (it == unit_index.end()) throw Error("spikes.csv: unknown unit " + std::to_string(id));
    result.units[it->second].spike_times.push_back(t);
  }
  for (auto& g : result.units) std::sort(g.spike_times.begin(), g.spike_times.end());

  // Local spike trains are the global trains restricted to each segment.
  for (const auto& m : result.matches) {
    auto& seg = result.segments[static_cast<std::size_t>(m.segment)];
    auto unit = std::find_if(seg.units.begin(), seg.units.end(),
                             [&](const Unit& u) { return u.local_id == m.local_id; });
    const auto& g = result.units[unit_index.at(m.global_id)];
    auto lo = std::lower_bound(g.spike_times.begin(), g.spike_times.end(), seg.begin);
    auto hi = std::lower_bound(g.spike_times.begin(), g.spike_times.end(), seg.end);
    unit->spike_times.assign(lo, hi);
  }
  return result;
}

}  // namespace spikesift
