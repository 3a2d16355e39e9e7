#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spikesift/config.hpp"
#include "spikesift/evaluator.hpp"
#include "spikesift/pipeline.hpp"
#include "spikesift/probe_io.hpp"
#include "spikesift/synthgen.hpp"

namespace fs = std::filesystem;
using namespace spikesift;

namespace {

struct ConfigFlags {
  std::string file;
  std::optional<double> kappa, lambda, l_min, d_max, mu, band_low, band_high, tol_ms;
  std::optional<int> n_min, threads;
  bool invert = false;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "key = value config file")->check(CLI::ExistingFile);
    app->add_option("--kappa", kappa, "threshold multiplier (default 10)");
    app->add_option("--lambda", lambda, "cluster split tolerance (default 0.4)");
    app->add_option("--n-min", n_min, "minimum spikes per unit (default 5)");
    app->add_option("--l-min", l_min, "minimum segment length, seconds (default 10)");
    app->add_option("--d-max", d_max, "largest stitching shift, um (default 30)");
    app->add_option("--mu", mu, "stitching match gate (default 0.6)");
    app->add_option("--band-low", band_low, "lower band edge, Hz (default 300)");
    app->add_option("--band-high", band_high, "upper band edge, Hz (default 3000)");
    app->add_option("--tol-ms", tol_ms, "evaluation tolerance, ms (default 0.5)");
    app->add_option("--threads", threads, "worker threads (default 1)");
    app->add_flag("--invert-polarity", invert, "negate the filtered signal");
  }

  Config resolve() const {
    Config c = file.empty() ? Config{} : load_config(file);
    if (kappa) c.kappa = *kappa;
    if (lambda) c.lambda = *lambda;
    if (n_min) c.n_min = *n_min;
    if (l_min) c.l_min_seconds = *l_min;
    if (d_max) c.d_max_um = *d_max;
    if (mu) c.mu = *mu;
    if (band_low) c.band_low_hz = *band_low;
    if (band_high) c.band_high_hz = *band_high;
    if (tol_ms) c.tol_ms = *tol_ms;
    if (threads) c.threads = *threads;
    if (invert) c.invert_polarity = true;
    c.validate();
    return c;
  }
};

struct RecordingFlags {
  std::string signal, probe;
  double sample_rate = 0.0;

  void attach(CLI::App* app) {
    app->add_option("--in", signal, "interleaved little-endian int16 samples")
        ->required()
        ->check(CLI::ExistingFile);
    app->add_option("--probe", probe, "probe geometry file")->required()->check(CLI::ExistingFile);
    app->add_option("--sample-rate", sample_rate, "sampling rate, Hz")
        ->required()
        ->check(CLI::PositiveNumber);
  }

  Recording load() const { return load_recording(signal, probe, sample_rate); }
};

void log_timings(const PhaseTimings& t) {
  std::cerr << std::fixed << std::setprecision(3) << "spikesift: filter " << t.filter
            << " s, detect " << t.detect << " s, segment " << t.segment << " s, sort " << t.sort
            << " s, stitch " << t.stitch << " s, total " << t.total() << " s\n";
}

void log_result(const SortResult& r) {
  std::cerr << "spikesift: " << r.segments.size() << " segment(s), " << r.units.size()
            << " unit(s)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SpikeSift spike sorter"};
  app.require_subcommand(1);

  // sort
  auto* sort_cmd = app.add_subcommand("sort", "full pipeline on one recording");
  RecordingFlags sort_rec;
  ConfigFlags sort_cfg;
  std::string sort_out;
  sort_rec.attach(sort_cmd);
  sort_cfg.attach(sort_cmd);
  sort_cmd->add_option("--out", sort_out, "output directory")->required();

  // segment
  auto* seg_cmd = app.add_subcommand("segment", "print drift segments as start_sample,end_sample");
  RecordingFlags seg_rec;
  ConfigFlags seg_cfg;
  seg_rec.attach(seg_cmd);
  seg_cfg.attach(seg_cmd);

  // sort-segment
  auto* one_cmd = app.add_subcommand("sort-segment", "sort one sample range [begin, end)");
  RecordingFlags one_rec;
  ConfigFlags one_cfg;
  std::int64_t one_begin = 0, one_end = 0;
  std::string one_out;
  one_rec.attach(one_cmd);
  one_cfg.attach(one_cmd);
  one_cmd->add_option("--begin", one_begin, "first sample")->required();
  one_cmd->add_option("--end", one_end, "one past the last sample")->required();
  one_cmd->add_option("--out", one_out, "output directory")->required();

  // merge
  auto* merge_cmd = app.add_subcommand("merge", "stitch sorted results into one");
  std::vector<std::string> merge_inputs;
  std::string merge_probe, merge_out;
  ConfigFlags merge_cfg;
  merge_cmd->add_option("inputs", merge_inputs, "result directories")
      ->required()
      ->check(CLI::ExistingDirectory);
  merge_cmd->add_option("--probe", merge_probe, "probe geometry file")
      ->required()
      ->check(CLI::ExistingFile);
  merge_cmd->add_option("--out", merge_out, "output directory")->required();
  merge_cfg.attach(merge_cmd);

  // map
  auto* map_cmd = app.add_subcommand("map", "report unit correspondence between two results");
  std::string map_a, map_b, map_probe;
  ConfigFlags map_cfg;
  map_cmd->add_option("first", map_a, "earlier result directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  map_cmd->add_option("second", map_b, "later result directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  map_cmd->add_option("--probe", map_probe, "probe geometry file")
      ->required()
      ->check(CLI::ExistingFile);
  map_cfg.attach(map_cmd);

  // generate
  auto* gen_cmd = app.add_subcommand("generate", "write a synthetic recording with ground truth");
  GeneratorSpec gen;
  std::string gen_drift = "none", gen_out;
  gen_cmd->add_option("--neurons", gen.neurons, "neuron count")->capture_default_str();
  gen_cmd->add_option("--seconds", gen.seconds, "duration")->capture_default_str();
  gen_cmd->add_option("--noise", gen.noise_sigma, "noise sigma, ADC units")->capture_default_str();
  gen_cmd->add_option("--drift", gen_drift, "none, linear:<um_per_min>, jump:<um>@<s> or gp")
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "random seed")->capture_default_str();
  gen_cmd->add_option("--channels", gen.channels, "channel count")->capture_default_str();
  gen_cmd->add_option("--sample-rate", gen.sample_rate, "Hz")->capture_default_str();
  gen_cmd->add_option("--amp-min", gen.amplitude_min_mad, "smallest peak, noise MAD units")
      ->capture_default_str();
  gen_cmd->add_option("--amp-max", gen.amplitude_max_mad, "largest peak, noise MAD units")
      ->capture_default_str();
  gen_cmd->add_option("--out", gen_out, "output directory")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score a result against ground truth");
  std::string eval_results, eval_truth;
  ConfigFlags eval_cfg;
  eval_cmd->add_option("--results", eval_results, "result directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--truth", eval_truth, "truth.json")->required()->check(CLI::ExistingFile);
  eval_cfg.attach(eval_cmd);

  // info
  auto* info_cmd = app.add_subcommand("info", "describe a recording and its thresholds");
  RecordingFlags info_rec;
  ConfigFlags info_cfg;
  info_rec.attach(info_cmd);
  info_cfg.attach(info_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sort_cmd->parsed()) {
      const auto config = sort_cfg.resolve();
      const auto rec = sort_rec.load();
      PhaseTimings timings;
      const auto result = sort_recording(rec, config, &timings);
      log_timings(timings);
      write_results(result, sort_out);
      log_result(result);
    } else if (seg_cmd->parsed()) {
      const auto config = seg_cfg.resolve();
      const auto rec = seg_rec.load();
      const auto prepared = prepare(rec, config);
      const auto segmentation = plan(prepared, rec, config);
      std::cout << "start_sample,end_sample\n";
      for (const auto& r : segmentation.segments(static_cast<std::int64_t>(rec.num_samples()))) {
        std::cout << r.begin << ',' << r.end << '\n';
      }
      std::cerr << "spikesift: " << segmentation.boundaries.size() << " boundary(ies)\n";
    } else if (one_cmd->parsed()) {
      const auto config = one_cfg.resolve();
      const auto rec = one_rec.load();
      PhaseTimings timings;
      auto prepared = prepare(rec, config, &timings);
      std::vector<SegmentResult> segments;
      segments.push_back(sort_range(prepared, rec, {one_begin, one_end}, config));
      const auto result = stitch(std::move(segments), rec.geometry(), stitch_params(config),
                                 rec.sample_rate(), static_cast<std::int64_t>(rec.num_samples()));
      log_timings(timings);
      write_results(result, one_out);
      log_result(result);
    } else if (merge_cmd->parsed()) {
      const auto config = merge_cfg.resolve();
      const auto probe = read_probe(merge_probe);
      std::vector<SortResult> parts;
      for (const auto& dir : merge_inputs) parts.push_back(read_results(dir));
      const auto result = merge_results(parts, probe, config);
      write_results(result, merge_out);
      log_result(result);
    } else if (map_cmd->parsed()) {
      const auto config = map_cfg.resolve();
      const auto probe = read_probe(map_probe);
      const auto a = read_results(map_a);
      const auto b = read_results(map_b);
      if (a.segments.empty() || b.segments.empty()) throw Error("result has no segments");
      const auto& last = a.segments.back();
      const auto& first = b.segments.front();
      const auto link = link_segments(last.units, first.units, probe, stitch_params(config));
      auto global_of = [](const SortResult& r, int segment, int local) {
        for (const auto& m : r.matches) {
          if (m.segment == segment && m.local_id == local) return m.global_id;
        }
        return -1;
      };
      const int seg_a = static_cast<int>(a.segments.size()) - 1;
      std::cout << "# shift_um," << link.shift_um << '\n';
      std::cout << "first_unit,second_unit,distance,accepted\n";
      for (const auto& c : link.pairs) {
        std::cout << global_of(a, seg_a, c.first) << ',' << global_of(b, 0, c.second) << ','
                  << c.distance << ',' << (c.accepted ? 1 : 0) << '\n';
      }
    } else if (gen_cmd->parsed()) {
      gen.drift = parse_drift(gen_drift);
      const auto synth = generate(gen);
      fs::create_directories(gen_out);
      write_signal(synth.recording, fs::path(gen_out) / "recording.raw");
      write_probe(synth.recording.geometry(), fs::path(gen_out) / "probe.txt");
      write_truth(synth.truth, fs::path(gen_out) / "truth.json");
      std::cerr << "spikesift: wrote " << synth.recording.num_channels() << " channels x "
                << synth.recording.num_samples() << " samples, " << synth.truth.neurons.size()
                << " neurons\n";
    } else if (eval_cmd->parsed()) {
      const auto config = eval_cfg.resolve();
      const auto result = read_results(eval_results);
      const auto truth = read_truth(eval_truth);
      const auto scores = score_units(result, truth, config.tol_ms * 1e-3);
      std::cout << "unit_id,neuron_id,detected,truth,matched,fp,fn,score,class\n";
      std::cout << std::setprecision(6);
      for (const auto& s : scores) {
        std::cout << s.unit_id << ',' << s.neuron_id << ',' << s.detected << ',' << s.truth << ','
                  << s.matched << ',' << s.fp << ',' << s.fn << ',' << s.score << ','
                  << to_string(s.classification) << '\n';
      }
      const auto summary = summarize(scores);
      std::cout << "# identified," << summary.identified << '\n'
                << "# unclassified," << summary.unclassified << '\n'
                << "# spurious," << summary.spurious << '\n';
    } else if (info_cmd->parsed()) {
      const auto config = info_cfg.resolve();
      const auto rec = info_rec.load();
      const auto prepared = prepare(rec, config);
      std::cout << "channels," << rec.num_channels() << '\n'
                << "samples," << rec.num_samples() << '\n'
                << "sample_rate," << rec.sample_rate() << '\n'
                << "duration_s," << rec.duration_seconds() << '\n'
                << "box_widths," << prepared.kernel.narrow_width << ' '
                << prepared.kernel.wide_width << '\n';
      std::cout << "channel,x_um,y_um,mad,threshold,peaks\n";
      for (std::size_t c = 0; c < rec.num_channels(); ++c) {
        const auto& ch = rec.geometry().channel(static_cast<int>(c));
        std::cout << c << ',' << ch.x_um << ',' << ch.y_um << ',' << prepared.estimates[c].mad
                  << ',' << prepared.thresholds[c] << ',' << prepared.peaks.channels[c].size()
                  << '\n';
      }
    }
  } catch (const spikesift::Error& e) {
    std::cerr << "spikesift: error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "spikesift: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
