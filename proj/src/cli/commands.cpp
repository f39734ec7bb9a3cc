#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>

#include "qftir/calibration.hpp"
#include "qftir/cli.hpp"
#include "qftir/error.hpp"
#include "qftir/interferometry.hpp"

namespace qftir::cli {

namespace fs = std::filesystem;
using io::Json;

namespace {

std::vector<fs::path> scan_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "scan directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.rfind("scan_", 0) == 0 && e.path().extension() == ".json") files.push_back(e.path());
  }
  if (files.empty()) throw Error(ErrorCode::EmptyInput, "no scan_*.json files in " + dir.string());
  std::sort(files.begin(), files.end());
  return files;
}

struct LoadedBatch {
  interferometry::BatchResult batch;
  std::string digest;  // over the per-file digests, in file order
};

LoadedBatch process_directory(const fs::path& dir, const AnalysisConfig& cfg) {
  const auto files = scan_files(dir);
  std::vector<std::string> digests(files.size());
  auto load = [&](std::size_t i) {
    const std::string text = io::read_file(files[i]);
    digests[i] = io::sha256_hex(text);
    return io::scan_from_json(io::parse_json(text)).scan;
  };
  LoadedBatch out{interferometry::process_scan_batch(files.size(), load, cfg.instrument, cfg.threads), {}};
  std::string all;
  for (const auto& d : digests) all += d;
  out.digest = io::sha256_hex(all);
  return out;
}

SpeciesDatabase retrieval_subset(const SpeciesDatabase& db, const AnalysisConfig& cfg) {
  SpeciesDatabase out;
  for (const auto& name : cfg.retrieval_species) out.emplace(name, db.at(name));
  return out;
}

GasMixture make_mixture(const std::map<std::string, double>& m, const AnalysisConfig& cfg) {
  std::vector<MixtureComponent> comps;
  for (const auto& [name, ppm] : m) comps.push_back({name, ppm});
  return GasMixture(std::move(comps), cfg.conditions);
}

std::string fixed(double v, int precision) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

std::string sci(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(3) << v;
  return s.str();
}

std::string csv_note(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '"', '\'');
  return s;
}

void print_table(const das::RetrievalResult& r, std::ostream& out) {
  out << std::left << std::setw(12) << "species" << std::right << std::setw(14) << "conc_ppm" << std::setw(14)
      << "limit_ppm" << std::setw(10) << "snr" << "  status\n";
  for (const auto& name : r.species) {
    const auto& limit = r.detection_limits.at(name);
    out << std::left << std::setw(12) << name << std::right << std::setw(14) << fixed(r.concentrations.at(name), 3)
        << std::setw(14) << (limit ? fixed(*limit, 3) : std::string("n/a")) << std::setw(10)
        << fixed(r.snr.at(name), 2) << "  " << (r.present(name) ? "PRESENT" : "ABSENT") << "\n";
  }
}

int cmd_simulate(const AnalysisConfig& cfg, std::ostream& out) {
  if (cfg.scan_count == 0) throw Error(ErrorCode::ConfigError, "scan_count must be at least 1 for simulate");
  io::Provenance digests;
  const SpeciesDatabase db = load_species(cfg, &digests);
  const GasMixture sample_mix = make_mixture(cfg.mixture, cfg);
  const GasMixture reference_mix = make_mixture(cfg.reference_mixture, cfg);
  for (const auto* m : {&sample_mix, &reference_mix}) {
    for (const auto& comp : m->components()) {
      if (!db.contains(comp.species)) throw Error(ErrorCode::UnknownSpecies, "no cross-section for '" + comp.species + "'");
    }
  }

  const auto& inst = cfg.instrument;
  const double lo = inst.window_low - 10.0;
  const double hi = inst.window_high + 10.0;
  const WavenumberGrid grid(lo, cfg.synthesis_step,
                            static_cast<std::size_t>(std::floor((hi - lo) / cfg.synthesis_step + 1e-9)) + 1);
  const auto envelope = make_envelope(cfg);
  const auto sample_spec =
      forward::idler_spectrum(envelope, forward::beer_lambert_transmission(sample_mix, db, cfg.path_length, grid));
  const auto reference_spec =
      forward::idler_spectrum(envelope, forward::beer_lambert_transmission(reference_mix, db, cfg.path_length, grid));
  const forward::InterferogramSynthesizer sample_synth(sample_spec, inst);
  const forward::InterferogramSynthesizer reference_synth(reference_spec, inst);

  const fs::path sample_dir = cfg.output_dir / "sample";
  const fs::path reference_dir = cfg.output_dir / "reference";
  fs::create_directories(sample_dir);
  fs::create_directories(reference_dir);

  char name[32];
  for (std::size_t i = 0; i < cfg.scan_count; ++i) {
    std::snprintf(name, sizeof name, "scan_%05zu.json", i);
    const std::uint64_t s_seed = cfg.seed + i;
    const std::uint64_t r_seed = cfg.seed + cfg.scan_count + i;
    io::ScanDocument sd{{sample_synth.signal(s_seed), sample_synth.reference(s_seed)},
                        inst,
                        {{"config_digest", cfg.digest}, {"role", "sample"}, {"seed", std::to_string(s_seed)}}};
    io::write_file(sample_dir / name, io::scan_to_json(sd, cfg.sample_encoding).dump());
    io::ScanDocument rd{{reference_synth.signal(r_seed), reference_synth.reference(r_seed)},
                        inst,
                        {{"config_digest", cfg.digest}, {"role", "reference"}, {"seed", std::to_string(r_seed)}}};
    io::write_file(reference_dir / name, io::scan_to_json(rd, cfg.sample_encoding).dump());
  }

  Json truth{{"schema_version", io::kSchemaVersion},
             {"type", "truth"},
             {"mixture_ppm", cfg.mixture},
             {"reference_mixture_ppm", cfg.reference_mixture},
             {"path_length_cm", cfg.path_length},
             {"temperature_K", cfg.conditions.temperature},
             {"pressure_Pa", cfg.conditions.pressure},
             {"seed", cfg.seed},
             {"scan_count", cfg.scan_count},
             {"instrument", io::instrument_to_json(inst)},
             {"config_digest", cfg.digest},
             {"inputs", digests}};
  io::write_file(cfg.output_dir / "truth.json", truth.dump(2) + "\n");
  out << "wrote " << cfg.scan_count << " sample and reference scans to " << cfg.output_dir.string() << "\n";
  return kOk;
}

int cmd_analyze(const AnalysisConfig& cfg, const fs::path& scans, const fs::path& reference, std::ostream& out) {
  io::Provenance prov{{"config_digest", cfg.digest}};
  const SpeciesDatabase db = retrieval_subset(load_species(cfg, &prov), cfg);
  const LoadedBatch sample = process_directory(scans, cfg);
  const LoadedBatch ref = process_directory(reference, cfg);
  prov["sample_scans_sha256"] = sample.digest;
  prov["reference_scans_sha256"] = ref.digest;
  prov["sample_scans_used"] = std::to_string(sample.batch.used);
  prov["sample_scans_failed"] = std::to_string(sample.batch.failed);
  prov["reference_scans_used"] = std::to_string(ref.batch.used);
  prov["reference_scans_failed"] = std::to_string(ref.batch.failed);

  const auto analyzer = das::DasAnalyzer::for_grid(db, sample.batch.spectrum.grid(), cfg.band,
                                                   cfg.effective_resolution(), cfg.path_length, cfg.conditions);
  const auto res = analyzer.analyze(sample.batch.spectrum, ref.batch.spectrum);

  fs::create_directories(cfg.output_dir);
  const io::Provenance tag{{"config_digest", cfg.digest}};
  io::write_file(cfg.output_dir / "result.json", io::retrieval_result_to_json(res.result, prov).dump(2) + "\n");
  io::save_spectrum_csv(cfg.output_dir / "sample_spectrum.csv", sample.batch.spectrum, tag);
  io::save_spectrum_csv(cfg.output_dir / "reference_spectrum.csv", ref.batch.spectrum, tag);
  io::save_spectrum_csv(cfg.output_dir / "absorbance.csv", res.absorbance, tag);
  io::save_spectrum_csv(cfg.output_dir / "differential_absorbance.csv", res.parts.differential, tag);
  io::save_spectrum_csv(cfg.output_dir / "fit.csv", res.result.fit, tag);
  io::save_spectrum_csv(cfg.output_dir / "residual.csv", res.result.residual, tag);

  out << "scans used: sample " << sample.batch.used << "/" << sample.batch.used + sample.batch.failed
      << ", reference " << ref.batch.used << "/" << ref.batch.used + ref.batch.failed << "\n";
  for (const auto& f : sample.batch.failures) out << "  skipped sample " << f << "\n";
  for (const auto& f : ref.batch.failures) out << "  skipped reference " << f << "\n";
  out << "residual noise: " << sci(res.result.noise_std) << " absorbance\n";
  print_table(res.result, out);
  return kOk;
}

int cmd_calibrate(const AnalysisConfig& cfg, const fs::path& measured_path, std::ostream& out) {
  const auto& name = cfg.calibration.species;
  if (!cfg.species.contains(name)) {
    throw Error(ErrorCode::ConfigError, "no cross-section file configured for calibration species '" + name + "'");
  }
  io::Provenance prov{{"config_digest", cfg.digest}};
  const SpeciesDatabase db = load_species(cfg, &prov);
  const Spectrum measured = io::load_spectrum_csv(measured_path);
  prov["measured_sha256"] = io::sha256_hex(io::read_file(measured_path));
  if (measured.kind() != SpectrumKind::Absorbance) {
    throw Error(ErrorCode::InvalidArgument, measured_path.string() + " is not an absorbance spectrum");
  }
  calibration::CalibrationOptions opt;
  opt.fit_resolution = cfg.calibration.fit_resolution;
  const auto r = calibration::calibrate(measured, db.at(name), cfg.path_length, cfg.conditions,
                                        {cfg.calibration.initial_ppm, cfg.calibration.initial_resolution}, opt);
  fs::create_directories(cfg.output_dir);
  io::write_file(cfg.output_dir / "calibration.json", io::calibration_result_to_json(r, prov).dump(2) + "\n");
  out << "species: " << name << "\n"
      << "concentration_ppm: " << fixed(r.concentration, 4) << "\n"
      << "resolution_cm-1: " << fixed(r.resolution, 5) << "\n"
      << "fit_rms: " << sci(r.fit_rms) << "\n"
      << "detection_limit_ppm: " << fixed(r.detection_limit, 4) << "\n"
      << "iterations: " << r.iterations << "\n"
      << "converged: " << (r.converged ? "yes" : "no") << " (" << r.diagnostic << ")\n";
  return r.converged ? kOk : kNotConverged;
}

Spectrum load_step_input(const fs::path& p, const AnalysisConfig& cfg) {
  if (fs::is_directory(p)) return process_directory(p, cfg).batch.spectrum;
  return io::load_spectrum_csv(p);
}

int cmd_track(const AnalysisConfig& cfg, const fs::path& series, std::ostream& out) {
  const fs::path manifest_path = fs::is_directory(series) ? series / "series.json" : series;
  const Json manifest = io::parse_json(io::read_file(manifest_path));
  io::check_schema(manifest);
  const fs::path base = fs::absolute(manifest_path).parent_path();
  struct Step {
    double t;
    fs::path sample, reference;
  };
  std::vector<Step> steps;
  const Json& arr = manifest.contains("steps") ? manifest.at("steps") : Json();
  if (!arr.is_array()) throw Error(ErrorCode::MissingField, "manifest needs a 'steps' array");
  for (const auto& s : arr) {
    if (!s.is_object() || !s.contains("timestamp") || !s.contains("sample") || !s.contains("reference")) {
      throw Error(ErrorCode::MissingField, "each step needs timestamp, sample and reference");
    }
    try {
      const fs::path sp = s.at("sample").get<std::string>();
      const fs::path rp = s.at("reference").get<std::string>();
      steps.push_back({s.at("timestamp").get<double>(), sp.is_absolute() ? sp : base / sp,
                       rp.is_absolute() ? rp : base / rp});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, std::string("manifest step: ") + e.what());
    }
  }
  if (steps.empty()) throw Error(ErrorCode::EmptyInput, "manifest has no steps");
  for (std::size_t i = 1; i < steps.size(); ++i) {
    if (!(steps[i].t > steps[i - 1].t)) {
      throw Error(ErrorCode::NonMonotonicTimestamps, "timestamp of step " + std::to_string(i) + " does not increase");
    }
  }

  const SpeciesDatabase db = retrieval_subset(load_species(cfg), cfg);
  std::map<std::tuple<double, double, std::size_t>, das::DasAnalyzer> analyzers;
  std::string csv = "# config_digest=" + cfg.digest + "\n";
  csv += "timestamp,species,concentration_ppm,detection_limit_ppm,status,note\n";
  std::size_t failed = 0;
  for (const auto& step : steps) {
    const std::string ts = io::format_double(step.t);
    try {
      const Spectrum sample = load_step_input(step.sample, cfg);
      const Spectrum reference = load_step_input(step.reference, cfg);
      const auto& g = sample.grid();
      const auto key = std::make_tuple(g.start(), g.step(), g.count());
      auto it = analyzers.find(key);
      if (it == analyzers.end()) {
        it = analyzers
                 .emplace(key, das::DasAnalyzer::for_grid(db, g, cfg.band, cfg.effective_resolution(),
                                                          cfg.path_length, cfg.conditions))
                 .first;
      }
      const auto r = it->second.analyze(sample, reference).result;
      for (const auto& name : r.species) {
        const auto& limit = r.detection_limits.at(name);
        csv += ts + "," + name + "," + io::format_double(r.concentrations.at(name)) + "," +
               (limit ? io::format_double(*limit) : std::string()) + "," + (r.present(name) ? "PRESENT" : "ABSENT") +
               ",\n";
      }
    } catch (const Error& e) {
      ++failed;
      for (const auto& name : cfg.retrieval_species) csv += ts + "," + name + ",,,ERROR," + csv_note(e.what()) + "\n";
    }
  }
  fs::create_directories(cfg.output_dir);
  io::write_file(cfg.output_dir / "series.csv", csv);
  out << "tracked " << steps.size() << " steps (" << failed << " failed) into "
      << (cfg.output_dir / "series.csv").string() << "\n";
  return kOk;
}

struct CommonFlags {
  std::optional<std::string> config;
  std::vector<std::string> sets;
  std::vector<std::string> mixture;
  std::vector<std::string> reference_mixture;
  std::vector<std::pair<std::string, std::string>> direct;  // (config key, raw value)
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("-c,--config", f.config, "JSON configuration file");
  app->add_option("--set", f.sets, "Override any config key: KEY=VALUE (dotted keys reach nested objects)");
  struct Mirror {
    const char* flag;
    const char* key;
    const char* help;
  };
  static const Mirror mirrors[] = {
      {"--output-dir", "output_dir", "Output directory"},
      {"--seed", "seed", "Base random seed"},
      {"--scan-count", "scan_count", "Scans per batch"},
      {"--threads", "threads", "Worker threads"},
      {"--path-length-cm", "path_length_cm", "Absorption path length"},
      {"--temperature-K", "temperature_K", "Gas temperature"},
      {"--pressure-Pa", "pressure_Pa", "Gas pressure"},
      {"--resolution-cm-1", "resolution_cm-1", "Spectral resolution used in retrieval"},
      {"--band-low-cm-1", "band.low_cm-1", "Lower edge of the differential band"},
      {"--band-high-cm-1", "band.high_cm-1", "Upper edge of the differential band"},
      {"--poly-degree", "band.poly_degree", "Detrending polynomial degree"},
      {"--noise-std", "instrument.noise_std", "Relative detector noise per sample"},
      {"--sample-encoding", "sample_encoding", "json | f64-base64 | f32-base64"},
  };
  for (const auto& m : mirrors) {
    const std::string key = m.key;
    app->add_option_function<std::string>(
        m.flag, [&f, key](const std::string& v) { f.direct.emplace_back(key, v); }, m.help);
  }
  app->add_option("--mixture", f.mixture, "Sample mixture component NAME=PPM");
  app->add_option("--reference-mixture", f.reference_mixture, "Reference mixture component NAME=PPM");
}

std::pair<std::string, std::string> split_kv(const std::string& s, const char* what) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorCode::ConfigError, std::string("expected KEY=VALUE for ") + what + ", got '" + s + "'");
  }
  return {s.substr(0, eq), s.substr(eq + 1)};
}

AnalysisConfig resolve_config(const CommonFlags& f) {
  std::vector<std::pair<std::string, std::string>> ov = f.direct;
  for (const auto& m : f.mixture) {
    auto [k, v] = split_kv(m, "--mixture");
    ov.emplace_back("mixture." + k, v);
  }
  for (const auto& m : f.reference_mixture) {
    auto [k, v] = split_kv(m, "--reference-mixture");
    ov.emplace_back("reference_mixture." + k, v);
  }
  for (const auto& s : f.sets) ov.push_back(split_kv(s, "--set"));
  std::optional<fs::path> path;
  if (f.config) path = *f.config;
  return load_config(path, ov);
}

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::ConfigError:
    case ErrorCode::UnknownSpecies:
      return kConfigError;
    case ErrorCode::NoConvergence:
      return kNotConverged;
    default:
      return kDataError;
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Differential absorption analysis for quantum FTIR spectra"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "qftir 1.0");

  CommonFlags sim_f, ana_f, cal_f, trk_f;
  auto* sim = app.add_subcommand("simulate", "Write synthetic sample/reference scans and the ground truth");
  add_common(sim, sim_f);

  auto* ana = app.add_subcommand("analyze", "Average scans, retrieve concentrations, classify species");
  add_common(ana, ana_f);
  std::string scans_dir, reference_dir;
  ana->add_option("--scans", scans_dir, "Directory of sample scans (default <output_dir>/sample)");
  ana->add_option("--reference", reference_dir, "Directory of reference scans (default <output_dir>/reference)");

  auto* cal = app.add_subcommand("calibrate", "Fit concentration and resolution to a measured absorbance");
  add_common(cal, cal_f);
  std::string measured;
  cal->add_option("--measured", measured, "Absorbance spectrum CSV")->required();

  auto* trk = app.add_subcommand("track", "Retrieve a concentration time series");
  add_common(trk, trk_f);
  std::string series;
  trk->add_option("--series", series, "Manifest file or directory holding series.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (sim->parsed()) return cmd_simulate(resolve_config(sim_f), out);
    if (ana->parsed()) {
      const auto cfg = resolve_config(ana_f);
      const fs::path s = scans_dir.empty() ? cfg.output_dir / "sample" : fs::path(scans_dir);
      const fs::path r = reference_dir.empty() ? cfg.output_dir / "reference" : fs::path(reference_dir);
      return cmd_analyze(cfg, s, r, out);
    }
    if (cal->parsed()) return cmd_calibrate(resolve_config(cal_f), measured, out);
    if (trk->parsed()) return cmd_track(resolve_config(trk_f), series, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kConfigError;
}

}  // namespace qftir::cli
