#include <cstdlib>

#include "qftir/cli.hpp"
#include "qftir/error.hpp"

namespace qftir::cli {

namespace fs = std::filesystem;
using io::Json;

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

template <class T>
T value_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    bad(std::string("config key '") + key + "' has the wrong type");
  }
}

std::map<std::string, double> mixture_from(const Json& j, const char* key) {
  std::map<std::string, double> out;
  if (!j.contains(key)) return out;
  const Json& m = j.at(key);
  if (!m.is_object()) bad(std::string("config key '") + key + "' must map species to ppm");
  for (const auto& [name, v] : m.items()) {
    if (!v.is_number()) bad(std::string("concentration of '") + name + "' in '" + key + "' is not a number");
    out[name] = v.get<double>();
  }
  return out;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

io::SampleEncoding encoding_from(const std::string& s) {
  if (s == "json") return io::SampleEncoding::Json;
  if (s == "f64-base64") return io::SampleEncoding::Float64Base64;
  if (s == "f32-base64") return io::SampleEncoding::Float32Base64;
  bad("sample_encoding must be json, f64-base64 or f32-base64");
}

}  // namespace

void apply_override(Json& doc, const std::string& key, const std::string& value) {
  if (key.empty()) bad("empty override key");
  Json parsed;
  try {
    parsed = Json::parse(value);
  } catch (const nlohmann::json::parse_error&) {
    parsed = value;
  }
  Json* node = &doc;
  std::size_t b = 0;
  while (true) {
    const std::size_t dot = key.find('.', b);
    const std::string part = key.substr(b, dot == std::string::npos ? std::string::npos : dot - b);
    if (part.empty()) bad("malformed override key '" + key + "'");
    if (!node->is_object()) {
      if (!node->is_null()) bad("override '" + key + "' descends into a non-object value");
      *node = Json::object();
    }
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    b = dot + 1;
  }
  *node = parsed;
}

AnalysisConfig config_from_json(const Json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) bad("configuration must be a JSON object");
  AnalysisConfig c;
  c.document = doc;
  // Where the output goes and how many threads produce it do not change it.
  Json digested = doc;
  digested.erase("output_dir");
  digested.erase("threads");
  c.digest = io::sha256_hex(digested.dump());

  if (doc.contains("species")) {
    const Json& sp = doc.at("species");
    if (!sp.is_object()) bad("'species' must map names to cross-section files");
    for (const auto& [name, file] : sp.items()) {
      if (!file.is_string()) bad("cross-section path of '" + name + "' must be a string");
      const fs::path p = resolve(base_dir, file.get<std::string>());
      if (!fs::is_regular_file(p)) bad("cross-section file for '" + name + "' not found: " + p.string());
      c.species[name] = p;
    }
  }
  c.retrieval_species = value_or<std::vector<std::string>>(doc, "retrieval_species", {});
  if (c.retrieval_species.empty()) {
    for (const auto& [name, p] : c.species) c.retrieval_species.push_back(name);
  }
  for (const auto& name : c.retrieval_species) {
    if (!c.species.contains(name)) bad("retrieval species '" + name + "' has no cross-section file");
  }

  c.path_length = value_or(doc, "path_length_cm", c.path_length);
  if (!(c.path_length > 0.0)) bad("path_length_cm must be positive");
  c.conditions.temperature = value_or(doc, "temperature_K", c.conditions.temperature);
  c.conditions.pressure = value_or(doc, "pressure_Pa", c.conditions.pressure);
  if (!(c.conditions.temperature > 0.0) || !(c.conditions.pressure > 0.0)) {
    bad("temperature_K and pressure_Pa must be positive");
  }

  if (doc.contains("instrument")) {
    try {
      c.instrument = io::instrument_from_json(doc.at("instrument"));
    } catch (const Error& e) {
      bad(std::string("instrument: ") + e.what());
    }
  }
  try {
    c.instrument.validate();
  } catch (const Error& e) {
    bad(std::string("instrument: ") + e.what());
  }

  if (doc.contains("band")) {
    const Json& b = doc.at("band");
    c.band.low = value_or(b, "low_cm-1", c.band.low);
    c.band.high = value_or(b, "high_cm-1", c.band.high);
    c.band.poly_degree = value_or(b, "poly_degree", c.band.poly_degree);
  }
  if (!(c.band.low < c.band.high)) bad("band requires low_cm-1 < high_cm-1");
  if (c.band.low < c.instrument.window_low || c.band.high > c.instrument.window_high) {
    bad("band lies outside the instrument window");
  }

  if (doc.contains("resolution_cm-1") && !doc.at("resolution_cm-1").is_null()) {
    c.resolution = value_or(doc, "resolution_cm-1", 0.0);
    if (!(*c.resolution > 0.0)) bad("resolution_cm-1 must be positive");
  }

  if (doc.contains("envelope")) {
    const Json& e = doc.at("envelope");
    c.envelope.shape = value_or<std::string>(e, "shape", c.envelope.shape);
    c.envelope.center = value_or(e, "center_cm-1", c.envelope.center);
    c.envelope.width = value_or(e, "width_cm-1", c.envelope.width);
    if (e.contains("table")) c.envelope.table = resolve(base_dir, value_or<std::string>(e, "table", ""));
    if (c.envelope.shape == "tabulated" && !fs::is_regular_file(c.envelope.table)) {
      bad("envelope table not found: " + c.envelope.table.string());
    }
    if (c.envelope.shape != "raised_cosine" && c.envelope.shape != "gaussian" && c.envelope.shape != "tabulated") {
      bad("envelope shape must be raised_cosine, gaussian or tabulated");
    }
  }

  const auto count = value_or<long long>(doc, "scan_count", static_cast<long long>(c.scan_count));
  if (count < 0) bad("scan_count must be non-negative");
  c.scan_count = static_cast<std::size_t>(count);
  c.output_dir = value_or<std::string>(doc, "output_dir", c.output_dir.string());
  const auto threads = value_or<long long>(doc, "threads", 1);
  if (threads < 1) bad("threads must be at least 1");
  c.threads = static_cast<unsigned>(threads);
  c.sample_encoding = encoding_from(value_or<std::string>(doc, "sample_encoding", "f32-base64"));
  c.seed = value_or<std::uint64_t>(doc, "seed", c.seed);
  c.mixture = mixture_from(doc, "mixture");
  c.reference_mixture = mixture_from(doc, "reference_mixture");
  c.synthesis_step = value_or(doc, "synthesis_step_cm-1", c.synthesis_step);
  if (!(c.synthesis_step > 0.0)) bad("synthesis_step_cm-1 must be positive");

  if (doc.contains("calibration")) {
    const Json& k = doc.at("calibration");
    c.calibration.species = value_or<std::string>(k, "species", c.calibration.species);
    c.calibration.initial_ppm = value_or(k, "initial_ppm", c.calibration.initial_ppm);
    c.calibration.initial_resolution = value_or(k, "initial_resolution_cm-1", c.calibration.initial_resolution);
    c.calibration.fit_resolution = value_or(k, "fit_resolution", c.calibration.fit_resolution);
  }
  return c;
}

AnalysisConfig load_config(const std::optional<fs::path>& path,
                           const std::vector<std::pair<std::string, std::string>>& overrides) {
  Json doc = Json::object();
  fs::path base = fs::current_path();
  if (path) {
    std::string text;
    try {
      text = io::read_file(*path);
      doc = io::parse_json(text);
    } catch (const Error& e) {
      bad("config " + path->string() + ": " + e.what());
    }
    base = fs::absolute(*path).parent_path();
  }
  for (const auto& [k, v] : overrides) apply_override(doc, k, v);
  if (const char* dir = std::getenv("QFTIR_OUTPUT_DIR"); dir != nullptr && *dir != '\0') doc["output_dir"] = dir;
  AnalysisConfig c = config_from_json(doc, base);
  if (const char* cap = std::getenv("QFTIR_THREADS"); cap != nullptr && *cap != '\0') {
    char* end = nullptr;
    const long n = std::strtol(cap, &end, 10);
    if (end == cap || *end != '\0' || n < 1) bad("QFTIR_THREADS must be a positive integer");
    c.threads = std::min(c.threads, static_cast<unsigned>(n));
  }
  return c;
}

SpeciesDatabase load_species(const AnalysisConfig& config, io::Provenance* digests) {
  SpeciesDatabase db;
  for (const auto& [name, path] : config.species) {
    const std::string text = io::read_file(path);
    io::CrossSectionRecord rec = [&] {
      try {
        return io::parse_cross_section(text);
      } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what(), e.line());
      }
    }();
    GasSpecies sp = std::move(rec.species);
    sp.name = name;
    sp.provenance["file"] = path.filename().string();
    sp.provenance["sha256"] = io::sha256_hex(text);
    if (digests != nullptr) (*digests)["xs:" + name] = sp.provenance["sha256"];
    db.emplace(name, std::move(sp));
  }
  return db;
}

forward::EnvelopeModel make_envelope(const AnalysisConfig& c) {
  if (c.envelope.shape == "gaussian") return forward::EnvelopeModel::gaussian(c.envelope.center, c.envelope.width);
  if (c.envelope.shape == "tabulated") return forward::EnvelopeModel::tabulated(io::load_spectrum_csv(c.envelope.table));
  return forward::EnvelopeModel::raised_cosine(c.envelope.center, c.envelope.width);
}

}  // namespace qftir::cli
