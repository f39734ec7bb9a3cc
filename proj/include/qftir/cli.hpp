#pragma once

// Command-line front end: configuration file handling and the simulate,
// analyze, calibrate and track commands.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qftir/das_retrieval.hpp"
#include "qftir/forward_model.hpp"
#include "qftir/ingest_io.hpp"
#include "qftir/instrument.hpp"

namespace qftir::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kDataError = 3, kNotConverged = 4 };

struct EnvelopeConfig {
  std::string shape = "raised_cosine";  // raised_cosine | gaussian | tabulated
  double center = 2900.0;
  double width = 400.0;  // full support, or FWHM for gaussian
  std::filesystem::path table;  // Intensity CSV for tabulated
};

struct CalibrationConfig {
  std::string species = "methane";
  double initial_ppm = 50.0;
  double initial_resolution = 2.0;
  bool fit_resolution = true;
};

/// Everything a run needs. Paths are resolved against the config file's
/// directory; relative output_dir against the working directory.
struct AnalysisConfig {
  std::map<std::string, std::filesystem::path> species;  // name -> cross-section file
  std::vector<std::string> retrieval_species;  // default: every configured species
  double path_length = 135.0;  // cm
  AmbientConditions conditions{};
  das::DifferentialBand band{};
  InstrumentModel instrument{};
  std::optional<double> resolution;  // default 1/scan_length
  EnvelopeConfig envelope{};
  std::size_t scan_count = 500;
  std::filesystem::path output_dir = "out";
  unsigned threads = 1;
  io::SampleEncoding sample_encoding = io::SampleEncoding::Float32Base64;
  std::uint64_t seed = 1;
  std::map<std::string, double> mixture;
  std::map<std::string, double> reference_mixture;
  double synthesis_step = 0.01;  // cm^-1
  CalibrationConfig calibration{};

  io::Json document;  // merged configuration the run used
  std::string digest;  // SHA-256 of document

  double effective_resolution() const { return resolution ? *resolution : instrument.resolution(); }
};

/// Sets a dotted key ("instrument.noise_std") to `value`, read as JSON when it
/// parses and as a string otherwise.
void apply_override(io::Json& document, const std::string& key, const std::string& value);

/// Builds and validates a configuration. Throws ConfigError on bad values or
/// missing referenced files.
AnalysisConfig config_from_json(const io::Json& document, const std::filesystem::path& base_dir);

/// Reads the file (if given), applies overrides in order, then the
/// QFTIR_OUTPUT_DIR and QFTIR_THREADS environment variables.
AnalysisConfig load_config(const std::optional<std::filesystem::path>& path,
                           const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// Cross-sections of the configured species, keyed by configured name. Input
/// digests are added to `digests` when given.
SpeciesDatabase load_species(const AnalysisConfig& config, io::Provenance* digests = nullptr);

forward::EnvelopeModel make_envelope(const AnalysisConfig& config);

/// Entry point behind the qftir executable. Output goes to `out`, diagnostics
/// to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qftir::cli
