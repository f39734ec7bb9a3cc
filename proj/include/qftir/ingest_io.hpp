#pragma once

// File formats: infrared cross-section archive records, spectrum CSV, and the
// JSON documents for interferograms, scans and results.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qftir/calibration.hpp"
#include "qftir/das_retrieval.hpp"
#include "qftir/instrument.hpp"
#include "qftir/interferogram.hpp"
#include "qftir/interferometry.hpp"
#include "qftir/spectra_core.hpp"

namespace qftir::io {

using Json = nlohmann::json;
using Provenance = std::map<std::string, std::string>;

inline constexpr int kSchemaVersion = 1;

// ---- cross-section archive ----

struct CrossSectionHeader {
  std::string molecule;
  double numin = 0.0;  // cm^-1
  double numax = 0.0;
  std::size_t npts = 0;
  double temperature = 0.0;  // K
  double pressure = 0.0;  // torr
  double max_value = 0.0;  // cm^2/molecule
  std::string resolution;
  std::string source;
  std::vector<std::string> extra;  // trailing fields, kept verbatim

  friend bool operator==(const CrossSectionHeader&, const CrossSectionHeader&) = default;
};

struct CrossSectionRecord {
  CrossSectionHeader header;
  GasSpecies species;
};

/// Registered species name for an archive molecule formula (CH4 -> methane).
/// Unknown formulas map to their lower-case spelling.
std::string species_name(std::string_view molecule);

/// One header line then npts non-negative values, whitespace separated.
/// Errors carry the 1-based line number.
CrossSectionRecord parse_cross_section(std::string_view text);
GasSpecies parse_cross_section_file(std::string_view bytes);
/// Header line plus ten values per line, shortest round-trip formatting.
std::string format_cross_section(const CrossSectionHeader& header, const std::vector<double>& values);
CrossSectionRecord load_cross_section(const std::filesystem::path& path);

// ---- spectrum CSV ----

/// `# kind=`, `# grid start= step= count=` and optional `# key=value` comment
/// lines, a column header, then rows `wavenumber,value[,valid]` at 17
/// significant digits.
std::string write_spectrum_csv(const Spectrum& spectrum, const Provenance& comments = {});
Spectrum read_spectrum_csv(std::string_view text);
void save_spectrum_csv(const std::filesystem::path& path, const Spectrum& spectrum,
                       const Provenance& comments = {});
Spectrum load_spectrum_csv(const std::filesystem::path& path);

// ---- JSON documents ----

enum class SampleEncoding { Json, Float64Base64, Float32Base64 };

Json instrument_to_json(const InstrumentModel& instrument);
/// Missing keys keep their defaults.
InstrumentModel instrument_from_json(const Json& j);

Json spectrum_to_json(const Spectrum& spectrum);
Spectrum spectrum_from_json(const Json& j);

struct InterferogramDocument {
  Interferogram interferogram;
  std::optional<InstrumentModel> instrument;
  Provenance provenance;
};

Json interferogram_to_json(const InterferogramDocument& doc, SampleEncoding encoding = SampleEncoding::Float64Base64);
InterferogramDocument interferogram_from_json(const Json& j);

struct ScanDocument {
  interferometry::ScanPair scan;
  std::optional<InstrumentModel> instrument;
  Provenance provenance;
};

Json scan_to_json(const ScanDocument& doc, SampleEncoding encoding = SampleEncoding::Float32Base64);
ScanDocument scan_from_json(const Json& j);

Json retrieval_result_to_json(const das::RetrievalResult& result, const Provenance& provenance = {});
das::RetrievalResult retrieval_result_from_json(const Json& j);

Json calibration_result_to_json(const calibration::CalibrationResult& result, const Provenance& provenance = {});
calibration::CalibrationResult calibration_result_from_json(const Json& j);

/// Rejects a missing or foreign schema_version.
void check_schema(const Json& j);
/// Parses text into JSON, ParseError on malformed input.
Json parse_json(std::string_view text);

// ---- files and digests ----

std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary file and rename.
void write_file(const std::filesystem::path& path, std::string_view contents);

std::string sha256_hex(std::string_view bytes);
std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double value);

}  // namespace qftir::io
