#include "qftir/ingest_io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "qftir/error.hpp"

namespace qftir::io {

static_assert(std::endian::native == std::endian::little, "sample blobs are stored little-endian");

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    const std::size_t b = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > b) out.push_back(line.substr(b, i - b));
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t b = 0;
  while (b <= text.size()) {
    const std::size_t e = text.find('\n', b);
    if (e == std::string_view::npos) {
      if (b < text.size()) out.push_back(text.substr(b));
      break;
    }
    out.push_back(text.substr(b, e - b));
    b = e + 1;
  }
  return out;
}

std::optional<double> to_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<std::size_t> to_size(std::string_view s) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::string format_sig17(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw Error(ErrorCode::MissingField, std::string("missing field '") + key + "'");
  return j.at(key);
}

template <class T>
T get(const Json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("field '") + key + "': " + e.what());
  }
}

Json provenance_json(const Provenance& p) {
  Json j = Json::object();
  for (const auto& [k, v] : p) j[k] = v;
  return j;
}

Provenance provenance_from(const Json& j) {
  Provenance p;
  if (!j.contains("provenance")) return p;
  const Json& pj = j.at("provenance");
  if (!pj.is_object()) throw Error(ErrorCode::ParseError, "provenance must be an object");
  for (const auto& [k, v] : pj.items()) p[k] = v.is_string() ? v.get<std::string>() : v.dump();
  return p;
}

Json grid_json(const WavenumberGrid& g) {
  return Json{{"start", g.start()}, {"step", g.step()}, {"count", g.count()}};
}

WavenumberGrid grid_from(const Json& j) {
  return WavenumberGrid(get<double>(j, "start"), get<double>(j, "step"), get<std::size_t>(j, "count"));
}

Json encode_samples(const std::vector<double>& v, SampleEncoding enc) {
  Json j{{"count", v.size()}};
  switch (enc) {
    case SampleEncoding::Json:
      j["encoding"] = "json";
      j["data"] = v;
      break;
    case SampleEncoding::Float64Base64: {
      j["encoding"] = "f64-base64";
      j["data"] = base64_encode(std::string_view(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double)));
      break;
    }
    case SampleEncoding::Float32Base64: {
      std::vector<float> f(v.begin(), v.end());
      j["encoding"] = "f32-base64";
      j["data"] = base64_encode(std::string_view(reinterpret_cast<const char*>(f.data()), f.size() * sizeof(float)));
      break;
    }
  }
  return j;
}

std::vector<double> decode_samples(const Json& j) {
  const auto enc = get<std::string>(j, "encoding");
  const auto count = get<std::size_t>(j, "count");
  std::vector<double> out;
  if (enc == "json") {
    out = get<std::vector<double>>(j, "data");
  } else if (enc == "f64-base64" || enc == "f32-base64") {
    const std::string raw = base64_decode(get<std::string>(j, "data"));
    const std::size_t width = enc == "f64-base64" ? sizeof(double) : sizeof(float);
    if (raw.size() != count * width) {
      throw Error(ErrorCode::ParseError, "sample blob holds " + std::to_string(raw.size()) + " bytes, expected " +
                                             std::to_string(count * width));
    }
    out.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      if (width == sizeof(double)) {
        std::memcpy(&out[i], raw.data() + i * width, width);
      } else {
        float f;
        std::memcpy(&f, raw.data() + i * width, width);
        out[i] = f;
      }
    }
  } else {
    throw Error(ErrorCode::ParseError, "unknown sample encoding '" + enc + "'");
  }
  if (out.size() != count) throw Error(ErrorCode::ParseError, "sample count does not match 'count'");
  return out;
}

Json interferogram_body(const Interferogram& ig, SampleEncoding enc) {
  Json j;
  if (const auto* t = std::get_if<TimeSampledAxis>(&ig.axis)) {
    j["axis"] = {{"kind", "time_sampled"}, {"sampling_rate_hz", t->sampling_rate}, {"scan_speed_cm_s", t->scan_speed}};
  } else {
    j["axis"] = {{"kind", "uniform_path"}, {"step_cm", std::get<UniformPathAxis>(ig.axis).step}};
  }
  j["scan_length_cm"] = ig.scan_length;
  j["samples"] = encode_samples(ig.samples, enc);
  return j;
}

Interferogram interferogram_body_from(const Json& j) {
  const Json& axis = field(j, "axis");
  const auto kind = get<std::string>(axis, "kind");
  Interferogram ig;
  if (kind == "time_sampled") {
    ig.axis = TimeSampledAxis{get<double>(axis, "sampling_rate_hz"), get<double>(axis, "scan_speed_cm_s")};
  } else if (kind == "uniform_path") {
    ig.axis = UniformPathAxis{get<double>(axis, "step_cm")};
  } else {
    throw Error(ErrorCode::ParseError, "unknown interferogram axis kind '" + kind + "'");
  }
  ig.scan_length = get<double>(j, "scan_length_cm");
  ig.samples = decode_samples(field(j, "samples"));
  return ig;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

// ---- cross-section archive ----

std::string species_name(std::string_view molecule) {
  static const std::map<std::string, std::string, std::less<>> known{
      {"CH4", "methane"}, {"CH3COCH3", "acetone"}, {"CH3OH", "methanol"}, {"C2H5OH", "ethanol"},
      {"CH3CH2OH", "ethanol"}, {"N2", "nitrogen"}};
  if (auto it = known.find(molecule); it != known.end()) return it->second;
  std::string out(molecule);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

CrossSectionRecord parse_cross_section(std::string_view text) {
  const auto lines = split_lines(text);
  std::size_t ln = 0;
  while (ln < lines.size() && split_ws(lines[ln]).empty()) ++ln;
  if (ln == lines.size()) throw Error(ErrorCode::MalformedHeader, "no header line", 1);
  const std::size_t header_line = ln + 1;
  const auto tok = split_ws(lines[ln]);
  if (tok.size() < 7) {
    throw Error(ErrorCode::MalformedHeader, "header has " + std::to_string(tok.size()) + " fields, need at least 7",
                header_line);
  }
  CrossSectionHeader h;
  h.molecule = std::string(tok[0]);
  if (to_double(tok[0])) throw Error(ErrorCode::MalformedHeader, "header must start with a molecule name", header_line);
  auto num = [&](std::size_t i, const char* what) {
    const auto v = to_double(tok[i]);
    if (!v) throw Error(ErrorCode::MalformedHeader, std::string("bad ") + what + " '" + std::string(tok[i]) + "'", header_line);
    return *v;
  };
  h.numin = num(1, "numin");
  h.numax = num(2, "numax");
  const auto npts = to_size(tok[3]);
  if (!npts) throw Error(ErrorCode::MalformedHeader, "bad point count '" + std::string(tok[3]) + "'", header_line);
  h.npts = *npts;
  h.temperature = num(4, "temperature");
  h.pressure = num(5, "pressure");
  h.max_value = num(6, "max value");
  if (tok.size() > 7) h.resolution = std::string(tok[7]);
  if (tok.size() > 8) h.source = std::string(tok[8]);
  for (std::size_t i = 9; i < tok.size(); ++i) h.extra.emplace_back(tok[i]);
  if (!(h.numin < h.numax)) throw Error(ErrorCode::MalformedHeader, "numin must be below numax", header_line);
  if (h.npts < 2) throw Error(ErrorCode::MalformedHeader, "point count must be at least 2", header_line);
  if (h.npts > (std::size_t{1} << 28)) throw Error(ErrorCode::MalformedHeader, "point count is implausibly large", header_line);

  std::vector<double> values;
  values.reserve(h.npts);
  for (++ln; ln < lines.size(); ++ln) {
    const auto body = split_ws(lines[ln]);
    if (body.empty()) continue;
    if (values.size() == h.npts) {
      if (!to_double(body[0]) && body.size() >= 7) {
        throw Error(ErrorCode::MultiRecordUnsupported, "a second record starts here", ln + 1);
      }
      throw Error(ErrorCode::PointCountMismatch, "more than " + std::to_string(h.npts) + " values", ln + 1);
    }
    for (const auto t : body) {
      const auto v = to_double(t);
      if (!v) {
        if (!to_double(body[0]) && body.size() >= 7) {
          throw Error(ErrorCode::MultiRecordUnsupported, "a second record starts here", ln + 1);
        }
        throw Error(ErrorCode::MalformedBody, "not a finite number: '" + std::string(t) + "'", ln + 1);
      }
      if (*v < 0.0) throw Error(ErrorCode::NegativeValue, "negative cross-section " + std::string(t), ln + 1);
      if (values.size() == h.npts) {
        throw Error(ErrorCode::PointCountMismatch, "more than " + std::to_string(h.npts) + " values", ln + 1);
      }
      values.push_back(*v);
    }
  }
  if (values.size() != h.npts) {
    throw Error(ErrorCode::PointCountMismatch,
                "body has " + std::to_string(values.size()) + " values, header says " + std::to_string(h.npts),
                lines.size());
  }

  const double step = (h.numax - h.numin) / static_cast<double>(h.npts - 1);
  Provenance prov{{"molecule", h.molecule},
                  {"numin", format_double(h.numin)},
                  {"numax", format_double(h.numax)},
                  {"npts", std::to_string(h.npts)},
                  {"temperature_K", format_double(h.temperature)},
                  {"pressure_torr", format_double(h.pressure)},
                  {"max_value", format_double(h.max_value)}};
  if (!h.resolution.empty()) prov["resolution"] = h.resolution;
  if (!h.source.empty()) prov["source"] = h.source;
  if (!h.extra.empty()) {
    std::string e;
    for (const auto& x : h.extra) e += (e.empty() ? "" : " ") + x;
    prov["extra"] = e;
  }
  Spectrum xs(WavenumberGrid(h.numin, step, h.npts), std::move(values), SpectrumKind::CrossSection);
  GasSpecies sp(species_name(h.molecule), std::move(xs), std::move(prov));
  return {std::move(h), std::move(sp)};
}

GasSpecies parse_cross_section_file(std::string_view bytes) { return parse_cross_section(bytes).species; }

std::string format_cross_section(const CrossSectionHeader& h, const std::vector<double>& values) {
  std::string out = h.molecule + ' ' + format_double(h.numin) + ' ' + format_double(h.numax) + ' ' +
                    std::to_string(values.size()) + ' ' + format_double(h.temperature) + ' ' +
                    format_double(h.pressure) + ' ' + format_double(h.max_value);
  if (!h.resolution.empty() || !h.source.empty() || !h.extra.empty()) out += ' ' + (h.resolution.empty() ? "-" : h.resolution);
  if (!h.source.empty() || !h.extra.empty()) out += ' ' + (h.source.empty() ? "-" : h.source);
  for (const auto& e : h.extra) out += ' ' + e;
  out += '\n';
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += format_double(values[i]);
    out += (i % 10 == 9 || i + 1 == values.size()) ? '\n' : ' ';
  }
  return out;
}

CrossSectionRecord load_cross_section(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return parse_cross_section(text);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what(), e.line());
  }
}

// ---- spectrum CSV ----

std::string write_spectrum_csv(const Spectrum& s, const Provenance& comments) {
  std::string kind = to_string(s.kind());
  std::transform(kind.begin(), kind.end(), kind.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::string out;
  out.reserve(s.size() * 48 + 256);
  out += "# kind=" + kind + "\n";
  out += "# grid start=" + format_double(s.grid().start()) + " step=" + format_double(s.grid().step()) +
         " count=" + std::to_string(s.size()) + "\n";
  for (const auto& [k, v] : comments) out += "# " + k + "=" + v + "\n";
  out += "wavenumber_cm-1," + kind + (s.has_mask() ? ",valid\n" : "\n");
  for (std::size_t i = 0; i < s.size(); ++i) {
    out += format_sig17(s.grid().point(i));
    out += ',';
    out += format_sig17(s[i]);
    if (s.has_mask()) out += s.is_valid(i) ? ",1" : ",0";
    out += '\n';
  }
  return out;
}

Spectrum read_spectrum_csv(std::string_view text) {
  const auto lines = split_lines(text);
  std::optional<WavenumberGrid> declared;
  std::optional<SpectrumKind> kind;
  std::size_t ln = 0;
  bool have_header = false;
  bool has_valid = false;
  std::vector<double> nu, values;
  std::vector<bool> valid;
  for (; ln < lines.size(); ++ln) {
    const std::string line = trim(lines[ln]);
    const std::size_t row = ln + 1;
    if (line.empty()) continue;
    if (line.front() == '#') {
      const std::string body = trim(std::string_view(line).substr(1));
      if (body.rfind("grid ", 0) == 0) {
        double start = 0.0, step = 0.0;
        std::size_t count = 0;
        int seen = 0;
        for (const auto t : split_ws(std::string_view(body).substr(5))) {
          const auto eq = t.find('=');
          if (eq == std::string_view::npos) continue;
          const auto key = t.substr(0, eq);
          const auto val = t.substr(eq + 1);
          if (key == "start" && to_double(val)) start = *to_double(val), ++seen;
          if (key == "step" && to_double(val)) step = *to_double(val), ++seen;
          if (key == "count" && to_size(val)) count = *to_size(val), ++seen;
        }
        if (seen != 3) throw Error(ErrorCode::ParseError, "malformed grid comment", row);
        try {
          declared = WavenumberGrid(start, step, count);
        } catch (const Error& e) {
          throw Error(ErrorCode::ParseError, std::string("invalid grid comment: ") + e.what(), row);
        }
      }
      continue;
    }
    if (!have_header) {
      const auto comma = line.find(',');
      if (comma == std::string::npos) throw Error(ErrorCode::ParseError, "expected a column header", row);
      std::string rest = line.substr(comma + 1);
      const auto c2 = rest.find(',');
      if (c2 != std::string::npos) {
        if (trim(std::string_view(rest).substr(c2 + 1)) != "valid") {
          throw Error(ErrorCode::ParseError, "third column must be 'valid'", row);
        }
        has_valid = true;
        rest = rest.substr(0, c2);
      }
      try {
        kind = spectrum_kind_from_string(trim(rest));
      } catch (const Error&) {
        throw Error(ErrorCode::ParseError, "unknown spectrum kind '" + trim(rest) + "'", row);
      }
      have_header = true;
      continue;
    }
    std::vector<std::string_view> cells;
    std::string_view rest(line);
    while (true) {
      const auto c = rest.find(',');
      cells.push_back(rest.substr(0, c));
      if (c == std::string_view::npos) break;
      rest.remove_prefix(c + 1);
    }
    if (cells.size() != (has_valid ? 3u : 2u)) throw Error(ErrorCode::ParseError, "wrong number of columns", row);
    const auto x = to_double(trim(cells[0]));
    const auto y = to_double(trim(cells[1]));
    if (!x || !y) throw Error(ErrorCode::ParseError, "row " + std::to_string(row) + " is not a pair of finite numbers", row);
    nu.push_back(*x);
    values.push_back(*y);
    if (has_valid) {
      const auto f = trim(cells[2]);
      if (f != "0" && f != "1") throw Error(ErrorCode::ParseError, "valid flag must be 0 or 1", row);
      valid.push_back(f == "1");
    }
  }
  if (!have_header) throw Error(ErrorCode::ParseError, "missing column header", lines.size());
  if (nu.size() < 2) throw Error(ErrorCode::ParseError, "a spectrum needs at least two rows", lines.size());

  const WavenumberGrid grid = declared ? *declared
                                       : WavenumberGrid(nu.front(), (nu.back() - nu.front()) / static_cast<double>(nu.size() - 1),
                                                        nu.size());
  if (grid.count() != nu.size()) {
    throw Error(ErrorCode::ParseError, "grid comment declares " + std::to_string(grid.count()) + " rows, found " +
                                           std::to_string(nu.size()));
  }
  if (!(grid.step() > 0.0)) throw Error(ErrorCode::NonUniformGrid, "wavenumbers do not increase");
  for (std::size_t i = 0; i < nu.size(); ++i) {
    if (std::abs(nu[i] - grid.point(i)) > 1e-6 * grid.step()) {
      throw Error(ErrorCode::NonUniformGrid, "wavenumber " + format_sig17(nu[i]) + " is off the uniform grid");
    }
  }
  return Spectrum(grid, std::move(values), *kind, std::move(valid));
}

void save_spectrum_csv(const std::filesystem::path& path, const Spectrum& spectrum, const Provenance& comments) {
  write_file(path, write_spectrum_csv(spectrum, comments));
}

Spectrum load_spectrum_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return read_spectrum_csv(text);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what(), e.line());
  }
}

// ---- JSON documents ----

void check_schema(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "document must be a JSON object");
  const Json& v = field(j, "schema_version");
  if (!v.is_number_integer() || v.get<long long>() != kSchemaVersion) {
    throw Error(ErrorCode::SchemaVersionMismatch,
                "schema_version " + v.dump() + " is not " + std::to_string(kSchemaVersion));
  }
}

Json parse_json(std::string_view text) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

Json instrument_to_json(const InstrumentModel& m) {
  return Json{{"scan_length_cm", m.scan_length},
              {"scan_speed_cm_s", m.scan_speed},
              {"sampling_rate_hz", m.sampling_rate},
              {"pump_wavelength_nm", m.pump_wavelength},
              {"visibility", m.visibility},
              {"noise_std", m.noise_std},
              {"reference_noise_std", m.reference_noise_std},
              {"bandpass_low_hz", m.bandpass_low},
              {"bandpass_high_hz", m.bandpass_high},
              {"jitter_fraction", m.jitter_fraction},
              {"jitter_frequency_hz", m.jitter_frequency},
              {"jitter_phase_rad", m.jitter_phase},
              {"window_low_cm-1", m.window_low},
              {"window_high_cm-1", m.window_high}};
}

InstrumentModel instrument_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "instrument must be an object");
  InstrumentModel m;
  auto opt = [&](const char* key, double& dst) {
    if (j.contains(key)) dst = get<double>(j, key);
  };
  opt("scan_length_cm", m.scan_length);
  opt("scan_speed_cm_s", m.scan_speed);
  opt("sampling_rate_hz", m.sampling_rate);
  opt("pump_wavelength_nm", m.pump_wavelength);
  opt("visibility", m.visibility);
  opt("noise_std", m.noise_std);
  opt("reference_noise_std", m.reference_noise_std);
  opt("bandpass_low_hz", m.bandpass_low);
  opt("bandpass_high_hz", m.bandpass_high);
  opt("jitter_fraction", m.jitter_fraction);
  opt("jitter_frequency_hz", m.jitter_frequency);
  opt("jitter_phase_rad", m.jitter_phase);
  opt("window_low_cm-1", m.window_low);
  opt("window_high_cm-1", m.window_high);
  return m;
}

Json spectrum_to_json(const Spectrum& s) {
  Json j{{"kind", to_string(s.kind())}, {"grid", grid_json(s.grid())}, {"values", s.values()}};
  if (s.has_mask()) j["valid"] = s.mask();
  return j;
}

Spectrum spectrum_from_json(const Json& j) {
  const auto kind_text = get<std::string>(j, "kind");
  SpectrumKind kind;
  try {
    kind = spectrum_kind_from_string(kind_text);
  } catch (const Error&) {
    throw Error(ErrorCode::ParseError, "unknown spectrum kind '" + kind_text + "'");
  }
  std::vector<bool> valid;
  if (j.contains("valid")) valid = get<std::vector<bool>>(j, "valid");
  try {
    return Spectrum(grid_from(field(j, "grid")), get<std::vector<double>>(j, "values"), kind, std::move(valid));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MissingField || e.code() == ErrorCode::ParseError) throw;
    throw Error(ErrorCode::ParseError, std::string("invalid spectrum: ") + e.what());
  }
}

Json interferogram_to_json(const InterferogramDocument& doc, SampleEncoding encoding) {
  Json j{{"schema_version", kSchemaVersion}, {"type", "interferogram"}};
  j.update(interferogram_body(doc.interferogram, encoding));
  if (doc.instrument) j["instrument"] = instrument_to_json(*doc.instrument);
  j["provenance"] = provenance_json(doc.provenance);
  return j;
}

InterferogramDocument interferogram_from_json(const Json& j) {
  check_schema(j);
  InterferogramDocument doc{interferogram_body_from(j), std::nullopt, provenance_from(j)};
  if (j.contains("instrument")) doc.instrument = instrument_from_json(j.at("instrument"));
  return doc;
}

Json scan_to_json(const ScanDocument& doc, SampleEncoding encoding) {
  Json j{{"schema_version", kSchemaVersion}, {"type", "scan"}};
  j["signal"] = interferogram_body(doc.scan.signal, encoding);
  j["reference"] = interferogram_body(doc.scan.reference, encoding);
  if (doc.instrument) j["instrument"] = instrument_to_json(*doc.instrument);
  j["provenance"] = provenance_json(doc.provenance);
  return j;
}

ScanDocument scan_from_json(const Json& j) {
  check_schema(j);
  ScanDocument doc{{interferogram_body_from(field(j, "signal")), interferogram_body_from(field(j, "reference"))},
                   std::nullopt,
                   provenance_from(j)};
  if (j.contains("instrument")) doc.instrument = instrument_from_json(j.at("instrument"));
  return doc;
}

Json retrieval_result_to_json(const das::RetrievalResult& r, const Provenance& provenance) {
  Json j{{"schema_version", kSchemaVersion}, {"type", "retrieval_result"}, {"species", r.species}};
  Json conc = Json::object(), snr = Json::object(), dl = Json::object(), present = Json::object();
  for (const auto& name : r.species) {
    conc[name] = r.concentrations.at(name);
    snr[name] = std::isfinite(r.snr.at(name)) ? Json(r.snr.at(name)) : Json(nullptr);
    const auto& limit = r.detection_limits.at(name);
    dl[name] = limit ? Json(*limit) : Json(nullptr);
    present[name] = r.present(name);
  }
  j["concentrations_ppm"] = conc;
  j["snr"] = snr;
  j["detection_limits"] = dl;
  j["present"] = present;
  j["noise_std"] = r.noise_std;
  Json cov = Json::array();
  for (Eigen::Index a = 0; a < r.covariance.rows(); ++a) {
    Json row = Json::array();
    for (Eigen::Index b = 0; b < r.covariance.cols(); ++b) row.push_back(r.covariance(a, b));
    cov.push_back(row);
  }
  j["covariance_ppm2"] = cov;
  j["fit"] = spectrum_to_json(r.fit);
  j["residual"] = spectrum_to_json(r.residual);
  j["provenance"] = provenance_json(provenance);
  return j;
}

das::RetrievalResult retrieval_result_from_json(const Json& j) {
  check_schema(j);
  das::RetrievalResult r{get<std::vector<std::string>>(j, "species"),
                         {},
                         {},
                         spectrum_from_json(field(j, "fit")),
                         spectrum_from_json(field(j, "residual")),
                         get<double>(j, "noise_std"),
                         {},
                         {}};
  const Json& conc = field(j, "concentrations_ppm");
  const Json& snr = field(j, "snr");
  const Json& dl = field(j, "detection_limits");
  for (const auto& name : r.species) {
    r.concentrations[name] = get<double>(conc, name.c_str());
    const Json& s = field(snr, name.c_str());
    r.snr[name] = s.is_null() ? std::numeric_limits<double>::infinity() : get<double>(snr, name.c_str());
    const Json& d = field(dl, name.c_str());
    r.detection_limits[name] = d.is_null() ? std::nullopt : std::optional<double>(get<double>(dl, name.c_str()));
  }
  const auto n = static_cast<Eigen::Index>(r.species.size());
  const auto cov = get<std::vector<std::vector<double>>>(j, "covariance_ppm2");
  if (static_cast<Eigen::Index>(cov.size()) != n) throw Error(ErrorCode::ParseError, "covariance size mismatch");
  r.covariance.resize(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    if (static_cast<Eigen::Index>(cov[a].size()) != n) throw Error(ErrorCode::ParseError, "covariance size mismatch");
    for (Eigen::Index b = 0; b < n; ++b) r.covariance(a, b) = cov[a][b];
  }
  return r;
}

Json calibration_result_to_json(const calibration::CalibrationResult& r, const Provenance& provenance) {
  return Json{{"schema_version", kSchemaVersion},
              {"type", "calibration_result"},
              {"concentration_ppm", r.concentration},
              {"resolution_cm-1", r.resolution},
              {"fit_rms", r.fit_rms},
              {"iterations", r.iterations},
              {"converged", r.converged},
              {"diagnostic", r.diagnostic},
              {"noise_std", r.noise_std},
              {"sensitivity_per_ppm", r.sensitivity},
              {"detection_limit_ppm", r.detection_limit},
              {"cost_history", r.cost_history},
              {"provenance", provenance_json(provenance)}};
}

calibration::CalibrationResult calibration_result_from_json(const Json& j) {
  check_schema(j);
  calibration::CalibrationResult r;
  r.concentration = get<double>(j, "concentration_ppm");
  r.resolution = get<double>(j, "resolution_cm-1");
  r.fit_rms = get<double>(j, "fit_rms");
  r.iterations = get<int>(j, "iterations");
  r.converged = get<bool>(j, "converged");
  r.diagnostic = get<std::string>(j, "diagnostic");
  r.noise_std = get<double>(j, "noise_std");
  r.sensitivity = get<double>(j, "sensitivity_per_ppm");
  r.detection_limit = get<double>(j, "detection_limit_ppm");
  if (j.contains("cost_history")) r.cost_history = get<std::vector<double>>(j, "cost_history");
  return r;
}

// ---- files and digests ----

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::IoError, "cannot read '" + path.string() + "'");
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + tmp + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed for '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot rename '" + tmp + "': " + ec.message());
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::IoError, "SHA-256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out(2 * len, '0');
  for (unsigned i = 0; i < len; ++i) {
    out[2 * i] = hex[md[i] >> 4];
    out[2 * i + 1] = hex[md[i] & 15];
  }
  return out;
}

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw Error(ErrorCode::ParseError, "base64 length is not a multiple of 4");
  if (text.empty()) return {};
  std::string out(3 * (text.size() / 4), '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
  if (n < 0) throw Error(ErrorCode::ParseError, "invalid base64 data");
  std::size_t pad = 0;
  if (text.back() == '=') ++pad;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

}  // namespace qftir::io
