#include "qftir/spectra_core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "qftir/error.hpp"

namespace qftir {

namespace {

constexpr double kSnap = 1e-9;  // fraction of a step treated as coincident

}  // namespace

WavenumberGrid::WavenumberGrid(double start, double step, std::size_t count)
    : start_(start), step_(step), count_(count) {
  if (!std::isfinite(start) || !std::isfinite(step) || !(step > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "grid step must be finite and positive");
  }
  if (count < 2) throw Error(ErrorCode::InvalidArgument, "grid needs at least two points");
}

std::vector<double> WavenumberGrid::points() const {
  std::vector<double> out(count_);
  for (std::size_t i = 0; i < count_; ++i) out[i] = point(i);
  return out;
}

WavenumberGrid WavenumberGrid::restrict_to(double low, double high) const {
  if (!(low < high)) throw Error(ErrorCode::InvalidBand, "band low must be below band high");
  const double lo_idx = std::ceil((low - start_) / step_ - kSnap);
  const double hi_idx = std::floor((high - start_) / step_ + kSnap);
  const double first = std::max(lo_idx, 0.0);
  const double last = std::min(hi_idx, static_cast<double>(count_ - 1));
  if (last - first < 1.0) {
    throw Error(ErrorCode::InvalidBand, "fewer than two grid points inside [" +
                                            std::to_string(low) + ", " + std::to_string(high) + "]");
  }
  const auto i0 = static_cast<std::size_t>(first);
  const auto i1 = static_cast<std::size_t>(last);
  return WavenumberGrid(point(i0), step_, i1 - i0 + 1);
}

std::size_t WavenumberGrid::index_of(double wavenumber) const {
  const double u = (wavenumber - start_) / step_;
  const double r = std::round(u);
  if (std::abs(u - r) > kSnap || r < 0 || r > static_cast<double>(count_ - 1)) {
    throw Error(ErrorCode::GridMismatch, "wavenumber " + std::to_string(wavenumber) + " is not a grid point");
  }
  return static_cast<std::size_t>(r);
}

std::string to_string(SpectrumKind kind) {
  switch (kind) {
    case SpectrumKind::Intensity: return "Intensity";
    case SpectrumKind::Transmission: return "Transmission";
    case SpectrumKind::Absorbance: return "Absorbance";
    case SpectrumKind::CrossSection: return "CrossSection";
  }
  return "Unknown";
}

SpectrumKind spectrum_kind_from_string(const std::string& text) {
  for (auto k : {SpectrumKind::Intensity, SpectrumKind::Transmission, SpectrumKind::Absorbance,
                 SpectrumKind::CrossSection}) {
    const std::string name = to_string(k);
    if (std::equal(name.begin(), name.end(), text.begin(), text.end(),
                   [](char a, char b) { return std::tolower(static_cast<unsigned char>(a)) ==
                                               std::tolower(static_cast<unsigned char>(b)); })) {
      return k;
    }
  }
  throw Error(ErrorCode::ParseError, "unknown spectrum kind '" + text + "'");
}

Spectrum::Spectrum(WavenumberGrid grid, std::vector<double> values, SpectrumKind kind,
                   std::vector<bool> valid)
    : grid_(grid), values_(std::move(values)), kind_(kind), valid_(std::move(valid)) {
  if (values_.size() != grid_.count()) {
    throw Error(ErrorCode::GridMismatch, "spectrum has " + std::to_string(values_.size()) +
                                             " values for a grid of " + std::to_string(grid_.count()));
  }
  if (!valid_.empty() && valid_.size() != values_.size()) {
    throw Error(ErrorCode::GridMismatch, "mask length differs from value count");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw Error(ErrorCode::InvalidArgument, "non-finite spectrum value at index " + std::to_string(i));
    }
  }
  if (!valid_.empty() && std::all_of(valid_.begin(), valid_.end(), [](bool b) { return b; })) {
    valid_.clear();
  }
}

Spectrum Spectrum::restrict_to(double low, double high) const {
  const WavenumberGrid sub = grid_.restrict_to(low, high);
  const std::size_t offset = grid_.index_of(sub.start());
  std::vector<double> v(values_.begin() + static_cast<std::ptrdiff_t>(offset),
                        values_.begin() + static_cast<std::ptrdiff_t>(offset + sub.count()));
  std::vector<bool> m;
  if (!valid_.empty()) {
    m.assign(valid_.begin() + static_cast<std::ptrdiff_t>(offset),
             valid_.begin() + static_cast<std::ptrdiff_t>(offset + sub.count()));
  }
  return Spectrum(sub, std::move(v), kind_, std::move(m));
}

Spectrum Spectrum::with_kind(SpectrumKind kind) const { return Spectrum(grid_, values_, kind, valid_); }

Spectrum Spectrum::scaled(double factor) const {
  std::vector<double> v(values_);
  for (auto& x : v) x *= factor;
  return Spectrum(grid_, std::move(v), kind_, valid_);
}

void check_physical(const Spectrum& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s.is_valid(i)) continue;
    const double v = s[i];
    switch (s.kind()) {
      case SpectrumKind::Transmission:
        if (!(v > 0.0 && v <= 1.0)) {
          throw Error(ErrorCode::InvalidArgument, "transmission outside (0, 1] at index " + std::to_string(i));
        }
        break;
      case SpectrumKind::Intensity:
      case SpectrumKind::CrossSection:
        if (v < 0.0) {
          throw Error(ErrorCode::InvalidArgument,
                      to_string(s.kind()) + " value negative at index " + std::to_string(i));
        }
        break;
      case SpectrumKind::Absorbance: break;
    }
  }
}

GasSpecies::GasSpecies(std::string name_, Spectrum cross_section_, std::map<std::string, std::string> provenance_)
    : name(std::move(name_)), cross_section(std::move(cross_section_)), provenance(std::move(provenance_)) {
  if (name.empty()) throw Error(ErrorCode::InvalidArgument, "species name is empty");
  if (cross_section.kind() != SpectrumKind::CrossSection) {
    throw Error(ErrorCode::InvalidArgument, "species '" + name + "' needs a CrossSection spectrum");
  }
  check_physical(cross_section);
}

GasMixture::GasMixture(std::vector<MixtureComponent> components, AmbientConditions conditions)
    : components_(std::move(components)), conditions_(conditions) {
  if (!(conditions_.temperature > 0.0) || !(conditions_.pressure > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "temperature and pressure must be positive");
  }
  std::set<std::string> seen;
  for (const auto& c : components_) {
    if (!std::isfinite(c.concentration_ppm)) {
      throw Error(ErrorCode::InvalidArgument, "non-finite concentration for " + c.species);
    }
    if (!seen.insert(c.species).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate species '" + c.species + "' in mixture");
    }
  }
}

Spectrum resample(const Spectrum& spectrum, const WavenumberGrid& target) {
  const WavenumberGrid& src = spectrum.grid();
  const double lo = src.start();
  const double hi = src.last();
  const double tol = kSnap * src.step();
  if (target.last() < lo - tol || target.start() > hi + tol) {
    throw Error(ErrorCode::NonOverlappingGrids, "target grid does not overlap the source grid");
  }
  const bool zero_fill =
      spectrum.kind() == SpectrumKind::CrossSection || spectrum.kind() == SpectrumKind::Absorbance;

  const auto& y = spectrum.values();
  const std::size_t n = src.count();
  std::vector<double> out(target.count(), 0.0);
  std::vector<bool> valid;
  if (spectrum.has_mask()) valid.assign(target.count(), true);

  for (std::size_t j = 0; j < target.count(); ++j) {
    const double nu = target.point(j);
    if (nu < lo - tol || nu > hi + tol) {
      if (!zero_fill) {
        throw Error(ErrorCode::ExtrapolationRequired,
                    "target point " + std::to_string(nu) + " lies outside the " + to_string(spectrum.kind()) +
                        " source grid");
      }
      continue;
    }
    double u = (nu - lo) / src.step();
    const double r = std::round(u);
    if (std::abs(u - r) <= kSnap) u = r;
    u = std::clamp(u, 0.0, static_cast<double>(n - 1));
    auto i = static_cast<std::size_t>(std::floor(u));
    if (i >= n - 1) i = n - 2;
    const double f = u - static_cast<double>(i);
    if (f == 0.0) {
      out[j] = y[i];
    } else if (f == 1.0) {
      out[j] = y[i + 1];
    } else {
      out[j] = (1.0 - f) * y[i] + f * y[i + 1];
    }
    if (!valid.empty()) {
      const bool need_lo = f < 1.0;
      const bool need_hi = f > 0.0;
      valid[j] = (!need_lo || spectrum.is_valid(i)) && (!need_hi || spectrum.is_valid(i + 1));
    }
  }
  return Spectrum(target, std::move(out), spectrum.kind(), std::move(valid));
}

Spectrum average_spectra(std::span<const Spectrum> spectra) {
  if (spectra.empty()) throw Error(ErrorCode::EmptyInput, "no spectra to average");
  const Spectrum& first = spectra.front();
  std::vector<double> sum(first.size(), 0.0);
  std::vector<bool> valid;
  bool any_mask = false;
  for (const auto& s : spectra) {
    if (!(s.grid() == first.grid()) || s.kind() != first.kind()) {
      throw Error(ErrorCode::GridMismatch, "spectra to average must share grid and kind");
    }
    any_mask = any_mask || s.has_mask();
  }
  if (any_mask) valid.assign(first.size(), true);
  for (const auto& s : spectra) {
    const auto& v = s.values();
    for (std::size_t i = 0; i < sum.size(); ++i) {
      sum[i] += v[i];
      if (any_mask && !s.is_valid(i)) valid[i] = false;
    }
  }
  const double inv = 1.0 / static_cast<double>(spectra.size());
  for (auto& x : sum) x *= inv;
  return Spectrum(first.grid(), std::move(sum), first.kind(), std::move(valid));
}

double number_density(double temperature_k, double pressure_pa) {
  if (!(temperature_k > 0.0) || !(pressure_pa > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "temperature and pressure must be positive");
  }
  // molecules per m^3 -> per cm^3
  return pressure_pa / (kBoltzmann * temperature_k) * 1.0e-6;
}

}  // namespace qftir
