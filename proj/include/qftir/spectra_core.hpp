#pragma once

// Spectral value types shared across the pipeline: uniform wavenumber grids,
// spectra tagged with their physical kind, absorbing species and mixtures.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qftir {

inline constexpr double kBoltzmann = 1.380649e-23;  // J/K
inline constexpr double kDefaultTemperature = 293.15;  // K, 20 degC
inline constexpr double kDefaultPressure = 1.0e5;  // Pa, 1 bar
inline constexpr double kPpm = 1.0e-6;

/// Uniform wavenumber axis, point(i) = start + i*step in cm^-1.
class WavenumberGrid {
 public:
  WavenumberGrid(double start, double step, std::size_t count);

  double start() const noexcept { return start_; }
  double step() const noexcept { return step_; }
  std::size_t count() const noexcept { return count_; }
  double point(std::size_t i) const noexcept { return start_ + static_cast<double>(i) * step_; }
  double last() const noexcept { return point(count_ - 1); }
  std::vector<double> points() const;

  /// Sub-grid of the points lying inside [low, high]. Throws InvalidBand when
  /// fewer than two points fall inside.
  WavenumberGrid restrict_to(double low, double high) const;
  /// Index of the grid point equal to `wavenumber` (within 1e-9 step).
  std::size_t index_of(double wavenumber) const;

  friend bool operator==(const WavenumberGrid&, const WavenumberGrid&) = default;

 private:
  double start_;
  double step_;
  std::size_t count_;
};

enum class SpectrumKind { Intensity, Transmission, Absorbance, CrossSection };

std::string to_string(SpectrumKind kind);
SpectrumKind spectrum_kind_from_string(const std::string& text);

/// Values sampled on a grid. An optional validity mask marks points excluded
/// from fits (e.g. non-positive intensities when forming an absorbance); masked
/// points still hold a finite placeholder value.
///
/// The constructor only requires finite values. Sign constraints of a kind are
/// checked by check_physical() where raw data enters the system; outputs of the
/// sinc response or of detrending legitimately ring below zero or above one.
class Spectrum {
 public:
  Spectrum(WavenumberGrid grid, std::vector<double> values, SpectrumKind kind,
           std::vector<bool> valid = {});

  const WavenumberGrid& grid() const noexcept { return grid_; }
  const std::vector<double>& values() const noexcept { return values_; }
  SpectrumKind kind() const noexcept { return kind_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const noexcept { return values_.size(); }

  bool has_mask() const noexcept { return !valid_.empty(); }
  bool is_valid(std::size_t i) const { return valid_.empty() || valid_[i]; }
  const std::vector<bool>& mask() const noexcept { return valid_; }

  /// Points of this spectrum that lie inside [low, high], mask included.
  Spectrum restrict_to(double low, double high) const;
  Spectrum with_kind(SpectrumKind kind) const;
  Spectrum scaled(double factor) const;

 private:
  WavenumberGrid grid_;
  std::vector<double> values_;
  SpectrumKind kind_;
  std::vector<bool> valid_;
};

/// Throws InvalidArgument unless Transmission values lie in (0, 1] and
/// Intensity/CrossSection values are non-negative (masked points excepted).
void check_physical(const Spectrum& spectrum);

/// An absorber with its cross-section in cm^2/molecule.
struct GasSpecies {
  GasSpecies(std::string name, Spectrum cross_section,
             std::map<std::string, std::string> provenance = {});

  std::string name;
  Spectrum cross_section;
  std::map<std::string, std::string> provenance;
};

using SpeciesDatabase = std::map<std::string, GasSpecies>;

struct AmbientConditions {
  double temperature = kDefaultTemperature;  // K
  double pressure = kDefaultPressure;  // Pa
};

struct MixtureComponent {
  std::string species;
  double concentration_ppm = 0.0;
};

class GasMixture {
 public:
  GasMixture() = default;
  GasMixture(std::vector<MixtureComponent> components, AmbientConditions conditions = {});

  const std::vector<MixtureComponent>& components() const noexcept { return components_; }
  const AmbientConditions& conditions() const noexcept { return conditions_; }
  double temperature() const noexcept { return conditions_.temperature; }
  double pressure() const noexcept { return conditions_.pressure; }
  bool empty() const noexcept { return components_.empty(); }

 private:
  std::vector<MixtureComponent> components_;
  AmbientConditions conditions_;
};

/// Linear interpolation onto `target`. Target points outside the source range
/// are zero-filled for CrossSection/Absorbance and rejected otherwise.
Spectrum resample(const Spectrum& spectrum, const WavenumberGrid& target);

/// Pointwise mean. All inputs must share one grid and kind; masks are OR-ed
/// into invalid points.
Spectrum average_spectra(std::span<const Spectrum> spectra);

/// Ideal-gas number density in molecules/cm^3.
double number_density(double temperature_k, double pressure_pa);
inline double number_density(const AmbientConditions& c) {
  return number_density(c.temperature, c.pressure);
}

}  // namespace qftir
