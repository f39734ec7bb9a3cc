#pragma once

// Differential absorption retrieval: absorbance from a sample/reference pair,
// polynomial detrending, differential cross-sections and the linear
// least-squares concentration fit with its noise statistics.

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qftir/spectra_core.hpp"

namespace qftir::das {

struct DifferentialBand {
  double low = 2810.0;  // cm^-1
  double high = 3050.0;  // cm^-1
  unsigned poly_degree = 9;

  /// Throws InvalidBand unless low < high.
  void validate() const;
};

struct RetrievalResult {
  std::vector<std::string> species;  // column order of the design matrix
  std::map<std::string, double> concentrations;  // ppm, signed
  Eigen::MatrixXd covariance;  // ppm^2, in `species` order
  Spectrum fit;  // M c on the analysis grid
  Spectrum residual;  // differential absorbance minus fit
  double noise_std = 0.0;
  std::map<std::string, double> snr;
  /// Absent when the residual is exactly zero.
  std::map<std::string, std::optional<double>> detection_limits;

  /// |c| >= detection limit. False when the limit is undefined.
  bool present(const std::string& name) const;
};

/// ln(reference / sample). Points with sample <= 0, or reference <= 0 outside
/// `band`, are masked. A non-positive reference inside `band` is an error.
Spectrum measured_absorbance(const Spectrum& sample, const Spectrum& reference,
                             const std::optional<DifferentialBand>& band = std::nullopt);

struct Detrended {
  Spectrum slow;
  Spectrum differential;
};

/// Least-squares Legendre polynomial over [low, high] (wavenumbers mapped to
/// [-1, 1]), fitted to unmasked points. Both outputs live on the band sub-grid.
Detrended detrend(const Spectrum& absorbance, const DifferentialBand& band);

/// Per species: sinc response on the native grid, linear resampling onto
/// `analysis_grid`, then the same detrending as the measurement.
std::map<std::string, Spectrum> differential_cross_sections(const SpeciesDatabase& species,
                                                            const WavenumberGrid& analysis_grid,
                                                            const DifferentialBand& band, double resolution);

/// Signed least-squares solution of dA = M c, column k of M being
/// L * n_air * 1e-6 * dsigma_k. noise_std = sqrt(sum r^2 / (rows - cols)).
RetrievalResult retrieve(const Spectrum& differential_absorbance,
                         const std::map<std::string, Spectrum>& differential_xs, double path_length,
                         const AmbientConditions& conditions = {});

/// |c| / snr.
double detection_limit(double concentration, double snr);

/// Full analysis of one sample/reference pair with fixed cross-sections.
class DasAnalyzer {
 public:
  struct Output {
    Spectrum absorbance;
    Detrended parts;
    RetrievalResult result;
  };

  DasAnalyzer(std::map<std::string, Spectrum> differential_xs, DifferentialBand band, double path_length,
              AmbientConditions conditions = {});

  /// Builds the differential cross-sections for the measurement grid itself.
  static DasAnalyzer for_grid(const SpeciesDatabase& species, const WavenumberGrid& grid, const DifferentialBand& band,
                              double resolution, double path_length, AmbientConditions conditions = {});

  Output analyze(const Spectrum& sample, const Spectrum& reference) const;
  RetrievalResult retrieve_absorbance(const Spectrum& absorbance) const;

  const std::map<std::string, Spectrum>& differential_xs() const noexcept { return xs_; }
  const DifferentialBand& band() const noexcept { return band_; }
  double path_length() const noexcept { return path_length_; }
  const AmbientConditions& conditions() const noexcept { return conditions_; }

 private:
  std::map<std::string, Spectrum> xs_;
  DifferentialBand band_;
  double path_length_;
  AmbientConditions conditions_;
};

struct TrackStep {
  double timestamp = 0.0;
  Spectrum reference;
  Spectrum sample;
};

struct TrackEntry {
  double timestamp = 0.0;
  std::optional<RetrievalResult> result;
  std::string error;  // set when result is empty
};

/// Analyzes every step in order. Per-step failures are recorded in the entry.
std::vector<TrackEntry> track(const std::vector<TrackStep>& series, const DasAnalyzer& analyzer);

}  // namespace qftir::das
