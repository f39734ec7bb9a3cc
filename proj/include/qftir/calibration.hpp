#pragma once

// Instrument calibration against a reference gas: nonlinear least squares on
// concentration and spectral resolution with the model -ln([T * H](nu)).

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "qftir/spectra_core.hpp"

namespace qftir::calibration {

/// Model absorbance -ln(T(c) * H(res)) at the unmasked points of a measured
/// spectrum. The convolution runs on the species' native grid over the
/// measured span plus a 20 cm^-1 margin and is then interpolated.
class CalibrationModel {
 public:
  CalibrationModel(const Spectrum& measured, const GasSpecies& species, double path_length,
                   AmbientConditions conditions = {});

  std::vector<double> evaluate(double concentration_ppm, double resolution) const;
  /// Central differences with respect to (ln c, ln res), relative step on the
  /// log parameters. One column when `with_resolution` is false.
  Eigen::MatrixXd jacobian(double concentration_ppm, double resolution, double rel_step = 1e-4,
                           bool with_resolution = true) const;
  /// 0.5 * sum of squared residuals against the measured values.
  double cost(double concentration_ppm, double resolution) const;

  const std::vector<double>& targets() const noexcept { return targets_; }
  const std::vector<double>& wavenumbers() const noexcept { return nu_; }
  /// Smallest resolution the native grid can represent (5 grid steps).
  double min_resolution() const noexcept { return 5.0 * step_; }

 private:
  std::vector<double> nu_;
  std::vector<double> targets_;
  std::vector<double> sigma_;  // native cross-section over the model region
  double start_ = 0.0;
  double step_ = 0.0;
  double column_ = 0.0;  // L * n_air * 1e-6
};

struct InitialGuess {
  double concentration_ppm = 50.0;
  double resolution = 2.0;
};

struct CalibrationOptions {
  bool fit_resolution = true;
  int max_iterations = 200;
  double jacobian_step = 1e-4;
};

struct CalibrationResult {
  double concentration = 0.0;  // ppm
  double resolution = 0.0;  // cm^-1
  double fit_rms = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string diagnostic;
  /// rms * sqrt(m / (m - p)), the residual noise estimate.
  double noise_std = 0.0;
  /// Peak |d model / d c| at the solution, absorbance per ppm.
  double sensitivity = 0.0;
  /// noise_std / sensitivity, the concentration giving a peak equal to the noise.
  double detection_limit = 0.0;
  std::vector<double> cost_history;  // cost after each accepted step, initial first
};

/// Levenberg-Marquardt in (ln c, ln res), started from the best point of a
/// resolution profile scan over [res0 / 3, 3 res0] when resolution is fitted. Stops when the relative parameter
/// change drops below 1e-8 or the gradient below 1e-10 of its initial norm.
/// A Jacobian column collapsing below 1e-4 of its initial norm ends the fit
/// with converged = false and a flat-direction diagnostic.
CalibrationResult calibrate(const Spectrum& measured, const GasSpecies& species, double path_length,
                            const AmbientConditions& conditions, InitialGuess initial,
                            const CalibrationOptions& options = {});

struct LinearitySettings {
  double path_length = 135.0;  // cm
  AmbientConditions conditions{};
  double resolution = 1.11;  // cm^-1, held fixed
  double low = 2950.0;
  double high = 3080.0;
  double step = 0.2;
  /// Noise is set so that `reference_ppm` gives this peak SNR.
  double reference_snr = 24.0;
  double reference_ppm = 100.0;
  double initial_ppm = 50.0;
};

struct LinearityPoint {
  double nominal = 0.0;
  double retrieved = 0.0;
  double limit = 0.0;  // +- band
  bool converged = false;
};

/// Per nominal value: noisy synthetic measurement, concentration-only fit.
/// Seeds are noise_seed + index.
std::vector<LinearityPoint> linearity_check(const std::vector<double>& nominal_ppm, const GasSpecies& species,
                                            std::uint64_t noise_seed, const LinearitySettings& settings = {});

}  // namespace qftir::calibration
