#pragma once

#include <cstddef>

namespace qftir {

/// Scan and acquisition parameters of the interferometer. Defaults describe
/// the open-path instrument: 9 mm scan at 4 mm/s, 100 kHz sampling, 800 nm
/// pump, 0.3-10 kHz electronic band-pass.
struct InstrumentModel {
  double scan_length = 0.9;  // cm, also fixes the resolution
  double scan_speed = 0.4;  // cm/s
  double sampling_rate = 1.0e5;  // Hz
  double pump_wavelength = 800.0;  // nm
  double visibility = 0.5;
  double noise_std = 0.0;  // per-sample noise relative to the trace maximum
  double reference_noise_std = 0.0;  // absolute, on the unit-amplitude pump fringes
  double bandpass_low = 300.0;  // Hz
  double bandpass_high = 1.0e4;  // Hz

  // Sinusoidal scan-speed error: v(t) = v (1 + fraction * cos(2 pi f t + phase)).
  double jitter_fraction = 0.0;
  double jitter_frequency = 0.0;  // Hz
  double jitter_phase = 0.0;  // rad

  // Wavenumber window kept when converting interferograms to spectra.
  double window_low = 2650.0;  // cm^-1
  double window_high = 3150.0;  // cm^-1

  /// Spectral resolution, exactly 1/scan_length.
  double resolution() const noexcept { return 1.0 / scan_length; }
  double pump_wavelength_cm() const noexcept { return pump_wavelength * 1.0e-7; }
  /// Samples recorded over one scan.
  std::size_t sample_count() const;

  /// Throws InvalidArgument on out-of-range parameters and NyquistViolation if
  /// the pump reference fringes cannot be sampled.
  void validate() const;
  /// Throws NyquistViolation unless sampling_rate > 2 * scan_speed * max_wavenumber.
  void check_nyquist(double max_wavenumber) const;
};

}  // namespace qftir
