#pragma once

// Interferogram -> spectrum: electronic band-pass, pump-fringe referenced
// resampling onto uniform optical path, Fourier transform, scan averaging.

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qftir/instrument.hpp"
#include "qftir/interferogram.hpp"
#include "qftir/spectra_core.hpp"

namespace qftir::interferometry {

/// Zero-phase band-pass: second-order Butterworth high-pass at `low` and
/// low-pass at `high`, run forward and backward over an evenly mirrored,
/// steady-state initialised sequence.
Interferogram bandpass(const Interferogram& ig, double low_hz, double high_hz);

/// Zero crossings of the mean-removed trace in fractional sample units, found
/// with a hysteresis of 10% of the RMS and linear sub-sample interpolation.
std::vector<double> zero_crossings(std::span<const double> trace);

/// Maps every sample to optical path by counting pump fringe zero crossings
/// (lambda_p/4 of path each) and interpolates the signal onto x_m = m*lambda_p/4.
/// The path origin is placed at the first sample.
Interferogram resample_by_reference(const Interferogram& signal, const Interferogram& reference,
                                    double pump_wavelength_nm);

/// One-sided transform of the mirrored (even) extension of a uniform-path
/// trace: X_j = y_0 + 2 sum_{m>=1} y_m cos(2 pi j m / N), on nu_j = j * spacing.
struct ComplexSpectrum {
  std::vector<std::complex<double>> bins;  // N/2 + 1 values
  std::size_t length = 0;  // N, length of the mirrored sequence
  double spacing = 0.0;  // cm^-1 per bin
  double path_step = 0.0;  // cm
};

/// fft_length 0 selects next_pow2(4 * samples). Otherwise it must be at least
/// 2 * samples - 1.
ComplexSpectrum transform_interferogram(const Interferogram& ig, std::size_t fft_length = 0);

/// 2 * step * |X_j| restricted to [low, high]. For a trace V * int S(nu)
/// cos(2 pi nu x) dnu this equals V * (S * H)(nu), the sinc-broadened spectrum.
Spectrum spectrum_from_interferogram(const Interferogram& ig, double low = 2650.0, double high = 3150.0,
                                     std::size_t fft_length = 0);

struct ScanPair {
  Interferogram signal;
  Interferogram reference;
};

struct BatchResult {
  Spectrum spectrum;
  std::size_t used = 0;
  std::size_t failed = 0;
  std::vector<std::string> failures;  // "scan <i>: <reason>"
};

/// FFT length shared by all scans of an instrument, so their spectra share a grid.
std::size_t batch_fft_length(const InstrumentModel& instrument);

/// bandpass -> resample_by_reference -> spectrum on the instrument window.
Spectrum process_scan(const ScanPair& scan, const InstrumentModel& instrument);

/// Runs process_scan on every pair and averages the successes in input order.
/// Scans that raise a pipeline error are skipped; more than 20% failures
/// throws TooManyFailedScans. `threads` > 1 processes scans concurrently with
/// a result identical to the sequential one.
BatchResult process_scan_batch(std::span<const ScanPair> scans, const InstrumentModel& instrument,
                               unsigned threads = 1);

/// Same, with scans produced on demand by `load(i)` for i < count so that only
/// a few are held at once. Errors raised by `load` count as scan failures.
BatchResult process_scan_batch(std::size_t count, const std::function<ScanPair(std::size_t)>& load,
                               const InstrumentModel& instrument, unsigned threads = 1);

}  // namespace qftir::interferometry
