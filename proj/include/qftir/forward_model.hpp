#pragma once

// Forward direction of the measurement: gas mixture -> transmission -> idler
// spectrum -> detector interferogram and pump reference fringes.

#include <cstdint>
#include <vector>

#include "qftir/instrument.hpp"
#include "qftir/interferogram.hpp"
#include "qftir/spectra_core.hpp"

namespace qftir::forward {

/// Phenomenological source envelope, normalized to unit peak.
class EnvelopeModel {
 public:
  enum class Shape { Gaussian, RaisedCosine, Tabulated };

  /// Gaussian with the given full width at half maximum.
  static EnvelopeModel gaussian(double center, double fwhm);
  /// cos^2 bump of full support `width` centred on `center`.
  static EnvelopeModel raised_cosine(double center, double width);
  /// Linear interpolation of a tabulated Intensity spectrum, zero outside it.
  static EnvelopeModel tabulated(Spectrum table);
  /// 2700-3100 cm^-1 raised cosine.
  static EnvelopeModel default_band() { return raised_cosine(2900.0, 400.0); }

  Shape shape() const noexcept { return shape_; }
  double center() const noexcept { return center_; }
  double width() const noexcept { return width_; }

  double operator()(double wavenumber) const;
  Spectrum evaluate(const WavenumberGrid& grid) const;

 private:
  EnvelopeModel(Shape shape, double center, double width, std::vector<double> table_values,
                double table_start, double table_step, double peak);

  Shape shape_;
  double center_;
  double width_;
  std::vector<double> table_;
  double table_start_ = 0.0;
  double table_step_ = 1.0;
  double peak_ = 1.0;
};

/// A(nu) = L * n_air * sum_k c_k[ppm] * 1e-6 * sigma_k(nu).
Spectrum absorbance(const GasMixture& mixture, const SpeciesDatabase& species, double path_length,
                    const WavenumberGrid& grid);

/// T(nu) = exp(-A(nu)) for the mixture over `path_length` cm.
Spectrum beer_lambert_transmission(const GasMixture& mixture, const SpeciesDatabase& species,
                                   double path_length, const WavenumberGrid& grid);

/// I(nu) = S(nu) * T(nu), evaluated on the transmission grid.
Spectrum idler_spectrum(const EnvelopeModel& envelope, const Spectrum& transmission);

/// Instrument response H(nu) = (2/res) sinc(2 pi nu / res).
double sinc_response(double wavenumber_offset, double resolution);

/// Convolution with sinc_response(., resolution), done in the path domain
/// with the transform of the sampled (tapered) response as window. Needs >= 5 grid points per
/// resolution element. Ringing may carry the result outside the physical
/// range of the input kind; the kind is kept.
Spectrum apply_response(const Spectrum& spectrum, double resolution);

/// True optical path at each sample time, including scan-speed jitter.
std::vector<double> path_positions(const InstrumentModel& instrument);

/// Holds the noiseless trace of one spectrum so that many scans differing only
/// in noise can be drawn cheaply.
class InterferogramSynthesizer {
 public:
  InterferogramSynthesizer(const Spectrum& spectrum, const InstrumentModel& instrument);

  /// Signal trace with Gaussian noise of std noise_std * max(trace).
  Interferogram signal(std::uint64_t seed) const;
  /// Pump reference fringes on the same time base.
  Interferogram reference(std::uint64_t seed) const;

  const std::vector<double>& noiseless() const noexcept { return clean_; }
  /// Integral of the spectrum, the constant term of the trace.
  double dc() const noexcept { return dc_; }

 private:
  InstrumentModel instrument_;
  std::vector<double> clean_;
  double dc_ = 0.0;
  double max_ = 0.0;
};

/// s(x_j) = integral S(nu) [1 + V cos(2 pi nu x_j)] dnu + noise, x_j the path at
/// sample j. Deterministic for a fixed seed.
Interferogram synthesize_interferogram(const Spectrum& spectrum, const InstrumentModel& instrument,
                                       std::uint64_t seed);

/// cos(2 pi (2/lambda_p) x_j): double-pass pump fringes, unit amplitude.
Interferogram synthesize_reference_fringes(const InstrumentModel& instrument, std::uint64_t seed);

/// Adds i.i.d. Gaussian noise to every value; used to emulate detector noise
/// directly on spectra.
Spectrum add_gaussian_noise(const Spectrum& spectrum, double std_dev, std::uint64_t seed);

}  // namespace qftir::forward
