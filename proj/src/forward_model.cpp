#include "qftir/forward_model.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "fft.hpp"
#include "interp.hpp"
#include "qftir/error.hpp"

namespace qftir {

std::size_t InstrumentModel::sample_count() const {
  return static_cast<std::size_t>(std::floor(scan_length * sampling_rate / scan_speed + 1e-9)) + 1;
}

void InstrumentModel::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::InvalidArgument, what);
  };
  require(scan_length > 0.0, "scan_length must be positive");
  require(scan_speed > 0.0, "scan_speed must be positive");
  require(sampling_rate > 0.0, "sampling_rate must be positive");
  require(pump_wavelength > 0.0, "pump_wavelength must be positive");
  require(visibility >= 0.0 && visibility <= 1.0, "visibility must lie in [0, 1]");
  require(noise_std >= 0.0 && reference_noise_std >= 0.0, "noise levels must be non-negative");
  require(jitter_fraction >= 0.0 && jitter_fraction < 1.0, "jitter_fraction must lie in [0, 1)");
  require(jitter_frequency >= 0.0, "jitter_frequency must be non-negative");
  require(window_low > 0.0 && window_low < window_high, "spectral window must satisfy 0 < low < high");
  require(sample_count() >= 2, "scan must contain at least two samples");
  check_nyquist(2.0 / pump_wavelength_cm());
}

void InstrumentModel::check_nyquist(double max_wavenumber) const {
  const double fringe = scan_speed * (1.0 + jitter_fraction) * max_wavenumber;
  if (!(sampling_rate > 2.0 * fringe)) {
    throw Error(ErrorCode::NyquistViolation, "sampling rate " + std::to_string(sampling_rate) +
                                                 " Hz cannot resolve fringes at " + std::to_string(fringe) + " Hz");
  }
}

namespace forward {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

// Convolution with the sinc response on a uniform grid. The sequence is
// extended periodically with a cosine blend between its end values so that a
// constant input maps to itself. The path-domain window is the transform of
// the sampled response rather than a box cut at the nearest path bin, so the
// result is smooth in the resolution (a cut box moves in whole-bin steps).
std::vector<double> convolve_sinc(std::span<const double> y, double step, double resolution) {
  const std::size_t n = y.size();
  const std::size_t big = detail::next_pow2(std::max<std::size_t>(8 * n, 4096));
  std::vector<double> ext(big);
  std::copy(y.begin(), y.end(), ext.begin());
  const double a = y[n - 1];
  const double b = y[0];
  const double span = static_cast<double>(big - n + 1);
  for (std::size_t k = n; k < big; ++k) {
    const double t = static_cast<double>(k - n + 1) / span;
    ext[k] = a + (b - a) * 0.5 * (1.0 - std::cos(std::numbers::pi * t));
  }
  // Kernel samples step * H(m step), exact out to big/4 (at least twice the
  // data span) and cosine-tapered to zero at big/2. An abrupt cut would leave a
  // tail term oscillating in the resolution.
  std::vector<double> kernel(big, 0.0);
  const std::size_t flat = big / 4;
  for (std::size_t m = 0; m < big / 2; ++m) {
    double w = 1.0;
    if (m > flat) w = 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(m - flat) / static_cast<double>(flat)));
    const double v = w * step * sinc_response(static_cast<double>(m) * step, resolution);
    kernel[m] = v;
    if (m != 0) kernel[big - m] = v;
  }
  auto spec = detail::rfft(ext);
  const auto window = detail::rfft(kernel);
  for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= window[k].real() / static_cast<double>(big);
  auto out = detail::irfft(spec, big);
  out.resize(n);
  return out;
}

// Integral of the piecewise-linear spectrum from its first grid point to nu.
class LinearIntegral {
 public:
  explicit LinearIntegral(const Spectrum& s) : grid_(s.grid()), y_(s.values()), cum_(s.size(), 0.0) {
    for (std::size_t i = 1; i < y_.size(); ++i) cum_[i] = cum_[i - 1] + 0.5 * grid_.step() * (y_[i - 1] + y_[i]);
  }
  double operator()(double nu) const {
    const double u = (nu - grid_.start()) / grid_.step();
    if (u <= 0.0) return 0.0;
    const auto n = y_.size();
    if (u >= static_cast<double>(n - 1)) return cum_.back();
    const auto i = static_cast<std::size_t>(u);
    const double t = u - static_cast<double>(i);
    return cum_[i] + grid_.step() * (y_[i] * t + 0.5 * (y_[i + 1] - y_[i]) * t * t);
  }

 private:
  WavenumberGrid grid_;
  const std::vector<double>& y_;
  std::vector<double> cum_;
};

}  // namespace

EnvelopeModel::EnvelopeModel(Shape shape, double center, double width, std::vector<double> table_values,
                             double table_start, double table_step, double peak)
    : shape_(shape),
      center_(center),
      width_(width),
      table_(std::move(table_values)),
      table_start_(table_start),
      table_step_(table_step),
      peak_(peak) {}

EnvelopeModel EnvelopeModel::gaussian(double center, double fwhm) {
  if (!(fwhm > 0.0)) throw Error(ErrorCode::InvalidArgument, "envelope width must be positive");
  return EnvelopeModel(Shape::Gaussian, center, fwhm, {}, 0.0, 1.0, 1.0);
}

EnvelopeModel EnvelopeModel::raised_cosine(double center, double width) {
  if (!(width > 0.0)) throw Error(ErrorCode::InvalidArgument, "envelope width must be positive");
  return EnvelopeModel(Shape::RaisedCosine, center, width, {}, 0.0, 1.0, 1.0);
}

EnvelopeModel EnvelopeModel::tabulated(Spectrum table) {
  if (table.kind() != SpectrumKind::Intensity) {
    throw Error(ErrorCode::InvalidArgument, "tabulated envelope must be an Intensity spectrum");
  }
  check_physical(table);
  const double peak = *std::max_element(table.values().begin(), table.values().end());
  if (!(peak > 0.0)) throw Error(ErrorCode::InvalidArgument, "tabulated envelope is identically zero");
  const double center = 0.5 * (table.grid().start() + table.grid().last());
  const double width = table.grid().last() - table.grid().start();
  return EnvelopeModel(Shape::Tabulated, center, width, table.values(), table.grid().start(), table.grid().step(),
                       peak);
}

double EnvelopeModel::operator()(double nu) const {
  switch (shape_) {
    case Shape::Gaussian: {
      const double sigma = width_ / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
      const double d = (nu - center_) / sigma;
      return std::exp(-0.5 * d * d);
    }
    case Shape::RaisedCosine: {
      const double d = nu - center_;
      if (std::abs(d) >= 0.5 * width_) return 0.0;
      const double c = std::cos(std::numbers::pi * d / width_);
      return c * c;
    }
    case Shape::Tabulated: {
      const double u = (nu - table_start_) / table_step_;
      if (u < 0.0 || u > static_cast<double>(table_.size() - 1)) return 0.0;
      const auto i = std::min(static_cast<std::size_t>(u), table_.size() - 2);
      const double t = u - static_cast<double>(i);
      return ((1.0 - t) * table_[i] + t * table_[i + 1]) / peak_;
    }
  }
  return 0.0;
}

Spectrum EnvelopeModel::evaluate(const WavenumberGrid& grid) const {
  std::vector<double> v(grid.count());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (*this)(grid.point(i));
  return Spectrum(grid, std::move(v), SpectrumKind::Intensity);
}

Spectrum absorbance(const GasMixture& mixture, const SpeciesDatabase& species, double path_length,
                    const WavenumberGrid& grid) {
  if (!(path_length > 0.0)) throw Error(ErrorCode::InvalidArgument, "path length must be positive");
  const double column = path_length * number_density(mixture.conditions()) * kPpm;
  std::vector<double> a(grid.count(), 0.0);
  for (const auto& comp : mixture.components()) {
    auto it = species.find(comp.species);
    if (it == species.end()) throw Error(ErrorCode::UnknownSpecies, "no cross-section for '" + comp.species + "'");
    if (comp.concentration_ppm < 0.0) {
      throw Error(ErrorCode::NegativeConcentration,
                  "concentration of '" + comp.species + "' is negative in a forward simulation");
    }
    if (comp.concentration_ppm == 0.0) continue;
    const Spectrum xs = resample(it->second.cross_section, grid);
    const double scale = column * comp.concentration_ppm;
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += scale * xs[i];
  }
  return Spectrum(grid, std::move(a), SpectrumKind::Absorbance);
}

Spectrum beer_lambert_transmission(const GasMixture& mixture, const SpeciesDatabase& species, double path_length,
                                   const WavenumberGrid& grid) {
  const Spectrum a = absorbance(mixture, species, path_length, grid);
  std::vector<double> t(a.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::max(std::exp(-a[i]), std::numeric_limits<double>::min());
  return Spectrum(grid, std::move(t), SpectrumKind::Transmission);
}

Spectrum idler_spectrum(const EnvelopeModel& envelope, const Spectrum& transmission) {
  if (transmission.kind() != SpectrumKind::Transmission) {
    throw Error(ErrorCode::InvalidArgument, "idler_spectrum expects a Transmission spectrum");
  }
  const Spectrum s = envelope.evaluate(transmission.grid());
  std::vector<double> v(s.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = s[i] * transmission[i];
  return Spectrum(transmission.grid(), std::move(v), SpectrumKind::Intensity, transmission.mask());
}

double sinc_response(double wavenumber_offset, double resolution) {
  return 2.0 / resolution * sinc(kTwoPi * wavenumber_offset / resolution);
}

Spectrum apply_response(const Spectrum& spectrum, double resolution) {
  if (!(resolution > 0.0)) throw Error(ErrorCode::InvalidArgument, "resolution must be positive");
  if (spectrum.grid().step() > resolution / 5.0) {
    throw Error(ErrorCode::GridTooCoarse, "grid step " + std::to_string(spectrum.grid().step()) +
                                              " exceeds resolution/5 = " + std::to_string(resolution / 5.0));
  }
  auto v = convolve_sinc(spectrum.values(), spectrum.grid().step(), resolution);
  return Spectrum(spectrum.grid(), std::move(v), spectrum.kind(), spectrum.mask());
}

std::vector<double> path_positions(const InstrumentModel& inst) {
  const std::size_t n = inst.sample_count();
  std::vector<double> x(n);
  const bool jitter = inst.jitter_fraction > 0.0 && inst.jitter_frequency > 0.0;
  const double amp = jitter ? inst.scan_speed * inst.jitter_fraction / (kTwoPi * inst.jitter_frequency) : 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double t = static_cast<double>(j) / inst.sampling_rate;
    x[j] = inst.scan_speed * t;
    if (jitter) {
      x[j] += amp * (std::sin(kTwoPi * inst.jitter_frequency * t + inst.jitter_phase) - std::sin(inst.jitter_phase));
    }
  }
  return x;
}

InterferogramSynthesizer::InterferogramSynthesizer(const Spectrum& spectrum, const InstrumentModel& instrument)
    : instrument_(instrument) {
  instrument_.validate();
  if (spectrum.kind() != SpectrumKind::Intensity) {
    throw Error(ErrorCode::InvalidArgument, "interferograms are synthesized from Intensity spectra");
  }
  instrument_.check_nyquist(spectrum.grid().last());

  const std::vector<double> x = path_positions(instrument_);
  const double dx = instrument_.scan_speed / instrument_.sampling_rate;
  const double x_max = *std::max_element(x.begin(), x.end());
  const auto fine_count = static_cast<std::size_t>(std::ceil(x_max / dx)) + 4;

  // Synthesis bins nu_m = m * dnu with dnu * dx = 1/N, so the cosine sum over
  // bins is a single inverse real FFT.
  constexpr std::size_t kMaxLength = std::size_t{1} << 23;
  const double target_dnu = std::min(spectrum.grid().step(), 0.05);
  std::size_t length = detail::next_pow2(static_cast<std::size_t>(std::ceil(1.0 / (target_dnu * dx))));
  length = std::min(length, kMaxLength);
  length = std::max(length, detail::next_pow2(2 * fine_count));
  const double dnu = 1.0 / (static_cast<double>(length) * dx);

  const LinearIntegral integral(spectrum);
  std::vector<std::complex<double>> bins(length / 2 + 1, {0.0, 0.0});
  const auto m_lo = static_cast<std::size_t>(std::max(0.0, std::floor(spectrum.grid().start() / dnu) - 1.0));
  const auto m_hi = std::min(bins.size() - 1, static_cast<std::size_t>(std::ceil(spectrum.grid().last() / dnu)) + 1);
  dc_ = 0.0;
  for (std::size_t m = m_lo; m <= m_hi; ++m) {
    const double nu = static_cast<double>(m) * dnu;
    const double content = integral(nu + 0.5 * dnu) - integral(nu - 0.5 * dnu);
    dc_ += content;
    bins[m] = {m == 0 ? content : 0.5 * content, 0.0};
  }
  std::vector<double> ac = detail::irfft(bins, length);
  ac.resize(fine_count);

  const double vis = instrument_.visibility;
  clean_.resize(x.size());
  const bool jitter = instrument_.jitter_fraction > 0.0 && instrument_.jitter_frequency > 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double a = jitter ? detail::cubic_at(ac, x[j] / dx) : ac[j];
    clean_[j] = dc_ + vis * a;
  }
  max_ = *std::max_element(clean_.begin(), clean_.end());
}

Interferogram InterferogramSynthesizer::signal(std::uint64_t seed) const {
  std::vector<double> s(clean_);
  const double sd = instrument_.noise_std * std::abs(max_);
  if (sd > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sd);
    for (auto& v : s) v += noise(rng);
  }
  return Interferogram{std::move(s), TimeSampledAxis{instrument_.sampling_rate, instrument_.scan_speed},
                       instrument_.scan_length};
}

Interferogram InterferogramSynthesizer::reference(std::uint64_t seed) const {
  return synthesize_reference_fringes(instrument_, seed);
}

Interferogram synthesize_interferogram(const Spectrum& spectrum, const InstrumentModel& instrument,
                                       std::uint64_t seed) {
  return InterferogramSynthesizer(spectrum, instrument).signal(seed);
}

Interferogram synthesize_reference_fringes(const InstrumentModel& instrument, std::uint64_t seed) {
  instrument.validate();
  const std::vector<double> x = path_positions(instrument);
  const double k = 2.0 / instrument.pump_wavelength_cm();
  std::vector<double> r(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) r[j] = std::cos(kTwoPi * k * x[j]);
  if (instrument.reference_noise_std > 0.0) {
    // Distinct stream from the signal noise drawn with the same seed.
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> noise(0.0, instrument.reference_noise_std);
    for (auto& v : r) v += noise(rng);
  }
  return Interferogram{std::move(r), TimeSampledAxis{instrument.sampling_rate, instrument.scan_speed},
                       instrument.scan_length};
}

Spectrum add_gaussian_noise(const Spectrum& spectrum, double std_dev, std::uint64_t seed) {
  if (std_dev < 0.0) throw Error(ErrorCode::InvalidArgument, "noise level must be non-negative");
  std::vector<double> v(spectrum.values());
  if (std_dev > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, std_dev);
    for (auto& x : v) x += noise(rng);
  }
  return Spectrum(spectrum.grid(), std::move(v), spectrum.kind(), spectrum.mask());
}

}  // namespace forward
}  // namespace qftir
