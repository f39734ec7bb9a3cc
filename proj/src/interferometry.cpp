#include "qftir/interferometry.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <thread>

#include "fft.hpp"
#include "interp.hpp"
#include "qftir/error.hpp"

namespace qftir {

void validate(const Interferogram& ig) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidInterferogram, what); };
  if (ig.samples.empty()) fail("no samples");
  for (std::size_t i = 0; i < ig.samples.size(); ++i) {
    if (!std::isfinite(ig.samples[i])) fail("sample " + std::to_string(i) + " is not finite");
  }
  if (!(ig.scan_length > 0.0)) fail("scan_length must be positive");
  if (const auto* t = std::get_if<TimeSampledAxis>(&ig.axis)) {
    if (!(t->sampling_rate > 0.0) || !(t->scan_speed > 0.0)) fail("sampling_rate and scan_speed must be positive");
  } else {
    const auto& u = std::get<UniformPathAxis>(ig.axis);
    if (!(u.step > 0.0)) fail("path step must be positive");
    const double extent = u.step * static_cast<double>(ig.samples.size() - 1);
    if (extent > ig.scan_length * (1.0 + 1e-9)) fail("uniform path grid extends beyond scan_length");
  }
}

namespace interferometry {

namespace {

struct Biquad {
  double b0, b1, b2, a1, a2;

  // Transposed direct form II, state set to the steady response to x[0].
  void run(std::vector<double>& x) const {
    const double x0 = x.front();
    const double gain = (b0 + b1 + b2) / (1.0 + a1 + a2);
    const double y0 = gain * x0;
    double z1 = y0 - b0 * x0;
    double z2 = b2 * x0 - a2 * y0;
    for (auto& v : x) {
      const double in = v;
      const double out = b0 * in + z1;
      z1 = b1 * in - a1 * out + z2;
      z2 = b2 * in - a2 * out;
      v = out;
    }
  }
};

Biquad butterworth(double f0, double fs, bool highpass) {
  const double w0 = 2.0 * std::numbers::pi * f0 / fs;
  const double c = std::cos(w0);
  const double alpha = std::sin(w0) / std::numbers::sqrt2;
  const double a0 = 1.0 + alpha;
  Biquad q{};
  if (highpass) {
    q.b0 = (1.0 + c) / 2.0 / a0;
    q.b1 = -(1.0 + c) / a0;
  } else {
    q.b0 = (1.0 - c) / 2.0 / a0;
    q.b1 = (1.0 - c) / a0;
  }
  q.b2 = q.b0;
  q.a1 = -2.0 * c / a0;
  q.a2 = (1.0 - alpha) / a0;
  return q;
}

double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace

Interferogram bandpass(const Interferogram& ig, double low_hz, double high_hz) {
  validate(ig);
  const auto* axis = std::get_if<TimeSampledAxis>(&ig.axis);
  if (axis == nullptr) throw Error(ErrorCode::WrongAxis, "bandpass needs a time-sampled interferogram");
  const double fs = axis->sampling_rate;
  if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < fs / 2.0)) {
    throw Error(ErrorCode::InvalidBand, "band-pass edges must satisfy 0 < low < high < sampling_rate/2");
  }
  const std::size_t n = ig.samples.size();
  if (n < 2) return Interferogram{std::vector<double>(n, 0.0), ig.axis, ig.scan_length};

  const auto pad = std::min<std::size_t>(n - 1, static_cast<std::size_t>(std::ceil(3.0 * fs / low_hz)));
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t k = pad; k >= 1; --k) ext.push_back(ig.samples[k]);
  ext.insert(ext.end(), ig.samples.begin(), ig.samples.end());
  for (std::size_t k = 1; k <= pad; ++k) ext.push_back(ig.samples[n - 1 - k]);

  const Biquad hp = butterworth(low_hz, fs, true);
  const Biquad lp = butterworth(high_hz, fs, false);
  hp.run(ext);
  lp.run(ext);
  std::reverse(ext.begin(), ext.end());
  hp.run(ext);
  lp.run(ext);
  std::reverse(ext.begin(), ext.end());

  std::vector<double> out(ext.begin() + static_cast<std::ptrdiff_t>(pad),
                          ext.begin() + static_cast<std::ptrdiff_t>(pad + n));
  return Interferogram{std::move(out), ig.axis, ig.scan_length};
}

std::vector<double> zero_crossings(std::span<const double> trace) {
  const std::size_t n = trace.size();
  std::vector<double> out;
  if (n < 2) return out;
  const double mean = std::accumulate(trace.begin(), trace.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : trace) ss += (v - mean) * (v - mean);
  const double threshold = 0.1 * std::sqrt(ss / static_cast<double>(n));
  if (threshold == 0.0) return out;

  int state = 0;  // sign of the last excursion beyond the threshold
  double candidate = -1.0;  // most recent raw sign change since then
  for (std::size_t i = 0; i < n; ++i) {
    const double v = trace[i] - mean;
    if (i > 0) {
      const double u = trace[i - 1] - mean;
      if ((u < 0.0) != (v < 0.0)) candidate = static_cast<double>(i - 1) + u / (u - v);
    }
    const int s = v > threshold ? 1 : (v < -threshold ? -1 : 0);
    if (s == 0 || s == state) continue;
    if (state != 0 && candidate >= 0.0) out.push_back(candidate);
    state = s;
    candidate = -1.0;
  }
  return out;
}

Interferogram resample_by_reference(const Interferogram& signal, const Interferogram& reference,
                                    double pump_wavelength_nm) {
  validate(signal);
  validate(reference);
  const auto* sa = std::get_if<TimeSampledAxis>(&signal.axis);
  const auto* ra = std::get_if<TimeSampledAxis>(&reference.axis);
  if (sa == nullptr || ra == nullptr) {
    throw Error(ErrorCode::WrongAxis, "fringe resampling needs time-sampled signal and reference");
  }
  if (!(*sa == *ra) || signal.samples.size() != reference.samples.size()) {
    throw Error(ErrorCode::InvalidArgument, "signal and reference must share one time base");
  }
  if (!(pump_wavelength_nm > 0.0)) throw Error(ErrorCode::InvalidArgument, "pump wavelength must be positive");

  const std::vector<double> t = zero_crossings(reference.samples);
  if (t.size() < 16) {
    throw Error(ErrorCode::InsufficientFringes,
                "found " + std::to_string(t.size()) + " reference zero crossings, need at least 16");
  }
  std::vector<double> gaps(t.size() - 1);
  for (std::size_t k = 0; k + 1 < t.size(); ++k) gaps[k] = t[k + 1] - t[k];
  const double typical = median(gaps);
  for (std::size_t k = 0; k < gaps.size(); ++k) {
    if (gaps[k] > 2.5 * typical || gaps[k] < 0.4 * typical) {
      throw Error(ErrorCode::NonMonotonicPhase,
                  "crossing interval " + std::to_string(k) + " deviates from the median fringe spacing");
    }
  }

  const double q = pump_wavelength_nm * 1.0e-7 / 4.0;
  // Path at crossing k is p0 + k q, with p0 extrapolated back to the first sample.
  const double p0 = q * t[0] / (t[1] - t[0]);
  const std::size_t nc = t.size();
  const double last_sample = static_cast<double>(signal.samples.size() - 1);
  const double p_end = p0 + static_cast<double>(nc - 1) * q + q * (last_sample - t[nc - 1]) / (t[nc - 1] - t[nc - 2]);

  const auto count = static_cast<std::size_t>(std::floor(p_end / q + 1e-9)) + 1;
  std::vector<double> out(count);
  std::size_t k = 0;
  for (std::size_t m = 0; m < count; ++m) {
    const double p = static_cast<double>(m) * q;
    double ti;
    if (p <= p0) {
      ti = t[0] - (p0 - p) / q * (t[1] - t[0]);
    } else {
      const double u = (p - p0) / q;
      while (k + 2 < nc && static_cast<double>(k + 1) <= u) ++k;
      ti = t[k] + (u - static_cast<double>(k)) * (t[k + 1] - t[k]);
    }
    out[m] = detail::cubic_at(signal.samples, std::clamp(ti, 0.0, last_sample));
  }
  return Interferogram{std::move(out), UniformPathAxis{q}, std::max(p_end, q * static_cast<double>(count - 1))};
}

ComplexSpectrum transform_interferogram(const Interferogram& ig, std::size_t fft_length) {
  validate(ig);
  const auto* axis = std::get_if<UniformPathAxis>(&ig.axis);
  if (axis == nullptr) throw Error(ErrorCode::WrongAxis, "spectra are computed from uniform-path interferograms");
  const std::size_t n = ig.samples.size();
  const std::size_t len = fft_length == 0 ? detail::next_pow2(std::max<std::size_t>(4 * n, 2)) : fft_length;
  if (len < 2 * n - 1 || len % 2 != 0) {
    throw Error(ErrorCode::InvalidArgument, "FFT length " + std::to_string(len) + " cannot hold the mirrored trace");
  }
  std::vector<double> z(len, 0.0);
  z[0] = ig.samples[0];
  for (std::size_t m = 1; m < n; ++m) z[m] = z[len - m] = ig.samples[m];
  ComplexSpectrum cs;
  cs.bins = detail::rfft(z);
  cs.length = len;
  cs.path_step = axis->step;
  cs.spacing = 1.0 / (static_cast<double>(len) * axis->step);
  return cs;
}

Spectrum spectrum_from_interferogram(const Interferogram& ig, double low, double high, std::size_t fft_length) {
  if (!(low < high)) throw Error(ErrorCode::InvalidBand, "spectral window must satisfy low < high");
  const ComplexSpectrum cs = transform_interferogram(ig, fft_length);
  const double top = cs.spacing * static_cast<double>(cs.bins.size() - 1);
  const auto j0 = static_cast<std::size_t>(std::ceil(std::max(low, 0.0) / cs.spacing - 1e-9));
  const auto j1 = static_cast<std::size_t>(std::floor(std::min(high, top) / cs.spacing + 1e-9));
  if (j1 <= j0 || j1 >= cs.bins.size()) {
    throw Error(ErrorCode::InvalidBand, "spectral window holds fewer than two transform bins");
  }
  std::vector<double> v(j1 - j0 + 1);
  for (std::size_t j = j0; j <= j1; ++j) v[j - j0] = 2.0 * cs.path_step * std::abs(cs.bins[j]);
  const WavenumberGrid grid(static_cast<double>(j0) * cs.spacing, cs.spacing, v.size());
  return Spectrum(grid, std::move(v), SpectrumKind::Intensity);
}

std::size_t batch_fft_length(const InstrumentModel& inst) {
  const double q = inst.pump_wavelength_cm() / 4.0;
  const auto n = static_cast<std::size_t>(std::floor(inst.scan_length / q + 1e-9)) + 1;
  // Headroom for scans whose counted path comes out slightly long.
  return detail::next_pow2(4 * n + 64);
}

Spectrum process_scan(const ScanPair& scan, const InstrumentModel& inst) {
  const Interferogram filtered = bandpass(scan.signal, inst.bandpass_low, inst.bandpass_high);
  const Interferogram uniform = resample_by_reference(filtered, scan.reference, inst.pump_wavelength);
  return spectrum_from_interferogram(uniform, inst.window_low, inst.window_high, batch_fft_length(inst));
}

BatchResult process_scan_batch(std::size_t count, const std::function<ScanPair(std::size_t)>& load,
                               const InstrumentModel& inst, unsigned threads) {
  if (count == 0) throw Error(ErrorCode::EmptyInput, "scan batch is empty");
  inst.validate();
  std::vector<std::optional<Spectrum>> spectra(count);
  std::vector<std::string> reasons(count);

  auto work = [&](std::size_t i) {
    try {
      spectra[i] = process_scan(load(i), inst);
    } catch (const Error& e) {
      reasons[i] = e.what();
    }
  };
  const unsigned workers = std::max(1u, static_cast<unsigned>(std::min<std::size_t>(threads, count)));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) work(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  std::vector<Spectrum> good;
  std::vector<std::string> failures;
  for (std::size_t i = 0; i < count; ++i) {
    if (spectra[i]) {
      good.push_back(std::move(*spectra[i]));
    } else {
      failures.push_back("scan " + std::to_string(i) + ": " + reasons[i]);
    }
  }
  if (good.empty() || static_cast<double>(failures.size()) > 0.2 * static_cast<double>(count)) {
    throw Error(ErrorCode::TooManyFailedScans, std::to_string(failures.size()) + " of " + std::to_string(count) +
                                                   " scans failed; first: " + failures.front());
  }
  return BatchResult{average_spectra(good), good.size(), failures.size(), std::move(failures)};
}

BatchResult process_scan_batch(std::span<const ScanPair> scans, const InstrumentModel& inst, unsigned threads) {
  return process_scan_batch(
      scans.size(), [&](std::size_t i) { return scans[i]; }, inst, threads);
}

}  // namespace interferometry
}  // namespace qftir
