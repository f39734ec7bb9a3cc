// Writes the synthetic cross-section records used by the examples and tests.
//
// Methane: nu3 band with P, Q and R branches of Lorentzian lines, Boltzmann
// populations at 296 K. Strengths are scaled so that 100 ppm over 135 cm stays
// in the weak-absorption regime. The VOCs are sums of Gaussian bands placed
// where their C-H stretch features sit; only the shapes matter for retrieval.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include "qftir/calibration.hpp"
#include "qftir/forward_model.hpp"
#include "qftir/ingest_io.hpp"

namespace {

struct Band {
  double center, amplitude, sigma;
};

double round_sig(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.5e", v);
  return std::stod(buf);
}

std::vector<double> gaussians(double start, double step, std::size_t n, const std::vector<Band>& bands) {
  std::vector<double> v(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double nu = start + static_cast<double>(i) * step;
    for (const auto& b : bands) {
      const double d = (nu - b.center) / b.sigma;
      v[i] += b.amplitude * std::exp(-0.5 * d * d);
    }
  }
  return v;
}

std::vector<double> methane(double start, double step, std::size_t n) {
  constexpr double kB = 5.24;  // rotational constant, cm^-1
  constexpr double kC2 = 1.4388;  // second radiation constant, cm K
  constexpr double kT = 296.0;
  constexpr double kGamma = 0.07;  // Lorentz HWHM at 1 bar
  constexpr double kOrigin = 3018.9;
  struct Line {
    double nu, strength;
  };
  std::vector<Line> lines;
  auto pop = [&](int j) { return (2.0 * j + 1.0) * std::exp(-kC2 * kB * j * (j + 1.0) / kT); };
  for (int j = 0; j <= 16; ++j) {
    const double m = j + 1.0;
    lines.push_back({kOrigin + 10.0 * m - 0.05 * m * m, pop(j)});
  }
  for (int j = 1; j <= 16; ++j) lines.push_back({kOrigin - 10.0 * j - 0.05 * j * j, pop(j)});
  // Q branch: tightly packed lines just below the origin, together the strongest feature.
  for (int j = 1; j <= 12; ++j) lines.push_back({kOrigin + 0.3 - 0.012 * j * (j + 1.0), 0.55 * pop(j)});

  std::vector<double> v(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double nu = start + static_cast<double>(i) * step;
    for (const auto& l : lines) {
      const double d = nu - l.nu;
      v[i] += l.strength * kGamma / std::numbers::pi / (d * d + kGamma * kGamma);
    }
  }
  // Scale so the strongest native peak is 1.2e-19 cm^2.
  double peak = 0.0;
  for (double x : v) peak = std::max(peak, x);
  for (double& x : v) x *= 1.2e-19 / peak;
  return v;
}

void write(const std::filesystem::path& dir, const std::string& file, const std::string& molecule, double start,
           double step, std::vector<double> values) {
  double peak = 0.0;
  for (double& x : values) {
    x = round_sig(x);
    peak = std::max(peak, x);
  }
  qftir::io::CrossSectionHeader h;
  h.molecule = molecule;
  h.numin = start;
  h.numax = start + step * static_cast<double>(values.size() - 1);
  h.temperature = 296.0;
  h.pressure = 760.0;
  h.max_value = peak;
  h.resolution = qftir::io::format_double(step);
  h.source = "synthetic";
  qftir::io::write_file(dir / file, qftir::io::format_cross_section(h, values));
  std::cout << "wrote " << (dir / file).string() << " (" << values.size() << " points)\n";
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : "data/cross_sections";
  std::filesystem::create_directories(dir);

  write(dir, "methane.xsc", "CH4", 2700.0, 0.01, methane(2700.0, 0.01, 50001));

  constexpr double start = 2700.0, step = 0.1;
  constexpr std::size_t n = 4501;  // 2700-3150
  write(dir, "acetone.xsc", "CH3COCH3", start, step,
        gaussians(start, step, n,
                  {{2937.0, 1.0e-20, 8.0},
                   {2972.0, 2.2e-20, 10.0},
                   {3005.0, 2.6e-20, 9.0},
                   {3019.0, 1.2e-20, 5.0},
                   {2960.0, 0.5e-20, 40.0}}));
  write(dir, "methanol.xsc", "CH3OH", start, step,
        gaussians(start, step, n,
                  {{2844.0, 3.0e-20, 2.0},
                   {2825.0, 0.8e-20, 8.0},
                   {2865.0, 0.8e-20, 8.0},
                   {2982.0, 1.5e-20, 10.0},
                   {3000.0, 1.8e-20, 8.0}}));
  write(dir, "ethanol.xsc", "C2H5OH", start, step,
        gaussians(start, step, n,
                  {{2900.0, 1.2e-20, 10.0},
                   {2950.0, 1.8e-20, 9.0},
                   {2978.0, 2.0e-20, 7.0},
                   {2989.0, 2.5e-20, 2.0},
                   {2940.0, 0.6e-20, 40.0}}));
  write(dir, "nitrogen.xsc", "N2", start, step, std::vector<double>(n, 0.0));

  // Gas-cell measurement for the calibrate command: 100 ppm methane, 135 cm,
  // 1.11 cm^-1 resolution, noise at a peak SNR of 24.
  const auto ch4 = qftir::io::load_cross_section(dir / "methane.xsc").species;
  const qftir::WavenumberGrid g(2950.0, 0.2, 651);
  const qftir::Spectrum blank(g, std::vector<double>(g.count(), 0.0), qftir::SpectrumKind::Absorbance);
  const qftir::calibration::CalibrationModel model(blank, ch4, 135.0);
  const auto clean = model.evaluate(100.0, 1.11);
  double peak = 0.0;
  for (double v : clean) peak = std::max(peak, std::abs(v));
  const auto noisy = qftir::forward::add_gaussian_noise(qftir::Spectrum(g, clean, qftir::SpectrumKind::Absorbance),
                                                        peak / 24.0, 7);
  const auto spectra = dir.parent_path() / "spectra";
  std::filesystem::create_directories(spectra);
  qftir::io::save_spectrum_csv(spectra / "methane_cell_absorbance.csv", noisy,
                               {{"note", "synthetic 100 ppm methane, 135 cm, 1.11 cm-1, peak SNR 24"}});
  std::cout << "wrote " << (spectra / "methane_cell_absorbance.csv").string() << "\n";
  return 0;
}
