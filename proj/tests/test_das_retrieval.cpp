#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "qftir/das_retrieval.hpp"
#include "qftir/error.hpp"
#include "qftir/forward_model.hpp"
#include "support/data.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace qftir;
using das::DifferentialBand;

namespace {

const WavenumberGrid kGrid(2800.0, 0.2, 1300);  // 2800 - 3059.8
const DifferentialBand kBand{2810.0, 3050.0, 9};
constexpr double kRes = 1.11;
constexpr double kPath = 170.0;

Spectrum flat(const WavenumberGrid& g, double v, SpectrumKind kind = SpectrumKind::Intensity) {
  return Spectrum(g, std::vector<double>(g.count(), v), kind);
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

const SpeciesDatabase& vocs() {
  static const auto db = testdata::database({"acetone", "methanol", "ethanol"});
  return db;
}

const das::DasAnalyzer& voc_analyzer() {
  static const auto a = das::DasAnalyzer::for_grid(vocs(), kGrid, kBand, kRes, kPath);
  return a;
}

// M c on the band grid, built from the analyzer's own columns.
Spectrum design_times(const das::DasAnalyzer& a, const std::map<std::string, double>& c, double path) {
  const double column = path * number_density(AmbientConditions{}) * kPpm;
  const auto& any = a.differential_xs().begin()->second;
  std::vector<double> v(any.size(), 0.0);
  for (const auto& [name, xs] : a.differential_xs()) {
    const auto it = c.find(name);
    if (it == c.end()) continue;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += column * it->second * xs[i];
  }
  return Spectrum(any.grid(), std::move(v), SpectrumKind::Absorbance);
}

// Sample/reference intensities seen through the instrument for a mixture: the
// envelope times exp(-H * A), noise added relative to the envelope peak.
std::pair<Spectrum, Spectrum> measured_pair(const GasMixture& mix, double noise, std::uint64_t seed) {
  const WavenumberGrid native(2700.0, 0.1, 4501);
  const auto a = forward::apply_response(forward::absorbance(mix, vocs(), kPath, native), kRes);
  const auto a_grid = resample(a, kGrid);
  const auto env = forward::EnvelopeModel::default_band().evaluate(kGrid);
  std::vector<double> s(kGrid.count());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = env[i] * std::exp(-a_grid[i]);
  Spectrum sample(kGrid, std::move(s), SpectrumKind::Intensity);
  Spectrum reference = env;
  if (noise > 0.0) {
    sample = forward::add_gaussian_noise(sample, noise, seed);
    reference = forward::add_gaussian_noise(reference, noise, seed + 1000003);
  }
  return {sample, reference};
}

}  // namespace

TEST(MeasuredAbsorbance, IdentityAndUnitDecay) {
  gen::for_all(41, 10, [](gen::Gen& g, int) {
    std::vector<double> r(kGrid.count());
    for (auto& x : r) x = g.log_uniform(1e-3, 1e3);
    const Spectrum ref(kGrid, r, SpectrumKind::Intensity);
    const auto zero = das::measured_absorbance(ref, ref);
    for (double v : zero.values()) EXPECT_EQ(v, 0.0);
    const auto a = das::measured_absorbance(ref.scaled(std::exp(-1.0)), ref);
    for (double v : a.values()) EXPECT_NEAR(v, 1.0, 1e-12);
  });
}

TEST(MeasuredAbsorbance, MethaneCellAgainstNitrogenMatchesConvolvedAbsorbance) {
  const auto db = testdata::database({"methane", "nitrogen"});
  const WavenumberGrid native(2700.0, 0.01, 45001);
  const GasMixture methane({{"methane", 100.0}});
  const GasMixture nitrogen({{"nitrogen", 1.0e6}});
  const auto env = forward::EnvelopeModel::default_band();
  auto through = [&](const GasMixture& m) {
    return forward::apply_response(
        forward::idler_spectrum(env, forward::beer_lambert_transmission(m, db, 135.0, native)), kRes);
  };
  const auto band_low = 2850.0, band_high = 3050.0;  // envelope well above zero
  const auto got = das::measured_absorbance(through(methane), through(nitrogen)).restrict_to(band_low, band_high);
  const auto want = forward::apply_response(forward::absorbance(methane, db, 135.0, native), kRes)
                        .restrict_to(band_low, band_high);
  EXPECT_GT(max_abs(want.values()), 0.01);
  EXPECT_LT(oracle::rel_l2(got.values(), want.values()), 1e-2);
}

TEST(MeasuredAbsorbance, MasksAndErrors) {
  std::vector<double> s(kGrid.count(), 1.0), r(kGrid.count(), 2.0);
  s[5] = 0.0;
  s[700] = -1.0;
  r[1] = 0.0;  // below the band
  const auto a = das::measured_absorbance(Spectrum(kGrid, s, SpectrumKind::Intensity),
                                          Spectrum(kGrid, r, SpectrumKind::Intensity), kBand);
  EXPECT_FALSE(a.is_valid(5));
  EXPECT_FALSE(a.is_valid(700));
  EXPECT_FALSE(a.is_valid(1));
  EXPECT_TRUE(a.is_valid(6));
  EXPECT_NEAR(a[6], std::log(2.0), 1e-15);

  r[600] = 0.0;  // 2920, inside the band
  try {
    das::measured_absorbance(Spectrum(kGrid, s, SpectrumKind::Intensity), Spectrum(kGrid, r, SpectrumKind::Intensity),
                             kBand);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ReferenceNonPositive);
  }
  const WavenumberGrid other(2800.0, 0.25, 1300);
  try {
    das::measured_absorbance(flat(kGrid, 1.0), flat(other, 1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GridMismatch);
  }
}

TEST(DetrendProperty, PolynomialIsRemovedExactly) {
  gen::for_all(42, 20, [](gen::Gen& g, int) {
    const auto degree = static_cast<unsigned>(g.integer(0, 9));
    const auto c = g.polynomial(static_cast<int>(degree), g.log_uniform(1e-3, 1e2));
    std::vector<double> v(kGrid.count());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = gen::eval_poly(c, (kGrid.point(i) - 2930.0) / 120.0);
    const auto parts = das::detrend(Spectrum(kGrid, v, SpectrumKind::Absorbance), kBand);
    const auto in_band = Spectrum(kGrid, v, SpectrumKind::Absorbance).restrict_to(kBand.low, kBand.high);
    EXPECT_LT(max_abs(parts.differential.values()), 1e-8 * max_abs(in_band.values()));
    EXPECT_EQ(parts.slow.grid(), kGrid.restrict_to(kBand.low, kBand.high));
  });
}

TEST(Detrend, RecoversNarrowLineOnPolynomial) {
  // The fit takes up the line's projection onto the polynomials: near the band
  // center about 0.063 * sigma of the amplitude for this band and degree.
  gen::Gen g(43);
  const auto c = g.polynomial(9, 1.0);
  const double center = 2931.37, amp = 0.05, sigma = 0.5;
  std::vector<double> v(kGrid.count());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = (kGrid.point(i) - center) / sigma;
    v[i] = gen::eval_poly(c, (kGrid.point(i) - 2930.0) / 120.0) + amp * std::exp(-0.5 * d * d);
  }
  const auto diff = das::detrend(Spectrum(kGrid, v, SpectrumKind::Absorbance), kBand).differential;
  const auto& y = diff.values();
  const auto peak = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
  EXPECT_LT(std::abs(diff.grid().point(peak) - center), diff.grid().step());
  const double truth_at_peak = amp * std::exp(-0.5 * std::pow((diff.grid().point(peak) - center) / sigma, 2));
  EXPECT_NEAR(y[peak], truth_at_peak, 0.05 * amp);
}

TEST(DetrendProperty, MatchesMonomialLeastSquaresAndIsOrthogonal) {
  gen::for_all(44, 10, [](gen::Gen& g, int) {
    const auto degree = static_cast<unsigned>(g.integer(1, 9));
    std::vector<double> v(kGrid.count());
    for (auto& x : v) x = g.normal();
    const DifferentialBand band{g.uniform(2805.0, 2900.0), g.uniform(2950.0, 3055.0), degree};
    const auto parts = das::detrend(Spectrum(kGrid, v, SpectrumKind::Absorbance), band);
    const auto sub = parts.slow.grid();
    const auto in_band = Spectrum(kGrid, v, SpectrumKind::Absorbance).restrict_to(band.low, band.high);
    const auto want = oracle::polyfit_values(sub.points(), in_band.values(), band.low, band.high,
                                             static_cast<int>(degree));
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(parts.slow[i], want[i], 1e-9);

    double norm = 0.0;
    for (double x : in_band.values()) norm += x * x;
    norm = std::sqrt(norm);
    for (unsigned k = 0; k <= degree; ++k) {
      double proj = 0.0, bnorm = 0.0;
      for (std::size_t i = 0; i < sub.count(); ++i) {
        const double b = std::pow((2.0 * sub.point(i) - band.low - band.high) / (band.high - band.low), k);
        proj += parts.differential[i] * b;
        bnorm += b * b;
      }
      EXPECT_LT(std::abs(proj) / std::sqrt(bnorm), 1e-8 * norm) << "basis " << k;
    }
  });
}

TEST(Detrend, MaskedPointsAreIgnored) {
  gen::Gen g(45);
  const auto c = g.polynomial(5, 1.0);
  std::vector<double> v(kGrid.count());
  std::vector<bool> ok(kGrid.count(), true);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = gen::eval_poly(c, (kGrid.point(i) - 2930.0) / 120.0);
  for (std::size_t i = 300; i < 320; ++i) {
    v[i] = 1e6;
    ok[i] = false;
  }
  const auto parts = das::detrend(Spectrum(kGrid, v, SpectrumKind::Absorbance, ok), kBand);
  for (std::size_t i = 0; i < parts.differential.size(); ++i) {
    if (parts.differential.is_valid(i)) EXPECT_NEAR(parts.differential[i], 0.0, 1e-9);
  }
  EXPECT_FALSE(parts.differential.is_valid(parts.differential.grid().index_of(kGrid.point(310))));
}

TEST(Detrend, Errors) {
  const WavenumberGrid small(2810.0, 1.0, 10);
  try {
    das::detrend(flat(small, 1.0, SpectrumKind::Absorbance), {2810.0, 2819.0, 9});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientPoints);
  }
  EXPECT_NO_THROW(das::detrend(flat(small, 1.0, SpectrumKind::Absorbance), {2810.0, 2819.0, 8}));

  // A high degree on few points is ill-conditioned on an equispaced grid.
  const WavenumberGrid g(2810.0, 1.0, 60);
  try {
    das::detrend(flat(g, 1.0, SpectrumKind::Absorbance), {2810.0, 2869.0, 55});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IllConditionedFit);
  }
  EXPECT_THROW(das::detrend(flat(g, 1.0, SpectrumKind::Absorbance), {2869.0, 2810.0, 2}), Error);
}

TEST(DifferentialCrossSections, ConstantCrossSectionVanishes) {
  const WavenumberGrid native(2700.0, 0.1, 4501);
  SpeciesDatabase db;
  db.emplace("flat", GasSpecies("flat", flat(native, 3e-20, SpectrumKind::CrossSection)));
  const auto xs = das::differential_cross_sections(db, kGrid, kBand, kRes);
  EXPECT_LT(max_abs(xs.at("flat").values()), 1e-10 * 3e-20);
  EXPECT_EQ(xs.at("flat").kind(), SpectrumKind::CrossSection);
}

TEST(DifferentialCrossSections, ConvolutionAndDetrendingCommute) {
  const auto methanol = testdata::species("methanol");
  SpeciesDatabase db;
  db.emplace("methanol", methanol);
  const auto a = das::differential_cross_sections(db, kGrid, kBand, kRes).at("methanol");

  // detrend on the native grid first, then convolve and resample
  const auto& native = methanol.cross_section;
  const auto d = das::detrend(native.with_kind(SpectrumKind::Absorbance), kBand).differential;
  const auto b = resample(forward::apply_response(d, kRes), a.grid());
  // the band edges see the convolution of a truncated sequence; compare inside
  const auto inner_a = a.restrict_to(kBand.low + 10.0, kBand.high - 10.0);
  const auto inner_b = b.restrict_to(kBand.low + 10.0, kBand.high - 10.0);
  EXPECT_LT(oracle::rel_l2(inner_b.values(), inner_a.values()), 1e-2);
}

TEST(DifferentialCrossSections, VocColumnsAreLinearlyIndependent) {
  const auto& xs = voc_analyzer().differential_xs();
  const auto n = static_cast<Eigen::Index>(xs.begin()->second.size());
  Eigen::MatrixXd m(n, 3);
  Eigen::Index k = 0;
  for (const auto& [name, s] : xs) {
    for (Eigen::Index i = 0; i < n; ++i) m(i, k) = s[static_cast<std::size_t>(i)];
    m.col(k).normalize();
    ++k;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  EXPECT_GT(svd.singularValues()(2), 0.05);
}

TEST(DifferentialCrossSections, BandNotCovered) {
  SpeciesDatabase db;
  db.emplace("short", GasSpecies("short", flat(WavenumberGrid(2850.0, 0.1, 1000), 1e-20, SpectrumKind::CrossSection)));
  try {
    das::differential_cross_sections(db, kGrid, kBand, kRes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BandNotCovered);
    EXPECT_NE(std::string(e.what()).find("short"), std::string::npos);
  }
}

TEST(Retrieve, NoiselessMixtureRoundTrip) {
  const auto& a = voc_analyzer();
  const auto dA = design_times(a, {{"acetone", 175.0}, {"methanol", 103.0}, {"ethanol", 0.0}}, kPath);
  const auto r = das::retrieve(dA, a.differential_xs(), kPath);
  EXPECT_NEAR(r.concentrations.at("acetone"), 175.0, 1e-3 * 175.0);
  EXPECT_NEAR(r.concentrations.at("methanol"), 103.0, 1e-3 * 103.0);
  EXPECT_LT(std::abs(r.concentrations.at("ethanol")), 1e-3);
  EXPECT_EQ(r.species, (std::vector<std::string>{"acetone", "ethanol", "methanol"}));
}

TEST(RetrieveProperty, ExactInColumnSpace) {
  gen::for_all(46, 20, [](gen::Gen& g, int) {
    const auto& a = voc_analyzer();
    const std::map<std::string, double> c{
        {"acetone", g.uniform(-500, 1000)}, {"methanol", g.uniform(-500, 1000)}, {"ethanol", g.uniform(-500, 1000)}};
    const auto r = das::retrieve(design_times(a, c, kPath), a.differential_xs(), kPath);
    for (const auto& [name, v] : c) EXPECT_NEAR(r.concentrations.at(name), v, 1e-9 * 1000.0) << name;
    EXPECT_LT(max_abs(r.residual.values()), 1e-12);
  });
}

TEST(Retrieve, ZeroDifferentialGivesZeroAndNoLimits) {
  const auto& a = voc_analyzer();
  const auto dA = design_times(a, {}, kPath);
  const auto r = das::retrieve(dA, a.differential_xs(), kPath);
  for (const auto& [name, v] : r.concentrations) {
    EXPECT_EQ(v, 0.0);
    EXPECT_FALSE(r.detection_limits.at(name).has_value());
    EXPECT_FALSE(r.present(name));
  }
  EXPECT_EQ(r.noise_std, 0.0);
  EXPECT_EQ(max_abs(r.residual.values()), 0.0);
}

TEST(RetrieveProperty, DoublingPathHalvesConcentrations) {
  gen::for_all(47, 10, [](gen::Gen& g, int) {
    const auto& a = voc_analyzer();
    auto dA = design_times(a, {{"acetone", g.uniform(10, 500)}, {"methanol", g.uniform(10, 500)}}, kPath);
    dA = forward::add_gaussian_noise(dA, 1e-4, g.seed());
    const auto r1 = das::retrieve(dA, a.differential_xs(), kPath);
    const auto r2 = das::retrieve(dA, a.differential_xs(), 2.0 * kPath);
    for (const auto& [name, v] : r1.concentrations) {
      EXPECT_NEAR(r2.concentrations.at(name), 0.5 * v, 1e-10 * std::max(1.0, std::abs(v))) << name;
    }
  });
}

TEST(Retrieve, CovarianceMatchesMonteCarloScatter) {
  const auto& a = voc_analyzer();
  const auto clean = design_times(a, {{"acetone", 175.0}, {"methanol", 103.0}}, kPath);
  const double sd = 2e-4;
  constexpr int kTrials = 200;
  std::map<std::string, std::vector<double>> got;
  Eigen::MatrixXd predicted = Eigen::MatrixXd::Zero(3, 3);
  std::vector<std::string> order;
  for (int t = 0; t < kTrials; ++t) {
    const auto r = das::retrieve(forward::add_gaussian_noise(clean, sd, 9000 + t), a.differential_xs(), kPath);
    for (const auto& [name, v] : r.concentrations) got[name].push_back(v);
    predicted += r.covariance / kTrials;
    order = r.species;
    EXPECT_NEAR(r.noise_std, sd, 0.15 * sd);
  }
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double mc = oracle::stddev(got[order[k]]);
    const double model = std::sqrt(predicted(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)));
    EXPECT_NEAR(mc, model, 0.3 * model) << order[k];
  }
  // symmetric positive semi-definite
  EXPECT_LT((predicted - predicted.transpose()).cwiseAbs().maxCoeff(), 1e-12 * predicted.cwiseAbs().maxCoeff());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(predicted);
  EXPECT_GE(eig.eigenvalues().minCoeff(), 0.0);
}

TEST(Retrieve, LimitsFollowFromSnr) {
  const auto& a = voc_analyzer();
  const auto dA = forward::add_gaussian_noise(design_times(a, {{"acetone", 175.0}, {"methanol", 103.0}}, kPath),
                                              3e-4, 5);
  const auto r = das::retrieve(dA, a.differential_xs(), kPath);
  EXPECT_GT(r.noise_std, 0.0);
  for (const auto& name : r.species) {
    const double c = r.concentrations.at(name);
    ASSERT_TRUE(r.detection_limits.at(name).has_value());
    EXPECT_NEAR(*r.detection_limits.at(name), std::abs(c) / r.snr.at(name), 1e-9 * *r.detection_limits.at(name));
    EXPECT_NEAR(*r.detection_limits.at(name), das::detection_limit(c, r.snr.at(name)), 1e-9);
  }
  EXPECT_TRUE(r.present("acetone"));
  EXPECT_TRUE(r.present("methanol"));
  EXPECT_FALSE(r.present("ethanol"));
}

TEST(Retrieve, Errors) {
  const auto& a = voc_analyzer();
  const auto dA = design_times(a, {{"acetone", 1.0}}, kPath);
  auto twice = a.differential_xs();
  twice.emplace("acetone_copy", twice.at("acetone"));
  try {
    das::retrieve(dA, twice, kPath);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularDesign);
  }
  auto zero = a.differential_xs();
  zero.emplace("zero", a.differential_xs().at("acetone").scaled(0.0));
  try {
    das::retrieve(dA, zero, kPath);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularDesign);
    EXPECT_NE(std::string(e.what()).find("zero"), std::string::npos);
  }
  const auto shifted = Spectrum(WavenumberGrid(2810.1, 0.2, dA.size()), dA.values(), SpectrumKind::Absorbance);
  try {
    das::retrieve(shifted, a.differential_xs(), kPath);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GridMismatch);
  }
  EXPECT_THROW(das::retrieve(dA, {}, kPath), Error);
  EXPECT_THROW(das::retrieve(dA, a.differential_xs(), 0.0), Error);
}

TEST(RetrieveProperty, SlowDriftIsAbsorbed) {
  const auto& a = voc_analyzer();
  const auto base = forward::add_gaussian_noise(
      design_times(a, {{"acetone", 175.0}, {"methanol", 103.0}, {"ethanol", 60.0}}, kPath), 1e-4, 3);
  const double scale = max_abs(base.values());
  const auto r0 = a.retrieve_absorbance(base);
  gen::for_all(48, 20, [&](gen::Gen& g, int) {
    const auto c = g.polynomial(static_cast<int>(g.integer(0, 9)), 10.0 * scale);
    std::vector<double> v = base.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += gen::eval_poly(c, (base.grid().point(i) - 2930.0) / 120.0);
    const auto r = a.retrieve_absorbance(Spectrum(base.grid(), v, SpectrumKind::Absorbance));
    for (const auto& [name, c0] : r0.concentrations) {
      EXPECT_NEAR(r.concentrations.at(name), c0, 5e-3 * std::abs(c0)) << name;
    }
  });
}

TEST(DetectionLimit, QuotedConcentrationSnrPairs) {
  EXPECT_NEAR(das::detection_limit(529.0, 51.0), 10.4, 0.01 * 10.4);
  EXPECT_NEAR(das::detection_limit(197.0, 22.0), 8.95, 0.01 * 8.95);
  EXPECT_NEAR(das::detection_limit(707.0, 49.0), 14.4, 0.01 * 14.4);
  EXPECT_NEAR(das::detection_limit(-529.0, 51.0), 10.4, 0.01 * 10.4);
  EXPECT_THROW(das::detection_limit(1.0, 0.0), Error);
  EXPECT_THROW(das::detection_limit(1.0, std::numeric_limits<double>::infinity()), Error);
}

TEST(Analyzer, FullPipelineOnForwardModelSpectra) {
  const auto [sample, reference] = measured_pair(GasMixture({{"acetone", 175.0}, {"methanol", 103.0}}), 0.0, 0);
  const auto out = voc_analyzer().analyze(sample, reference);
  EXPECT_NEAR(out.result.concentrations.at("acetone"), 175.0, 0.01 * 175.0);
  EXPECT_NEAR(out.result.concentrations.at("methanol"), 103.0, 0.01 * 103.0);
  EXPECT_LT(std::abs(out.result.concentrations.at("ethanol")), 1.0);
  EXPECT_EQ(out.absorbance.grid(), kGrid);
  EXPECT_EQ(out.parts.differential.grid(), kGrid.restrict_to(kBand.low, kBand.high));
}

TEST(Track, ConstantMixtureIsConstantWithinScatter) {
  std::vector<das::TrackStep> series;
  for (int t = 0; t < 10; ++t) {
    auto [s, r] = measured_pair(GasMixture({{"acetone", 175.0}, {"methanol", 103.0}}), 1e-3, 100 + 2 * t);
    series.push_back({10.0 * t, r, s});
  }
  const auto out = das::track(series, voc_analyzer());
  ASSERT_EQ(out.size(), 10u);
  std::vector<double> acetone;
  for (const auto& e : out) {
    ASSERT_TRUE(e.result.has_value()) << e.error;
    acetone.push_back(e.result->concentrations.at("acetone"));
    const double sd = std::sqrt(e.result->covariance(0, 0));  // acetone is column 0
    EXPECT_NEAR(e.result->concentrations.at("acetone"), 175.0, 4.0 * sd);
  }
  EXPECT_EQ(out[3].timestamp, 30.0);
  EXPECT_NEAR(oracle::mean(acetone), 175.0, 3.0 * oracle::stddev(acetone) / std::sqrt(10.0) + 0.5);
}

TEST(Track, ExponentialDecayGivesTimeConstant) {
  constexpr double kTau = 30.0;
  std::vector<das::TrackStep> series;
  for (int k = 0; k < 19; ++k) {
    const double t = 5.0 * k;
    auto [s, r] = measured_pair(GasMixture({{"acetone", 500.0 * std::exp(-t / kTau)}}), 3e-4, 200 + 2 * k);
    series.push_back({t, r, s});
  }
  const auto out = das::track(series, voc_analyzer());
  std::vector<double> t, lc;
  for (const auto& e : out) {
    ASSERT_TRUE(e.result.has_value());
    const double c = e.result->concentrations.at("acetone");
    if (c > 3.0 * *e.result->detection_limits.at("acetone")) {
      t.push_back(e.timestamp);
      lc.push_back(std::log(c));
    }
  }
  ASSERT_GE(t.size(), 8u);
  const auto [slope, intercept] = oracle::linear_fit(t, lc);
  EXPECT_NEAR(-1.0 / slope, kTau, 0.1 * kTau);
}

TEST(Track, AbsentSpeciesStaysBelowLimit) {
  std::vector<das::TrackStep> series;
  for (int k = 0; k < 50; ++k) {
    auto [s, r] = measured_pair(GasMixture({{"acetone", 175.0}, {"methanol", 103.0}}), 1e-3, 300 + 2 * k);
    series.push_back({static_cast<double>(k), r, s});
  }
  const auto out = das::track(series, voc_analyzer());
  int below = 0;
  for (const auto& e : out) {
    ASSERT_TRUE(e.result.has_value());
    if (!e.result->present("ethanol")) ++below;
  }
  EXPECT_GE(below, 45);
}

TEST(Track, ErrorsAndFailedSteps) {
  EXPECT_THROW(das::track({}, voc_analyzer()), Error);
  auto [s, r] = measured_pair(GasMixture({{"acetone", 175.0}}), 0.0, 0);
  try {
    das::track({{1.0, r, s}, {1.0, r, s}}, voc_analyzer());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonMonotonicTimestamps);
  }
  std::vector<double> bad = r.values();
  bad[kGrid.index_of(2900.0)] = 0.0;
  const auto out =
      das::track({{0.0, r, s}, {1.0, Spectrum(kGrid, bad, SpectrumKind::Intensity), s}, {2.0, r, s}}, voc_analyzer());
  ASSERT_EQ(out.size(), 3u);
  EXPECT_TRUE(out[0].result.has_value());
  EXPECT_FALSE(out[1].result.has_value());
  EXPECT_NE(out[1].error.find("2900"), std::string::npos);
  EXPECT_TRUE(out[2].result.has_value());
}
