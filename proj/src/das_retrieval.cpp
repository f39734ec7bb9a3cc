#include "qftir/das_retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qftir/error.hpp"
#include "qftir/forward_model.hpp"

namespace qftir::das {

namespace {

constexpr double kMaxCondition = 1e10;

// Legendre polynomials P_0..P_degree at u in [-1, 1].
void legendre_row(double u, unsigned degree, double* out) {
  out[0] = 1.0;
  if (degree == 0) return;
  out[1] = u;
  for (unsigned k = 2; k <= degree; ++k) {
    out[k] = ((2.0 * k - 1.0) * u * out[k - 1] - (k - 1.0) * out[k - 2]) / static_cast<double>(k);
  }
}

void require_same_grid(const Spectrum& a, const Spectrum& b, const std::string& what) {
  if (!(a.grid() == b.grid())) throw Error(ErrorCode::GridMismatch, what + " are on different grids");
}

}  // namespace

void DifferentialBand::validate() const {
  if (!(low < high)) throw Error(ErrorCode::InvalidBand, "band requires low < high");
}

bool RetrievalResult::present(const std::string& name) const {
  auto it = detection_limits.find(name);
  if (it == detection_limits.end() || !it->second) return false;
  return std::abs(concentrations.at(name)) >= *it->second;
}

Spectrum measured_absorbance(const Spectrum& sample, const Spectrum& reference,
                             const std::optional<DifferentialBand>& band) {
  require_same_grid(sample, reference, "sample and reference");
  const auto& g = sample.grid();
  std::vector<double> a(sample.size(), 0.0);
  std::vector<bool> valid(sample.size(), true);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double nu = g.point(i);
    const bool in_band = band && nu >= band->low && nu <= band->high;
    if (!reference.is_valid(i) || reference[i] <= 0.0) {
      if (in_band) {
        throw Error(ErrorCode::ReferenceNonPositive,
                    "reference intensity is not positive at " + std::to_string(nu) + " cm^-1");
      }
      valid[i] = false;
      continue;
    }
    if (!sample.is_valid(i) || sample[i] <= 0.0) {
      valid[i] = false;
      continue;
    }
    a[i] = std::log(reference[i] / sample[i]);
  }
  return Spectrum(g, std::move(a), SpectrumKind::Absorbance, std::move(valid));
}

Detrended detrend(const Spectrum& absorbance, const DifferentialBand& band) {
  band.validate();
  const Spectrum in = absorbance.restrict_to(band.low, band.high);
  const auto& g = in.grid();
  const std::size_t n = in.size();
  const unsigned p = band.poly_degree + 1;

  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < n; ++i) {
    if (in.is_valid(i)) rows.push_back(i);
  }
  if (rows.size() < static_cast<std::size_t>(band.poly_degree) + 2) {
    throw Error(ErrorCode::InsufficientPoints, std::to_string(rows.size()) + " usable points for a degree-" +
                                                   std::to_string(band.poly_degree) + " polynomial");
  }

  const double mid = 0.5 * (g.start() + g.last());
  const double half = 0.5 * (g.last() - g.start());
  Eigen::MatrixXd basis(n, p);
  std::vector<double> row(p);
  for (std::size_t i = 0; i < n; ++i) {
    legendre_row((g.point(i) - mid) / half, band.poly_degree, row.data());
    for (unsigned k = 0; k < p; ++k) basis(static_cast<Eigen::Index>(i), k) = row[k];
  }
  Eigen::MatrixXd v(rows.size(), p);
  Eigen::VectorXd y(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    v.row(static_cast<Eigen::Index>(r)) = basis.row(static_cast<Eigen::Index>(rows[r]));
    y(static_cast<Eigen::Index>(r)) = in[rows[r]];
  }

  // Condition of the column-normalized normal matrix is the squared ratio of
  // extreme singular values of the normalized design.
  Eigen::MatrixXd vn = v;
  for (Eigen::Index k = 0; k < vn.cols(); ++k) {
    const double norm = vn.col(k).norm();
    if (norm > 0.0) vn.col(k) /= norm;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(vn);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  const double cond = smin > 0.0 ? std::pow(s(0) / smin, 2) : std::numeric_limits<double>::infinity();
  if (cond > kMaxCondition) {
    throw Error(ErrorCode::IllConditionedFit, "polynomial normal matrix condition " + std::to_string(cond));
  }

  const Eigen::VectorXd coef = v.colPivHouseholderQr().solve(y);
  const Eigen::VectorXd slow = basis * coef;
  std::vector<double> sv(n), dv(n);
  for (std::size_t i = 0; i < n; ++i) {
    sv[i] = slow(static_cast<Eigen::Index>(i));
    dv[i] = in.is_valid(i) ? in[i] - sv[i] : 0.0;
  }
  return {Spectrum(g, std::move(sv), SpectrumKind::Absorbance),
          Spectrum(g, std::move(dv), SpectrumKind::Absorbance, in.mask())};
}

std::map<std::string, Spectrum> differential_cross_sections(const SpeciesDatabase& species,
                                                            const WavenumberGrid& analysis_grid,
                                                            const DifferentialBand& band, double resolution) {
  band.validate();
  std::map<std::string, Spectrum> out;
  for (const auto& [name, sp] : species) {
    const auto& g = sp.cross_section.grid();
    if (g.start() > band.low || g.last() < band.high) {
      throw Error(ErrorCode::BandNotCovered, "cross-section of '" + name + "' spans " + std::to_string(g.start()) +
                                                 "-" + std::to_string(g.last()) + " cm^-1, not the analysis band");
    }
    const Spectrum smooth = forward::apply_response(sp.cross_section, resolution);
    const Spectrum on_grid = resample(smooth, analysis_grid);
    out.emplace(name, detrend(on_grid, band).differential.with_kind(SpectrumKind::CrossSection));
  }
  return out;
}

RetrievalResult retrieve(const Spectrum& dA, const std::map<std::string, Spectrum>& xs, double path_length,
                         const AmbientConditions& conditions) {
  if (xs.empty()) throw Error(ErrorCode::EmptyInput, "no species to retrieve");
  if (!(path_length > 0.0)) throw Error(ErrorCode::InvalidArgument, "path length must be positive");
  const double column = path_length * number_density(conditions) * kPpm;
  const auto& g = dA.grid();

  RetrievalResult r{{}, {}, {}, dA, dA, 0.0, {}, {}};
  for (const auto& [name, s] : xs) {
    require_same_grid(dA, s, "differential absorbance and cross-section '" + name + "'");
    r.species.push_back(name);
  }
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < dA.size(); ++i) {
    bool ok = dA.is_valid(i);
    for (const auto& [name, s] : xs) ok = ok && s.is_valid(i);
    if (ok) rows.push_back(i);
  }
  const auto p = static_cast<Eigen::Index>(xs.size());
  const auto m = static_cast<Eigen::Index>(rows.size());
  if (m <= p) throw Error(ErrorCode::InsufficientPoints, "fewer usable points than species");

  Eigen::MatrixXd design(m, p);
  Eigen::VectorXd y(m);
  Eigen::MatrixXd full(static_cast<Eigen::Index>(dA.size()), p);
  Eigen::Index k = 0;
  for (const auto& [name, s] : xs) {
    for (std::size_t i = 0; i < dA.size(); ++i) full(static_cast<Eigen::Index>(i), k) = column * s[i];
    ++k;
  }
  for (Eigen::Index r2 = 0; r2 < m; ++r2) {
    const auto i = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r2)]);
    design.row(r2) = full.row(i);
    y(r2) = dA[static_cast<std::size_t>(i)];
  }
  for (Eigen::Index c = 0; c < p; ++c) {
    if (design.col(c).cwiseAbs().maxCoeff() == 0.0) {
      throw Error(ErrorCode::SingularDesign, "differential cross-section of '" + r.species[c] + "' is identically zero");
    }
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) throw Error(ErrorCode::SingularDesign, "design matrix is rank deficient");
  const Eigen::VectorXd c = qr.solve(y);
  const Eigen::VectorXd resid = y - design * c;
  r.noise_std = std::sqrt(resid.squaredNorm() / static_cast<double>(m - p));

  const Eigen::MatrixXd rt = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd rinv = rt.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd perm = qr.colsPermutation();
  const Eigen::MatrixXd inv = perm * (rinv * rinv.transpose()) * perm.transpose();
  r.covariance = r.noise_std * r.noise_std * inv;
  r.covariance = 0.5 * (r.covariance + r.covariance.transpose()).eval();

  const Eigen::VectorXd fit = full * c;
  std::vector<double> fv(dA.size()), rv(dA.size());
  for (std::size_t i = 0; i < dA.size(); ++i) {
    fv[i] = fit(static_cast<Eigen::Index>(i));
    rv[i] = dA.is_valid(i) ? dA[i] - fv[i] : 0.0;
  }
  r.fit = Spectrum(g, std::move(fv), SpectrumKind::Absorbance, dA.mask());
  r.residual = Spectrum(g, std::move(rv), SpectrumKind::Absorbance, dA.mask());

  for (Eigen::Index j = 0; j < p; ++j) {
    const auto& name = r.species[static_cast<std::size_t>(j)];
    const double peak = design.col(j).cwiseAbs().maxCoeff();
    r.concentrations[name] = c(j);
    if (r.noise_std > 0.0) {
      r.snr[name] = std::abs(c(j)) * peak / r.noise_std;
      r.detection_limits[name] = r.noise_std / peak;
    } else {
      r.snr[name] = c(j) == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
      r.detection_limits[name] = std::nullopt;
    }
  }
  return r;
}

double detection_limit(double concentration, double snr) {
  if (!(snr > 0.0) || !std::isfinite(snr)) throw Error(ErrorCode::InvalidArgument, "SNR must be positive and finite");
  return std::abs(concentration) / snr;
}

DasAnalyzer::DasAnalyzer(std::map<std::string, Spectrum> differential_xs, DifferentialBand band, double path_length,
                         AmbientConditions conditions)
    : xs_(std::move(differential_xs)), band_(band), path_length_(path_length), conditions_(conditions) {
  band_.validate();
  if (xs_.empty()) throw Error(ErrorCode::EmptyInput, "no species to retrieve");
  if (!(path_length_ > 0.0)) throw Error(ErrorCode::InvalidArgument, "path length must be positive");
}

DasAnalyzer DasAnalyzer::for_grid(const SpeciesDatabase& species, const WavenumberGrid& grid,
                                  const DifferentialBand& band, double resolution, double path_length,
                                  AmbientConditions conditions) {
  return DasAnalyzer(differential_cross_sections(species, grid, band, resolution), band, path_length, conditions);
}

RetrievalResult DasAnalyzer::retrieve_absorbance(const Spectrum& absorbance) const {
  return retrieve(detrend(absorbance, band_).differential, xs_, path_length_, conditions_);
}

DasAnalyzer::Output DasAnalyzer::analyze(const Spectrum& sample, const Spectrum& reference) const {
  Spectrum a = measured_absorbance(sample, reference, band_);
  Detrended parts = detrend(a, band_);
  RetrievalResult res = retrieve(parts.differential, xs_, path_length_, conditions_);
  return {std::move(a), std::move(parts), std::move(res)};
}

std::vector<TrackEntry> track(const std::vector<TrackStep>& series, const DasAnalyzer& analyzer) {
  if (series.empty()) throw Error(ErrorCode::EmptyInput, "time series is empty");
  for (std::size_t i = 1; i < series.size(); ++i) {
    if (!(series[i].timestamp > series[i - 1].timestamp)) {
      throw Error(ErrorCode::NonMonotonicTimestamps, "timestamp " + std::to_string(i) + " does not increase");
    }
  }
  std::vector<TrackEntry> out;
  out.reserve(series.size());
  for (const auto& step : series) {
    TrackEntry e{step.timestamp, std::nullopt, {}};
    try {
      e.result = analyzer.analyze(step.sample, step.reference).result;
    } catch (const Error& err) {
      e.error = err.what();
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace qftir::das
