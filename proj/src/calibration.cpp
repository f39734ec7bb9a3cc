#include "qftir/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "qftir/error.hpp"
#include "qftir/forward_model.hpp"

namespace qftir::calibration {

namespace {

constexpr double kModelMargin = 20.0;  // cm^-1 of native grid kept beyond the fitted span
constexpr double kParamTol = 1e-8;
constexpr double kGradTol = 1e-10;
constexpr double kFlatTol = 1e-4;  // reached before the gradient test when both shrink together
constexpr double kScanSpan = 3.0;  // resolution profile covers [res0 / span, res0 * span]
constexpr double kScanStep = 0.01;  // log step of the profile

// The unapodized sinc makes the cost ripple in resolution (sidelobes beating
// against distant lines), so LM started far from the answer can stop in a
// ripple. Scan the resolution profile with the concentration set by a linear
// scale fit and start from the best point.
InitialGuess profile_start(const CalibrationModel& model, InitialGuess g) {
  const auto& t = model.targets();
  const double lo = std::max(g.resolution / kScanSpan, model.min_resolution() * (1.0 + 1e-3));
  const double hi = g.resolution * kScanSpan;
  if (!(lo < hi)) return g;
  InitialGuess best = g;
  double best_cost = std::numeric_limits<double>::infinity();
  const int steps = static_cast<int>(std::ceil(std::log(hi / lo) / kScanStep));
  for (int k = 0; k <= steps; ++k) {
    const double res = lo * std::exp(std::log(hi / lo) * k / steps);
    const auto m = model.evaluate(g.concentration_ppm, res);
    double mt = 0.0, mm = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      mt += m[i] * t[i];
      mm += m[i] * m[i];
    }
    if (!(mm > 0.0) || !(mt > 0.0)) continue;
    const double cost = -mt * mt / mm;  // residual of the best scaled model, up to a constant
    if (cost < best_cost) {
      best_cost = cost;
      best = {g.concentration_ppm * mt / mm, res};
    }
  }
  return best;
}

}  // namespace

CalibrationModel::CalibrationModel(const Spectrum& measured, const GasSpecies& species, double path_length,
                                   AmbientConditions conditions) {
  if (!(path_length > 0.0)) throw Error(ErrorCode::InvalidArgument, "path length must be positive");
  for (std::size_t i = 0; i < measured.size(); ++i) {
    if (!measured.is_valid(i)) continue;
    nu_.push_back(measured.grid().point(i));
    targets_.push_back(measured[i]);
  }
  if (nu_.size() < 3) throw Error(ErrorCode::InsufficientPoints, "measured spectrum has fewer than 3 usable points");

  const auto& xs = species.cross_section;
  const auto& g = xs.grid();
  const double tol = 1e-9 * g.step();
  if (nu_.front() < g.start() - tol || nu_.back() > g.last() + tol) {
    throw Error(ErrorCode::BandNotCovered, "measured span " + std::to_string(nu_.front()) + "-" +
                                               std::to_string(nu_.back()) + " cm^-1 exceeds the cross-section of '" +
                                               species.name + "'");
  }
  const WavenumberGrid region = g.restrict_to(nu_.front() - kModelMargin, nu_.back() + kModelMargin);
  const std::size_t offset = g.index_of(region.start());
  sigma_.assign(xs.values().begin() + static_cast<std::ptrdiff_t>(offset),
                xs.values().begin() + static_cast<std::ptrdiff_t>(offset + region.count()));
  start_ = region.start();
  step_ = region.step();
  column_ = path_length * number_density(conditions) * kPpm;
}

std::vector<double> CalibrationModel::evaluate(double c, double resolution) const {
  const std::size_t n = sigma_.size();
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(-column_ * c * sigma_[i]);
  const Spectrum th = forward::apply_response(
      Spectrum(WavenumberGrid(start_, step_, n), std::move(t), SpectrumKind::Transmission), resolution);
  constexpr double tiny = std::numeric_limits<double>::min();
  std::vector<double> out(nu_.size());
  for (std::size_t k = 0; k < nu_.size(); ++k) {
    const double u = std::clamp((nu_[k] - start_) / step_, 0.0, static_cast<double>(n - 1));
    const auto i = std::min(static_cast<std::size_t>(u), n - 2);
    const double f = u - static_cast<double>(i);
    const double a0 = -std::log(std::max(th[i], tiny));
    const double a1 = -std::log(std::max(th[i + 1], tiny));
    out[k] = (1.0 - f) * a0 + f * a1;
  }
  return out;
}

Eigen::MatrixXd CalibrationModel::jacobian(double c, double resolution, double rel_step, bool with_resolution) const {
  const auto m = static_cast<Eigen::Index>(nu_.size());
  Eigen::MatrixXd j(m, with_resolution ? 2 : 1);
  const double up = std::exp(rel_step);
  const double down = std::exp(-rel_step);
  auto column = [&](Eigen::Index col, const std::vector<double>& plus, const std::vector<double>& minus) {
    for (Eigen::Index i = 0; i < m; ++i) {
      j(i, col) = (plus[static_cast<std::size_t>(i)] - minus[static_cast<std::size_t>(i)]) / (2.0 * rel_step);
    }
  };
  column(0, evaluate(c * up, resolution), evaluate(c * down, resolution));
  if (with_resolution) column(1, evaluate(c, resolution * up), evaluate(c, resolution * down));
  return j;
}

double CalibrationModel::cost(double c, double resolution) const {
  const auto model = evaluate(c, resolution);
  double s = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) s += (model[i] - targets_[i]) * (model[i] - targets_[i]);
  return 0.5 * s;
}

CalibrationResult calibrate(const Spectrum& measured, const GasSpecies& species, double path_length,
                            const AmbientConditions& conditions, InitialGuess initial,
                            const CalibrationOptions& options) {
  if (!(initial.concentration_ppm > 0.0) || !(initial.resolution > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "initial concentration and resolution must be positive");
  }
  const CalibrationModel model(measured, species, path_length, conditions);
  if (initial.resolution < model.min_resolution()) {
    throw Error(ErrorCode::GridTooCoarse, "initial resolution is below 5 native grid steps");
  }
  const bool both = options.fit_resolution;
  if (both) initial = profile_start(model, initial);
  const Eigen::Index np = both ? 2 : 1;
  const auto m = static_cast<Eigen::Index>(model.targets().size());
  const Eigen::Map<const Eigen::VectorXd> target(model.targets().data(), m);

  Eigen::VectorXd p(np);
  p(0) = std::log(initial.concentration_ppm);
  if (both) p(1) = std::log(initial.resolution);
  const double fixed_res = initial.resolution;
  auto conc = [](const Eigen::VectorXd& q) { return std::exp(q(0)); };
  auto res = [&](const Eigen::VectorXd& q) { return both ? std::exp(q(1)) : fixed_res; };
  auto residual = [&](const Eigen::VectorXd& q) {
    const auto v = model.evaluate(conc(q), res(q));
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), m) - target);
  };

  CalibrationResult out;
  Eigen::VectorXd r = residual(p);
  double cost = 0.5 * r.squaredNorm();
  out.cost_history.push_back(cost);
  Eigen::MatrixXd jac = model.jacobian(conc(p), res(p), options.jacobian_step, both);
  const Eigen::VectorXd col0 = jac.colwise().norm();
  if (col0(0) == 0.0) {
    throw Error(ErrorCode::DegenerateInitialGuess, "model does not depend on concentration at the initial guess");
  }
  const double g0 = (jac.transpose() * r).norm();
  double lambda = 1e-3;
  double nu = 2.0;
  bool done = false;

  while (!done) {
    // A collapsing column also drives the gradient to zero, so it is checked
    // first: a vanishing model is not a converged fit.
    const Eigen::VectorXd norms = jac.colwise().norm();
    for (Eigen::Index k = 0; k < np; ++k) {
      if (norms(k) < kFlatTol * col0(k)) {
        out.converged = false;
        out.diagnostic = std::string("flat direction: model insensitive to ") +
                         (k == 0 ? "concentration" : "resolution") + "; parameters not identifiable";
        done = true;
      }
    }
    if (done) break;
    const Eigen::VectorXd g = jac.transpose() * r;
    if (g.norm() <= kGradTol * g0) {
      out.converged = true;
      out.diagnostic = "gradient below tolerance";
      break;
    }

    if (out.iterations >= options.max_iterations) {
      throw Error(ErrorCode::NoConvergence, "no convergence after " + std::to_string(out.iterations) +
                                                " iterations (c = " + std::to_string(conc(p)) +
                                                " ppm, resolution = " + std::to_string(res(p)) + ")");
    }
    ++out.iterations;
    const Eigen::MatrixXd a = jac.transpose() * jac;
    // Damping follows the gain ratio (Nielsen). Near the minimum of a noisy
    // fit J^T J underestimates the curvature in resolution and plain
    // Gauss-Newton steps overshoot back and forth.
    while (true) {
      Eigen::MatrixXd damped = a;
      for (Eigen::Index k = 0; k < np; ++k) damped(k, k) += lambda * std::max(a(k, k), 1e-300);
      const Eigen::VectorXd delta = damped.ldlt().solve(-g);
      const Eigen::VectorXd trial = p + delta;
      double rho = -1.0;
      Eigen::VectorXd rt;
      double ct = cost;
      if (delta.allFinite() && res(trial) >= model.min_resolution() * (1.0 + 1e-3)) {
        rt = residual(trial);
        ct = 0.5 * rt.squaredNorm();
        const double predicted = -g.dot(delta) - 0.5 * delta.dot(a * delta);
        if (ct < cost && predicted > 0.0) rho = (cost - ct) / predicted;
      }
      if (rho > 0.0) {
        p = trial;
        r = rt;
        cost = ct;
        out.cost_history.push_back(cost);
        lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
        lambda = std::max(lambda, 1e-12);
        nu = 2.0;
        const double change = (delta.array().exp() - 1.0).abs().maxCoeff();
        if (change < kParamTol) {
          out.converged = true;
          out.diagnostic = "parameter change below tolerance";
          done = true;
        }
        break;
      }
      lambda *= nu;
      nu *= 2.0;
      if (lambda > 1e16) {
        // No descent direction survives rounding: the current point is a minimum.
        out.converged = true;
        out.diagnostic = "no further decrease at machine precision";
        done = true;
        break;
      }
    }
    if (!done) jac = model.jacobian(conc(p), res(p), options.jacobian_step, both);
  }

  out.concentration = conc(p);
  out.resolution = res(p);
  out.fit_rms = std::sqrt(r.squaredNorm() / static_cast<double>(m));
  out.noise_std = m > np ? std::sqrt(r.squaredNorm() / static_cast<double>(m - np)) : 0.0;
  const Eigen::MatrixXd jc = model.jacobian(out.concentration, out.resolution, options.jacobian_step, false);
  out.sensitivity = jc.col(0).cwiseAbs().maxCoeff() / out.concentration;
  out.detection_limit = out.sensitivity > 0.0 ? out.noise_std / out.sensitivity : 0.0;
  return out;
}

std::vector<LinearityPoint> linearity_check(const std::vector<double>& nominal_ppm, const GasSpecies& species,
                                            std::uint64_t noise_seed, const LinearitySettings& s) {
  if (!(s.step > 0.0) || !(s.low < s.high)) throw Error(ErrorCode::InvalidBand, "invalid linearity grid");
  const auto count = static_cast<std::size_t>(std::floor((s.high - s.low) / s.step + 1e-9)) + 1;
  const WavenumberGrid grid(s.low, s.step, count);
  const Spectrum blank(grid, std::vector<double>(count, 0.0), SpectrumKind::Absorbance);
  const CalibrationModel synth(blank, species, s.path_length, s.conditions);

  const auto ref = synth.evaluate(s.reference_ppm, s.resolution);
  const double peak = *std::max_element(ref.begin(), ref.end());
  const double noise = peak / s.reference_snr;

  std::vector<LinearityPoint> out;
  for (std::size_t k = 0; k < nominal_ppm.size(); ++k) {
    const double c = nominal_ppm[k];
    if (!(c >= 0.0)) throw Error(ErrorCode::NegativeConcentration, "nominal concentrations must be non-negative");
    const Spectrum clean(grid, synth.evaluate(c, s.resolution), SpectrumKind::Absorbance);
    const Spectrum noisy = forward::add_gaussian_noise(clean, noise, noise_seed + k);
    CalibrationOptions opt;
    opt.fit_resolution = false;
    const auto fit = calibrate(noisy, species, s.path_length, s.conditions, {s.initial_ppm, s.resolution}, opt);
    out.push_back({c, fit.concentration, fit.detection_limit, fit.converged});
  }
  return out;
}

}  // namespace qftir::calibration
