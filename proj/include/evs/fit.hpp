#pragma once
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "scurve.hpp"

namespace evs {

struct FitDegenerateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoCrossingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PlateauError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
}

struct GaussCdfFit {
  double mu = 0.0;
  double sigma = 0.0;
  double se_mu = std::numeric_limits<double>::quiet_NaN();
  double se_sigma = std::numeric_limits<double>::quiet_NaN();
  double rss = 0.0;
};

namespace detail {

inline double cdf_sse(const std::vector<SCurvePoint>& pts, double mu, double sigma) {
  double sse = 0.0;
  for (const auto& p : pts) {
    const double r = normal_cdf((p.log_contrast - mu) / sigma) - p.probability;
    sse += r * r;
  }
  return sse;
}

}  // namespace detail

// Least-squares fit of p(x) = Phi((x - mu) / sigma) over log contrast.
// Coarse grid search, then Nelder-Mead refinement on (mu, log sigma) to
// relative tolerance 1e-6; fully deterministic.  Standard errors come from
// the Gauss-Newton covariance at the optimum.
inline GaussCdfFit fit_gaussian_cdf(const SCurve& curve) {
  const auto& pts = curve.points;
  if (pts.empty()) throw std::invalid_argument("fit_gaussian_cdf: empty curve");
  bool all_zero = true, all_one = true;
  for (const auto& p : pts) {
    all_zero = all_zero && p.probability == 0.0;
    all_one = all_one && p.probability == 1.0;
  }
  if (all_zero || all_one)
    throw FitDegenerateError("fit_gaussian_cdf: all probabilities are " +
                             std::string(all_zero ? "0" : "1"));

  const double x_lo = pts.front().log_contrast;
  const double x_hi = pts.back().log_contrast;
  const double span = std::max(x_hi - x_lo, 1e-6);
  const double sig_lo = 1e-4, sig_hi = span;

  double best_mu = x_lo, best_ls = std::log(sig_lo);
  double best_sse = std::numeric_limits<double>::infinity();
  constexpr int mu_steps = 121, sig_steps = 49;
  for (int i = 0; i < mu_steps; ++i) {
    const double mu = x_lo + span * i / double(mu_steps - 1);
    for (int j = 0; j < sig_steps; ++j) {
      const double ls =
          std::log(sig_lo) + (std::log(sig_hi) - std::log(sig_lo)) * j / double(sig_steps - 1);
      const double sse = detail::cdf_sse(pts, mu, std::exp(ls));
      if (sse < best_sse) {
        best_sse = sse;
        best_mu = mu;
        best_ls = ls;
      }
    }
  }

  // Nelder-Mead on (mu, log sigma)
  struct Vertex {
    double mu, ls, f;
  };
  auto eval = [&](double mu, double ls) { return detail::cdf_sse(pts, mu, std::exp(ls)); };
  Vertex v[3] = {{best_mu, best_ls, best_sse},
                 {best_mu + 0.05 * span, best_ls, 0.0},
                 {best_mu, best_ls + 0.2, 0.0}};
  v[1].f = eval(v[1].mu, v[1].ls);
  v[2].f = eval(v[2].mu, v[2].ls);
  for (int it = 0; it < 300; ++it) {
    std::sort(v, v + 3, [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
    const double size = std::max(std::abs(v[2].mu - v[0].mu), std::abs(v[2].ls - v[0].ls));
    if (size < 1e-6 * (1.0 + std::abs(v[0].mu))) break;
    const double cmu = (v[0].mu + v[1].mu) / 2, cls = (v[0].ls + v[1].ls) / 2;
    const double rmu = cmu + (cmu - v[2].mu), rls = cls + (cls - v[2].ls);
    const double fr = eval(rmu, rls);
    if (fr < v[0].f) {
      const double emu = cmu + 2 * (cmu - v[2].mu), els = cls + 2 * (cls - v[2].ls);
      const double fe = eval(emu, els);
      v[2] = fe < fr ? Vertex{emu, els, fe} : Vertex{rmu, rls, fr};
    } else if (fr < v[1].f) {
      v[2] = {rmu, rls, fr};
    } else {
      const double kmu = cmu + 0.5 * (v[2].mu - cmu), kls = cls + 0.5 * (v[2].ls - cls);
      const double fk = eval(kmu, kls);
      if (fk < v[2].f) {
        v[2] = {kmu, kls, fk};
      } else {  // shrink toward the best vertex
        for (int k = 1; k < 3; ++k) {
          v[k].mu = v[0].mu + 0.5 * (v[k].mu - v[0].mu);
          v[k].ls = v[0].ls + 0.5 * (v[k].ls - v[0].ls);
          v[k].f = eval(v[k].mu, v[k].ls);
        }
      }
    }
  }
  std::sort(v, v + 3, [](const Vertex& a, const Vertex& b) { return a.f < b.f; });

  GaussCdfFit fit;
  fit.mu = v[0].mu;
  fit.sigma = std::exp(v[0].ls);
  fit.rss = v[0].f;

  const int n = static_cast<int>(pts.size());
  if (n > 2) {
    double jtj00 = 0, jtj01 = 0, jtj11 = 0;
    for (const auto& p : pts) {
      const double z = (p.log_contrast - fit.mu) / fit.sigma;
      const double dmu = -normal_pdf(z) / fit.sigma;
      const double dsig = -normal_pdf(z) * z / fit.sigma;
      jtj00 += dmu * dmu;
      jtj01 += dmu * dsig;
      jtj11 += dsig * dsig;
    }
    const double det = jtj00 * jtj11 - jtj01 * jtj01;
    if (det > 1e-300) {
      const double s2 = fit.rss / (n - 2);
      fit.se_mu = std::sqrt(std::max(0.0, s2 * jtj11 / det));
      fit.se_sigma = std::sqrt(std::max(0.0, s2 * jtj00 / det));
    }
  }
  return fit;
}

struct ThresholdEstimate {
  double nct_50 = std::numeric_limits<double>::quiet_NaN();
  double gauss_mu = std::numeric_limits<double>::quiet_NaN();
  double gauss_sigma = std::numeric_limits<double>::quiet_NaN();
  double nct_se = std::numeric_limits<double>::quiet_NaN();
  double theta_100 = std::numeric_limits<double>::quiet_NaN();
  double epsilon = 0.0;  // effective margin used for theta_100
  bool nct_fallback = false;       // fit degenerate, interpolated 0.5 crossing used
  bool saturated_left = false;     // curve already above the level at its first point
  bool never_reaches_one = false;  // plateau condition failed
};

// 50% event-probability intercept.  Returns the Gaussian-CDF fit mu; when the
// fit is degenerate, falls back to interpolating the first upward 0.5
// crossing (flagged via the optional estimate fields below).
inline double nct(const SCurve& curve, ThresholdEstimate* info = nullptr) {
  const auto& pts = curve.points;
  if (pts.empty()) throw std::invalid_argument("nct: empty curve");
  double max_p = 0.0;
  for (const auto& p : pts) max_p = std::max(max_p, p.probability);
  if (max_p < 0.5) throw NoCrossingError("nct: maximum probability below 0.5");

  try {
    GaussCdfFit fit = fit_gaussian_cdf(curve);
    if (std::isfinite(fit.mu)) {
      if (info) {
        info->gauss_mu = fit.mu;
        info->gauss_sigma = fit.sigma;
        info->nct_se = fit.se_mu;
        info->nct_50 = fit.mu;
      }
      return fit.mu;
    }
  } catch (const FitDegenerateError&) {
    // fall through to interpolation
  }

  size_t i = 0;
  while (i < pts.size() && pts[i].probability < 0.5) ++i;
  double value;
  bool saturated = false;
  if (i == 0) {
    value = pts[0].log_contrast;
    saturated = true;
  } else {
    const auto& a = pts[i - 1];
    const auto& b = pts[i];
    value = a.log_contrast + (b.log_contrast - a.log_contrast) * (0.5 - a.probability) /
                                 (b.probability - a.probability);
  }
  if (info) {
    info->nct_fallback = true;
    info->saturated_left = saturated;
    info->nct_50 = value;
  }
  return value;
}

// Smallest log contrast at which probability reaches and *stays* at the
// plateau p >= 1 - eps for every larger contrast in the sweep, linearly
// interpolated between the bracketing grid points.  eps is floored at
// 1/n_trials so "100%" keeps statistical meaning at low trial counts.
inline double theta_100(const SCurve& curve, double epsilon = 0.005,
                        ThresholdEstimate* info = nullptr) {
  const auto& pts = curve.points;
  if (pts.empty()) throw std::invalid_argument("theta_100: empty curve");
  if (!(epsilon > 0.0) || epsilon >= 1.0)
    throw std::invalid_argument("theta_100: epsilon must be in (0, 1)");

  int64_t min_trials = pts[0].n_trials;
  for (const auto& p : pts) min_trials = std::min(min_trials, p.n_trials);
  const double eps_eff = std::max(epsilon, 1.0 / static_cast<double>(min_trials));
  const double level = 1.0 - eps_eff;
  if (info) info->epsilon = eps_eff;

  // plateau start = first index from which every probability stays >= level
  size_t k = pts.size();
  for (size_t i = pts.size(); i-- > 0;) {
    if (pts[i].probability >= level)
      k = i;
    else
      break;
  }
  if (k == pts.size()) {
    if (info) info->never_reaches_one = true;
    throw PlateauError("theta_100: probability never reaches the 1 - epsilon plateau");
  }
  double value;
  if (k == 0) {
    value = pts[0].log_contrast;
    if (info) info->saturated_left = true;
  } else {
    const auto& a = pts[k - 1];
    const auto& b = pts[k];
    value = a.log_contrast + (b.log_contrast - a.log_contrast) * (level - a.probability) /
                                 (b.probability - a.probability);
  }
  if (info) info->theta_100 = value;
  return value;
}

// Bundles both estimators; estimator failures land in flags instead of throwing.
inline ThresholdEstimate estimate_thresholds(const SCurve& curve, double epsilon = 0.005) {
  ThresholdEstimate est;
  try {
    nct(curve, &est);
  } catch (const NoCrossingError&) {
    // nct_50 stays NaN
  }
  try {
    theta_100(curve, epsilon, &est);
  } catch (const PlateauError&) {
    est.never_reaches_one = true;
  }
  return est;
}

}  // namespace evs
