// Static energy J, energy E, Nehari functional K and the potential-well
// constants built on the ground-state level d.
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "pwlab/spectral_domain.hpp"

namespace pwlab {

struct EnergyTriple {
  double J = 0.0;
  double E = 0.0;
  double K = 0.0;
};

/// Norms that every functional is assembled from.
struct NormSet {
  double h01_sq = 0.0;  // ||u||^2_{H^1_0} (includes beta)
  double l4_4 = 0.0;    // ||u||^4_{L^4}
  double l2t_sq = 0.0;  // ||u_t||^2_{L^2}
};

inline NormSet norms(const Domain& d, const SpectralCoeffs& u, const SpectralCoeffs& ut) {
  return {h01_norm_sq(d, u), l4_norm_4(d, u), l2_norm_sq(d, ut)};
}

/// sigma scales the quartic term; 1 is the focusing equation, 0 the linear one.
inline EnergyTriple energies(const NormSet& n, double sigma = 1.0) {
  EnergyTriple e;
  e.J = 0.5 * n.h01_sq - 0.25 * sigma * n.l4_4;
  e.E = e.J + 0.5 * n.l2t_sq;
  e.K = n.h01_sq - sigma * n.l4_4;
  return e;
}

inline EnergyTriple energies(const Domain& d, const SpectralCoeffs& u, const SpectralCoeffs& ut) {
  return energies(norms(d, u, ut));
}

inline EnergyTriple energies(const Domain& d, const Field& u, const Field& ut) {
  return energies(d, forward_transform(d, u), forward_transform(d, ut));
}

/// Positive maximizer of lambda -> J(lambda u): ||u||_{H^1_0} / ||u||^2_{L^4}.
inline double lambda_star(const Domain& d, const SpectralCoeffs& u) {
  const double h = h01_norm_sq(d, u);
  const double q = l4_norm_4(d, u);
  ensure(h > 0.0 && q > 0.0, Errc::ZeroField, "lambda_star of the zero field");
  return std::sqrt(h) / std::sqrt(q);
}

inline double lambda_star(const Domain& d, const Field& u) {
  return lambda_star(d, forward_transform(d, u));
}

struct WellConstants {
  double d = 0.0;              // mountain-pass level J(Q)
  double q_l4_norm_4 = 0.0;    // ||Q||^4_{L^4}
  double q_h01_norm_sq = 0.0;  // ||Q||^2_{H^1_0}
  double x_minus = 0.0;
  double x_plus = 0.0;
  double delta = 0.0;
};

enum class Verdict { KPlus, KMinus, AboveThreshold };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::KPlus: return "KPlus";
    case Verdict::KMinus: return "KMinus";
    case Verdict::AboveThreshold: return "AboveThreshold";
  }
  return "?";
}

struct Classification {
  Verdict verdict = Verdict::AboveThreshold;
  double margin = 0.0;  // min(d - E, |K|)
};

/// E within 1e-12 d of the level counts as E = d (AboveThreshold): the
/// transforms alone perturb E(Q, 0) by a few ulps.
inline Classification classify(const WellConstants& wc, const EnergyTriple& e) {
  Classification c;
  c.margin = std::max(0.0, std::min(wc.d - e.E, std::abs(e.K)));
  if (!(e.E < wc.d * (1.0 - 1e-12)))
    c.verdict = Verdict::AboveThreshold;
  else
    c.verdict = e.K >= 0.0 ? Verdict::KPlus : Verdict::KMinus;
  return c;
}

inline Classification classify(const Domain& d, const WellConstants& wc, const Field& u,
                               const Field& ut) {
  return classify(wc, energies(d, u, ut));
}

/// ||u||_{H^1_0} - ||u||_{L^4} ||Q||_{L^4}; nonnegative when Q is the true minimizer.
inline double explicit_sobolev_check(const Domain& d, const WellConstants& wc,
                                     const SpectralCoeffs& u) {
  const double h = h01_norm_sq(d, u);
  const double q = l4_norm_4(d, u);
  return std::sqrt(h) - std::sqrt(std::sqrt(q)) * std::sqrt(std::sqrt(wc.q_l4_norm_4));
}

inline double explicit_sobolev_check(const Domain& d, const WellConstants& wc, const Field& u) {
  return explicit_sobolev_check(d, wc, forward_transform(d, u));
}

/// alpha(x) = x^2/2 - x^4 / (4 ||Q||^4_{L^4}); maximum d at x = ||Q||^2_{L^4}.
inline double well_curve(const WellConstants& wc, double x) {
  ensure(x >= 0.0, Errc::NegativeInput, "well_curve needs x >= 0");
  const double x2 = x * x;
  return 0.5 * x2 - x2 * x2 / (4.0 * wc.q_l4_norm_4);
}

inline double x_plus(const WellConstants& wc, double delta) {
  ensure(delta >= 0.0, Errc::DeltaOutOfRange, "delta must be nonnegative");
  return 2.0 * std::sqrt(wc.d + std::sqrt(wc.d * delta));
}

inline double x_minus(const WellConstants& wc, double delta) {
  ensure(delta >= 0.0 && delta <= wc.d, Errc::DeltaOutOfRange,
         "x_minus needs 0 <= delta <= d");
  // d - sqrt(d delta) can round to a tiny negative at delta = d.
  return 2.0 * std::sqrt(std::max(0.0, wc.d - std::sqrt(wc.d * delta)));
}

inline std::pair<double, double> x_pm(const WellConstants& wc, double delta) {
  return {x_minus(wc, delta), x_plus(wc, delta)};
}

/// Copy of wc with delta and the matching x_minus/x_plus filled in.
inline WellConstants with_delta(WellConstants wc, double delta) {
  wc.delta = delta;
  wc.x_plus = x_plus(wc, delta);
  wc.x_minus = delta <= wc.d ? x_minus(wc, delta) : 0.0;
  return wc;
}

struct CoercivityReport {
  double J = 0.0;
  double K = 0.0;
  double h01_sq = 0.0;
  bool positive_branch = true;
  // K >= sqrt(delta/d) ||u||^2
  bool positive_bound_holds = true;
  double positive_slack = 0.0;
  // K <= -4 delta - 4 sqrt(d delta)
  bool negative_level_holds = true;
  double negative_level_slack = 0.0;
  // K <= -((delta + sqrt(d delta)) / (d + sqrt(d delta))) ||u||^2
  bool negative_ratio_holds = true;
  double negative_ratio_slack = 0.0;

  bool all_hold() const {
    return positive_bound_holds && negative_level_holds && negative_ratio_holds;
  }
};

/// Explicit coercivity bounds for fields with J(u) <= d - delta. Slacks are
/// signed distances to the bound (>= 0 when it holds); `tol` is relative to
/// the natural scale of each side.
inline CoercivityReport lemma12_bounds(const Domain& d, const WellConstants& wc, double delta,
                                    const SpectralCoeffs& u, double tol = 1e-8) {
  ensure(delta >= 0.0, Errc::DeltaOutOfRange, "delta must be nonnegative");
  CoercivityReport r;
  r.h01_sq = h01_norm_sq(d, u);
  const double q = l4_norm_4(d, u);
  r.J = 0.5 * r.h01_sq - 0.25 * q;
  r.K = r.h01_sq - q;
  ensure(r.J <= wc.d - delta + std::max(tol * wc.d, 1e-12), Errc::PreconditionViolated,
         "J(u) = " + std::to_string(r.J) + " exceeds d - delta = " + std::to_string(wc.d - delta));
  const double floor = 1e-12;
  if (r.K >= 0.0) {
    r.positive_branch = true;
    r.positive_slack = r.K - std::sqrt(delta / wc.d) * r.h01_sq;
    r.positive_bound_holds = r.positive_slack >= -std::max(tol * r.h01_sq, floor);
  } else {
    r.positive_branch = false;
    const double root = std::sqrt(wc.d * delta);
    r.negative_level_slack = (-4.0 * delta - 4.0 * root) - r.K;
    r.negative_level_holds = r.negative_level_slack >= -std::max(tol * wc.d, floor);
    const double ratio = (delta + root) / (wc.d + root);
    r.negative_ratio_slack = -ratio * r.h01_sq - r.K;
    r.negative_ratio_holds = r.negative_ratio_slack >= -std::max(tol * r.h01_sq, floor);
  }
  return r;
}

inline CoercivityReport lemma12_bounds(const Domain& d, const WellConstants& wc, double delta,
                                    const Field& u, double tol = 1e-8) {
  return lemma12_bounds(d, wc, delta, forward_transform(d, u), tol);
}

}  // namespace pwlab
