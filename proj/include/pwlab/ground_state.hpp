// Positive stationary solution Q of -Delta Q + beta Q = Q^3 and the level d = J(Q).
//
// The main solver is a Petviashvili fixed-point iteration in sine coefficients.
// A shooting solver for the stationary ODE serves as an independent oracle,
// and certification samples the Nehari manifold to confirm d is its infimum.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pwlab/bisection.hpp"
#include "pwlab/functionals.hpp"
#include "pwlab/spectral_domain.hpp"

namespace pwlab {

struct GroundState {
  Field q;
  SpectralCoeffs coeffs;
  double d_level = 0.0;
  double residual = 0.0;  // ||(-Delta+beta)Q - Q^3||_{L^2} / ||Q^3||_{L^2}
  double stabilizing_factor = 0.0;
  int iterations = 0;
  bool certified = false;
};

struct PetviashviliOptions {
  double tol = 1e-10;
  int max_iters = 10000;
};

namespace detail {

inline double stationary_residual(const Domain& d, const SpectralCoeffs& c) {
  const auto lhs = apply_shifted_laplacian(d, c);
  const auto rhs = d.cubic_term(c);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) {
    num += (lhs[k] - rhs[k]) * (lhs[k] - rhs[k]);
    den += rhs[k] * rhs[k];
  }
  return den > 0.0 ? std::sqrt(num / den) : INFINITY;
}

inline GroundState finish_ground_state(const Domain& d, SpectralCoeffs c, int iterations) {
  GroundState gs;
  gs.q = inverse_transform(d, c);
  gs.residual = stationary_residual(d, c);
  const double h = h01_norm_sq(d, c);
  const double nq = l2_inner(d, d.cubic_term(c), c);
  gs.stabilizing_factor = h / nq;
  gs.d_level = 0.5 * h - 0.25 * l4_norm_4(d, c);
  gs.iterations = iterations;
  gs.coeffs = std::move(c);
  return gs;
}

}  // namespace detail

/// Q <- m(Q)^{3/2} (-Delta+beta)^{-1} Q^3 with m(Q) = <(-Delta+beta)Q, Q> / <Q^3, Q>,
/// seeded with the first Dirichlet eigenfunction at unit H^1_0 norm.
inline GroundState petviashvili_solve(const Domain& d, const PetviashviliOptions& opts = {}) {
  SpectralCoeffs c{std::vector<double>(d.n_modes(), 0.0)};
  c[0] = 1.0;
  c = scaled(std::move(c), 1.0 / std::sqrt(h01_norm_sq(d, c)));

  for (int it = 1; it <= opts.max_iters; ++it) {
    const auto nonlinear = d.cubic_term(c);
    const double num = h01_norm_sq(d, c);
    const double den = l2_inner(d, nonlinear, c);
    ensure(den > 0.0, Errc::NonConvergence, "iterate lost its L^4 mass");
    const double m = num / den;
    c = scaled(solve_shifted_laplacian(d, nonlinear), m * std::sqrt(m));

    const auto grid = d.to_fine(c);
    const double top = *std::max_element(grid.begin(), grid.end());
    const double bottom = *std::min_element(grid.begin(), grid.end());
    if (bottom < -1e-6 * top)
      throw Error(Errc::SignFlip, "iterate has negative part " + std::to_string(bottom) +
                                      " at iteration " + std::to_string(it));

    const double res = detail::stationary_residual(d, c);
    if (res <= opts.tol) return detail::finish_ground_state(d, std::move(c), it);
  }
  throw Error(Errc::NonConvergence,
              "no convergence after " + std::to_string(opts.max_iters) + " iterations");
}

struct ShootingOptions {
  int substeps_per_cell = 16;  // RK4 steps between consecutive grid nodes
  double endpoint_tol = 1e-10;
  int max_bisections = 200;
};

struct ShootingResult {
  GroundState state;
  double slope = 0.0;  // u'(0) on the interval, u(0) = v'(0) on the ball
  double endpoint_value = 0.0;
  Bracket bracket;
};

namespace detail {

// Integrates the stationary ODE from the left end with initial slope s.
struct ShootingIntegrator {
  const Domain& d;
  int substeps;

  double rhs(double r, double v) const {
    if (d.is_ball()) {
      if (r == 0.0) return 0.0;
      return d.beta() * v - v * v * v / (r * r);
    }
    return d.beta() * v - v * v * v;
  }

  // Returns true when the trajectory reaches zero at or before the far end.
  bool run(double slope, std::vector<double>* nodes, double* endpoint) const {
    const std::size_t n = d.n_nodes();
    const double h = d.extent() / static_cast<double>((n + 1) * static_cast<std::size_t>(substeps));
    double v = 0.0, w = slope, r = 0.0;
    if (nodes) nodes->assign(n, 0.0);
    for (std::size_t cell = 0; cell <= n; ++cell) {
      for (int s = 0; s < substeps; ++s) {
        const double k1v = w, k1w = rhs(r, v);
        const double k2v = w + 0.5 * h * k1w, k2w = rhs(r + 0.5 * h, v + 0.5 * h * k1v);
        const double k3v = w + 0.5 * h * k2w, k3w = rhs(r + 0.5 * h, v + 0.5 * h * k2v);
        const double k4v = w + h * k3w, k4w = rhs(r + h, v + h * k3v);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        r = (static_cast<double>(cell) * substeps + s + 1) * h;
        if (v <= 0.0) return true;
        if (!std::isfinite(v)) return false;
      }
      if (cell < n && nodes) (*nodes)[cell] = v;
    }
    if (endpoint) *endpoint = v;
    return false;
  }
};

}  // namespace detail

/// Shooting on the initial slope for -u'' + beta u = u^3 (or the radial
/// reduction -v'' + beta v = v^3 / r^2) until the far Dirichlet condition holds.
inline ShootingResult shooting_oracle(const Domain& d, const ShootingOptions& opts = {}) {
  const detail::ShootingIntegrator integ{d, opts.substeps_per_cell};
  auto hits = [&](double s) { return integ.run(s, nullptr, nullptr); };

  double lo = 1e-6;
  ensure(!hits(lo), Errc::BracketingFailure, "small slope already reaches zero");
  double hi = 1.0;
  while (!hits(hi)) {
    lo = hi;
    hi *= 2.0;
    ensure(hi < 1e8, Errc::BracketingFailure, "no slope reaches zero before the far end");
  }

  ShootingResult out;
  out.bracket = bisect(lo, hi, hits, opts.max_bisections, 1e-16);
  std::vector<double> nodes;
  double endpoint = 0.0;
  integ.run(out.bracket.lo, &nodes, &endpoint);
  ensure(std::abs(endpoint) <= opts.endpoint_tol * std::max(1.0, out.bracket.lo),
         Errc::BracketingFailure,
         "endpoint value " + std::to_string(endpoint) + " after bisection");
  out.slope = out.bracket.lo;
  out.endpoint_value = endpoint;
  out.state = detail::finish_ground_state(d, forward_transform(d, Field{nodes}),
                                          out.bracket.steps);
  return out;
}

/// lambda*(u) u, which lies on the Nehari manifold K = 0.
inline SpectralCoeffs nehari_project(const Domain& d, const SpectralCoeffs& u) {
  return scaled(u, lambda_star(d, u));
}

inline Field nehari_project(const Domain& d, const Field& u) {
  return inverse_transform(d, nehari_project(d, forward_transform(d, u)));
}

inline WellConstants well_constants(const Domain& d, const GroundState& gs) {
  WellConstants wc;
  wc.d = gs.d_level;
  wc.q_l4_norm_4 = l4_norm_4(d, gs.coeffs);
  wc.q_h01_norm_sq = h01_norm_sq(d, gs.coeffs);
  return with_delta(wc, 0.0);
}

/// Random trial coefficients with algebraic decay, deterministic in `rng`.
inline SpectralCoeffs random_trial(const Domain& d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> decay(0.5, 3.0);
  const double p = decay(rng);
  SpectralCoeffs c{std::vector<double>(d.n_modes())};
  for (std::size_t k = 0; k < c.size(); ++k)
    c[k] = normal(rng) / std::pow(static_cast<double>(k + 1), p);
  return c;
}

/// Samples trial_count random fields and checks J(lambda* u) >= d (1 - 1e-6)
/// for each. Marks gs certified and returns the well constants.
inline WellConstants certify_well_constants(const Domain& d, GroundState& gs, int trial_count,
                                            std::uint64_t seed = 20240611, double rel_tol = 1e-6) {
  ensure(gs.residual <= 1e-6, Errc::PreconditionViolated,
         "ground state residual " + std::to_string(gs.residual) + " too large to certify");
  std::mt19937_64 rng(seed);
  const double floor = gs.d_level * (1.0 - rel_tol);
  for (int i = 0; i < trial_count; ++i) {
    const auto trial = random_trial(d, rng);
    const auto w = nehari_project(d, trial);
    const double level = 0.5 * h01_norm_sq(d, w) - 0.25 * l4_norm_4(d, w);
    if (level < floor) {
      std::ostringstream os;
      os.precision(17);
      os << "trial " << i << " reaches J = " << level << " < d = " << gs.d_level
         << "; leading coefficients:";
      for (std::size_t k = 0; k < std::min<std::size_t>(8, trial.size()); ++k)
        os << ' ' << trial[k];
      throw Error(Errc::CertificationFailure, os.str());
    }
  }
  gs.certified = true;
  return well_constants(d, gs);
}

}  // namespace pwlab
