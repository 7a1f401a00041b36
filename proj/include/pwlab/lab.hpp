// Post-processing diagnostics over trajectories: virial identities, decay
// fits, observability ratios, the perturbed Lyapunov functional, and
// convergence to the stationary set {0, Q, -Q}.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pwlab/bisection.hpp"
#include "pwlab/dynamics.hpp"
#include "pwlab/functionals.hpp"
#include "pwlab/ground_state.hpp"

namespace pwlab {

// ---------------------------------------------------------------------------
// Virial identities for M(t) = ||u(t)||^2_{L^2}.

struct VirialSample {
  double t = 0.0;
  double M = 0.0;
  double Mp = 0.0;           // 2 int u u_t
  double Mpp_formula = 0.0;  // -2||u||^2_{H^1_0} + 2||u||^4_{L^4} + 2||u_t||^2 - 2 int gamma u u_t
};

struct VirialReport {
  std::vector<VirialSample> samples;
  std::vector<double> fd_Mp;   // central difference of M (NaN at the ends)
  std::vector<double> fd_Mpp;  // central difference of Mp (NaN at the ends)
  double max_dev_Mp = 0.0;
  double max_dev_Mpp = 0.0;
  // M'' - C E' >= 0 on the second half of the samples, with E' = -int gamma |u_t|^2.
  bool tail_convex = false;
};

namespace detail {

// Three-point derivative on a possibly nonuniform grid.
inline std::vector<double> central_difference(std::span<const double> t,
                                              std::span<const double> f) {
  std::vector<double> out(f.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 1; i + 1 < f.size(); ++i) {
    const double h1 = t[i] - t[i - 1], h2 = t[i + 1] - t[i];
    out[i] = -h2 / (h1 * (h1 + h2)) * f[i - 1] + (h2 - h1) / (h1 * h2) * f[i] +
             h1 / (h2 * (h1 + h2)) * f[i + 1];
  }
  return out;
}

}  // namespace detail

inline VirialReport virial_series(const Trajectory& tr, double convexity_constant = 1.0) {
  const auto& s = tr.samples;
  ensure(s.size() >= 5, Errc::InsufficientSamples,
         "virial series needs 5 samples, got " + std::to_string(s.size()));
  VirialReport r;
  std::vector<double> t, m, mp;
  for (const auto& x : s) {
    VirialSample v{x.t, x.mass, 2.0 * x.u_ut,
                   -2.0 * x.h01_sq + 2.0 * x.l4_4 + 2.0 * x.l2t_sq - 2.0 * x.gamma_u_ut};
    r.samples.push_back(v);
    t.push_back(v.t);
    m.push_back(v.M);
    mp.push_back(v.Mp);
  }
  r.fd_Mp = detail::central_difference(t, m);
  r.fd_Mpp = detail::central_difference(t, mp);
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    r.max_dev_Mp = std::max(r.max_dev_Mp, std::abs(r.fd_Mp[i] - r.samples[i].Mp));
    r.max_dev_Mpp = std::max(r.max_dev_Mpp, std::abs(r.fd_Mpp[i] - r.samples[i].Mpp_formula));
  }
  r.tail_convex = true;
  for (std::size_t i = s.size() / 2; i < s.size(); ++i)
    if (r.samples[i].Mpp_formula + convexity_constant * s[i].dissipation_rate < 0.0)
      r.tail_convex = false;
  return r;
}

struct VirialConvergence {
  double dev_Mp_coarse = 0.0;
  double dev_Mp_fine = 0.0;
  double dev_Mpp_coarse = 0.0;
  double dev_Mpp_fine = 0.0;
  double ratio_Mp = 0.0;
  double ratio_Mpp = 0.0;
};

/// Runs [0, t_end] at opts.dt and opts.dt / 2 with the same sample_every and
/// compares the finite-difference deviations. Both runs must complete.
inline VirialConvergence virial_convergence(const Domain& d, const DampingProfile& g,
                                            const State& s0, double t_end, DynamicsOptions opts) {
  VirialConvergence out;
  const auto coarse = evolve(d, g, s0, t_end, opts);
  opts.dt *= 0.5;
  const auto fine = evolve(d, g, s0, t_end, opts);
  ensure(coarse.cause == Termination::Completed && fine.cause == Termination::Completed,
         Errc::PreconditionViolated, "virial convergence window reaches blow-up detection");
  const auto a = virial_series(coarse), b = virial_series(fine);
  out.dev_Mp_coarse = a.max_dev_Mp;
  out.dev_Mp_fine = b.max_dev_Mp;
  out.dev_Mpp_coarse = a.max_dev_Mpp;
  out.dev_Mpp_fine = b.max_dev_Mpp;
  out.ratio_Mp = a.max_dev_Mp / b.max_dev_Mp;
  out.ratio_Mpp = a.max_dev_Mpp / b.max_dev_Mpp;
  return out;
}

// ---------------------------------------------------------------------------
// Exponential decay fits.

struct DecayFit {
  double lambda_fit = 0.0;
  double c_fit = 0.0;
  double r_squared = 0.0;
  double t0 = 0.0;
  double t1 = 0.0;
  std::size_t points = 0;
};

/// Least squares of log E against t over [t0, t1]. Samples are taken up to the
/// first one with E below 1e-14 E(first sample).
inline DecayFit fit_decay(std::span<const double> t, std::span<const double> energy, double t0,
                          double t1) {
  ensure(t.size() == energy.size(), Errc::SizeMismatch, "time and energy series differ");
  ensure(!energy.empty(), Errc::InsufficientSamples, "empty series");
  const double floor = 1e-14 * energy.front();
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(energy[i] > floor) || !(energy[i] > 0.0)) break;
    if (t[i] < t0 || t[i] > t1) continue;
    xs.push_back(t[i]);
    ys.push_back(std::log(energy[i]));
  }
  ensure(xs.size() >= 3, Errc::NonPositiveEnergy,
         "fewer than 3 positive energy samples in the fit window");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  DecayFit f;
  const double slope = sxy / sxx;
  f.lambda_fit = -slope;
  f.c_fit = std::exp(my - slope * mx);
  f.r_squared = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
  f.t0 = xs.front();
  f.t1 = xs.back();
  f.points = xs.size();
  return f;
}

/// Default window: the last 60% of the run.
inline DecayFit fit_decay(const Trajectory& tr, double t0 = -1.0, double t1 = -1.0) {
  ensure(!tr.samples.empty(), Errc::InsufficientSamples, "empty trajectory");
  std::vector<double> t, e;
  for (const auto& s : tr.samples) {
    t.push_back(s.t);
    e.push_back(s.E);
  }
  const double start = t.front(), end = t.back();
  if (t0 < 0.0) t0 = end - 0.6 * (end - start);
  if (t1 < 0.0) t1 = end;
  return fit_decay(t, e, t0, t1);
}

// ---------------------------------------------------------------------------
// Geometric control on an interval: reflecting rays must meet the core [a, b].

struct GccResult {
  bool holds = false;
  double L_control = std::numeric_limits<double>::infinity();
};

inline GccResult gcc_check_1d(const Domain& d, const DampingProfile& g) {
  const double len = d.extent();
  const auto [a, b] = g.core(len);
  GccResult r;
  if (!(b > a)) return r;
  r.holds = true;
  r.L_control = 2.0 * std::max(a, len - b) + (b - a);
  return r;
}

// ---------------------------------------------------------------------------
// Observability ratio E(t0) / int_{t0}^{t0+T} int gamma |u_t|^2.

struct ObservabilityReport {
  double t0 = 0.0;
  double T_window = 0.0;
  double energy = 0.0;
  double dissipated = 0.0;
  double ratio = 0.0;
  std::vector<TrajectorySample> samples;  // samples inside the window
};

namespace detail {

struct Interpolated {
  double E;
  double dissipated;
};

inline Interpolated interpolate_at(const std::vector<TrajectorySample>& s, double t) {
  const double eps = 1e-9 * (1.0 + std::abs(t));
  auto it = std::lower_bound(s.begin(), s.end(), t - eps,
                             [](const TrajectorySample& x, double v) { return x.t < v; });
  if (it != s.end() && std::abs(it->t - t) <= eps) return {it->E, it->dissipated};
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double w = (t - lo.t) / (hi.t - lo.t);
  return {lo.E + w * (hi.E - lo.E), lo.dissipated + w * (hi.dissipated - lo.dissipated)};
}

}  // namespace detail

inline ObservabilityReport observability_ratio(const Domain&, const DampingProfile& g,
                                               const Trajectory& tr, double t0, double T) {
  ensure(T > 0.0, Errc::WindowOutOfRange, "observation time must be positive");
  ensure(!tr.samples.empty(), Errc::WindowOutOfRange, "empty trajectory");
  const double eps = 1e-9 * (1.0 + std::abs(t0 + T));
  ensure(t0 >= tr.samples.front().t - eps && t0 + T <= tr.samples.back().t + eps,
         Errc::WindowOutOfRange,
         "window [" + std::to_string(t0) + ", " + std::to_string(t0 + T) +
             "] not covered by the trajectory");
  ensure(!g.vanishes, Errc::NoDissipation, "damping vanishes identically");
  const auto start = detail::interpolate_at(tr.samples, t0);
  const auto stop = detail::interpolate_at(tr.samples, t0 + T);
  ObservabilityReport r;
  r.t0 = t0;
  r.T_window = T;
  r.energy = start.E;
  r.dissipated = stop.dissipated - start.dissipated;
  ensure(r.dissipated > 0.0, Errc::NoDissipation, "no energy dissipated in the window");
  r.ratio = r.energy / r.dissipated;
  for (const auto& s : tr.samples)
    if (s.t >= t0 - eps && s.t <= t0 + T + eps) r.samples.push_back(s);
  return r;
}

struct RatioSpread {
  double max = 0.0;
  double median = 0.0;
  double max_over_median = 0.0;
  bool bounded = false;
};

/// Uniformity of observability ratios across a family of initial data.
inline RatioSpread ratio_spread(std::vector<double> ratios, double bound = 10.0) {
  ensure(!ratios.empty(), Errc::InsufficientSamples, "no ratios");
  std::sort(ratios.begin(), ratios.end());
  const std::size_t n = ratios.size();
  RatioSpread r;
  r.max = ratios.back();
  r.median = n % 2 ? ratios[n / 2] : 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]);
  r.max_over_median = r.max / r.median;
  r.bounded = r.max_over_median <= bound;
  return r;
}

// ---------------------------------------------------------------------------
// E_eps = E + eps int u u_t and the sandwich E/2 <= E_eps <= 3E/2.

struct LyapunovReport {
  double E = 0.0;
  double E_eps = 0.0;
  bool sandwich_ok = false;
  double eps0 = 0.0;  // sandwich holds for every eps in [0, eps0]
};

inline LyapunovReport lyapunov_eps(double energy, double u_ut, double eps) {
  auto holds = [&](double e) {
    const double v = energy + e * u_ut;
    return 0.5 * energy <= v && v <= 1.5 * energy;
  };
  LyapunovReport r;
  r.E = energy;
  r.E_eps = energy + eps * u_ut;
  r.sandwich_ok = holds(eps);
  double hi = 1.0;
  while (holds(hi) && hi < 1e12) hi *= 2.0;
  if (holds(hi)) {
    r.eps0 = std::numeric_limits<double>::infinity();
  } else {
    r.eps0 = bisect(0.0, hi, [&](double e) { return !holds(e); }, 200, 1e-12).lo;
  }
  return r;
}

inline LyapunovReport lyapunov_eps(const Domain& d, const DampingProfile& g,
                                   const WellConstants& wc, const State& s, double eps) {
  const auto sample = make_sample(d, g, s);
  ensure(classify(wc, {sample.J, sample.E, sample.K}).verdict == Verdict::KPlus, Errc::NotKPlus,
         "state is not in the stable set");
  return lyapunov_eps(sample.E, sample.u_ut, eps);
}

// ---------------------------------------------------------------------------
// Convergence to the stationary set {0, Q, -Q}.

enum class Equilibrium { Zero, PlusQ, MinusQ, Undecided };

inline std::string to_string(Equilibrium e) {
  switch (e) {
    case Equilibrium::Zero: return "Zero";
    case Equilibrium::PlusQ: return "PlusQ";
    case Equilibrium::MinusQ: return "MinusQ";
    case Equilibrium::Undecided: return "Undecided";
  }
  return "?";
}

struct EquilibriumReport {
  Equilibrium verdict = Equilibrium::Undecided;
  double distance = 0.0;  // min over {0, Q, -Q} of ||u - w||_{H^1_0} + ||u_t||_{L^2}
  double energy = 0.0;
  double nearest_level = 0.0;  // 0 or d
  double level_gap = 0.0;
};

inline EquilibriumReport detect_equilibrium(const Domain& d, const GroundState& gs,
                                            const State& s, double rel_radius = 0.05) {
  const auto c = forward_transform(d, s.u), ct = forward_transform(d, s.ut);
  const double kinetic = std::sqrt(l2_norm_sq(d, ct));
  auto dist = [&](double sign) {
    auto diff = c;
    for (std::size_t k = 0; k < diff.size(); ++k) diff[k] -= sign * gs.coeffs[k];
    return std::sqrt(h01_norm_sq(d, diff)) + kinetic;
  };
  const double candidates[] = {dist(0.0), dist(1.0), dist(-1.0)};
  const Equilibrium labels[] = {Equilibrium::Zero, Equilibrium::PlusQ, Equilibrium::MinusQ};
  const auto best = static_cast<std::size_t>(
      std::min_element(std::begin(candidates), std::end(candidates)) - std::begin(candidates));
  EquilibriumReport r;
  r.distance = candidates[best];
  const double radius = rel_radius * std::sqrt(h01_norm_sq(d, gs.coeffs));
  r.verdict = r.distance < radius ? labels[best] : Equilibrium::Undecided;
  r.energy = energies(d, c, ct).E;
  r.nearest_level = std::abs(r.energy) <= std::abs(r.energy - gs.d_level) ? 0.0 : gs.d_level;
  r.level_gap = std::abs(r.energy - r.nearest_level);
  return r;
}

/// Uses the stored state closest to t_tail (the final state when t_tail is at
/// or past the end of the run).
inline EquilibriumReport detect_equilibrium(const Domain& d, const GroundState& gs,
                                            const Trajectory& tr, double t_tail) {
  ensure(tr.cause == Termination::Completed, Errc::PreconditionViolated,
         "equilibrium detection needs a completed run");
  if (tr.states.empty() || t_tail >= tr.final_state.t) return detect_equilibrium(d, gs, tr.final_state);
  const auto it = std::min_element(tr.states.begin(), tr.states.end(),
                                   [&](const State& a, const State& b) {
                                     return std::abs(a.t - t_tail) < std::abs(b.t - t_tail);
                                   });
  return detect_equilibrium(d, gs, *it);
}

}  // namespace pwlab
