// Time integration of  u_tt + gamma u_t + (-Delta + beta) u = sigma u^3
// with Dirichlet conditions (sigma = 1 is the focusing equation).
//
// Symmetric splitting into three exactly solvable flows: damping v' = -gamma v
// (the matrix exponential of the projected damping operator), the frozen-u kick
// v' = sigma u^3 (projected from the padded grid), and the per-mode rotation of
// the linear wave operator. The kick is filtered so that stationary solutions
// are fixed points of the step. The ledger tracks
// E(t) - E(0) + int_0^t int gamma |u_t|^2 with the dissipation integrated by
// the trapezoid rule in time, so the energy equality is measured, not imposed.
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pwlab/functionals.hpp"
#include "pwlab/spectral_domain.hpp"

namespace pwlab {

enum class DampingKind { Zero, Constant, Indicator, Smooth };

inline std::string to_string(DampingKind k) {
  switch (k) {
    case DampingKind::Zero: return "zero";
    case DampingKind::Constant: return "constant";
    case DampingKind::Indicator: return "indicator";
    case DampingKind::Smooth: return "smooth";
  }
  return "?";
}

struct DampingSpec {
  DampingKind kind = DampingKind::Zero;
  double alpha = 0.0;
  double a = 0.0;  // core region [a, b] for Indicator and Smooth
  double b = 0.0;

  bool operator==(const DampingSpec&) const = default;
};

struct DampingProfile {
  DampingSpec spec;
  Field values;  // gamma at the collocation nodes
  bool vanishes = true;
  bool uniform = false;  // gamma constant on the whole domain
  // Projected damping operator G_kl = (2/L) int gamma s_k s_l and its
  // eigendecomposition, used for the exact damping flow exp(-tau G).
  Eigen::MatrixXd modal;
  Eigen::MatrixXd modes;
  Eigen::VectorXd rates;

  /// Core region where gamma >= alpha, clipped to the domain; empty when a >= b.
  std::pair<double, double> core(double extent) const {
    switch (spec.kind) {
      case DampingKind::Zero: return {0.0, 0.0};
      case DampingKind::Constant: return {0.0, extent};
      default: return {std::max(0.0, spec.a), std::min(extent, spec.b)};
    }
  }
};

namespace detail {

// C-infinity step from 0 (t <= 0) to 1 (t >= 1).
inline double smooth_step(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double f = std::exp(-1.0 / t), g = std::exp(-1.0 / (1.0 - t));
  return f / (f + g);
}

}  // namespace detail

inline double damping_at(const DampingSpec& s, double x) {
  switch (s.kind) {
    case DampingKind::Zero: return 0.0;
    case DampingKind::Constant: return s.alpha;
    case DampingKind::Indicator: return (x >= s.a && x <= s.b) ? s.alpha : 0.0;
    case DampingKind::Smooth: {
      // alpha on [a, b], smooth ramp to zero over a quarter of the core width.
      const double ramp = 0.25 * (s.b - s.a);
      if (x >= s.a && x <= s.b) return s.alpha;
      if (x < s.a) return s.alpha * detail::smooth_step(1.0 - (s.a - x) / ramp);
      return s.alpha * detail::smooth_step(1.0 - (x - s.b) / ramp);
    }
  }
  return 0.0;
}

inline DampingProfile make_damping(const Domain& d, const DampingSpec& s) {
  if (s.kind != DampingKind::Zero)
    ensure(s.alpha > 0.0, Errc::InvalidSpec, "damping level alpha must be positive");
  if (s.kind == DampingKind::Indicator || s.kind == DampingKind::Smooth)
    ensure(s.b > s.a, Errc::InvalidSpec, "damping core needs a < b");
  DampingProfile p;
  p.spec = s;
  p.values = sample(d, [&](double x) { return damping_at(s, x); });
  const auto n = static_cast<Eigen::Index>(d.n_modes());
  const double len = d.extent();
  const auto [lo, hi] = p.core(len);
  p.vanishes = s.kind == DampingKind::Zero ||
               (s.kind == DampingKind::Indicator && !(hi > lo));
  p.uniform = p.vanishes || s.kind == DampingKind::Constant;
  if (p.uniform) {
    const double level = p.vanishes ? 0.0 : s.alpha;
    p.modal = level * Eigen::MatrixXd::Identity(n, n);
    p.modes = Eigen::MatrixXd::Identity(n, n);
    p.rates = Eigen::VectorXd::Constant(n, level);
    return p;
  }

  // Composite Gauss-Legendre with breakpoints at every kink of gamma.
  std::vector<double> cuts{0.0, len};
  auto add_cut = [&](double x) {
    if (x > 0.0 && x < len) cuts.push_back(x);
  };
  add_cut(s.a);
  add_cut(s.b);
  if (s.kind == DampingKind::Smooth) {
    add_cut(s.a - 0.25 * (s.b - s.a));
    add_cut(s.b + 0.25 * (s.b - s.a));
  }
  std::sort(cuts.begin(), cuts.end());
  const std::size_t per_piece = 4 * d.n_modes() + 16;
  Eigen::MatrixXd weighted = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t piece = 0; piece + 1 < cuts.size(); ++piece) {
    if (!(cuts[piece + 1] > cuts[piece])) continue;
    std::vector<double> x, w;
    detail::gauss_legendre(per_piece, cuts[piece], cuts[piece + 1], x, w);
    Eigen::MatrixXd basis(static_cast<Eigen::Index>(x.size()), n);
    Eigen::VectorXd wg(static_cast<Eigen::Index>(x.size()));
    for (std::size_t q = 0; q < x.size(); ++q) {
      wg(static_cast<Eigen::Index>(q)) = w[q] * damping_at(s, x[q]);
      for (Eigen::Index k = 0; k < n; ++k)
        basis(static_cast<Eigen::Index>(q), k) =
            std::sin(static_cast<double>(k + 1) * std::numbers::pi * x[q] / len);
    }
    weighted.noalias() += basis.transpose() * wg.asDiagonal() * basis;
  }
  p.modal = (2.0 / len) * weighted;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(p.modal);
  p.modes = eig.eigenvectors();
  p.rates = eig.eigenvalues().cwiseMax(0.0);
  return p;
}

struct EnergyLedger {
  double E = 0.0;
  double J = 0.0;
  double K = 0.0;
  double dissipated = 0.0;         // int_0^t int gamma |u_t|^2
  double equality_residual = 0.0;  // |E(t) - E(0) + dissipated|
  double initial_energy = 0.0;
  double dissipation_rate = 0.0;   // int gamma |u_t|^2 at the current time
};

struct State {
  Field u;
  Field ut;
  double t = 0.0;
  EnergyLedger ledger;
};

struct StepReport {
  double dt_used = 0.0;
  bool blow_up = false;
  double h01_norm = 0.0;
};

struct DynamicsOptions {
  double dt = 0.01;
  double nonlinearity = 1.0;        // sigma in front of u^3
  double blowup_factor = 1e3;
  double reference_h01 = 0.0;       // ||Q||_{H^1_0}; enters the blow-up threshold
  double blowup_threshold = 0.0;    // set by evolve; 0 disables the check in step
  double growth_limit = 0.1;        // relative H^1_0 growth per step that triggers halving
  int max_halvings = 20;
  int sample_every = 1;
  bool keep_states = false;
};

/// Exact flow of u_tt + (-Delta + beta) u = 0 for time dt (dt may be negative).
namespace detail {

// cos and sin of theta, nudged by a few ulps so that cs^2 + sn^2 is as close to
// 1 as double allows. A fixed rounding bias in the norm would otherwise grow
// linearly with the step count.
inline std::pair<double, double> unit_rotation(double theta) {
  const double c0 = std::cos(theta), s0 = std::sin(theta);
  auto defect = [](double cs, double sn) {
    const long double x = cs, y = sn;
    return std::abs(static_cast<double>(x * x + y * y - 1.0L));
  };
  std::pair<double, double> best{c0, s0};
  double best_defect = defect(c0, s0);
  double cs = c0;
  for (int i = 0; i < 2; ++i) cs = std::nextafter(cs, -INFINITY);
  for (int i = -2; i <= 2; ++i, cs = std::nextafter(cs, INFINITY)) {
    const long double rest = 1.0L - static_cast<long double>(cs) * cs;
    if (rest < 0.0L) continue;
    const double sn = std::copysign(static_cast<double>(std::sqrt(rest)), s0);
    for (double cand : {std::nextafter(sn, -INFINITY), sn, std::nextafter(sn, INFINITY)}) {
      const double e = defect(cs, cand);
      if (e < best_defect) {
        best_defect = e;
        best = {cs, cand};
      }
    }
  }
  return best;
}

}  // namespace detail

inline void linear_propagator(const Domain& d, SpectralCoeffs& c, SpectralCoeffs& ct, double dt) {
  d.check_modes(c);
  d.check_modes(ct);
  const auto& w = d.frequencies();
  for (std::size_t k = 0; k < c.size(); ++k) {
    // Rotate (omega c, ct), the pair whose norm is the linear energy.
    const auto [cs, sn] = detail::unit_rotation(w[k] * dt);
    const double p = w[k] * c[k], b = ct[k];
    c[k] = (cs * p + sn * b) / w[k];
    ct[k] = -sn * p + cs * b;
  }
}

/// sum_k (omega_k^2 c_k^2 + ct_k^2), conserved by linear_propagator.
inline double linear_energy(const Domain& d, const SpectralCoeffs& c, const SpectralCoeffs& ct) {
  const auto& w = d.frequencies();
  double acc = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) acc += w[k] * w[k] * c[k] * c[k] + ct[k] * ct[k];
  return acc;
}

/// Splitting guard: a tenth of the slowest linear period.
inline double dt_max(const Domain& d) {
  return 0.2 * std::numbers::pi / d.frequencies().front();
}

namespace detail {

/// measure * (L/2) * a^T G b, i.e. int gamma f g for band-limited f, g.
inline double damped_inner(const Domain& d, const DampingProfile& g, const SpectralCoeffs& a,
                           const SpectralCoeffs& b) {
  if (g.vanishes) return 0.0;
  const auto n = static_cast<Eigen::Index>(a.size());
  const Eigen::Map<const Eigen::VectorXd> va(a.coeffs.data(), n), vb(b.coeffs.data(), n);
  return 0.5 * d.extent() * d.measure() * va.dot(g.modal * vb);
}

inline double dissipation_rate(const Domain& d, const DampingProfile& g, const SpectralCoeffs& ct) {
  return damped_inner(d, g, ct, ct);
}

// Exact flow of v' = -G v in coefficient space for time tau.
inline void damping_flow(const DampingProfile& g, SpectralCoeffs& ct, double tau) {
  if (g.vanishes) return;
  if (g.uniform) {
    const double decay = std::exp(-g.spec.alpha * tau);
    for (double& v : ct.coeffs) v *= decay;
    return;
  }
  const auto n = static_cast<Eigen::Index>(ct.size());
  Eigen::Map<Eigen::VectorXd> v(ct.coeffs.data(), n);
  Eigen::VectorXd modal = g.modes.transpose() * v;
  for (Eigen::Index k = 0; k < n; ++k) modal(k) *= std::exp(-g.rates(k) * tau);
  v = g.modes * modal;
}

// Kick filter tan(theta/2) / (theta/2). With it, kick-rotate-kick maps a
// stationary solution exactly onto itself. Capped at theta = 2 to stay away
// from the pole at pi; modes past the cap carry no weight in smooth states.
inline double kick_filter(double theta) {
  const double half = 0.5 * std::min(std::abs(theta), 2.0);
  if (half < 1e-4) return 1.0 + half * half / 3.0;
  return std::tan(half) / half;
}

// ct += tau * filter(omega_k dt) * P(sigma u^3), with u frozen.
inline void nonlinear_kick(const Domain& d, double sigma, const SpectralCoeffs& c,
                           SpectralCoeffs& ct, double tau, double dt) {
  if (sigma == 0.0) return;
  const auto force = d.cubic_term(c);
  const auto& w = d.frequencies();
  for (std::size_t k = 0; k < ct.size(); ++k)
    ct[k] += tau * sigma * kick_filter(w[k] * dt) * force[k];
}

}  // namespace detail

/// Builds a state with a fresh ledger (dissipated = 0).
inline State make_state(const Domain& d, const DampingProfile& g, Field u, Field ut,
                        double sigma = 1.0, double t = 0.0) {
  d.check_field(u);
  d.check_field(ut);
  State s{std::move(u), std::move(ut), t, {}};
  const auto c = forward_transform(d, s.u), ct = forward_transform(d, s.ut);
  const auto e = energies(norms(d, c, ct), sigma);
  s.ledger.E = e.E;
  s.ledger.J = e.J;
  s.ledger.K = e.K;
  s.ledger.initial_energy = e.E;
  s.ledger.dissipation_rate = detail::dissipation_rate(d, g, ct);
  return s;
}

struct StepResult {
  State state;
  StepReport report;
  SpectralCoeffs c;  // coefficients of state.u and state.ut
  SpectralCoeffs ct;
};

namespace detail {

// step() on coefficients already transformed from s; evolve carries them from
// one step to the next instead of transforming u and ut again.
inline StepResult step_coeffs(const Domain& d, const DampingProfile& g, const State& s,
                              SpectralCoeffs c, SpectralCoeffs ct, double dt,
                              const DynamicsOptions& opts) {
  detail::damping_flow(g, ct, 0.5 * dt);
  detail::nonlinear_kick(d, opts.nonlinearity, c, ct, 0.5 * dt, dt);
  linear_propagator(d, c, ct, dt);
  detail::nonlinear_kick(d, opts.nonlinearity, c, ct, 0.5 * dt, dt);
  detail::damping_flow(g, ct, 0.5 * dt);

  StepResult out;
  out.state.u = inverse_transform(d, c);
  out.state.ut = inverse_transform(d, ct);
  out.state.t = s.t + dt;
  const auto n = norms(d, c, ct);
  const auto e = energies(n, opts.nonlinearity);
  auto& led = out.state.ledger;
  led = s.ledger;
  led.E = e.E;
  led.J = e.J;
  led.K = e.K;
  led.dissipation_rate = detail::dissipation_rate(d, g, ct);
  led.dissipated += 0.5 * dt * (s.ledger.dissipation_rate + led.dissipation_rate);
  led.equality_residual = std::abs(led.E - led.initial_energy + led.dissipated);

  out.report.dt_used = dt;
  out.report.h01_norm = std::sqrt(n.h01_sq);
  const bool finite = std::isfinite(e.E) && std::isfinite(led.dissipated) &&
                      std::isfinite(out.report.h01_norm);
  if (!finite) throw Error(Errc::NonFinite, "non-finite state at t = " + std::to_string(out.state.t));
  out.report.blow_up = opts.blowup_threshold > 0.0 && out.report.h01_norm > opts.blowup_threshold;
  out.c = std::move(c);
  out.ct = std::move(ct);
  return out;
}

}  // namespace detail

/// One step of size dt: damping(dt/2) kick(dt/2) rotate(dt) kick(dt/2) damping(dt/2).
/// Throws NonFinite; blow-up is flagged in the report.
inline StepResult step(const Domain& d, const DampingProfile& g, const State& s, double dt,
                       const DynamicsOptions& opts = {}) {
  ensure(dt > 0.0 && dt <= dt_max(d), Errc::InvalidSpec,
         "dt = " + std::to_string(dt) + " outside (0, dt_max]");
  auto c = forward_transform(d, s.u);
  auto ct = forward_transform(d, s.ut);
  return detail::step_coeffs(d, g, s, std::move(c), std::move(ct), dt, opts);
}

struct TrajectorySample {
  double t = 0.0;
  double E = 0.0;
  double J = 0.0;
  double K = 0.0;
  double h01 = 0.0;         // ||u||_{H^1_0}
  double l2t = 0.0;         // ||u_t||_{L^2}
  double dissipated = 0.0;
  double residual = 0.0;
  double h01_sq = 0.0;
  double l4_4 = 0.0;
  double l2t_sq = 0.0;
  double mass = 0.0;        // M = ||u||^2_{L^2}
  double u_ut = 0.0;        // int u u_t
  double gamma_u_ut = 0.0;  // int gamma u u_t
  double dissipation_rate = 0.0;
};

enum class Termination { Completed, BlowUp, NonFinite };

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::Completed: return "Completed";
    case Termination::BlowUp: return "BlowUp";
    case Termination::NonFinite: return "NonFinite";
  }
  return "?";
}

struct Trajectory {
  std::vector<TrajectorySample> samples;
  std::vector<State> states;  // parallel to samples when keep_states is set
  State final_state;
  Termination cause = Termination::Completed;
  double t_detect = 0.0;  // time of blow-up detection (an upper proxy, not the blow-up time)
  int halvings = 0;
  double dt_final = 0.0;
  double blowup_threshold = 0.0;
};

inline TrajectorySample make_sample(const Domain& d, const DampingProfile& g, const State& s,
                                    double sigma = 1.0) {
  const auto c = forward_transform(d, s.u), ct = forward_transform(d, s.ut);
  const auto n = norms(d, c, ct);
  const auto e = energies(n, sigma);
  TrajectorySample out;
  out.t = s.t;
  out.E = e.E;
  out.J = e.J;
  out.K = e.K;
  out.h01_sq = n.h01_sq;
  out.l4_4 = n.l4_4;
  out.l2t_sq = n.l2t_sq;
  out.h01 = std::sqrt(n.h01_sq);
  out.l2t = std::sqrt(n.l2t_sq);
  out.dissipated = s.ledger.dissipated;
  out.residual = std::abs(e.E - s.ledger.initial_energy + s.ledger.dissipated);
  out.mass = l2_norm_sq(d, c);
  out.u_ut = l2_inner(d, c, ct);
  out.dissipation_rate = s.ledger.dissipation_rate;
  out.gamma_u_ut = detail::damped_inner(d, g, c, ct);
  return out;
}

using Observer = std::function<void(const State&, const TrajectorySample&)>;

/// Advances s0 to t_end with fixed dt. Above the ground-state scale, a step
/// whose H^1_0 norm grows by more than growth_limit is rejected and dt is
/// halved for the rest of the run; exceeding the blow-up threshold or running
/// out of halvings ends the run as BlowUp.
inline Trajectory evolve(const Domain& d, const DampingProfile& g, const State& s0, double t_end,
                         DynamicsOptions opts = {}, const Observer& observer = {}) {
  Trajectory tr;
  const double h0 = std::sqrt(h01_norm_sq(d, s0.u));
  opts.blowup_threshold = opts.blowup_factor * std::max(h0, opts.reference_h01);
  tr.blowup_threshold = opts.blowup_threshold;

  auto record = [&](const State& s) {
    auto sample = make_sample(d, g, s, opts.nonlinearity);
    if (observer) observer(s, sample);
    tr.samples.push_back(sample);
    if (opts.keep_states) tr.states.push_back(s);
  };

  State s = s0;
  record(s);
  auto c = forward_transform(d, s.u);
  auto ct = forward_transform(d, s.ut);
  double dt = opts.dt;
  ensure(dt > 0.0 && dt <= dt_max(d), Errc::InvalidSpec,
         "dt = " + std::to_string(dt) + " outside (0, dt_max]");
  double h01_prev = h0;
  long accepted = 0;
  bool sampled_last = true;
  // Clock as t_base + k dt rather than a running sum, so sample times land on
  // multiples of dt.
  double t_base = s0.t;
  long k_at_dt = 0;
  // Growth control only engages above the ground-state scale: a state with
  // K < 0 below level d already has ||u||_{H^1_0} > ||Q||_{H^1_0}.
  const double growth_floor =
      opts.reference_h01 > 0.0
          ? opts.reference_h01
          : std::sqrt(h01_norm_sq(d, s0.u) + l2_norm_sq(d, s0.ut));

  while (t_end - s.t > 1e-9 * dt) {
    const double h = std::min(dt, t_end - s.t);
    StepResult r;
    bool finite = true;
    try {
      r = detail::step_coeffs(d, g, s, c, ct, h, opts);
    } catch (const Error& e) {
      if (e.code() != Errc::NonFinite) throw;
      finite = false;
    }
    const bool too_fast =
        !finite ||
        (h01_prev > growth_floor && r.report.h01_norm > (1.0 + opts.growth_limit) * h01_prev);
    if (too_fast) {
      if (tr.halvings >= opts.max_halvings) {
        tr.cause = finite ? Termination::BlowUp : Termination::NonFinite;
        tr.t_detect = s.t;
        break;
      }
      dt *= 0.5;
      ++tr.halvings;
      t_base = s.t;
      k_at_dt = 0;
      continue;
    }
    s = std::move(r.state);
    c = std::move(r.c);
    ct = std::move(r.ct);
    if (h == dt) s.t = t_base + static_cast<double>(++k_at_dt) * dt;
    if (t_end - s.t <= 1e-9 * dt) s.t = t_end;
    h01_prev = r.report.h01_norm;
    ++accepted;
    sampled_last = false;
    if (r.report.blow_up) {
      tr.cause = Termination::BlowUp;
      tr.t_detect = s.t;
      break;
    }
    if (accepted % opts.sample_every == 0) {
      record(s);
      sampled_last = true;
    }
  }
  if (!sampled_last) record(s);
  tr.dt_final = dt;
  tr.final_state = std::move(s);
  return tr;
}

/// Runs the equation from (u0, ut0) and the equation with nonlinearity
/// alpha^2 sigma from (u0/alpha, ut0/alpha); returns max_t ||u_a/alpha - u_b||_{H^1_0}.
inline double scaled_covariance_check(const Domain& d, const DampingProfile& g, const Field& u0,
                                      const Field& ut0, double alpha, double t_end,
                                      DynamicsOptions opts = {}) {
  ensure(alpha > 0.0, Errc::InvalidSpec, "scale must be positive");
  std::vector<SpectralCoeffs> a_states, b_states;
  std::vector<double> a_times, b_times;
  auto collect = [&d](std::vector<SpectralCoeffs>& out, std::vector<double>& times) {
    return [&d, &out, &times](const State& s, const TrajectorySample&) {
      out.push_back(forward_transform(d, s.u));
      times.push_back(s.t);
    };
  };
  const double sigma = opts.nonlinearity;
  evolve(d, g, make_state(d, g, u0, ut0, sigma), t_end, opts, collect(a_states, a_times));
  opts.nonlinearity = sigma * alpha * alpha;
  opts.reference_h01 /= alpha;
  evolve(d, g, make_state(d, g, scaled(u0, 1.0 / alpha), scaled(ut0, 1.0 / alpha), sigma * alpha * alpha),
         t_end, opts, collect(b_states, b_times));

  double worst = 0.0;
  const std::size_t m = std::min(a_states.size(), b_states.size());
  for (std::size_t i = 0; i < m; ++i) {
    if (a_times[i] != b_times[i]) break;
    auto diff = scaled(a_states[i], 1.0 / alpha);
    for (std::size_t k = 0; k < diff.size(); ++k) diff[k] -= b_states[i][k];
    worst = std::max(worst, std::sqrt(h01_norm_sq(d, diff)));
  }
  return worst;
}

namespace detail {

inline void append_double(std::string& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

}  // namespace detail

inline constexpr const char* kTrajectoryCsvHeader = "t,E,J,K,h01,l2t,dissipated,residual";

/// CSV with shortest round-trip decimals.
inline std::string trajectory_csv(const Trajectory& tr) {
  std::string out = kTrajectoryCsvHeader;
  out += '\n';
  for (const auto& s : tr.samples) {
    const double row[] = {s.t, s.E, s.J, s.K, s.h01, s.l2t, s.dissipated, s.residual};
    for (std::size_t i = 0; i < std::size(row); ++i) {
      if (i) out += ',';
      detail::append_double(out, row[i]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace pwlab
