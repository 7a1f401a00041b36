// Shared fixtures: reference domains and their ground states, built once.
#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "pwlab/dynamics.hpp"
#include "pwlab/ground_state.hpp"

namespace pwtest {

using namespace pwlab;

inline constexpr double kPi = std::numbers::pi;

// Independent reference values (scipy BVP / adaptive shooting, frozen).
inline constexpr double kIntervalD = 1.96431031256582;
inline constexpr double kIntervalQMax = 1.708461758995;   // Q(pi/2)
inline constexpr double kIntervalSlope = 1.158005400812;  // Q'(0)
inline constexpr double kBallD = 19.0677497655789;
inline constexpr double kBallCenter = 4.39977407394754;   // u(0)

inline DomainSpec interval_spec(int n = 128, double beta = 1.0) {
  return {Geometry::Interval, kPi, n, beta, true};
}

inline DomainSpec ball_spec(int n = 64, double beta = 1.0) {
  return {Geometry::RadialBall, kPi, n, beta, true};
}

struct Reference {
  Domain domain;
  GroundState gs;
  WellConstants wc;
};

inline Reference make_reference(const DomainSpec& spec) {
  auto d = build_domain(spec);
  auto gs = petviashvili_solve(d);
  auto wc = well_constants(d, gs);
  return {std::move(d), std::move(gs), wc};
}

inline const Reference& interval_ref() {
  static const Reference r = make_reference(interval_spec());
  return r;
}

inline const Reference& small_interval_ref() {
  static const Reference r = make_reference(interval_spec(32));
  return r;
}

inline const Reference& ball_ref() {
  static const Reference r = make_reference(ball_spec());
  return r;
}

inline SpectralCoeffs random_coeffs(std::size_t n, std::mt19937_64& rng, double decay = 1.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  SpectralCoeffs c{std::vector<double>(n)};
  for (std::size_t k = 0; k < n; ++k) c[k] = normal(rng) / std::pow(static_cast<double>(k + 1), decay);
  return c;
}

inline Field random_field(const Domain& d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Field f{std::vector<double>(d.n_nodes())};
  for (auto& v : f.values) v = normal(rng);
  return f;
}

inline double max_abs_diff(const Field& a, const Field& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs(const Field& a) {
  double m = 0.0;
  for (double v : a.values) m = std::max(m, std::abs(v));
  return m;
}

// Composite Simpson on [a, b] with m (even) panels; independent of the library quadrature.
template <class F>
double simpson(F&& f, double a, double b, int m = 20000) {
  const double h = (b - a) / m;
  double s = f(a) + f(b);
  for (int i = 1; i < m; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

}  // namespace pwtest
