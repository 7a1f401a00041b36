// Dirichlet sine-spectral discretization of an interval or of the radial
// reduction of a 3D ball.
//
// Fields live on the n interior collocation nodes x_j = j L / (n + 1) and are
// in one-to-one correspondence with n sine coefficients through a DST-I.
// Nonlinear terms and quartic integrals are evaluated on a zero-padded grid of
// 2n + 1 nodes (when dealiasing is on), which makes the interval integral of
// u^4 exact for band-limited u and removes aliasing from the projection of u^3.
//
// On the ball the stored unknown is v = r u. The Laplacian becomes a 1D second
// derivative on v, and every integral is a true 3D integral (the 4 pi factor
// is included):
//   int |grad u|^2 + beta u^2 = 4 pi int v'^2 + beta v^2 dr
//   int u^2                    = 4 pi int v^2 dr
//   int u^4                    = 4 pi int v^4 / r^2 dr
// The quartic ball integral uses Gauss-Legendre nodes in r, which cluster
// near r = 0 and never evaluate the removable singularity.
#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pwlab/error.hpp"

namespace pwlab {

enum class Geometry { Interval, RadialBall };

inline std::string to_string(Geometry g) {
  return g == Geometry::Interval ? "interval" : "radial_ball";
}

struct DomainSpec {
  Geometry geometry = Geometry::Interval;
  double extent = std::numbers::pi;  // L for the interval, R for the ball
  int n_modes = 128;
  double beta = 1.0;
  bool dealias = true;
};

/// Grid values at the interior collocation nodes (v = r u on the ball).
struct Field {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
};

/// Coefficients of u = sum_k c_k sin(k pi x / L), k = 1..n.
struct SpectralCoeffs {
  std::vector<double> coeffs;

  std::size_t size() const { return coeffs.size(); }
  double& operator[](std::size_t i) { return coeffs[i]; }
  double operator[](std::size_t i) const { return coeffs[i]; }
};

namespace detail {

// sin(pi * k * j / m) with the argument reduced exactly in integers.
inline double sin_pi_ratio(long long k, long long j, long long m) {
  const long long r = (k * j) % (2 * m);
  return std::sin(std::numbers::pi * static_cast<double>(r) / static_cast<double>(m));
}

struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  void apply(std::span<const double> x, std::span<double> y, double scale = 1.0) const {
    for (std::size_t i = 0; i < rows; ++i) {
      const double* row = data.data() + i * cols;
      double acc = 0.0;
      for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
      y[i] = scale * acc;
    }
  }
};

// Sine synthesis matrix S(j, k) = sin(pi k (j+1) / (nodes+1)), j < nodes, k < modes.
inline DenseMatrix sine_synthesis(std::size_t nodes, std::size_t modes) {
  DenseMatrix m{nodes, modes, std::vector<double>(nodes * modes)};
  const auto denom = static_cast<long long>(nodes + 1);
  for (std::size_t j = 0; j < nodes; ++j)
    for (std::size_t k = 0; k < modes; ++k)
      m.data[j * modes + k] = sin_pi_ratio(static_cast<long long>(k + 1),
                                           static_cast<long long>(j + 1), denom);
  return m;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t{a.cols, a.rows, std::vector<double>(a.data.size())};
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t.data[j * a.rows + i] = a.data[i * a.cols + j];
  return t;
}

// Gauss-Legendre nodes and weights on [a, b].
inline void gauss_legendre(std::size_t m, double a, double b, std::vector<double>& nodes,
                           std::vector<double>& weights) {
  nodes.assign(m, 0.0);
  weights.assign(m, 0.0);
  for (std::size_t i = 0; i < (m + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(m) + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (std::size_t k = 2; k <= m; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = p2;
      }
      dp = static_cast<double>(m) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    const double half = 0.5 * (b - a), mid = 0.5 * (b + a);
    nodes[i] = mid - half * x;
    nodes[m - 1 - i] = mid + half * x;
    weights[i] = weights[m - 1 - i] = half * w;
  }
}

}  // namespace detail

class Domain {
 public:
  const DomainSpec& spec() const { return spec_; }
  std::size_t n_modes() const { return eigenvalues_.size(); }
  std::size_t n_nodes() const { return grid_points_.size(); }
  double extent() const { return spec_.extent; }
  double beta() const { return spec_.beta; }
  bool is_ball() const { return spec_.geometry == Geometry::RadialBall; }

  /// 1 on the interval, 4 pi on the ball.
  double measure() const { return measure_; }

  const std::vector<double>& eigenvalues() const { return eigenvalues_; }
  const std::vector<double>& grid_points() const { return grid_points_; }
  const std::vector<double>& quadrature_weights() const { return quadrature_weights_; }
  const std::optional<std::vector<double>>& radial_weight() const { return radial_weight_; }

  /// Padded nodes used for nonlinear terms (same as grid_points when dealias is off).
  const std::vector<double>& fine_points() const { return fine_points_; }
  /// Trapezoid weight on the padded grid, including the measure factor.
  double fine_weight() const { return fine_weight_; }

  /// sqrt(lambda_k + beta), the linear frequencies.
  const std::vector<double>& frequencies() const { return frequencies_; }

  /// Coefficients -> values on the padded grid.
  std::vector<double> to_fine(const SpectralCoeffs& c) const {
    check_modes(c);
    std::vector<double> out(fine_points_.size());
    fine_synth_.apply(c.coeffs, out);
    return out;
  }

  /// Padded grid values -> first n sine coefficients (discrete L2 projection).
  SpectralCoeffs project_fine(std::span<const double> values) const {
    ensure(values.size() == fine_points_.size(), Errc::SizeMismatch, "padded grid size");
    SpectralCoeffs c{std::vector<double>(n_modes())};
    fine_analysis_.apply(values, c.coeffs, 2.0 / static_cast<double>(fine_points_.size() + 1));
    return c;
  }

  /// Projection of the cubic term: u^3 on the interval, v^3 / r^2 on the ball.
  SpectralCoeffs cubic_term(const SpectralCoeffs& c) const {
    auto v = to_fine(c);
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = v[j] * v[j] * v[j] * fine_inv_r2_[j];
    return project_fine(v);
  }

  /// int |u|^4 dx for the band-limited function with coefficients c.
  double quartic_integral(const SpectralCoeffs& c) const {
    check_modes(c);
    std::vector<double> v(quartic_nodes_.size());
    quartic_synth_.apply(c.coeffs, v);
    double acc = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double s = v[j] * v[j];
      acc += quartic_weights_[j] * s * s;
    }
    return acc;
  }

  void check_field(const Field& f) const {
    ensure(f.size() == n_nodes(), Errc::SizeMismatch,
           "field has " + std::to_string(f.size()) + " values, domain has " +
               std::to_string(n_nodes()) + " nodes");
  }
  void check_modes(const SpectralCoeffs& c) const {
    ensure(c.size() == n_modes(), Errc::SizeMismatch,
           "coefficient vector has " + std::to_string(c.size()) + " entries, domain has " +
               std::to_string(n_modes()) + " modes");
  }

  const detail::DenseMatrix& synthesis() const { return synth_; }
  const detail::DenseMatrix& analysis() const { return analysis_; }

 private:
  friend Domain build_domain(const DomainSpec& spec);

  DomainSpec spec_;
  double measure_ = 1.0;
  std::vector<double> eigenvalues_;
  std::vector<double> frequencies_;
  std::vector<double> grid_points_;
  std::vector<double> quadrature_weights_;
  std::optional<std::vector<double>> radial_weight_;
  detail::DenseMatrix synth_;     // nodes x modes
  detail::DenseMatrix analysis_;  // modes x nodes, unscaled transpose

  std::vector<double> fine_points_;
  std::vector<double> fine_inv_r2_;
  double fine_weight_ = 0.0;
  detail::DenseMatrix fine_synth_;
  detail::DenseMatrix fine_analysis_;

  std::vector<double> quartic_nodes_;
  std::vector<double> quartic_weights_;
  detail::DenseMatrix quartic_synth_;
};

inline Domain build_domain(const DomainSpec& spec) {
  ensure(spec.extent > 0.0 && std::isfinite(spec.extent), Errc::InvalidSpec,
         "domain extent must be positive");
  ensure(spec.n_modes >= 8, Errc::InvalidSpec, "n_modes must be at least 8");
  ensure(std::isfinite(spec.beta), Errc::InvalidSpec, "beta must be finite");
  const double lambda1 = std::pow(std::numbers::pi / spec.extent, 2);
  ensure(lambda1 + spec.beta > 0.0, Errc::PoincareViolation,
         "lambda_1 + beta = " + std::to_string(lambda1 + spec.beta) + " <= 0");

  Domain d;
  d.spec_ = spec;
  const auto n = static_cast<std::size_t>(spec.n_modes);
  const double len = spec.extent;
  d.measure_ = spec.geometry == Geometry::RadialBall ? 4.0 * std::numbers::pi : 1.0;

  d.eigenvalues_.resize(n);
  d.frequencies_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    d.eigenvalues_[k] = std::pow((static_cast<double>(k + 1)) * std::numbers::pi / len, 2);
    d.frequencies_[k] = std::sqrt(d.eigenvalues_[k] + spec.beta);
  }

  const double h = len / static_cast<double>(n + 1);
  d.grid_points_.resize(n);
  for (std::size_t j = 0; j < n; ++j) d.grid_points_[j] = static_cast<double>(j + 1) * h;
  d.quadrature_weights_.assign(n, d.measure_ * h);
  if (spec.geometry == Geometry::RadialBall) {
    std::vector<double> rw(n);
    for (std::size_t j = 0; j < n; ++j) rw[j] = d.grid_points_[j] * d.grid_points_[j];
    d.radial_weight_ = std::move(rw);
  }
  d.synth_ = detail::sine_synthesis(n, n);
  d.analysis_ = detail::transpose(d.synth_);

  const std::size_t g = spec.dealias ? 2 * n + 1 : n;
  const double hf = len / static_cast<double>(g + 1);
  d.fine_points_.resize(g);
  d.fine_inv_r2_.assign(g, 1.0);
  for (std::size_t j = 0; j < g; ++j) {
    d.fine_points_[j] = static_cast<double>(j + 1) * hf;
    if (spec.geometry == Geometry::RadialBall)
      d.fine_inv_r2_[j] = 1.0 / (d.fine_points_[j] * d.fine_points_[j]);
  }
  d.fine_weight_ = d.measure_ * hf;
  d.fine_synth_ = detail::sine_synthesis(g, n);
  d.fine_analysis_ = detail::transpose(d.fine_synth_);

  if (spec.geometry == Geometry::Interval) {
    d.quartic_nodes_ = d.fine_points_;
    d.quartic_weights_.assign(g, hf);
    d.quartic_synth_ = d.fine_synth_;
  } else {
    const std::size_t m = 3 * n;
    detail::gauss_legendre(m, 0.0, len, d.quartic_nodes_, d.quartic_weights_);
    d.quartic_synth_ = detail::DenseMatrix{m, n, std::vector<double>(m * n)};
    for (std::size_t j = 0; j < m; ++j) {
      const double r = d.quartic_nodes_[j];
      d.quartic_weights_[j] *= d.measure_ / (r * r);
      for (std::size_t k = 0; k < n; ++k)
        d.quartic_synth_.data[j * n + k] =
            std::sin(static_cast<double>(k + 1) * std::numbers::pi * r / len);
    }
  }
  return d;
}

inline SpectralCoeffs forward_transform(const Domain& d, const Field& f) {
  d.check_field(f);
  SpectralCoeffs c{std::vector<double>(d.n_modes())};
  d.analysis().apply(f.values, c.coeffs, 2.0 / static_cast<double>(d.n_nodes() + 1));
  return c;
}

inline Field inverse_transform(const Domain& d, const SpectralCoeffs& c) {
  d.check_modes(c);
  Field f{std::vector<double>(d.n_nodes())};
  d.synthesis().apply(c.coeffs, f.values);
  return f;
}

// Coefficient-space norms. With u = sum c_k sin(k pi x / L), int u^2 = (L/2) sum c_k^2.

inline double h01_norm_sq(const Domain& d, const SpectralCoeffs& c) {
  d.check_modes(c);
  const auto& lam = d.eigenvalues();
  double acc = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) acc += (lam[k] + d.beta()) * c[k] * c[k];
  return 0.5 * d.extent() * d.measure() * acc;
}

inline double l2_norm_sq(const Domain& d, const SpectralCoeffs& c) {
  d.check_modes(c);
  double acc = 0.0;
  for (double v : c.coeffs) acc += v * v;
  return 0.5 * d.extent() * d.measure() * acc;
}

inline double l2_inner(const Domain& d, const SpectralCoeffs& a, const SpectralCoeffs& b) {
  d.check_modes(a);
  d.check_modes(b);
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return 0.5 * d.extent() * d.measure() * acc;
}

inline double l4_norm_4(const Domain& d, const SpectralCoeffs& c) { return d.quartic_integral(c); }

inline double h01_norm_sq(const Domain& d, const Field& f) {
  return h01_norm_sq(d, forward_transform(d, f));
}
inline double l2_norm_sq(const Domain& d, const Field& f) {
  d.check_field(f);
  double acc = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) acc += d.quadrature_weights()[j] * f[j] * f[j];
  return acc;
}
inline double l4_norm_4(const Domain& d, const Field& f) {
  return d.quartic_integral(forward_transform(d, f));
}

/// Multiplies c_k by lambda_k + beta.
inline SpectralCoeffs apply_shifted_laplacian(const Domain& d, SpectralCoeffs c) {
  d.check_modes(c);
  for (std::size_t k = 0; k < c.size(); ++k) c[k] *= d.eigenvalues()[k] + d.beta();
  return c;
}

/// Solves (-Delta + beta) w = c in coefficient space.
inline SpectralCoeffs solve_shifted_laplacian(const Domain& d, SpectralCoeffs c) {
  d.check_modes(c);
  for (std::size_t k = 0; k < c.size(); ++k) c[k] /= d.eigenvalues()[k] + d.beta();
  return c;
}

/// The radial profile u = v / r at the nodes, plus u(0) = v'(0).
struct RadialProfile {
  std::vector<double> r;
  std::vector<double> u;
  double u_at_origin = 0.0;
};

inline RadialProfile radial_profile(const Domain& d, const Field& v) {
  ensure(d.is_ball(), Errc::InvalidSpec, "radial_profile needs a RadialBall domain");
  const auto c = forward_transform(d, v);
  RadialProfile p;
  p.r = d.grid_points();
  p.u.resize(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) p.u[j] = v[j] / p.r[j];
  for (std::size_t k = 0; k < c.size(); ++k)
    p.u_at_origin += c[k] * static_cast<double>(k + 1) * std::numbers::pi / d.extent();
  return p;
}

/// Field from a callable evaluated at the nodes.
template <class Fn>
Field sample(const Domain& d, Fn&& fn) {
  Field f{std::vector<double>(d.n_nodes())};
  for (std::size_t j = 0; j < f.size(); ++j) f[j] = fn(d.grid_points()[j]);
  return f;
}

inline Field scaled(Field f, double s) {
  for (double& v : f.values) v *= s;
  return f;
}

inline SpectralCoeffs scaled(SpectralCoeffs c, double s) {
  for (double& v : c.coeffs) v *= s;
  return c;
}

}  // namespace pwlab
