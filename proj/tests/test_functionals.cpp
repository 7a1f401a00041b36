#include <gtest/gtest.h>

#include <functional>

#include <cmath>
#include <random>

#include "pwlab/functionals.hpp"
#include "support.hpp"

using namespace pwlab;
using pwtest::kPi;

namespace {

const pwtest::Reference& ref() { return pwtest::interval_ref(); }

Field zero_field(const Domain& d) { return Field{std::vector<double>(d.n_nodes(), 0.0)}; }

}  // namespace

TEST(Energies, ZeroField) {
  const auto& d = ref().domain;
  const auto e = energies(d, zero_field(d), zero_field(d));
  EXPECT_EQ(e.J, 0.0);
  EXPECT_EQ(e.E, 0.0);
  EXPECT_EQ(e.K, 0.0);
}

TEST(Energies, SineWithoutMass) {
  const auto d = build_domain(pwtest::interval_spec(64, 0.0));
  const auto u = sample(d, [](double x) { return std::sin(x); });
  const auto e = energies(d, u, zero_field(d));
  EXPECT_NEAR(e.J, 5 * kPi / 32, 1e-13);
  EXPECT_NEAR(e.E, 5 * kPi / 32, 1e-13);
  EXPECT_NEAR(e.K, kPi / 8, 1e-13);
}

TEST(Energies, GroundStateSitsAtTheLevel) {
  const auto& [d, gs, wc] = ref();
  const auto e = energies(d, gs.q, zero_field(d));
  EXPECT_NEAR(e.J / gs.d_level, 1.0, 1e-12);
  EXPECT_NEAR(e.E / gs.d_level, 1.0, 1e-12);
  EXPECT_LE(std::abs(e.K), 1e-10 * wc.q_h01_norm_sq);
}

TEST(Energies, KineticTermAndSigma) {
  const auto& d = ref().domain;
  const auto ut = sample(d, [](double x) { return std::sin(2 * x); });
  const auto e = energies(d, zero_field(d), ut);
  EXPECT_NEAR(e.E, 0.5 * kPi / 2, 1e-13);
  const NormSet n{2.0, 3.0, 0.0};
  EXPECT_DOUBLE_EQ(energies(n, 0.0).J, 1.0);
  EXPECT_DOUBLE_EQ(energies(n, 2.0).K, 2.0 - 6.0);
}

TEST(Energies, QuarterIdentitiesOnRandomFields) {
  const auto& d = ref().domain;
  std::mt19937_64 rng(21);
  for (int i = 0; i < 300; ++i) {
    const auto c = pwtest::random_coeffs(d.n_modes(), rng, 1.5);
    const auto e = energies(norms(d, c, c));
    const double h = h01_norm_sq(d, c), q = l4_norm_4(d, c);
    const double scale = std::max({std::abs(e.J), h, q});
    EXPECT_NEAR(e.J, 0.25 * e.K + 0.25 * h, 1e-10 * scale);
    EXPECT_NEAR(e.J, 0.5 * e.K + 0.25 * q, 1e-10 * scale);
  }
}

TEST(LambdaStar, Examples) {
  const auto& [d, gs, wc] = ref();
  EXPECT_NEAR(lambda_star(d, gs.q), 1.0, 1e-12);
  const auto d0 = build_domain(pwtest::interval_spec(64, 0.0));
  const auto s = sample(d0, [](double x) { return std::sin(x); });
  EXPECT_NEAR(lambda_star(d0, s), 2.0 / std::sqrt(3.0), 1e-13);
  EXPECT_NEAR(lambda_star(d0, scaled(s, 2.5)), 2.0 / std::sqrt(3.0) / 2.5, 1e-13);
  try {
    lambda_star(d0, zero_field(d0));
    FAIL() << "expected ZeroField";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ZeroField);
  }
}

TEST(LambdaStar, ProjectionLandsOnNehariManifold) {
  const auto& d = ref().domain;
  std::mt19937_64 rng(22);
  for (int i = 0; i < 300; ++i) {
    const auto c = pwtest::random_coeffs(d.n_modes(), rng, 1.0);
    const auto w = scaled(c, lambda_star(d, c));
    const double h = h01_norm_sq(d, w);
    EXPECT_LE(std::abs(h - l4_norm_4(d, w)) / h, 1e-10);
  }
}

TEST(Classify, ScaledGroundStates) {
  const auto& [d, gs, wc] = ref();
  const auto z = zero_field(d);
  EXPECT_EQ(classify(d, wc, scaled(gs.q, 0.8), z).verdict, Verdict::KPlus);
  EXPECT_EQ(classify(d, wc, scaled(gs.q, 1.2), z).verdict, Verdict::KMinus);
  const auto at_q = classify(d, wc, gs.q, z);
  EXPECT_EQ(at_q.verdict, Verdict::AboveThreshold);
  EXPECT_EQ(at_q.margin, 0.0);
  EXPECT_EQ(classify(d, wc, z, z).verdict, Verdict::KPlus);
  for (double l = 0.05; l < 1.0; l += 0.05)
    EXPECT_EQ(classify(d, wc, scaled(gs.q, l), z).verdict, Verdict::KPlus) << l;
  for (double l = 1.05; l < 1.4; l += 0.05) {
    const auto c = classify(d, wc, scaled(gs.q, l), z);
    EXPECT_EQ(c.verdict, Verdict::KMinus) << l;
    EXPECT_GT(c.margin, 0.0);
  }
  // Enough kinetic energy pushes 0.8 Q above the level.
  EXPECT_EQ(classify(d, wc, scaled(gs.q, 0.8), scaled(gs.q, 1.0)).verdict, Verdict::AboveThreshold);
}

TEST(SobolevCheck, EqualityAtQAndZero) {
  const auto& [d, gs, wc] = ref();
  EXPECT_NEAR(explicit_sobolev_check(d, wc, gs.q), 0.0, 1e-12);
  EXPECT_EQ(explicit_sobolev_check(d, wc, zero_field(d)), 0.0);
}

TEST(SobolevCheck, ThousandRandomFields) {
  const auto& [d, gs, wc] = ref();
  std::mt19937_64 rng(23);
  double worst = INFINITY;
  for (int i = 0; i < 1000; ++i)
    worst = std::min(worst, explicit_sobolev_check(d, wc, random_trial(d, rng)));
  EXPECT_GE(worst, -1e-8);
}

TEST(WellCurve, Examples) {
  const auto& wc = ref().wc;
  EXPECT_EQ(well_curve(wc, 0.0), 0.0);
  const double peak = std::sqrt(wc.q_l4_norm_4);
  EXPECT_NEAR(well_curve(wc, peak) / wc.d, 1.0, 1e-8);
  EXPECT_LT(well_curve(wc, 0.9 * peak), wc.d);
  EXPECT_LT(well_curve(wc, 1.1 * peak), wc.d);
  for (double delta : {0.1, 0.5, 1.0}) {
    const double dl = delta * wc.d;
    EXPECT_NEAR(well_curve(wc, x_plus(wc, dl)), wc.d - dl, 1e-8 * wc.d);
    EXPECT_NEAR(well_curve(wc, x_minus(wc, dl)), wc.d - dl, 1e-8 * wc.d);
  }
  try {
    well_curve(wc, -1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NegativeInput);
  }
}

TEST(XPm, Examples) {
  const auto& wc = ref().wc;
  const double d = wc.d;
  auto [m0, p0] = x_pm(wc, 0.0);
  EXPECT_NEAR(m0, 2 * std::sqrt(d), 1e-14);
  EXPECT_NEAR(p0, 2 * std::sqrt(d), 1e-14);
  auto [m1, p1] = x_pm(wc, d);
  EXPECT_NEAR(m1, 0.0, 1e-7);
  EXPECT_NEAR(p1, 2 * std::sqrt(2 * d), 1e-14);
  auto [m2, p2] = x_pm(wc, d / 4);
  EXPECT_NEAR(m2, 2 * std::sqrt(d / 2), 1e-14);
  EXPECT_NEAR(p2, 2 * std::sqrt(1.5 * d), 1e-14);
  EXPECT_NO_THROW(x_plus(wc, 3 * d));
  const std::vector<std::function<void()>> bads = {[&] { x_minus(wc, 1.5 * d); }, [&] { x_minus(wc, -0.1); },
                                                   [&] { x_plus(wc, -0.1); }};
  for (const auto& bad : bads) {
    try {
      bad();
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::DeltaOutOfRange);
    }
  }
}

TEST(WellConstants, Invariants) {
  const auto& wc = ref().wc;
  EXPECT_NEAR(wc.d / (0.25 * wc.q_l4_norm_4), 1.0, 1e-8);
  for (double f : {0.0, 0.3, 1.0}) {
    const auto w = with_delta(wc, f * wc.d);
    EXPECT_GE(w.x_minus, 0.0);
    EXPECT_LE(w.x_minus, 2 * std::sqrt(wc.d) * (1 + 1e-15));
    EXPECT_GE(w.x_plus, 2 * std::sqrt(wc.d) * (1 - 1e-15));
  }
}

TEST(CoercivityBounds, HalfGroundStatePositiveBranch) {
  const auto& [d, gs, wc] = ref();
  const auto u = scaled(gs.q, 0.5);
  const double delta = wc.d - energies(d, u, zero_field(d)).J;
  const auto r = lemma12_bounds(d, wc, delta, u);
  EXPECT_TRUE(r.positive_branch);
  EXPECT_TRUE(r.all_hold());
  // The positive bound is an equality along lambda Q with delta = d - J(lambda Q).
  EXPECT_NEAR(r.positive_slack / r.h01_sq, 0.0, 1e-10);
}

TEST(CoercivityBounds, ScaledGroundStatesAreSharp) {
  const auto& [d, gs, wc] = ref();
  for (double l : {0.2, 0.7, 0.95, 1.05, 1.3, 1.5}) {
    const auto u = scaled(gs.q, l);
    const double delta = wc.d - energies(d, u, zero_field(d)).J;
    const auto r = lemma12_bounds(d, wc, delta, u);
    EXPECT_TRUE(r.all_hold()) << l;
    EXPECT_EQ(r.positive_branch, l < 1.0);
    if (l > 1.0) {
      EXPECT_NEAR(r.negative_level_slack / wc.d, 0.0, 1e-10) << l;
      EXPECT_NEAR(r.negative_ratio_slack / r.h01_sq, 0.0, 1e-10) << l;
    }
  }
}

TEST(CoercivityBounds, FullDeltaForcesZero) {
  const auto& [d, gs, wc] = ref();
  const auto r = lemma12_bounds(d, wc, wc.d, zero_field(d));
  EXPECT_TRUE(r.all_hold());
  try {
    lemma12_bounds(d, wc, wc.d, scaled(gs.q, 0.1));
    FAIL() << "J(0.1 Q) > 0 = d - delta";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::PreconditionViolated);
  }
}

TEST(CoercivityBounds, RandomFieldsBelowTheLevel) {
  const auto& [d, gs, wc] = ref();
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int positive = 0, negative = 0;
  for (int i = 0; i < 400; ++i) {
    auto c = random_trial(d, rng);
    c = scaled(nehari_project(d, c), 0.3 + 1.2 * unif(rng));
    const double j = 0.5 * h01_norm_sq(d, c) - 0.25 * l4_norm_4(d, c);
    if (!(j < wc.d)) continue;
    const double delta = std::min(wc.d - j, wc.d) * unif(rng);
    const auto r = lemma12_bounds(d, wc, delta, c);
    EXPECT_TRUE(r.all_hold()) << i;
    (r.positive_branch ? positive : negative)++;
  }
  EXPECT_GT(positive, 50);
  EXPECT_GT(negative, 50);
}

TEST(CoercivityBounds, RatioBoundNeedsDeltaAtMostD) {
  // With J(u) < 0 one may take delta > d; the level bound survives but the
  // ratio constant exceeds 1 and the ratio bound no longer follows.
  const auto& [d, gs, wc] = ref();
  SpectralCoeffs s1{std::vector<double>(d.n_modes(), 0.0)};
  s1[0] = 1.0;
  const auto u = scaled(nehari_project(d, s1), 2.0);
  const double j = 0.5 * h01_norm_sq(d, u) - 0.25 * l4_norm_4(d, u);
  ASSERT_LT(j, 0.0);
  const auto r = lemma12_bounds(d, wc, wc.d - j, u);
  EXPECT_FALSE(r.positive_branch);
  EXPECT_TRUE(r.negative_level_holds);
  EXPECT_FALSE(r.negative_ratio_holds);
  EXPECT_TRUE(lemma12_bounds(d, wc, wc.d, u).all_hold());
}
