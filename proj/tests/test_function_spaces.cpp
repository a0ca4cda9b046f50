#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dispersive/function_spaces.hpp"
#include "dispersive/initial_data.hpp"

using namespace dispersive;

namespace {

constexpr double pi = std::numbers::pi;

// Adaptive Simpson, independent of the grid trapezoid used by the norms.
template <class F>
double simpson(F&& f, double a, double b, double tol, int depth = 30) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  auto rec = [&](auto&& self, double lo, double hi, double flo, double fmid, double fhi, double est, int d) -> double {
    const double mid = 0.5 * (lo + hi);
    const double l = 0.5 * (lo + mid), r = 0.5 * (mid + hi);
    const double fl = f(l), fr = f(r);
    const double left = (mid - lo) / 6.0 * (flo + 4.0 * fl + fmid);
    const double right = (hi - mid) / 6.0 * (fmid + 4.0 * fr + fhi);
    if (d <= 0 || std::abs(left + right - est) < 15.0 * tol) return left + right + (left + right - est) / 15.0;
    return self(self, lo, mid, flo, fl, fmid, left, d - 1) + self(self, mid, hi, fmid, fr, fhi, right, d - 1);
  };
  return rec(rec, a, b, fa, fm, fb, whole, depth);
}

RealField sine(const PeriodicGrid& g) {
  return RealField::sample(g, [](double x) { return std::sin(x); });
}

RealField random_field(const PeriodicGrid& g, std::uint64_t seed) {
  return random_trig_polynomial(12, seed, 1.0, 1.0, g.period_multiple()).sample(g);
}

}  // namespace

TEST(BesovIndex, SplitsSmoothness) {
  const BesovIndex a(1.75, 2, 2);
  EXPECT_EQ(a.s_floor, 1);
  EXPECT_DOUBLE_EQ(a.s_frac, 0.75);
  const BesovIndex b(2.0, 2, 2);
  EXPECT_EQ(b.s_floor, 1);
  EXPECT_DOUBLE_EQ(b.s_frac, 1.0);
  const BesovIndex c(0.4, 3, kInf);
  EXPECT_EQ(c.s_floor, 0);
  EXPECT_TRUE(c.q_infinite());
  EXPECT_EQ(c.with_s(2.5).s_floor, 2);
}

TEST(BesovIndex, RejectsOutOfRange) {
  EXPECT_THROW(BesovIndex(0.0, 2, 2), std::invalid_argument);
  EXPECT_THROW(BesovIndex(1.0, 1, 2), std::invalid_argument);
  EXPECT_THROW(BesovIndex(1.0, kInf, 2), std::invalid_argument);
  EXPECT_THROW(BesovIndex(1.0, 2, 1), std::invalid_argument);
}

TEST(Difference, DoubleShiftIdentity) {
  const auto g = make_grid(128, 1);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto f = random_field(g, seed);
    for (long j : {1L, 3L, 17L, 40L, -5L}) {
      const auto lhs = 2.0 * difference(f, j, 1);
      const auto rhs = difference(f, 2 * j, 1) - difference(f, j, 2);
      EXPECT_LT((lhs - rhs).max_abs(), 1e-14);
    }
  }
}

TEST(Difference, SecondDifferenceOfSine) {
  const auto g = make_grid(64, 1);
  // h = pi/2: sin(x + pi) - 2 sin(x + pi/2) + sin x = -2 cos x
  const auto d = difference(sine(g), 16, 2);
  const auto expected = RealField::sample(g, [](double x) { return -2.0 * std::cos(x); });
  EXPECT_LT((d - expected).max_abs(), 1e-14);
  EXPECT_THROW(difference(sine(g), 1, 3), std::invalid_argument);
}

TEST(Difference, LineSecondDifferenceKillsAffine) {
  const auto f = LineField::sample(4.0, 256, -2.0, 2.0, [](double x) { return 3.0 * x - 1.0; });
  const auto d = difference(f, 4, 2);
  // Interior points see only the affine part.
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double x = d.x(i);
    if (x > -2.0 + 1e-9 && x + 8 * f.dx() < 2.0 - 1e-9) {
      EXPECT_NEAR(d[i], 0.0, 1e-13) << x;
    }
  }
  EXPECT_THROW(difference(f, 80, 2), std::out_of_range);
}

TEST(LpNorm, ConstantsAndSine) {
  const auto g = make_grid(64, 1);
  const auto c = RealField::sample(g, [](double) { return 0.5; });
  EXPECT_NEAR(lp_norm(c, 3.0), 0.5 * std::cbrt(2 * pi), 1e-14);
  EXPECT_NEAR(lp_norm(sine(g), 2.0), std::sqrt(pi), 1e-14);
}

TEST(Sobolev, SingleModeAndParseval) {
  const auto g = make_grid(64, 1);
  for (double s : {-1.0, 0.0, 1.0, 2.5}) EXPECT_NEAR(sobolev_norm(sine(g), s), std::pow(2.0, (s - 1) / 2), 1e-14);
  const auto u = random_field(g, 4);
  double mean_sq = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) mean_sq += u[j] * u[j];
  mean_sq /= static_cast<double>(g.size());
  EXPECT_NEAR(sobolev_norm(u, 0.0), std::sqrt(mean_sq), 1e-14);
}

TEST(SobolevProperty, MonotoneInS) {
  const auto g = make_grid(128, 2);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto u = random_field(g, seed);
    double prev = 0.0;
    for (double s : {-2.0, -0.5, 0.0, 1.0, 1.75, 3.0}) {
      const double v = sobolev_norm(u, s);
      EXPECT_GE(v, prev);
      prev = v;
    }
  }
}

TEST(BesovTorus, ZeroAndConstant) {
  const auto g = make_grid(64, 1);
  EXPECT_EQ(besov_norm_torus(RealField(g), BesovIndex(1.5, 2, 2)), 0.0);
  const auto c = RealField::sample(g, [](double) { return 0.7; });
  for (const auto& idx : {BesovIndex(0.5, 2, 2), BesovIndex(1.5, 3, 2), BesovIndex(2.0, 4, kInf)})
    EXPECT_NEAR(besov_norm_torus(c, idx), 0.7 * std::pow(2 * pi, 1.0 / idx.p), 1e-12);
}

TEST(BesovTorus, SineAgainstQuadrature) {
  // s = 1.5, p = q = 2: ||sin||_2 + ||cos||_2 plus the difference integral of
  // cos, with ||Delta_h^2 cos||_2 = 4 sin^2(h/2) sqrt(pi) and weight h^-2 dh,
  // doubled for negative h.
  const double w = 2.0 * std::sqrt(pi);
  const double integral = simpson(
      [](double h) {
        if (h == 0.0) return 0.0;
        const double d = 4.0 * std::pow(std::sin(h / 2), 2) * std::sqrt(pi);
        return d * d / (h * h);
      },
      0.0, pi, 1e-12);
  const double oracle = w + std::sqrt(2.0 * integral);
  const auto g = make_grid(256, 1);
  EXPECT_NEAR(besov_norm_torus(sine(g), BesovIndex(1.5, 2, 2)), oracle, 0.01 * oracle);

  // q = inf: sup_h h^-1/2 ||Delta_h^2 cos||_2 over (0, pi].
  double sup = 0.0;
  for (int i = 1; i <= 100000; ++i) {
    const double h = pi * i / 100000.0;
    sup = std::max(sup, 4.0 * std::pow(std::sin(h / 2), 2) * std::sqrt(pi) / std::sqrt(h));
  }
  EXPECT_NEAR(besov_norm_torus(sine(g), BesovIndex(1.5, 2, kInf)), w + sup, 0.01 * (w + sup));
}

TEST(BesovTorus, RestrictedShiftsNeverExceedFullNorm) {
  const auto g = make_grid(256, 1);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto u = random_field(g, seed);
    for (const auto& idx : {BesovIndex(1.75, 2, 2), BesovIndex(2.0, 2, kInf), BesovIndex(2.5, 4, 3)}) {
      const double full = besov_norm_torus(u, idx);
      const double restricted = besov_norm_torus(u, idx, 0.25);
      EXPECT_LE(restricted, full);
      EXPECT_GT(restricted, 0.0);
    }
  }
  EXPECT_THROW(besov_norm_torus(sine(g), BesovIndex(1.5, 2, 2), 1e-3), std::invalid_argument);
}

TEST(BesovTorusProperty, SeminormAxioms) {
  const auto g = make_grid(128, 1);
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const auto f = random_field(g, seed);
    const auto h = random_field(g, seed + 100);
    for (const auto& idx : {BesovIndex(1.5, 2, 2), BesovIndex(2.0, 3, kInf), BesovIndex(0.7, 2, 4)}) {
      const double nf = besov_norm_torus(f, idx);
      const double nh = besov_norm_torus(h, idx);
      EXPECT_NEAR(besov_norm_torus(-2.5 * f, idx), 2.5 * nf, 1e-12 * nf);
      EXPECT_LE(besov_norm_torus(f + h, idx), (nf + nh) * (1 + 1e-12));
    }
  }
}

TEST(BesovTorusProperty, TranslationInvariant) {
  const auto g = make_grid(128, 1);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto f = random_field(g, seed);
    RealField shifted(g);
    for (std::size_t j = 0; j < g.size(); ++j) shifted[j] = f[(j + 7 * seed) % g.size()];
    const BesovIndex idx(1.75, 2, 2);
    EXPECT_NEAR(besov_norm_torus(shifted, idx), besov_norm_torus(f, idx), 1e-11);
  }
}

TEST(BesovLine, MatchesRestrictedTorusNormForInteriorSupport) {
  // On the box [-pi, pi) with spacing 2 pi / N, zero padding and periodic
  // wraparound agree when the support stays away from the edges.
  const std::size_t n = 256;
  const auto f = LineField::sample(pi, n, -2.0, 2.0, [](double x) { return bump(x) * std::cos(3 * x); });
  const auto g = make_grid(n, 1);
  RealField periodic(g, std::vector<double>(f.values()));
  for (const auto& idx : {BesovIndex(1.5, 2, 2), BesovIndex(2.0, 4, 3), BesovIndex(1.75, 2, kInf)})
    EXPECT_NEAR(besov_norm_line(f, idx), besov_norm_torus(periodic, idx, kLineShiftBound), 1e-10);
}

TEST(BesovLine, BumpIsStableUnderRefinement) {
  const BesovIndex idx(2, 2, 2);
  const double coarse = besov_norm_line(CutoffFunction(1.0).sample(4.0, 512), idx);
  const double fine = besov_norm_line(CutoffFunction(1.0).sample(4.0, 1024), idx);
  EXPECT_TRUE(std::isfinite(coarse));
  EXPECT_NEAR(fine, coarse, 0.01 * coarse);
}

TEST(BesovLine, JumpDivergesUnderRefinement) {
  const BesovIndex idx(1.5, 2, 2);
  auto jump = [](std::size_t n) { return LineField::sample(4.0, n, -1.0, 1.0, [](double) { return 1.0; }); };
  double prev = besov_norm_line(jump(256), idx);
  for (std::size_t n : {512u, 1024u, 2048u}) {
    const double next = besov_norm_line(jump(n), idx);
    EXPECT_GT(next, 1.3 * prev) << n;
    prev = next;
  }
}

TEST(BesovLine, RejectsSupportNearEdge) {
  const auto f = LineField::sample(2.0, 128, -1.8, 1.0, [](double x) { return x; });
  EXPECT_THROW(besov_norm_line(f, BesovIndex(1.5, 2, 2)), std::out_of_range);
  EXPECT_THROW(LineField(2.0, 128, -3.0, 1.0, std::vector<double>(128)), std::invalid_argument);
  EXPECT_THROW(LineField(2.0, 127, -1.0, 1.0, std::vector<double>(127)), std::invalid_argument);
}

TEST(Cutoff, ShapeAndSupport) {
  for (double a : {0.5, 1.0, pi}) {
    const CutoffFunction phi(a);
    EXPECT_EQ(phi(0.0), 1.0);
    EXPECT_EQ(phi(a), 1.0);
    EXPECT_EQ(phi(-a), 1.0);
    EXPECT_EQ(phi(2 * a), 0.0);
    EXPECT_EQ(phi(-3 * a), 0.0);
    EXPECT_NEAR(phi(1.5 * a), 0.5, 1e-15);
    EXPECT_DOUBLE_EQ(phi.support_radius(), 2 * a);
    for (int i = -300; i <= 300; ++i) {
      const double x = a * i / 100.0;
      EXPECT_GE(phi(x), 0.0);
      EXPECT_LE(phi(x), 1.0);
    }
  }
  EXPECT_THROW(CutoffFunction(0.0), std::invalid_argument);
  EXPECT_DOUBLE_EQ(cutoff_dilate(2.0).dilation(), 2.0);
}

TEST(CutoffProperty, SmoothstepSymmetryAndDerivative) {
  for (int i = 0; i <= 100; ++i) {
    const double t = i / 100.0;
    EXPECT_NEAR(detail::smoothstep(t) + detail::smoothstep(1 - t), 1.0, 1e-13) << t;
  }
  const CutoffFunction phi(1.3);
  for (double x : {-2.4, -1.7, -1.31, 1.5, 2.0, 2.55}) {
    const double h = 1e-4;
    // Fourth-order centered difference.
    const double fd = (8 * (phi(x + h) - phi(x - h)) - (phi(x + 2 * h) - phi(x - 2 * h))) / (12 * h);
    EXPECT_NEAR(phi.derivative(x), fd, 1e-8) << x;
  }
}
