#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mfg/heat.hpp"
#include "problems.hpp"

using namespace mfg;
using mfg::testing::cos_x;
using mfg::testing::loglog_slope;

namespace {

/// Field whose mode k (and -k) follows profile(t); all other modes zero.
template <typename Fn>
Field single_mode(const Grid& g, const ModeLattice& lat, int k, Fn&& profile) {
  Field f(g, lat);
  const std::vector<int> kk{k};
  const Index i = lat.index(kk);
  for (Index s = 0; s < g.samples(); ++s) {
    f.coeffs()(s, i) = profile(g.time(s));
    f.coeffs()(s, lat.mirror(i)) = std::conj(f.coeffs()(s, i));
  }
  return f;
}

std::complex<double> at(const Field& f, Index s, int k) {
  const std::vector<int> kk{k};
  return f.coeffs()(s, f.lattice().index(kk));
}

}  // namespace

TEST(HeatSemigroup, ForwardExamples) {
  const Grid g = make_grid(1.0, 0.25, 4);
  const ModeLattice lat(1, 4);
  const Field f = heat_forward(cos_x(lat, 1.0, 2), g);
  EXPECT_NEAR(at(f, 1, 2).real(), 0.5 * std::exp(-1.0), 1e-16);
  EXPECT_EQ((f.slice(0).coeffs() - cos_x(lat, 1.0, 2).coeffs()).cwiseAbs().maxCoeff(), 0.0);

  Slice c(lat);
  c.coeffs()(lat.zero_index()) = 4.0;
  const Field fc = heat_forward(c, g);
  for (Index i = 0; i < g.samples(); ++i) EXPECT_EQ(fc.coeffs()(i, lat.zero_index()), 4.0);
}

TEST(HeatSemigroup, BackwardExamplesAndReversal) {
  const Grid g = make_grid(1.0, 0.25, 4);
  const ModeLattice lat(1, 4);
  const Field b1 = heat_backward(cos_x(lat, 1.0), g);
  EXPECT_EQ((b1.slice(4).coeffs() - cos_x(lat, 1.0).coeffs()).cwiseAbs().maxCoeff(), 0.0);
  const Field b2 = heat_backward(cos_x(lat, 1.0, 2), g);
  EXPECT_NEAR(at(b2, 0, 2).real(), 0.5 * std::exp(-4.0), 1e-17);
  const Field f2 = heat_forward(cos_x(lat, 1.0, 2), g);
  for (Index i = 0; i < g.samples(); ++i)
    EXPECT_EQ((b2.slice(i).coeffs() - f2.slice(g.intervals() - i).coeffs()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(DuhamelForward, ConstantIntegrand) {
  const Grid g = make_grid(1.0, 0.25, 8);
  const ModeLattice lat(1, 3);
  const Field out = integrate_forward(single_mode(g, lat, 1, [](double) { return 1.0; }));
  for (Index i = 0; i < g.samples(); ++i) EXPECT_NEAR(at(out, i, 1).real(), 1.0 - std::exp(-g.time(i)), 1e-15);
  EXPECT_NEAR(at(out, 8, 1).real(), 0.632120558828558, 1e-14);
  EXPECT_EQ(integrate_forward(Field(g, lat)).coeffs().cwiseAbs().maxCoeff(), 0.0);
}

TEST(DuhamelForward, LinearIntegrandIsExact) {
  const Grid g = make_grid(1.0, 0.25, 4);
  const ModeLattice lat(1, 3);
  const Field out = integrate_forward(single_mode(g, lat, 2, [](double t) { return t; }));
  auto exact = [](double t) { return t / 4.0 - (1.0 - std::exp(-4.0 * t)) / 16.0; };
  for (Index i = 0; i < g.samples(); ++i) EXPECT_NEAR(at(out, i, 2).real(), exact(g.time(i)), 1e-15);
  EXPECT_NEAR(at(out, 4, 2).real(), 0.1886447274305459, 1e-15);

  // independent check of the antiderivative: midpoint sum on a very fine grid
  const int M = 200000;
  double riemann = 0.0;
  for (int j = 0; j < M; ++j) {
    const double s = (j + 0.5) / M;
    riemann += std::exp(-4.0 * (1.0 - s)) * s / M;
  }
  EXPECT_NEAR(riemann, exact(1.0), 1e-10);
}

TEST(DuhamelBackward, Examples) {
  const Grid g = make_grid(1.0, 0.25, 8);
  const ModeLattice lat(1, 3);
  const Field out = integrate_backward(single_mode(g, lat, 1, [](double) { return 1.0; }));
  EXPECT_NEAR(at(out, 0, 1).real(), 1.0 - std::exp(-1.0), 1e-15);
  EXPECT_EQ(std::abs(at(out, 8, 1)), 0.0);
}

TEST(DuhamelBackward, ReversalProperty) {
  std::mt19937_64 rng(43);
  const Grid g = make_grid(1.5, 0.25, 12);
  const ModeLattice lat(2, 4);
  const Field h = random_mean_zero_field(g, lat, rng);
  Field reversed(g, lat);
  for (Index i = 0; i < g.samples(); ++i) reversed.set_slice(i, h.slice(g.intervals() - i));
  const Field back = integrate_backward(h), fwd = integrate_forward(reversed);
  for (Index i = 0; i < g.samples(); ++i)
    EXPECT_LT((back.slice(i).coeffs() - fwd.slice(g.intervals() - i).coeffs()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(DuhamelHorizon, MatchesFinalSlice) {
  std::mt19937_64 rng(47);
  const Grid g = make_grid(1.0, 0.25, 8);
  const ModeLattice lat(1, 5);
  const Field h = random_mean_zero_field(g, lat, rng);
  EXPECT_EQ((integrate_to_horizon(h).coeffs() - integrate_forward(h).slice(8).coeffs()).cwiseAbs().maxCoeff(), 0.0);
  const Field one = single_mode(g, lat, 1, [](double) { return 1.0; });
  EXPECT_NEAR(integrate_to_horizon(one).mode({1}).real(), 1.0 - std::exp(-1.0), 1e-15);
  EXPECT_EQ(integrate_to_horizon(Field(g, lat)).coeffs().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Duhamel, RejectsNonMeanZeroInput) {
  const Grid g = make_grid(1.0, 0.25, 4);
  const ModeLattice lat(1, 2);
  Field f(g, lat);
  f.add_constant(1.0);
  EXPECT_THROW(integrate_forward(f), std::domain_error);
  EXPECT_THROW(integrate_backward(f), std::domain_error);
  EXPECT_THROW(integrate_to_horizon(f), std::domain_error);
}

TEST(Duhamel, LinearAndMeanZero) {
  std::mt19937_64 rng(53);
  const Grid g = make_grid(1.0, 0.25, 10);
  const ModeLattice lat(2, 4);
  const Field f = random_mean_zero_field(g, lat, rng), h = random_mean_zero_field(g, lat, rng);
  for (Direction d : {Direction::forward, Direction::backward}) {
    const Field lhs = integrate(d, 2.5 * f + (-0.75) * h);
    const Field rhs = 2.5 * integrate(d, f) + (-0.75) * integrate(d, h);
    EXPECT_LT(max_abs_difference(lhs, rhs), 1e-14);
    EXPECT_TRUE(integrate(d, f).mean_zero());
  }
}

TEST(Duhamel, SecondOrderConvergenceForSmoothData) {
  const double T = 2.0;
  const ModeLattice lat(1, 6);
  std::vector<double> ns, errs;
  for (int N : {16, 32, 64, 128, 256}) {
    const Grid g = make_grid(T, 0.5, N);
    const double w = std::numbers::pi / T;
    const Field h = single_mode(g, lat, 3, [&](double t) { return std::sin(w * t); });
    const Field out = integrate_forward(h);
    double err = 0.0;
    for (Index i = 0; i < g.samples(); ++i) {
      const double t = g.time(i), l = 9.0;
      const double exact = (l * std::sin(w * t) - w * std::cos(w * t) + w * std::exp(-l * t)) / (l * l + w * w);
      err = std::max(err, std::abs(at(out, i, 3) - exact));
    }
    ns.push_back(N);
    errs.push_back(err);
  }
  EXPECT_NEAR(loglog_slope(ns, errs), -2.0, 0.1);
  for (std::size_t i = 1; i < errs.size(); ++i) EXPECT_NEAR(errs[i - 1] / errs[i], 4.0, 0.4);
}

TEST(KernelWeights, SeriesAndClosedFormAgreeAtSwitch) {
  for (double z : {0.499999, 0.5}) {
    const auto a = KernelWeights<double>::make(z, 1.0);
    const double e = std::exp(-z);
    EXPECT_NEAR(a.far_weight, (1.0 - e - z * e) / (z * z), 1e-15);
    EXPECT_NEAR(a.near_weight + a.far_weight, (1.0 - e) / z, 1e-15);
  }
  const auto zero = KernelWeights<double>::make(0.0, 0.1);
  EXPECT_NEAR(zero.near_weight, 0.05, 1e-17);
  EXPECT_NEAR(zero.far_weight, 0.05, 1e-17);
}

TEST(OperatorNorm, BoundHolds) {
  const ModeLattice lat(1, 16);
  for (Direction d : {Direction::forward, Direction::backward}) {
    const auto est = estimate_operator_norm(d, make_grid(2.0, 0.5, 64), lat, 0, 200);
    EXPECT_DOUBLE_EQ(est.bound, 6.0);
    EXPECT_LE(est.value(), 6.0);
    EXPECT_EQ(est.violations, 0);
  }
}

TEST(OperatorNorm, SingleModeClosedForm) {
  // constant unit profile on mode k: I+ gives (1 - e^{-|k|^2 t}) / |k|^2, so the
  // ratio is sup_t (1 + k^2)(1 - e^{-k^2 t}) e^{beta(t) k} / (k^2 sup_t (2 e^{beta(t) k})) summed over +-k.
  const Grid g = make_grid(1.0, 0.25, 32);
  const ModeLattice lat(1, 4);
  for (int k = 1; k <= 4; ++k) {
    const Field h = single_mode(g, lat, k, [](double) { return 1.0; });
    const double l = double(k) * k;
    double out = 0.0;
    for (Index i = 0; i < g.samples(); ++i)
      out = std::max(out, (1.0 + l) * std::exp(g.beta(i) * k) * (1.0 - std::exp(-l * g.time(i))) / l);
    const double in = 2.0 * std::exp(0.25 * k);
    EXPECT_NEAR(space_time_norm(integrate_forward(h), 2) / space_time_norm(h, 0), 2.0 * out / (2.0 * in), 1e-12);
  }
}

TEST(OperatorNorm, SmoothingPropertyOverRandomFieldsAndGrids) {
  std::mt19937_64 rng(59);
  for (auto [T, alpha] : {std::pair{2.0, 0.5}, {1.0, 0.25}, {1.0, 0.45}, {3.0, 0.2}}) {
    const Grid g = make_grid(T, alpha, 32);
    const double bound = smoothing_bound(g);
    for (int j : {0, 1, 2}) {
      const ModeLattice lat(j == 1 ? 2 : 1, 8);
      for (int t = 0; t < 25; ++t) {
        const Field h = random_mean_zero_field(g, lat, rng);
        for (Direction d : {Direction::forward, Direction::backward})
          EXPECT_LE(space_time_norm(integrate(d, h), j + 2), bound * space_time_norm(h, j));
      }
    }
  }
}
