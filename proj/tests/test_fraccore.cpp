#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fpde/fraccore.hpp>
#include <fpde/rng.hpp>

#include <cmath>
#include <functional>
#include <vector>

using fpde::fraccore::FracOrder;
using fpde::fraccore::KernelWeights;
using fpde::fraccore::TimeSeries;

namespace {

TimeSeries sample(const std::function<double(double)>& f, double t0, double h,
                  std::size_t steps) {
  TimeSeries s = TimeSeries::zeros(t0, h, steps + 1, 1);
  for (std::size_t i = 0; i <= steps; ++i) s.values[i] = f(s.t(i));
  return s;
}

// Reference quadrature for (I_0^a psi)(t) = (1/Gamma(a)) * int_0^t (t-s)^{a-1} psi(s) ds.
// Substituting u = (t-s)^a removes the endpoint singularity, leaving a smooth
// integrand handled by composite Simpson.
double integral_reference(const std::function<double(double)>& psi, double a,
                          double t, std::size_t panels = 4096) {
  if (t <= 0.0) return 0.0;
  const double top = std::pow(t, a);
  const double w = top / static_cast<double>(2 * panels);
  auto g = [&](double u) { return psi(t - std::pow(u, 1.0 / a)); };
  double acc = g(0.0) + g(top);
  for (std::size_t k = 1; k < 2 * panels; ++k)
    acc += g(w * static_cast<double>(k)) * ((k % 2) ? 4.0 : 2.0);
  return acc * w / 3.0 / a / std::tgamma(a);
}

double max_rel_gap(const TimeSeries& got, const std::function<double(double)>& want,
                   double t_min) {
  double scale = 0.0;
  for (std::size_t i = 0; i <= got.steps(); ++i)
    scale = std::max(scale, std::fabs(want(got.t(i))));
  double worst = 0.0;
  for (std::size_t i = 1; i <= got.steps(); ++i) {
    if (got.t(i) < t_min) continue;
    worst = std::max(worst, std::fabs(got.values[i] - want(got.t(i))) / scale);
  }
  return worst;
}

}  // namespace

TEST_CASE("gamma function matches factorials and the half-integer closed form") {
  CHECK(fpde::fraccore::gamma_fn(1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(fpde::fraccore::gamma_fn(5.0) == doctest::Approx(24.0).epsilon(1e-14));
  CHECK(fpde::fraccore::gamma_fn(0.5) ==
        doctest::Approx(1.772453850905516).epsilon(1e-13));
  CHECK_THROWS_AS(fpde::fraccore::gamma_fn(0.0), std::domain_error);
  CHECK_THROWS_AS(fpde::fraccore::gamma_fn(-2.5), std::domain_error);
}

TEST_CASE("gamma function tracks the library reference over (0, 50]") {
  for (int k = 1; k <= 1000; ++k) {
    const double x = 0.05 * static_cast<double>(k);
    const double got = fpde::fraccore::gamma_fn(x);
    const double want = std::tgamma(x);
    CHECK(std::fabs(got - want) <= 1e-12 * std::fabs(want));
  }
}

TEST_CASE("order validation rejects the endpoints") {
  CHECK_THROWS_AS(FracOrder(0.0), std::domain_error);
  CHECK_THROWS_AS(FracOrder(1.0), std::domain_error);
  CHECK_THROWS_AS(FracOrder(-0.2), std::domain_error);
  CHECK_NOTHROW(FracOrder(0.5));
}

TEST_CASE("step weights are positive, start at one, and decrease") {
  for (double a : {0.1, 0.35, 0.5, 0.75, 0.95}) {
    const KernelWeights kw = KernelWeights::build(FracOrder(a), 0.01, 64);
    REQUIRE(kw.l1.size() == 64);
    CHECK(kw.l1[0] == doctest::Approx(1.0).epsilon(1e-15));
    for (std::size_t j = 0; j + 1 < kw.l1.size(); ++j) {
      CHECK(kw.l1[j] > 0.0);
      CHECK(kw.l1[j + 1] < kw.l1[j]);
    }
    // Closed form of the step weights.
    for (std::size_t j = 0; j < kw.l1.size(); ++j) {
      const double direct = std::pow(static_cast<double>(j + 1), 1.0 - a) -
                            std::pow(static_cast<double>(j), 1.0 - a);
      CHECK(kw.l1[j] == doctest::Approx(direct).epsilon(1e-12));
    }
  }
}

TEST_CASE("integral weights reproduce the power rule for constant data") {
  // For psi == 1 the piecewise-linear interpolant is exact, so the discrete
  // integral must equal t^a / Gamma(1+a) to rounding at every node.
  for (double a : {0.25, 0.5, 0.8}) {
    const TimeSeries one = sample([](double) { return 1.0; }, 0.0, 1.0 / 64, 64);
    const TimeSeries got = fpde::fraccore::frac_integral(one, FracOrder(a), 0.0);
    for (std::size_t i = 0; i <= 64; ++i) {
      const double want = std::pow(got.t(i), a) / std::tgamma(1.0 + a);
      CHECK(std::fabs(got.values[i] - want) <= 1e-12 * (1.0 + std::fabs(want)));
    }
  }
}

TEST_CASE("integral weights reproduce the power rule for linear data") {
  for (double a : {0.3, 0.6}) {
    const TimeSeries lin = sample([](double t) { return t; }, 0.0, 1.0 / 48, 48);
    const TimeSeries got = fpde::fraccore::frac_integral(lin, FracOrder(a), 0.0);
    for (std::size_t i = 0; i <= 48; ++i) {
      const double want = std::pow(got.t(i), 1.0 + a) / std::tgamma(2.0 + a);
      CHECK(std::fabs(got.values[i] - want) <= 1e-12 * (1.0 + std::fabs(want)));
    }
  }
}

TEST_CASE("zero data integrates to zero") {
  const TimeSeries z = TimeSeries::zeros(0.0, 0.01, 32, 3);
  const TimeSeries got = fpde::fraccore::frac_integral(z, FracOrder(0.4), 0.0);
  for (double v : got.values) CHECK(v == 0.0);
}

TEST_CASE("integral of smooth data matches high-resolution quadrature") {
  auto psi = [](double t) { return std::sin(3.0 * t) + t * t; };
  for (double a : {0.3, 0.7}) {
    const TimeSeries fine = sample(psi, 0.0, 1.0 / 256, 256);
    const TimeSeries got = fpde::fraccore::frac_integral(fine, FracOrder(a), 0.0);
    double worst = 0.0;
    for (std::size_t i = 32; i <= 256; i += 16) {
      const double want = integral_reference(psi, a, got.t(i));
      worst = std::max(worst, std::fabs(got.values[i] - want));
    }
    CHECK(worst <= 5e-5);
    // Refinement shrinks the gap.
    const TimeSeries coarse = sample(psi, 0.0, 1.0 / 64, 64);
    const TimeSeries got_c = fpde::fraccore::frac_integral(coarse, FracOrder(a), 0.0);
    double worst_c = 0.0;
    for (std::size_t i = 8; i <= 64; i += 4) {
      const double want = integral_reference(psi, a, got_c.t(i));
      worst_c = std::max(worst_c, std::fabs(got_c.values[i] - want));
    }
    CHECK(worst < worst_c);
  }
}

TEST_CASE("integrating t^(a-1) at order 1-a yields the constant Gamma(a)") {
  for (double a : {0.4, 0.5, 0.7}) {
    auto psi = [a](double t) { return t > 0.0 ? std::pow(t, a - 1.0) : 0.0; };
    const std::size_t n = 4096;
    const TimeSeries s = sample(psi, 0.0, 1.0 / static_cast<double>(n), n);
    const TimeSeries got = fpde::fraccore::frac_integral(s, FracOrder(1.0 - a), 0.0);
    const double want = std::tgamma(a);
    double worst = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      if (got.t(i) < 0.5) continue;
      worst = std::max(worst, std::fabs(got.values[i] - want) / want);
    }
    CHECK(worst <= 4e-2);
    // The plateau sharpens under refinement.
    const std::size_t nc = 1024;
    const TimeSeries sc = sample(psi, 0.0, 1.0 / static_cast<double>(nc), nc);
    const TimeSeries gc = fpde::fraccore::frac_integral(sc, FracOrder(1.0 - a), 0.0);
    double worst_c = 0.0;
    for (std::size_t i = 0; i <= nc; ++i) {
      if (gc.t(i) < 0.5) continue;
      worst_c = std::max(worst_c, std::fabs(gc.values[i] - want) / want);
    }
    CHECK(worst < worst_c);
  }
}

TEST_CASE("an earlier origin with zero fill matches manual padding") {
  const double h = 1.0 / 32;
  const TimeSeries tail = sample([](double t) { return std::cos(t); }, 0.5, h, 32);
  const TimeSeries got = fpde::fraccore::frac_integral(tail, FracOrder(0.45), 0.0);

  TimeSeries padded = TimeSeries::zeros(0.0, h, 49, 1);
  for (std::size_t i = 16; i <= 48; ++i) padded.values[i] = std::cos(padded.t(i));
  const TimeSeries want = fpde::fraccore::frac_integral(padded, FracOrder(0.45), 0.0);
  for (std::size_t i = 0; i <= 32; ++i)
    CHECK(got.values[i] == doctest::Approx(want.values[i + 16]).epsilon(1e-12));
}

TEST_CASE("origin after the first node is rejected") {
  const TimeSeries s = sample([](double t) { return t; }, 0.5, 0.01, 8);
  CHECK_THROWS_AS(fpde::fraccore::frac_integral(s, FracOrder(0.5), 0.6),
                  std::invalid_argument);
  // A gap that is not a whole number of steps is also rejected.
  CHECK_THROWS_AS(fpde::fraccore::frac_integral(s, FracOrder(0.5), 0.4963),
                  std::invalid_argument);
}

TEST_CASE("integral is linear in the data") {
  fpde::RngStream rng(0x11u, 1u);
  const std::size_t n = 40;
  TimeSeries x = TimeSeries::zeros(0.0, 0.02, n, 2);
  TimeSeries y = TimeSeries::zeros(0.0, 0.02, n, 2);
  for (auto& v : x.values) v = rng.uniform(-1.0, 1.0);
  for (auto& v : y.values) v = rng.uniform(-1.0, 1.0);
  const double a = 1.7, b = -0.9;
  TimeSeries mix = x;
  for (std::size_t i = 0; i < mix.values.size(); ++i)
    mix.values[i] = a * x.values[i] + b * y.values[i];
  const FracOrder ord(0.6);
  const TimeSeries ix = fpde::fraccore::frac_integral(x, ord, 0.0);
  const TimeSeries iy = fpde::fraccore::frac_integral(y, ord, 0.0);
  const TimeSeries im = fpde::fraccore::frac_integral(mix, ord, 0.0);
  for (std::size_t i = 0; i < im.values.size(); ++i)
    CHECK(std::fabs(im.values[i] - (a * ix.values[i] + b * iy.values[i])) <= 1e-13);
}

TEST_CASE("semigroup property holds under refinement on smooth data") {
  auto psi = [](double t) { return std::exp(-t) * t; };
  const double a = 0.35, b = 0.4;
  double prev = 0.0;
  for (std::size_t n : {64u, 128u, 256u}) {
    const TimeSeries s = sample(psi, 0.0, 1.0 / static_cast<double>(n), n);
    const TimeSeries inner = fpde::fraccore::frac_integral(s, FracOrder(b), 0.0);
    const TimeSeries two = fpde::fraccore::frac_integral(inner, FracOrder(a), 0.0);
    const TimeSeries one = fpde::fraccore::frac_integral(s, FracOrder(a + b), 0.0);
    double gap = 0.0;
    for (std::size_t i = 0; i <= n; ++i)
      gap = std::max(gap, std::fabs(two.values[i] - one.values[i]));
    if (prev > 0.0) CHECK(gap < prev);
    prev = gap;
  }
  CHECK(prev <= 2e-4);
}

TEST_CASE("derivative of a constant vanishes and shifts are invisible") {
  const TimeSeries c = sample([](double) { return 3.25; }, 0.0, 0.05, 30);
  const TimeSeries got = fpde::fraccore::caputo_derivative(c, FracOrder(0.55));
  for (double v : got.values) CHECK(std::fabs(v) <= 1e-12);

  fpde::RngStream rng(0x12u, 0u);
  TimeSeries r = TimeSeries::zeros(0.0, 0.05, 30, 1);
  for (auto& v : r.values) v = rng.uniform(-2.0, 2.0);
  TimeSeries shifted = r;
  for (auto& v : shifted.values) v += 17.5;
  const TimeSeries d0 = fpde::fraccore::caputo_derivative(r, FracOrder(0.55));
  const TimeSeries d1 = fpde::fraccore::caputo_derivative(shifted, FracOrder(0.55));
  for (std::size_t i = 0; i < d0.values.size(); ++i)
    CHECK(std::fabs(d0.values[i] - d1.values[i]) <= 2e-11);
}

TEST_CASE("derivative of linear data matches the power rule to rounding") {
  for (double a : {0.2, 0.5, 0.85}) {
    const TimeSeries lin = sample([](double t) { return t; }, 0.0, 1.0 / 72, 72);
    const TimeSeries got = fpde::fraccore::caputo_derivative(lin, FracOrder(a));
    for (std::size_t i = 1; i <= 72; ++i) {
      const double want = std::pow(got.t(i), 1.0 - a) / std::tgamma(2.0 - a);
      CHECK(std::fabs(got.values[i] - want) <= 1e-12 * (1.0 + want));
    }
  }
}

TEST_CASE("derivative of t^2 converges with the expected order") {
  const double a = 0.5;
  auto want = [a](double t) { return 2.0 * std::pow(t, 2.0 - a) / std::tgamma(3.0 - a); };
  std::vector<double> errs;
  for (std::size_t n : {64u, 128u, 256u}) {
    const TimeSeries s = sample([](double t) { return t * t; }, 0.0,
                                1.0 / static_cast<double>(n), n);
    const TimeSeries got = fpde::fraccore::caputo_derivative(s, FracOrder(a));
    errs.push_back(max_rel_gap(got, want, 0.0));
  }
  const double order1 = std::log2(errs[0] / errs[1]);
  const double order2 = std::log2(errs[1] / errs[2]);
  CHECK(order1 >= 2.0 - a - 0.3);
  CHECK(order2 >= 2.0 - a - 0.3);
  CHECK(errs[2] <= 1e-4);
}

TEST_CASE("derivative requires at least two nodes") {
  TimeSeries s = TimeSeries::zeros(0.0, 0.1, 1, 1);
  CHECK_THROWS_AS(fpde::fraccore::caputo_derivative(s, FracOrder(0.5)),
                  std::invalid_argument);
}

TEST_CASE("history-form derivative approximates the closed form for t^(a-1)+0") {
  // d/dt of the order-(1-a) integral of t^(a-1) is zero because the integral
  // is constant; check the direct differentiation route.
  for (double a : {0.5, 0.7}) {
    auto psi = [a](double t) { return t > 0.0 ? std::pow(t, a - 1.0) : 0.0; };
    const std::size_t n = 4096;
    const TimeSeries s = sample(psi, 0.0, 1.0 / static_cast<double>(n), n);
    const TimeSeries got = fpde::fraccore::rl_derivative(s, FracOrder(a), 0.0);
    double worst = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      if (got.t(i) < 0.5) continue;
      worst = std::max(worst, std::fabs(got.values[i]));
    }
    CHECK(worst <= 0.1);
    const std::size_t nc = 1024;
    const TimeSeries sc = sample(psi, 0.0, 1.0 / static_cast<double>(nc), nc);
    const TimeSeries gc = fpde::fraccore::rl_derivative(sc, FracOrder(a), 0.0);
    double worst_c = 0.0;
    for (std::size_t i = 0; i <= nc; ++i) {
      if (gc.t(i) < 0.5) continue;
      worst_c = std::max(worst_c, std::fabs(gc.values[i]));
    }
    CHECK(worst < worst_c);
  }
}

TEST_CASE("direct derivative of a constant matches t^-a/Gamma(1-a) away from zero") {
  const double a = 0.4;
  const std::size_t n = 1024;
  const TimeSeries one = sample([](double) { return 1.0; }, 0.0,
                                1.0 / static_cast<double>(n), n);
  const TimeSeries got = fpde::fraccore::rl_derivative(one, FracOrder(a), 0.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {  // interior nodes only
    const double t = got.t(i);
    if (t < 0.5) continue;
    const double want = std::pow(t, -a) / std::tgamma(1.0 - a);
    worst = std::max(worst, std::fabs(got.values[i] - want) / want);
  }
  CHECK(worst <= 1e-3);
}

TEST_CASE("the two derivative forms agree when the data starts at zero") {
  auto psi = [](double t) { return t * t + std::sin(2.0 * t); };
  const double a = 0.6;
  double prev = 0.0;
  for (std::size_t n : {512u, 2048u}) {
    const TimeSeries s = sample(psi, 0.0, 1.0 / static_cast<double>(n), n);
    const TimeSeries dc = fpde::fraccore::caputo_derivative(s, FracOrder(a));
    const TimeSeries dr = fpde::fraccore::rl_derivative(s, FracOrder(a), 0.0);
    double scale = 0.0, gap = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::fabs(dc.values[i]));
    for (std::size_t i = 1; i < n; ++i) {
      if (s.t(i) < 0.25) continue;
      gap = std::max(gap, std::fabs(dc.values[i] - dr.values[i]));
    }
    gap /= scale;
    if (prev > 0.0) CHECK(gap < prev);
    prev = gap;
  }
  CHECK(prev <= 1e-2);
}

TEST_CASE("inversion residual vanishes for zero data and shrinks for smooth data") {
  const TimeSeries z = TimeSeries::zeros(0.0, 0.02, 50, 1);
  CHECK(fpde::fraccore::inversion_residual(z, FracOrder(0.5)) == 0.0);

  // psi(t) = t at order 0.5.
  {
    const TimeSeries s = sample([](double t) { return t; }, 0.0, 1.0 / 128, 128);
    const double res = fpde::fraccore::inversion_residual(s, FracOrder(0.5));
    CHECK(res <= 1e-2);
    const TimeSeries s2 = sample([](double t) { return t; }, 0.0, 1.0 / 256, 256);
    CHECK(fpde::fraccore::inversion_residual(s2, FracOrder(0.5)) < res);
  }
  // psi(t) = sin(t) at order 0.3 improves under refinement.
  {
    const TimeSeries coarse = sample([](double t) { return std::sin(t); }, 0.0,
                                     1.0 / 128, 128);
    const TimeSeries fine = sample([](double t) { return std::sin(t); }, 0.0,
                                   1.0 / 256, 256);
    const double rc = fpde::fraccore::inversion_residual(coarse, FracOrder(0.3));
    const double rf = fpde::fraccore::inversion_residual(fine, FracOrder(0.3));
    CHECK(rf < rc);
  }
  const TimeSeries bad = sample([](double t) { return t + 1.0; }, 0.0, 0.01, 16);
  CHECK_THROWS_AS(fpde::fraccore::inversion_residual(bad, FracOrder(0.5)),
                  std::invalid_argument);
}

TEST_CASE("pointwise product-rule lower bound holds for random zero-start data") {
  // At every node, (d^a v) * v >= (1/2) d^a (v^2) for the step scheme.
  for (double a : {0.25, 0.5, 0.75}) {
    fpde::RngStream rng(0x77u, static_cast<std::uint64_t>(a * 100));
    for (int rep = 0; rep < 200; ++rep) {
      const std::size_t n = 48;
      TimeSeries v = TimeSeries::zeros(0.0, 1.0 / 48, n + 1, 1);
      for (std::size_t i = 1; i <= n; ++i) v.values[i] = rng.uniform(-1.0, 1.0);
      TimeSeries v2 = v;
      for (auto& x : v2.values) x = x * x;
      const TimeSeries dv = fpde::fraccore::caputo_derivative(v, FracOrder(a));
      const TimeSeries dv2 = fpde::fraccore::caputo_derivative(v2, FracOrder(a));
      double scale = 1.0;
      for (std::size_t i = 0; i <= n; ++i)
        scale = std::max(scale, std::fabs(dv.values[i]));
      for (std::size_t i = 1; i <= n; ++i) {
        const double margin = dv.values[i] * v.values[i] - 0.5 * dv2.values[i];
        CHECK(margin >= -1e-12 * scale);
      }
    }
  }
}

TEST_CASE("kernel compression meets its advertised tolerance") {
  using fpde::fraccore::soe_history;
  struct Probe {
    double a, eps, lo, hi;
  };
  for (const Probe& p : {Probe{0.5, 1e-6, 1e-3, 1.0}, Probe{0.9, 1e-8, 1e-3, 1.0},
                         Probe{0.3, 1e-6, 1.0 / 256, 1.0}}) {
    const auto sum = soe_history(FracOrder(p.a), p.eps, p.lo, p.hi);
    REQUIRE(sum.terms() <= 128);
    CHECK(sum.sup_rel_error <= p.eps);
    fpde::RngStream rng(0x5eedu, 3u);
    for (int k = 0; k < 500; ++k) {
      const double s = p.lo * std::exp(rng.uniform(0.0, std::log(p.hi / p.lo)));
      const double want = std::pow(s, -p.a);
      CHECK(std::fabs(sum.eval(s) - want) <= 1.5 * p.eps * want);
    }
    for (std::size_t k = 0; k < sum.terms(); ++k) {
      CHECK(sum.rate[k] >= 0.0);
      CHECK(sum.weight[k] > 0.0);
    }
  }
}

TEST_CASE("a collapsed window needs a single term") {
  const auto sum = fpde::fraccore::soe_history(FracOrder(0.5), 1e-6, 0.25, 0.25);
  CHECK(sum.terms() == 1);
  CHECK(sum.eval(0.25) == doctest::Approx(std::pow(0.25, -0.5)).epsilon(1e-9));
}

TEST_CASE("an impossible tolerance raises the capacity error") {
  CHECK_THROWS_AS(fpde::fraccore::soe_history(FracOrder(0.5), 1e-15, 1e-12, 1e4),
                  fpde::fraccore::SoeCapacityError);
}

TEST_CASE("compressed history tracks the dense derivative") {
  struct Probe {
    double a, eps;
    std::size_t n;
  };
  for (const Probe& p : {Probe{0.5, 1e-6, 256}, Probe{0.9, 1e-8, 256}}) {
    fpde::RngStream rng(0xabcu, static_cast<std::uint64_t>(p.n));
    TimeSeries v = TimeSeries::zeros(0.0, 1.0 / static_cast<double>(p.n), p.n + 1, 2);
    // Smooth-ish random data: random trigonometric mix.
    const double c1 = rng.uniform(-1.0, 1.0), c2 = rng.uniform(-1.0, 1.0);
    const double c3 = rng.uniform(-1.0, 1.0);
    for (std::size_t i = 0; i <= p.n; ++i) {
      const double t = v.t(i);
      v.at(i, 0) = c1 * std::sin(3.0 * t) + c2 * t * t;
      v.at(i, 1) = c3 * std::cos(5.0 * t) - c3;
    }
    const FracOrder ord(p.a);
    const auto sum = fpde::fraccore::soe_history(ord, p.eps, v.h, v.t(p.n));
    const TimeSeries dense = fpde::fraccore::caputo_derivative(v, ord);
    const TimeSeries fast = fpde::fraccore::caputo_derivative_soe(v, ord, sum);
    double scale = 0.0, gap = 0.0;
    for (std::size_t i = 0; i < dense.values.size(); ++i)
      scale = std::max(scale, std::fabs(dense.values[i]));
    for (std::size_t i = 0; i < dense.values.size(); ++i)
      gap = std::max(gap, std::fabs(dense.values[i] - fast.values[i]));
    CHECK(gap / scale <= 10.0 * p.eps);
  }
}

TEST_CASE("time labels do not affect the derivative values") {
  fpde::RngStream rng(0x31u, 9u);
  TimeSeries v = TimeSeries::zeros(0.0, 0.03, 25, 1);
  for (auto& x : v.values) x = rng.uniform(-1.0, 1.0);
  TimeSeries w = v;
  w.t0 = 12.75;
  const TimeSeries dv = fpde::fraccore::caputo_derivative(v, FracOrder(0.45));
  const TimeSeries dw = fpde::fraccore::caputo_derivative(w, FracOrder(0.45));
  for (std::size_t i = 0; i < dv.values.size(); ++i)
    CHECK(dv.values[i] == dw.values[i]);
}
