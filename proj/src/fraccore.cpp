#include "fpde/fraccore.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace fpde::fraccore {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

// m^e - (m-1)^e without cancellation for large m.
double pow_diff(double m, double e) {
  if (m <= 1.0) return std::pow(m, e);
  return std::pow(m, e) * (-std::expm1(e * std::log1p(-1.0 / m)));
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

}  // namespace

FracOrder::FracOrder(double a) : a_(a) {
  if (!(a > 0.0) || !(a < 1.0))
    throw std::domain_error(fmt("fractional order must lie in (0,1), got %.17g", a));
}

double gamma_fn(double x) {
  if (!(x > 0.0)) throw std::domain_error(fmt("gamma_fn requires a positive argument, got %.17g", x));
  // Reflection keeps the Lanczos core on arguments >= 0.5.
  if (x < 0.5) return kPi / (std::sin(kPi * x) * gamma_fn(1.0 - x));
  static const double g = 7.0;
  static const double coef[9] = {
      0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
      771.32342877765313,     -176.61502916214059,    12.507343278686905,
      -0.13857109526572012,   9.9843695780195716e-6,  1.5056327351493116e-7};
  const double z = x - 1.0;
  double acc = coef[0];
  for (int i = 1; i < 9; ++i) acc += coef[i] / (z + static_cast<double>(i));
  const double t = z + g + 0.5;
  return std::sqrt(2.0 * kPi) * std::pow(t, z + 0.5) * std::exp(-t) * acc;
}

TimeSeries TimeSeries::zeros(double t0, double h, std::size_t nodes, std::size_t width) {
  TimeSeries s;
  s.t0 = t0;
  s.h = h;
  s.width = width;
  s.values.assign(nodes * width, 0.0);
  return s;
}

void TimeSeries::validate() const {
  if (width == 0) throw std::invalid_argument("TimeSeries width must be positive");
  if (!(h > 0.0)) throw std::invalid_argument("TimeSeries step must be positive");
  if (values.size() % width != 0)
    throw std::invalid_argument("TimeSeries value buffer is not a whole number of nodes");
  if (values.size() / width < 2)
    throw std::invalid_argument("TimeSeries needs at least two nodes");
}

KernelWeights KernelWeights::build(const FracOrder& order, double h, std::size_t n) {
  if (!(h > 0.0)) throw std::invalid_argument("KernelWeights: step must be positive");
  const double a = order.value();
  KernelWeights w;
  w.alpha = a;
  w.h = h;
  w.l1.resize(n);
  for (std::size_t j = 0; j < n; ++j)
    w.l1[j] = pow_diff(static_cast<double>(j + 1), 1.0 - a);

  // Cell weights of the piecewise-linear product integration.  On the cell
  // at lag m (kernel argument between (m-1)h and mh) the hat functions give
  // one weight to the older endpoint sample and one to the newer.
  auto older = [a](double m) {
    return pow_diff(m, a + 1.0) / (a + 1.0) - (m - 1.0) * pow_diff(m, a) / a;
  };
  auto newer = [a](double m) {
    return m * pow_diff(m, a) / a - pow_diff(m, a + 1.0) / (a + 1.0);
  };
  w.conv0 = 1.0 / (a * (a + 1.0));  // newer(1)
  w.conv.assign(n, 0.0);
  w.edge.assign(n + 1, 0.0);
  for (std::size_t m = 1; m < n; ++m)
    w.conv[m] = older(static_cast<double>(m)) + newer(static_cast<double>(m + 1));
  for (std::size_t m = 1; m <= n; ++m) w.edge[m] = older(static_cast<double>(m));
  return w;
}

TimeSeries frac_integral(const TimeSeries& psi, const FracOrder& order, double origin) {
  psi.validate();
  const std::size_t nodes = psi.nodes();
  const double gap = psi.t0 - origin;
  if (gap < -1e-12 * std::max(1.0, std::abs(psi.t0)))
    throw std::invalid_argument("frac_integral: origin must not exceed the series start");
  const double steps = gap / psi.h;
  const auto prepad = static_cast<std::size_t>(std::llround(steps));
  if (std::abs(steps - static_cast<double>(prepad)) > 1e-9)
    throw std::invalid_argument(
        fmt("frac_integral: origin gap %.17g is not a whole number of steps of %.17g", gap, psi.h));

  const std::size_t ext = nodes + prepad;  // zero-filled virtual nodes in front
  const KernelWeights w = KernelWeights::build(order, psi.h, ext);
  const double a = order.value();
  const double pref = std::pow(psi.h, a) / gamma_fn(a);

  TimeSeries out = TimeSeries::zeros(psi.t0, psi.h, nodes, psi.width);
  const std::size_t width = psi.width;
  for (std::size_t i = 0; i < nodes; ++i) {
    const std::size_t e = i + prepad;  // extended node index
    if (e == 0) continue;              // integral vanishes at the origin itself
    for (std::size_t c = 0; c < width; ++c) {
      double acc = w.conv0 * psi.at(i, c);
      // Lags reaching the zero prefix contribute nothing.
      const std::size_t mmax = std::min(e - 1, i);
      const double* col = psi.values.data() + c;
      for (std::size_t m = 1; m <= mmax; ++m) acc += w.conv[m] * col[(i - m) * width];
      if (prepad == 0) acc += w.edge[e] * psi.at(0, c);
      out.at(i, c) = pref * acc;
    }
  }
  return out;
}

TimeSeries caputo_derivative(const TimeSeries& psi, const FracOrder& order) {
  psi.validate();
  const std::size_t nodes = psi.nodes();
  const std::size_t width = psi.width;
  const double a = order.value();
  const KernelWeights w = KernelWeights::build(order, psi.h, nodes);
  const double pref = std::pow(psi.h, -a) / gamma_fn(2.0 - a);

  TimeSeries out = TimeSeries::zeros(psi.t0, psi.h, nodes, width);
  for (std::size_t n = 1; n < nodes; ++n) {
    for (std::size_t c = 0; c < width; ++c) {
      double acc = 0.0;
      const double* col = psi.values.data() + c;
      for (std::size_t k = 0; k < n; ++k)
        acc += w.l1[n - 1 - k] * (col[(k + 1) * width] - col[k * width]);
      out.at(n, c) = pref * acc;
    }
  }
  return out;
}

TimeSeries rl_derivative(const TimeSeries& psi, const FracOrder& order, double origin) {
  const FracOrder conj(1.0 - order.value());
  const TimeSeries G = frac_integral(psi, conj, origin);
  const std::size_t nodes = psi.nodes();
  const std::size_t width = psi.width;
  TimeSeries out = TimeSeries::zeros(psi.t0, psi.h, nodes, width);
  const double h = psi.h;
  for (std::size_t c = 0; c < width; ++c) {
    for (std::size_t i = 1; i + 1 < nodes; ++i)
      out.at(i, c) = (G.at(i + 1, c) - G.at(i - 1, c)) / (2.0 * h);
    if (nodes >= 3)
      out.at(nodes - 1, c) =
          (3.0 * G.at(nodes - 1, c) - 4.0 * G.at(nodes - 2, c) + G.at(nodes - 3, c)) / (2.0 * h);
    else
      out.at(nodes - 1, c) = (G.at(nodes - 1, c) - G.at(nodes - 2, c)) / h;
  }
  return out;
}

double inversion_residual(const TimeSeries& psi, const FracOrder& order) {
  psi.validate();
  double scale = 0.0;
  for (double v : psi.values) scale = std::max(scale, std::abs(v));
  for (std::size_t c = 0; c < psi.width; ++c)
    if (std::abs(psi.at(0, c)) > 1e-14 * std::max(1.0, scale))
      throw std::invalid_argument(
          fmt("inversion_residual requires a zero start value, got %.17g in column %.0f",
              psi.at(0, c), static_cast<double>(c)));
  const TimeSeries d = caputo_derivative(psi, order);
  const TimeSeries r = frac_integral(d, order, psi.t0);
  double worst = 0.0;
  for (std::size_t i = 0; i < psi.nodes(); ++i)
    for (std::size_t c = 0; c < psi.width; ++c)
      worst = std::max(worst, std::abs(r.at(i, c) - psi.at(i, c)));
  return worst;
}

double ExponentialSum::eval(double s) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < rate.size(); ++k) acc += weight[k] * std::exp(-rate[k] * s);
  return acc;
}

namespace {

double measured_sup_rel_error(const ExponentialSum& soe) {
  const int probes = 400;
  double worst = 0.0;
  const double llo = std::log(soe.window_lo), lhi = std::log(soe.window_hi);
  for (int i = 0; i <= probes; ++i) {
    const double s = std::exp(llo + (lhi - llo) * i / probes);
    const double exact = std::pow(s, -soe.alpha);
    worst = std::max(worst, std::abs(soe.eval(s) - exact) / exact);
  }
  return worst;
}

}  // namespace

ExponentialSum soe_history(const FracOrder& order, double eps, double window_lo,
                           double window_hi, std::size_t max_terms) {
  if (!(eps > 0.0)) throw std::invalid_argument("soe_history: eps must be positive");
  if (!(window_lo > 0.0) || !(window_hi >= window_lo))
    throw std::invalid_argument("soe_history: window must satisfy 0 < lo <= hi");
  const double a = order.value();

  ExponentialSum soe;
  soe.alpha = a;
  soe.window_lo = window_lo;
  soe.window_hi = window_hi;

  if (window_hi <= window_lo * (1.0 + 1e-12)) {
    // Degenerate window: one exponential matches value and slope at the point.
    soe.rate = {a / window_lo};
    soe.weight = {std::pow(window_lo, -a) * std::exp(a)};
    soe.sup_rel_error = 0.0;
    return soe;
  }

  // Quadrature of the Laplace representation of s^{-alpha} over log-rate.
  const double y_min = std::log(gamma_fn(a + 1.0) * eps / 4.0) / a - std::log(window_hi);
  const double big = std::log(4.0 / eps);
  const double X = big + 2.0 * std::log(big + 4.0) + 4.0;
  const double y_max = std::log(X / window_lo);
  const double ginv = 1.0 / gamma_fn(a);

  double tau = kPi * kPi / (big + 3.0);
  for (int attempt = 0; attempt < 30; ++attempt) {
    const auto terms = static_cast<std::size_t>(std::ceil((y_max - y_min) / tau)) + 1;
    if (terms > max_terms)
      throw SoeCapacityError(fmt(
          "soe_history: %g terms needed for eps=%g exceed the cap", static_cast<double>(terms), eps));
    soe.rate.assign(terms, 0.0);
    soe.weight.assign(terms, 0.0);
    for (std::size_t j = 0; j < terms; ++j) {
      const double y = y_min + tau * static_cast<double>(j);
      soe.rate[j] = std::exp(y);
      soe.weight[j] = tau * ginv * std::exp(a * y);
    }
    soe.sup_rel_error = measured_sup_rel_error(soe);
    if (soe.sup_rel_error <= eps) {
      // Drop terms whose whole-window contribution is below noise.
      const double floor = eps * std::pow(window_hi, -a) / (10.0 * static_cast<double>(terms));
      ExponentialSum pruned = soe;
      pruned.rate.clear();
      pruned.weight.clear();
      for (std::size_t j = 0; j < terms; ++j) {
        if (soe.weight[j] * std::exp(-soe.rate[j] * window_lo) >= floor) {
          pruned.rate.push_back(soe.rate[j]);
          pruned.weight.push_back(soe.weight[j]);
        }
      }
      pruned.sup_rel_error = measured_sup_rel_error(pruned);
      if (pruned.sup_rel_error <= eps) return pruned;
      return soe;
    }
    tau *= 0.8;
  }
  throw SoeCapacityError("soe_history: accuracy loop failed to converge");
}

TimeSeries caputo_derivative_soe(const TimeSeries& psi, const FracOrder& order,
                                 const ExponentialSum& soe) {
  psi.validate();
  const std::size_t nodes = psi.nodes();
  const std::size_t width = psi.width;
  const double a = order.value();
  const double h = psi.h;
  if (soe.window_lo > h * (1.0 + 1e-9) ||
      soe.window_hi < h * static_cast<double>(nodes - 1) * (1.0 - 1e-9))
    throw std::invalid_argument("caputo_derivative_soe: kernel window does not cover the grid");

  const double c0 = std::pow(h, -a) / gamma_fn(2.0 - a);
  const double hist_pref = 1.0 / gamma_fn(1.0 - a);
  const std::size_t terms = soe.terms();

  std::vector<double> decay(terms), phi(terms);
  for (std::size_t k = 0; k < terms; ++k) {
    const double z = soe.rate[k] * h;
    decay[k] = std::exp(-z);
    phi[k] = z > 1e-8 ? -std::expm1(-z) / z : 1.0 - z / 2.0 + z * z / 6.0;
  }

  TimeSeries out = TimeSeries::zeros(psi.t0, psi.h, nodes, width);
  std::vector<double> state(terms * width, 0.0);  // integral of e^{-rate (t_n - s)} psi'
  for (std::size_t n = 1; n < nodes; ++n) {
    for (std::size_t c = 0; c < width; ++c) {
      double hist = 0.0;
      for (std::size_t k = 0; k < terms; ++k) hist += soe.weight[k] * state[k * width + c];
      out.at(n, c) = c0 * (psi.at(n, c) - psi.at(n - 1, c)) + hist_pref * hist;
    }
    if (n + 1 < nodes) {
      for (std::size_t c = 0; c < width; ++c) {
        const double dpsi = psi.at(n, c) - psi.at(n - 1, c);
        for (std::size_t k = 0; k < terms; ++k) {
          double& s = state[k * width + c];
          s = decay[k] * (s + dpsi * phi[k]);
        }
      }
    }
  }
  return out;
}

}  // namespace fpde::fraccore
