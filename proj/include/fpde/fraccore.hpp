#pragma once
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fpde::fraccore {

// Fractional order restricted to (0,1); constructing anything outside throws.
class FracOrder {
 public:
  explicit FracOrder(double a);
  double value() const { return a_; }
 private:
  double a_;
};

double gamma_fn(double x);  // Gamma for x > 0 (Lanczos, reflection below 0.5).

// Uniformly sampled series: `width` independent columns share one time grid.
// Column c of node i lives at values[i*width + c].
struct TimeSeries {
  double t0 = 0.0;
  double h = 0.0;
  std::size_t width = 1;
  std::vector<double> values;

  std::size_t nodes() const { return width ? values.size() / width : 0; }
  std::size_t steps() const { return nodes() ? nodes() - 1 : 0; }
  double t(std::size_t i) const { return t0 + h * static_cast<double>(i); }
  double& at(std::size_t i, std::size_t c = 0) { return values[i * width + c]; }
  double at(std::size_t i, std::size_t c = 0) const { return values[i * width + c]; }

  static TimeSeries zeros(double t0, double h, std::size_t nodes, std::size_t width = 1);
  void validate() const;  // throws std::invalid_argument on malformed shape
};

// Per-grid convolution tables.
//   l1[j]   = (j+1)^{1-alpha} - j^{1-alpha}      (backward-difference kernel)
//   conv[m] = weight of psi_{n-m} in the order-alpha integral at node n, m>=1
//   edge[m] = extra weight of the origin sample at lag m (trailing cell tail)
//   conv0   = weight of the newest sample psi_n
// Integral weights integrate the piecewise-linear interpolant exactly.
struct KernelWeights {
  double alpha = 0.0;
  double h = 0.0;
  std::vector<double> l1;
  std::vector<double> conv;
  std::vector<double> edge;
  double conv0 = 0.0;

  static KernelWeights build(const FracOrder& order, double h, std::size_t n);
};

// Integral of order `order` with memory origin `origin` (<= series start).
// The gap [origin, t0), if any, is filled with zeros; it must span a whole
// number of steps.  Output lives on the input grid.
TimeSeries frac_integral(const TimeSeries& psi, const FracOrder& order, double origin);

// Backward-difference (L1) derivative of order `order`, origin at the series
// start.  Node 0 is set to 0 by convention.
TimeSeries caputo_derivative(const TimeSeries& psi, const FracOrder& order);

// d/dt of the order-(1-alpha) integral from `origin`, realized by central
// differencing of the product-integrated antiderivative (one-sided second
// order at the last node, 0 at node 0 by convention).
TimeSeries rl_derivative(const TimeSeries& psi, const FracOrder& order, double origin);

// max_{nodes,cols} |I^alpha(D^alpha psi) - psi|; requires psi(t0) = 0.
double inversion_residual(const TimeSeries& psi, const FracOrder& order);

struct SoeCapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// w_k e^{-rate_k s} approximation of s^{-alpha} on [window_lo, window_hi].
struct ExponentialSum {
  double alpha = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.0;
  std::vector<double> rate;
  std::vector<double> weight;
  double sup_rel_error = 0.0;  // measured on a dense log-spaced probe grid

  double eval(double s) const;
  std::size_t terms() const { return rate.size(); }
};

// Builds the compressed kernel by trapezoidal quadrature of the exponential
// integral representation of s^{-alpha}; throws SoeCapacityError if more
// than `max_terms` nodes would be needed for the requested accuracy.
ExponentialSum soe_history(const FracOrder& order, double eps, double window_lo,
                           double window_hi, std::size_t max_terms = 128);

// L1 derivative with the history lag replaced by the compressed kernel.
TimeSeries caputo_derivative_soe(const TimeSeries& psi, const FracOrder& order,
                                 const ExponentialSum& soe);

}  // namespace fpde::fraccore
