#pragma once
#include <array>
#include <cstdint>
#include <stdexcept>

#include "fpde/fraccore.hpp"
#include "fpde/grids.hpp"

namespace fpde::coeffs {

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operator data on a shared lattice: a symmetric d*d matrix field (row-major
// components), a d-vector field, and a scalar field.  `delta` is the
// ellipticity margin the field promises: eigenvalues of a in [delta, 1/delta]
// and |b|, |c| bounded by 1/delta.
struct CoefficientField {
  grids::TimeGrid tg;
  grids::SpaceGrid sg;
  double delta = 0.0;
  grids::GridFunction a;  // d*d components
  grids::GridFunction b;  // d components
  grids::GridFunction c;  // 1 component

  int dim() const { return sg.dim; }
  double a_at(std::size_t it, std::size_t ix, int i, int j) const {
    return a.at(it, ix, static_cast<std::size_t>(i * sg.dim + j));
  }
  double b_at(std::size_t it, std::size_t ix, int i) const { return b.at(it, ix, static_cast<std::size_t>(i)); }
  double c_at(std::size_t it, std::size_t ix) const { return c.at(it, ix, 0); }

  // Checks shapes, symmetry, the eigenvalue window, and the lower-order
  // bounds at every node; throws std::invalid_argument on violation.
  void validate() const;
};

// Piecewise-constant-in-time field: symmetric matrices with eigenvalues drawn
// uniformly from [delta, 1/delta] under a random rotation, switching at
// `n_switches` seeded uniform times; x-independent.  `lower_order` also draws
// b and c (bounded by 1/delta); otherwise both stay zero.
CoefficientField gen_rough_time(std::uint64_t seed, double delta, std::size_t n_switches,
                                const grids::TimeGrid& tg, const grids::SpaceGrid& sg,
                                bool lower_order = false);

struct OscillationReport {
  double r0 = 0.0;
  double gamma_measured = 0.0;       // sup over the sampled cylinder family
  bool is_lower_bound = true;        // lattice scan cannot certify the true sup
  std::size_t cylinders = 0;
  grids::ParabolicCylinder worst{};  // where the sup was attained
};

// Mean oscillation over one cylinder: per-slice spatial averages abar(t) over
// the cylinder's ball, then the space-time average of |a - abar(t)|, maximized
// over matrix entries.  Throws std::domain_error on an empty cylinder.
double mean_oscillation(const CoefficientField& f, const grids::ParabolicCylinder& cyl);

// Sup of mean_oscillation over lattice-centered cylinders with dyadic radii
// {r0, r0/2, ...} down to 4 lattice spacings (at least {r0}).  Centers are
// strided so at most `max_centers` are visited.
OscillationReport mean_oscillation_sup(const CoefficientField& f, double r0, double alpha,
                                       std::size_t max_centers = 2048);

struct BmoGenReport {
  CoefficientField field;
  double amplitude = 0.0;    // spatial perturbation size actually used
  double gamma_measured = 0.0;
  std::size_t halvings = 0;
};

// Rough-in-time base plus a smooth spatial perturbation whose amplitude is
// halved until the measured oscillation sup at radius r0 drops below gamma0;
// throws GenerationError when 40 halvings do not suffice.
BmoGenReport gen_bmo_space(std::uint64_t seed, double delta, double gamma0, double r0,
                           double alpha, const grids::TimeGrid& tg, const grids::SpaceGrid& sg);

struct DoublingReport {
  double long_value = 0.0;  // oscillation over the whole interval
  double block_sup = 0.0;   // worst single-block oscillation
  double bound = 0.0;       // 2 * block_sup
  std::size_t blocks = 0;
  bool pass = false;
};

// Chains per-block oscillations over (a_t, b_t] x B_{r0}(x0) into the
// long-interval value; the interval must be longer than one time block
// r0^{2/alpha}.  Numerators are lattice sums; denominators use the continuum
// time lengths, which makes long_value <= 2 * block_sup an exact-arithmetic
// consequence of the block covering.
DoublingReport doubling_check(const CoefficientField& f, const std::array<double, 3>& x0,
                              double a_t, double b_t, double r0, double alpha);

// One-sided space-time smoothing: convolution with a polynomial bump
// supported in (0, eps^{2/alpha}) x B_eps (looking backward in time, zero
// extension before the grid), discretely normalized to unit mass.
grids::GridFunction mollify(const grids::GridFunction& u, double eps, double alpha);

struct CommutatorReport {
  fraccore::TimeSeries g;
  double identity_residual = 0.0;  // sup gap in the product-rule identity
};

// g(t) = alpha/Gamma(1-alpha) * int_S^t (t-s)^{-alpha-1} (eta(s)-eta(t)) v(s) ds,
// by product integration; the (eta(s)-eta(t)) factor is folded in before
// discretization so the kernel stays integrable.  eta is a scalar series on
// v's grid with eta(start) = 0; S <= grid start with zero fill of v.
// The report also carries the residual of
//   D^alpha(eta v) = eta * d/dt I_S^{1-alpha} v - g
// evaluated on the grid.
CommutatorReport time_cutoff_commutator(const fraccore::TimeSeries& v,
                                        const fraccore::TimeSeries& eta,
                                        const fraccore::FracOrder& order, double S);

// Node-wise majorant of |g| for any ramp with slope bound M: the same product
// integration applied to the concave envelope M*(t_n - t_k)|v_k|.  The
// commutator result satisfies |g| <= this bound exactly (up to rounding).
fraccore::TimeSeries commutator_bound(const fraccore::TimeSeries& v, double M,
                                      const fraccore::FracOrder& order, double S);

}  // namespace fpde::coeffs
