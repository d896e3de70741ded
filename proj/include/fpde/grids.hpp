#pragma once
#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fpde/fraccore.hpp"

namespace fpde::grids {

// Uniform time lattice t_i = t0 + i h, i = 0..steps.  In every measure and
// norm a node carries the cell ending at it, so node 0 has zero weight and
// the lattice measure of (t0, T] is exactly T - t0.
struct TimeGrid {
  double t0 = 0.0;
  double h = 0.0;
  std::size_t steps = 0;

  std::size_t nodes() const { return steps + 1; }
  double t(std::size_t i) const { return t0 + h * static_cast<double>(i); }
  double T() const { return t(steps); }
  void validate() const;
};

// Periodic box [0,L)^dim with `cells` nodes per axis (axis 0 fastest).
struct SpaceGrid {
  int dim = 1;
  double length = 1.0;
  std::size_t cells = 1;

  double spacing() const { return length / static_cast<double>(cells); }
  std::size_t points() const;
  std::array<std::size_t, 3> coords(std::size_t idx) const;
  std::size_t index(const std::array<std::size_t, 3>& c) const;
  std::size_t shift(std::size_t idx, int axis, long long by) const;  // periodic
  double axis_dist(double a, double b) const;                        // periodic, in length units
  double dist(const std::array<double, 3>& a, const std::array<double, 3>& b) const;
  std::array<double, 3> node_pos(std::size_t idx) const;
  void validate() const;
};

// Dense space-time field, layout ((t * points + x) * components + c).
struct GridFunction {
  TimeGrid tg;
  SpaceGrid sg;
  std::size_t components = 1;
  std::vector<double> v;

  static GridFunction zeros(const TimeGrid& tg, const SpaceGrid& sg, std::size_t components = 1);
  double& at(std::size_t it, std::size_t ix, std::size_t c = 0) {
    return v[(it * sg.points() + ix) * components + c];
  }
  double at(std::size_t it, std::size_t ix, std::size_t c = 0) const {
    return v[(it * sg.points() + ix) * components + c];
  }
  double magnitude(std::size_t it, std::size_t ix) const;  // Euclidean over components
  void validate() const;
};

enum class CylShape { backward, two_sided };

// Backward shape covers (t - r_time^{2/alpha}, t] x B_{r_space}(x); the
// two-sided shape covers (t - e, t + e) with the same e = r_time^{2/alpha}.
struct ParabolicCylinder {
  CylShape shape = CylShape::backward;
  double t = 0.0;
  std::array<double, 3> x{0.0, 0.0, 0.0};
  double r_time = 0.0;
  double r_space = 0.0;
  double alpha = 0.5;

  double time_extent() const;
  static ParabolicCylinder square(double t, const std::array<double, 3>& x, double r, double alpha,
                                  CylShape shape = CylShape::backward);
  bool contains(double tau, const std::array<double, 3>& y, const SpaceGrid& sg) const;
};

struct CylinderNodes {
  std::vector<std::pair<std::size_t, std::size_t>> nodes;  // (time index, space index)
  bool radius_guard = false;  // r_space >= half box width: ball wraps onto itself
};

CylinderNodes cylinder_nodes(const ParabolicCylinder& cyl, const TimeGrid& tg, const SpaceGrid& sg);

// Central differences on the periodic lattice.  order 1 appends the axis
// index to the component (c*dim + axis); order 2 appends a symmetric pair
// index (c*dim*dim + i*dim + j).
GridFunction finite_diff(const GridFunction& u, int order);

enum class Deriv { value, grad, hessian, caputo };

struct NormSpec {
  double p = 2.0;  // HUGE_VAL means the sup norm
  std::optional<ParabolicCylinder> domain;
  Deriv deriv = Deriv::value;
  double alpha = 0.5;  // only consulted when deriv == caputo
};

double lp_norm(const GridFunction& u, const NormSpec& spec);
double lp_norm(const GridFunction& u, double p);  // whole lattice, plain values

enum class MixedOrder { time_outer, space_outer };

// time_outer: outer exponent over time of inner space norms per slice;
// space_outer: outer exponent over space of inner time norms per node.
double mixed_norm(const GridFunction& u, double p_outer, double q_inner, MixedOrder order);

struct HolderReport {
  double value = 0.0;
  bool exhaustive = true;
  std::size_t pairs = 0;
};

// sup |u(t,x)-u(s,y)| / (|t-s|^{sigma*alpha/2} + dist(x,y)^sigma) over node
// pairs, exhaustive up to 1e5 pairs and stratified-random (1e6 draws) above.
HolderReport holder_seminorm(const GridFunction& u, double sigma, double alpha,
                             const std::optional<ParabolicCylinder>& domain = std::nullopt);

// Time derivative applied column-wise; components preserved; node 0 is zero.
GridFunction caputo_field(const GridFunction& u, const fraccore::FracOrder& order);

GridFunction finite_diff_magnitude(const GridFunction& u, int order);  // scalar |D^k u|

double cell_volume(const TimeGrid& tg, const SpaceGrid& sg);

}  // namespace fpde::grids
