#include "fpde/grids.hpp"

#include <algorithm>
#include <cmath>

#include "fpde/rng.hpp"

namespace fpde::grids {

void TimeGrid::validate() const {
  if (!(h > 0.0)) throw std::invalid_argument("TimeGrid: step must be positive");
  if (steps == 0) throw std::invalid_argument("TimeGrid: needs at least one step");
}

std::size_t SpaceGrid::points() const {
  std::size_t p = 1;
  for (int a = 0; a < dim; ++a) p *= cells;
  return p;
}

std::array<std::size_t, 3> SpaceGrid::coords(std::size_t idx) const {
  std::array<std::size_t, 3> c{0, 0, 0};
  for (int a = 0; a < dim; ++a) {
    c[a] = idx % cells;
    idx /= cells;
  }
  return c;
}

std::size_t SpaceGrid::index(const std::array<std::size_t, 3>& c) const {
  std::size_t idx = 0;
  for (int a = dim - 1; a >= 0; --a) idx = idx * cells + c[a];
  return idx;
}

std::size_t SpaceGrid::shift(std::size_t idx, int axis, long long by) const {
  auto c = coords(idx);
  const auto m = static_cast<long long>(cells);
  long long v = (static_cast<long long>(c[axis]) + by) % m;
  if (v < 0) v += m;
  c[axis] = static_cast<std::size_t>(v);
  return index(c);
}

double SpaceGrid::axis_dist(double a, double b) const {
  double d = std::fmod(std::abs(a - b), length);
  return std::min(d, length - d);
}

double SpaceGrid::dist(const std::array<double, 3>& a, const std::array<double, 3>& b) const {
  double s = 0.0;
  for (int ax = 0; ax < dim; ++ax) {
    const double d = axis_dist(a[ax], b[ax]);
    s += d * d;
  }
  return std::sqrt(s);
}

std::array<double, 3> SpaceGrid::node_pos(std::size_t idx) const {
  const auto c = coords(idx);
  std::array<double, 3> p{0.0, 0.0, 0.0};
  for (int a = 0; a < dim; ++a) p[a] = spacing() * static_cast<double>(c[a]);
  return p;
}

void SpaceGrid::validate() const {
  if (dim < 1 || dim > 3) throw std::invalid_argument("SpaceGrid: dim must be 1, 2 or 3");
  if (!(length > 0.0)) throw std::invalid_argument("SpaceGrid: length must be positive");
  if (cells < 4) throw std::invalid_argument("SpaceGrid: needs at least 4 cells per axis");
}

GridFunction GridFunction::zeros(const TimeGrid& tg, const SpaceGrid& sg, std::size_t components) {
  tg.validate();
  sg.validate();
  GridFunction u;
  u.tg = tg;
  u.sg = sg;
  u.components = components;
  u.v.assign(tg.nodes() * sg.points() * components, 0.0);
  return u;
}

double GridFunction::magnitude(std::size_t it, std::size_t ix) const {
  const double* p = v.data() + (it * sg.points() + ix) * components;
  double s = 0.0;
  for (std::size_t c = 0; c < components; ++c) s += p[c] * p[c];
  return std::sqrt(s);
}

void GridFunction::validate() const {
  tg.validate();
  sg.validate();
  if (components == 0) throw std::invalid_argument("GridFunction: components must be positive");
  if (v.size() != tg.nodes() * sg.points() * components)
    throw std::invalid_argument("GridFunction: buffer size does not match the lattice");
}

double ParabolicCylinder::time_extent() const {
  return std::pow(r_time, 2.0 / alpha);
}

ParabolicCylinder ParabolicCylinder::square(double t, const std::array<double, 3>& x, double r,
                                            double alpha, CylShape shape) {
  ParabolicCylinder c;
  c.shape = shape;
  c.t = t;
  c.x = x;
  c.r_time = r;
  c.r_space = r;
  c.alpha = alpha;
  return c;
}

bool ParabolicCylinder::contains(double tau, const std::array<double, 3>& y,
                                 const SpaceGrid& sg) const {
  const double e = time_extent();
  const bool in_time = shape == CylShape::backward ? (tau > t - e && tau <= t)
                                                   : (tau > t - e && tau < t + e);
  if (!in_time) return false;
  return sg.dist(y, x) < r_space;
}

CylinderNodes cylinder_nodes(const ParabolicCylinder& cyl, const TimeGrid& tg,
                             const SpaceGrid& sg) {
  tg.validate();
  sg.validate();
  if (!(cyl.r_time > 0.0) || !(cyl.r_space > 0.0))
    throw std::invalid_argument("cylinder_nodes: radii must be positive");
  CylinderNodes out;
  out.radius_guard = cyl.r_space >= 0.5 * sg.length;

  std::vector<std::size_t> ball;
  for (std::size_t ix = 0; ix < sg.points(); ++ix)
    if (sg.dist(sg.node_pos(ix), cyl.x) < cyl.r_space) ball.push_back(ix);

  const double e = cyl.time_extent();
  const double lo = cyl.t - e;
  const double hi = cyl.shape == CylShape::backward ? cyl.t : cyl.t + e;
  for (std::size_t it = 0; it < tg.nodes(); ++it) {
    const double tau = tg.t(it);
    const bool in_time = cyl.shape == CylShape::backward ? (tau > lo && tau <= hi)
                                                         : (tau > lo && tau < hi);
    if (!in_time) continue;
    for (std::size_t ix : ball) out.nodes.emplace_back(it, ix);
  }
  return out;
}

GridFunction finite_diff(const GridFunction& u, int order) {
  u.validate();
  if (order != 1 && order != 2)
    throw std::invalid_argument("finite_diff: order must be 1 or 2");
  const int d = u.sg.dim;
  const double sp = u.sg.spacing();
  const std::size_t pts = u.sg.points();
  const std::size_t comps = u.components;
  const std::size_t out_comps = order == 1 ? comps * d : comps * d * d;
  GridFunction out = GridFunction::zeros(u.tg, u.sg, out_comps);

  // Per-axis periodic neighbor tables.
  std::vector<std::size_t> plus(pts * d), minus(pts * d);
  for (std::size_t ix = 0; ix < pts; ++ix)
    for (int a = 0; a < d; ++a) {
      plus[ix * d + a] = u.sg.shift(ix, a, +1);
      minus[ix * d + a] = u.sg.shift(ix, a, -1);
    }

  for (std::size_t it = 0; it < u.tg.nodes(); ++it) {
    for (std::size_t ix = 0; ix < pts; ++ix) {
      for (std::size_t c = 0; c < comps; ++c) {
        if (order == 1) {
          for (int a = 0; a < d; ++a) {
            const double up = u.at(it, plus[ix * d + a], c);
            const double um = u.at(it, minus[ix * d + a], c);
            out.at(it, ix, c * d + a) = (up - um) / (2.0 * sp);
          }
        } else {
          for (int a = 0; a < d; ++a) {
            for (int b = 0; b < d; ++b) {
              double val;
              if (a == b) {
                val = (u.at(it, plus[ix * d + a], c) - 2.0 * u.at(it, ix, c) +
                       u.at(it, minus[ix * d + a], c)) /
                      (sp * sp);
              } else {
                const std::size_t pp = u.sg.shift(plus[ix * d + a], b, +1);
                const std::size_t pm = u.sg.shift(plus[ix * d + a], b, -1);
                const std::size_t mp = u.sg.shift(minus[ix * d + a], b, +1);
                const std::size_t mm = u.sg.shift(minus[ix * d + a], b, -1);
                val = (u.at(it, pp, c) - u.at(it, pm, c) - u.at(it, mp, c) + u.at(it, mm, c)) /
                      (4.0 * sp * sp);
              }
              out.at(it, ix, (c * d + a) * d + b) = val;
            }
          }
        }
      }
    }
  }
  return out;
}

GridFunction caputo_field(const GridFunction& u, const fraccore::FracOrder& order) {
  u.validate();
  fraccore::TimeSeries s;
  s.t0 = u.tg.t0;
  s.h = u.tg.h;
  s.width = u.sg.points() * u.components;
  s.values = u.v;
  const fraccore::TimeSeries d = fraccore::caputo_derivative(s, order);
  GridFunction out = u;
  out.v = d.values;
  return out;
}

GridFunction finite_diff_magnitude(const GridFunction& u, int order) {
  const GridFunction d = finite_diff(u, order);
  GridFunction out = GridFunction::zeros(u.tg, u.sg, 1);
  for (std::size_t it = 0; it < u.tg.nodes(); ++it)
    for (std::size_t ix = 0; ix < u.sg.points(); ++ix) out.at(it, ix) = d.magnitude(it, ix);
  return out;
}

double cell_volume(const TimeGrid& tg, const SpaceGrid& sg) {
  double v = tg.h;
  for (int a = 0; a < sg.dim; ++a) v *= sg.spacing();
  return v;
}

namespace {

GridFunction apply_deriv(const GridFunction& u, const NormSpec& spec) {
  switch (spec.deriv) {
    case Deriv::value:
      return u;
    case Deriv::grad:
      return finite_diff(u, 1);
    case Deriv::hessian:
      return finite_diff(u, 2);
    case Deriv::caputo:
      return caputo_field(u, fraccore::FracOrder(spec.alpha));
  }
  throw std::logic_error("apply_deriv: unknown selector");
}

}  // namespace

double lp_norm(const GridFunction& u, const NormSpec& spec) {
  u.validate();
  const GridFunction g = apply_deriv(u, spec);
  const double vol = cell_volume(u.tg, u.sg);

  std::vector<std::pair<std::size_t, std::size_t>> sel;
  if (spec.domain) {
    sel = cylinder_nodes(*spec.domain, u.tg, u.sg).nodes;
    std::erase_if(sel, [](const auto& n) { return n.first == 0; });
    if (sel.empty())
      throw std::domain_error("lp_norm: domain has empty intersection with the lattice");
  }

  const bool sup = std::isinf(spec.p);
  double acc = 0.0;
  auto eat = [&](std::size_t it, std::size_t ix) {
    const double m = g.magnitude(it, ix);
    if (sup)
      acc = std::max(acc, m);
    else
      acc += std::pow(m, spec.p) * vol;
  };
  if (spec.domain) {
    for (const auto& [it, ix] : sel) eat(it, ix);
  } else {
    for (std::size_t it = 1; it < u.tg.nodes(); ++it)
      for (std::size_t ix = 0; ix < u.sg.points(); ++ix) eat(it, ix);
  }
  return sup ? acc : std::pow(acc, 1.0 / spec.p);
}

double lp_norm(const GridFunction& u, double p) {
  NormSpec s;
  s.p = p;
  return lp_norm(u, s);
}

double mixed_norm(const GridFunction& u, double p_outer, double q_inner, MixedOrder order) {
  u.validate();
  const double sp_meas = std::pow(u.sg.spacing(), u.sg.dim);
  const bool osup = std::isinf(p_outer);
  const bool isup = std::isinf(q_inner);

  auto finish = [](double acc, double p, bool sup) { return sup ? acc : std::pow(acc, 1.0 / p); };

  if (order == MixedOrder::time_outer) {
    double outer = 0.0;
    for (std::size_t it = 1; it < u.tg.nodes(); ++it) {
      double inner = 0.0;
      for (std::size_t ix = 0; ix < u.sg.points(); ++ix) {
        const double m = u.magnitude(it, ix);
        inner = isup ? std::max(inner, m) : inner + std::pow(m, q_inner) * sp_meas;
      }
      inner = finish(inner, q_inner, isup);
      outer = osup ? std::max(outer, inner) : outer + std::pow(inner, p_outer) * u.tg.h;
    }
    return finish(outer, p_outer, osup);
  }
  double outer = 0.0;
  for (std::size_t ix = 0; ix < u.sg.points(); ++ix) {
    double inner = 0.0;
    for (std::size_t it = 1; it < u.tg.nodes(); ++it) {
      const double m = u.magnitude(it, ix);
      inner = isup ? std::max(inner, m) : inner + std::pow(m, q_inner) * u.tg.h;
    }
    inner = finish(inner, q_inner, isup);
    outer = osup ? std::max(outer, inner) : outer + std::pow(inner, p_outer) * sp_meas;
  }
  return finish(outer, p_outer, osup);
}

HolderReport holder_seminorm(const GridFunction& u, double sigma, double alpha,
                             const std::optional<ParabolicCylinder>& domain) {
  u.validate();
  if (!(sigma > 0.0) || !(sigma <= 1.0))
    throw std::invalid_argument("holder_seminorm: sigma must lie in (0,1]");

  std::vector<std::pair<std::size_t, std::size_t>> sel;
  if (domain) {
    sel = cylinder_nodes(*domain, u.tg, u.sg).nodes;
  } else {
    sel.reserve(u.tg.nodes() * u.sg.points());
    for (std::size_t it = 0; it < u.tg.nodes(); ++it)
      for (std::size_t ix = 0; ix < u.sg.points(); ++ix) sel.emplace_back(it, ix);
  }
  if (sel.size() < 2) throw std::domain_error("holder_seminorm: fewer than two nodes in domain");

  const double texp = sigma * alpha / 2.0;
  auto ratio = [&](const std::pair<std::size_t, std::size_t>& a,
                   const std::pair<std::size_t, std::size_t>& b) {
    if (a == b) return 0.0;
    const double dt = std::abs(u.tg.t(a.first) - u.tg.t(b.first));
    const double dx = u.sg.dist(u.sg.node_pos(a.second), u.sg.node_pos(b.second));
    const double den = std::pow(dt, texp) + std::pow(dx, sigma);
    if (den == 0.0) return 0.0;
    double diff = 0.0;
    for (std::size_t c = 0; c < u.components; ++c) {
      const double dc = u.at(a.first, a.second, c) - u.at(b.first, b.second, c);
      diff += dc * dc;
    }
    return std::sqrt(diff) / den;
  };

  HolderReport rep;
  const std::size_t K = sel.size();
  const std::size_t total_pairs = K * (K - 1) / 2;
  if (total_pairs <= 100000) {
    rep.exhaustive = true;
    rep.pairs = total_pairs;
    for (std::size_t i = 0; i < K; ++i)
      for (std::size_t j = i + 1; j < K; ++j) rep.value = std::max(rep.value, ratio(sel[i], sel[j]));
    return rep;
  }

  // Stratified sampling: half the draws are uniform pairs, half pair a node
  // with a nearby one (geometric offsets) so the near-diagonal is covered.
  rep.exhaustive = false;
  const std::size_t draws = 1000000;
  rep.pairs = draws;
  CounterRng rng(0x484c4452u + static_cast<std::uint64_t>(K));
  const long long tspan = static_cast<long long>(u.tg.steps);
  const long long xspan = static_cast<long long>(u.sg.cells);
  for (std::size_t k = 0; k < draws; ++k) {
    const auto& a = sel[rng.below(4 * k, K)];
    std::pair<std::size_t, std::size_t> b;
    if (k % 2 == 0) {
      b = sel[rng.below(4 * k + 1, K)];
      if (domain && b == a) continue;
    } else {
      // geometric scales: lag in {1,2,4,...}
      const auto oct = static_cast<long long>(rng.below(4 * k + 1, 8));
      const long long lag = 1ll << std::min(oct, 20ll);
      long long dt = static_cast<long long>(rng.below(4 * k + 2, 2 * lag + 1)) - lag;
      long long it = static_cast<long long>(a.first) + (dt % (tspan + 1));
      if (it < 0) it = 0;
      if (it > tspan) it = tspan;
      std::size_t ix = a.second;
      for (int ax = 0; ax < u.sg.dim; ++ax) {
        long long dx = static_cast<long long>(rng.below(4 * k + 3 + ax, 2 * lag + 1)) - lag;
        ix = u.sg.shift(ix, ax, dx % xspan);
      }
      b = {static_cast<std::size_t>(it), ix};
      if (domain) {
        // stay inside the requested region
        const auto pos = u.sg.node_pos(b.second);
        if (!domain->contains(u.tg.t(b.first), pos, u.sg)) continue;
      }
    }
    rep.value = std::max(rep.value, ratio(a, b));
  }
  return rep;
}

}  // namespace fpde::grids
