#include "fpde/coeffs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "fpde/linalg.hpp"
#include "fpde/rng.hpp"

namespace fpde::coeffs {

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

std::string fmt(const char* f, double x) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

// Random rotation: identity for d=1, a sampled angle for d=2, Gram-Schmidt
// on normal draws for d=3.
void random_rotation(fpde::RngStream& rng, int d, double q[3][3]) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) q[i][j] = i == j ? 1.0 : 0.0;
  if (d == 2) {
    const double th = rng.uniform(0.0, kTau);
    q[0][0] = std::cos(th);
    q[0][1] = -std::sin(th);
    q[1][0] = std::sin(th);
    q[1][1] = std::cos(th);
  } else if (d == 3) {
    for (int i = 0; i < 3; ++i) {
      double v[3];
      double norm = 0.0;
      do {
        for (double& x : v) x = rng.normal();
        for (int k = 0; k < i; ++k) {
          double dot = 0.0;
          for (int j = 0; j < 3; ++j) dot += v[j] * q[k][j];
          for (int j = 0; j < 3; ++j) v[j] -= dot * q[k][j];
        }
        norm = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
      } while (norm < 1e-6);
      for (int j = 0; j < 3; ++j) q[i][j] = v[j] / norm;
    }
  }
}

// Symmetric matrix from eigenvalues lam and rotation rows q_k: sum_k lam_k q_k q_k^T.
void assemble_spd(int d, const double lam[3], const double q[3][3], double* out) {
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += lam[k] * q[k][i] * q[k][j];
      out[i * d + j] = s;
    }
}

std::vector<double> switch_times(fpde::RngStream& rng, const grids::TimeGrid& tg,
                                 std::size_t n_switches) {
  std::vector<double> sw(n_switches);
  for (auto& s : sw) s = rng.uniform(tg.t0, tg.T());
  std::sort(sw.begin(), sw.end());
  return sw;
}

std::size_t segment_of(const std::vector<double>& sw, double t) {
  std::size_t k = 0;
  while (k < sw.size() && sw[k] <= t) ++k;
  return k;
}

struct SliceGroups {
  std::vector<std::size_t> times;                // distinct time indices
  std::vector<std::vector<std::size_t>> spaces;  // ball nodes per time index
};

SliceGroups group_by_slice(const grids::CylinderNodes& cn) {
  SliceGroups g;
  std::map<std::size_t, std::vector<std::size_t>> m;
  for (const auto& n : cn.nodes) m[n.first].push_back(n.second);
  for (auto& [it, xs] : m) {
    g.times.push_back(it);
    g.spaces.push_back(std::move(xs));
  }
  return g;
}

double bump(double r2) {  // (1 - r^2)^4 profile, zero outside the unit ball
  const double s = 1.0 - r2;
  return s > 0.0 ? s * s * s * s : 0.0;
}

}  // namespace

void CoefficientField::validate() const {
  tg.validate();
  sg.validate();
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("CoefficientField: delta must lie in (0,1)");
  const int d = sg.dim;
  a.validate();
  b.validate();
  c.validate();
  if (a.components != static_cast<std::size_t>(d * d) ||
      b.components != static_cast<std::size_t>(d) || c.components != 1)
    throw std::invalid_argument("CoefficientField: component counts do not match dim");
  const double tol = 1e-9;
  const double inv = 1.0 / delta;
  std::vector<double> m(static_cast<std::size_t>(d) * static_cast<std::size_t>(d));
  for (std::size_t it = 0; it < tg.nodes(); ++it)
    for (std::size_t ix = 0; ix < sg.points(); ++ix) {
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          const double v = a_at(it, ix, i, j);
          if (std::fabs(v - a_at(it, ix, j, i)) > tol)
            throw std::invalid_argument("CoefficientField: matrix not symmetric");
          m[static_cast<std::size_t>(i * d + j)] = v;
        }
      const auto ev = linalg::sym_eigenvalues(m, static_cast<std::size_t>(d));
      if (ev.front() < delta - tol)
        throw std::invalid_argument(
            fmt("CoefficientField: eigenvalue %.6g below the ellipticity floor", ev.front()));
      if (ev.back() > inv + tol)
        throw std::invalid_argument("CoefficientField: eigenvalue above the 1/delta ceiling");
      for (int i = 0; i < d; ++i)
        if (std::fabs(b_at(it, ix, i)) > inv + tol)
          throw std::invalid_argument("CoefficientField: |b| above 1/delta");
      if (std::fabs(c_at(it, ix)) > inv + tol)
        throw std::invalid_argument("CoefficientField: |c| above 1/delta");
    }
}

CoefficientField gen_rough_time(std::uint64_t seed, double delta, std::size_t n_switches,
                                const grids::TimeGrid& tg, const grids::SpaceGrid& sg,
                                bool lower_order) {
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("gen_rough_time: delta must lie in (0,1)");
  if (n_switches < 1) throw std::invalid_argument("gen_rough_time: need at least one switch");
  tg.validate();
  sg.validate();
  const int d = sg.dim;

  fpde::RngStream rng(seed, 0xc0efu);
  const std::vector<double> sw = switch_times(rng, tg, n_switches);

  // One matrix (and optional lower-order data) per constant segment.
  const std::size_t segs = n_switches + 1;
  std::vector<std::array<double, 9>> mats(segs);
  std::vector<std::array<double, 3>> bs(segs, std::array<double, 3>{0.0, 0.0, 0.0});
  std::vector<double> cs(segs, 0.0);
  for (std::size_t s = 0; s < segs; ++s) {
    double lam[3] = {1.0, 1.0, 1.0};
    for (int k = 0; k < d; ++k) lam[k] = rng.uniform(delta, 1.0 / delta);
    double q[3][3];
    random_rotation(rng, d, q);
    assemble_spd(d, lam, q, mats[s].data());
    if (lower_order) {
      for (int k = 0; k < d; ++k)
        bs[s][static_cast<std::size_t>(k)] = rng.uniform(-1.0 / delta, 1.0 / delta);
      cs[s] = rng.uniform(-1.0 / delta, 1.0 / delta);
    }
  }

  CoefficientField f;
  f.tg = tg;
  f.sg = sg;
  f.delta = delta;
  f.a = grids::GridFunction::zeros(tg, sg, static_cast<std::size_t>(d * d));
  f.b = grids::GridFunction::zeros(tg, sg, static_cast<std::size_t>(d));
  f.c = grids::GridFunction::zeros(tg, sg, 1);
  for (std::size_t it = 0; it < tg.nodes(); ++it) {
    const std::size_t s = segment_of(sw, tg.t(it));
    for (std::size_t ix = 0; ix < sg.points(); ++ix) {
      for (int k = 0; k < d * d; ++k)
        f.a.at(it, ix, static_cast<std::size_t>(k)) = mats[s][static_cast<std::size_t>(k)];
      for (int k = 0; k < d; ++k)
        f.b.at(it, ix, static_cast<std::size_t>(k)) = bs[s][static_cast<std::size_t>(k)];
      f.c.at(it, ix, 0) = cs[s];
    }
  }
  return f;
}

double mean_oscillation(const CoefficientField& f, const grids::ParabolicCylinder& cyl) {
  const grids::CylinderNodes cn = grids::cylinder_nodes(cyl, f.tg, f.sg);
  if (cn.nodes.empty()) throw std::domain_error("mean_oscillation: empty cylinder");
  const SliceGroups g = group_by_slice(cn);
  const int d = f.sg.dim;
  double worst = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double acc = 0.0;
      std::size_t count = 0;
      for (std::size_t s = 0; s < g.times.size(); ++s) {
        const std::size_t it = g.times[s];
        // Deviations in coordinates shifted by the slice's first sample keep
        // constant slices at exactly zero.
        const double ref = f.a_at(it, g.spaces[s].front(), i, j);
        double bar = 0.0;
        for (std::size_t ix : g.spaces[s]) bar += f.a_at(it, ix, i, j) - ref;
        bar /= static_cast<double>(g.spaces[s].size());
        for (std::size_t ix : g.spaces[s])
          acc += std::fabs((f.a_at(it, ix, i, j) - ref) - bar);
        count += g.spaces[s].size();
      }
      worst = std::max(worst, acc / static_cast<double>(count));
    }
  return worst;
}

OscillationReport mean_oscillation_sup(const CoefficientField& f, double r0, double alpha,
                                       std::size_t max_centers) {
  if (!(r0 > 0.0)) throw std::invalid_argument("mean_oscillation_sup: radius must be positive");
  if (max_centers == 0) throw std::invalid_argument("mean_oscillation_sup: need max_centers >= 1");
  OscillationReport rep;
  rep.r0 = r0;

  std::vector<double> radii;
  for (double r = r0;; r *= 0.5) {
    radii.push_back(r);
    if (r * 0.5 < 4.0 * f.sg.spacing()) break;
  }

  // Stride the centers so time_count * space_count stays within max_centers.
  const std::size_t nt = f.tg.nodes();
  const std::size_t nx = f.sg.points();
  std::size_t stride_t = 1, stride_x = 1;
  while ((nt / stride_t + 1) * (nx / stride_x + 1) > max_centers) {
    if (nt / stride_t >= nx / stride_x)
      ++stride_t;
    else
      ++stride_x;
  }

  for (std::size_t it = 1; it < nt; it += stride_t)
    for (std::size_t ix = 0; ix < nx; ix += stride_x)
      for (double r : radii) {
        grids::ParabolicCylinder cyl;
        cyl.shape = grids::CylShape::backward;
        cyl.t = f.tg.t(it);
        cyl.x = f.sg.node_pos(ix);
        cyl.r_time = cyl.r_space = r;
        cyl.alpha = alpha;
        const grids::CylinderNodes cn = grids::cylinder_nodes(cyl, f.tg, f.sg);
        if (cn.nodes.empty()) continue;
        ++rep.cylinders;
        const double osc = mean_oscillation(f, cyl);
        if (osc > rep.gamma_measured) {
          rep.gamma_measured = osc;
          rep.worst = cyl;
        }
      }
  return rep;
}

BmoGenReport gen_bmo_space(std::uint64_t seed, double delta, double gamma0, double r0,
                           double alpha, const grids::TimeGrid& tg, const grids::SpaceGrid& sg) {
  if (!(gamma0 > 0.0 && gamma0 < 1.0))
    throw std::invalid_argument("gen_bmo_space: gamma0 must lie in (0,1)");
  if (!(r0 > 0.0 && r0 <= 1.0))
    throw std::invalid_argument("gen_bmo_space: r0 must lie in (0,1]");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("gen_bmo_space: delta must lie in (0,1)");
  tg.validate();
  sg.validate();
  const int d = sg.dim;

  // The base spectrum keeps a margin on both sides of [delta, 1/delta]; the
  // spatial perturbation's spectral norm never exceeds the margin, so every
  // candidate field is elliptic with the promised delta.
  const double margin = 0.25 * (1.0 / delta - delta);
  fpde::RngStream rng(seed, 0xb303u);
  const std::vector<double> sw = switch_times(rng, tg, 8);
  const std::size_t segs = sw.size() + 1;
  std::vector<std::array<double, 9>> mats(segs);
  std::vector<double> rho(segs);
  for (std::size_t s = 0; s < segs; ++s) {
    double lam[3] = {1.0, 1.0, 1.0};
    for (int k = 0; k < d; ++k) lam[k] = rng.uniform(delta + margin, 1.0 / delta - margin);
    double q[3][3];
    random_rotation(rng, d, q);
    assemble_spd(d, lam, q, mats[s].data());
    rho[s] = rng.uniform(0.5, 1.0);  // time modulation of the spatial ripple
  }

  // Smooth symmetric spatial ripple: cosine waves with small integer
  // frequencies; dividing entries by d bounds the spectral norm by 1.
  std::array<std::array<double, 3>, 9> freq{};
  std::array<double, 9> phase{};
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      const auto e = static_cast<std::size_t>(i * d + j);
      for (int ax = 0; ax < d; ++ax)
        freq[e][static_cast<std::size_t>(ax)] = 1.0 + static_cast<double>(rng.below(3));
      phase[e] = rng.uniform(0.0, kTau);
    }
  auto ripple = [&](std::size_t e, const std::array<double, 3>& x) {
    double arg = phase[e];
    for (int ax = 0; ax < d; ++ax)
      arg += kTau * freq[e][static_cast<std::size_t>(ax)] * x[static_cast<std::size_t>(ax)] /
             sg.length;
    return std::cos(arg) / static_cast<double>(d);
  };

  BmoGenReport rep;
  double amp = margin;
  for (std::size_t halvings = 0;; ++halvings) {
    if (halvings > 40)
      throw GenerationError("gen_bmo_space: 40 amplitude halvings failed to meet gamma0");
    CoefficientField f;
    f.tg = tg;
    f.sg = sg;
    f.delta = delta;
    f.a = grids::GridFunction::zeros(tg, sg, static_cast<std::size_t>(d * d));
    f.b = grids::GridFunction::zeros(tg, sg, static_cast<std::size_t>(d));
    f.c = grids::GridFunction::zeros(tg, sg, 1);
    for (std::size_t it = 0; it < tg.nodes(); ++it) {
      const std::size_t s = segment_of(sw, tg.t(it));
      for (std::size_t ix = 0; ix < sg.points(); ++ix) {
        const auto pos = sg.node_pos(ix);
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) {
            const auto e = static_cast<std::size_t>(i <= j ? i * d + j : j * d + i);
            f.a.at(it, ix, static_cast<std::size_t>(i * d + j)) =
                mats[s][static_cast<std::size_t>(i * d + j)] + amp * rho[s] * ripple(e, pos);
          }
      }
    }
    // Coarse scan while halving; a denser final scan confirms the winner.
    if (mean_oscillation_sup(f, r0, alpha, 512).gamma_measured <= gamma0) {
      const double dense = mean_oscillation_sup(f, r0, alpha).gamma_measured;
      if (dense <= gamma0) {
        rep.field = std::move(f);
        rep.amplitude = amp;
        rep.halvings = halvings;
        rep.gamma_measured = dense;
        return rep;
      }
    }
    amp *= 0.5;
  }
}

DoublingReport doubling_check(const CoefficientField& f, const std::array<double, 3>& x0,
                              double a_t, double b_t, double r0, double alpha) {
  const double block = std::pow(r0, 2.0 / alpha);
  if (!(b_t - a_t > block))
    throw std::invalid_argument(
        "doubling_check: interval must be longer than one cylinder time block");

  std::vector<std::size_t> ball;
  for (std::size_t ix = 0; ix < f.sg.points(); ++ix)
    if (f.sg.dist(f.sg.node_pos(ix), x0) < r0) ball.push_back(ix);
  if (ball.empty()) throw std::domain_error("doubling_check: ball captures no lattice node");

  std::vector<std::size_t> times;
  for (std::size_t it = 0; it < f.tg.nodes(); ++it) {
    const double t = f.tg.t(it);
    if (t > a_t && t <= b_t) times.push_back(it);
  }
  if (times.empty()) throw std::domain_error("doubling_check: interval captures no time node");

  // Blocks count backward from b_t: block j covers (b_t-(j+1)*block, b_t-j*block].
  const auto blocks = static_cast<std::size_t>(std::ceil((b_t - a_t) / block));
  const int d = f.sg.dim;

  DoublingReport rep;
  rep.blocks = blocks;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double total = 0.0;
      std::vector<double> per_block(blocks, 0.0);
      for (std::size_t it : times) {
        const double ref = f.a_at(it, ball.front(), i, j);
        double bar = 0.0;
        for (std::size_t ix : ball) bar += f.a_at(it, ix, i, j) - ref;
        bar /= static_cast<double>(ball.size());
        double dev = 0.0;
        for (std::size_t ix : ball) dev += std::fabs((f.a_at(it, ix, i, j) - ref) - bar);
        dev *= f.tg.h / static_cast<double>(ball.size());
        total += dev;
        const double back = b_t - f.tg.t(it);
        auto bi = static_cast<std::size_t>(back / block);
        if (bi >= blocks) bi = blocks - 1;
        per_block[bi] += dev;
      }
      rep.long_value = std::max(rep.long_value, total / (b_t - a_t));
      for (std::size_t bi = 0; bi < blocks; ++bi)
        rep.block_sup = std::max(rep.block_sup, per_block[bi] / block);
    }
  rep.bound = 2.0 * rep.block_sup;
  rep.pass = rep.long_value <= rep.bound * (1.0 + 1e-12);
  return rep;
}

grids::GridFunction mollify(const grids::GridFunction& u, double eps, double alpha) {
  u.validate();
  const double h = u.tg.h;
  const double sp = u.sg.spacing();
  const double tau = std::pow(eps, 2.0 / alpha);
  if (tau < 2.0 * h || eps < 2.0 * sp)
    throw std::invalid_argument("mollify: eps below the lattice resolution");
  if (eps >= 0.5 * u.sg.length)
    throw std::invalid_argument("mollify: eps reaches half the box width");
  const int d = u.sg.dim;

  // Discrete kernel: backward time lags with s = j*h in (0, tau), spatial
  // offsets inside the open ball of radius eps.
  std::vector<double> wt;
  for (long long j = 1; static_cast<double>(j) * h < tau; ++j) {
    const double z = 2.0 * static_cast<double>(j) * h / tau - 1.0;
    wt.push_back(bump(z * z));
  }

  const auto omax = static_cast<long long>(std::ceil(eps / sp));
  std::vector<std::array<long long, 3>> offs;
  std::vector<double> wx;
  std::array<long long, 3> o{0, 0, 0};
  std::array<long long, 3> lim{0, 0, 0};
  for (int ax = 0; ax < d; ++ax) lim[static_cast<std::size_t>(ax)] = omax;
  for (o[0] = -lim[0]; o[0] <= lim[0]; ++o[0])
    for (o[1] = -lim[1]; o[1] <= lim[1]; ++o[1])
      for (o[2] = -lim[2]; o[2] <= lim[2]; ++o[2]) {
        double r2 = 0.0;
        for (int ax = 0; ax < d; ++ax) {
          const double x = static_cast<double>(o[static_cast<std::size_t>(ax)]) * sp;
          r2 += x * x;
        }
        const double w = bump(r2 / (eps * eps));
        if (w > 0.0) {
          offs.push_back(o);
          wx.push_back(w);
        }
      }

  double tmass = 0.0, xmass = 0.0;
  for (double a : wt) tmass += a;
  for (double b : wx) xmass += b;
  const double inv_mass = 1.0 / (tmass * xmass);

  // Shifted index tables, one per spatial offset.
  const std::size_t pts = u.sg.points();
  std::vector<std::vector<std::size_t>> shifted(offs.size(), std::vector<std::size_t>(pts));
  for (std::size_t k = 0; k < offs.size(); ++k)
    for (std::size_t ix = 0; ix < pts; ++ix) {
      std::size_t idx = ix;
      for (int ax = 0; ax < d; ++ax)
        idx = u.sg.shift(idx, ax, -offs[k][static_cast<std::size_t>(ax)]);
      shifted[k][ix] = idx;
    }

  grids::GridFunction out = grids::GridFunction::zeros(u.tg, u.sg, u.components);
  for (std::size_t it = 0; it < u.tg.nodes(); ++it)
    for (std::size_t j = 0; j < wt.size(); ++j) {
      const long long src = static_cast<long long>(it) - static_cast<long long>(j) - 1;
      if (src < 0) continue;  // zero extension before the grid
      for (std::size_t k = 0; k < offs.size(); ++k) {
        const double w = wt[j] * wx[k] * inv_mass;
        for (std::size_t ix = 0; ix < pts; ++ix)
          for (std::size_t c = 0; c < u.components; ++c)
            out.at(it, ix, c) += w * u.at(static_cast<std::size_t>(src), shifted[k][ix], c);
      }
    }
  return out;
}

namespace {

// Product-integration weights for the kernel tau^{-alpha-1} against a
// piecewise-linear density in lag units: on the cell covering lags (m-1, m),
// `older[m]` multiplies the sample at lag m and `newer[m]` the one at lag
// m-1.  newer[1] diverges and stays unset; callers arrange for its factor to
// vanish identically.
struct SingularCellWeights {
  std::vector<double> older, newer;

  SingularCellWeights(double alpha, std::size_t cells)
      : older(cells + 2, 0.0), newer(cells + 2, 0.0) {
    const double b = -alpha;  // integrate tau^{b-1} times a linear hat
    auto pow_diff = [](double m, double e) {
      // m^e - (m-1)^e without cancellation for large m.
      if (m <= 1.0) return 1.0;  // only reached with e > 0
      return -std::pow(m, e) * std::expm1(e * std::log1p(-1.0 / m));
    };
    for (std::size_t m = 1; m <= cells + 1; ++m) {
      const double mm = static_cast<double>(m);
      const double p1 = pow_diff(mm, b + 1.0) / (b + 1.0);
      if (m == 1) {
        older[m] = p1;  // integral of tau^b over (0,1), finite for b > -1
        continue;
      }
      const double p0 = pow_diff(mm, b) / b;
      older[m] = p1 - (mm - 1.0) * p0;
      newer[m] = mm * p0 - p1;
    }
  }

  // Total weight of the sample at lag m inside a window of `window_cells`
  // cells: older endpoint of cell m plus, when cell m+1 still lies inside
  // the window, its newer endpoint.
  double at_lag(std::size_t m, std::size_t window_cells) const {
    double w = older[m];
    if (m + 1 <= window_cells) w += newer[m + 1];
    return w;
  }
};

std::size_t whole_step_gap(double t0, double S, double h, const char* who) {
  const double gap = t0 - S;
  if (gap < -1e-12 * std::max(1.0, std::fabs(t0)))
    throw std::invalid_argument(std::string(who) + ": origin must not come after the grid start");
  const double stepsf = gap / h;
  const auto n = static_cast<std::size_t>(std::llround(std::max(stepsf, 0.0)));
  if (std::fabs(stepsf - static_cast<double>(n)) > 1e-9)
    throw std::invalid_argument(std::string(who) + ": origin gap is not a whole number of steps");
  return n;
}

}  // namespace

CommutatorReport time_cutoff_commutator(const fraccore::TimeSeries& v,
                                        const fraccore::TimeSeries& eta,
                                        const fraccore::FracOrder& order, double S) {
  v.validate();
  eta.validate();
  if (eta.width != 1) throw std::invalid_argument("time_cutoff_commutator: eta must be scalar");
  if (eta.nodes() != v.nodes() || std::fabs(eta.t0 - v.t0) > 1e-12 ||
      std::fabs(eta.h - v.h) > 1e-12)
    throw std::invalid_argument("time_cutoff_commutator: eta grid does not match v");
  if (eta.values[0] != 0.0)
    throw std::invalid_argument("time_cutoff_commutator: eta must vanish at the grid start");

  const double a = order.value();
  const double h = v.h;
  const std::size_t prepad = whole_step_gap(v.t0, S, h, "time_cutoff_commutator");
  const std::size_t nodes = v.nodes();
  const std::size_t width = v.width;
  const SingularCellWeights w(a, nodes - 1 + prepad);
  const double pref = a / fraccore::gamma_fn(1.0 - a) * std::pow(h, -a);

  // The density F(s) = (eta(s) - eta(t_n)) v(s) is interpolated linearly per
  // cell.  It vanishes at s = t_n (killing the divergent lag-0 weight) and on
  // the zero-filled prefix below the grid, so only samples k < n contribute;
  // the sample at lag m = n-k collects the older weight of cell m and, when
  // the window (S, t_n) still covers cell m+1, the newer weight of cell m+1.
  fraccore::TimeSeries g = fraccore::TimeSeries::zeros(v.t0, h, nodes, width);
  for (std::size_t n = 1; n < nodes; ++n) {
    const double eta_n = eta.values[n];
    const std::size_t window = n + prepad;
    for (std::size_t c = 0; c < width; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double fk = (eta.values[k] - eta_n) * v.at(k, c);
        if (fk != 0.0) acc += fk * w.at_lag(n - k, window);
      }
      g.at(n, c) = pref * acc;
    }
  }

  CommutatorReport rep{std::move(g), 0.0};

  // Residual of D^alpha(eta v) = eta * (d/dt) I_S^{1-alpha} v - g at interior
  // nodes (the one-sided stencil at the last node is excluded).
  fraccore::TimeSeries ev = v;
  for (std::size_t i = 0; i < nodes; ++i)
    for (std::size_t c = 0; c < width; ++c) ev.at(i, c) = eta.values[i] * v.at(i, c);
  const fraccore::TimeSeries lhs = fraccore::caputo_derivative(ev, order);
  const fraccore::TimeSeries dr = fraccore::rl_derivative(v, order, S);
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < nodes; ++i)
    for (std::size_t c = 0; c < width; ++c) {
      const double rhs = eta.values[i] * dr.at(i, c) - rep.g.at(i, c);
      worst = std::max(worst, std::fabs(lhs.at(i, c) - rhs));
    }
  rep.identity_residual = worst;
  return rep;
}

fraccore::TimeSeries commutator_bound(const fraccore::TimeSeries& v, double M,
                                      const fraccore::FracOrder& order, double S) {
  v.validate();
  if (!(M >= 0.0)) throw std::invalid_argument("commutator_bound: slope bound must be >= 0");
  const double a = order.value();
  const double h = v.h;
  const std::size_t prepad = whole_step_gap(v.t0, S, h, "commutator_bound");
  const std::size_t nodes = v.nodes();
  const std::size_t width = v.width;
  const SingularCellWeights w(a, nodes - 1 + prepad);
  const double pref = a / fraccore::gamma_fn(1.0 - a) * std::pow(h, -a);

  // Same cells and weights as the commutator, applied to the envelope
  // M*(t_n - t_k)*|v_k| that dominates |(eta_k - eta_n) v_k| for any eta
  // with Lipschitz constant M.  Weight positivity carries the domination
  // through the quadrature, so |g| <= bound holds node by node.
  fraccore::TimeSeries out = fraccore::TimeSeries::zeros(v.t0, h, nodes, width);
  for (std::size_t n = 1; n < nodes; ++n) {
    const std::size_t window = n + prepad;
    for (std::size_t c = 0; c < width; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double gk = M * h * static_cast<double>(n - k) * std::fabs(v.at(k, c));
        if (gk != 0.0) acc += gk * w.at_lag(n - k, window);
      }
      out.at(n, c) = pref * acc;
    }
  }
  return out;
}

}  // namespace fpde::coeffs
