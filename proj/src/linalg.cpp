#include "fpde/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace fpde::linalg {

void CsrMatrix::matvec(const double* x, double* y) const {
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) acc += val[k] * x[col[k]];
    y[i] = acc;
  }
}

std::vector<double> CsrMatrix::diagonal() const {
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
      if (col[k] == i) d[i] += val[k];
  return d;
}

CsrBuilder::CsrBuilder(std::size_t n) : n_(n), rows_(n) {}

void CsrBuilder::add(std::size_t r, std::size_t c, double v) {
  if (r >= n_ || c >= n_) throw std::out_of_range("CsrBuilder: index out of range");
  rows_[r].emplace_back(c, v);
}

CsrMatrix CsrBuilder::finish() {
  CsrMatrix m;
  m.n = n_;
  m.row_ptr.assign(n_ + 1, 0);
  for (std::size_t i = 0; i < n_; ++i) {
    auto& row = rows_[i];
    std::sort(row.begin(), row.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::size_t out = 0;
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (out > 0 && row[out - 1].first == row[k].first)
        row[out - 1].second += row[k].second;
      else
        row[out++] = row[k];
    }
    row.resize(out);
    m.row_ptr[i + 1] = m.row_ptr[i] + out;
  }
  m.col.reserve(m.row_ptr[n_]);
  m.val.reserve(m.row_ptr[n_]);
  for (auto& row : rows_)
    for (auto& [c, v] : row) {
      m.col.push_back(c);
      m.val.push_back(v);
    }
  return m;
}

namespace {

// Plain Thomas elimination; requires nonzero pivots along the way.
std::vector<double> solve_tridiag(std::vector<double> d, const std::vector<double>& l,
                                  std::vector<double> u, std::vector<double> b) {
  const std::size_t n = d.size();
  for (std::size_t i = 1; i < n; ++i) {
    if (d[i - 1] == 0.0) throw SolverError("tridiagonal pivot vanished");
    const double w = l[i] / d[i - 1];
    d[i] -= w * u[i - 1];
    b[i] -= w * b[i - 1];
  }
  if (d[n - 1] == 0.0) throw SolverError("tridiagonal pivot vanished");
  std::vector<double> x(n);
  x[n - 1] = b[n - 1] / d[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = (b[i] - u[i] * x[i + 1]) / d[i];
  return x;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double nrm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

}  // namespace

std::vector<double> solve_cyclic_tridiag(std::vector<double> diag, std::vector<double> lower,
                                         std::vector<double> upper, std::vector<double> rhs) {
  const std::size_t n = diag.size();
  if (n < 3) throw SolverError("cyclic tridiagonal systems need n >= 3");
  const double corner_lo = lower[0];   // (0, n-1)
  const double corner_up = upper[n - 1];  // (n-1, 0)

  // Rank-one correction A = T + gamma e_0 e_0^T-style Sherman-Morrison.
  const double gamma = -diag[0];
  std::vector<double> d = diag;
  d[0] -= gamma;
  d[n - 1] -= corner_lo * corner_up / gamma;

  std::vector<double> z(n, 0.0);
  z[0] = gamma;
  z[n - 1] = corner_up;

  std::vector<double> x = solve_tridiag(d, lower, upper, std::move(rhs));
  std::vector<double> q = solve_tridiag(d, lower, upper, std::move(z));

  const double num = x[0] + corner_lo * x[n - 1] / gamma;
  const double den = 1.0 + q[0] + corner_lo * q[n - 1] / gamma;
  if (den == 0.0) throw SolverError("cyclic correction denominator vanished");
  const double f = num / den;
  for (std::size_t i = 0; i < n; ++i) x[i] -= f * q[i];
  return x;
}

KrylovResult bicgstab(const CsrMatrix& A, const std::vector<double>& b, double tol,
                      std::size_t max_iter) {
  const std::size_t n = A.n;
  std::vector<double> diag = A.diagonal();
  for (double& d : diag) {
    if (d == 0.0) throw SolverError("bicgstab: zero diagonal entry");
    d = 1.0 / d;
  }
  auto precond = [&](std::vector<double>& v) {
    for (std::size_t i = 0; i < n; ++i) v[i] *= diag[i];
  };

  const double bnorm = std::max(nrm2(b), 1e-300);
  std::vector<double> x(n, 0.0), r = b, r0 = b, p(n, 0.0), v(n, 0.0), t(n), s(n), ph(n), sh(n);
  double rho = 1.0, alpha = 1.0, omega = 1.0;

  KrylovResult res;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    const double rho1 = dot(r0, r);
    if (std::abs(rho1) < 1e-300) throw SolverError("bicgstab: rho breakdown");
    if (it == 1) {
      p = r;
    } else {
      const double beta = (rho1 / rho) * (alpha / omega);
      for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
    }
    rho = rho1;
    ph = p;
    precond(ph);
    A.matvec(ph.data(), v.data());
    alpha = rho / dot(r0, v);
    for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
    if (nrm2(s) / bnorm < tol) {
      for (std::size_t i = 0; i < n; ++i) x[i] += alpha * ph[i];
      res.x = std::move(x);
      res.rel_residual = nrm2(s) / bnorm;
      res.iterations = it;
      return res;
    }
    sh = s;
    precond(sh);
    A.matvec(sh.data(), t.data());
    const double tt = dot(t, t);
    if (tt == 0.0) throw SolverError("bicgstab: stagnation");
    omega = dot(t, s) / tt;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * ph[i] + omega * sh[i];
      r[i] = s[i] - omega * t[i];
    }
    const double rel = nrm2(r) / bnorm;
    if (rel < tol) {
      res.x = std::move(x);
      res.rel_residual = rel;
      res.iterations = it;
      return res;
    }
    if (std::abs(omega) < 1e-300) throw SolverError("bicgstab: omega breakdown");
  }
  throw SolverError("bicgstab: iteration cap reached above tolerance");
}

std::vector<double> sym_eigenvalues(std::vector<double> a, std::size_t n) {
  auto at = [&](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = at(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = at(k, p), akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = at(p, k), aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = at(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

}  // namespace fpde::linalg
