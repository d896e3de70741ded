#pragma once
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace fpde::linalg {

// Compressed sparse rows; row i spans [row_ptr[i], row_ptr[i+1]).
struct CsrMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::size_t> col;
  std::vector<double> val;

  void matvec(const double* x, double* y) const;
  std::vector<double> diagonal() const;
};

// Builder that accumulates (row, col, value) with duplicate folding.
class CsrBuilder {
 public:
  explicit CsrBuilder(std::size_t n);
  void add(std::size_t r, std::size_t c, double v);
  CsrMatrix finish();

 private:
  std::size_t n_;
  std::vector<std::vector<std::pair<std::size_t, double>>> rows_;
};

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tridiagonal system with periodic corner entries via Sherman-Morrison.
// diag/lower/upper have length n; lower[0] couples row 0 to column n-1 and
// upper[n-1] couples row n-1 to column 0.
std::vector<double> solve_cyclic_tridiag(std::vector<double> diag, std::vector<double> lower,
                                         std::vector<double> upper, std::vector<double> rhs);

struct KrylovResult {
  std::vector<double> x;
  double rel_residual = 0.0;
  std::size_t iterations = 0;
};

// BiCGSTAB with Jacobi preconditioning; throws SolverError on breakdown or
// when max_iter is exhausted above tol.
KrylovResult bicgstab(const CsrMatrix& A, const std::vector<double>& b, double tol,
                      std::size_t max_iter);

// Cyclic Jacobi eigensolver for a dense symmetric matrix (row-major n*n).
// Returns eigenvalues ascending.
std::vector<double> sym_eigenvalues(std::vector<double> a, std::size_t n);

}  // namespace fpde::linalg
