#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace lrlab {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Raised when an iterative decomposition fails to converge.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a dense computation would exceed the desk-scale resource guard.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Field { Real, Complex };

std::string to_string(Field field);
Field field_from_string(const std::string& name);

/// Dense matrix with finite entries. Real matrices are stored with zero
/// imaginary parts so that both fields share one code path.
class Mat {
 public:
  Mat(CMatrix entries, Field field);

  static Mat real(const RMatrix& entries);
  static Mat complex(CMatrix entries);

  Eigen::Index rows() const { return entries_.rows(); }
  Eigen::Index cols() const { return entries_.cols(); }
  Field field() const { return field_; }
  const CMatrix& entries() const { return entries_; }

 private:
  CMatrix entries_;
  Field field_;
};

/// Complex Hermitian matrix. Construction checks Hermiticity to 1e-12 and then
/// stores the exactly symmetrized part.
class HermMat {
 public:
  explicit HermMat(const CMatrix& entries);

  Eigen::Index dim() const { return entries_.rows(); }
  const CMatrix& entries() const { return entries_; }
  Mat as_mat() const { return Mat(entries_, Field::Complex); }

 private:
  CMatrix entries_;
};

/// Returns (A + A*) / 2.
CMatrix hermitian_part(const CMatrix& a);

struct Svd {
  CMatrix u;       // n1 x k
  RVector sigma;   // k = min(n1, n2), non-increasing
  CMatrix v;       // n2 x k
};

/// Thin SVD with the phase convention that the first nonzero component of
/// every left singular vector is real and positive.
Svd svd(const CMatrix& m);
RVector singular_values(const CMatrix& m);

struct HermEig {
  RVector values;   // ascending
  CMatrix vectors;
};

HermEig herm_eig(const CMatrix& h);

/// Best rank-r approximation M = head + tail.
struct RankSplit {
  Mat head;
  Mat tail;
  int r;
  RVector sigma;
};

RankSplit best_rank_r(const Mat& m, int r);

/// Numerical rank with relative threshold 1e-10 * sigma_1.
int numerical_rank(const RVector& sigma);

/// Schatten p-norm; pass std::numeric_limits<double>::infinity() for the
/// operator norm.
double schatten_norm(const CMatrix& m, double p);
double schatten_norm_of(const RVector& sigma, double p);
inline double nuclear_norm(const CMatrix& m) { return schatten_norm(m, 1.0); }
inline double operator_norm(const CMatrix& m) {
  return schatten_norm(m, std::numeric_limits<double>::infinity());
}

/// Block-l2-of-singular-values norm whose unit ball is the convex hull of the
/// unit-Frobenius matrices of rank at most r.
double d_norm(const CMatrix& m, int r);
double d_norm_of(const RVector& sigma, int r);

/// Membership in T_{rho,r}: after normalizing to unit Frobenius norm,
/// ||M_r||_2 > (rho / sqrt(r)) ||M_c||_1.
bool in_T_rho_r(const CMatrix& m, double rho, int r);

/// Head Frobenius norm ||M_r||_2 and tail nuclear norm ||M_c||_1 from a
/// non-increasing singular value sequence.
struct HeadTail {
  double head_frobenius;
  double head_nuclear;
  double tail_nuclear;
};
HeadTail head_tail(const RVector& sigma, int r);

/// Frobenius-nearest PSD matrix (negative eigenvalues clipped to zero).
HermMat psd_project(const HermMat& h);
CMatrix psd_project(const CMatrix& h);

/// Eigenvalues projected onto {lambda >= 0, sum lambda = trace_target},
/// eigenvectors kept.
HermMat spectral_simplex_project(const HermMat& h, double trace_target);
CMatrix spectral_simplex_project(const CMatrix& h, double trace_target);

/// Euclidean projection of a vector onto the scaled simplex (sort-based).
RVector simplex_project(const RVector& v, double total);

/// Applies f to the eigenvalues of a Hermitian matrix.
template <class F>
CMatrix spectral_map(const CMatrix& h, F&& f) {
  HermEig e = herm_eig(h);
  RVector mapped = e.values.unaryExpr(f);
  return e.vectors * mapped.asDiagonal() * e.vectors.adjoint();
}

}  // namespace lrlab
