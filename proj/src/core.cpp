#include "lowrank/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace lrlab {

namespace {

constexpr double kRankTolerance = 1e-10;
constexpr double kHermitianTolerance = 1e-12;

void check_finite(const CMatrix& m) {
  if (!m.allFinite()) throw std::invalid_argument("matrix has non-finite entries");
}

}  // namespace

std::string to_string(Field field) { return field == Field::Real ? "real" : "complex"; }

Field field_from_string(const std::string& name) {
  if (name == "real") return Field::Real;
  if (name == "complex") return Field::Complex;
  throw std::invalid_argument("unknown field tag '" + name + "'");
}

Mat::Mat(CMatrix entries, Field field) : entries_(std::move(entries)), field_(field) {
  if (entries_.rows() < 1 || entries_.cols() < 1)
    throw std::invalid_argument("matrix dimensions must be positive");
  check_finite(entries_);
  if (field_ == Field::Real && entries_.imag().cwiseAbs().maxCoeff() != 0.0)
    throw std::invalid_argument("real matrix has nonzero imaginary parts");
}

Mat Mat::real(const RMatrix& entries) { return Mat(entries.cast<Complex>(), Field::Real); }

Mat Mat::complex(CMatrix entries) { return Mat(std::move(entries), Field::Complex); }

HermMat::HermMat(const CMatrix& entries) {
  if (entries.rows() != entries.cols() || entries.rows() < 1)
    throw std::invalid_argument("Hermitian matrix must be square and non-empty");
  check_finite(entries);
  const double scale = std::max(1.0, entries.cwiseAbs().maxCoeff());
  const double asym = (entries - entries.adjoint()).cwiseAbs().maxCoeff();
  if (asym > kHermitianTolerance * scale)
    throw std::invalid_argument("matrix is not Hermitian (asymmetry " + std::to_string(asym) + ")");
  entries_ = hermitian_part(entries);
}

CMatrix hermitian_part(const CMatrix& a) { return 0.5 * (a + a.adjoint()); }

Svd svd(const CMatrix& m) {
  check_finite(m);
  Eigen::BDCSVD<CMatrix> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (solver.info() != Eigen::Success) throw NumericError("SVD did not converge");
  Svd out{solver.matrixU(), solver.singularValues(), solver.matrixV()};
  const Eigen::Index k = out.sigma.size();
  for (Eigen::Index j = 0; j < k; ++j) {
    auto col = out.u.col(j);
    const double cutoff = 1e-12 * col.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      if (std::abs(col(i)) > cutoff) {
        const Complex phase = std::conj(col(i)) / std::abs(col(i));
        out.u.col(j) *= phase;
        out.v.col(j) *= phase;
        break;
      }
    }
  }
  return out;
}

RVector singular_values(const CMatrix& m) {
  check_finite(m);
  Eigen::BDCSVD<CMatrix> solver(m);
  if (solver.info() != Eigen::Success) throw NumericError("SVD did not converge");
  return solver.singularValues();
}

HermEig herm_eig(const CMatrix& h) {
  check_finite(h);
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(hermitian_part(h));
  if (solver.info() != Eigen::Success) throw NumericError("Hermitian eigensolver did not converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

int numerical_rank(const RVector& sigma) {
  if (sigma.size() == 0 || sigma(0) == 0.0) return 0;
  const double cutoff = kRankTolerance * sigma(0);
  return static_cast<int>((sigma.array() > cutoff).count());
}

RankSplit best_rank_r(const Mat& m, int r) {
  const auto n = std::min(m.rows(), m.cols());
  if (r < 1 || r > n) throw std::invalid_argument("rank r out of range [1, min(n1,n2)]");
  Svd s = svd(m.entries());
  CMatrix head = s.u.leftCols(r) * s.sigma.head(r).asDiagonal() * s.v.leftCols(r).adjoint();
  CMatrix tail = m.entries() - head;
  if (m.field() == Field::Real) {
    head = head.real().cast<Complex>();
    tail = tail.real().cast<Complex>();
  }
  return {Mat(std::move(head), m.field()), Mat(std::move(tail), m.field()), r, s.sigma};
}

double schatten_norm_of(const RVector& sigma, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("Schatten p must satisfy p >= 1");
  if (sigma.size() == 0) return 0.0;
  if (std::isinf(p)) return sigma.maxCoeff();
  if (p == 1.0) return sigma.sum();
  if (p == 2.0) return sigma.norm();
  const double top = sigma.maxCoeff();
  if (top == 0.0) return 0.0;
  return top * std::pow((sigma.array() / top).pow(p).sum(), 1.0 / p);
}

double schatten_norm(const CMatrix& m, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("Schatten p must satisfy p >= 1");
  return schatten_norm_of(singular_values(m), p);
}

double d_norm_of(const RVector& sigma, int r) {
  const auto n = sigma.size();
  if (r < 1 || r > n) throw std::invalid_argument("rank r out of range for D-norm");
  double total = 0.0;
  for (Eigen::Index start = 0; start < n; start += r) {
    const auto len = std::min<Eigen::Index>(r, n - start);
    total += sigma.segment(start, len).norm();
  }
  return total;
}

double d_norm(const CMatrix& m, int r) { return d_norm_of(singular_values(m), r); }

HeadTail head_tail(const RVector& sigma, int r) {
  const auto k = std::min<Eigen::Index>(r, sigma.size());
  return {sigma.head(k).norm(), sigma.head(k).sum(), sigma.tail(sigma.size() - k).sum()};
}

bool in_T_rho_r(const CMatrix& m, double rho, int r) {
  const auto n = std::min(m.rows(), m.cols());
  if (r < 1 || r > n) throw std::invalid_argument("rank r out of range for T_{rho,r}");
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in (0,1)");
  RVector sigma = singular_values(m);
  const double fro = sigma.norm();
  if (fro == 0.0) throw std::invalid_argument("zero matrix is not on the unit sphere");
  sigma /= fro;
  const HeadTail ht = head_tail(sigma, r);
  return ht.head_frobenius > rho / std::sqrt(static_cast<double>(r)) * ht.tail_nuclear;
}

CMatrix psd_project(const CMatrix& h) {
  return hermitian_part(spectral_map(h, [](double x) { return std::max(x, 0.0); }));
}

HermMat psd_project(const HermMat& h) { return HermMat(psd_project(h.entries())); }

RVector simplex_project(const RVector& v, double total) {
  if (!(total > 0.0)) throw std::invalid_argument("simplex total must be positive");
  std::vector<double> sorted(v.data(), v.data() + v.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double prefix = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    prefix += sorted[k];
    const double candidate = (prefix - total) / static_cast<double>(k + 1);
    if (sorted[k] - candidate > 0.0) theta = candidate;
  }
  return (v.array() - theta).max(0.0).matrix();
}

CMatrix spectral_simplex_project(const CMatrix& h, double trace_target) {
  if (!(trace_target > 0.0)) throw std::invalid_argument("trace target must be positive");
  HermEig e = herm_eig(h);
  RVector lambda = simplex_project(e.values, trace_target);
  return hermitian_part(e.vectors * lambda.asDiagonal() * e.vectors.adjoint());
}

HermMat spectral_simplex_project(const HermMat& h, double trace_target) {
  return HermMat(spectral_simplex_project(h.entries(), trace_target));
}

}  // namespace lrlab
