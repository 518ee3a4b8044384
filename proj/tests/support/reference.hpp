#pragma once
// Slow reference solver used as a test oracle: projected subgradient descent
// for min ||Z||_* subject to A(Z) = b, written without the library's solver
// code. Z is parametrized by x = [Re vec Z; Im vec Z]; the measurement
// equations (and Z = Z^* in the Hermitian case) form one real linear system
// whose affine solution set is projected onto with a pseudo-inverse.

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "lowrank/measurements.hpp"

namespace lrtest {

struct ReferenceOptions {
  double alpha0 = 0.1;
  double decay = 0.9995;
  int iterations = 40000;
  bool hermitian = false;
  bool real = false;
};

struct ReferenceResult {
  lrlab::CMatrix solution;
  double nuclear = 0.0;
  double residual = 0.0;
};

inline ReferenceResult reference_nuclear_min(const lrlab::MeasurementEnsemble& e, const lrlab::CVector& b,
                                             const ReferenceOptions& opt = {}) {
  using lrlab::CMatrix;
  using lrlab::Complex;
  using lrlab::RMatrix;
  using lrlab::RVector;
  const Eigen::Index n1 = e.n1(), n2 = e.n2(), d = n1 * n2, m = e.m();
  const Eigen::Index vars = opt.real ? d : 2 * d;

  // Constraint rows: Re and Im of tr(Z A_j^*) = sum conj(A_j)_ik Z_ik.
  std::vector<RVector> rows;
  std::vector<double> rhs;
  for (Eigen::Index j = 0; j < m; ++j) {
    const CMatrix a = e.matrix(j);
    RVector re = RVector::Zero(vars), im = RVector::Zero(vars);
    for (Eigen::Index k = 0; k < d; ++k) {
      const Complex c = std::conj(a.data()[k]);
      re(k) = c.real();
      im(k) = c.imag();
      if (!opt.real) {
        re(d + k) = -c.imag();
        im(d + k) = c.real();
      }
    }
    rows.push_back(re);
    rhs.push_back(b(j).real());
    if (!opt.real) {
      rows.push_back(im);
      rhs.push_back(b(j).imag());
    }
  }
  if (opt.hermitian) {
    for (Eigen::Index i = 0; i < n1; ++i) {
      for (Eigen::Index k = 0; k < n1; ++k) {
        if (k < i) continue;
        RVector re = RVector::Zero(vars), im = RVector::Zero(vars);
        re(i + n1 * k) += 1.0;
        re(k + n1 * i) -= 1.0;
        im(d + i + n1 * k) += 1.0;
        im(d + k + n1 * i) += 1.0;
        if (i != k) rows.push_back(re);
        rows.push_back(im);
        if (i != k) rhs.push_back(0.0);
        rhs.push_back(0.0);
      }
    }
  }
  RMatrix op(static_cast<Eigen::Index>(rows.size()), vars);
  for (std::size_t k = 0; k < rows.size(); ++k) op.row(static_cast<Eigen::Index>(k)) = rows[k].transpose();
  const RVector target = Eigen::Map<const RVector>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
  const RMatrix pinv = op.completeOrthogonalDecomposition().pseudoInverse();

  auto to_matrix = [&](const RVector& x) {
    CMatrix z(n1, n2);
    for (Eigen::Index k = 0; k < d; ++k) z.data()[k] = Complex(x(k), opt.real ? 0.0 : x(d + k));
    return z;
  };
  auto to_vector = [&](const CMatrix& z) {
    RVector x(vars);
    for (Eigen::Index k = 0; k < d; ++k) {
      x(k) = z.data()[k].real();
      if (!opt.real) x(d + k) = z.data()[k].imag();
    }
    return x;
  };
  auto project = [&](const RVector& x) -> RVector { return x - pinv * (op * x - target); };

  RVector x = project(RVector::Zero(vars));
  ReferenceResult best{to_matrix(x), std::numeric_limits<double>::infinity(), 0.0};
  double alpha = opt.alpha0;
  for (int it = 0; it < opt.iterations; ++it) {
    const CMatrix z = to_matrix(x);
    Eigen::JacobiSVD<CMatrix> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double nuclear = svd.singularValues().sum();
    if (nuclear < best.nuclear) {
      best.nuclear = nuclear;
      best.solution = z;
    }
    // Subgradient U V^* restricted to the nonzero singular values.
    const RVector& s = svd.singularValues();
    Eigen::Index rank = 0;
    while (rank < s.size() && s(rank) > 1e-14 * std::max(1.0, s(0))) ++rank;
    const CMatrix g = svd.matrixU().leftCols(rank) * svd.matrixV().leftCols(rank).adjoint();
    const RVector gx = to_vector(g);
    const double gn = gx.norm();
    if (gn == 0.0) break;
    x = project(x - alpha * gx / gn);
    alpha *= opt.decay;
  }
  best.residual = (op * to_vector(best.solution) - target).norm();
  return best;
}

}  // namespace lrtest
