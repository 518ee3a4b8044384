#include "lowrank/random.hpp"

#include <cmath>

namespace lrlab {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index + 1));
}

double std_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

Complex complex_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(0.5));
  const double re = dist(rng);
  const double im = dist(rng);
  return {re, im};
}

RMatrix gaussian_real(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  RMatrix out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = dist(rng);
  return out;
}

CMatrix gaussian_complex(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  CMatrix out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = complex_normal(rng);
  return out;
}

CMatrix gaussian(Eigen::Index rows, Eigen::Index cols, Field field, Rng& rng) {
  if (field == Field::Real) return gaussian_real(rows, cols, rng).cast<Complex>();
  return gaussian_complex(rows, cols, rng);
}

RVector uniform_sphere(Eigen::Index m, Rng& rng) {
  RVector g = gaussian_real(m, 1, rng).col(0);
  double norm = g.norm();
  while (norm == 0.0) {
    g = gaussian_real(m, 1, rng).col(0);
    norm = g.norm();
  }
  return g / norm;
}

CVector haar_vector(Eigen::Index n, Rng& rng) {
  CVector g = gaussian_complex(n, 1, rng).col(0);
  return g / g.norm();
}

CMatrix haar_unitary(Eigen::Index n, Rng& rng) {
  Eigen::HouseholderQR<CMatrix> qr(gaussian_complex(n, n, rng));
  CMatrix q = qr.householderQ();
  const CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j) {
    const Complex d = r(j, j);
    if (std::abs(d) > 0.0) q.col(j) *= d / std::abs(d);
  }
  return q;
}

CMatrix random_rank_r(Eigen::Index n1, Eigen::Index n2, int r, Field field, Rng& rng) {
  CMatrix left = gaussian(n1, r, field, rng);
  CMatrix right = gaussian(n2, r, field, rng);
  CMatrix m = left * right.adjoint();
  return m / m.norm();
}

CMatrix random_hermitian_rank_r(Eigen::Index n, int r, Rng& rng) {
  CMatrix factor = gaussian_complex(n, r, rng);
  RVector signs(r);
  for (int k = 0; k < r; ++k) signs(k) = std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
  CMatrix m = hermitian_part(factor * signs.cast<Complex>().asDiagonal() * factor.adjoint());
  return m / m.norm();
}

CMatrix random_hermitian(Eigen::Index n, Rng& rng) {
  CMatrix m = hermitian_part(gaussian_complex(n, n, rng));
  return m / m.norm();
}

}  // namespace lrlab
