#pragma once

#include <cstdint>
#include <random>

#include "lowrank/core.hpp"

namespace lrlab {

using Rng = std::mt19937_64;

/// Derived seed for sub-stream `index` of a master seed:
/// splitmix64(master ^ splitmix64(index + 1)). Used for per-trial seeds.
std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index);

double std_normal(Rng& rng);

/// Circularly symmetric complex normal with E|z|^2 = 1
/// (real and imaginary parts i.i.d. N(0, 1/2)).
Complex complex_normal(Rng& rng);

RMatrix gaussian_real(Eigen::Index rows, Eigen::Index cols, Rng& rng);
CMatrix gaussian_complex(Eigen::Index rows, Eigen::Index cols, Rng& rng);
CMatrix gaussian(Eigen::Index rows, Eigen::Index cols, Field field, Rng& rng);

/// Uniform direction on the unit sphere of R^m.
RVector uniform_sphere(Eigen::Index m, Rng& rng);

/// Haar-random unit vector in C^n.
CVector haar_vector(Eigen::Index n, Rng& rng);

/// Haar-random unitary (QR of a complex Gaussian matrix with phase fix).
CMatrix haar_unitary(Eigen::Index n, Rng& rng);

/// Random rank-r matrix with unit Frobenius norm (product of Gaussian factors).
CMatrix random_rank_r(Eigen::Index n1, Eigen::Index n2, int r, Field field, Rng& rng);

/// Random Hermitian rank-r matrix with unit Frobenius norm and random signs
/// on its eigenvalues.
CMatrix random_hermitian_rank_r(Eigen::Index n, int r, Rng& rng);

/// Random Hermitian matrix with unit Frobenius norm (GUE direction).
CMatrix random_hermitian(Eigen::Index n, Rng& rng);

}  // namespace lrlab
