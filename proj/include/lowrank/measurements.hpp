#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lowrank/core.hpp"
#include "lowrank/designs.hpp"
#include "lowrank/random.hpp"

namespace lrlab {

enum class EnsembleKind { Dense, RankOne };

enum class EntryDistribution { Gaussian, Rademacher, Uniform, TwoPointHeavy };

std::string to_string(EntryDistribution dist);
EntryDistribution entry_distribution_from_string(const std::string& name);

/// E X^4 of the unit-variance entry law.
double fourth_moment(EntryDistribution dist);

/// Draws one entry. The two-point-heavy law is +-sqrt(10) with probability
/// 1/20 each and 0 otherwise (mean 0, variance 1, fourth moment 10).
double draw_entry(EntryDistribution dist, Rng& rng);

struct Provenance {
  std::string distribution;
  std::uint64_t seed = 0;
  std::string design_id;
  std::string convention;
};

/// m measurement matrices A_j of shape n1 x n2, stored densely or as rank-one
/// factors A_j = s a_j a_j^*.
class MeasurementEnsemble {
 public:
  /// Row j of `stacked` is vec(A_j)^T (column-major vectorization).
  static MeasurementEnsemble dense(Eigen::Index n1, Eigen::Index n2, CMatrix stacked, Field field,
                                   Provenance provenance);
  static MeasurementEnsemble dense(const std::vector<CMatrix>& matrices, Field field,
                                   Provenance provenance);
  /// Row j of `vectors` is a_j^T.
  static MeasurementEnsemble rank_one(CMatrix vectors, double scale, Provenance provenance);

  EnsembleKind kind() const { return kind_; }
  Eigen::Index n1() const { return n1_; }
  Eigen::Index n2() const { return n2_; }
  Eigen::Index m() const { return m_; }
  Field field() const { return field_; }
  double scale() const { return scale_; }
  const Provenance& provenance() const { return provenance_; }

  /// Dense storage; row j is vec(A_j)^T.
  const CMatrix& stacked() const;
  /// Rank-one factors; row j is a_j^T.
  const CMatrix& vectors() const;

  CMatrix matrix(Eigen::Index j) const;

  /// True when every A_j is Hermitian, so the map sends Hermitian matrices to
  /// real vectors.
  bool hermitian_compatible() const { return hermitian_; }

 private:
  MeasurementEnsemble() = default;

  EnsembleKind kind_ = EnsembleKind::Dense;
  Eigen::Index n1_ = 0, n2_ = 0, m_ = 0;
  Field field_ = Field::Real;
  double scale_ = 1.0;
  bool hermitian_ = false;
  CMatrix data_;
  Provenance provenance_;
};

/// b_j = tr(X A_j^*). Rank-one ensembles use s <a_j, X a_j> without forming A_j.
CVector apply(const MeasurementEnsemble& e, const CMatrix& x);

/// sum_j y_j A_j, so that <y, A(X)> = <A^*(y), X> for the Hermitian inner
/// products <u, v> = sum conj(u) v on C^m and tr(U^* V) on matrices.
CMatrix adjoint(const MeasurementEnsemble& e, const CVector& y);

/// The m x (n1 n2) matrix S with A(X) = S vec(X); row j is conj(vec(A_j))^T.
CMatrix sensing_matrix(const MeasurementEnsemble& e);

/// Same map with every A_j materialized densely.
MeasurementEnsemble to_dense(const MeasurementEnsemble& e);

/// Dense copy of `e` with one more measurement matrix appended.
MeasurementEnsemble append_dense(const MeasurementEnsemble& e, const CMatrix& extra_matrix);

MeasurementEnsemble gen_indep_entry(EntryDistribution dist, Eigen::Index n1, Eigen::Index n2,
                                    Eigen::Index m, std::uint64_t seed,
                                    Field field = Field::Real);

/// a_j with i.i.d. complex normal entries, E[a a^*] = Id.
MeasurementEnsemble gen_rank_one_gaussian(Eigen::Index n, Eigen::Index m, std::uint64_t seed);

/// Samples m design indices by weight; each vector is rescaled to squared
/// norm sqrt(n(n+1)). `scale` multiplies every A_j (1 for the plain design
/// map, 1/sqrt(m) for the tomography normalization).
MeasurementEnsemble gen_rank_one_design(const WeightedVectorSet& design, Eigen::Index m,
                                        std::uint64_t seed, double scale = 1.0);

/// Complete measurements with the matrix-unit basis (m = n1 n2).
MeasurementEnsemble matrix_unit_ensemble(Eigen::Index n1, Eigen::Index n2, Field field);

/// Complete measurements with an orthonormal basis of Hermitian matrices (m = n^2).
MeasurementEnsemble hermitian_basis_ensemble(Eigen::Index n);

enum class NoiseModel { None, Gaussian, BoundedBall, Bernoulli };

struct NoiseSpec {
  NoiseModel model = NoiseModel::None;
  /// sigma for Gaussian, eta for bounded-ball, flip magnitude for Bernoulli.
  double level = 0.0;
  std::uint64_t seed = 0;

  static NoiseSpec none() { return {}; }
  static NoiseSpec gaussian(double sigma, std::uint64_t seed);
  static NoiseSpec bounded_ball(double eta, std::uint64_t seed);
  static NoiseSpec bernoulli(double magnitude, std::uint64_t seed);
};

std::string to_string(NoiseModel model);
NoiseModel noise_model_from_string(const std::string& name);

struct NoisyMeasurements {
  CVector b;
  RVector w;
  double w_norm = 0.0;
};

/// Adds real perturbations w to b. Bounded-ball draws a uniform direction
/// with ||w||_2 = eta exactly; Bernoulli draws +-magnitude with equal
/// probability.
NoisyMeasurements add_noise(const CVector& b, const NoiseSpec& spec);

struct PhaselessData {
  MeasurementEnsemble ensemble;
  CVector b;
  RVector w;
};

/// b_j = |<a_j, x>|^2 + w_j together with the rank-one ensemble of the a_j,
/// so that b = apply(ensemble, x x^*) + w.
PhaselessData lift_phaseless(const CMatrix& vectors, const CVector& x, const NoiseSpec& noise);

/// JSON manifest plus `<manifest>.data` in the matrix text format.
void save_ensemble(const std::string& manifest_path, const MeasurementEnsemble& e);
MeasurementEnsemble load_ensemble(const std::string& manifest_path);

}  // namespace lrlab
