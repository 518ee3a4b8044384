#pragma once

#include <cstdint>
#include <string>

#include "lowrank/core.hpp"

namespace lrlab {

/// Weighted set {(p_i, w_i)} of unit vectors in C^n with sum p_i = 1.
/// Row i of `vectors()` is w_i^T.
class WeightedVectorSet {
 public:
  WeightedVectorSet(CMatrix vectors, RVector weights, std::string label);

  Eigen::Index dim() const { return vectors_.cols(); }
  Eigen::Index size() const { return vectors_.rows(); }
  const CMatrix& vectors() const { return vectors_; }
  const RVector& weights() const { return weights_; }
  const std::string& label() const { return label_; }
  CVector vector(Eigen::Index i) const { return vectors_.row(i).transpose(); }

 private:
  CMatrix vectors_;
  RVector weights_;
  std::string label_;
};

/// Deviations of a weighted set from the Haar moments.
struct MomentReport {
  int t = 0;
  double theta_1 = 0.0;
  double theta_2 = 0.0;
  double theta_inf = 0.0;
  /// ||sum p_i w_i w_i^* - Id/n||_inf for unit vectors.
  double frame_deviation = 0.0;
  /// Same deviation for vectors rescaled to squared norm sqrt(n(n+1)),
  /// measured against sqrt((n+1)/n) Id.
  double frame_deviation_rescaled = 0.0;
  double binomial = 0.0;
};

enum class DesignMode { StrictInf, Relaxed1 };
DesignMode design_mode_from_string(const std::string& name);
std::string to_string(DesignMode mode);

struct DesignValidation {
  bool pass = false;
  bool moment_ok = false;
  bool frame_ok = false;
  MomentReport report;
};

/// Resource guard for dense n^t x n^t moment operators.
inline constexpr long kMaxMomentDim = 4096;

double binomial(int n, int k);

/// binom(n+t-1, t)^{-1} times the projector onto the symmetric subspace of
/// (C^n)^{tensor t}. Tensor factors are ordered left to right; permutations
/// act on base-n digit strings.
RMatrix sym_moment_integral(int n, int t);

/// Permutation operator on (C^n)^{tensor t} mapping factor k to position perm[k].
RMatrix permutation_operator(int n, const std::vector<int>& perm);

/// sum_i p_i (w_i w_i^*)^{tensor t}.
CMatrix moment_operator(const WeightedVectorSet& set, int t);

/// theta_p = binom(n+t-1,t) * ||moment_operator - sym_moment_integral||_p for
/// p in {1, 2, inf}.
double moment_deviation(const WeightedVectorSet& set, int t, double p);

MomentReport moment_report(const WeightedVectorSet& set, int t);

/// Operator-norm deviation of the frame operator from Id/n.
double frame_deviation(const WeightedVectorSet& set);

/// Accuracy conditions for 4-designs used as rank-one measurement vectors:
/// strict-inf requires theta_inf <= 1/(16 r^2), relaxed-1 requires
/// theta_1 <= 1/4; both require frame_deviation <= 1/n.
DesignValidation validate_design(const WeightedVectorSet& set, int r, DesignMode mode, int t = 4);

/// N normalized complex Gaussian vectors with uniform weights.
WeightedVectorSet sample_haar_set(int n, int count, std::uint64_t seed);

WeightedVectorSet orthonormal_basis_set(int n);

/// The four tetrahedral SIC vectors in C^2 (an exact 2-design).
WeightedVectorSet tetrahedral_sic_set();

/// Applies the same unitary to every vector.
WeightedVectorSet rotate(const WeightedVectorSet& set, const CMatrix& unitary);

/// Manifest (JSON) with weights and label plus a matrix file of vector rows.
void save_design(const std::string& manifest_path, const WeightedVectorSet& set);
WeightedVectorSet load_design(const std::string& manifest_path);

}  // namespace lrlab
