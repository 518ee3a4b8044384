#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lowrank/core.hpp"
#include "lowrank/measurements.hpp"

namespace lrlab {

struct NspCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = true;
};

/// lhs = ||M_r||_2, rhs = (rho/sqrt(r)) ||M_c||_1 + tau ||A(M)||_2.
NspCheck nsp_inequality(const CMatrix& m, const MeasurementEnsemble& e, double rho, double tau,
                        int r);

/// Search domain for kernel and direction sampling.
enum class Domain { Real, Complex, Hermitian };
std::string to_string(Domain domain);

/// Real field ensembles search real matrices, Hermitian-compatible complex
/// ensembles search Hermitian matrices, everything else complex matrices.
Domain natural_domain(const MeasurementEnsemble& e);

/// Orthonormal kernel basis of A restricted to `domain`, one n1 x n2 matrix
/// per element.
std::vector<CMatrix> kernel_basis(const MeasurementEnsemble& e, Domain domain);

/// k random unit-Frobenius combinations of the kernel basis. Throws
/// std::invalid_argument when the kernel is trivial.
std::vector<CMatrix> kernel_sample(const MeasurementEnsemble& e, int k, std::uint64_t seed);
std::vector<CMatrix> kernel_sample(const MeasurementEnsemble& e, int k, std::uint64_t seed,
                                   Domain domain);

/// Value of m^2/(m+1) required by the Gaussian measurement count.
double gordon_requirement(int n1, int n2, int r, double rho, double kappa, double eps);

/// Smallest integer m with m^2/(m+1) >= gordon_requirement(...).
long gordon_count(int n1, int n2, int r, double rho, double kappa, double eps);

/// E ||g||_2 for g standard Gaussian in R^m.
double expected_gaussian_norm(long m);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// 95% Wilson score interval for `successes` out of `trials`.
Interval wilson_interval(long successes, long trials, double z = 1.959963984540054);

struct SmallBallEstimates {
  double q_hat = 0.0;
  Interval q_ci;
  double w_hat = 0.0;
  Interval w_ci;
  long trials = 0;
  double xi = 0.0;
  std::string directions;
  /// Index of the direction attaining the minimum.
  int worst_direction = -1;
};

/// Draws one fresh measurement matrix.
using RowSampler = std::function<CMatrix(Rng&)>;

RowSampler rank_one_gaussian_rows(Eigen::Index n);
/// Design vectors rescaled to squared norm sqrt(n(n+1)).
RowSampler design_rows(const WeightedVectorSet& design);
RowSampler indep_entry_rows(EntryDistribution dist, Eigen::Index n1, Eigen::Index n2);

/// Unit-Frobenius test directions: `count` random matrices of rank r in the
/// given domain plus the structured extremes (a single projector and a
/// traceless pair for square Hermitian domains).
std::vector<CMatrix> sample_directions(Eigen::Index n1, Eigen::Index n2, int r, Domain domain,
                                       int count, std::uint64_t seed);

/// Estimates min over the given directions u of P(|<Phi, u>| >= xi), with the
/// Wilson interval of the worst direction.
SmallBallEstimates estimate_Q(const RowSampler& rows, const std::vector<CMatrix>& directions,
                              double xi, long trials, std::uint64_t seed,
                              const std::string& descriptor = "sampled");

/// sqrt(r) * mean ||H||_inf with H = m^{-1/2} sum_j eps_j A_j for Rademacher
/// signs eps, plus a normal 95% interval.
SmallBallEstimates estimate_Wm(const MeasurementEnsemble& e, int r, long trials,
                               std::uint64_t seed);

/// Parameters of the bound formulas; absent entries are reported by name.
struct BoundParams {
  std::optional<double> rho, tau, r, p, m, eta;
  /// ||X_c||_1.
  std::optional<double> tail_nuclear;
  /// ||t||_2, ||W||_inf, ||W^{-1}||_inf and kappa(W).
  std::optional<double> t_norm, w_norm, w_inv_norm, kappa;
  /// Constants c_3 / C_3 and C_4 of the probabilistic statements.
  std::optional<double> c3, c4;
  /// ||A(Z) - A(X)||_2, or ||w||_2 for the tomography bound.
  std::optional<double> residual_norm;
  /// ||Z||_1 - ||X||_1.
  std::optional<double> nuclear_gap;
};

struct BoundEvaluation {
  std::string id;
  BoundParams params;
  double value = 0.0;
};

/// Known ids: thm11, thm12-eq13, eq:ErrorEstimate, err:bound1, eq:mainTh3,
/// eq:tomography_bound, thm20-eq40.
BoundEvaluation bound_rhs(const std::string& id, const BoundParams& params);
const std::vector<std::string>& bound_ids();

/// C = (1+k rho)^2/(1-k rho) and D = (3+k rho)/(1-k rho); requires k rho <= 0.99.
struct PositiveConstants {
  double c = 0.0;
  double d = 0.0;
};
PositiveConstants positive_constants(double rho, double kappa);

struct NspFit {
  double rho = 0.0;
  double tau = 0.0;
  /// Always "sampled-infimum": an empirical surrogate, not a certificate.
  std::string caveat = "sampled-infimum";
  long samples = 0;
  std::vector<double> rho_grid;
  /// Sampled inf ||A(M)||_2 over unit M in T_{rho,r} per grid value
  /// (infinity when no candidate landed in the set).
  std::vector<double> inf_norm;
  std::vector<double> tau_grid;
  bool found = false;
  CMatrix witness;
};

/// Estimates (rho, tau) from sampled directions of T_{rho,r}: random rank-r
/// matrices, random elements of the smallest right-singular subspace of the
/// sensing map, and convex combinations pushed to the boundary of T_{rho,r}.
NspFit fit_nsp_constants(const MeasurementEnsemble& e, int r, long samples, std::uint64_t seed,
                         std::optional<Domain> domain = std::nullopt,
                         std::vector<double> rho_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7,
                                                         0.8, 0.9});

/// Conditioning thresholds for W = sum_j t_j A_j.
inline constexpr double kGaussianConditioning = 49.0;
inline constexpr double kDesignConditioning = 8.0;

struct ConditioningReport {
  std::string t_descriptor;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double kappa = 0.0;
  /// False when W is not positive definite; kappa is then meaningless.
  bool kappa_defined = false;
  double threshold = 0.0;
  bool pass = false;
  double w_norm = 0.0;
  double w_inv_norm = 0.0;
};

/// Spectrum of W = sum_j t_j A_j. The default threshold is 8 for ensembles
/// generated from a design and 49 otherwise.
ConditioningReport conditioning_report(const MeasurementEnsemble& e, const RVector& t,
                                       std::optional<double> threshold = std::nullopt,
                                       const std::string& t_descriptor = "custom");

/// The ensemble with matrices W^{-1/2} A_j W^{-1/2}, so that
/// apply(result, Z) = apply(e, W^{-1/2} Z W^{-1/2}). Rank-one ensembles stay
/// rank-one.
MeasurementEnsemble conditioned_map(const MeasurementEnsemble& e, const RVector& t);

/// W^{power} for positive definite Hermitian W (eigenvalue floor 1e-10 lambda_max).
CMatrix hermitian_power(const CMatrix& w, double power);

}  // namespace lrlab
