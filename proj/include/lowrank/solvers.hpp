#pragma once

#include <optional>
#include <string>

#include "lowrank/core.hpp"
#include "lowrank/measurements.hpp"

namespace lrlab {

struct SolverConfig {
  int max_iterations = 5000;
  double eps_abs = 1e-7;
  double eps_rel = 1e-6;
  /// Initial ADMM penalty.
  double penalty = 1.0;
  /// Residual balancing: rescale the penalty by `balance_factor` whenever one
  /// residual exceeds the other by `balance_ratio`.
  bool adapt_penalty = true;
  double balance_factor = 2.0;
  double balance_ratio = 10.0;
  /// Function-value restart for the accelerated gradient solvers.
  bool restart = true;
  /// Overrides the data-driven starting point.
  std::optional<CMatrix> initial;

  void validate() const;
};

enum class SolveStatus { Converged, MaxIter, InfeasibleDetected };
std::string to_string(SolveStatus status);

struct SolveResult {
  Mat solution;
  double objective = 0.0;
  /// ||A(X) - b||_2 at the returned point.
  double residual = 0.0;
  int iterations = 0;
  SolveStatus status = SolveStatus::MaxIter;
  /// Final primal and dual residuals (ADMM) or gradient-mapping norm and
  /// its tolerance (projected gradient).
  double primal_gap = 0.0;
  double dual_gap = 0.0;
  double final_penalty = 0.0;
  int restarts = 0;
  /// Objective never increased between accepted iterates.
  bool monotone = true;
};

/// min ||Z||_* s.t. ||A(Z) - b||_2 <= eta, by ADMM alternating singular
/// value soft-thresholding with projection onto the constraint set. With
/// `hermitian` the search is restricted to Hermitian Z.
SolveResult nuclear_min(const MeasurementEnsemble& e, const CVector& b, double eta,
                        const SolverConfig& config = {}, bool hermitian = false);

/// min tr(Z) s.t. Z PSD, ||A(Z) - b||_2 <= eta.
SolveResult trace_min_psd(const MeasurementEnsemble& e, const CVector& b, double eta,
                          const SolverConfig& config = {});

/// min ||A(Z) - b||_2^2 s.t. Z PSD, by accelerated projected gradient.
SolveResult psd_least_squares(const MeasurementEnsemble& e, const CVector& b,
                              const SolverConfig& config = {});

/// min ||A(Z) - b||_2^2 s.t. Z PSD, tr Z = 1.
SolveResult tomography_lsq(const MeasurementEnsemble& e, const CVector& b,
                           const SolverConfig& config = {});

/// sqrt(lambda_1) v_1 for the top eigenpair, phase-normalized so that the
/// first nonzero component is real and positive.
CVector extract_phase_vector(const HermMat& z);

/// min over theta of ||e^{i theta} estimate - truth||_2.
double phase_aligned_distance(const CVector& estimate, const CVector& truth);

/// ||A||_op^2 on Hermitian (or general) inputs by power iteration on A^* A,
/// inflated by 2% so step sizes derived from it stay safe.
double operator_norm_squared(const MeasurementEnsemble& e, bool hermitian, int iterations = 200);

}  // namespace lrlab
