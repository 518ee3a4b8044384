#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lowrank/analysis.hpp"
#include "lowrank/core.hpp"
#include "lowrank/measurements.hpp"
#include "lowrank/solvers.hpp"

namespace lrlab {

inline constexpr int kCsvSchemaVersion = 1;

enum class Scenario {
  IndepRecovery,
  RankOneGaussian,
  DesignTomography,
  PhaseRetrieval,
  PhaseTransition,
  NoiseSweep,
  StabilitySweep,
  Conditioning,
  DesignValidate,
  NspProbe,
};
std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& name);

enum class SolverKind { Nuclear, NuclearHermitian, TraceMin, PsdLsq, Tomography };
std::string to_string(SolverKind s);
SolverKind solver_kind_from_string(const std::string& name);

/// Flat key=value configuration. Lines starting with '#' are comments.
///
/// Keys: scenario, n | n1 n2, r, r_grid, m, m_grid, distribution, design
/// (manifest path or haar:N[:seed]), design_mode, noise, noise_level,
/// eta_grid, decay, tail_grid, set_sizes, trials, seed, map (fresh|fixed),
/// solver, max_iterations, eps_abs, eps_rel, penalty, restart,
/// success_threshold, nsp_samples, kernel_samples, schatten_p,
/// record_wall_time, output. Grids are comma separated.
struct ExperimentConfig {
  Scenario scenario = Scenario::IndepRecovery;
  int n1 = 0, n2 = 0;
  std::vector<int> r_grid = {1};
  std::vector<long> m_grid;
  EntryDistribution distribution = EntryDistribution::Gaussian;
  std::string design;
  DesignMode design_mode = DesignMode::StrictInf;
  NoiseModel noise = NoiseModel::None;
  std::vector<double> noise_levels = {0.0};
  double decay = 0.0;
  std::vector<double> tail_grid = {1.0};
  std::vector<long> set_sizes;
  int trials = 1;
  std::uint64_t seed = 1;
  bool fixed_map = false;
  std::optional<SolverKind> solver;
  SolverConfig solver_config;
  double success_threshold = 1e-3;
  long nsp_samples = 100;
  int kernel_samples = 200;
  std::optional<double> schatten_p;
  bool record_wall_time = false;
  std::string output;

  SolverKind effective_solver() const;
  /// Fail-fast checks: ranges, grids, resolvable design ids, capacity guards.
  void validate() const;
};

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

struct TrialRecord {
  std::string scenario;
  long trial = 0;
  std::uint64_t seed = 0;
  int n1 = 0, n2 = 0, r = 0;
  long m = 0;
  double eta = 0.0;
  double sigma = 0.0;
  /// Sweep parameter: tail scale, set size N, or 0.
  double param = 0.0;
  std::string metric;
  double error = 0.0;
  double err_fro = 0.0;
  double err_rel = 0.0;
  double err_nuc = 0.0;
  double err_p = 0.0;
  double tail_nuclear = 0.0;
  double rho_hat = 0.0;
  double tau_hat = 0.0;
  bool nsp_found = false;
  std::string bound_id;
  double bound_value = 0.0;
  double bound_aposteriori = 0.0;
  bool bound_ok = true;
  bool success = false;
  int iterations = 0;
  std::string status;
  double wall_ms = 0.0;
};

struct RunSummary {
  std::vector<TrialRecord> records;
  double success_rate = 0.0;
  double mean_error = 0.0;
  bool bounds_ok = true;
};

/// Runs every trial (in parallel, LOWRANK_WORKERS threads) and, when
/// config.output is set, writes the CSV. Deterministic under (config, seed).
RunSummary run(const ExperimentConfig& config);

const std::vector<std::string>& csv_columns();
void write_csv(std::ostream& out, const ExperimentConfig& config, const RunSummary& summary);

enum class SignalKind { ExactRankR, ApproxRankR, PsdRankR, DensityOperator, PureStateVector };
std::string to_string(SignalKind kind);
SignalKind signal_kind_from_string(const std::string& name);

struct Signal {
  /// The signal X (x x^* for pure states).
  Mat matrix;
  /// Best rank-r part used to build X.
  Mat head;
  /// The state vector for pure-state-vector signals, empty otherwise.
  CVector vector;
};

/// exact-rank-r: product of Gaussian factors, ||X||_F = 1. approx-rank-r:
/// the same head plus singular values sigma_{r+j} = sigma_r q^j on an
/// orthogonal complement (q = decay). psd-rank-r: G G^* with ||X||_F = 1.
/// density-operator: G G^* / tr. pure-state-vector: Haar unit vector.
Signal signal_factory(SignalKind kind, int n1, int n2, int r, std::uint64_t seed,
                      double decay = 0.5, Field field = Field::Real);

enum class PlotTemplate { TransitionHeatmap, ErrorVsM, ErrorVsEta };
PlotTemplate plot_template_from_string(const std::string& name);

/// Gnuplot script with the aggregated CSV data inlined as a data block.
std::string emit_plots(const std::string& csv_path, PlotTemplate kind);

}  // namespace lrlab
