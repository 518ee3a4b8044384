// lab: command line front end for the lowrank library.
#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "lowrank/analysis.hpp"
#include "lowrank/designs.hpp"
#include "lowrank/harness.hpp"
#include "lowrank/measurements.hpp"
#include "lowrank/serialize.hpp"
#include "lowrank/solvers.hpp"

using namespace lrlab;
using nlohmann::json;

namespace {

std::string num(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

void emit(const json& j, bool as_json, const std::vector<std::string>& cols) {
  if (as_json) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  for (std::size_t k = 0; k < cols.size(); ++k) std::cout << (k ? "," : "") << cols[k];
  std::cout << "\n";
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const json& v = j.at(cols[k]);
    std::cout << (k ? "," : "");
    if (v.is_number_float()) std::cout << num(v.get<double>());
    else if (v.is_string()) std::cout << v.get<std::string>();
    else std::cout << v.dump();
  }
  std::cout << "\n";
}

WeightedVectorSet design_from(const std::string& id, int n) {
  if (id == "sic") return tetrahedral_sic_set();
  if (id == "basis") return orthonormal_basis_set(n);
  if (id.rfind("haar:", 0) == 0) {
    const auto rest = id.substr(5);
    const auto colon = rest.find(':');
    const int count = std::stoi(rest.substr(0, colon));
    const std::uint64_t seed = colon == std::string::npos ? 1 : std::stoull(rest.substr(colon + 1));
    return sample_haar_set(n, count, seed);
  }
  return load_design(id);
}

RVector t_vector(const std::string& kind, Eigen::Index m) {
  const double md = static_cast<double>(m);
  if (kind == "uniform-m") return RVector::Constant(m, 1.0 / md);
  if (kind == "uniform-sqrt-m") return RVector::Constant(m, 1.0 / std::sqrt(md));
  if (kind == "ones") return RVector::Ones(m);
  throw std::invalid_argument("unknown t vector '" + kind + "' (uniform-m, uniform-sqrt-m, ones)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lowrank lab: low-rank recovery experiments"};
  app.require_subcommand(1);

  // run
  auto* run_cmd = app.add_subcommand("run", "Run an experiment config and write its CSV");
  std::string config_path, output_override;
  bool assert_bounds = false;
  run_cmd->add_option("config", config_path, "key=value config file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("-o,--output", output_override, "CSV path (overrides the config)");
  run_cmd->add_flag("--assert-bounds", assert_bounds, "Exit non-zero unless every bound check passes");

  // plot
  auto* plot_cmd = app.add_subcommand("plot", "Print a gnuplot script for a result CSV");
  std::string plot_csv, plot_template = "error-vs-m";
  plot_cmd->add_option("csv", plot_csv)->required();
  plot_cmd->add_option("-t,--template", plot_template, "transition-heatmap | error-vs-m | error-vs-eta");

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "Solve a recovery program");
  std::string solve_kind, ens_path, b_path, solve_out = "solution.txt", meta_out;
  double eta = 0.0;
  SolverConfig scfg;
  solve_cmd->add_option("program", solve_kind, "nuclear | nuclear-hermitian | trace-min | psd-lsq | tomography")
      ->required();
  solve_cmd->add_option("-e,--ensemble", ens_path, "ensemble manifest")->required();
  solve_cmd->add_option("-b,--measurements", b_path, "measurement vector file")->required();
  solve_cmd->add_option("--eta", eta, "noise radius");
  solve_cmd->add_option("-o,--output", solve_out, "solution matrix file");
  solve_cmd->add_option("--meta", meta_out, "JSON metadata file (stdout if omitted)");
  solve_cmd->add_option("--max-iterations", scfg.max_iterations);
  solve_cmd->add_option("--eps-abs", scfg.eps_abs);
  solve_cmd->add_option("--eps-rel", scfg.eps_rel);
  solve_cmd->add_option("--penalty", scfg.penalty);

  // analyze
  auto* analyze_cmd = app.add_subcommand("analyze", "NSP, small-ball, conditioning and bound estimates");
  analyze_cmd->require_subcommand(1);
  bool as_json = false;
  long samples = 200, trials = 100000;
  int rank = 1, n = 4;
  std::uint64_t seed = 1;
  double xi = 1.0 / std::sqrt(2.0);
  std::string model = "rank-one-gaussian", design_id, t_kind = "uniform-m", distribution = "gaussian";
  std::optional<double> threshold;

  auto* nsp_cmd = analyze_cmd->add_subcommand("nsp", "Fit NSP constants (rho, tau) by sampling");
  nsp_cmd->add_option("-e,--ensemble", ens_path)->required();
  nsp_cmd->add_option("-r,--rank", rank);
  nsp_cmd->add_option("--samples", samples);
  nsp_cmd->add_option("--seed", seed);
  nsp_cmd->add_flag("--json", as_json);

  auto* sb_cmd = analyze_cmd->add_subcommand("smallball", "Monte-Carlo small-ball probability Q_xi");
  sb_cmd->add_option("--model", model, "rank-one-gaussian | indep | design");
  sb_cmd->add_option("-n", n);
  sb_cmd->add_option("-r,--rank", rank);
  sb_cmd->add_option("--xi", xi);
  sb_cmd->add_option("--trials", trials);
  sb_cmd->add_option("--seed", seed);
  sb_cmd->add_option("--design", design_id, "design file, sic, basis or haar:N[:seed]");
  sb_cmd->add_option("--distribution", distribution);
  sb_cmd->add_flag("--json", as_json);

  auto* cond_cmd = analyze_cmd->add_subcommand("conditioning", "Condition number of W = sum t_j A_j");
  cond_cmd->add_option("-e,--ensemble", ens_path)->required();
  cond_cmd->add_option("--t", t_kind, "uniform-m | uniform-sqrt-m | ones");
  cond_cmd->add_option("--threshold", threshold);
  cond_cmd->add_flag("--json", as_json);

  auto* bounds_cmd = analyze_cmd->add_subcommand("bounds", "Evaluate a bound right-hand side");
  std::string bound_id;
  BoundParams bp;
  bounds_cmd->add_option("id", bound_id)->required();
  bounds_cmd->add_option("--rho", bp.rho);
  bounds_cmd->add_option("--tau", bp.tau);
  bounds_cmd->add_option("-r,--rank", bp.r);
  bounds_cmd->add_option("-p", bp.p);
  bounds_cmd->add_option("-m", bp.m);
  bounds_cmd->add_option("--eta", bp.eta);
  bounds_cmd->add_option("--tail", bp.tail_nuclear);
  bounds_cmd->add_option("--t-norm", bp.t_norm);
  bounds_cmd->add_option("--w-norm", bp.w_norm);
  bounds_cmd->add_option("--w-inv-norm", bp.w_inv_norm);
  bounds_cmd->add_option("--kappa", bp.kappa);
  bounds_cmd->add_option("--c3", bp.c3);
  bounds_cmd->add_option("--c4", bp.c4);
  bounds_cmd->add_option("--residual", bp.residual_norm);
  bounds_cmd->add_option("--gap", bp.nuclear_gap);
  bounds_cmd->add_flag("--json", as_json);

  // design
  auto* design_cmd = app.add_subcommand("design", "Weighted vector sets and t-design checks");
  design_cmd->require_subcommand(1);
  std::string design_path, mode = "strict-inf", out_path;
  int t_order = 4, count = 16;
  auto* verify_cmd = design_cmd->add_subcommand("verify", "Moment report and validation");
  verify_cmd->add_option("file", design_path)->required();
  verify_cmd->add_option("-n", n, "dimension for the built-in basis set");
  verify_cmd->add_option("--t", t_order);
  verify_cmd->add_option("-r,--rank", rank);
  verify_cmd->add_option("--mode", mode, "strict-inf | relaxed-1");
  verify_cmd->add_flag("--json", as_json);
  auto* sample_cmd = design_cmd->add_subcommand("sample", "Haar-random unit vectors with uniform weights");
  sample_cmd->add_option("-n", n)->required();
  sample_cmd->add_option("--count", count)->required();
  sample_cmd->add_option("--seed", seed);
  sample_cmd->add_option("-o,--output", out_path)->required();
  auto* sic_cmd = design_cmd->add_subcommand("sic", "Dimension-2 tetrahedral SIC");
  sic_cmd->add_option("-o,--output", out_path)->required();
  auto* basis_cmd = design_cmd->add_subcommand("basis", "Standard orthonormal basis");
  basis_cmd->add_option("-n", n)->required();
  basis_cmd->add_option("-o,--output", out_path)->required();

  // gen
  auto* gen_cmd = app.add_subcommand("gen", "Generate ensembles, signals and measurements");
  gen_cmd->require_subcommand(1);
  std::string gen_kind = "indep", field_name = "real", signal_path;
  int n1 = 4, n2 = 4;
  long m = 16;
  double decay = 0.5, scale = 1.0, level = 0.0;
  std::string noise_name = "none";
  auto* gen_ens = gen_cmd->add_subcommand("ensemble", "Sample a measurement ensemble");
  gen_ens->add_option("--kind", gen_kind, "indep | rank-one-gaussian | design");
  gen_ens->add_option("--n1", n1);
  gen_ens->add_option("--n2", n2);
  gen_ens->add_option("-m", m)->required();
  gen_ens->add_option("--seed", seed);
  gen_ens->add_option("--distribution", distribution);
  gen_ens->add_option("--field", field_name);
  gen_ens->add_option("--design", design_id);
  gen_ens->add_option("--scale", scale);
  gen_ens->add_option("-o,--output", out_path, "manifest path")->required();
  auto* gen_sig = gen_cmd->add_subcommand("signal", "Sample a test signal");
  std::string signal_kind = "exact-rank-r";
  gen_sig->add_option("--kind", signal_kind);
  gen_sig->add_option("--n1", n1);
  gen_sig->add_option("--n2", n2);
  gen_sig->add_option("-r,--rank", rank);
  gen_sig->add_option("--seed", seed);
  gen_sig->add_option("--decay", decay);
  gen_sig->add_option("--field", field_name);
  gen_sig->add_option("-o,--output", out_path)->required();
  auto* gen_meas = gen_cmd->add_subcommand("measure", "Apply an ensemble to a signal and add noise");
  gen_meas->add_option("-e,--ensemble", ens_path)->required();
  gen_meas->add_option("-s,--signal", signal_path)->required();
  gen_meas->add_option("--noise", noise_name, "none | gaussian | bounded-ball | bernoulli");
  gen_meas->add_option("--level", level);
  gen_meas->add_option("--seed", seed);
  gen_meas->add_option("-o,--output", out_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      ExperimentConfig cfg = load_config(config_path);
      if (!output_override.empty()) cfg.output = output_override;
      const RunSummary s = run(cfg);
      if (cfg.output.empty()) write_csv(std::cout, cfg, s);
      std::cerr << "trials=" << s.records.size() << " success_rate=" << num(s.success_rate)
                << " mean_error=" << num(s.mean_error) << " bounds_ok=" << (s.bounds_ok ? 1 : 0) << "\n";
      return assert_bounds && !s.bounds_ok ? 1 : 0;
    }
    if (plot_cmd->parsed()) {
      std::cout << emit_plots(plot_csv, plot_template_from_string(plot_template));
      return 0;
    }
    if (solve_cmd->parsed()) {
      const MeasurementEnsemble e = load_ensemble(ens_path);
      const CVector b = load_vector(b_path);
      const SolveResult res = [&] {
        switch (solver_kind_from_string(solve_kind)) {
          case SolverKind::Nuclear: return nuclear_min(e, b, eta, scfg, false);
          case SolverKind::NuclearHermitian: return nuclear_min(e, b, eta, scfg, true);
          case SolverKind::TraceMin: return trace_min_psd(e, b, eta, scfg);
          case SolverKind::PsdLsq: return psd_least_squares(e, b, scfg);
          case SolverKind::Tomography: break;
        }
        return tomography_lsq(e, b, scfg);
      }();
      save_matrix(solve_out, res.solution);
      json meta = {{"program", solve_kind},   {"solution", solve_out},
                   {"objective", res.objective}, {"residual", res.residual},
                   {"iterations", res.iterations}, {"status", to_string(res.status)},
                   {"primal_gap", res.primal_gap}, {"dual_gap", res.dual_gap},
                   {"final_penalty", res.final_penalty}, {"restarts", res.restarts},
                   {"monotone", res.monotone}};
      if (meta_out.empty()) {
        std::cout << meta.dump(2) << "\n";
      } else {
        std::ofstream(meta_out) << meta.dump(2) << "\n";
      }
      return res.status == SolveStatus::Converged ? 0 : 2;
    }
    if (nsp_cmd->parsed()) {
      const MeasurementEnsemble e = load_ensemble(ens_path);
      const NspFit fit = fit_nsp_constants(e, rank, samples, seed);
      json j = {{"rho", fit.rho},   {"tau", fit.tau},        {"found", fit.found},
                {"samples", fit.samples}, {"caveat", fit.caveat}, {"rho_grid", fit.rho_grid},
                {"tau_grid", fit.tau_grid}};
      emit(j, as_json, {"rho", "tau", "found", "samples", "caveat"});
      return 0;
    }
    if (sb_cmd->parsed()) {
      RowSampler rows;
      Domain domain = Domain::Hermitian;
      int n2v = n;
      if (model == "rank-one-gaussian") {
        rows = rank_one_gaussian_rows(n);
      } else if (model == "design") {
        if (design_id.empty()) throw std::invalid_argument("--design is required for the design model");
        rows = design_rows(design_from(design_id, n));
      } else if (model == "indep") {
        rows = indep_entry_rows(entry_distribution_from_string(distribution), n, n);
        domain = Domain::Real;
      } else {
        throw std::invalid_argument("unknown model '" + model + "'");
      }
      const auto dirs = sample_directions(n, n2v, rank, domain, 16, mix_seed(seed, 7));
      const SmallBallEstimates est = estimate_Q(rows, dirs, xi, trials, seed, model);
      json j = {{"model", model}, {"xi", est.xi},           {"trials", est.trials},
                {"q_hat", est.q_hat}, {"q_lo", est.q_ci.lo}, {"q_hi", est.q_ci.hi},
                {"directions", est.directions}, {"worst_direction", est.worst_direction}};
      emit(j, as_json, {"model", "xi", "trials", "q_hat", "q_lo", "q_hi", "worst_direction"});
      return 0;
    }
    if (cond_cmd->parsed()) {
      const MeasurementEnsemble e = load_ensemble(ens_path);
      const ConditioningReport rep = conditioning_report(e, t_vector(t_kind, e.m()), threshold, t_kind);
      json j = {{"t", rep.t_descriptor}, {"lambda_min", rep.lambda_min}, {"lambda_max", rep.lambda_max},
                {"kappa", rep.kappa_defined ? json(rep.kappa) : json(nullptr)},
                {"threshold", rep.threshold}, {"pass", rep.pass},
                {"w_norm", rep.w_norm},   {"w_inv_norm", rep.w_inv_norm}};
      emit(j, as_json, {"t", "lambda_min", "lambda_max", "kappa", "threshold", "pass"});
      return rep.pass ? 0 : 1;
    }
    if (bounds_cmd->parsed()) {
      const BoundEvaluation ev = bound_rhs(bound_id, bp);
      emit(json{{"id", ev.id}, {"value", ev.value}}, as_json, {"id", "value"});
      return 0;
    }
    if (verify_cmd->parsed()) {
      const WeightedVectorSet set = design_from(design_path, n);
      const DesignMode dm = design_mode_from_string(mode);
      const DesignValidation v = validate_design(set, rank, dm, t_order);
      const MomentReport& r = v.report;
      json j = {{"label", set.label()},     {"n", set.dim()},           {"N", set.size()},
                {"t", r.t},                 {"theta_1", r.theta_1},     {"theta_2", r.theta_2},
                {"theta_inf", r.theta_inf}, {"frame_deviation", r.frame_deviation},
                {"mode", to_string(dm)},    {"pass", v.pass}};
      emit(j, as_json, {"label", "n", "N", "t", "theta_1", "theta_2", "theta_inf", "frame_deviation", "mode", "pass"});
      return v.pass ? 0 : 1;
    }
    if (sample_cmd->parsed()) {
      save_design(out_path, sample_haar_set(n, count, seed));
      return 0;
    }
    if (sic_cmd->parsed()) {
      save_design(out_path, tetrahedral_sic_set());
      return 0;
    }
    if (basis_cmd->parsed()) {
      save_design(out_path, orthonormal_basis_set(n));
      return 0;
    }
    if (gen_ens->parsed()) {
      MeasurementEnsemble e = [&] {
        if (gen_kind == "indep")
          return gen_indep_entry(entry_distribution_from_string(distribution), n1, n2, m, seed,
                                 field_from_string(field_name));
        if (gen_kind == "rank-one-gaussian") return gen_rank_one_gaussian(n1, m, seed);
        if (gen_kind == "design") {
          if (design_id.empty()) throw std::invalid_argument("--design is required for design ensembles");
          return gen_rank_one_design(design_from(design_id, n1), m, seed, scale);
        }
        throw std::invalid_argument("unknown ensemble kind '" + gen_kind + "'");
      }();
      save_ensemble(out_path, e);
      return 0;
    }
    if (gen_sig->parsed()) {
      const Signal s = signal_factory(signal_kind_from_string(signal_kind), n1, n2, rank, seed, decay,
                                      field_from_string(field_name));
      if (s.vector.size() > 0) save_vector(out_path, s.vector, Field::Complex);
      else save_matrix(out_path, s.matrix);
      return 0;
    }
    if (gen_meas->parsed()) {
      const MeasurementEnsemble e = load_ensemble(ens_path);
      const Mat x = load_matrix(signal_path);
      const NoisyMeasurements noisy = add_noise(lrlab::apply(e, x.entries()),
                                                {noise_model_from_string(noise_name), level, seed});
      const bool real = noisy.b.imag().cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + noisy.b.norm());
      save_vector(out_path, noisy.b, real ? Field::Real : Field::Complex);
      std::cerr << "w_norm=" << num(noisy.w_norm) << "\n";
      return 0;
    }
  } catch (const std::exception& ex) {
    std::cerr << "lab: " << ex.what() << "\n";
    return 3;
  }
  return 0;
}
