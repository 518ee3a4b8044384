#include "lowrank/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "lowrank/parallel.hpp"
#include "lowrank/random.hpp"

namespace lrlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Largest dense sensing matrix (entries) a scenario may build.
constexpr double kMaxDenseEntries = 16.0 * 1024 * 1024;
constexpr std::uint64_t kFixedMapTag = 0x6d61702d66697864ULL;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': '" + v + "' is not a number");
  }
}

long parse_long(const std::string& key, const std::string& v) {
  const double d = parse_double(key, v);
  if (d != std::floor(d)) throw std::invalid_argument("config key '" + key + "' needs an integer");
  return static_cast<long>(d);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("config key '" + key + "' needs true or false");
}

template <class T, class F>
std::vector<T> parse_grid(const std::string& key, const std::string& v, F&& conv) {
  std::vector<T> out;
  for (const auto& item : split(v, ','))
    if (!item.empty()) out.push_back(conv(key, item));
  if (out.empty()) throw std::invalid_argument("config key '" + key + "' has an empty grid");
  return out;
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

bool is_recovery(Scenario s) {
  switch (s) {
    case Scenario::IndepRecovery:
    case Scenario::RankOneGaussian:
    case Scenario::DesignTomography:
    case Scenario::PhaseRetrieval:
    case Scenario::PhaseTransition:
    case Scenario::NoiseSweep:
    case Scenario::StabilitySweep: return true;
    default: return false;
  }
}

// "haar:N[:seed]" or a design manifest path.
WeightedVectorSet resolve_design(const std::string& id, int n) {
  if (id.rfind("haar:", 0) == 0) {
    const auto parts = split(id, ':');
    if (parts.size() < 2 || parts.size() > 3) throw std::invalid_argument("design id '" + id + "' is malformed");
    const long count = parse_long("design", parts[1]);
    const std::uint64_t seed = parts.size() == 3 ? static_cast<std::uint64_t>(parse_long("design", parts[2])) : 1;
    return sample_haar_set(n, static_cast<int>(count), seed);
  }
  if (id == "sic") return tetrahedral_sic_set();
  if (id == "basis") return orthonormal_basis_set(n);
  if (!std::filesystem::exists(id)) throw std::invalid_argument("design file '" + id + "' not found");
  return load_design(id);
}

WeightedVectorSet leading_subset(const WeightedVectorSet& set, long count) {
  return {set.vectors().topRows(count), RVector::Constant(count, 1.0 / static_cast<double>(count)),
          set.label() + "-first" + std::to_string(count)};
}

struct Seeds {
  std::uint64_t trial, map, signal, noise, fit;
};

Seeds seeds_for(const ExperimentConfig& c, long trial) {
  Seeds s;
  s.trial = mix_seed(c.seed, static_cast<std::uint64_t>(trial));
  s.map = c.fixed_map ? mix_seed(c.seed, kFixedMapTag) : mix_seed(s.trial, 1);
  s.signal = mix_seed(s.trial, 2);
  s.noise = mix_seed(s.trial, 3);
  s.fit = mix_seed(s.map, 4);
  return s;
}

struct Job {
  int r;
  long m;
  long trial;
};

struct Context {
  const ExperimentConfig& config;
  std::optional<WeightedVectorSet> design;
};

MeasurementEnsemble build_map(const Context& ctx, long m, std::uint64_t seed) {
  const auto& c = ctx.config;
  switch (c.scenario) {
    case Scenario::RankOneGaussian:
    case Scenario::PhaseRetrieval: return gen_rank_one_gaussian(c.n1, m, seed);
    case Scenario::DesignTomography:
      return gen_rank_one_design(*ctx.design, m, seed, 1.0 / std::sqrt(static_cast<double>(m)));
    case Scenario::Conditioning:
      if (ctx.design) return gen_rank_one_design(*ctx.design, m, seed);
      return gen_rank_one_gaussian(c.n1, m, seed);
    default: return gen_indep_entry(c.distribution, c.n1, c.n2, m, seed, Field::Real);
  }
}

Signal build_signal(const ExperimentConfig& c, int r, std::uint64_t seed) {
  switch (c.scenario) {
    case Scenario::RankOneGaussian: return signal_factory(SignalKind::PsdRankR, c.n1, c.n2, r, seed);
    case Scenario::DesignTomography:
      return signal_factory(SignalKind::DensityOperator, c.n1, c.n2, r, seed);
    case Scenario::PhaseRetrieval:
      return signal_factory(SignalKind::PureStateVector, c.n1, c.n2, 1, seed);
    case Scenario::StabilitySweep:
      return signal_factory(SignalKind::ApproxRankR, c.n1, c.n2, r, seed, c.decay > 0.0 ? c.decay : 0.5);
    default:
      if (c.decay > 0.0) return signal_factory(SignalKind::ApproxRankR, c.n1, c.n2, r, seed, c.decay);
      return signal_factory(SignalKind::ExactRankR, c.n1, c.n2, r, seed);
  }
}

SolveResult solve_with(SolverKind kind, const MeasurementEnsemble& e, const CVector& b, double eta,
                       const SolverConfig& cfg) {
  switch (kind) {
    case SolverKind::Nuclear: return nuclear_min(e, b, eta, cfg, false);
    case SolverKind::NuclearHermitian: return nuclear_min(e, b, eta, cfg, true);
    case SolverKind::TraceMin: return trace_min_psd(e, b, eta, cfg);
    case SolverKind::PsdLsq: return psd_least_squares(e, b, cfg);
    case SolverKind::Tomography: return tomography_lsq(e, b, cfg);
  }
  throw std::logic_error("unknown solver");
}

// Recovery trial: one map and signal, several (eta, tail-scale) points.
std::vector<TrialRecord> recovery_job(const Context& ctx, const Job& job) {
  const auto& c = ctx.config;
  const Seeds seeds = seeds_for(c, job.trial);
  const SolverKind solver = c.effective_solver();
  const MeasurementEnsemble e = build_map(ctx, job.m, seeds.map);
  const bool hermitian = solver != SolverKind::Nuclear;
  const Domain domain = hermitian ? Domain::Hermitian : natural_domain(e);
  const Signal signal = build_signal(c, job.r, seeds.signal);
  const bool tomography = c.scenario == Scenario::DesignTomography;

  std::optional<ConditioningReport> cond;
  RVector t_vec;
  std::vector<double> rho_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  if (tomography) {
    t_vec = RVector::Constant(e.m(), 1.0 / std::sqrt(static_cast<double>(e.m())));
    cond = conditioning_report(e, t_vec, kDesignConditioning, "uniform/sqrt(m)");
    if (cond->kappa_defined) {
      std::vector<double> allowed;
      for (double rho : rho_grid)
        if (cond->kappa * rho <= 0.99) allowed.push_back(rho);
      if (allowed.empty()) allowed.push_back(0.99 / cond->kappa * 0.5);
      rho_grid = allowed;
    }
  }
  const NspFit fit = fit_nsp_constants(e, job.r, c.nsp_samples, seeds.fit, domain, rho_grid);

  std::vector<TrialRecord> out;
  const std::vector<double> tails =
      c.scenario == Scenario::StabilitySweep ? c.tail_grid : std::vector<double>{1.0};
  for (double tail_scale : tails) {
    CMatrix x = signal.matrix.entries();
    if (c.scenario == Scenario::StabilitySweep)
      x = signal.head.entries() + tail_scale * (signal.matrix.entries() - signal.head.entries());
    const double tail_nuclear = head_tail(singular_values(x), job.r).tail_nuclear;
    const CVector clean = lrlab::apply(e, x);

    for (double level : c.noise_levels) {
      const auto start = std::chrono::steady_clock::now();
      NoiseSpec spec{c.noise, level, seeds.noise};
      const NoisyMeasurements noisy = add_noise(clean, spec);
      const double eta = noisy.w_norm;
      const SolveResult res = solve_with(solver, e, noisy.b, eta, c.solver_config);
      const CMatrix& xs = res.solution.entries();

      TrialRecord rec;
      rec.scenario = to_string(c.scenario);
      rec.trial = job.trial;
      rec.seed = seeds.trial;
      rec.n1 = c.n1;
      rec.n2 = c.n2;
      rec.r = job.r;
      rec.m = job.m;
      rec.eta = eta;
      rec.sigma = c.noise == NoiseModel::Gaussian ? level : 0.0;
      rec.param = c.scenario == Scenario::StabilitySweep ? tail_scale : level;
      rec.err_fro = (xs - x).norm();
      rec.err_rel = rec.err_fro / x.norm();
      rec.err_nuc = nuclear_norm(xs - x);
      if (c.schatten_p) rec.err_p = schatten_norm(xs - x, *c.schatten_p);
      rec.tail_nuclear = tail_nuclear;
      rec.rho_hat = fit.rho;
      rec.tau_hat = fit.tau;
      rec.nsp_found = fit.found;
      rec.iterations = res.iterations;
      rec.status = to_string(res.status);

      const double residual = (lrlab::apply(e, xs) - clean).norm();
      if (tomography) {
        rec.metric = "trace-norm";
        rec.error = rec.err_nuc;
        rec.bound_id = "eq:tomography_bound";
        if (fit.found && cond && cond->kappa_defined) {
          const PositiveConstants k = positive_constants(fit.rho, cond->kappa);
          const double t_norm = t_vec.norm();
          BoundParams p;
          p.c3 = 2.0 * k.c * cond->kappa;
          p.c4 = 2.0 * cond->w_inv_norm * (k.c * t_norm / std::sqrt(job.r) + k.d * cond->w_norm * fit.tau);
          p.r = job.r;
          p.tail_nuclear = tail_nuclear;
          p.residual_norm = noisy.w_norm;
          rec.bound_value = bound_rhs("eq:tomography_bound", p).value;
          BoundParams q;
          q.rho = fit.rho;
          q.tau = fit.tau;
          q.r = job.r;
          q.p = 1.0;
          q.tail_nuclear = tail_nuclear;
          q.residual_norm = residual;
          q.t_norm = t_norm;
          q.w_norm = cond->w_norm;
          q.w_inv_norm = cond->w_inv_norm;
          q.kappa = cond->kappa;
          rec.bound_aposteriori = bound_rhs("thm20-eq40", q).value;
        } else {
          rec.bound_value = rec.bound_aposteriori = kInf;
        }
      } else {
        if (c.scenario == Scenario::PhaseRetrieval) {
          rec.metric = "phase-aligned-rel";
          const CVector xhat = extract_phase_vector(HermMat(hermitian_part(xs)));
          rec.error = phase_aligned_distance(xhat, signal.vector) / signal.vector.norm();
        } else {
          rec.metric = "rel-frobenius";
          rec.error = rec.err_rel;
        }
        // The a-priori bound at the solver's feasibility tolerance, and the
        // a-posteriori bound at the returned point (valid for inexact minimizers).
        const bool minimizer = solver != SolverKind::PsdLsq;
        rec.bound_id = minimizer ? "thm11" : "thm12-eq13";
        if (fit.found) {
          BoundParams q;
          q.rho = fit.rho;
          q.tau = fit.tau;
          q.r = job.r;
          q.p = 2.0;
          q.tail_nuclear = tail_nuclear;
          q.nuclear_gap = nuclear_norm(xs) - nuclear_norm(x);
          q.residual_norm = residual;
          rec.bound_aposteriori = bound_rhs("thm12-eq13", q).value;
          if (minimizer) {
            BoundParams p;
            p.rho = fit.rho;
            p.tau = fit.tau;
            p.r = job.r;
            p.tail_nuclear = tail_nuclear;
            p.eta = eta + c.solver_config.eps_abs * std::sqrt(static_cast<double>(job.m));
            rec.bound_value = bound_rhs("thm11", p).value;
          } else {
            rec.bound_value = rec.bound_aposteriori;
          }
        } else {
          rec.bound_value = rec.bound_aposteriori = kInf;
        }
      }
      const double lhs = tomography ? rec.err_nuc : rec.err_fro;
      rec.bound_ok = lhs <= std::max(rec.bound_value, rec.bound_aposteriori);
      rec.success = rec.error <= c.success_threshold;
      if (c.record_wall_time)
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      out.push_back(rec);
    }
  }
  return out;
}

TrialRecord base_record(const ExperimentConfig& c, const Job& job, const Seeds& seeds) {
  TrialRecord rec;
  rec.scenario = to_string(c.scenario);
  rec.trial = job.trial;
  rec.seed = seeds.trial;
  rec.n1 = c.n1;
  rec.n2 = c.n2;
  rec.r = job.r;
  rec.m = job.m;
  rec.status = "n/a";
  return rec;
}

std::vector<TrialRecord> conditioning_job(const Context& ctx, const Job& job) {
  const auto& c = ctx.config;
  const Seeds seeds = seeds_for(c, job.trial);
  const MeasurementEnsemble e = build_map(ctx, job.m, seeds.map);
  const double md = static_cast<double>(job.m);
  const RVector t = ctx.design ? RVector::Constant(job.m, 1.0 / std::sqrt(md)) : RVector::Constant(job.m, 1.0 / md);
  const ConditioningReport rep = conditioning_report(e, t, std::nullopt, ctx.design ? "uniform/sqrt(m)" : "uniform/m");
  TrialRecord rec = base_record(c, job, seeds);
  rec.metric = "kappa";
  rec.error = rep.kappa;
  rec.bound_id = "kappa-threshold";
  rec.bound_value = rep.threshold;
  rec.bound_aposteriori = rep.threshold;
  rec.bound_ok = rep.pass;
  rec.success = rep.pass;
  return {rec};
}

std::vector<TrialRecord> design_job(const Context& ctx, const Job& job) {
  const auto& c = ctx.config;
  const Seeds seeds = seeds_for(c, job.trial);
  std::vector<TrialRecord> out;
  auto record = [&](const WeightedVectorSet& set, double param) {
    const DesignValidation v = validate_design(set, job.r, c.design_mode);
    TrialRecord rec = base_record(c, job, seeds);
    rec.m = static_cast<long>(set.size());
    rec.param = param;
    const bool strict = c.design_mode == DesignMode::StrictInf;
    rec.metric = strict ? "theta-inf" : "theta-1";
    rec.error = strict ? v.report.theta_inf : v.report.theta_1;
    rec.err_fro = v.report.frame_deviation;
    rec.bound_id = strict ? "design-theta-inf" : "design-theta-1";
    rec.bound_value = strict ? 1.0 / (16.0 * job.r * job.r) : 0.25;
    rec.bound_aposteriori = 1.0 / c.n1;
    rec.bound_ok = v.pass;
    rec.success = v.pass;
    out.push_back(rec);
  };
  if (!c.set_sizes.empty()) {
    // Nested sets: the first N vectors of one Haar sample.
    const long largest = *std::max_element(c.set_sizes.begin(), c.set_sizes.end());
    const WeightedVectorSet full = sample_haar_set(c.n1, static_cast<int>(largest), seeds.signal);
    for (long count : c.set_sizes) record(leading_subset(full, count), static_cast<double>(count));
  } else {
    record(*ctx.design, static_cast<double>(ctx.design->size()));
  }
  return out;
}

std::vector<TrialRecord> nsp_job(const Context& ctx, const Job& job) {
  const auto& c = ctx.config;
  const Seeds seeds = seeds_for(c, job.trial);
  const MeasurementEnsemble e = build_map(ctx, job.m, seeds.map);
  const auto samples = kernel_sample(e, c.kernel_samples, seeds.fit);
  double worst = 0.0;
  for (const auto& k : samples) {
    const HeadTail ht = head_tail(singular_values(k), job.r);
    worst = std::max(worst, ht.tail_nuclear > 0.0 ? ht.head_nuclear / ht.tail_nuclear : kInf);
  }
  TrialRecord rec = base_record(c, job, seeds);
  rec.metric = "max-head/tail-nuclear";
  rec.error = worst;
  rec.bound_id = "eq:NSP";
  rec.bound_value = 1.0;
  rec.bound_aposteriori = 1.0;
  rec.bound_ok = worst < 1.0;
  rec.success = rec.bound_ok;
  rec.param = static_cast<double>(samples.size());
  return {rec};
}

}  // namespace

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::IndepRecovery: return "indep-recovery";
    case Scenario::RankOneGaussian: return "rank-one-gaussian";
    case Scenario::DesignTomography: return "design-tomography";
    case Scenario::PhaseRetrieval: return "phase-retrieval";
    case Scenario::PhaseTransition: return "phase-transition";
    case Scenario::NoiseSweep: return "noise-sweep";
    case Scenario::StabilitySweep: return "stability-sweep";
    case Scenario::Conditioning: return "conditioning";
    case Scenario::DesignValidate: return "design-validate";
    case Scenario::NspProbe: return "nsp-probe";
  }
  return "unknown";
}

Scenario scenario_from_string(const std::string& name) {
  for (int k = 0; k <= static_cast<int>(Scenario::NspProbe); ++k)
    if (to_string(static_cast<Scenario>(k)) == name) return static_cast<Scenario>(k);
  throw std::invalid_argument("unknown scenario '" + name + "'");
}

std::string to_string(SolverKind s) {
  switch (s) {
    case SolverKind::Nuclear: return "nuclear";
    case SolverKind::NuclearHermitian: return "nuclear-hermitian";
    case SolverKind::TraceMin: return "trace-min";
    case SolverKind::PsdLsq: return "psd-lsq";
    case SolverKind::Tomography: return "tomography";
  }
  return "unknown";
}

SolverKind solver_kind_from_string(const std::string& name) {
  for (int k = 0; k <= static_cast<int>(SolverKind::Tomography); ++k)
    if (to_string(static_cast<SolverKind>(k)) == name) return static_cast<SolverKind>(k);
  throw std::invalid_argument("unknown solver '" + name + "'");
}

SolverKind ExperimentConfig::effective_solver() const {
  if (solver) return *solver;
  switch (scenario) {
    case Scenario::RankOneGaussian:
    case Scenario::PhaseRetrieval: return SolverKind::PsdLsq;
    case Scenario::DesignTomography: return SolverKind::Tomography;
    default: return SolverKind::Nuclear;
  }
}

void ExperimentConfig::validate() const {
  if (n1 < 1 || n2 < 1) throw std::invalid_argument("config needs positive dimensions (n or n1, n2)");
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (r_grid.empty()) throw std::invalid_argument("rank grid is empty");
  for (int r : r_grid)
    if (r < 1 || r > std::min(n1, n2)) throw std::invalid_argument("rank " + std::to_string(r) + " out of range");
  if (noise_levels.empty()) throw std::invalid_argument("noise grid is empty");
  for (double v : noise_levels)
    if (!(v >= 0.0)) throw std::invalid_argument("noise levels must be >= 0");
  if (tail_grid.empty()) throw std::invalid_argument("tail grid is empty");
  if (!(success_threshold > 0.0)) throw std::invalid_argument("success threshold must be > 0");
  if (schatten_p && !(*schatten_p >= 1.0)) throw std::invalid_argument("schatten_p must be >= 1");
  if (decay < 0.0 || decay >= 1.0) throw std::invalid_argument("decay must lie in [0, 1)");
  solver_config.validate();

  const bool square = scenario == Scenario::RankOneGaussian || scenario == Scenario::DesignTomography ||
                      scenario == Scenario::PhaseRetrieval || scenario == Scenario::Conditioning ||
                      scenario == Scenario::DesignValidate;
  if (square && n1 != n2) throw std::invalid_argument("scenario " + to_string(scenario) + " needs n1 = n2");

  if (scenario != Scenario::DesignValidate) {
    if (m_grid.empty()) throw std::invalid_argument("config needs m or m_grid");
    for (long m : m_grid) {
      if (m < 1) throw std::invalid_argument("m must be >= 1");
      const double dense = static_cast<double>(m) * n1 * n2;
      if (dense > kMaxDenseEntries)
        throw CapacityError("m * n1 * n2 = " + fmt(dense) + " exceeds the dense capacity guard");
      if (scenario == Scenario::NspProbe && m >= static_cast<long>(n1) * n2)
        throw std::invalid_argument("nsp-probe needs a nontrivial kernel: m = " + std::to_string(m) +
                                    " >= n1 n2 = " + std::to_string(n1 * n2));
    }
  }
  if (is_recovery(scenario)) {
    const SolverKind s = effective_solver();
    const bool hermitian_map = scenario == Scenario::RankOneGaussian ||
                               scenario == Scenario::DesignTomography ||
                               scenario == Scenario::PhaseRetrieval;
    if (s != SolverKind::Nuclear && !hermitian_map)
      throw std::invalid_argument("solver " + to_string(s) + " needs a Hermitian measurement map");
  }
  if (scenario == Scenario::DesignTomography && design.empty())
    throw std::invalid_argument("design-tomography needs a design id");
  if (scenario == Scenario::DesignValidate) {
    if (design.empty() && set_sizes.empty())
      throw std::invalid_argument("design-validate needs a design id or set_sizes");
    long dim = 1;
    for (int k = 0; k < 4; ++k) dim *= n1;
    if (dim > kMaxMomentDim) throw CapacityError("n^4 exceeds the moment-operator guard");
    for (long s : set_sizes)
      if (s < 1) throw std::invalid_argument("set sizes must be >= 1");
  }
  if (!design.empty()) (void)resolve_design(design, n1);
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c;
  std::string line;
  int lineno = 0;
  std::set<std::string> seen;
  std::optional<long> m_single;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + " is not key=value");
    const std::string key = trim(t.substr(0, eq));
    const std::string v = trim(t.substr(eq + 1));
    if (!seen.insert(key).second) throw std::invalid_argument("config key '" + key + "' repeated");
    auto as_long = [](const std::string& k, const std::string& s) { return parse_long(k, s); };
    auto as_int = [](const std::string& k, const std::string& s) { return static_cast<int>(parse_long(k, s)); };
    auto as_double = [](const std::string& k, const std::string& s) { return parse_double(k, s); };
    if (key == "scenario") c.scenario = scenario_from_string(v);
    else if (key == "n") c.n1 = c.n2 = static_cast<int>(parse_long(key, v));
    else if (key == "n1") c.n1 = static_cast<int>(parse_long(key, v));
    else if (key == "n2") c.n2 = static_cast<int>(parse_long(key, v));
    else if (key == "r") c.r_grid = {static_cast<int>(parse_long(key, v))};
    else if (key == "r_grid") c.r_grid = parse_grid<int>(key, v, as_int);
    else if (key == "m") m_single = parse_long(key, v);
    else if (key == "m_grid") c.m_grid = parse_grid<long>(key, v, as_long);
    else if (key == "distribution") c.distribution = entry_distribution_from_string(v);
    else if (key == "design") c.design = v;
    else if (key == "design_mode") c.design_mode = design_mode_from_string(v);
    else if (key == "noise") c.noise = noise_model_from_string(v);
    else if (key == "noise_level") c.noise_levels = {parse_double(key, v)};
    else if (key == "eta_grid") c.noise_levels = parse_grid<double>(key, v, as_double);
    else if (key == "decay") c.decay = parse_double(key, v);
    else if (key == "tail_grid") c.tail_grid = parse_grid<double>(key, v, as_double);
    else if (key == "set_sizes") c.set_sizes = parse_grid<long>(key, v, as_long);
    else if (key == "trials") c.trials = static_cast<int>(parse_long(key, v));
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_long(key, v));
    else if (key == "map") {
      if (v == "fixed") c.fixed_map = true;
      else if (v == "fresh") c.fixed_map = false;
      else throw std::invalid_argument("config key 'map' must be fresh or fixed");
    } else if (key == "solver") c.solver = solver_kind_from_string(v);
    else if (key == "max_iterations") c.solver_config.max_iterations = static_cast<int>(parse_long(key, v));
    else if (key == "eps_abs") c.solver_config.eps_abs = parse_double(key, v);
    else if (key == "eps_rel") c.solver_config.eps_rel = parse_double(key, v);
    else if (key == "penalty") c.solver_config.penalty = parse_double(key, v);
    else if (key == "restart") c.solver_config.restart = parse_bool(key, v);
    else if (key == "success_threshold") c.success_threshold = parse_double(key, v);
    else if (key == "nsp_samples") c.nsp_samples = parse_long(key, v);
    else if (key == "kernel_samples") c.kernel_samples = static_cast<int>(parse_long(key, v));
    else if (key == "schatten_p") c.schatten_p = parse_double(key, v);
    else if (key == "record_wall_time") c.record_wall_time = parse_bool(key, v);
    else if (key == "output") c.output = v;
    else throw std::invalid_argument("unknown config key '" + key + "'");
  }
  if (m_single) {
    if (!c.m_grid.empty()) throw std::invalid_argument("config sets both m and m_grid");
    c.m_grid = {*m_single};
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config '" + path + "'");
  return parse_config(in);
}

RunSummary run(const ExperimentConfig& config) {
  config.validate();
  Context ctx{config, std::nullopt};
  if (!config.design.empty()) ctx.design = resolve_design(config.design, config.n1);

  std::vector<Job> jobs;
  if (config.scenario == Scenario::DesignValidate) {
    for (long t = 0; t < config.trials; ++t) jobs.push_back({config.r_grid.front(), 0, t});
  } else {
    for (int r : config.r_grid)
      for (long m : config.m_grid)
        for (long t = 0; t < config.trials; ++t) jobs.push_back({r, m, t});
  }

  std::vector<std::vector<TrialRecord>> results(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    const Job& job = jobs[i];
    switch (config.scenario) {
      case Scenario::Conditioning: results[i] = conditioning_job(ctx, job); break;
      case Scenario::DesignValidate: results[i] = design_job(ctx, job); break;
      case Scenario::NspProbe: results[i] = nsp_job(ctx, job); break;
      default: results[i] = recovery_job(ctx, job); break;
    }
  });

  RunSummary summary;
  for (auto& group : results)
    for (auto& rec : group) summary.records.push_back(std::move(rec));
  double successes = 0.0, error_sum = 0.0;
  for (const auto& rec : summary.records) {
    successes += rec.success ? 1.0 : 0.0;
    error_sum += rec.error;
    summary.bounds_ok = summary.bounds_ok && rec.bound_ok;
  }
  const double count = static_cast<double>(summary.records.size());
  summary.success_rate = count > 0 ? successes / count : 0.0;
  summary.mean_error = count > 0 ? error_sum / count : 0.0;

  if (!config.output.empty()) {
    // Written to a temporary name first so no partial CSV is left behind.
    const std::string tmp = config.output + ".partial";
    {
      std::ofstream out(tmp);
      if (!out) throw std::runtime_error("cannot open '" + tmp + "' for writing");
      write_csv(out, config, summary);
    }
    std::filesystem::rename(tmp, config.output);
  }
  return summary;
}

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols = {
      "scenario", "trial",   "seed",    "n1",        "n2",       "r",          "m",
      "eta",      "sigma",   "param",   "metric",    "error",    "err_fro",    "err_rel",
      "err_nuc",  "err_p",   "tail_nuclear",         "rho_hat",  "tau_hat",    "nsp_found",
      "bound_id", "bound_rhs",         "bound_aposteriori",     "bound_ok",   "success",
      "iterations",          "status", "wall_ms"};
  return cols;
}

void write_csv(std::ostream& out, const ExperimentConfig& config, const RunSummary& summary) {
  out << "# lowrank-lab csv schema=" << kCsvSchemaVersion << "\n";
  out << "# scenario=" << to_string(config.scenario) << " seed=" << config.seed
      << " trials=" << config.trials << " solver=" << to_string(config.effective_solver())
      << " map=" << (config.fixed_map ? "fixed" : "fresh") << "\n";
  const auto& cols = csv_columns();
  for (std::size_t k = 0; k < cols.size(); ++k) out << (k ? "," : "") << cols[k];
  out << "\n";
  for (const auto& r : summary.records) {
    out << r.scenario << ',' << r.trial << ',' << r.seed << ',' << r.n1 << ',' << r.n2 << ',' << r.r
        << ',' << r.m << ',' << fmt(r.eta) << ',' << fmt(r.sigma) << ',' << fmt(r.param) << ','
        << r.metric << ',' << fmt(r.error) << ',' << fmt(r.err_fro) << ',' << fmt(r.err_rel) << ','
        << fmt(r.err_nuc) << ',' << fmt(r.err_p) << ',' << fmt(r.tail_nuclear) << ','
        << fmt(r.rho_hat) << ',' << fmt(r.tau_hat) << ',' << (r.nsp_found ? 1 : 0) << ','
        << r.bound_id << ',' << fmt(r.bound_value) << ',' << fmt(r.bound_aposteriori) << ','
        << (r.bound_ok ? 1 : 0) << ',' << (r.success ? 1 : 0) << ',' << r.iterations << ','
        << r.status << ',' << fmt(r.wall_ms) << "\n";
  }
  out << "#summary trials=" << summary.records.size() << " success_rate=" << fmt(summary.success_rate)
      << " mean_error=" << fmt(summary.mean_error) << " bounds_ok=" << (summary.bounds_ok ? 1 : 0)
      << "\n";
}

std::string to_string(SignalKind kind) {
  switch (kind) {
    case SignalKind::ExactRankR: return "exact-rank-r";
    case SignalKind::ApproxRankR: return "approx-rank-r";
    case SignalKind::PsdRankR: return "psd-rank-r";
    case SignalKind::DensityOperator: return "density-operator";
    case SignalKind::PureStateVector: return "pure-state-vector";
  }
  return "unknown";
}

SignalKind signal_kind_from_string(const std::string& name) {
  for (int k = 0; k <= static_cast<int>(SignalKind::PureStateVector); ++k)
    if (to_string(static_cast<SignalKind>(k)) == name) return static_cast<SignalKind>(k);
  throw std::invalid_argument("unknown signal kind '" + name + "'");
}

Signal signal_factory(SignalKind kind, int n1, int n2, int r, std::uint64_t seed, double decay,
                      Field field) {
  if (n1 < 1 || n2 < 1) throw std::invalid_argument("signal dimensions must be positive");
  if (kind != SignalKind::PureStateVector && (r < 1 || r > std::min(n1, n2)))
    throw std::invalid_argument("signal rank out of range");
  Rng rng(seed);
  switch (kind) {
    case SignalKind::ExactRankR: {
      const CMatrix x = random_rank_r(n1, n2, r, field, rng);
      const Mat m(x, field);
      return {m, m, {}};
    }
    case SignalKind::ApproxRankR: {
      if (!(decay > 0.0 && decay < 1.0)) throw std::invalid_argument("decay must lie in (0, 1)");
      const CMatrix head = random_rank_r(n1, n2, r, field, rng);
      const Svd s = svd(head);
      // Orthonormal completions of the head's singular subspaces.
      auto complete = [&](const CMatrix& basis, Eigen::Index dim) {
        CMatrix full(dim, dim);
        full.leftCols(r) = basis.leftCols(r);
        full.rightCols(dim - r) = gaussian(dim, dim - r, field, rng);
        Eigen::HouseholderQR<CMatrix> qr(full);
        CMatrix q = qr.householderQ() * CMatrix::Identity(dim, dim);
        return CMatrix(q.rightCols(dim - r));
      };
      const Eigen::Index k = std::min(n1, n2) - r;
      CMatrix x = head;
      if (k > 0) {
        const CMatrix u = complete(s.u, n1).leftCols(k);
        const CMatrix v = complete(s.v, n2).leftCols(k);
        RVector tail(k);
        for (Eigen::Index j = 0; j < k; ++j) tail(j) = s.sigma(r - 1) * std::pow(decay, j + 1.0);
        x += u * tail.cast<Complex>().asDiagonal() * v.adjoint();
      }
      if (field == Field::Real) x = x.real().cast<Complex>();
      return {Mat(x, field), Mat(head, field), {}};
    }
    case SignalKind::PsdRankR:
    case SignalKind::DensityOperator: {
      if (n1 != n2) throw std::invalid_argument("PSD signals need n1 = n2");
      const CMatrix g = gaussian_complex(n1, r, rng);
      CMatrix x = hermitian_part(g * g.adjoint());
      x /= kind == SignalKind::PsdRankR ? x.norm() : std::real(x.trace());
      const Mat m = Mat::complex(x);
      return {m, m, {}};
    }
    case SignalKind::PureStateVector: {
      if (n1 != n2) throw std::invalid_argument("pure states need n1 = n2");
      const CVector v = haar_vector(n1, rng);
      const Mat m = Mat::complex(hermitian_part(v * v.adjoint()));
      return {m, m, v};
    }
  }
  throw std::logic_error("unknown signal kind");
}

PlotTemplate plot_template_from_string(const std::string& name) {
  if (name == "transition-heatmap") return PlotTemplate::TransitionHeatmap;
  if (name == "error-vs-m") return PlotTemplate::ErrorVsM;
  if (name == "error-vs-eta") return PlotTemplate::ErrorVsEta;
  throw std::invalid_argument("unknown plot template '" + name + "'");
}

std::string emit_plots(const std::string& csv_path, PlotTemplate kind) {
  std::ifstream in(csv_path);
  if (!in) throw std::invalid_argument("cannot open CSV '" + csv_path + "'");
  std::string line;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header.empty()) header = split(line, ',');
    else rows.push_back(split(line, ','));
  }
  if (header.empty()) throw std::invalid_argument("CSV '" + csv_path + "' has no header");
  auto column = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::invalid_argument("CSV is missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  auto num = [&](const std::vector<std::string>& row, std::size_t c) {
    if (c >= row.size()) throw std::invalid_argument("CSV row is shorter than the header");
    return parse_double(header[c], row[c]);
  };

  std::ostringstream s;
  s << "# gnuplot script generated from " << csv_path << "\n";
  s << "set datafile separator whitespace\n";
  if (kind == PlotTemplate::TransitionHeatmap) {
    const auto cm = column("m"), cr = column("r"), cn1 = column("n1"), cn2 = column("n2"),
               cs = column("success");
    std::map<std::pair<double, double>, std::pair<double, double>> cells;
    for (const auto& row : rows) {
      const double r = num(row, cr);
      const double x = num(row, cm) / (r * (num(row, cn1) + num(row, cn2)));
      auto& cell = cells[{x, r}];
      cell.first += num(row, cs);
      cell.second += 1.0;
    }
    s << "$data << EOD\n";
    for (const auto& [key, val] : cells) s << fmt(key.first) << ' ' << fmt(key.second) << ' ' << fmt(val.first / val.second) << "\n";
    s << "EOD\n";
    s << "set title 'recovery success rate'\n";
    s << "set xlabel 'm/(r(n1+n2))'\nset ylabel 'r'\nset cblabel 'success rate'\n";
    s << "set cbrange [0:1]\nset palette defined (0 'white', 1 'black')\n";
    s << "plot $data using 1:2:3 with points pointtype 5 pointsize 2 palette notitle\n";
  } else if (kind == PlotTemplate::ErrorVsM) {
    const auto cm = column("m"), ce = column("error");
    std::map<double, std::pair<double, double>> points;
    for (const auto& row : rows) {
      auto& p = points[num(row, cm)];
      p.first += num(row, ce);
      p.second += 1.0;
    }
    s << "$data << EOD\n";
    for (const auto& [m, v] : points) s << fmt(m) << ' ' << fmt(v.first / v.second) << "\n";
    s << "EOD\n";
    s << "set title 'mean error vs number of measurements'\n";
    s << "set xlabel 'm'\nset ylabel 'mean error'\nset logscale y\n";
    s << "plot $data using 1:2 with linespoints title 'observed'\n";
  } else {
    const auto ceta = column("eta"), ce = column("err_fro"), crho = column("rho_hat"),
               ctau = column("tau_hat");
    std::map<double, std::pair<double, double>> points;
    double rho = 0.0, tau = 0.0, fitted = 0.0;
    for (const auto& row : rows) {
      auto& p = points[num(row, ceta)];
      p.first += num(row, ce);
      p.second += 1.0;
      const double rh = num(row, crho), th = num(row, ctau);
      if (std::isfinite(th) && rh > 0.0 && rh < 1.0) {
        rho += rh;
        tau += th;
        fitted += 1.0;
      }
    }
    const double slope = fitted > 0 ? 2.0 * (tau / fitted) * (3.0 + rho / fitted) / (1.0 - rho / fitted) : 0.0;
    s << "$data << EOD\n";
    for (const auto& [eta, v] : points) s << fmt(eta) << ' ' << fmt(v.first / v.second) << "\n";
    s << "EOD\n";
    s << "slope = " << fmt(slope) << "\n";
    s << "bound(x) = slope * x\n";
    s << "set title 'error vs noise level'\n";
    s << "set xlabel 'eta'\nset ylabel 'Frobenius error'\nset logscale xy\n";
    s << "plot $data using 1:2 with linespoints title 'observed', bound(x) with lines dashtype 2 "
         "title sprintf('2 tau (3+rho)/(1-rho) eta, slope %g', slope)\n";
  }
  return s.str();
}

}  // namespace lrlab
