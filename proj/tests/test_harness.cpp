#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lowrank/harness.hpp"

using namespace lrlab;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "lowrank_harness_test";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Config, ParsesKeysAndGrids) {
  const ExperimentConfig c = parse(
      "# comment\n"
      "scenario = noise-sweep\n"
      "n1 = 5\nn2 = 7\n"
      "r_grid = 1,2\n"
      "m_grid = 40, 60\n"
      "distribution = rademacher\n"
      "noise = gaussian\n"
      "eta_grid = 0.1,1\n"
      "trials = 3\nseed = 42\nmap = fixed\n"
      "eps_abs = 1e-7\nmax_iterations = 500\n");
  EXPECT_EQ(c.scenario, Scenario::NoiseSweep);
  EXPECT_EQ(c.n1, 5);
  EXPECT_EQ(c.n2, 7);
  EXPECT_EQ(c.r_grid, (std::vector<int>{1, 2}));
  EXPECT_EQ(c.m_grid, (std::vector<long>{40, 60}));
  EXPECT_EQ(c.distribution, EntryDistribution::Rademacher);
  EXPECT_EQ(c.noise_levels, (std::vector<double>{0.1, 1.0}));
  EXPECT_EQ(c.trials, 3);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_TRUE(c.fixed_map);
  EXPECT_EQ(c.solver_config.eps_abs, 1e-7);
  EXPECT_EQ(c.solver_config.max_iterations, 500);
  EXPECT_EQ(c.effective_solver(), SolverKind::Nuclear);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, RejectsMalformedInput) {
  EXPECT_THROW(parse("n = 4\nn = 5\n"), std::invalid_argument);
  EXPECT_THROW(parse("bogus = 1\n"), std::invalid_argument);
  EXPECT_THROW(parse("n 4\n"), std::invalid_argument);
  EXPECT_THROW(parse("m = 4\nm_grid = 5,6\n"), std::invalid_argument);
  EXPECT_THROW(parse("n = four\n"), std::invalid_argument);
  EXPECT_THROW(parse("scenario = nothing\n"), std::invalid_argument);
  EXPECT_THROW(parse("map = sometimes\n"), std::invalid_argument);
}

TEST(Config, ValidationFailsFast) {
  EXPECT_THROW(parse("n = 4\n").validate(), std::invalid_argument);
  EXPECT_THROW(parse("n = 4\nm = 10\nr = 5\n").validate(), std::invalid_argument);
  EXPECT_THROW(parse("n = 4\nm = 10\ndecay = 1.5\n").validate(), std::invalid_argument);
  EXPECT_THROW(parse("scenario = nsp-probe\nn = 4\nm = 16\n").validate(), std::invalid_argument);
  EXPECT_THROW(parse("scenario = rank-one-gaussian\nn1 = 4\nn2 = 5\nm = 10\n").validate(),
               std::invalid_argument);
  EXPECT_THROW(parse("n = 4\nm = 20\nsolver = psd-lsq\n").validate(), std::invalid_argument);
  EXPECT_THROW(parse("scenario = design-tomography\nn = 4\nm = 20\n").validate(), std::invalid_argument);
  EXPECT_THROW(parse("scenario = design-tomography\nn = 4\nm = 20\ndesign = /no/such/file.json\n").validate(),
               std::invalid_argument);
  EXPECT_THROW(parse("n = 100\nm = 2000\n").validate(), CapacityError);
  EXPECT_THROW(parse("scenario = design-validate\nn = 9\nset_sizes = 10\n").validate(), CapacityError);
}

TEST(Run, FailsBeforeWritingAnything) {
  const fs::path out = scratch("fail.csv");
  fs::remove(out);
  fs::remove(out.string() + ".partial");
  ExperimentConfig c = parse("scenario = design-tomography\nn = 4\nm = 20\ndesign = /missing.json\n");
  c.output = out.string();
  EXPECT_THROW(run(c), std::invalid_argument);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_FALSE(fs::exists(out.string() + ".partial"));
}

TEST(Run, SameSeedGivesIdenticalCsvAcrossWorkerCounts) {
  const std::string text = "scenario = noise-sweep\nn = 5\nr = 1\nm = 45\nnoise = gaussian\n"
                           "eta_grid = 0.01,0.1\ntrials = 3\nseed = 9\n";
  const fs::path a = scratch("a.csv"), b = scratch("b.csv"), d = scratch("d.csv");
  ExperimentConfig c = parse(text);
  c.output = a.string();
  setenv("LOWRANK_WORKERS", "1", 1);
  run(c);
  c.output = b.string();
  setenv("LOWRANK_WORKERS", "3", 1);
  run(c);
  unsetenv("LOWRANK_WORKERS");
  EXPECT_EQ(slurp(a), slurp(b));
  c.seed = 10;
  c.output = d.string();
  run(c);
  EXPECT_NE(slurp(a), slurp(d));

  const std::string csv = slurp(a);
  EXPECT_EQ(csv.rfind("# lowrank-lab csv schema=1\n", 0), 0u);
  EXPECT_NE(csv.find("\n#summary trials=6 "), std::string::npos);
  std::string header;
  std::istringstream lines(csv);
  while (std::getline(lines, header))
    if (!header.empty() && header[0] != '#') break;
  std::string expected;
  for (const auto& col : csv_columns()) expected += (expected.empty() ? "" : ",") + col;
  EXPECT_EQ(header, expected);
}

TEST(Run, PhaseTransitionIsMonotoneInM) {
  // Nested maps per trial: a recovered instance stays recovered as rows are added.
  const RunSummary s = run(parse("scenario = phase-transition\nn = 6\nr = 1\nm_grid = 8,22,60\n"
                                 "trials = 6\nseed = 3\n"));
  std::map<long, double> rate;
  for (const auto& rec : s.records) rate[rec.m] += rec.success ? 1.0 / 6.0 : 0.0;
  EXPECT_LE(rate[8], rate[22] + 1e-12);
  EXPECT_LE(rate[22], rate[60] + 1e-12);
  EXPECT_EQ(rate[8], 0.0);
  EXPECT_NEAR(rate[60], 1.0, 1e-12);
  // Near the transition the sampled (rho, tau) need not be conservative;
  // well above it the per-trial bound must hold.
  for (const auto& rec : s.records)
    if (rec.m == 60) EXPECT_TRUE(rec.bound_ok) << rec.trial;
}

TEST(Run, FixedMapSharedAcrossTrials) {
  const RunSummary fixed = run(parse("scenario = nsp-probe\nn = 4\nm = 10\ntrials = 2\nmap = fixed\n"
                                     "kernel_samples = 20\n"));
  ASSERT_EQ(fixed.records.size(), 2u);
  EXPECT_EQ(fixed.records[0].error, fixed.records[1].error);
  const RunSummary fresh = run(parse("scenario = nsp-probe\nn = 4\nm = 10\ntrials = 2\nkernel_samples = 20\n"));
  EXPECT_NE(fresh.records[0].error, fresh.records[1].error);
}

TEST(Run, StabilityErrorGrowsAtMostLinearlyInTail) {
  const RunSummary s = run(parse("scenario = stability-sweep\nn = 8\nr = 1\nm = 120\ndecay = 0.6\n"
                                 "tail_grid = 0,0.25,0.5,1\ntrials = 2\nseed = 4\n"));
  ASSERT_EQ(s.records.size(), 8u);
  EXPECT_TRUE(s.bounds_ok);
  for (int t = 0; t < 2; ++t) {
    std::vector<const TrialRecord*> rows;
    for (const auto& rec : s.records)
      if (rec.trial == t) rows.push_back(&rec);
    const double rho = rows[0]->rho_hat;
    ASSERT_GT(rho, 0.0);
    const double slope_cap = 2.0 * (1.0 + rho) * (1.0 + rho) / (1.0 - rho);
    EXPECT_LE(rows[0]->err_fro, 1e-4);
    for (std::size_t k = 1; k < rows.size(); ++k) {
      EXPECT_GE(rows[k]->tail_nuclear, rows[k - 1]->tail_nuclear);
      EXPECT_LE(rows[k]->err_fro, slope_cap * rows[k]->tail_nuclear + 1e-4);
    }
  }
}

TEST(Run, ConditioningAndDesignScenarios) {
  const RunSummary c = run(parse("scenario = conditioning\nn = 8\nm = 32\ntrials = 5\n"));
  ASSERT_EQ(c.records.size(), 5u);
  for (const auto& rec : c.records) {
    EXPECT_EQ(rec.metric, "kappa");
    EXPECT_GE(rec.error, 1.0);
    EXPECT_EQ(rec.bound_value, kGaussianConditioning);
  }
  const RunSummary d = run(parse("scenario = design-validate\nn = 2\nset_sizes = 16,64,256\ntrials = 1\n"));
  ASSERT_EQ(d.records.size(), 3u);
  EXPECT_EQ(d.records[2].param, 256.0);
  const RunSummary sic = run(parse("scenario = design-validate\nn = 2\ndesign = sic\n"));
  ASSERT_EQ(sic.records.size(), 1u);
  EXPECT_EQ(sic.records[0].m, 4);
}

TEST(SignalFactory, ExactRankHasNoTail) {
  for (int r : {1, 2, 3}) {
    const Signal s = signal_factory(SignalKind::ExactRankR, 6, 8, r, 5);
    const RVector sv = singular_values(s.matrix.entries());
    EXPECT_NEAR(s.matrix.entries().norm(), 1.0, 1e-12);
    EXPECT_LE(sv(r), 1e-12);
  }
}

TEST(SignalFactory, DensityOperatorAndPsd) {
  const Signal d = signal_factory(SignalKind::DensityOperator, 5, 5, 2, 6);
  EXPECT_NEAR(std::real(d.matrix.entries().trace()), 1.0, 1e-12);
  EXPECT_GE(herm_eig(d.matrix.entries()).values.minCoeff(), -1e-12);
  const Signal p = signal_factory(SignalKind::PsdRankR, 5, 5, 2, 6);
  EXPECT_NEAR(p.matrix.entries().norm(), 1.0, 1e-12);
  const Signal v = signal_factory(SignalKind::PureStateVector, 4, 4, 1, 7);
  EXPECT_NEAR(v.vector.norm(), 1.0, 1e-12);
  EXPECT_LE((v.matrix.entries() - v.vector * v.vector.adjoint()).norm(), 1e-12);
  EXPECT_THROW(signal_factory(SignalKind::PsdRankR, 4, 5, 1, 1), std::invalid_argument);
}

TEST(SignalFactory, GeometricTail) {
  const int n = 7, r = 2;
  const double q = 0.5;
  const Signal s = signal_factory(SignalKind::ApproxRankR, n, n, r, 8, q);
  const RVector head = singular_values(s.head.entries());
  const RVector all = singular_values(s.matrix.entries());
  const double sr = head(r - 1);
  // sum_{j=1}^{n-r} sr q^j = sr q (1 - q^{n-r}) / (1 - q)
  const double closed = sr * q * (1.0 - std::pow(q, n - r)) / (1.0 - q);
  EXPECT_NEAR(all.tail(n - r).sum(), closed, 1e-10);
  EXPECT_NEAR(head_tail(all, r).tail_nuclear, closed, 1e-10);
  for (int j = 0; j < r; ++j) EXPECT_NEAR(all(j), head(j), 1e-10);
}

TEST(Plots, HeatmapAndLabels) {
  const fs::path csv = scratch("transition.csv");
  ExperimentConfig c = parse("scenario = phase-transition\nn = 4\nr = 1\nm_grid = 6,16\ntrials = 2\n");
  c.output = csv.string();
  run(c);
  const std::string script = emit_plots(csv.string(), PlotTemplate::TransitionHeatmap);
  EXPECT_NE(script.find("$data << EOD"), std::string::npos);
  EXPECT_NE(script.find("set xlabel 'm/(r(n1+n2))'"), std::string::npos);
  // x = m / (r (n1 + n2)) = 6/8 and 16/8.
  EXPECT_NE(script.find("\n0.75 1 "), std::string::npos);
  EXPECT_NE(script.find("\n2 1 "), std::string::npos);
  const std::string by_m = emit_plots(csv.string(), PlotTemplate::ErrorVsM);
  EXPECT_NE(by_m.find("set xlabel 'm'"), std::string::npos);
}

TEST(Plots, EmptyGridAndMissingColumn) {
  const fs::path empty = scratch("empty.csv");
  {
    std::ofstream out(empty);
    out << "# lowrank-lab csv schema=1\n";
    for (std::size_t k = 0; k < csv_columns().size(); ++k) out << (k ? "," : "") << csv_columns()[k];
    out << "\n";
  }
  const std::string script = emit_plots(empty.string(), PlotTemplate::TransitionHeatmap);
  EXPECT_NE(script.find("$data << EOD\nEOD\n"), std::string::npos);

  const fs::path bad = scratch("bad.csv");
  {
    std::ofstream out(bad);
    out << "m,r,n1,n2\n10,1,4,4\n";
  }
  try {
    emit_plots(bad.string(), PlotTemplate::TransitionHeatmap);
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& ex) {
    EXPECT_NE(std::string(ex.what()).find("success"), std::string::npos);
  }
  EXPECT_THROW(emit_plots(scratch("none.csv").string(), PlotTemplate::ErrorVsM), std::invalid_argument);
}

TEST(Plots, NoiseSlopeLine) {
  const fs::path csv = scratch("noise.csv");
  {
    std::ofstream out(csv);
    out << "eta,err_fro,rho_hat,tau_hat\n0.1,0.05,0.5,0.2\n1,0.5,0.5,0.2\n";
  }
  const std::string script = emit_plots(csv.string(), PlotTemplate::ErrorVsEta);
  // 2 tau (3 + rho) / (1 - rho) = 2 * 0.2 * 3.5 / 0.5 = 2.8
  EXPECT_NE(script.find("slope = 2.8\n"), std::string::npos);
  EXPECT_NE(script.find("bound(x) = slope * x"), std::string::npos);
}
