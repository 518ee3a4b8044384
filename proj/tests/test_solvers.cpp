#include <gtest/gtest.h>

#include <cmath>

#include "lowrank/designs.hpp"
#include "lowrank/measurements.hpp"
#include "lowrank/random.hpp"
#include "lowrank/solvers.hpp"
#include "support/reference.hpp"

using namespace lrlab;

namespace {

double rel(const CMatrix& a, const CMatrix& b) { return (a - b).norm() / b.norm(); }

CMatrix psd_rank_r(Eigen::Index n, int r, std::uint64_t seed) {
  Rng rng(seed);
  const CMatrix g = gaussian_complex(n, r, rng);
  CMatrix x = g * g.adjoint();
  return x / x.norm();
}

}  // namespace

TEST(SolverConfig, Validation) {
  SolverConfig c;
  c.eps_abs = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.max_iterations = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  EXPECT_NO_THROW(c.validate());
}

TEST(NuclearMin, CompleteMeasurementsRecoverExactly) {
  const auto e = matrix_unit_ensemble(3, 4, Field::Real);
  Rng rng(1);
  const CMatrix x = gaussian_real(3, 4, rng).cast<Complex>();
  const SolveResult res = nuclear_min(e, lrlab::apply(e, x), 0.0);
  EXPECT_EQ(res.status, SolveStatus::Converged);
  EXPECT_LE(rel(res.solution.entries(), x), 1e-6);
}

TEST(NuclearMin, SmallGaussianInstanceMatchesReference) {
  const auto e = gen_indep_entry(EntryDistribution::Gaussian, 4, 4, 14, 2);
  Rng rng(3);
  const CMatrix x = random_rank_r(4, 4, 1, Field::Real, rng);
  const CVector b = lrlab::apply(e, x);
  const SolveResult res = nuclear_min(e, b, 0.0);
  EXPECT_EQ(res.status, SolveStatus::Converged);
  EXPECT_LE(rel(res.solution.entries(), x), 1e-4);

  lrtest::ReferenceOptions opt;
  opt.real = true;
  opt.iterations = 60000;
  opt.decay = 0.9996;
  const auto ref = lrtest::reference_nuclear_min(e, b, opt);
  EXPECT_LE(rel(ref.solution, x), 1e-4);
  EXPECT_LE((ref.solution - res.solution.entries()).norm(), 1e-4);
}

TEST(NuclearMin, ZeroDataGivesZero) {
  const auto e = gen_indep_entry(EntryDistribution::Gaussian, 3, 3, 6, 4);
  const SolveResult res = nuclear_min(e, CVector::Zero(6), 0.0);
  EXPECT_LE(res.solution.entries().norm(), 1e-8);
}

TEST(NuclearMin, FeasibleAtConvergenceWithNoise) {
  const auto e = gen_indep_entry(EntryDistribution::Gaussian, 6, 6, 60, 5);
  Rng rng(6);
  const CMatrix x = random_rank_r(6, 6, 1, Field::Real, rng);
  const auto noisy = add_noise(lrlab::apply(e, x), NoiseSpec::bounded_ball(0.05, 7));
  const SolverConfig cfg;
  const SolveResult res = nuclear_min(e, noisy.b, 0.05, cfg);
  EXPECT_EQ(res.status, SolveStatus::Converged);
  EXPECT_LE(res.residual, 0.05 + cfg.eps_abs * std::sqrt(60.0));
  // X is feasible, so the minimizer cannot have a larger nuclear norm.
  EXPECT_LE(nuclear_norm(res.solution.entries()), nuclear_norm(x) + 1e-5);
}

TEST(NuclearMin, MaxIterIsReported) {
  const auto e = gen_indep_entry(EntryDistribution::Gaussian, 6, 6, 30, 8);
  Rng rng(9);
  const CMatrix x = random_rank_r(6, 6, 2, Field::Real, rng);
  SolverConfig cfg;
  cfg.max_iterations = 3;
  const SolveResult res = nuclear_min(e, lrlab::apply(e, x), 0.0, cfg);
  EXPECT_EQ(res.status, SolveStatus::MaxIter);
  EXPECT_EQ(res.iterations, 3);
}

TEST(NuclearMin, InfeasibleRadiusDetected) {
  // Two identical measurement matrices with different data: no Z fits both.
  CMatrix a = CMatrix::Zero(2, 2);
  a(0, 0) = 1.0;
  CMatrix c = CMatrix::Zero(2, 2);
  c(1, 1) = 1.0;
  const auto e = MeasurementEnsemble::dense({a, a, c}, Field::Real, {});
  CVector b(3);
  b << 1.0, 2.0, 0.5;
  const SolveResult res = nuclear_min(e, b, 0.1);
  EXPECT_EQ(res.status, SolveStatus::InfeasibleDetected);
}

TEST(NuclearMin, HermitianVariantStaysHermitian) {
  const auto e = gen_rank_one_gaussian(5, 30, 10);
  Rng rng(11);
  const CMatrix x = random_hermitian_rank_r(5, 1, rng);
  const SolveResult res = nuclear_min(e, lrlab::apply(e, x), 0.0, {}, true);
  const CMatrix& z = res.solution.entries();
  EXPECT_LE((z - z.adjoint()).norm(), 1e-12);
  EXPECT_LE(rel(z, x), 1e-4);
}

TEST(NuclearMin, Deterministic) {
  const auto e = gen_indep_entry(EntryDistribution::Gaussian, 5, 5, 20, 12);
  Rng rng(13);
  const CVector b = lrlab::apply(e, random_rank_r(5, 5, 1, Field::Real, rng));
  const SolveResult a = nuclear_min(e, b, 0.0), c = nuclear_min(e, b, 0.0);
  EXPECT_EQ((a.solution.entries() - c.solution.entries()).norm(), 0.0);
  EXPECT_EQ(a.iterations, c.iterations);
}

TEST(TraceMin, CompleteMeasurementsRecoverPsd) {
  const auto e = hermitian_basis_ensemble(4);
  const CMatrix x = psd_rank_r(4, 2, 14);
  const SolveResult res = trace_min_psd(e, lrlab::apply(e, x), 0.0);
  EXPECT_LE(rel(res.solution.entries(), x), 1e-6);
}

TEST(TraceMin, RankOneGaussianAgainstReference) {
  const auto e = gen_rank_one_gaussian(8, 48, 15);
  const CMatrix x = psd_rank_r(8, 1, 16);
  const CVector b = lrlab::apply(e, x);
  const SolveResult res = trace_min_psd(e, b, 0.0);
  EXPECT_EQ(res.status, SolveStatus::Converged);
  EXPECT_LE(rel(res.solution.entries(), x), 1e-3);
  EXPECT_LE(res.objective, std::real(x.trace()) + 1e-5);

  lrtest::ReferenceOptions opt;
  opt.hermitian = true;
  const auto ref = lrtest::reference_nuclear_min(e, b, opt);
  EXPECT_LE(rel(ref.solution, x), 1e-3);
}

TEST(TraceMin, SolutionIsPsd) {
  const auto e = gen_rank_one_gaussian(6, 30, 17);
  const CMatrix x = psd_rank_r(6, 2, 18);
  const auto noisy = add_noise(lrlab::apply(e, x), NoiseSpec::bounded_ball(0.01, 19));
  const SolveResult res = trace_min_psd(e, noisy.b, 0.01);
  ASSERT_EQ(res.status, SolveStatus::Converged);
  // The returned iterate is PSD up to the final primal residual.
  EXPECT_GE(herm_eig(res.solution.entries()).values(0), -res.primal_gap - 1e-12);
}

TEST(TraceMin, RejectsNonHermitianEnsemble) {
  const auto e = gen_indep_entry(EntryDistribution::Gaussian, 3, 3, 5, 1);
  EXPECT_THROW(trace_min_psd(e, CVector::Zero(5), 0.0), std::invalid_argument);
}

TEST(PsdLeastSquares, OverdeterminedRecovery) {
  const auto e = gen_rank_one_gaussian(5, 60, 20);
  const CMatrix x = psd_rank_r(5, 3, 21);
  const SolveResult res = psd_least_squares(e, lrlab::apply(e, x));
  EXPECT_EQ(res.status, SolveStatus::Converged);
  EXPECT_LE(rel(res.solution.entries(), x), 1e-5);
  EXPECT_TRUE(res.monotone);
}

TEST(PsdLeastSquares, PhaseRetrievalAgreesWithTraceMin) {
  const int n = 16;
  Rng rng(22);
  const CVector xv = haar_vector(n, rng);
  const CMatrix vectors = gaussian_complex(6 * n, n, rng) / std::sqrt(2.0);
  const PhaselessData d = lift_phaseless(vectors, xv, NoiseSpec::none());
  const CMatrix x = xv * xv.adjoint();
  const SolveResult lsq = psd_least_squares(d.ensemble, d.b);
  const SolveResult tm = trace_min_psd(d.ensemble, d.b, 0.0);
  EXPECT_LE(rel(lsq.solution.entries(), x), 1e-3);
  EXPECT_LE(rel(tm.solution.entries(), x), 1e-3);
  EXPECT_LE((lsq.solution.entries() - tm.solution.entries()).norm(), 2e-3);
}

TEST(PsdLeastSquares, RandomInitializationsAgree) {
  const auto e = gen_rank_one_gaussian(8, 64, 23);
  const CMatrix x = psd_rank_r(8, 1, 24);
  const CVector b = lrlab::apply(e, x);
  Rng rng(25);
  std::vector<CMatrix> sols;
  for (int k = 0; k < 10; ++k) {
    SolverConfig cfg;
    cfg.eps_rel = 1e-9;
    cfg.max_iterations = 20000;
    const CMatrix g = gaussian_complex(8, 8, rng);
    cfg.initial = CMatrix(g * g.adjoint() / 8.0);
    sols.push_back(psd_least_squares(e, b, cfg).solution.entries());
  }
  for (std::size_t i = 0; i < sols.size(); ++i)
    for (std::size_t j = i + 1; j < sols.size(); ++j) EXPECT_LE((sols[i] - sols[j]).norm(), 1e-5);
}

TEST(Tomography, MaximallyMixedState) {
  const auto e = gen_rank_one_gaussian(4, 40, 26);
  const CMatrix x = CMatrix::Identity(4, 4) / 4.0;
  const SolveResult res = tomography_lsq(e, lrlab::apply(e, x));
  EXPECT_LE(rel(res.solution.entries(), x), 1e-5);
}

TEST(Tomography, PureStateFromDesignEnsemble) {
  const int n = 4;
  const long m = static_cast<long>(std::ceil(12 * n * std::log(n)));
  const auto e = gen_rank_one_design(sample_haar_set(n, 400, 27), m, 28, 1.0 / std::sqrt(double(m)));
  Rng rng(29);
  const CVector v = haar_vector(n, rng);
  const CMatrix x = v * v.adjoint();
  const SolveResult res = tomography_lsq(e, lrlab::apply(e, x));
  EXPECT_LE(nuclear_norm(res.solution.entries() - x), 1e-3);
}

TEST(Tomography, OutputIsADensityOperator) {
  const auto e = gen_rank_one_gaussian(5, 20, 30);
  const CMatrix x = psd_rank_r(5, 2, 31);
  const auto noisy = add_noise(lrlab::apply(e, x), NoiseSpec::gaussian(0.1, 32));
  const SolveResult res = tomography_lsq(e, noisy.b);
  EXPECT_NEAR(std::real(res.solution.entries().trace()), 1.0, 1e-10);
  EXPECT_GE(herm_eig(res.solution.entries()).values(0), -1e-12);
}

TEST(PhaseVector, RecoversVectorUpToPhase) {
  Rng rng(33);
  const CVector x = 1.7 * haar_vector(6, rng);
  const CVector est = extract_phase_vector(HermMat(x * x.adjoint()));
  EXPECT_LE(phase_aligned_distance(est, x), 1e-10);
}

TEST(PhaseVector, DiagonalExample) {
  CMatrix z = CMatrix::Zero(2, 2);
  z(0, 0) = 4.0;
  z(1, 1) = 1.0;
  const CVector v = extract_phase_vector(HermMat(z));
  EXPECT_NEAR(std::abs(v(0) - 2.0), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(v(1)), 0.0, 1e-14);
}

TEST(PhaseVector, DegenerateSignalRejected) {
  EXPECT_THROW(extract_phase_vector(HermMat(-CMatrix::Identity(3, 3))), std::domain_error);
  EXPECT_THROW(extract_phase_vector(HermMat(CMatrix::Zero(3, 3))), std::domain_error);
}

TEST(PhaseVector, AlignedDistanceMatchesGridSearch) {
  Rng rng(34);
  for (int trial = 0; trial < 20; ++trial) {
    const CVector a = gaussian_complex(5, 1, rng).col(0), b = gaussian_complex(5, 1, rng).col(0);
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 20000; ++k)
      best = std::min(best, (std::polar(1.0, 2 * M_PI * k / 20000.0) * a - b).norm());
    const double closed = phase_aligned_distance(a, b);
    EXPECT_LE(closed, best + 1e-12);
    EXPECT_GE(closed, best - 1e-3);
  }
}

TEST(OperatorNorm, PowerMethodMatchesDenseSvd) {
  const auto e = gen_indep_entry(EntryDistribution::Gaussian, 4, 5, 12, 35, Field::Complex);
  const double expect = std::pow(singular_values(sensing_matrix(e)).maxCoeff(), 2);
  EXPECT_NEAR(operator_norm_squared(e, false, 500) / 1.02, expect, 1e-6 * expect);
}
