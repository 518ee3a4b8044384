#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "lowrank/designs.hpp"
#include "lowrank/measurements.hpp"
#include "lowrank/random.hpp"

using namespace lrlab;

namespace {

// Real inner product <u, v> = Re sum conj(u_i) v_i on vectors and matrices.
template <class A, class B>
double real_inner(const A& u, const B& v) {
  return (u.conjugate().cwiseProduct(v)).sum().real();
}

double sample_moment(EntryDistribution dist, int power, long draws, std::uint64_t seed) {
  Rng rng(seed);
  double sum = 0.0;
  for (long k = 0; k < draws; ++k) sum += std::pow(draw_entry(dist, rng), power);
  return sum / static_cast<double>(draws);
}

}  // namespace

TEST(IndepEntry, RademacherEntriesAreSigns) {
  const auto e = gen_indep_entry(EntryDistribution::Rademacher, 3, 4, 20, 1);
  for (Eigen::Index j = 0; j < e.m(); ++j) {
    const CMatrix a = e.matrix(j);
    for (Eigen::Index k = 0; k < a.size(); ++k) EXPECT_EQ(std::abs(a.data()[k]), 1.0);
  }
}

TEST(IndepEntry, GaussianFourthMoment) {
  // One entry across 10^4 independent ensembles.
  double sum4 = 0.0;
  for (std::uint64_t s = 0; s < 10000; ++s) {
    const auto e = gen_indep_entry(EntryDistribution::Gaussian, 1, 1, 1, s);
    sum4 += std::pow(e.matrix(0)(0, 0).real(), 4);
  }
  EXPECT_NEAR(sum4 / 10000.0, 3.0, 0.2);
}

TEST(IndepEntry, UniformSecondMoment) {
  EXPECT_NEAR(sample_moment(EntryDistribution::Uniform, 2, 100000, 5), 1.0, 0.05);
}

TEST(IndepEntry, DocumentedFourthMoments) {
  for (auto dist : {EntryDistribution::Gaussian, EntryDistribution::Rademacher,
                    EntryDistribution::Uniform, EntryDistribution::TwoPointHeavy}) {
    const long draws = 2000000;
    const double m2 = sample_moment(dist, 2, draws, 7);
    const double m4 = sample_moment(dist, 4, draws, 8);
    EXPECT_NEAR(m2, 1.0, 0.01) << to_string(dist);
    EXPECT_NEAR(m4, fourth_moment(dist), 0.03 * fourth_moment(dist)) << to_string(dist);
  }
}

TEST(IndepEntry, PooledMomentsWithinThreeSigma) {
  for (auto dist : {EntryDistribution::Gaussian, EntryDistribution::Rademacher,
                    EntryDistribution::Uniform, EntryDistribution::TwoPointHeavy}) {
    const auto e = gen_indep_entry(dist, 10, 10, 500, 9);
    const RVector x = e.stacked().real().reshaped();
    const double n = static_cast<double>(x.size());
    const double mean = x.mean();
    const double m2 = x.squaredNorm() / n;
    const double sd1 = std::sqrt(m2 / n);
    const double sd2 = std::sqrt((x.array().pow(4).mean() - m2 * m2) / n);
    EXPECT_LE(std::abs(mean), 3 * sd1) << to_string(dist);
    EXPECT_LE(std::abs(m2 - 1.0), 3 * sd2) << to_string(dist);
  }
}

TEST(IndepEntry, UnknownDistributionRejected) {
  EXPECT_THROW(entry_distribution_from_string("cauchy"), std::invalid_argument);
}

TEST(IndepEntry, DeterministicUnderSeed) {
  const auto a = gen_indep_entry(EntryDistribution::Uniform, 4, 5, 7, 42);
  const auto b = gen_indep_entry(EntryDistribution::Uniform, 4, 5, 7, 42);
  EXPECT_EQ((a.stacked() - b.stacked()).norm(), 0.0);
  const auto c = gen_indep_entry(EntryDistribution::Uniform, 4, 5, 7, 43);
  EXPECT_GT((a.stacked() - c.stacked()).norm(), 0.0);
}

TEST(RankOneGaussian, MeanSquaredNorm) {
  const auto e = gen_rank_one_gaussian(6, 10000, 3);
  const double mean = e.vectors().rowwise().squaredNorm().mean();
  EXPECT_NEAR(mean, 6.0, 0.02 * 6.0);
}

TEST(RankOneGaussian, SecondMomentIsIdentity) {
  const auto e = gen_rank_one_gaussian(8, 100000, 4);
  // rows hold a_j^T, so sum_j a_j a_j^* = V^T conj(V).
  const CMatrix moment = e.vectors().transpose() * e.vectors().conjugate() / 100000.0;
  EXPECT_LE(operator_norm(moment - CMatrix::Identity(8, 8)), 0.05);
}

TEST(RankOneGaussian, MatricesAreRankOnePsd) {
  const auto e = gen_rank_one_gaussian(5, 6, 5);
  for (Eigen::Index j = 0; j < e.m(); ++j) {
    const CMatrix a = e.matrix(j);
    EXPECT_LE((a - a.adjoint()).norm(), 1e-12);
    const RVector s = singular_values(a);
    EXPECT_LE(s(1), 1e-10 * s(0));
    EXPECT_GE(herm_eig(a).values(0), -1e-10 * s(0));
  }
  EXPECT_TRUE(e.hermitian_compatible());
}

TEST(RankOneDesign, SingleElementDesignRepeats) {
  CMatrix v = CMatrix::Zero(1, 3);
  v(0, 1) = 1.0;
  const WeightedVectorSet single(v, RVector::Ones(1), "single");
  const auto e = gen_rank_one_design(single, 5, 1);
  for (Eigen::Index j = 1; j < e.m(); ++j) EXPECT_EQ((e.matrix(j) - e.matrix(0)).norm(), 0.0);
}

TEST(RankOneDesign, BasisHistogramIsUniform) {
  const int n = 4;
  const long m = 40000;
  const auto e = gen_rank_one_design(orthonormal_basis_set(n), m, 6);
  std::vector<long> counts(n, 0);
  for (Eigen::Index j = 0; j < m; ++j) {
    Eigen::Index idx;
    e.vectors().row(j).cwiseAbs().maxCoeff(&idx);
    ++counts[idx];
  }
  const double expect = static_cast<double>(m) / n;
  const double sd = std::sqrt(m * (1.0 / n) * (1.0 - 1.0 / n));
  for (long c : counts) EXPECT_LE(std::abs(c - expect), 3 * sd);
}

TEST(RankOneDesign, TraceEqualsScaledNorm) {
  const auto e = gen_rank_one_design(sample_haar_set(3, 10, 1), 12, 2, 0.25);
  for (Eigen::Index j = 0; j < e.m(); ++j) {
    const double norm2 = e.vectors().row(j).squaredNorm();
    EXPECT_NEAR(norm2, std::sqrt(3.0 * 4.0), 1e-12);
    EXPECT_NEAR(std::real(e.matrix(j).trace()), 0.25 * norm2, 1e-12);
  }
}

TEST(RankOneDesign, EmptyDesignRejected) {
  EXPECT_THROW(WeightedVectorSet(CMatrix(0, 2), RVector(0), "empty"), std::invalid_argument);
}

TEST(Apply, SingleUnitMatrix) {
  CMatrix a = CMatrix::Zero(2, 3);
  a(0, 0) = 1.0;
  const auto e = MeasurementEnsemble::dense({a}, Field::Real, {});
  CMatrix x = CMatrix::Zero(2, 3);
  x(0, 0) = 5.0;
  x(1, 2) = 9.0;
  EXPECT_EQ(lrlab::apply(e, x)(0), Complex(5.0, 0.0));
}

TEST(Apply, RankOneUnitVector) {
  CMatrix v = CMatrix::Zero(1, 3);
  v(0, 0) = 1.0;
  const auto e = MeasurementEnsemble::rank_one(v, 1.0, {});
  CMatrix x = CMatrix::Zero(3, 3);
  x(0, 0) = 2.0;
  EXPECT_NEAR(std::abs(lrlab::apply(e, x)(0) - 2.0), 0.0, 1e-15);
}

TEST(Apply, TraceDefinitionOnDenseComplex) {
  const auto e = gen_indep_entry(EntryDistribution::Gaussian, 3, 4, 6, 11, Field::Complex);
  Rng rng(12);
  const CMatrix x = gaussian_complex(3, 4, rng);
  const CVector b = lrlab::apply(e, x);
  for (Eigen::Index j = 0; j < e.m(); ++j) {
    const Complex expect = (x * e.matrix(j).adjoint()).trace();
    EXPECT_NEAR(std::abs(b(j) - expect), 0.0, 1e-12 * (1 + std::abs(expect)));
  }
}

TEST(Apply, RankOneFastPathMatchesDense) {
  const auto e = gen_rank_one_gaussian(5, 9, 13);
  const auto d = to_dense(e);
  EXPECT_EQ(d.kind(), EnsembleKind::Dense);
  Rng rng(14);
  const CMatrix x = gaussian_complex(5, 5, rng);
  EXPECT_LE((lrlab::apply(e, x) - lrlab::apply(d, x)).norm(), 1e-12 * lrlab::apply(d, x).norm());
}

TEST(Apply, ShapeMismatchRejected) {
  const auto e = gen_indep_entry(EntryDistribution::Gaussian, 3, 3, 4, 1);
  EXPECT_THROW(lrlab::apply(e, CMatrix::Zero(3, 4)), std::invalid_argument);
  EXPECT_THROW(adjoint(e, CVector::Zero(5)), std::invalid_argument);
}

TEST(Apply, Linearity) {
  const auto e = gen_indep_entry(EntryDistribution::Rademacher, 4, 3, 8, 15, Field::Complex);
  Rng rng(16);
  for (int trial = 0; trial < 20; ++trial) {
    const CMatrix x = gaussian_complex(4, 3, rng), y = gaussian_complex(4, 3, rng);
    const Complex a = complex_normal(rng), b = complex_normal(rng);
    const CVector lhs = lrlab::apply(e, a * x + b * y);
    const CVector rhs = a * lrlab::apply(e, x) + b * lrlab::apply(e, y);
    EXPECT_LE((lhs - rhs).norm(), 1e-10 * rhs.norm());
  }
}

TEST(Adjoint, UnitVectorGivesMeasurementMatrix) {
  const auto e = gen_indep_entry(EntryDistribution::Gaussian, 3, 2, 5, 17, Field::Complex);
  for (Eigen::Index j = 0; j < e.m(); ++j) {
    CVector y = CVector::Zero(e.m());
    y(j) = 1.0;
    EXPECT_LE((adjoint(e, y) - e.matrix(j)).norm(), 1e-14);
  }
}

TEST(Adjoint, HermitianForRankOne) {
  const auto e = gen_rank_one_gaussian(4, 7, 18);
  Rng rng(19);
  const CMatrix x = random_hermitian(4, rng);
  const CMatrix h = adjoint(e, lrlab::apply(e, x));
  EXPECT_LE((h - h.adjoint()).norm(), 1e-12 * h.norm());
}

TEST(Adjoint, InnerProductIdentity) {
  std::vector<MeasurementEnsemble> ensembles = {
      gen_indep_entry(EntryDistribution::Gaussian, 3, 5, 7, 20, Field::Real),
      gen_indep_entry(EntryDistribution::Uniform, 4, 4, 9, 21, Field::Complex),
      gen_rank_one_gaussian(4, 6, 22),
      gen_rank_one_design(sample_haar_set(3, 5, 1), 8, 23, 0.5),
  };
  Rng rng(24);
  for (const auto& e : ensembles) {
    for (int trial = 0; trial < 100; ++trial) {
      const CMatrix x = gaussian_complex(e.n1(), e.n2(), rng);
      const CVector y = gaussian_complex(e.m(), 1, rng).col(0);
      const double lhs = real_inner(lrlab::apply(e, x), y);
      const double rhs = real_inner(x, adjoint(e, y));
      EXPECT_NEAR(lhs, rhs, 1e-10 * (std::abs(lhs) + 1.0));
    }
  }
}

TEST(Adjoint, SensingMatrixRowsAreConjugatedVectorizations) {
  const auto e = gen_rank_one_gaussian(3, 4, 25);
  const CMatrix s = sensing_matrix(e);
  for (Eigen::Index j = 0; j < e.m(); ++j)
    EXPECT_LE((s.row(j).transpose() - e.matrix(j).conjugate().reshaped()).norm(), 1e-12);
}

TEST(Lift, UnitVectorMeasurement) {
  CMatrix a = CMatrix::Zero(1, 3);
  a(0, 0) = 1.0;
  CVector x = CVector::Zero(3);
  x(0) = 1.0;
  const PhaselessData d = lift_phaseless(a, x, NoiseSpec::none());
  EXPECT_NEAR(std::abs(d.b(0) - 1.0), 0.0, 1e-15);
}

TEST(Lift, MatchesLiftedApplyAndIgnoresGlobalPhase) {
  Rng rng(26);
  const CMatrix a = gaussian_complex(12, 4, rng);
  const CVector x = haar_vector(4, rng);
  const PhaselessData d = lift_phaseless(a, x, NoiseSpec::gaussian(0.01, 3));
  const CVector lifted = lrlab::apply(d.ensemble, x * x.adjoint());
  EXPECT_LE((d.b - lifted - d.w.cast<Complex>()).cwiseAbs().maxCoeff(), 1e-12);
  for (Eigen::Index j = 0; j < a.rows(); ++j) {
    const double direct = std::norm((a.row(j).conjugate() * x)(0));
    EXPECT_NEAR((d.b(j) - d.w(j)).real(), direct, 1e-12 * (1 + direct));
  }
  const CVector rotated = std::polar(1.0, 0.7) * x;
  const PhaselessData d2 = lift_phaseless(a, rotated, NoiseSpec::none());
  EXPECT_LE((d2.b - lifted).norm(), 1e-12 * lifted.norm());
}

TEST(Noise, NoneGivesZero) {
  const CVector b = CVector::Ones(5);
  const NoisyMeasurements n = add_noise(b, NoiseSpec::none());
  EXPECT_EQ(n.w.norm(), 0.0);
  EXPECT_EQ((n.b - b).norm(), 0.0);
}

TEST(Noise, BoundedBallHasExactNorm) {
  const NoisyMeasurements n = add_noise(CVector::Zero(30), NoiseSpec::bounded_ball(0.5, 7));
  EXPECT_NEAR(n.w.norm(), 0.5, 1e-12);
  EXPECT_NEAR(n.w_norm, 0.5, 1e-12);
}

TEST(Noise, GaussianNormConcentrates) {
  const NoisyMeasurements n = add_noise(CVector::Zero(10000), NoiseSpec::gaussian(0.3, 8));
  EXPECT_NEAR(n.w_norm, 0.3 * 100.0, 0.05 * 30.0);
  EXPECT_NEAR(n.w.norm(), n.w_norm, 1e-12);
}

TEST(Noise, BernoulliIsPlusMinusMagnitude) {
  const NoisyMeasurements n = add_noise(CVector::Zero(50), NoiseSpec::bernoulli(0.2, 9));
  for (Eigen::Index j = 0; j < 50; ++j) EXPECT_NEAR(std::abs(n.w(j)), 0.2, 1e-15);
}

TEST(Noise, NegativeLevelRejected) {
  EXPECT_THROW(NoiseSpec::gaussian(-1.0, 1), std::invalid_argument);
  EXPECT_THROW(NoiseSpec::bounded_ball(-0.1, 1), std::invalid_argument);
}

TEST(EnsembleFiles, SaveLoadRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "lowrank_ens_test";
  std::filesystem::create_directories(dir);
  for (const auto& e : {gen_rank_one_gaussian(3, 5, 30),
                        gen_indep_entry(EntryDistribution::TwoPointHeavy, 2, 3, 4, 31)}) {
    const std::string path = (dir / "e.json").string();
    save_ensemble(path, e);
    const auto back = load_ensemble(path);
    EXPECT_EQ(back.kind(), e.kind());
    EXPECT_EQ(back.m(), e.m());
    EXPECT_EQ(back.provenance().seed, e.provenance().seed);
    Rng rng(32);
    const CMatrix x = gaussian_complex(e.n1(), e.n2(), rng);
    EXPECT_EQ((lrlab::apply(back, x) - lrlab::apply(e, x)).norm(), 0.0);
  }
  std::filesystem::remove_all(dir);
}
