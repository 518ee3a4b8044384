#include "lowrank/measurements.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "lowrank/serialize.hpp"

namespace lrlab {

namespace {

constexpr double kHermitianCheck = 1e-12;

bool all_hermitian(const CMatrix& stacked, Eigen::Index n1, Eigen::Index n2) {
  if (n1 != n2) return false;
  for (Eigen::Index j = 0; j < stacked.rows(); ++j) {
    const CMatrix a = stacked.row(j).reshaped(n1, n2);
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if ((a - a.adjoint()).cwiseAbs().maxCoeff() > kHermitianCheck * scale) return false;
  }
  return true;
}

void require_shape(const MeasurementEnsemble& e, const CMatrix& x) {
  if (x.rows() != e.n1() || x.cols() != e.n2())
    throw std::invalid_argument("matrix shape " + std::to_string(x.rows()) + "x" +
                                std::to_string(x.cols()) + " does not match ensemble shape " +
                                std::to_string(e.n1()) + "x" + std::to_string(e.n2()));
}

}  // namespace

std::string to_string(EntryDistribution dist) {
  switch (dist) {
    case EntryDistribution::Gaussian: return "gaussian";
    case EntryDistribution::Rademacher: return "rademacher";
    case EntryDistribution::Uniform: return "uniform";
    case EntryDistribution::TwoPointHeavy: return "two-point-heavy";
  }
  return "unknown";
}

EntryDistribution entry_distribution_from_string(const std::string& name) {
  if (name == "gaussian") return EntryDistribution::Gaussian;
  if (name == "rademacher") return EntryDistribution::Rademacher;
  if (name == "uniform") return EntryDistribution::Uniform;
  if (name == "two-point-heavy") return EntryDistribution::TwoPointHeavy;
  throw std::invalid_argument("unknown entry distribution '" + name + "'");
}

double fourth_moment(EntryDistribution dist) {
  switch (dist) {
    case EntryDistribution::Gaussian: return 3.0;
    case EntryDistribution::Rademacher: return 1.0;
    case EntryDistribution::Uniform: return 9.0 / 5.0;
    case EntryDistribution::TwoPointHeavy: return 10.0;
  }
  return 0.0;
}

double draw_entry(EntryDistribution dist, Rng& rng) {
  switch (dist) {
    case EntryDistribution::Gaussian: return std_normal(rng);
    case EntryDistribution::Rademacher:
      return std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
    case EntryDistribution::Uniform: {
      const double half_width = std::sqrt(3.0);
      return std::uniform_real_distribution<double>(-half_width, half_width)(rng);
    }
    case EntryDistribution::TwoPointHeavy: {
      // +-sqrt(c) with probability p each: 2pc = 1 and 2pc^2 = 10.
      constexpr double c = 10.0;
      constexpr double p = 1.0 / (2.0 * c);
      const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      if (u < p) return std::sqrt(c);
      if (u < 2.0 * p) return -std::sqrt(c);
      return 0.0;
    }
  }
  throw std::invalid_argument("unknown entry distribution");
}

MeasurementEnsemble MeasurementEnsemble::dense(Eigen::Index n1, Eigen::Index n2, CMatrix stacked,
                                               Field field, Provenance provenance) {
  if (n1 < 1 || n2 < 1) throw std::invalid_argument("ensemble dimensions must be positive");
  if (stacked.rows() < 1) throw std::invalid_argument("ensemble needs at least one measurement");
  if (stacked.cols() != n1 * n2)
    throw std::invalid_argument("stacked measurement rows must have n1*n2 entries");
  if (!stacked.allFinite()) throw std::invalid_argument("measurement matrices must be finite");
  if (field == Field::Real && stacked.imag().cwiseAbs().maxCoeff() != 0.0)
    throw std::invalid_argument("real ensemble has complex entries");
  MeasurementEnsemble e;
  e.kind_ = EnsembleKind::Dense;
  e.n1_ = n1;
  e.n2_ = n2;
  e.m_ = stacked.rows();
  e.field_ = field;
  e.hermitian_ = all_hermitian(stacked, n1, n2);
  e.data_ = std::move(stacked);
  e.provenance_ = std::move(provenance);
  return e;
}

MeasurementEnsemble MeasurementEnsemble::dense(const std::vector<CMatrix>& matrices, Field field,
                                               Provenance provenance) {
  if (matrices.empty()) throw std::invalid_argument("ensemble needs at least one measurement");
  const auto n1 = matrices.front().rows();
  const auto n2 = matrices.front().cols();
  CMatrix stacked(static_cast<Eigen::Index>(matrices.size()), n1 * n2);
  for (std::size_t j = 0; j < matrices.size(); ++j) {
    if (matrices[j].rows() != n1 || matrices[j].cols() != n2)
      throw std::invalid_argument("measurement matrices must share one shape");
    stacked.row(static_cast<Eigen::Index>(j)) = matrices[j].reshaped().transpose();
  }
  return dense(n1, n2, std::move(stacked), field, std::move(provenance));
}

MeasurementEnsemble MeasurementEnsemble::rank_one(CMatrix vectors, double scale,
                                                  Provenance provenance) {
  if (vectors.rows() < 1 || vectors.cols() < 1)
    throw std::invalid_argument("rank-one ensemble needs m >= 1 vectors of dimension n >= 1");
  if (!(scale >= 0.0) || !std::isfinite(scale))
    throw std::invalid_argument("rank-one scale must be finite and non-negative");
  if (!vectors.allFinite()) throw std::invalid_argument("measurement vectors must be finite");
  MeasurementEnsemble e;
  e.kind_ = EnsembleKind::RankOne;
  e.n1_ = e.n2_ = vectors.cols();
  e.m_ = vectors.rows();
  e.field_ = Field::Complex;
  e.scale_ = scale;
  e.hermitian_ = true;
  e.data_ = std::move(vectors);
  e.provenance_ = std::move(provenance);
  return e;
}

const CMatrix& MeasurementEnsemble::stacked() const {
  if (kind_ != EnsembleKind::Dense) throw std::logic_error("ensemble is not dense");
  return data_;
}

const CMatrix& MeasurementEnsemble::vectors() const {
  if (kind_ != EnsembleKind::RankOne) throw std::logic_error("ensemble is not rank-one");
  return data_;
}

CMatrix MeasurementEnsemble::matrix(Eigen::Index j) const {
  if (j < 0 || j >= m_) throw std::out_of_range("measurement index out of range");
  if (kind_ == EnsembleKind::Dense) return data_.row(j).reshaped(n1_, n2_);
  const CVector a = data_.row(j).transpose();
  return scale_ * a * a.adjoint();
}

CVector apply(const MeasurementEnsemble& e, const CMatrix& x) {
  require_shape(e, x);
  if (e.kind() == EnsembleKind::Dense) return e.stacked().conjugate() * x.reshaped();
  // Row j of V X^T is (X a_j)^T, so b_j = s * sum_i conj(a_ji) (X a_j)_i.
  const CMatrix& v = e.vectors();
  const CMatrix xa = v * x.transpose();
  return e.scale() * v.conjugate().cwiseProduct(xa).rowwise().sum();
}

CMatrix adjoint(const MeasurementEnsemble& e, const CVector& y) {
  if (y.size() != e.m())
    throw std::invalid_argument("adjoint input has length " + std::to_string(y.size()) +
                                ", expected " + std::to_string(e.m()));
  if (e.kind() == EnsembleKind::Dense)
    return (e.stacked().transpose() * y).reshaped(e.n1(), e.n2());
  const CMatrix& v = e.vectors();
  return e.scale() * (v.transpose() * y.asDiagonal() * v.conjugate());
}

CMatrix sensing_matrix(const MeasurementEnsemble& e) {
  if (e.kind() == EnsembleKind::Dense) return e.stacked().conjugate();
  const CMatrix& v = e.vectors();
  const Eigen::Index n = e.n1();
  CMatrix s(e.m(), n * n);
  // conj(A_j(i,k)) = s * conj(a_ji) a_jk at column-major index i + n k.
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index i = 0; i < n; ++i)
      s.col(i + n * k) = e.scale() * v.col(i).conjugate().cwiseProduct(v.col(k));
  return s;
}

MeasurementEnsemble to_dense(const MeasurementEnsemble& e) {
  if (e.kind() == EnsembleKind::Dense) return e;
  return MeasurementEnsemble::dense(e.n1(), e.n2(), sensing_matrix(e).conjugate(), Field::Complex,
                                    e.provenance());
}

MeasurementEnsemble append_dense(const MeasurementEnsemble& e, const CMatrix& extra_matrix) {
  if (extra_matrix.rows() != e.n1() || extra_matrix.cols() != e.n2())
    throw std::invalid_argument("appended measurement matrix has the wrong shape");
  const CMatrix base = sensing_matrix(e).conjugate();
  CMatrix stacked(base.rows() + 1, base.cols());
  stacked.topRows(base.rows()) = base;
  stacked.row(base.rows()) = extra_matrix.reshaped().transpose();
  const bool real = e.field() == Field::Real && extra_matrix.imag().cwiseAbs().maxCoeff() == 0.0;
  return MeasurementEnsemble::dense(e.n1(), e.n2(), std::move(stacked),
                                    real ? Field::Real : Field::Complex, e.provenance());
}

MeasurementEnsemble gen_indep_entry(EntryDistribution dist, Eigen::Index n1, Eigen::Index n2,
                                    Eigen::Index m, std::uint64_t seed, Field field) {
  if (n1 < 1 || n2 < 1 || m < 1) throw std::invalid_argument("n1, n2, m must be positive");
  Rng rng(seed);
  CMatrix stacked(m, n1 * n2);
  const double complex_scale = std::sqrt(0.5);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index k = 0; k < n1 * n2; ++k) {
      if (field == Field::Real) {
        stacked(j, k) = draw_entry(dist, rng);
      } else {
        const double re = draw_entry(dist, rng);
        const double im = draw_entry(dist, rng);
        stacked(j, k) = complex_scale * Complex(re, im);
      }
    }
  }
  Provenance p{to_string(dist), seed, "", field == Field::Real ? "real" : "complex E|X|^2=1"};
  return MeasurementEnsemble::dense(n1, n2, std::move(stacked), field, std::move(p));
}

MeasurementEnsemble gen_rank_one_gaussian(Eigen::Index n, Eigen::Index m, std::uint64_t seed) {
  if (n < 1 || m < 1) throw std::invalid_argument("n and m must be positive");
  Rng rng(seed);
  CMatrix vectors(m, n);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < n; ++i) vectors(j, i) = complex_normal(rng);
  Provenance p{"rank-one-gaussian", seed, "", "E[a a*] = Id (Re, Im ~ N(0,1/2))"};
  return MeasurementEnsemble::rank_one(std::move(vectors), 1.0, std::move(p));
}

MeasurementEnsemble gen_rank_one_design(const WeightedVectorSet& design, Eigen::Index m,
                                        std::uint64_t seed, double scale) {
  if (design.size() < 1) throw std::invalid_argument("design is empty");
  if (m < 1) throw std::invalid_argument("m must be positive");
  const auto n = static_cast<double>(design.dim());
  const double stretch = std::pow(n * (n + 1.0), 0.25);
  Rng rng(seed);
  std::discrete_distribution<Eigen::Index> pick(design.weights().data(),
                                                design.weights().data() + design.size());
  CMatrix vectors(m, design.dim());
  for (Eigen::Index j = 0; j < m; ++j) vectors.row(j) = stretch * design.vectors().row(pick(rng));
  Provenance p{"rank-one-design", seed, design.label(), "||a||^2 = sqrt(n(n+1))"};
  return MeasurementEnsemble::rank_one(std::move(vectors), scale, std::move(p));
}

MeasurementEnsemble matrix_unit_ensemble(Eigen::Index n1, Eigen::Index n2, Field field) {
  CMatrix stacked = CMatrix::Identity(n1 * n2, n1 * n2);
  return MeasurementEnsemble::dense(n1, n2, std::move(stacked), field,
                                    {"matrix-units", 0, "", ""});
}

MeasurementEnsemble hermitian_basis_ensemble(Eigen::Index n) {
  std::vector<CMatrix> basis;
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    CMatrix a = CMatrix::Zero(n, n);
    a(i, i) = 1.0;
    basis.push_back(a);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = i + 1; k < n; ++k) {
      CMatrix sym = CMatrix::Zero(n, n);
      sym(i, k) = sym(k, i) = inv_sqrt2;
      basis.push_back(sym);
      CMatrix anti = CMatrix::Zero(n, n);
      anti(i, k) = Complex(0.0, -inv_sqrt2);
      anti(k, i) = Complex(0.0, inv_sqrt2);
      basis.push_back(anti);
    }
  }
  return MeasurementEnsemble::dense(basis, Field::Complex, {"hermitian-basis", 0, "", ""});
}

NoiseSpec NoiseSpec::gaussian(double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("noise sigma must be non-negative");
  return {NoiseModel::Gaussian, sigma, seed};
}

NoiseSpec NoiseSpec::bounded_ball(double eta, std::uint64_t seed) {
  if (!(eta >= 0.0)) throw std::invalid_argument("noise radius eta must be non-negative");
  return {NoiseModel::BoundedBall, eta, seed};
}

NoiseSpec NoiseSpec::bernoulli(double magnitude, std::uint64_t seed) {
  if (!(magnitude >= 0.0)) throw std::invalid_argument("flip magnitude must be non-negative");
  return {NoiseModel::Bernoulli, magnitude, seed};
}

std::string to_string(NoiseModel model) {
  switch (model) {
    case NoiseModel::None: return "none";
    case NoiseModel::Gaussian: return "gaussian";
    case NoiseModel::BoundedBall: return "bounded-ball";
    case NoiseModel::Bernoulli: return "bernoulli";
  }
  return "unknown";
}

NoiseModel noise_model_from_string(const std::string& name) {
  if (name == "none") return NoiseModel::None;
  if (name == "gaussian") return NoiseModel::Gaussian;
  if (name == "bounded-ball") return NoiseModel::BoundedBall;
  if (name == "bernoulli") return NoiseModel::Bernoulli;
  throw std::invalid_argument("unknown noise model '" + name + "'");
}

NoisyMeasurements add_noise(const CVector& b, const NoiseSpec& spec) {
  if (!(spec.level >= 0.0)) throw std::invalid_argument("noise level must be non-negative");
  const Eigen::Index m = b.size();
  RVector w = RVector::Zero(m);
  Rng rng(spec.seed);
  switch (spec.model) {
    case NoiseModel::None: break;
    case NoiseModel::Gaussian:
      for (Eigen::Index j = 0; j < m; ++j) w(j) = spec.level * std_normal(rng);
      break;
    case NoiseModel::BoundedBall:
      if (spec.level > 0.0) w = spec.level * uniform_sphere(m, rng);
      break;
    case NoiseModel::Bernoulli:
      for (Eigen::Index j = 0; j < m; ++j)
        w(j) = std::bernoulli_distribution(0.5)(rng) ? spec.level : -spec.level;
      break;
  }
  return {b + w.cast<Complex>(), w, w.norm()};
}

PhaselessData lift_phaseless(const CMatrix& vectors, const CVector& x, const NoiseSpec& noise) {
  if (vectors.cols() != x.size())
    throw std::invalid_argument("signal dimension does not match measurement vectors");
  MeasurementEnsemble e =
      MeasurementEnsemble::rank_one(vectors, 1.0, {"phaseless", noise.seed, "", "lifted"});
  const CVector inner = vectors.conjugate() * x;  // <a_j, x>
  CVector clean = inner.cwiseAbs2().cast<Complex>();
  NoisyMeasurements noisy = add_noise(clean, noise);
  return {std::move(e), std::move(noisy.b), std::move(noisy.w)};
}

void save_ensemble(const std::string& manifest_path, const MeasurementEnsemble& e) {
  const std::string data_path = manifest_path + ".data";
  nlohmann::json j;
  j["kind"] = e.kind() == EnsembleKind::Dense ? "dense" : "rank-one";
  j["n1"] = e.n1();
  j["n2"] = e.n2();
  j["m"] = e.m();
  j["field"] = to_string(e.field());
  j["scale"] = e.scale();
  j["distribution"] = e.provenance().distribution;
  j["seed"] = e.provenance().seed;
  j["design"] = e.provenance().design_id;
  j["convention"] = e.provenance().convention;
  j["data"] = std::filesystem::path(data_path).filename().string();
  if (e.kind() == EnsembleKind::Dense) {
    // Stored row-major per measurement for readability.
    CMatrix rows(e.m(), e.n1() * e.n2());
    for (Eigen::Index k = 0; k < e.m(); ++k)
      rows.row(k) = e.matrix(k).transpose().reshaped().transpose();
    save_matrix(data_path, Mat(rows, e.field()));
  } else {
    save_matrix(data_path, Mat::complex(e.vectors()));
  }
  std::ofstream out(manifest_path);
  if (!out) throw std::runtime_error("cannot open '" + manifest_path + "' for writing");
  out << j.dump(2) << '\n';
}

MeasurementEnsemble load_ensemble(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open '" + manifest_path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw std::invalid_argument("malformed ensemble manifest: " + std::string(ex.what()));
  }
  const auto dir = std::filesystem::path(manifest_path).parent_path();
  const std::string data_path = (dir / j.at("data").get<std::string>()).string();
  Provenance p{j.value("distribution", ""), j.value("seed", std::uint64_t{0}),
               j.value("design", ""), j.value("convention", "")};
  const Mat data = load_matrix(data_path);
  const std::string kind = j.at("kind").get<std::string>();
  const Eigen::Index n1 = j.at("n1").get<Eigen::Index>();
  const Eigen::Index n2 = j.at("n2").get<Eigen::Index>();
  MeasurementEnsemble e = [&] {
    if (kind == "rank-one")
      return MeasurementEnsemble::rank_one(data.entries(), j.at("scale").get<double>(), p);
    if (kind != "dense") throw std::invalid_argument("unknown ensemble kind '" + kind + "'");
    if (data.cols() != n1 * n2) throw std::invalid_argument("ensemble data has wrong width");
    CMatrix stacked(data.rows(), n1 * n2);
    for (Eigen::Index k = 0; k < data.rows(); ++k) {
      const CMatrix a = data.entries().row(k).reshaped(n2, n1).transpose();
      stacked.row(k) = a.reshaped().transpose();
    }
    return MeasurementEnsemble::dense(n1, n2, std::move(stacked),
                                      field_from_string(j.at("field").get<std::string>()), p);
  }();
  if (e.m() != j.at("m").get<Eigen::Index>() || e.n1() != n1 || e.n2() != n2)
    throw std::invalid_argument("ensemble manifest dimensions do not match data");
  return e;
}

}  // namespace lrlab
