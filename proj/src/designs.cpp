#include "lowrank/designs.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "lowrank/random.hpp"
#include "lowrank/serialize.hpp"

namespace lrlab {

namespace {

constexpr double kUnitTolerance = 1e-12;
constexpr Eigen::Index kAccumulateBlock = 512;

long checked_power(int n, int t) {
  if (n < 1 || t < 1) throw std::invalid_argument("design dimension and t must be positive");
  long dim = 1;
  for (int k = 0; k < t; ++k) {
    dim *= n;
    if (dim > kMaxMomentDim)
      throw CapacityError("n^t = " + std::to_string(n) + "^" + std::to_string(t) +
                          " exceeds the moment-operator guard of " +
                          std::to_string(kMaxMomentDim));
  }
  return dim;
}

CVector kron_power(const CVector& w, int t) {
  CVector v = w;
  for (int k = 1; k < t; ++k) {
    CVector next(v.size() * w.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) next.segment(i * w.size(), w.size()) = v(i) * w;
    v = std::move(next);
  }
  return v;
}

RVector deviation_spectrum(const WeightedVectorSet& set, int t) {
  const CMatrix diff = moment_operator(set, t) - sym_moment_integral(static_cast<int>(set.dim()), t).cast<Complex>();
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(hermitian_part(diff), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericError("moment eigensolver did not converge");
  return solver.eigenvalues().cwiseAbs();
}

}  // namespace

WeightedVectorSet::WeightedVectorSet(CMatrix vectors, RVector weights, std::string label)
    : vectors_(std::move(vectors)), weights_(std::move(weights)), label_(std::move(label)) {
  if (vectors_.rows() < 1 || vectors_.cols() < 1)
    throw std::invalid_argument("design is empty");
  if (weights_.size() != vectors_.rows())
    throw std::invalid_argument("design needs one weight per vector");
  if (!vectors_.allFinite() || !weights_.allFinite())
    throw std::invalid_argument("design entries must be finite");
  if ((weights_.array() < 0.0).any()) throw std::invalid_argument("design weights must be >= 0");
  // Round-off allowance grows with the number of summed weights.
  const double sum_tolerance =
      kUnitTolerance + static_cast<double>(weights_.size()) * std::numeric_limits<double>::epsilon();
  if (std::abs(weights_.sum() - 1.0) > sum_tolerance)
    throw std::invalid_argument("design weights must sum to 1");
  for (Eigen::Index i = 0; i < vectors_.rows(); ++i) {
    if (std::abs(vectors_.row(i).norm() - 1.0) > kUnitTolerance)
      throw std::invalid_argument("design vector " + std::to_string(i) + " is not unit norm");
  }
}

DesignMode design_mode_from_string(const std::string& name) {
  if (name == "strict-inf") return DesignMode::StrictInf;
  if (name == "relaxed-1") return DesignMode::Relaxed1;
  throw std::invalid_argument("unknown design mode '" + name + "'");
}

std::string to_string(DesignMode mode) {
  return mode == DesignMode::StrictInf ? "strict-inf" : "relaxed-1";
}

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double out = 1.0;
  for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
  return std::round(out);
}

RMatrix permutation_operator(int n, const std::vector<int>& perm) {
  const int t = static_cast<int>(perm.size());
  const long dim = checked_power(n, t);
  std::vector<int> check(perm);
  std::sort(check.begin(), check.end());
  for (int k = 0; k < t; ++k)
    if (check[k] != k) throw std::invalid_argument("not a permutation");
  RMatrix p = RMatrix::Zero(dim, dim);
  std::vector<int> digits(t), moved(t);
  for (long idx = 0; idx < dim; ++idx) {
    long rest = idx;
    for (int k = t - 1; k >= 0; --k) {
      digits[k] = static_cast<int>(rest % n);
      rest /= n;
    }
    for (int k = 0; k < t; ++k) moved[perm[k]] = digits[k];
    long target = 0;
    for (int k = 0; k < t; ++k) target = target * n + moved[k];
    p(target, idx) = 1.0;
  }
  return p;
}

RMatrix sym_moment_integral(int n, int t) {
  const long dim = checked_power(n, t);
  std::vector<int> perm(t);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::vector<int>> perms;
  do {
    perms.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));

  const double weight = 1.0 / (static_cast<double>(perms.size()) * binomial(n + t - 1, t));
  RMatrix out = RMatrix::Zero(dim, dim);
  std::vector<int> digits(t), moved(t);
  for (long idx = 0; idx < dim; ++idx) {
    long rest = idx;
    for (int k = t - 1; k >= 0; --k) {
      digits[k] = static_cast<int>(rest % n);
      rest /= n;
    }
    for (const auto& p : perms) {
      for (int k = 0; k < t; ++k) moved[p[k]] = digits[k];
      long target = 0;
      for (int k = 0; k < t; ++k) target = target * n + moved[k];
      out(target, idx) += weight;
    }
  }
  return out;
}

CMatrix moment_operator(const WeightedVectorSet& set, int t) {
  const long dim = checked_power(static_cast<int>(set.dim()), t);
  CMatrix out = CMatrix::Zero(dim, dim);
  for (Eigen::Index start = 0; start < set.size(); start += kAccumulateBlock) {
    const Eigen::Index len = std::min(kAccumulateBlock, set.size() - start);
    CMatrix block(dim, len);
    for (Eigen::Index i = 0; i < len; ++i)
      block.col(i) = std::sqrt(set.weights()(start + i)) * kron_power(set.vector(start + i), t);
    out.selfadjointView<Eigen::Lower>().rankUpdate(block);
  }
  return out.selfadjointView<Eigen::Lower>();
}

double moment_deviation(const WeightedVectorSet& set, int t, double p) {
  if (!(p == 1.0 || p == 2.0 || std::isinf(p)))
    throw std::invalid_argument("moment deviation supports p in {1, 2, inf}");
  const RVector spectrum = deviation_spectrum(set, t);
  return binomial(static_cast<int>(set.dim()) + t - 1, t) * schatten_norm_of(spectrum, p);
}

double frame_deviation(const WeightedVectorSet& set) {
  const Eigen::Index n = set.dim();
  const CMatrix& w = set.vectors();
  // sum_i p_i w_i w_i^* with w_i^T the rows of w.
  CMatrix frame = w.transpose() * set.weights().cast<Complex>().asDiagonal() * w.conjugate();
  frame -= CMatrix::Identity(n, n) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(hermitian_part(frame), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericError("frame eigensolver did not converge");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

MomentReport moment_report(const WeightedVectorSet& set, int t) {
  const int n = static_cast<int>(set.dim());
  const RVector spectrum = deviation_spectrum(set, t);
  MomentReport r;
  r.t = t;
  r.binomial = binomial(n + t - 1, t);
  r.theta_1 = r.binomial * schatten_norm_of(spectrum, 1.0);
  r.theta_2 = r.binomial * schatten_norm_of(spectrum, 2.0);
  r.theta_inf = r.binomial * schatten_norm_of(spectrum, std::numeric_limits<double>::infinity());
  r.frame_deviation = frame_deviation(set);
  r.frame_deviation_rescaled = std::sqrt(static_cast<double>(n) * (n + 1)) * r.frame_deviation;
  return r;
}

DesignValidation validate_design(const WeightedVectorSet& set, int r, DesignMode mode, int t) {
  if (r < 1) throw std::invalid_argument("rank r must be positive");
  DesignValidation v;
  v.report = moment_report(set, t);
  const double n = static_cast<double>(set.dim());
  v.moment_ok = mode == DesignMode::StrictInf ? v.report.theta_inf <= 1.0 / (16.0 * r * r)
                                              : v.report.theta_1 <= 0.25;
  v.frame_ok = v.report.frame_deviation <= 1.0 / n;
  v.pass = v.moment_ok && v.frame_ok;
  return v;
}

WeightedVectorSet sample_haar_set(int n, int count, std::uint64_t seed) {
  if (n < 1 || count < 1) throw std::invalid_argument("Haar set needs n >= 1 and N >= 1");
  Rng rng(seed);
  CMatrix vectors(count, n);
  for (int i = 0; i < count; ++i) vectors.row(i) = haar_vector(n, rng).transpose();
  return {std::move(vectors), RVector::Constant(count, 1.0 / count),
          "haar-n" + std::to_string(n) + "-N" + std::to_string(count) + "-seed" +
              std::to_string(seed)};
}

WeightedVectorSet orthonormal_basis_set(int n) {
  if (n < 1) throw std::invalid_argument("basis dimension must be positive");
  return {CMatrix::Identity(n, n), RVector::Constant(n, 1.0 / n),
          "basis-n" + std::to_string(n)};
}

WeightedVectorSet tetrahedral_sic_set() {
  const double pi = std::acos(-1.0);
  CMatrix vectors(4, 2);
  vectors.row(0) << 1.0, 0.0;
  for (int k = 0; k < 3; ++k) {
    const Complex omega = std::polar(1.0, 2.0 * pi * k / 3.0);
    vectors.row(k + 1) << 1.0 / std::sqrt(3.0), std::sqrt(2.0 / 3.0) * omega;
  }
  return {std::move(vectors), RVector::Constant(4, 0.25), "sic-tetrahedral-n2"};
}

WeightedVectorSet rotate(const WeightedVectorSet& set, const CMatrix& unitary) {
  if (unitary.rows() != set.dim() || unitary.cols() != set.dim())
    throw std::invalid_argument("rotation has the wrong dimension");
  CMatrix rotated = set.vectors() * unitary.transpose();
  for (Eigen::Index i = 0; i < rotated.rows(); ++i) rotated.row(i).normalize();
  RVector weights = set.weights() / set.weights().sum();
  return {std::move(rotated), std::move(weights), set.label() + "-rotated"};
}

void save_design(const std::string& manifest_path, const WeightedVectorSet& set) {
  const std::string data_path = manifest_path + ".data";
  nlohmann::json j;
  j["label"] = set.label();
  j["n"] = set.dim();
  j["N"] = set.size();
  j["weights"] = std::vector<double>(set.weights().data(), set.weights().data() + set.size());
  j["vectors"] = std::filesystem::path(data_path).filename().string();
  save_matrix(data_path, Mat::complex(set.vectors()));
  std::ofstream out(manifest_path);
  if (!out) throw std::runtime_error("cannot open '" + manifest_path + "' for writing");
  out << j.dump(2) << '\n';
}

WeightedVectorSet load_design(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open design manifest '" + manifest_path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw std::invalid_argument("malformed design manifest: " + std::string(ex.what()));
  }
  const auto dir = std::filesystem::path(manifest_path).parent_path();
  const Mat vectors = load_matrix((dir / j.at("vectors").get<std::string>()).string());
  const auto weights = j.at("weights").get<std::vector<double>>();
  RVector w = Eigen::Map<const RVector>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  if (vectors.cols() != j.at("n").get<Eigen::Index>() || vectors.rows() != j.at("N").get<Eigen::Index>())
    throw std::invalid_argument("design manifest dimensions do not match vector file");
  return {vectors.entries(), std::move(w), j.value("label", std::string("design"))};
}

}  // namespace lrlab
