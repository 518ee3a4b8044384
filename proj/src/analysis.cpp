#include "lowrank/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "lowrank/parallel.hpp"
#include "lowrank/random.hpp"

namespace lrlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kKernelRank = 1e-10;
constexpr int kBoundaryBisections = 14;

// The map A restricted to a real-linear domain with an orthonormal real
// basis: M = matrix(c) and ||A(M)||_2 = ||op * c||_2.
//   Real: c = vec(M). Complex: c = [Re vec(M); Im vec(M)]. Hermitian: the
//   diagonal, then (E_ik + E_ki)/sqrt2 and i(E_ik - E_ki)/sqrt2 for i < k.
struct RealModel {
  Domain domain = Domain::Real;
  RMatrix op;
  Eigen::Index n1 = 0, n2 = 0;

  CMatrix matrix(const RVector& c) const {
    const Eigen::Index d = n1 * n2;
    switch (domain) {
      case Domain::Real: return c.cast<Complex>().reshaped(n1, n2);
      case Domain::Complex: {
        CMatrix out(n1, n2);
        for (Eigen::Index k = 0; k < d; ++k) out.data()[k] = Complex(c(k), c(d + k));
        return out;
      }
      case Domain::Hermitian: break;
    }
    const double h = 1.0 / std::sqrt(2.0);
    CMatrix out(n1, n1);
    Eigen::Index col = 0;
    for (Eigen::Index i = 0; i < n1; ++i) out(i, i) = c(col++);
    for (Eigen::Index i = 0; i < n1; ++i) {
      for (Eigen::Index k = i + 1; k < n1; ++k) {
        const Complex z(h * c(col), h * c(col + 1));
        out(i, k) = z;
        out(k, i) = std::conj(z);
        col += 2;
      }
    }
    return out;
  }

  // Inverse of matrix() on the domain (orthogonal projection elsewhere).
  RVector coefficients(const CMatrix& m) const {
    const Eigen::Index d = n1 * n2;
    switch (domain) {
      case Domain::Real: return m.reshaped().real();
      case Domain::Complex: {
        RVector c(2 * d);
        c << m.reshaped().real(), m.reshaped().imag();
        return c;
      }
      case Domain::Hermitian: break;
    }
    const double h = 1.0 / std::sqrt(2.0);
    RVector c(d);
    Eigen::Index col = 0;
    for (Eigen::Index i = 0; i < n1; ++i) c(col++) = m(i, i).real();
    for (Eigen::Index i = 0; i < n1; ++i) {
      for (Eigen::Index k = i + 1; k < n1; ++k) {
        c(col++) = h * (m(i, k).real() + m(k, i).real());
        c(col++) = h * (m(i, k).imag() - m(k, i).imag());
      }
    }
    return c;
  }
};

RealModel real_model(const MeasurementEnsemble& e, Domain domain) {
  RealModel model;
  model.domain = domain;
  model.n1 = e.n1();
  model.n2 = e.n2();
  const Eigen::Index d = e.n1() * e.n2();
  const CMatrix sensing = sensing_matrix(e);
  switch (domain) {
    case Domain::Real: {
      model.op = sensing.real();
      break;
    }
    case Domain::Complex: {
      model.op.resize(2 * e.m(), 2 * d);
      model.op << sensing.real(), -sensing.imag(), sensing.imag(), sensing.real();
      break;
    }
    case Domain::Hermitian: {
      if (!e.hermitian_compatible() || e.n1() != e.n2())
        throw std::invalid_argument("Hermitian domain needs a Hermitian-compatible square ensemble");
      model.op.resize(e.m(), d);
      for (Eigen::Index k = 0; k < d; ++k) {
        RVector unit = RVector::Zero(d);
        unit(k) = 1.0;
        model.op.col(k) = (sensing * model.matrix(unit).reshaped()).real();
      }
      break;
    }
  }
  return model;
}

struct FullSvd {
  RVector sigma;  // length = op.cols(), zero-padded
  RMatrix v;      // right singular vectors, columns ordered by sigma descending
};

FullSvd full_right_svd(const RMatrix& op) {
  Eigen::BDCSVD<RMatrix> svd(op, Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) throw NumericError("kernel SVD did not converge");
  FullSvd out;
  out.sigma = RVector::Zero(op.cols());
  out.sigma.head(svd.singularValues().size()) = svd.singularValues();
  out.v = svd.matrixV();
  return out;
}

Eigen::Index numerical_rank_of(const RVector& sigma) {
  const double top = sigma.size() ? sigma(0) : 0.0;
  Eigen::Index rank = 0;
  while (rank < sigma.size() && sigma(rank) > kKernelRank * top) ++rank;
  return rank;
}

double nsp_ratio(const CMatrix& m, int r) {
  const HeadTail ht = head_tail(singular_values(m), r);
  if (ht.tail_nuclear <= 0.0) return kInf;
  return std::sqrt(static_cast<double>(r)) * ht.head_frobenius / ht.tail_nuclear;
}

// Same ratio from the eigenvalues of the smaller Gram matrix; cheaper, and
// accurate enough to locate a boundary point by bisection.
double nsp_ratio_gram(const CMatrix& m, int r) {
  RVector lambda;
  if (m.rows() <= m.cols()) {
    lambda = Eigen::SelfAdjointEigenSolver<CMatrix>(m * m.adjoint(), Eigen::EigenvaluesOnly).eigenvalues();
  } else {
    lambda = Eigen::SelfAdjointEigenSolver<CMatrix>(m.adjoint() * m, Eigen::EigenvaluesOnly).eigenvalues();
  }
  const RVector sigma = lambda.reverse().cwiseMax(0.0).cwiseSqrt();
  const HeadTail ht = head_tail(sigma, r);
  if (ht.tail_nuclear <= 0.0) return kInf;
  return std::sqrt(static_cast<double>(r)) * ht.head_frobenius / ht.tail_nuclear;
}

CMatrix random_rank_r_in(Eigen::Index n1, Eigen::Index n2, int r, Domain domain, Rng& rng) {
  switch (domain) {
    case Domain::Real: return random_rank_r(n1, n2, r, Field::Real, rng);
    case Domain::Complex: return random_rank_r(n1, n2, r, Field::Complex, rng);
    case Domain::Hermitian: return random_hermitian_rank_r(n1, r, rng);
  }
  return {};
}

double require(const std::optional<double>& value, const char* name) {
  if (!value) throw std::invalid_argument(std::string("bound parameter '") + name + "' is missing");
  if (!std::isfinite(*value))
    throw std::invalid_argument(std::string("bound parameter '") + name + "' is not finite");
  return *value;
}

double require_rho(const BoundParams& p) {
  const double rho = require(p.rho, "rho");
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in (0, 1)");
  return rho;
}

double require_positive(const std::optional<double>& value, const char* name) {
  const double v = require(value, name);
  if (!(v > 0.0)) throw std::invalid_argument(std::string("bound parameter '") + name + "' must be > 0");
  return v;
}

double require_nonnegative(const std::optional<double>& value, const char* name) {
  const double v = require(value, name);
  if (!(v >= 0.0)) throw std::invalid_argument(std::string("bound parameter '") + name + "' must be >= 0");
  return v;
}

double require_p(const BoundParams& params, double hi) {
  const double p = require(params.p, "p");
  if (!(p >= 1.0 && p <= hi)) throw std::invalid_argument("Schatten index p out of range");
  return p;
}

}  // namespace

NspCheck nsp_inequality(const CMatrix& m, const MeasurementEnsemble& e, double rho, double tau,
                        int r) {
  if (r < 1) throw std::invalid_argument("rank r must be positive");
  const HeadTail ht = head_tail(singular_values(m), r);
  NspCheck out;
  out.lhs = ht.head_frobenius;
  out.rhs = rho / std::sqrt(static_cast<double>(r)) * ht.tail_nuclear + tau * lrlab::apply(e, m).norm();
  out.holds = out.lhs <= out.rhs;
  return out;
}

std::string to_string(Domain domain) {
  switch (domain) {
    case Domain::Real: return "real";
    case Domain::Complex: return "complex";
    case Domain::Hermitian: return "hermitian";
  }
  return "unknown";
}

Domain natural_domain(const MeasurementEnsemble& e) {
  if (e.field() == Field::Real) return Domain::Real;
  if (e.hermitian_compatible() && e.n1() == e.n2()) return Domain::Hermitian;
  return Domain::Complex;
}

std::vector<CMatrix> kernel_basis(const MeasurementEnsemble& e, Domain domain) {
  const RealModel model = real_model(e, domain);
  const FullSvd svd = full_right_svd(model.op);
  const Eigen::Index rank = numerical_rank_of(svd.sigma);
  std::vector<CMatrix> basis;
  for (Eigen::Index k = rank; k < svd.v.cols(); ++k) basis.push_back(model.matrix(svd.v.col(k)));
  return basis;
}

std::vector<CMatrix> kernel_sample(const MeasurementEnsemble& e, int k, std::uint64_t seed) {
  return kernel_sample(e, k, seed, natural_domain(e));
}

std::vector<CMatrix> kernel_sample(const MeasurementEnsemble& e, int k, std::uint64_t seed,
                                   Domain domain) {
  if (k < 0) throw std::invalid_argument("sample count must be >= 0");
  const RealModel model = real_model(e, domain);
  const FullSvd svd = full_right_svd(model.op);
  const Eigen::Index rank = numerical_rank_of(svd.sigma);
  const Eigen::Index dim = svd.v.cols() - rank;
  if (dim == 0)
    throw std::invalid_argument("measurement map has a trivial kernel (m = " + std::to_string(e.m()) +
                                ", ambient dimension " + std::to_string(svd.v.cols()) + ")");
  const RMatrix kernel = svd.v.rightCols(dim);
  Rng rng(seed);
  std::vector<CMatrix> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    RVector c = gaussian_real(dim, 1, rng).col(0);
    c /= c.norm();
    out.push_back(model.matrix(kernel * c));
  }
  return out;
}

double gordon_requirement(int n1, int n2, int r, double rho, double kappa, double eps) {
  if (n1 < 1 || n2 < 1 || r < 1) throw std::invalid_argument("dimensions and rank must be positive");
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in (0, 1)");
  if (!(kappa > 1.0) || !std::isfinite(kappa)) throw std::invalid_argument("kappa must be > 1");
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("epsilon must lie in (0, 1)");
  const double factor = 1.0 + std::pow(1.0 + 1.0 / rho, 2);
  const double width = std::sqrt(static_cast<double>(n1)) + std::sqrt(static_cast<double>(n2)) +
                       std::sqrt(2.0 * std::log(1.0 / eps) / (r * factor));
  return r * factor * kappa * kappa / ((kappa - 1.0) * (kappa - 1.0)) * width * width;
}

long gordon_count(int n1, int n2, int r, double rho, double kappa, double eps) {
  const double need = gordon_requirement(n1, n2, r, rho, kappa, eps);
  auto ok = [&](long m) {
    const double md = static_cast<double>(m);
    return md * md / (md + 1.0) >= need;
  };
  // Real root of m^2 - need*m - need = 0, then integer adjustment.
  long m = static_cast<long>(std::ceil(0.5 * (need + std::sqrt(need * need + 4.0 * need))));
  m = std::max(m, 1L);
  while (m > 1 && ok(m - 1)) --m;
  while (!ok(m)) ++m;
  return m;
}

double expected_gaussian_norm(long m) {
  if (m < 1) throw std::invalid_argument("dimension must be positive");
  const double md = static_cast<double>(m);
  return std::sqrt(2.0) * std::exp(std::lgamma(0.5 * (md + 1.0)) - std::lgamma(0.5 * md));
}

Interval wilson_interval(long successes, long trials, double z) {
  if (trials < 1 || successes < 0 || successes > trials)
    throw std::invalid_argument("invalid binomial counts");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
  const double half = z / (1.0 + z2 / n) * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

RowSampler rank_one_gaussian_rows(Eigen::Index n) {
  if (n < 1) throw std::invalid_argument("dimension must be positive");
  return [n](Rng& rng) {
    const CVector a = gaussian_complex(n, 1, rng).col(0);
    return CMatrix(a * a.adjoint());
  };
}

RowSampler design_rows(const WeightedVectorSet& design) {
  const double n = static_cast<double>(design.dim());
  const double norm = std::sqrt(std::sqrt(n * (n + 1.0)));
  std::vector<double> cumulative(static_cast<std::size_t>(design.size()));
  std::partial_sum(design.weights().data(), design.weights().data() + design.size(),
                   cumulative.begin());
  return [design, norm, cumulative](Rng& rng) {
    const double u = std::uniform_real_distribution<double>(0.0, cumulative.back())(rng);
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const auto index = std::min<Eigen::Index>(it - cumulative.begin(), design.size() - 1);
    const CVector a = norm * design.vector(index);
    return CMatrix(a * a.adjoint());
  };
}

RowSampler indep_entry_rows(EntryDistribution dist, Eigen::Index n1, Eigen::Index n2) {
  if (n1 < 1 || n2 < 1) throw std::invalid_argument("dimensions must be positive");
  return [dist, n1, n2](Rng& rng) {
    CMatrix phi(n1, n2);
    for (Eigen::Index k = 0; k < n2; ++k)
      for (Eigen::Index i = 0; i < n1; ++i) phi(i, k) = draw_entry(dist, rng);
    return phi;
  };
}

std::vector<CMatrix> sample_directions(Eigen::Index n1, Eigen::Index n2, int r, Domain domain,
                                       int count, std::uint64_t seed) {
  if (n1 < 1 || n2 < 1 || r < 1 || count < 0) throw std::invalid_argument("invalid direction request");
  std::vector<CMatrix> out;
  CMatrix unit = CMatrix::Zero(n1, n2);
  unit(0, 0) = 1.0;
  out.push_back(unit);
  if (n1 >= 2 && n2 >= 2) {
    CMatrix pair = CMatrix::Zero(n1, n2);
    pair(0, 0) = 1.0 / std::sqrt(2.0);
    pair(1, 1) = -1.0 / std::sqrt(2.0);
    out.push_back(pair);
  }
  if (domain != Domain::Hermitian && n2 >= 2) {
    CMatrix off = CMatrix::Zero(n1, n2);
    off(0, 1) = 1.0;
    out.push_back(off);
  }
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    CMatrix m = random_rank_r_in(n1, n2, std::min<int>(r, static_cast<int>(std::min(n1, n2))), domain, rng);
    out.push_back(m / m.norm());
  }
  return out;
}

SmallBallEstimates estimate_Q(const RowSampler& rows, const std::vector<CMatrix>& directions,
                              double xi, long trials, std::uint64_t seed,
                              const std::string& descriptor) {
  if (trials < 100) throw std::invalid_argument("estimate_Q needs at least 100 trials");
  if (directions.empty()) throw std::invalid_argument("estimate_Q needs at least one direction");
  if (!(xi >= 0.0)) throw std::invalid_argument("xi must be >= 0");
  std::vector<CMatrix> unit;
  for (const auto& d : directions) {
    const double norm = d.norm();
    if (!(norm > 0.0)) throw std::invalid_argument("zero direction");
    unit.push_back(d / norm);
  }
  const std::size_t dirs = unit.size();

  // Per-chunk counters with per-trial seeds keep the result independent of
  // the worker count.
  const std::size_t chunk = 4096;
  const std::size_t chunks = (static_cast<std::size_t>(trials) + chunk - 1) / chunk;
  std::vector<std::vector<long>> hits(chunks, std::vector<long>(dirs, 0));
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t end = std::min(static_cast<std::size_t>(trials), (c + 1) * chunk);
    for (std::size_t t = c * chunk; t < end; ++t) {
      Rng rng(mix_seed(seed, t));
      const CMatrix phi = rows(rng);
      for (std::size_t k = 0; k < dirs; ++k) {
        const Complex inner = (phi.conjugate().cwiseProduct(unit[k])).sum();
        if (std::abs(inner) >= xi) ++hits[c][k];
      }
    }
  });

  std::vector<long> total(dirs, 0);
  for (const auto& h : hits)
    for (std::size_t k = 0; k < dirs; ++k) total[k] += h[k];
  const auto worst = std::min_element(total.begin(), total.end()) - total.begin();
  SmallBallEstimates out;
  out.trials = trials;
  out.xi = xi;
  out.directions = descriptor + " (" + std::to_string(dirs) + " directions)";
  out.worst_direction = static_cast<int>(worst);
  out.q_hat = static_cast<double>(total[worst]) / static_cast<double>(trials);
  out.q_ci = wilson_interval(total[worst], trials);
  return out;
}

SmallBallEstimates estimate_Wm(const MeasurementEnsemble& e, int r, long trials,
                               std::uint64_t seed) {
  if (trials < 20) throw std::invalid_argument("estimate_Wm needs at least 20 trials");
  if (r < 1) throw std::invalid_argument("rank r must be positive");
  std::vector<double> norms(static_cast<std::size_t>(trials));
  const double root_m = std::sqrt(static_cast<double>(e.m()));
  parallel_for(norms.size(), [&](std::size_t t) {
    Rng rng(mix_seed(seed, t));
    CVector signs(e.m());
    std::bernoulli_distribution coin(0.5);
    for (Eigen::Index j = 0; j < e.m(); ++j) signs(j) = coin(rng) ? 1.0 : -1.0;
    norms[t] = operator_norm(adjoint(e, signs) / root_m);
  });
  double mean = 0.0;
  for (double v : norms) mean += v;
  mean /= static_cast<double>(trials);
  double var = 0.0;
  for (double v : norms) var += (v - mean) * (v - mean);
  var /= static_cast<double>(trials - 1);
  const double half = 1.959963984540054 * std::sqrt(var / static_cast<double>(trials));
  const double scale = std::sqrt(static_cast<double>(r));
  SmallBallEstimates out;
  out.trials = trials;
  out.directions = "rademacher-sum";
  out.w_hat = scale * mean;
  out.w_ci = {scale * (mean - half), scale * (mean + half)};
  return out;
}

PositiveConstants positive_constants(double rho, double kappa) {
  if (!(kappa >= 1.0)) throw std::invalid_argument("kappa(W) must be >= 1");
  if (!(rho > 0.0)) throw std::invalid_argument("rho must be > 0");
  const double kr = kappa * rho;
  if (kr > 0.99)
    throw std::invalid_argument("kappa * rho = " + std::to_string(kr) +
                                " exceeds 0.99; the constants C and D diverge");
  return {(1.0 + kr) * (1.0 + kr) / (1.0 - kr), (3.0 + kr) / (1.0 - kr)};
}

const std::vector<std::string>& bound_ids() {
  static const std::vector<std::string> ids = {"thm11",       "thm12-eq13",         "eq:ErrorEstimate",
                                               "err:bound1",  "eq:mainTh3",         "eq:tomography_bound",
                                               "thm20-eq40"};
  return ids;
}

BoundEvaluation bound_rhs(const std::string& id, const BoundParams& params) {
  BoundEvaluation out;
  out.id = id;
  out.params = params;
  if (id == "thm11") {
    const double rho = require_rho(params);
    const double tau = require_nonnegative(params.tau, "tau");
    const double r = require_positive(params.r, "r");
    const double tail = require_nonnegative(params.tail_nuclear, "tail_nuclear");
    const double eta = require_nonnegative(params.eta, "eta");
    out.value = 2.0 * (1.0 + rho) * (1.0 + rho) / ((1.0 - rho) * std::sqrt(r)) * tail +
                2.0 * tau * (3.0 + rho) / (1.0 - rho) * eta;
  } else if (id == "thm12-eq13") {
    const double rho = require_rho(params);
    const double tau = require_nonnegative(params.tau, "tau");
    const double r = require_positive(params.r, "r");
    const double p = require_p(params, kInf);
    const double tail = require_nonnegative(params.tail_nuclear, "tail_nuclear");
    const double gap = require(params.nuclear_gap, "nuclear_gap");
    const double residual = require_nonnegative(params.residual_norm, "residual_norm");
    const double value = (1.0 + rho) * (1.0 + rho) / ((1.0 - rho) * std::pow(r, 1.0 - 1.0 / p)) *
                             (gap + 2.0 * tail) +
                         tau * (3.0 + rho) / (1.0 - rho) * std::pow(r, 1.0 / p - 0.5) * residual;
    // A negative value can only arise from inputs outside the bound's assumptions.
    out.value = std::max(0.0, value);
  } else if (id == "eq:ErrorEstimate" || id == "err:bound1") {
    const double rho = require_rho(params);
    const double r = require_positive(params.r, "r");
    const double tail = require_nonnegative(params.tail_nuclear, "tail_nuclear");
    const double c3 = require_positive(params.c3, "c3");
    const double eta = require_nonnegative(params.eta, "eta");
    const double m = require_positive(params.m, "m");
    const double head = 2.0 * (1.0 + rho) * (1.0 + rho) / ((1.0 - rho) * std::sqrt(r)) * tail;
    const double noise = id == "eq:ErrorEstimate" ? (3.0 + rho) / ((1.0 - rho) * c3)
                                                  : (3.0 + rho) * c3 / (1.0 - rho);
    out.value = head + noise * eta / std::sqrt(m);
  } else if (id == "eq:mainTh3") {
    const double c3 = require_nonnegative(params.c3, "c3");
    const double c4 = require_nonnegative(params.c4, "c4");
    const double r = require_positive(params.r, "r");
    const double p = require_p(params, 2.0);
    const double tail = require_nonnegative(params.tail_nuclear, "tail_nuclear");
    const double m = require_positive(params.m, "m");
    const double residual = require_nonnegative(params.residual_norm, "residual_norm");
    out.value = c3 / std::pow(r, 1.0 - 1.0 / p) * tail +
                c4 * std::pow(r, 1.0 / p - 0.5) / std::sqrt(m) * residual;
  } else if (id == "eq:tomography_bound") {
    const double c3 = require_nonnegative(params.c3, "c3");
    const double c4 = require_nonnegative(params.c4, "c4");
    const double r = require_positive(params.r, "r");
    const double tail = require_nonnegative(params.tail_nuclear, "tail_nuclear");
    const double noise = require_nonnegative(params.residual_norm, "residual_norm");
    out.value = c3 * tail + c4 * std::sqrt(r) * noise;
  } else if (id == "thm20-eq40") {
    const double rho = require_rho(params);
    const double tau = require_nonnegative(params.tau, "tau");
    const double r = require_positive(params.r, "r");
    const double p = require_p(params, 2.0);
    const double tail = require_nonnegative(params.tail_nuclear, "tail_nuclear");
    const double residual = require_nonnegative(params.residual_norm, "residual_norm");
    const double t_norm = require_nonnegative(params.t_norm, "t_norm");
    const double w_norm = require_positive(params.w_norm, "w_norm");
    const double w_inv = require_positive(params.w_inv_norm, "w_inv_norm");
    const double kappa = require_positive(params.kappa, "kappa");
    const PositiveConstants k = positive_constants(rho, kappa);
    out.value = 2.0 * k.c * kappa / std::pow(r, 1.0 - 1.0 / p) * tail +
                std::pow(r, 1.0 / p - 0.5) * residual * w_inv *
                    (k.c * t_norm / std::sqrt(r) + k.d * w_norm * tau);
  } else {
    throw std::invalid_argument("unknown bound id '" + id + "'");
  }
  return out;
}

NspFit fit_nsp_constants(const MeasurementEnsemble& e, int r, long samples, std::uint64_t seed,
                         std::optional<Domain> domain, std::vector<double> rho_grid) {
  if (samples < 100) throw std::invalid_argument("fit_nsp_constants needs at least 100 samples");
  if (r < 1 || r > std::min(e.n1(), e.n2())) throw std::invalid_argument("rank r out of range");
  if (rho_grid.empty()) throw std::invalid_argument("rho grid is empty");
  std::sort(rho_grid.begin(), rho_grid.end());
  for (double rho : rho_grid)
    if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("rho grid values must lie in (0, 1)");

  const Domain dom = domain.value_or(natural_domain(e));
  const RealModel model = real_model(e, dom);
  const FullSvd svd = full_right_svd(model.op);
  const Eigen::Index dim = svd.v.cols();
  // Low-gain subspace: the smallest right singular directions of the map.
  const Eigen::Index low = std::min<Eigen::Index>(dim, std::max<Eigen::Index>(8, 2 * r * (e.n1() + e.n2())));
  const RMatrix low_basis = svd.v.rightCols(low);
  const double gain_floor = kKernelRank * svd.sigma(0);

  const std::size_t grid = rho_grid.size();
  std::vector<double> best(grid, kInf), best_half(grid, kInf);
  std::vector<RVector> witness(grid);
  const long half = samples / 2;

  auto consider = [&](const RVector& c, long sample) {
    const double norm = c.norm();
    if (!(norm > 0.0)) return;
    const RVector unit = c / norm;
    const double ratio = nsp_ratio(model.matrix(unit), r);
    const double gain = (model.op * unit).norm();
    for (std::size_t g = 0; g < grid; ++g) {
      if (!(ratio > rho_grid[g])) continue;
      if (gain < best[g]) {
        best[g] = gain;
        witness[g] = unit;
      }
      if (sample < half) best_half[g] = std::min(best_half[g], gain);
    }
  };

  // The weakest single directions of the map; when one of them lies in
  // T_{rho,r} the sampled infimum is exact.
  for (Eigen::Index k = std::max<Eigen::Index>(0, dim - 4); k < dim; ++k) consider(svd.v.col(k), 0);

  Rng rng(seed);
  for (long s = 0; s < samples; ++s) {
    CMatrix head = random_rank_r_in(e.n1(), e.n2(), r, dom, rng);
    RVector rc = model.coefficients(head);
    rc /= rc.norm();
    RVector kc = low_basis * gaussian_real(low, 1, rng).col(0);
    kc /= kc.norm();
    consider(rc, s);
    consider(kc, s);
    // Push the segment between the two onto the boundary of T_{rho,r}: the
    // gain shrinks toward the low-gain end, so the boundary point is the
    // most adversarial member of the segment.
    const CMatrix mr = model.matrix(rc), mk = model.matrix(kc);
    const double low_ratio = nsp_ratio(mk, r);
    for (std::size_t g = 0; g < grid; ++g) {
      const double rho = rho_grid[g];
      if (low_ratio > rho) continue;
      double lo = 0.0, hi = 1.0;  // weight on rc; hi is inside T
      for (int it = 0; it < kBoundaryBisections; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (nsp_ratio_gram(mid * mr + (1.0 - mid) * mk, r) > rho) hi = mid;
        else lo = mid;
      }
      consider(hi * rc + (1.0 - hi) * kc, s);
    }
  }

  NspFit fit;
  fit.samples = samples;
  fit.rho_grid = rho_grid;
  fit.inf_norm = best;
  for (std::size_t g = 0; g < grid; ++g)
    fit.tau_grid.push_back(best[g] > gain_floor ? 1.0 / best[g] : kInf);
  for (std::size_t g = 0; g < grid; ++g) {
    const bool finite = std::isfinite(fit.tau_grid[g]);
    // Stable: the second half of the samples lowers the infimum by < 20%.
    const bool stable = finite && std::isfinite(best_half[g]) && best[g] >= 0.8 * best_half[g];
    if (finite && stable) {
      fit.rho = rho_grid[g];
      fit.tau = fit.tau_grid[g];
      fit.found = true;
      fit.witness = model.matrix(witness[g]);
      break;
    }
  }
  if (!fit.found) {
    fit.rho = rho_grid.back();
    fit.tau = kInf;
  }
  return fit;
}

CMatrix hermitian_power(const CMatrix& w, double power) {
  if (w.rows() != w.cols()) throw std::invalid_argument("W must be square");
  const HermEig eig = herm_eig(hermitian_part(w));
  const double top = eig.values(eig.values.size() - 1);
  const double bottom = eig.values(0);
  if (!(top > 0.0) || !(bottom > 1e-10 * top))
    throw std::invalid_argument("W is singular or not positive definite (lambda_min = " +
                                std::to_string(bottom) + ")");
  const RVector mapped = eig.values.array().pow(power);
  return hermitian_part(eig.vectors * mapped.asDiagonal() * eig.vectors.adjoint());
}

ConditioningReport conditioning_report(const MeasurementEnsemble& e, const RVector& t,
                                       std::optional<double> threshold,
                                       const std::string& t_descriptor) {
  if (t.size() != e.m())
    throw std::invalid_argument("t has length " + std::to_string(t.size()) + ", expected m = " +
                                std::to_string(e.m()));
  if (!e.hermitian_compatible() || e.n1() != e.n2())
    throw std::invalid_argument("conditioning needs a Hermitian-compatible square ensemble");
  const CMatrix w = hermitian_part(adjoint(e, t.cast<Complex>()));
  const HermEig eig = herm_eig(w);
  ConditioningReport rep;
  rep.t_descriptor = t_descriptor;
  rep.lambda_min = eig.values(0);
  rep.lambda_max = eig.values(eig.values.size() - 1);
  rep.threshold = threshold.value_or(e.provenance().design_id.empty() ? kGaussianConditioning
                                                                       : kDesignConditioning);
  rep.w_norm = std::max(std::abs(rep.lambda_min), std::abs(rep.lambda_max));
  rep.kappa_defined = rep.lambda_min > 0.0;
  if (rep.kappa_defined) {
    rep.kappa = rep.lambda_max / rep.lambda_min;
    rep.w_inv_norm = 1.0 / rep.lambda_min;
    rep.pass = rep.kappa <= rep.threshold;
  } else {
    rep.kappa = kInf;
    rep.w_inv_norm = kInf;
  }
  return rep;
}

MeasurementEnsemble conditioned_map(const MeasurementEnsemble& e, const RVector& t) {
  if (t.size() != e.m()) throw std::invalid_argument("t must have length m");
  if (!e.hermitian_compatible() || e.n1() != e.n2())
    throw std::invalid_argument("conditioning needs a Hermitian-compatible square ensemble");
  const Eigen::Index n = e.n1();
  const CMatrix w = hermitian_part(adjoint(e, t.cast<Complex>()));
  if (w == CMatrix::Identity(n, n)) return e;
  const CMatrix root_inv = hermitian_power(w, -0.5);

  Provenance prov = e.provenance();
  prov.convention += prov.convention.empty() ? "conditioned" : "+conditioned";
  if (e.kind() == EnsembleKind::RankOne) {
    // (P a)(P a)^* with P Hermitian; rows hold a^T, so new rows are a^T P^T.
    return MeasurementEnsemble::rank_one(e.vectors() * root_inv.transpose(), e.scale(), prov);
  }
  CMatrix stacked(e.m(), n * n);
  for (Eigen::Index j = 0; j < e.m(); ++j)
    stacked.row(j) = (root_inv * e.matrix(j) * root_inv).reshaped().transpose();
  return MeasurementEnsemble::dense(n, n, std::move(stacked), Field::Complex, prov);
}

}  // namespace lrlab
