#include "lowrank/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lrlab {

namespace {

template <class S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

constexpr int kStallWindow = 100;
constexpr double kStallRelative = 1e-10;
// Gram eigenvalues below this fraction of the largest are treated as zero.
constexpr double kGramRankTolerance = 1e-13;

void check_data(const MeasurementEnsemble& e, const CVector& b) {
  if (b.size() != e.m())
    throw std::invalid_argument("data vector has length " + std::to_string(b.size()) +
                                ", expected m = " + std::to_string(e.m()));
  if (!b.allFinite()) throw std::invalid_argument("data vector must be finite");
}

void check_hermitian_program(const MeasurementEnsemble& e, const CVector& b) {
  if (!e.hermitian_compatible() || e.n1() != e.n2())
    throw std::invalid_argument("program needs a Hermitian-compatible square ensemble");
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  if (b.imag().cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("Hermitian program needs real measurement data");
}

// Exact Euclidean projection onto {z : ||S z - b||_2 <= eta} via the thin
// SVD S = U diag(s) V^*, obtained from the smaller Gram matrix.
template <class S>
class BallProjector {
 public:
  BallProjector(const MatX<S>& sensing, const VecX<S>& b) {
    const Eigen::Index m = sensing.rows(), d = sensing.cols();
    MatX<S> u;
    if (m <= d) {
      const MatX<S> gram = sensing * sensing.adjoint();
      Eigen::SelfAdjointEigenSolver<MatX<S>> eig(gram);
      if (eig.info() != Eigen::Success) throw NumericError("Gram eigensolver did not converge");
      const auto keep = kept(eig.eigenvalues());
      u = eig.eigenvectors().rightCols(keep);
      s_ = eig.eigenvalues().tail(keep).cwiseMax(0.0).cwiseSqrt();
      v_ = (sensing.adjoint() * u) * s_.cwiseInverse().template cast<S>().asDiagonal();
    } else {
      const MatX<S> gram = sensing.adjoint() * sensing;
      Eigen::SelfAdjointEigenSolver<MatX<S>> eig(gram);
      if (eig.info() != Eigen::Success) throw NumericError("Gram eigensolver did not converge");
      const auto keep = kept(eig.eigenvalues());
      v_ = eig.eigenvectors().rightCols(keep);
      s_ = eig.eigenvalues().tail(keep).cwiseMax(0.0).cwiseSqrt();
      u = (sensing * v_) * s_.cwiseInverse().template cast<S>().asDiagonal();
    }
    beta_ = u.adjoint() * b;
    b_perp_ = (b - u * beta_).norm();
  }

  double b_perp() const { return b_perp_; }

  /// Projects p in place onto the set (or onto the least-squares set when
  /// the set is empty) and returns ||S z - b||_2 at the result.
  double project(VecX<S>& p, double eta) const {
    const VecX<S> c = v_.adjoint() * p;
    const VecX<S> r = s_.template cast<S>().cwiseProduct(c) - beta_;
    const double perp2 = b_perp_ * b_perp_;
    const double res2 = r.squaredNorm() + perp2;
    if (res2 <= eta * eta) return std::sqrt(res2);

    VecX<S> delta(c.size());
    if (b_perp_ >= eta) {
      for (Eigen::Index k = 0; k < c.size(); ++k) delta(k) = -r(k) / s_(k);
      p.noalias() += v_ * delta;
      return b_perp_;
    }
    const double mu = solve_multiplier(r, std::sqrt(eta * eta - perp2));
    for (Eigen::Index k = 0; k < c.size(); ++k)
      delta(k) = -mu * s_(k) * r(k) / (1.0 + mu * s_(k) * s_(k));
    p.noalias() += v_ * delta;
    return eta;
  }

 private:
  template <class Values>
  Eigen::Index kept(const Values& lambda) const {
    const double top = lambda.size() ? lambda(lambda.size() - 1) : 0.0;
    if (!(top > 0.0)) throw std::invalid_argument("measurement map is identically zero");
    Eigen::Index keep = 0;
    for (Eigen::Index k = lambda.size() - 1; k >= 0 && lambda(k) > kGramRankTolerance * top; --k)
      ++keep;
    return keep;
  }

  double range_residual(const VecX<S>& r, double mu) const {
    double total = 0.0;
    for (Eigen::Index k = 0; k < r.size(); ++k) {
      const double q = 1.0 + mu * s_(k) * s_(k);
      total += std::norm(Complex(r(k))) / (q * q);
    }
    return std::sqrt(total);
  }

  // Root of ||r_k / (1 + mu s_k^2)|| = target. Newton on 1/norm, which is
  // nearly linear in mu, safeguarded by bisection.
  double solve_multiplier(const VecX<S>& r, double target) const {
    double lo = 0.0, hi = 1.0;
    while (range_residual(r, hi) > target) {
      lo = hi;
      hi *= 4.0;
      if (hi > 1e300) throw NumericError("ball projection multiplier diverged");
    }
    double mu = lo;
    for (int it = 0; it < 200; ++it) {
      double norm2 = 0.0, dnorm2 = 0.0;
      for (Eigen::Index k = 0; k < r.size(); ++k) {
        const double s2 = s_(k) * s_(k);
        const double q = 1.0 + mu * s2;
        const double a = std::norm(Complex(r(k)));
        norm2 += a / (q * q);
        dnorm2 += -2.0 * a * s2 / (q * q * q);
      }
      const double norm = std::sqrt(norm2);
      const double f = 1.0 / norm - 1.0 / target;
      if (std::abs(f) * target <= 1e-15) break;
      if (f < 0.0) lo = mu;
      else hi = mu;
      const double df = -0.5 * dnorm2 / (norm2 * norm);
      double next = mu - f / df;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (hi - lo <= 1e-15 * hi) break;
      mu = next;
    }
    return mu;
  }

  MatX<S> v_;
  RVector s_;
  VecX<S> beta_;
  double b_perp_ = 0.0;
};

enum class Prox { Nuclear, HermitianNuclear, TracePsd };

template <class S>
MatX<S> apply_prox(const MatX<S>& z, Prox kind, double threshold, double& objective) {
  if (kind == Prox::Nuclear) {
    Eigen::BDCSVD<MatX<S>> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) throw NumericError("SVD did not converge");
    RVector sigma = (svd.singularValues().array() - threshold).cwiseMax(0.0);
    objective = sigma.sum();
    return svd.matrixU() * sigma.template cast<S>().asDiagonal() * svd.matrixV().adjoint();
  }
  const MatX<S> h = (z + z.adjoint()) * S(0.5);
  Eigen::SelfAdjointEigenSolver<MatX<S>> eig(h);
  if (eig.info() != Eigen::Success) throw NumericError("eigensolver did not converge");
  RVector lambda = eig.eigenvalues();
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    const double x = lambda(k);
    lambda(k) = kind == Prox::TracePsd ? std::max(x - threshold, 0.0)
                                       : std::copysign(std::max(std::abs(x) - threshold, 0.0), x);
  }
  objective = kind == Prox::TracePsd ? lambda.sum() : lambda.cwiseAbs().sum();
  const MatX<S> out = eig.eigenvectors() * lambda.template cast<S>().asDiagonal() *
                      eig.eigenvectors().adjoint();
  return (out + out.adjoint()) * S(0.5);
}

template <class S>
double objective_of(const MatX<S>& x, Prox kind) {
  if (kind == Prox::TracePsd) return std::real(Complex(x.trace()));
  if (kind == Prox::Nuclear) {
    Eigen::BDCSVD<MatX<S>> svd(x);
    return svd.singularValues().sum();
  }
  Eigen::SelfAdjointEigenSolver<MatX<S>> eig(MatX<S>((x + x.adjoint()) * S(0.5)),
                                             Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().sum();
}

struct AdmmOutput {
  CMatrix x;
  double objective = 0.0;
  double residual = 0.0;
  int iterations = 0;
  SolveStatus status = SolveStatus::MaxIter;
  double primal_gap = 0.0, dual_gap = 0.0, penalty = 0.0;
};

template <class S>
AdmmOutput admm(const MatX<S>& sensing, const VecX<S>& b, Eigen::Index n1, Eigen::Index n2,
                double eta, Prox kind, const SolverConfig& cfg) {
  const bool hermitian = kind != Prox::Nuclear;
  const Eigen::Index d = n1 * n2;
  const BallProjector<S> ball(sensing, b);

  auto symmetrize = [&](VecX<S>& v) {
    if (!hermitian) return;
    MatX<S> m = v.reshaped(n1, n2);
    v = ((m + m.adjoint()) * S(0.5)).reshaped();
  };

  VecX<S> start;
  if (cfg.initial) {
    if (cfg.initial->rows() != n1 || cfg.initial->cols() != n2)
      throw std::invalid_argument("initial point has the wrong shape");
    if constexpr (std::is_same_v<S, double>) start = cfg.initial->real().reshaped();
    else start = cfg.initial->reshaped();
  } else {
    start = sensing.adjoint() * b;
    const double image = (sensing * start).norm();
    start *= image > 0.0 ? S(b.norm() / image) : S(0.0);
  }
  symmetrize(start);

  VecX<S> v = start, u = VecX<S>::Zero(d), v_prev;
  double rho = cfg.penalty;
  const double sqrt_d = std::sqrt(static_cast<double>(d));
  AdmmOutput out;
  out.status = SolveStatus::MaxIter;
  double residual = 0.0, z_objective = 0.0;
  double stall_reference = -1.0;
  VecX<S> z;

  int it = 0;
  for (; it < cfg.max_iterations; ++it) {
    const MatX<S> zm = apply_prox<S>(MatX<S>((v - u).reshaped(n1, n2)), kind, 1.0 / rho, z_objective);
    z = zm.reshaped();
    v_prev = v;
    v = z + u;
    residual = ball.project(v, eta);
    symmetrize(v);
    u += z - v;

    const double r_norm = (z - v).norm();
    const double s_norm = rho * (v - v_prev).norm();
    const double eps_pri = sqrt_d * cfg.eps_abs + cfg.eps_rel * std::max(z.norm(), v.norm());
    const double eps_dual = sqrt_d * cfg.eps_abs + cfg.eps_rel * rho * u.norm();
    out.primal_gap = r_norm;
    out.dual_gap = s_norm;
    if (r_norm <= eps_pri && s_norm <= eps_dual &&
        residual <= eta + cfg.eps_abs * std::sqrt(static_cast<double>(b.size()))) {
      out.status = SolveStatus::Converged;
      ++it;
      break;
    }

    // A residual that stays above eta without moving means eta is below
    // the smallest attainable residual.
    if ((it + 1) % kStallWindow == 0) {
      const double z_residual = (sensing * z - b).norm();
      const double tracked = std::max(residual, z_residual);
      if (tracked > eta + 10.0 * cfg.eps_abs) {
        if (stall_reference >= 0.0 &&
            std::abs(tracked - stall_reference) <= kStallRelative * tracked) {
          out.status = SolveStatus::InfeasibleDetected;
          ++it;
          break;
        }
        stall_reference = tracked;
      } else {
        stall_reference = -1.0;
      }
    }
    if (ball.b_perp() > eta + 10.0 * cfg.eps_abs && it + 1 >= kStallWindow) {
      out.status = SolveStatus::InfeasibleDetected;
      ++it;
      break;
    }

    if (cfg.adapt_penalty) {
      if (r_norm > cfg.balance_ratio * s_norm) {
        rho *= cfg.balance_factor;
        u /= cfg.balance_factor;
      } else if (s_norm > cfg.balance_ratio * r_norm) {
        rho /= cfg.balance_factor;
        u *= cfg.balance_factor;
      }
    }
  }

  const MatX<S> xm = v.reshaped(n1, n2);
  out.x = xm.template cast<Complex>();
  out.objective = objective_of<S>(xm, kind);
  out.residual = (sensing * v - b).norm();
  out.iterations = it;
  out.penalty = rho;
  return out;
}

SolveResult run_admm(const MeasurementEnsemble& e, const CVector& b, double eta,
                     const SolverConfig& cfg, Prox kind) {
  cfg.validate();
  check_data(e, b);
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw std::invalid_argument("eta must be finite and >= 0");
  const bool hermitian = kind != Prox::Nuclear;
  if (hermitian) check_hermitian_program(e, b);

  AdmmOutput out;
  const bool real_path = !hermitian && e.field() == Field::Real &&
                         b.imag().cwiseAbs().maxCoeff() == 0.0 &&
                         (!cfg.initial || cfg.initial->imag().cwiseAbs().maxCoeff() == 0.0);
  if (real_path) {
    const RMatrix sensing = sensing_matrix(e).real();
    out = admm<double>(sensing, b.real(), e.n1(), e.n2(), eta, kind, cfg);
  } else {
    const CVector data = hermitian ? CVector(b.real().cast<Complex>()) : b;
    out = admm<Complex>(sensing_matrix(e), data, e.n1(), e.n2(), eta, kind, cfg);
  }

  SolveResult result{real_path ? Mat::real(out.x.real()) : Mat::complex(out.x)};
  result.objective = out.objective;
  result.residual = out.residual;
  result.iterations = out.iterations;
  result.status = out.status;
  result.primal_gap = out.primal_gap;
  result.dual_gap = out.dual_gap;
  result.final_penalty = out.penalty;
  return result;
}

// Accelerated projected gradient on ||A(Z) - b||^2 over Hermitian Z.
template <class Projection>
SolveResult projected_gradient(const MeasurementEnsemble& e, const CVector& b,
                               const SolverConfig& cfg, Projection&& project) {
  cfg.validate();
  check_data(e, b);
  check_hermitian_program(e, b);
  const Eigen::Index n = e.n1();
  const CVector data = b.real().cast<Complex>();

  auto loss = [&](const CMatrix& z) { return (lrlab::apply(e, z) - data).squaredNorm(); };
  auto gradient = [&](const CMatrix& z) {
    return CMatrix(hermitian_part(2.0 * adjoint(e, lrlab::apply(e, z) - data)));
  };

  const double lipschitz = 2.0 * operator_norm_squared(e, true);
  if (!(lipschitz > 0.0)) throw std::invalid_argument("measurement map is identically zero");

  CMatrix z;
  if (cfg.initial) {
    if (cfg.initial->rows() != n || cfg.initial->cols() != n)
      throw std::invalid_argument("initial point has the wrong shape");
    z = project(hermitian_part(*cfg.initial));
  } else {
    CMatrix back = hermitian_part(adjoint(e, data) / static_cast<double>(e.m()));
    const double image = lrlab::apply(e, back).norm();
    if (image > 0.0) back *= data.norm() / image;
    z = project(back);
  }

  SolveResult result{Mat::complex(z)};
  const double tolerance = cfg.eps_rel * (1.0 + data.norm());
  double f_z = loss(z);
  CMatrix y = z;
  double t = 1.0;
  bool restarted_last = false;
  int it = 0;
  for (; it < cfg.max_iterations; ++it) {
    const CMatrix next = project(y - gradient(y) / lipschitz);
    const double mapping = lipschitz * (y - next).norm();
    const double f_next = loss(next);
    result.primal_gap = mapping;
    result.dual_gap = tolerance;

    if (f_next > f_z) {
      if (cfg.restart && !restarted_last) {
        t = 1.0;
        y = z;
        ++result.restarts;
        restarted_last = true;
        continue;
      }
      result.monotone = false;
    }
    restarted_last = false;

    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / t_next) * (next - z);
    z = next;
    f_z = f_next;
    t = t_next;
    if (mapping <= tolerance) {
      result.status = SolveStatus::Converged;
      ++it;
      break;
    }
  }

  result.solution = Mat::complex(hermitian_part(z));
  result.objective = f_z;
  result.residual = std::sqrt(f_z);
  result.iterations = it;
  return result;
}

}  // namespace

void SolverConfig::validate() const {
  if (max_iterations < 1) throw std::invalid_argument("max-iterations must be >= 1");
  if (!(eps_abs > 0.0) || !(eps_rel > 0.0)) throw std::invalid_argument("tolerances must be > 0");
  if (!(penalty > 0.0) || !std::isfinite(penalty)) throw std::invalid_argument("penalty must be > 0");
  if (!(balance_factor > 1.0)) throw std::invalid_argument("balance factor must be > 1");
  if (!(balance_ratio > 1.0)) throw std::invalid_argument("balance ratio must be > 1");
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIter: return "max-iter";
    case SolveStatus::InfeasibleDetected: return "infeasible-detected";
  }
  return "unknown";
}

SolveResult nuclear_min(const MeasurementEnsemble& e, const CVector& b, double eta,
                        const SolverConfig& config, bool hermitian) {
  return run_admm(e, b, eta, config, hermitian ? Prox::HermitianNuclear : Prox::Nuclear);
}

SolveResult trace_min_psd(const MeasurementEnsemble& e, const CVector& b, double eta,
                          const SolverConfig& config) {
  return run_admm(e, b, eta, config, Prox::TracePsd);
}

SolveResult psd_least_squares(const MeasurementEnsemble& e, const CVector& b,
                              const SolverConfig& config) {
  return projected_gradient(e, b, config, [](const CMatrix& h) { return psd_project(h); });
}

SolveResult tomography_lsq(const MeasurementEnsemble& e, const CVector& b,
                           const SolverConfig& config) {
  return projected_gradient(e, b, config,
                            [](const CMatrix& h) { return spectral_simplex_project(h, 1.0); });
}

CVector extract_phase_vector(const HermMat& z) {
  const HermEig eig = herm_eig(z.entries());
  const Eigen::Index top = eig.values.size() - 1;
  const double lambda = eig.values(top);
  if (!(lambda > 0.0))
    throw std::domain_error("degenerate signal: largest eigenvalue is not positive");
  CVector x = std::sqrt(lambda) * eig.vectors.col(top);
  const double cutoff = 1e-12 * x.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (std::abs(x(i)) > cutoff) {
      x *= std::conj(x(i)) / std::abs(x(i));
      x(i) = std::abs(x(i));
      break;
    }
  }
  return x;
}

double phase_aligned_distance(const CVector& estimate, const CVector& truth) {
  if (estimate.size() != truth.size()) throw std::invalid_argument("vector lengths differ");
  // The optimal phase aligns <estimate, truth> with the positive real axis.
  const Complex overlap = estimate.dot(truth);
  const Complex phase = std::abs(overlap) > 0.0 ? overlap / std::abs(overlap) : Complex(1.0);
  return (phase * estimate - truth).norm();
}

double operator_norm_squared(const MeasurementEnsemble& e, bool hermitian, int iterations) {
  if (iterations < 1) throw std::invalid_argument("power iteration count must be >= 1");
  Rng rng(0x9e3779b97f4a7c15ULL);
  CMatrix z = gaussian_complex(e.n1(), e.n2(), rng);
  if (hermitian) z = hermitian_part(z);
  z /= z.norm();
  double estimate = 0.0;
  for (int it = 0; it < iterations; ++it) {
    CMatrix next = adjoint(e, lrlab::apply(e, z));
    if (hermitian) next = hermitian_part(next);
    const double norm = next.norm();
    if (norm == 0.0) return 0.0;
    const double previous = estimate;
    estimate = norm;
    z = next / norm;
    if (it > 10 && std::abs(estimate - previous) <= 1e-10 * estimate) break;
  }
  // Power iteration approaches from below; a small margin keeps 1/L a safe step.
  return 1.02 * estimate;
}

}  // namespace lrlab
