#include "mcsec/design.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <string>

namespace mcsec {

namespace {

// Substream tags so the bounded-error designer consumes the same
// initialization draws as the plain designer (their tau = 0 runs must agree
// bit-for-bit).
constexpr std::uint64_t kInitStream = 0x101;
constexpr std::uint64_t kDeltaStream = 0x202;

ComplexMatrix identity(int n) { return ComplexMatrix::Identity(n, n); }

/// Everything the multiplier iteration needs that stays fixed while R and E
/// are held: per-BS quadratic blocks, cross-BS coupling blocks and the
/// lambda-independent right-hand sides of the precoder stationarity system.
struct MultiplierContext {
  const DesignProblem* prob = nullptr;
  int K_T = 0, K_R = 0, K_E = 0, N_T = 0, N_s = 0;
  double sz2 = 0.0;

  // Y[t][l] = R_l C_hat[t][l], Z[t][e] = E_e G_hat[t][e]  (N_s x N_T).
  std::vector<std::vector<ComplexMatrix>> Y, Z;
  // AN shaping held fixed across multiplier evaluations so the eavesdropper
  // rows stay smooth in the multipliers; refreshed once per solve.
  std::vector<ComplexMatrix> W_fixed;
  // P[t][t'] = sum_l Y[t][l]^H Y[t'][l]; Q[e][t][t'] likewise from Z.
  std::vector<std::vector<ComplexMatrix>> P;
  std::vector<std::vector<std::vector<ComplexMatrix>>> Q;
  std::vector<ComplexMatrix> rhs0;                // sum_l C^H R^H
  std::vector<std::vector<ComplexMatrix>> rhs_e;  // [t][e] = G^H E^H
  RealVector chi_l_scalar;  // per t: chi_l * sum_l s_tl tr(R_l R_l^H)
  RealMatrix chi_e_scalar;  // (t, e): chi_e * s_te tr(E_e E_e^H)
  RealVector filter_energy_e;  // tr(E_e E_e^H)
  RealVector eve_noise_term;   // sigma_ne^2 tr(E_e E_e^H)
  // Tiny fixed Tikhonov term on the stationarity diagonal. It keeps the
  // precoder a continuous function of the multipliers across the boundary
  // where slack rows would otherwise make the system exactly singular (the
  // minimum-norm solution and the vanishing-multiplier limit differ there),
  // at the price of a proximal bias far below the feasibility tolerances.
  double prox_floor = 0.0;

  void build(const DesignProblem& p, const TransceiverSolution& sol) {
    prob = &p;
    const SystemDims& d = p.dims;
    K_T = d.K_T;
    K_R = d.K_R;
    K_E = d.K_E;
    N_T = d.N_T;
    N_s = d.N_s;
    sz2 = d.sigma_z_sq();

    Y.assign(K_T, std::vector<ComplexMatrix>(K_R));
    Z.assign(K_T, std::vector<ComplexMatrix>(std::max(K_E, 0)));
    for (int t = 0; t < K_T; ++t) {
      for (int l = 0; l < K_R; ++l)
        Y[t][l].noalias() = sol.R[l] * p.channels.C_hat[t][l];
      for (int e = 0; e < K_E; ++e)
        Z[t][e].noalias() = sol.E[e] * p.channels.G_hat[t][e];
    }
    W_fixed = sol.W;
    for (int t = 0; t < K_T; ++t) {
      const double n = W_fixed[t].norm();
      if (n > 0)
        W_fixed[t] /= n;
      else
        W_fixed[t] = identity(N_T) / std::sqrt(double(N_T));
    }

    P.assign(K_T, std::vector<ComplexMatrix>(K_T));
    for (int t = 0; t < K_T; ++t)
      for (int tp = 0; tp < K_T; ++tp) {
        ComplexMatrix acc = ComplexMatrix::Zero(N_T, N_T);
        for (int l = 0; l < K_R; ++l)
          acc.noalias() += Y[t][l].adjoint() * Y[tp][l];
        P[t][tp] = std::move(acc);
      }
    prox_floor = 0.0;
    for (int t = 0; t < K_T; ++t)
      prox_floor += P[t][t].real().trace() / double(N_T);
    prox_floor = 1e-8 * std::max(prox_floor / double(K_T), 1e-12);

    Q.assign(std::max(K_E, 0),
             std::vector<std::vector<ComplexMatrix>>(
                 K_T, std::vector<ComplexMatrix>(K_T)));
    for (int e = 0; e < K_E; ++e)
      for (int t = 0; t < K_T; ++t)
        for (int tp = 0; tp < K_T; ++tp)
          Q[e][t][tp].noalias() = Z[t][e].adjoint() * Z[tp][e];

    rhs0.assign(K_T, ComplexMatrix());
    rhs_e.assign(K_T, std::vector<ComplexMatrix>(std::max(K_E, 0)));
    for (int t = 0; t < K_T; ++t) {
      ComplexMatrix acc = ComplexMatrix::Zero(N_T, N_s);
      for (int l = 0; l < K_R; ++l)
        acc.noalias() += p.channels.C_hat[t][l].adjoint() * sol.R[l].adjoint();
      rhs0[t] = std::move(acc);
      for (int e = 0; e < K_E; ++e)
        rhs_e[t][e].noalias() =
            p.channels.G_hat[t][e].adjoint() * sol.E[e].adjoint();
    }

    chi_l_scalar = RealVector::Zero(K_T);
    for (int t = 0; t < K_T; ++t) {
      double acc = 0.0;
      for (int l = 0; l < K_R; ++l)
        acc += p.u.s_tl(t, l) * sol.R[l].squaredNorm();
      chi_l_scalar(t) = double(p.flags.chi_l) * acc;
    }
    chi_e_scalar = RealMatrix::Zero(K_T, std::max(K_E, 0));
    filter_energy_e = RealVector::Zero(std::max(K_E, 0));
    eve_noise_term = RealVector::Zero(std::max(K_E, 0));
    for (int e = 0; e < K_E; ++e) {
      filter_energy_e(e) = sol.E[e].squaredNorm();
      eve_noise_term(e) =
          d.sigma_ne(e) * d.sigma_ne(e) * filter_energy_e(e);
      for (int t = 0; t < K_T; ++t)
        chi_e_scalar(t, e) =
            double(p.flags.chi_e) * p.u.s_te(t, e) * filter_energy_e(e);
    }
  }

  ComplexMatrix a_t(const RealVector& lambda_e, double lambda_t, int t) const {
    ComplexMatrix a = P[t][t];
    double diag = chi_l_scalar(t) + lambda_t;
    for (int e = 0; e < K_E; ++e) {
      a.noalias() -= lambda_e(e) * Q[e][t][t];
      diag -= lambda_e(e) * chi_e_scalar(t, e);
    }
    a += diag * identity(N_T);
    return a;
  }

  /// Evaluate the full stationarity state at the given multipliers: joint
  /// precoder solve, AN shaping, per-eve MSE and per-BS power.
  struct Eval {
    std::vector<ComplexMatrix> V, W;
    RealVector eps_e;
    RealVector power;
  };

  Eval evaluate(const RealVector& lambda_e, const RealVector& lambda_t) const {
    const SystemDims& d = prob->dims;
    Eval out;

    // Joint system over all BSs: diagonal blocks A_t, off-diagonal coupling
    // through the users' (and eves') effective channels.
    ComplexMatrix m = ComplexMatrix::Zero(K_T * N_T, K_T * N_T);
    ComplexMatrix rhs = ComplexMatrix::Zero(K_T * N_T, N_s);
    for (int t = 0; t < K_T; ++t) {
      for (int tp = 0; tp < K_T; ++tp) {
        ComplexMatrix block = P[t][tp];
        for (int e = 0; e < K_E; ++e)
          block.noalias() -= lambda_e(e) * Q[e][t][tp];
        if (tp == t) {
          double diag = chi_l_scalar(t) + lambda_t(t) + prox_floor;
          for (int e = 0; e < K_E; ++e)
            diag -= lambda_e(e) * chi_e_scalar(t, e);
          block += diag * identity(N_T);
        }
        m.block(t * N_T, tp * N_T, N_T, N_T) = block;
      }
      ComplexMatrix r = rhs0[t];
      for (int e = 0; e < K_E; ++e)
        r.noalias() -= lambda_e(e) * rhs_e[t][e];
      rhs.block(t * N_T, 0, N_T, N_s) = r;
    }
    // The multipliers are dual-feasible only while the joint quadratic form
    // stays positive semidefinite; past that boundary the stationary point
    // is a saddle and the Lagrangian is unbounded below, so the evaluation
    // must fail and send the caller back inside the region. On the boundary
    // itself (slack rows with fewer streams than antennas) the right-hand
    // side stays in the range and the minimum-norm solution is the limit of
    // the interior solves.
    const ComplexMatrix msym = 0.5 * (m + m.adjoint().eval());
    ComplexMatrix v_stack;
    Eigen::LLT<ComplexMatrix> llt(msym);
    bool solved = false;
    if (llt.info() == Eigen::Success) {
      v_stack = llt.solve(rhs);
      solved = v_stack.allFinite() &&
               (msym * v_stack - rhs).norm() <= 1e-6 * std::max(1.0, rhs.norm());
    }
    if (!solved) {
      // Not (numerically) positive definite: classify. Semidefinite with the
      // right-hand side in range has a minimum-norm solution (the limit of
      // the interior solves); anything indefinite or inconsistent is outside
      // the region.
      Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(msym);
      if (es.info() != Eigen::Success)
        throw SingularMatrixError(
            "stationarity solve: eigendecomposition failed");
      const Eigen::VectorXd eig = es.eigenvalues();
      const double eig_max = std::max(eig.cwiseAbs().maxCoeff(), 1e-300);
      if (eig.minCoeff() < -1e-9 * eig_max)
        throw SingularMatrixError(
            "stationarity solve: multipliers leave the positive semidefinite "
            "region");
      const double clip = 1e-12 * eig_max;
      ComplexMatrix coef = es.eigenvectors().adjoint() * rhs;
      for (Eigen::Index i = 0; i < eig.size(); ++i)
        coef.row(i) *= (eig(i) > clip ? 1.0 / eig(i) : 0.0);
      v_stack = es.eigenvectors() * coef;
      if (!v_stack.allFinite() ||
          (msym * v_stack - rhs).norm() > 1e-8 * std::max(1.0, rhs.norm()))
        throw SingularMatrixError(
            "stationarity solve: right-hand side outside the range of a "
            "singular system");
    }

    out.V.resize(K_T);
    for (int t = 0; t < K_T; ++t)
      out.V[t] = v_stack.block(t * N_T, 0, N_T, N_s);
    out.W = W_fixed;
    out.power = powers(out.V, out.W);
    out.eps_e = eve_mse(out.V, out.W);
    return out;
  }

  RealVector powers(const std::vector<ComplexMatrix>& V,
                    const std::vector<ComplexMatrix>& W) const {
    RealVector p = RealVector::Zero(K_T);
    for (int t = 0; t < K_T; ++t)
      p(t) = transmit_power(V[t], W[t], prob->dims.sigma_z);
    return p;
  }

  RealVector eve_mse(const std::vector<ComplexMatrix>& V,
                     const std::vector<ComplexMatrix>& W) const {
    RealVector eps = RealVector::Zero(std::max(K_E, 0));
    for (int e = 0; e < K_E; ++e) {
      // Same closed form as mse_eavesdropper, using the cached Z blocks.
      ComplexMatrix ef = ComplexMatrix::Zero(N_s, N_s);
      for (int t = 0; t < K_T; ++t) ef.noalias() += Z[t][e] * V[t];
      double acc = double(N_s) - 2.0 * ef.trace().real() + ef.squaredNorm();
      double an = 0.0, robust = 0.0;
      for (int t = 0; t < K_T; ++t) {
        an += (Z[t][e] * W[t]).squaredNorm();
        robust += chi_e_scalar(t, e) *
                  (V[t].squaredNorm() + sz2 * W[t].squaredNorm());
      }
      eps(e) = acc + sz2 * an + eve_noise_term(e) + robust;
    }
    return eps;
  }
};

/// Scaled residual row tolerances: eve rows are O(1), power rows scale with
/// the budget.
struct ResidualScales {
  RealVector eve;    // K_E
  RealVector power;  // K_T
};

ResidualScales residual_scales(const SystemDims& d) {
  ResidualScales s;
  s.eve = RealVector::Constant(std::max(d.K_E, 0), std::max(1.0, d.Gamma));
  s.power = RealVector::Constant(d.K_T, std::max(1.0, d.P_T));
  return s;
}

/// Options for the scalar solve of one complementary-slackness row.
struct RowOpts {
  double tol = 1e-6;    // residual acceptance band
  double seed = 1e-4;   // first probe when the warm start sits at zero
  double micro = 1e-16; // probes below this snap to exactly zero
  double width_rel = 1e-5;  // bracket width exit, relative to its top end
  bool throw_low = true;        // unevaluable side: small x (else large x)
  bool detect_saturation = false;  // residual may plateau short of zero
  // Called once when the bracketing march hands over to refinement, so the
  // evaluation can raise its own accuracy where the root is actually read.
  std::function<void()> on_refine;
};

/// Scalar solve of one KKT row with residual f nonincreasing in x >= 0
/// (rows whose residual grows in their multiplier pass its negation). The
/// sought point is f(x) = 0, or x = 0 when even f(0) <= tol (slack row).
/// `eval(x, ok)` commits the probed state on success; `ok = false` marks a
/// point outside the evaluable region, which lies on the small-x side when
/// `throw_low` (vanishing regularization) and on the large-x side otherwise
/// (multiplier about to leave the dual-feasible region). `left()` gates
/// every call on the remaining evaluation budget. The committed state on
/// return is the last successful evaluation, which is the returned point
/// except when the budget died first.
///
/// Phase 1 marches from the warm start by secant extrapolation clamped to
/// a decade per step, so small root drifts cost two or three evaluations
/// while multi-decade escalation leftovers still collapse quickly. Phase 2
/// refines the bracket by regula falsi, switching to geometric bisection
/// across wide or half-unevaluable spans.
template <class Eval, class Left>
double solve_kkt_row(double x0, double f0, Eval&& eval, Left&& left,
                     const RowOpts& o, bool* saturated_out) {
  double lo = 0.0, hi = 0.0, f_lo = 0.0, f_hi = 0.0;
  bool have_lo = false, have_hi = false, lo_eval = false, hi_eval = false;
  double x = x0;

  const bool up = f0 > 0.0;
  if (up) {
    lo = x0;
    f_lo = f0;
    have_lo = true;
    lo_eval = true;
  } else {
    hi = x0;
    f_hi = f0;
    have_hi = true;
    hi_eval = true;
  }
  double xp = x0, fp = f0;
  double best_f = f0, best_x = x0;
  int flat = 0;
  double xn = up ? std::max(1.4 * x0, o.seed) : 0.7 * x0;
  if (!up && xn < o.micro) xn = 0.0;
  for (int it = 0; it < 60 && !(have_lo && have_hi) && left(); ++it) {
    bool ok = false;
    const double f = eval(xn, ok);
    if (!ok) {
      if (o.throw_low) {
        lo = xn;
        have_lo = true;
        lo_eval = false;
      } else {
        hi = xn;
        have_hi = true;
        hi_eval = false;
      }
      break;
    }
    x = xn;
    if (std::abs(f) <= o.tol) return xn;
    if (f > 0) {
      lo = xn;
      f_lo = f;
      have_lo = true;
      lo_eval = true;
    } else {
      hi = xn;
      f_hi = f;
      have_hi = true;
      hi_eval = true;
    }
    if ((f > 0) != up) break;  // crossed: bracket complete
    if (xn == 0.0) return 0.0;  // residual satisfied on the whole axis
    if (o.detect_saturation && up) {
      // Progress means the residual keeps falling toward zero.
      if (f < best_f - 1e-10)
        flat = 0;
      else
        ++flat;
      if (f < best_f) {
        best_f = f;
        best_x = xn;
      }
      if (flat >= 3 || xn > 1e12 * std::max(1.0, o.seed)) {
        bool ok2 = false;
        eval(best_x, ok2);
        if (saturated_out) *saturated_out = true;
        return best_x;
      }
    } else if (up && xn > 1e14 * std::max(1.0, o.seed)) {
      break;  // numerically unreasonable; settle by refinement
    }
    double xs;
    if (std::abs(f - fp) > 1e-300)
      xs = xn - f * (xn - xp) / (f - fp);
    else
      xs = up ? 4.0 * xn : 0.25 * xn;
    if (up) {
      xs = std::min(std::max(xs, 1.4 * xn), 10.0 * xn);
    } else {
      xs = std::max(std::min(xs, 0.7 * xn), 0.1 * xn);
      if (xs < o.micro) xs = 0.0;
    }
    xp = xn;
    fp = f;
    xn = xs;
  }

  if (!(have_lo && have_hi)) return x;
  if (o.on_refine) o.on_refine();

  for (int it = 0; it < 45 && left(); ++it) {
    const double width = hi - lo;
    if (width <= std::max(o.width_rel * std::max(hi, o.seed), 1e-15)) break;
    double xm;
    if (lo_eval && hi_eval && f_lo > f_hi) {
      xm = lo + f_lo * width / (f_lo - f_hi);  // regula falsi
      const double guard = 0.05 * width;
      xm = std::min(std::max(xm, lo + guard), hi - guard);
    } else if (lo <= 0.0) {
      xm = 1e-3 * hi;  // unknown span: collapse exponents fast
    } else if (hi > 100.0 * lo) {
      xm = std::sqrt(lo * hi);  // geometric bisection over wide spans
    } else {
      xm = lo + 0.5 * width;
    }
    bool ok = false;
    const double f = eval(xm, ok);
    if (!ok) {
      if (o.throw_low) {
        lo = xm;
        lo_eval = false;
      } else {
        hi = xm;
        hi_eval = false;
      }
      continue;
    }
    x = xm;
    if (std::abs(f) <= o.tol) return xm;
    if (f > 0) {
      lo = xm;
      f_lo = f;
      lo_eval = true;
    } else {
      hi = xm;
      f_hi = f;
      hi_eval = true;
    }
  }
  // Settle on the side that satisfies the constraint (f <= 0) when it is
  // evaluable, otherwise on the violated-but-real side.
  if (hi_eval) {
    bool ok = false;
    eval(hi, ok);
    if (ok) return hi;
  }
  if (lo_eval) {
    bool ok = false;
    eval(lo, ok);
    if (ok) return lo;
  }
  return x;
}

}  // namespace

ComplexMatrix build_A_t(const TransceiverSolution& sol, const ChannelSet& ch,
                        const SystemDims& dims, const RobustFlags& flags,
                        const UncertaintyInput& u, const RealVector& lambda_e,
                        double lambda_t_prime, int t) {
  if (t < 0 || t >= dims.K_T)
    throw ShapeMismatchError("build_A_t: BS index out of range");
  if (lambda_e.size() != dims.K_E)
    throw ShapeMismatchError("build_A_t: lambda_e must have K_E entries");
  ComplexMatrix a = ComplexMatrix::Zero(dims.N_T, dims.N_T);
  double diag = lambda_t_prime;
  for (int l = 0; l < dims.K_R; ++l) {
    const ComplexMatrix rc = sol.R[l] * ch.C_hat[t][l];
    a.noalias() += rc.adjoint() * rc;
    diag += double(flags.chi_l) * u.s_tl(t, l) * sol.R[l].squaredNorm();
  }
  for (int e = 0; e < dims.K_E; ++e) {
    const ComplexMatrix eg = sol.E[e] * ch.G_hat[t][e];
    a.noalias() -= lambda_e(e) * (eg.adjoint() * eg);
    diag -= lambda_e(e) * double(flags.chi_e) * u.s_te(t, e) *
            sol.E[e].squaredNorm();
  }
  a += diag * identity(dims.N_T);
  // The assembly is Hermitian by construction up to rounding; symmetrize so
  // downstream factorizations see an exactly Hermitian matrix.
  return 0.5 * (a + a.adjoint().eval());
}

ComplexMatrix update_precoder(const DesignProblem& prob,
                              const TransceiverSolution& sol, int t) {
  const SystemDims& d = prob.dims;
  const ComplexMatrix a = build_A_t(sol, prob.channels, d, prob.flags, prob.u,
                                    sol.lambda_e, sol.lambda_t(t), t);
  ComplexMatrix rhs = ComplexMatrix::Zero(d.N_T, d.N_s);
  for (int l = 0; l < d.K_R; ++l)
    rhs.noalias() += prob.channels.C_hat[t][l].adjoint() * sol.R[l].adjoint();
  for (int e = 0; e < d.K_E; ++e)
    rhs.noalias() -= sol.lambda_e(e) *
                     (prob.channels.G_hat[t][e].adjoint() * sol.E[e].adjoint());
  // Coupling to the other BSs through the shared data streams.
  for (int tp = 0; tp < d.K_T; ++tp) {
    if (tp == t) continue;
    ComplexMatrix b = ComplexMatrix::Zero(d.N_T, d.N_T);
    for (int l = 0; l < d.K_R; ++l) {
      const ComplexMatrix rc_t = sol.R[l] * prob.channels.C_hat[t][l];
      const ComplexMatrix rc_tp = sol.R[l] * prob.channels.C_hat[tp][l];
      b.noalias() += rc_t.adjoint() * rc_tp;
    }
    for (int e = 0; e < d.K_E; ++e) {
      const ComplexMatrix eg_t = sol.E[e] * prob.channels.G_hat[t][e];
      const ComplexMatrix eg_tp = sol.E[e] * prob.channels.G_hat[tp][e];
      b.noalias() -= sol.lambda_e(e) * (eg_t.adjoint() * eg_tp);
    }
    rhs.noalias() -= b * sol.V[tp];
  }
  return hermitian_solve(a, rhs);
}

ComplexMatrix update_receiver(const DesignProblem& prob,
                              const TransceiverSolution& sol, int l) {
  const SystemDims& d = prob.dims;
  const double sz2 = d.sigma_z_sq();
  const ComplexMatrix f = effective_channel_legit(sol, prob.channels, l);
  ComplexMatrix q = f * f.adjoint();
  double diag = d.sigma_nl(l) * d.sigma_nl(l);
  for (int t = 0; t < d.K_T; ++t) {
    const ComplexMatrix cw = prob.channels.C_hat[t][l] * sol.W[t];
    q.noalias() += sz2 * (cw * cw.adjoint());
    diag += double(prob.flags.chi_l) * prob.u.s_tl(t, l) *
            (sol.V[t].squaredNorm() + sz2 * sol.W[t].squaredNorm());
  }
  q += diag * identity(d.N_R);
  // R = F^H Q^{-1} via Q X = F, R = X^H (Q is Hermitian).
  return hermitian_solve(q, f).adjoint();
}

NullSpaceInfo update_an_shaping_info(const DesignProblem& prob,
                                     const TransceiverSolution& sol, int t) {
  const ComplexMatrix a =
      build_A_t(sol, prob.channels, prob.dims, prob.flags, prob.u,
                sol.lambda_e, sol.lambda_t(t), t);
  // Inverse-weighted shaping: a continuous matrix function of A_t, so the
  // shaping cannot jump when the design state moves — unlike a hard
  // null-space cut, whose selected directions flip around whenever A_t has
  // no clean null space (small antenna counts leave none). Eigendirections
  // with (near-)zero or negative eigenvalue receive the dominant weight,
  // which reproduces the null-space projector whenever one exists.
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(a);
  if (es.info() != Eigen::Success)
    throw NumericalError("update_an_shaping: eigendecomposition failed");
  const RealVector mu = es.eigenvalues();
  const double mu_max = std::max(mu.cwiseAbs().maxCoeff(), 1e-300);
  const double delta = 1e-10 * mu_max;
  RealVector w(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i)
    w(i) = 1.0 / (std::max(mu(i), 0.0) + delta);
  w /= w.maxCoeff();  // scale-free; heads off overflow before normalizing
  const ComplexMatrix shaped =
      es.eigenvectors() * w.asDiagonal() * es.eigenvectors().adjoint();

  NullSpaceInfo info;
  info.projector = shaped / shaped.norm();
  const double cut = prob.null_space_tol * mu_max;
  info.retained_dimension = 0;
  info.retained_sigma = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i)
    if (std::abs(mu(i)) <= cut) {
      ++info.retained_dimension;
      info.retained_sigma = std::max(info.retained_sigma, std::abs(mu(i)));
    }
  info.used_fallback = info.retained_dimension == 0;
  if (info.used_fallback) info.retained_sigma = mu.cwiseAbs().minCoeff();
  return info;
}

ComplexMatrix update_an_shaping(const DesignProblem& prob,
                                const TransceiverSolution& sol, int t) {
  return update_an_shaping_info(prob, sol, t).projector;
}

MultiplierOutcome solve_multipliers(const DesignProblem& prob,
                                    TransceiverSolution& sol) {
  const SystemDims& d = prob.dims;
  const int K_T = d.K_T;
  const int K_E = d.K_E;
  static const char* trace_env = std::getenv("MCSEC_TRACE_MULT");
  static const bool trace = trace_env != nullptr;
  static const bool trace_rows = trace && std::atoi(trace_env) >= 2;

  MultiplierContext ctx;
  ctx.build(prob, sol);
  const ResidualScales scales = residual_scales(d);
  const double power_target = d.P_T;
  const double tol = prob.multiplier_tol;

  RealVector lambda_e =
      sol.lambda_e.size() == K_E ? sol.lambda_e : RealVector::Zero(K_E);
  RealVector lambda_t =
      sol.lambda_t.size() == K_T ? sol.lambda_t : RealVector::Zero(K_T);
  lambda_e = lambda_e.cwiseMax(0.0);
  lambda_t = lambda_t.cwiseMax(0.0);

  const int eval_budget = std::max(60 * prob.max_multiplier_iters, 3000);
  int evals = 0;
  auto budget_left = [&]() { return evals < eval_budget; };

  auto power_seed = [&](int t) {
    return std::max(1e-3 * ctx.P[t][t].real().trace() / double(d.N_T), 1e-6);
  };

  // `ev` always reflects the committed multconfiguration; a probe either
  // commits (returns true) or leaves both `ev` and the multipliers alone.
  MultiplierContext::Eval ev;
  MultiplierContext::Eval trial;
  auto probe = [&]() -> bool {
    ++evals;
    try {
      trial = ctx.evaluate(lambda_e, lambda_t);
      return true;
    } catch (const SingularMatrixError&) {
      return false;
    }
  };

  // Make sure the starting point is evaluable (inside the region where the
  // joint quadratic form is positive semidefinite). A warm start is tried
  // verbatim; on failure the power multipliers are raised from a
  // diagonal-scale guess until the system becomes solvable.
  bool started = false;
  for (int attempt = 0; attempt < 60 && !started; ++attempt) {
    if (probe()) {
      ev = trial;
      started = true;
      break;
    }
    for (int t = 0; t < K_T; ++t)
      lambda_t(t) = std::max(lambda_t(t) * 10.0, power_seed(t));
  }
  if (!started)
    throw SingularMatrixError(
        "solve_multipliers: stationarity system singular for every probed "
        "regularization");

  // The best committed configuration seen so far, by scaled infeasibility;
  // restored at the end if later hunting (or exhausting the evaluation
  // budget mid-hunt) leaves the iteration somewhere worse. Ties prefer the
  // most recent state, so a feasible endpoint is never rolled back.
  double best_viol = std::numeric_limits<double>::infinity();
  RealVector best_le = lambda_e, best_lt = lambda_t;
  MultiplierContext::Eval best_ev;
  auto scaled_viol = [&]() -> double {
    double v = 0.0;
    for (int e = 0; e < K_E; ++e)
      v = std::max(v, (d.Gamma - ev.eps_e(e)) / scales.eve(e));
    for (int t = 0; t < K_T; ++t)
      v = std::max(v, (ev.power(t) - power_target) / scales.power(t));
    return std::max(v, 0.0);
  };
  auto remember = [&]() {
    const double v = scaled_viol();
    if (v <= best_viol) {
      best_viol = v;
      best_le = lambda_e;
      best_lt = lambda_t;
      best_ev = ev;
    }
  };
  remember();

  // --- Per-BS power multiplier: scalar root-find in lambda_t(t). --------
  // The budget residual decreases in the own multiplier; an unevaluable
  // point always lies below the root (transmit power grows without bound as
  // the quadratic form approaches the semidefinite boundary), so evaluation
  // failures act as the "above budget" side of the bracket.
  auto eval_power_at = [&](int t, double x, bool& ok) -> double {
    const double keep = lambda_t(t);
    lambda_t(t) = x;
    if (probe()) {
      ev = trial;
      ok = true;
      remember();
      return (ev.power(t) - power_target) / scales.power(t);
    }
    lambda_t(t) = keep;
    ok = false;
    return std::numeric_limits<double>::infinity();
  };

  auto solve_power_row = [&](int t, double tol_mult) -> bool {
    const double x_start = lambda_t(t);
    const double band = tol * tol_mult;
    const double h0 = (ev.power(t) - power_target) / scales.power(t);
    if (h0 <= band && (h0 >= -band || lambda_t(t) == 0.0)) return false;
    RowOpts o;
    o.tol = band;
    o.seed = power_seed(t);
    o.micro = 1e-9 * o.seed;
    o.throw_low = true;  // vanishing regularization can lose definiteness
    solve_kkt_row(
        lambda_t(t), h0,
        [&](double x, bool& ok) { return eval_power_at(t, x, ok); },
        budget_left, o, nullptr);
    return std::abs(lambda_t(t) - x_start) > 1e-10 * std::max(1.0, x_start);
  };

  auto solve_power_family = [&](bool full) {
    // Joint preconditioning: the rows couple strongly through the shared
    // stationarity system, which makes row-by-row sweeps crawl when every
    // budget moves in unison (the common aftermath of an eve-multiplier
    // step). One scalar solve on a common scale factor zeroes the mean
    // residual first; the sweeps then only polish small per-row offsets.
    if (K_T > 1) {
      int n_pos = 0, n_neg = 0, n_act = 0;
      for (int t = 0; t < K_T; ++t) {
        const double h = (ev.power(t) - power_target) / scales.power(t);
        if (lambda_t(t) > 0) ++n_act;
        if (h > tol)
          ++n_pos;
        else if (h < -tol)
          ++n_neg;
      }
      if (n_act == K_T && (n_pos == K_T || n_neg == K_T)) {
        const RealVector base = lambda_t;
        auto eval_scale = [&](double c, bool& ok) -> double {
          const RealVector keep = lambda_t;
          lambda_t = c * base;
          if (probe()) {
            ev = trial;
            remember();
            ok = true;
            double acc = 0.0;
            for (int t = 0; t < K_T; ++t)
              acc += (ev.power(t) - power_target) / scales.power(t);
            return acc / double(K_T);
          }
          lambda_t = keep;
          ok = false;
          return std::numeric_limits<double>::infinity();
        };
        double f0 = 0.0;
        for (int t = 0; t < K_T; ++t)
          f0 += (ev.power(t) - power_target) / scales.power(t);
        f0 /= double(K_T);
        RowOpts o;
        o.tol = 3.0 * tol;
        o.seed = 1.0;
        o.micro = 1e-12;
        o.throw_low = true;  // scaling to zero removes the regularization
        if (std::abs(f0) > o.tol)
          solve_kkt_row(1.0, f0, eval_scale, budget_left, o, nullptr);
      }
    }
    // The quick variant only caps the effort, not the accuracy: the eve rows
    // read their residuals through this re-balance, and any gap between the
    // accuracy used under their probes and the accuracy restored at sweep
    // boundaries makes the two disagree about feasibility near the root,
    // which limit-cycles the sweeps.
    const double band = tol;

    // Damped Newton in log-multiplier space on the active rows. Sequential
    // row solves stall when the rows are anti-coupled (one budget up pushes
    // another down with near-unit gain), which the joint Jacobian absorbs at
    // K_T+1 evaluations per step. Falls back to row sweeps on any hiccup.
    bool newton_clean = true;
    const int newton_iters = full ? 8 : 4;
    auto try_point = [&](const RealVector& lt) -> bool {
      const RealVector keep = lambda_t;
      lambda_t = lt;
      if (probe()) {
        ev = trial;
        remember();
        return true;
      }
      lambda_t = keep;
      return false;
    };
    auto resid_at = [&](int t) {
      return (ev.power(t) - power_target) / scales.power(t);
    };
    for (int nit = 0; nit < newton_iters && budget_left(); ++nit) {
      RealVector h(K_T);
      double hmax = 0.0;
      bool all_active = true;
      for (int t = 0; t < K_T; ++t) {
        h(t) = resid_at(t);
        if (lambda_t(t) > 0.0 || h(t) > band)
          hmax = std::max(hmax, std::abs(h(t)));
        if (lambda_t(t) <= 0.0) all_active = false;
      }
      if (hmax <= band) return;
      if (!all_active) {  // activation handled by the scalar row logic
        newton_clean = false;
        break;
      }
      const RealVector base = lambda_t;
      const double dlog = 1e-3;
      RealMatrix jac(K_T, K_T);
      bool jac_ok = true;
      for (int j = 0; j < K_T && jac_ok && budget_left(); ++j) {
        RealVector pert = base;
        pert(j) *= std::exp(dlog);
        if (!try_point(pert)) {
          jac_ok = false;
          break;
        }
        for (int t = 0; t < K_T; ++t) jac(t, j) = (resid_at(t) - h(t)) / dlog;
      }
      if (!jac_ok || !budget_left()) {
        newton_clean = false;
        if (!try_point(base)) lambda_t = base;  // leave a consistent state
        break;
      }
      Eigen::FullPivLU<RealMatrix> lu(jac);
      if (!lu.isInvertible()) {
        newton_clean = false;
        if (!try_point(base)) lambda_t = base;
        break;
      }
      RealVector step = lu.solve(-h);
      for (int t = 0; t < K_T; ++t)
        step(t) = std::clamp(step(t), -2.302585092994046, 2.302585092994046);
      bool accepted = false;
      for (int bt = 0; bt < 3 && budget_left(); ++bt) {
        RealVector cand = base;
        for (int t = 0; t < K_T; ++t) cand(t) *= std::exp(step(t));
        if (try_point(cand)) {
          double hnew = 0.0;
          for (int t = 0; t < K_T; ++t)
            hnew = std::max(hnew, std::abs(resid_at(t)));
          if (hnew < 0.9 * hmax) {
            accepted = true;
            break;
          }
        }
        step *= 0.5;
      }
      if (!accepted) {
        newton_clean = false;
        if (!try_point(base)) lambda_t = base;
        break;
      }
    }

    double hend = 0.0;
    for (int t = 0; t < K_T; ++t)
      if (lambda_t(t) > 0.0 || resid_at(t) > band)
        hend = std::max(hend, std::abs(resid_at(t)));
    if (newton_clean && hend <= band) return;

    const int max_sweeps = full ? 12 : 4;
    for (int sweep = 0; sweep < max_sweeps && budget_left(); ++sweep) {
      bool moved = false;
      for (int t = 0; t < K_T && budget_left(); ++t)
        if (solve_power_row(t, 1.0)) moved = true;
      if (!moved) break;
    }
  };

  // --- Per-eve multiplier: scalar root-find in lambda_e(e). -------------
  // Every probe re-balances the power family so the eavesdropper MSE is
  // read on a budget-respecting trajectory, along which it increases in the
  // own multiplier until it saturates at the power-limited supremum.
  bool eve_probe_full = false;  // family accuracy under the eve probes
  auto eval_eve_at = [&](int e, double x, bool& ok) -> double {
    const double keep = lambda_e(e);
    const RealVector keep_t = lambda_t;
    lambda_e(e) = x;
    bool fine = probe();
    for (int a = 0; a < 40 && !fine && budget_left(); ++a) {
      for (int t = 0; t < K_T; ++t)
        lambda_t(t) = std::max(lambda_t(t) * 10.0, power_seed(t));
      fine = probe();
    }
    if (!fine) {
      lambda_e(e) = keep;
      lambda_t = keep_t;
      ok = false;
      return -std::numeric_limits<double>::infinity();
    }
    ev = trial;
    remember();
    solve_power_family(eve_probe_full);
    ok = true;
    return (ev.eps_e(e) - d.Gamma) / scales.eve(e);
  };

  bool eve_saturated = false;
  auto solve_eve_row = [&](int e) -> bool {
    const double x_start = lambda_e(e);
    const double g0 = (ev.eps_e(e) - d.Gamma) / scales.eve(e);
    if (g0 >= -tol && (g0 <= tol || lambda_e(e) == 0.0)) return false;
    const int row_cap = evals + 900;
    auto row_left = [&]() { return budget_left() && evals < row_cap; };
    RowOpts o;
    // The residual is read through re-balanced power rows, so its values
    // carry noise at the scale of their tolerance; a tenfold band plus a
    // relative width exit keeps the refinement from chasing that noise.
    // Settling prefers the feasible side, so the band never admits a
    // violated endpoint.
    o.tol = 10.0 * tol;
    o.width_rel = 3e-4;
    o.seed = 1e-4;
    o.micro = 1e-13;
    o.throw_low = false;  // growth exits the dual-feasible region instead
    o.detect_saturation = true;  // the eve MSE can plateau below target
    eve_probe_full = false;
    bool sat = false;
    int probes = 0;
    // The eve residual grows in its own multiplier; hand its negation to
    // the row solver so the residual is nonincreasing like the power rows.
    solve_kkt_row(
        lambda_e(e), -g0,
        [&](double x, bool& ok) {
          ++probes;
          return -eval_eve_at(e, x, ok);
        },
        row_left, o, &sat);
    if (trace_rows)
      std::fprintf(stderr, "[mult] eve-row %d probes=%d\n", e, probes);
    if (sat) {
      eve_saturated = true;
      if (trace)
        std::fprintf(stderr, "[mult] eve %d saturated below target\n", e);
    }
    return std::abs(lambda_e(e) - x_start) > 1e-10 * std::max(1.0, x_start);
  };

  // --- Joint active-set Newton on the complementarity system. ------------
  // Rows: eve floors  c_e = (eps_e - Gamma)/scale_e  and power budgets
  // c_t = (P_T - p_t)/scale_t; the solution satisfies 0 <= lambda ⊥ c >= 0.
  // Classification follows the min-complementarity rule (a row is active
  // when its multiplier exceeds its slack, which captures every violated
  // row); the active rows are then solved together by damped Newton in
  // log-multiplier space with a finite-difference Jacobian, so the strong
  // couplings between rows — power rows move in unison after any eve step,
  // and pairs of rows push against each other with near-unit gain — cost
  // (#active + 1) evaluations per step instead of stalled sweeps. Rows
  // leave the active set by shrinking through a snap threshold. An eve row
  // whose MSE floor is unreachable at any multiplier pins against the step
  // clamp and is frozen + reported instead of chased to infinity.
  const int n_rows = K_E + K_T;
  auto lam_get = [&](int i) {
    return i < K_E ? lambda_e(i) : lambda_t(i - K_E);
  };
  auto lam_set = [&](int i, double v) {
    if (i < K_E)
      lambda_e(i) = v;
    else
      lambda_t(i - K_E) = v;
  };
  auto slack_committed = [&](int i) {
    return i < K_E ? (ev.eps_e(i) - d.Gamma) / scales.eve(i)
                   : (power_target - ev.power(i - K_E)) / scales.power(i - K_E);
  };
  auto slack_trial = [&](int i) {
    return i < K_E
               ? (trial.eps_e(i) - d.Gamma) / scales.eve(i)
               : (power_target - trial.power(i - K_E)) / scales.power(i - K_E);
  };
  auto seed_of = [&](int i) { return i < K_E ? 1e-4 : power_seed(i - K_E); };
  std::vector<char> frozen(n_rows, 0);
  auto merit_from = [&](auto&& slack) {
    double m = 0.0;
    for (int i = 0; i < n_rows; ++i) {
      if (frozen[i]) continue;
      const double c = slack(i);
      m = std::max(m, lam_get(i) > 0.0 ? std::abs(c) : std::max(0.0, -c));
    }
    return m;
  };

  bool eve_saturated_joint = false;
  auto joint_newton = [&]() -> bool {
    std::vector<int> up_clamped(n_rows, 0);
    for (int it = 0; it < 40 && budget_left(); ++it) {
      // Classification + activation. Violated rows enter at a seed value;
      // active rows whose slack exceeds their multiplier drop to zero.
      std::vector<int> act;
      bool reclass_failed = false;
      for (int i = 0; i < n_rows && !reclass_failed; ++i) {
        if (frozen[i]) continue;
        const double c = slack_committed(i);
        const double l = lam_get(i);
        if (l > c) {
          if (l == 0.0) {
            // Activation: find an evaluable seed (eve rows shrink on
            // failure, they leave the dual-feasible region upward; power
            // rows grow, they regularize the system).
            double s = seed_of(i);
            bool on = false;
            for (int a = 0; a < 8 && budget_left(); ++a) {
              lam_set(i, s);
              if (probe()) {
                ev = trial;
                remember();
                on = true;
                break;
              }
              s *= i < K_E ? 0.1 : 10.0;
            }
            if (!on) {
              lam_set(i, 0.0);
              reclass_failed = true;
              break;
            }
          }
          act.push_back(i);
        } else if (l > 0.0 && c > 0.0) {
          // Slack exceeds the multiplier: complementarity wants this row
          // out. Deactivate only if removing it leaves the system solvable
          // and no better-satisfied row pays for it — the raw rule compares
          // quantities in different units, and an eager deactivation here
          // throws the iteration into an activate/deactivate limit cycle.
          const double before = merit_from(slack_committed);
          lam_set(i, 0.0);
          if (probe() && merit_from(slack_trial) <= before + tol) {
            ev = trial;
            remember();
          } else {
            lam_set(i, l);
            act.push_back(i);
          }
        }
      }
      if (reclass_failed) return false;
      const double merit0 = merit_from(slack_committed);
      if (merit0 <= tol) return true;
      if (act.empty() || !budget_left()) return false;

      const int n_act = int(act.size());
      RealVector c0(n_act);
      for (int k = 0; k < n_act; ++k) c0(k) = slack_committed(act[k]);

      // Finite-difference Jacobian in log-multiplier space (probes are not
      // committed; the base state stays in force). Eve rows are perturbed
      // downward — upward can step over the dual-feasibility boundary when
      // the row sits right at it — and power rows upward, which only adds
      // regularization.
      RealMatrix jac(n_act, n_act);
      bool jac_ok = true;
      for (int k = 0; k < n_act && jac_ok && budget_left(); ++k) {
        const int j = act[k];
        const double dlog = j < K_E ? -1e-3 : 1e-3;
        const double keep = lam_get(j);
        lam_set(j, keep * std::exp(dlog));
        if (probe()) {
          for (int r = 0; r < n_act; ++r)
            jac(r, k) = (slack_trial(act[r]) - c0(r)) / dlog;
        } else {
          jac_ok = false;
        }
        lam_set(j, keep);
      }
      if (!jac_ok || !budget_left()) return false;
      Eigen::FullPivLU<RealMatrix> lu(jac);
      if (!lu.isInvertible()) return false;
      RealVector step = lu.solve(-c0);
      const double clamp = 2.302585092994046;  // one decade per iteration
      for (int k = 0; k < n_act; ++k) {
        if (act[k] < K_E && step(k) >= clamp) {
          ++up_clamped[act[k]];
        } else {
          up_clamped[act[k]] = 0;
        }
        step(k) = std::clamp(step(k), -clamp, clamp);
      }

      // An eve row pinned against the up-clamp with no residual progress
      // cannot reach its floor: freeze it at the best committed point.
      bool froze = false;
      for (int k = 0; k < n_act; ++k) {
        const int i = act[k];
        if (i < K_E && up_clamped[i] >= 6) {
          frozen[i] = 1;
          eve_saturated_joint = true;
          froze = true;
          if (trace)
            std::fprintf(stderr, "[mult] joint: eve %d saturated\n", i);
        }
      }
      if (froze) continue;  // re-classify without the frozen rows

      const RealVector base_le = lambda_e, base_lt = lambda_t;
      bool accepted = false;
      for (int bt = 0; bt < 4 && budget_left(); ++bt) {
        for (int k = 0; k < n_act; ++k)
          lam_set(act[k], lam_get(act[k]) * std::exp(step(k)));
        if (probe()) {
          const double merit1 = merit_from(slack_trial);
          if (merit1 <= tol || merit1 <= (1.0 - 1e-3) * merit0) {
            ev = trial;
            remember();
            accepted = true;
            break;
          }
        }
        lambda_e = base_le;
        lambda_t = base_lt;
        step *= 0.5;
      }
      if (!accepted) return false;

      // Snap microscopic multipliers to exactly zero (complementarity
      // resolves them as inactive; log steps alone never reach zero).
      for (int k = 0; k < n_act; ++k) {
        const int i = act[k];
        const double l = lam_get(i);
        if (l > 0.0 && l < 1e-9 * seed_of(i)) {
          lam_set(i, 0.0);
          if (!probe()) {
            lam_set(i, l);
          } else {
            ev = trial;
            remember();
          }
        }
      }
      if (trace_rows)
        std::fprintf(stderr, "[mult] joint it=%d act=%d merit=%.3e evals=%d\n",
                     it, n_act, merit_from(slack_committed), evals);
    }
    return merit_from(slack_committed) <= tol;
  };

  // --- Orchestration: joint Newton first, scalar rows as fallback. -------
  // The AN shaping stays frozen throughout, so the reported eavesdropper
  // rows are exactly the ones the multipliers were solved against; the
  // shaping itself is refreshed by the surrounding block iteration.
  const bool joint_ok = joint_newton();
  if (joint_ok) eve_saturated = eve_saturated_joint;
  if (trace_rows)
    std::fprintf(stderr, "[mult] joint done ok=%d evals=%d\n", int(joint_ok),
                 evals);
  if (!joint_ok && budget_left()) {
    solve_power_family(true);
    if (trace_rows)
      std::fprintf(stderr, "[mult] family0 evals=%d\n", evals);
    for (int sweep = 0; sweep < 4 && K_E > 0 && budget_left(); ++sweep) {
      bool moved = false;
      for (int e = 0; e < K_E && budget_left(); ++e) {
        const int before = evals;
        const bool m = solve_eve_row(e);
        if (m) moved = true;
        if (trace_rows)
          std::fprintf(stderr,
                       "[mult] sweep %d eve %d evals+=%d lam=%.3e moved=%d\n",
                       sweep, e, evals - before, lambda_e(e), int(m));
      }
      // Exactness restored before the moved-detection of the next sweep.
      solve_power_family(true);
      if (!moved) break;
    }
  }

  if (scaled_viol() > best_viol + 1e-12) {
    lambda_e = best_le;
    lambda_t = best_lt;
    ev = best_ev;
  }

  if (trace) {
    std::fprintf(stderr, "[mult] done evals=%d lam_e=", evals);
    for (int e = 0; e < K_E; ++e) std::fprintf(stderr, "%.3e ", lambda_e(e));
    std::fprintf(stderr, "lam_t=");
    for (int t = 0; t < K_T; ++t) std::fprintf(stderr, "%.3e ", lambda_t(t));
    std::fprintf(stderr, "\n");
  }

  MultiplierOutcome out;
  out.iterations = evals;

  sol.V = ev.V;
  sol.W = ev.W;
  sol.lambda_e = lambda_e;
  sol.lambda_t = lambda_t;

  // Convergence is judged on final feasibility in the scaled metric of the
  // solve; the reported raw residual additionally tracks how far rows with
  // a positive multiplier sit from their equalities.
  double raw = 0.0;
  double viol = 0.0;
  for (int e = 0; e < K_E; ++e) {
    const double dev = ev.eps_e(e) - d.Gamma;
    raw = std::max(raw, lambda_e(e) > 0 ? std::abs(dev) : std::max(0.0, -dev));
    viol = std::max(viol, std::max(0.0, -dev) / scales.eve(e));
  }
  for (int t = 0; t < K_T; ++t) {
    const double dev = ev.power(t) - power_target;
    raw = std::max(raw, lambda_t(t) > 0 ? std::abs(dev) : std::max(0.0, dev));
    viol = std::max(viol, std::max(0.0, dev) / scales.power(t));
  }
  out.lambda_e = lambda_e;
  out.lambda_t = lambda_t;
  out.residual = raw;
  out.converged = viol <= tol && !eve_saturated;
  return out;
}

TransceiverSolution initial_solution(const DesignProblem& prob, Rng& rng) {
  const SystemDims& d = prob.dims;
  Rng init = rng.substream(kInitStream);
  TransceiverSolution sol = TransceiverSolution::zero(d);
  // Precoders start on the strongest common directions of each BS's stacked
  // user channels (top right singular vectors), scaled inside the budget
  // (AN carries sigma_z^2 once the shaping is unit-norm); the AN shaping
  // starts as a random normalized matrix and is replaced by the first
  // shaping update. A matched start saves the alternating solver the
  // iterations a random precoder spends recovering sensible directions.
  const double v_target =
      std::min(0.9 * d.P_T, std::max(d.P_T - d.sigma_z_sq(), 0.1 * d.P_T));
  for (int t = 0; t < d.K_T; ++t) {
    ComplexMatrix stack(d.K_R * d.N_R, d.N_T);
    for (int l = 0; l < d.K_R; ++l)
      stack.middleRows(Eigen::Index(l) * d.N_R, d.N_R) =
          prob.channels.C_hat[t][l];
    Eigen::JacobiSVD<ComplexMatrix> svd(stack, Eigen::ComputeThinV);
    sol.V[t] = svd.matrixV().leftCols(d.N_s) * std::sqrt(v_target / d.N_s);
    ComplexMatrix w = random_cgaussian(d.N_T, d.N_T, 1.0, init);
    sol.W[t] = w / w.norm();
  }
  sol.lambda_t = RealVector::Zero(d.K_T);  // cold-start marker
  return sol;
}

DesignResult coordinate_descent_from(const DesignProblem& prob,
                                     TransceiverSolution sol) {
  const SystemDims& d = prob.dims;
  d.validate();
  DesignResult res;
  SolverReport& rep = res.report;

  RealVector eps = RealVector::Zero(d.K_R);
  RealVector eps_prev = RealVector::Zero(d.K_R);
  MultiplierOutcome last_mult;

  for (int iter = 1; iter <= prob.max_outer_iters; ++iter) {
    rep.iterations_used = iter;

    std::vector<ComplexMatrix> g_col(d.K_T);
    for (int e = 0; e < d.K_E; ++e) {
      for (int t = 0; t < d.K_T; ++t) g_col[t] = prob.channels.G_hat[t][e];
      sol.E[e] = eve_mmse_filter(sol.V, g_col, d.sigma_ne(e));
    }
    for (int l = 0; l < d.K_R; ++l) sol.R[l] = update_receiver(prob, sol, l);
    // AN shaping step at the incumbent multipliers, damped so the handover
    // between the unjammed and jammed regimes cannot oscillate. The first
    // iteration replaces the initial shaping outright (nothing there worth
    // preserving); the multiplier solve below holds the shaping fixed.
    const double w_damp = iter == 1 ? 1.0 : 0.5;
    for (int t = 0; t < d.K_T; ++t) {
      const ComplexMatrix w_ref = update_an_shaping(prob, sol, t);
      ComplexMatrix blend = (1.0 - w_damp) * sol.W[t] + w_damp * w_ref;
      const double n = blend.norm();
      sol.W[t] = n > 1e-12 ? ComplexMatrix(blend / n) : w_ref;
    }

    last_mult = solve_multipliers(prob, sol);
    if (!last_mult.converged) ++rep.multiplier_failures;

    for (int l = 0; l < d.K_R; ++l)
      eps(l) = mse_legitimate(sol, prob.channels, d, prob.flags, prob.u, l);
    rep.smse_history.push_back(eps.sum());

    if (iter >= 2 && (eps - eps_prev).cwiseAbs().maxCoeff() <= prob.beta &&
        last_mult.converged) {
      rep.converged = true;
      break;
    }
    eps_prev = eps;
  }

  rep.final_smse = eps.sum();
  rep.multiplier_solve_residual = last_mult.residual;
  rep.constraint_residuals = RealVector::Zero(d.K_E + d.K_T);
  for (int e = 0; e < d.K_E; ++e)
    rep.constraint_residuals(e) =
        mse_eavesdropper(sol, prob.channels, d, prob.flags, prob.u, e) -
        d.Gamma;
  for (int t = 0; t < d.K_T; ++t)
    rep.constraint_residuals(d.K_E + t) =
        transmit_power(sol.V[t], sol.W[t], d.sigma_z) - d.P_T;
  res.solution = std::move(sol);
  return res;
}

DesignResult coordinate_descent(const DesignProblem& prob, Rng& rng) {
  return coordinate_descent_from(prob, initial_solution(prob, rng));
}

namespace {

ComplexMatrix worst_case_direction_legit(const TransceiverSolution& sol,
                                         const ChannelSet& ch,
                                         const SystemDims& dims, int t,
                                         int l) {
  const ComplexMatrix f = effective_channel_legit(sol, ch, l);
  const ComplexMatrix& r = sol.R[l];
  ComplexMatrix m = r.adjoint() * (r * f - identity(dims.N_s)) *
                    sol.V[t].adjoint();
  m.noalias() += dims.sigma_z_sq() * (r.adjoint() * r) * ch.C_hat[t][l] *
                 (sol.W[t] * sol.W[t].adjoint());
  return m;
}

ComplexMatrix worst_case_direction_eve(const TransceiverSolution& sol,
                                       const ChannelSet& ch,
                                       const SystemDims& dims, int t, int e) {
  const ComplexMatrix f = effective_channel_eve(sol, ch, e);
  const ComplexMatrix& filt = sol.E[e];
  ComplexMatrix m = filt.adjoint() * (filt * f - identity(dims.N_s)) *
                    sol.V[t].adjoint();
  m.noalias() += dims.sigma_z_sq() * (filt.adjoint() * filt) *
                 ch.G_hat[t][e] * (sol.W[t] * sol.W[t].adjoint());
  return m;
}

}  // namespace

ComplexMatrix worst_case_delta_legitimate(const TransceiverSolution& sol,
                                          const ChannelSet& ch,
                                          const SystemDims& dims, int t,
                                          int l) {
  if (ch.leg_error.kind != ErrorKind::NormBounded)
    throw std::invalid_argument(
        "worst_case_delta_legitimate: legitimate error model must be "
        "norm-bounded");
  const double tau = ch.leg_error.at(t, l);
  const ComplexMatrix m = worst_case_direction_legit(sol, ch, dims, t, l);
  const double norm = m.norm();
  if (tau <= 0.0 || norm <= 1e-300)
    return ComplexMatrix::Zero(dims.N_R, dims.N_T);
  return (std::sqrt(tau) / norm) * m;
}

ComplexMatrix worst_case_delta_eve(const TransceiverSolution& sol,
                                   const ChannelSet& ch,
                                   const SystemDims& dims, int t, int e) {
  if (ch.eve_error.kind != ErrorKind::NormBounded)
    throw std::invalid_argument(
        "worst_case_delta_eve: eavesdropper error model must be norm-bounded");
  const double tau = ch.eve_error.at(t, e);
  const ComplexMatrix m = worst_case_direction_eve(sol, ch, dims, t, e);
  const double norm = m.norm();
  if (tau <= 0.0 || norm <= 1e-300)
    return ComplexMatrix::Zero(dims.N_E, dims.N_T);
  return (-std::sqrt(tau) / norm) * m;
}

NbeResult nbe_design(const DesignProblem& prob, Rng& rng) {
  const SystemDims& d = prob.dims;
  d.validate();
  if (prob.channels.leg_error.kind != ErrorKind::NormBounded ||
      prob.channels.eve_error.kind != ErrorKind::NormBounded)
    throw std::invalid_argument(
        "nbe_design: both error models must be norm-bounded");

  NbeResult res;
  WorstCaseErrors& wc = res.worst;
  wc.Delta_tl.assign(d.K_T, std::vector<ComplexMatrix>(d.K_R));
  wc.Delta_te.assign(d.K_T, std::vector<ComplexMatrix>(std::max(d.K_E, 0)));
  {
    Rng delta_rng = rng.substream(kDeltaStream);
    for (int t = 0; t < d.K_T; ++t) {
      for (int l = 0; l < d.K_R; ++l)
        wc.Delta_tl[t][l] =
            draw_error(ErrorKind::NormBounded, prob.channels.leg_error.at(t, l),
                       d.N_R, d.N_T, delta_rng);
      for (int e = 0; e < d.K_E; ++e)
        wc.Delta_te[t][e] =
            draw_error(ErrorKind::NormBounded, prob.channels.eve_error.at(t, e),
                       d.N_E, d.N_T, delta_rng);
    }
  }

  TransceiverSolution sol = initial_solution(prob, rng);
  DesignProblem inner = prob;
  inner.flags = RobustFlags{1, 1};

  auto budgets_from_deltas = [&]() {
    UncertaintyInput u = UncertaintyInput::zero(d);
    for (int t = 0; t < d.K_T; ++t) {
      for (int l = 0; l < d.K_R; ++l)
        u.s_tl(t, l) = wc.Delta_tl[t][l].squaredNorm();
      for (int e = 0; e < d.K_E; ++e)
        u.s_te(t, e) = wc.Delta_te[t][e].squaredNorm();
    }
    return u;
  };

  SolverReport& rep = res.report;
  RealVector eps = RealVector::Zero(d.K_R);
  RealVector eps_prev = RealVector::Zero(d.K_R);
  DesignResult inner_res;

  for (int outer = 1; outer <= prob.max_robust_iters; ++outer) {
    rep.iterations_used = outer;
    inner.u = budgets_from_deltas();
    inner_res = coordinate_descent_from(inner, std::move(sol));
    sol = std::move(inner_res.solution);
    rep.multiplier_failures += inner_res.report.multiplier_failures;

    for (int t = 0; t < d.K_T; ++t) {
      for (int l = 0; l < d.K_R; ++l)
        wc.Delta_tl[t][l] =
            worst_case_delta_legitimate(sol, prob.channels, d, t, l);
      for (int e = 0; e < d.K_E; ++e)
        wc.Delta_te[t][e] = worst_case_delta_eve(sol, prob.channels, d, t, e);
    }

    inner.u = budgets_from_deltas();
    for (int l = 0; l < d.K_R; ++l)
      eps(l) =
          mse_legitimate(sol, prob.channels, d, inner.flags, inner.u, l);
    rep.smse_history.push_back(eps.sum());

    if (outer >= 2 && (eps - eps_prev).cwiseAbs().maxCoeff() <= prob.beta) {
      rep.converged = true;
      break;
    }
    eps_prev = eps;
  }

  rep.final_smse = eps.sum();
  rep.multiplier_solve_residual = inner_res.report.multiplier_solve_residual;
  rep.constraint_residuals = RealVector::Zero(d.K_E + d.K_T);
  for (int e = 0; e < d.K_E; ++e)
    rep.constraint_residuals(e) =
        mse_eavesdropper(sol, prob.channels, d, inner.flags, inner.u, e) -
        d.Gamma;
  for (int t = 0; t < d.K_T; ++t)
    rep.constraint_residuals(d.K_E + t) =
        transmit_power(sol.V[t], sol.W[t], d.sigma_z) - d.P_T;
  res.solution = std::move(sol);
  return res;
}

double lagrangian(const DesignProblem& prob, const TransceiverSolution& sol) {
  const SystemDims& d = prob.dims;
  double val = 0.0;
  for (int l = 0; l < d.K_R; ++l)
    val += mse_legitimate(sol, prob.channels, d, prob.flags, prob.u, l);
  for (int e = 0; e < d.K_E; ++e)
    val -= sol.lambda_e(e) *
           (mse_eavesdropper(sol, prob.channels, d, prob.flags, prob.u, e) -
            d.Gamma);
  for (int t = 0; t < d.K_T; ++t)
    val += sol.lambda_t(t) *
           (transmit_power(sol.V[t], sol.W[t], d.sigma_z) - d.P_T);
  return val;
}

ComplexMatrix lagrangian_grad_precoder(const DesignProblem& prob,
                                       const TransceiverSolution& sol,
                                       int t) {
  const SystemDims& d = prob.dims;
  ComplexMatrix g = ComplexMatrix::Zero(d.N_T, d.N_s);
  double scalar = sol.lambda_t(t);
  for (int l = 0; l < d.K_R; ++l) {
    const ComplexMatrix f = effective_channel_legit(sol, prob.channels, l);
    g.noalias() += prob.channels.C_hat[t][l].adjoint() * sol.R[l].adjoint() *
                   (sol.R[l] * f - identity(d.N_s));
    scalar += double(prob.flags.chi_l) * prob.u.s_tl(t, l) *
              sol.R[l].squaredNorm();
  }
  for (int e = 0; e < d.K_E; ++e) {
    const ComplexMatrix f = effective_channel_eve(sol, prob.channels, e);
    g.noalias() -= sol.lambda_e(e) * (prob.channels.G_hat[t][e].adjoint() *
                                      sol.E[e].adjoint() *
                                      (sol.E[e] * f - identity(d.N_s)));
    scalar -= sol.lambda_e(e) * double(prob.flags.chi_e) * prob.u.s_te(t, e) *
              sol.E[e].squaredNorm();
  }
  g.noalias() += scalar * sol.V[t];
  return g;
}

ComplexMatrix lagrangian_grad_receiver(const DesignProblem& prob,
                                       const TransceiverSolution& sol,
                                       int l) {
  const SystemDims& d = prob.dims;
  const double sz2 = d.sigma_z_sq();
  const ComplexMatrix f = effective_channel_legit(sol, prob.channels, l);
  ComplexMatrix q = f * f.adjoint();
  double diag = d.sigma_nl(l) * d.sigma_nl(l);
  for (int t = 0; t < d.K_T; ++t) {
    const ComplexMatrix cw = prob.channels.C_hat[t][l] * sol.W[t];
    q.noalias() += sz2 * (cw * cw.adjoint());
    diag += double(prob.flags.chi_l) * prob.u.s_tl(t, l) *
            (sol.V[t].squaredNorm() + sz2 * sol.W[t].squaredNorm());
  }
  q += diag * identity(d.N_R);
  return sol.R[l] * q - f.adjoint();
}

ComplexMatrix lagrangian_grad_an(const DesignProblem& prob,
                                 const TransceiverSolution& sol, int t) {
  const ComplexMatrix a =
      build_A_t(sol, prob.channels, prob.dims, prob.flags, prob.u,
                sol.lambda_e, sol.lambda_t(t), t);
  return prob.dims.sigma_z_sq() * (a * sol.W[t]);
}

}  // namespace mcsec
