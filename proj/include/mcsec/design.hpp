#pragma once

#include <utility>
#include <vector>

#include "mcsec/mse.hpp"

namespace mcsec {

/// One robust transceiver design task: dimensions, channel estimates with
/// their error models, robustness switches, per-link uncertainty budgets and
/// the iteration controls of the alternating solver.
struct DesignProblem {
  SystemDims dims;
  ChannelSet channels;
  RobustFlags flags;
  UncertaintyInput u;

  double beta = 1e-4;            // per-user MSE convergence threshold
  int max_outer_iters = 50;      // alternating-update iterations
  int max_robust_iters = 30;     // worst-case refinement iterations
  double multiplier_tol = 1e-6;  // scaled constraint-residual tolerance
  int max_multiplier_iters = 200;
  double null_space_tol = 1e-8;  // relative cut for the AN projector
};

struct SolverReport {
  int iterations_used = 0;
  double final_smse = 0.0;
  // [eps_e - Gamma for all e] then [P_t - P_T for all t], final state.
  RealVector constraint_residuals;
  bool converged = false;
  double multiplier_solve_residual = 0.0;  // max-norm, raw units
  int multiplier_failures = 0;             // non-converged multiplier solves
  std::vector<double> smse_history;        // one entry per outer iteration
};

struct DesignResult {
  TransceiverSolution solution;
  SolverReport report;
};

struct WorstCaseErrors {
  std::vector<std::vector<ComplexMatrix>> Delta_tl;  // [K_T][K_R]
  std::vector<std::vector<ComplexMatrix>> Delta_te;  // [K_T][K_E]
};

struct NbeResult {
  TransceiverSolution solution;
  WorstCaseErrors worst;
  SolverReport report;
};

struct MultiplierOutcome {
  RealVector lambda_e;
  RealVector lambda_t;
  double residual = 0.0;  // max-norm over active constraint rows, raw units
  bool converged = false;
  int iterations = 0;
};

/// Quadratic form of the precoder stationarity system for BS t:
/// A_t = sum_l C^H R^H R C + chi_l sum_l s_tl tr(R R^H) I
///     - sum_e lambda_e (G^H E^H E G + chi_e s_te tr(E E^H) I)
///     + lambda_t_prime I.
ComplexMatrix build_A_t(const TransceiverSolution& sol, const ChannelSet& ch,
                        const SystemDims& dims, const RobustFlags& flags,
                        const UncertaintyInput& u, const RealVector& lambda_e,
                        double lambda_t_prime, int t);

/// Stationary precoder of BS t given the multipliers and every other block
/// of the current solution (including the other BSs' precoders, which couple
/// through the users' effective channels). Throws SingularMatrixError when
/// A_t is singular; callers recover by raising lambda_t_prime.
ComplexMatrix update_precoder(const DesignProblem& prob,
                              const TransceiverSolution& sol, int t);

/// MMSE receive filter of user l given precoders and AN shaping.
ComplexMatrix update_receiver(const DesignProblem& prob,
                              const TransceiverSolution& sol, int l);

/// AN shaping of BS t: Frobenius-normalized projector onto the (near-)null
/// space of A_t.
ComplexMatrix update_an_shaping(const DesignProblem& prob,
                                const TransceiverSolution& sol, int t);
/// Same, exposing the retained singular value / fallback diagnostics.
NullSpaceInfo update_an_shaping_info(const DesignProblem& prob,
                                     const TransceiverSolution& sol, int t);

/// Solve the multipliers of the eve-MSE and power constraints by nested
/// scalar root-finding on the KKT rows, with V(lambda) from the joint
/// stationarity system and the AN shaping held fixed throughout (the
/// surrounding block iteration refreshes it). Eve rows bracket their own
/// multiplier while re-balancing the power family at every probe; probes
/// that leave the dual-feasible region (singular stationarity system) act
/// as a known bracket side. On return sol holds the updated V and
/// multipliers. Non-convergence is reported, not thrown.
MultiplierOutcome solve_multipliers(const DesignProblem& prob,
                                    TransceiverSolution& sol);

/// Alternating design (eve filters -> receive filters -> multipliers with
/// precoders and AN shaping) until every user MSE moves less than beta.
DesignResult coordinate_descent(const DesignProblem& prob, Rng& rng);

/// Same solver warm-started from an existing solution.
DesignResult coordinate_descent_from(const DesignProblem& prob,
                                     TransceiverSolution sol);

/// Worst-case CSI error of link (t, l): the Frobenius-ball extremizer of the
/// linearized user MSE. Radius sqrt(tau) from channels.leg_error. Returns
/// zero when the linearization coefficient vanishes.
ComplexMatrix worst_case_delta_legitimate(const TransceiverSolution& sol,
                                          const ChannelSet& ch,
                                          const SystemDims& dims, int t,
                                          int l);

/// Worst-case (MSE-minimizing) error of eavesdropper link (t, e), radius
/// sqrt(tau) from channels.eve_error.
ComplexMatrix worst_case_delta_eve(const TransceiverSolution& sol,
                                   const ChannelSet& ch,
                                   const SystemDims& dims, int t, int e);

/// Robust design under norm-bounded errors: alternate the inner stochastic
/// solver (uncertainty budgets = current worst-case error norms) with the
/// worst-case error updates until the user MSEs settle.
NbeResult nbe_design(const DesignProblem& prob, Rng& rng);

/// Lagrangian of the constrained SMSE problem at the given solution, using
/// the problem's robustness terms and the solution's multipliers.
double lagrangian(const DesignProblem& prob, const TransceiverSolution& sol);

/// Analytic Lagrangian gradients (conjugate-coordinate convention, matching
/// finite_diff_gradient). Used by the stationarity test oracles.
ComplexMatrix lagrangian_grad_precoder(const DesignProblem& prob,
                                       const TransceiverSolution& sol, int t);
ComplexMatrix lagrangian_grad_receiver(const DesignProblem& prob,
                                       const TransceiverSolution& sol, int l);
ComplexMatrix lagrangian_grad_an(const DesignProblem& prob,
                                 const TransceiverSolution& sol, int t);

/// Deterministic starting point used by both designers: random precoders
/// scaled inside the power budget, random unit-norm AN shaping, zero filters.
TransceiverSolution initial_solution(const DesignProblem& prob, Rng& rng);

}  // namespace mcsec
