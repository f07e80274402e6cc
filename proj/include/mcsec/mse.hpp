#pragma once

#include <utility>
#include <vector>

#include "mcsec/channel.hpp"
#include "mcsec/numerics.hpp"

namespace mcsec {

/// Robustness switches: chi_l folds the legitimate-side CSI error terms into
/// the MSE expressions, chi_e the eavesdropper-side ones. Stored as 0/1 and
/// applied multiplicatively so a zero uncertainty budget reproduces the
/// non-robust expressions bit-for-bit.
struct RobustFlags {
  int chi_l = 0;
  int chi_e = 0;
};

/// Per-link scalar uncertainty budgets entering the robust MSE terms: the
/// error variance sigma^2 under the stochastic model, or the squared norm
/// ||Delta||_F^2 of the current worst-case error under the bounded model.
struct UncertaintyInput {
  RealMatrix s_tl;  // K_T x K_R
  RealMatrix s_te;  // K_T x K_E

  static UncertaintyInput zero(const SystemDims& dims);
  static UncertaintyInput stochastic(const SystemDims& dims, double sigma_tl_sq,
                                     double sigma_te_sq);
  static UncertaintyInput from_model(const SystemDims& dims,
                                     const ErrorModel& leg,
                                     const ErrorModel& eve);
};

/// One transceiver design: per-BS precoders V[t] (N_T x N_s) and AN shaping
/// W[t] (N_T x N_T), per-user receive filters R[l] (N_s x N_R), per-eve
/// filters E[e] (N_s x N_E), and the multipliers of the two constraint
/// families (eve-MSE floor, per-BS power).
struct TransceiverSolution {
  std::vector<ComplexMatrix> V;
  std::vector<ComplexMatrix> W;
  std::vector<ComplexMatrix> R;
  std::vector<ComplexMatrix> E;
  RealVector lambda_e;   // size K_E, >= 0
  RealVector lambda_t;   // size K_T, >= 0

  static TransceiverSolution zero(const SystemDims& dims);
};

/// Per-BS radiated power tr(V V^H) + sigma_z^2 tr(W W^H).
double transmit_power(const ComplexMatrix& V_t, const ComplexMatrix& W_t,
                      double sigma_z);

/// Effective estimated channel of user l: sum_t C_hat[t][l] V[t].
ComplexMatrix effective_channel_legit(const TransceiverSolution& sol,
                                      const ChannelSet& ch, int l);
/// Effective estimated channel of eavesdropper e: sum_t G_hat[t][e] V[t].
ComplexMatrix effective_channel_eve(const TransceiverSolution& sol,
                                    const ChannelSet& ch, int e);

/// Closed-form MSE of user l under the configured robustness terms. The
/// expression is assembled from complex traces; the imaginary residue must
/// stay below 1e-9 relative or NumericalError is thrown.
double mse_legitimate(const TransceiverSolution& sol, const ChannelSet& ch,
                      const SystemDims& dims, const RobustFlags& flags,
                      const UncertaintyInput& u, int l);

/// Closed-form MSE of eavesdropper e (same structure, eve quantities).
double mse_eavesdropper(const TransceiverSolution& sol, const ChannelSet& ch,
                        const SystemDims& dims, const RobustFlags& flags,
                        const UncertaintyInput& u, int e);

/// Sum MSE over all users.
double smse(const TransceiverSolution& sol, const ChannelSet& ch,
            const SystemDims& dims, const RobustFlags& flags,
            const UncertaintyInput& u);

/// AN-unaware MMSE filter of an eavesdropper: with F = sum_t G[t] V[t],
/// E = F^H (F F^H + sigma_ne^2 I)^{-1}. Throws SingularMatrixError when the
/// Gram matrix is singular (e.g. sigma_ne = 0 with rank-deficient F).
ComplexMatrix eve_mmse_filter(const std::vector<ComplexMatrix>& V,
                              const std::vector<ComplexMatrix>& G_e,
                              double sigma_ne);

/// Monte-Carlo check of E[tr(X U X^H Vm)] = sigma^2 tr(U) tr(Vm) for X with
/// i.i.d. CN(0, sigma^2/m) entries (E[X X^H] = sigma^2 I). Returns
/// (sample mean, standard error of the mean), real parts.
std::pair<double, double> trace_property_oracle(const ComplexMatrix& U,
                                                const ComplexMatrix& Vm,
                                                double sigma_sq, int trials,
                                                Rng& rng);

}  // namespace mcsec
