#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mcsec/clustering.hpp"
#include "mcsec/design.hpp"

namespace mcsec {

struct TargetNotBracketedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Gray-mapped QPSK, unit symbol energy: bits (b0, b1) -> ((1-2 b0) +
/// i (1-2 b1)) / sqrt(2), so (0,0) -> (1+i)/sqrt(2). Throws on odd length.
ComplexVector qpsk_modulate(const std::vector<std::uint8_t>& bits);

/// Sign slicer inverting qpsk_modulate (ties resolve to bit 0).
std::vector<std::uint8_t> qpsk_demodulate(const ComplexVector& symbols);

/// Outcome of one quasi-static link simulation: per-user / per-eve bit error
/// counts and time-averaged squared reconstruction errors.
struct LinkTrialResult {
  Eigen::ArrayXi bit_errors_legit;  // per user
  Eigen::ArrayXi bit_errors_eve;    // per eve
  long long bits_per_node = 0;
  RealVector sqerr_legit;  // per user: E||d - d_hat||^2 over the block
  RealVector sqerr_eve;
  int symbols = 0;
};

/// Simulate one coherence block: common QPSK data from every BS through the
/// given precoders, per-BS artificial noise, true channels from `true_ch`
/// (its matrices are realizations, not estimates). Legitimate users apply
/// sol.R; each eavesdropper applies its AN-unaware MMSE filter built from
/// the true channel (the pessimistic evaluation convention).
LinkTrialResult run_link_trial(const TransceiverSolution& sol,
                               const ChannelSet& true_ch,
                               const SystemDims& dims, int n_symbols,
                               Rng& rng);

enum class DesignPolicy { Perfect, NonRobust, RobustSE, RobustNBE };
std::string policy_name(DesignPolicy p);

/// Uncertainty budgets and iteration controls shared by every
/// policy-dispatched design call.
struct DesignBudgets {
  double sigma_tl_sq = 0.0;  // stochastic design variances
  double sigma_te_sq = 0.0;
  double tau_tl = 0.0;  // norm-bounded design radii (squared)
  double tau_te = 0.0;
  double beta = 1e-4;
  int max_outer_iters = 50;
  int max_robust_iters = 30;
};

struct PolicyDesign {
  TransceiverSolution solution;
  SolverReport report;
  bool ok = false;  // false when the design aborted on a numerical error
};

/// Run the design matching the policy: Perfect and NonRobust use the
/// non-robust alternation, RobustSE the stochastic robust terms, RobustNBE
/// the worst-case alternation with norm-bounded models. Numerical aborts
/// are reported through `ok`, not thrown.
PolicyDesign design_with_policy(DesignPolicy policy, const SystemDims& dims,
                                const ChannelSet& est,
                                const DesignBudgets& budgets, Rng& rng);

struct EvalErrorSpec {
  ErrorKind kind = ErrorKind::Perfect;
  double value = 0.0;
};

/// One BER/MSE-versus-SNR experiment for a single design policy.
struct SweepConfig {
  SystemDims dims;  // noise entries are overwritten per SNR point
  DesignPolicy policy = DesignPolicy::NonRobust;
  double design_sigma_tl_sq = 0.0;  // stochastic design budgets
  double design_sigma_te_sq = 0.0;
  double design_tau_tl = 0.0;  // norm-bounded design budgets
  double design_tau_te = 0.0;
  EvalErrorSpec eval_legit;  // true-channel error draw at evaluation time
  EvalErrorSpec eval_eve;
  RealVector snr_db;
  int trials = 1;   // independent channel draws (one design each)
  int symbols = 1000;
  double beta = 1e-4;
  int max_outer_iters = 50;
  int max_robust_iters = 30;
  bool progress = false;  // key=value progress lines on stderr
};

struct PointStats {
  double snr_db = 0.0;
  double ber_legit = 0.0, ber_eve = 0.0;
  double mse_legit = 0.0, mse_eve = 0.0;
  // 95% half-widths (across trials when trials >= 2).
  double hw_ber_legit = 0.0, hw_ber_eve = 0.0;
  double hw_mse_legit = 0.0, hw_mse_eve = 0.0;
  int design_failures = 0;  // non-converged or aborted designs
};

struct SweepResult {
  std::vector<PointStats> points;
};

SweepResult sweep(const SweepConfig& cfg, Rng& rng);

struct GapSpec {
  double target_legit = 1e-4;
  double target_eve = 0.3;
};

struct GapResult {
  double snr_min_legit_db = 0.0;  // smallest SNR reaching the legit target
  double snr_max_eve_db = 0.0;    // largest SNR keeping the eve target
  double gap_db = 0.0;            // difference of the two
};

/// Log-domain interpolation of the two BER thresholds. Throws
/// TargetNotBracketedError when a curve does not cross its target inside the
/// grid.
GapResult security_gap(const RealVector& snr_db, const RealVector& ber_legit,
                       const RealVector& ber_eve, const GapSpec& spec);

enum class ClusterPolicy { FullSync, Greedy, BestPerUser };
std::string cluster_policy_name(ClusterPolicy p);

/// Deployment-level experiment: drop a network, form one multicast group per
/// run, select the serving cluster per policy, run the norm-bounded robust
/// design with pathloss-scaled channels and error radii, and simulate.
/// Out-of-cluster base stations contribute interference, folded into each
/// receiver's noise power.
struct SystemRunConfig {
  LayoutParams layout;
  ClusterPolicy policy = ClusterPolicy::FullSync;
  int groups = 30;
  int cluster_size = 10;  // greedy target K_T'
  int n_t = 16, n_r = 8, n_e = 4, n_s = 2;
  double p_t = 1.0;            // per-BS power, linear
  double sigma_z_sq = 0.04;
  double gamma = 0.5;
  double noise_power = 1e-13;  // thermal noise at every receiver, linear
  double tau_tl = 0.04;        // error radius before pathloss scaling
  double tau_te = 0.09;
  int symbols = 2000;
  double beta = 1e-4;
  int max_outer_iters = 50;
  int max_robust_iters = 30;
  bool progress = false;
};

struct GroupStat {
  int group_id = 0;
  int k_t = 0;  // serving-cluster size
  double ber_legit = 0.0, ber_eve = 0.0;
  double mse_legit = 0.0, mse_eve = 0.0;
  bool design_converged = false;
};

std::vector<GroupStat> system_level_run(const SystemRunConfig& cfg, Rng& rng);

}  // namespace mcsec
