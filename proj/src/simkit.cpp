#include "mcsec/simkit.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

namespace mcsec {

ComplexVector qpsk_modulate(const std::vector<std::uint8_t>& bits) {
  if (bits.size() % 2 != 0)
    throw std::invalid_argument("qpsk_modulate: bit count must be even");
  const double a = 1.0 / std::sqrt(2.0);
  ComplexVector sym(bits.size() / 2);
  for (size_t k = 0; k < sym.size(); ++k) {
    const double re = bits[2 * k] ? -a : a;
    const double im = bits[2 * k + 1] ? -a : a;
    sym(Eigen::Index(k)) = Complex(re, im);
  }
  return sym;
}

std::vector<std::uint8_t> qpsk_demodulate(const ComplexVector& symbols) {
  std::vector<std::uint8_t> bits(2 * symbols.size());
  for (Eigen::Index k = 0; k < symbols.size(); ++k) {
    bits[2 * k] = symbols(k).real() < 0.0 ? 1 : 0;
    bits[2 * k + 1] = symbols(k).imag() < 0.0 ? 1 : 0;
  }
  return bits;
}

LinkTrialResult run_link_trial(const TransceiverSolution& sol,
                               const ChannelSet& true_ch,
                               const SystemDims& dims, int n_symbols,
                               Rng& rng) {
  if (n_symbols < 1)
    throw std::invalid_argument("run_link_trial: need at least one symbol");
  const int K_T = dims.K_T, K_R = dims.K_R, K_E = dims.K_E;
  const int N_s = dims.N_s;

  // Common multicast payload.
  std::vector<std::uint8_t> bits(size_t(2) * N_s * n_symbols);
  for (auto& b : bits) b = rng.uniform() < 0.5 ? 0 : 1;
  ComplexMatrix d(N_s, n_symbols);
  {
    const ComplexVector sym = qpsk_modulate(bits);
    for (int k = 0; k < n_symbols; ++k)
      for (int s = 0; s < N_s; ++s) d(s, k) = sym(Eigen::Index(k) * N_s + s);
  }

  // Per-BS transmit blocks: precoded data plus shaped artificial noise.
  std::vector<ComplexMatrix> x(K_T);
  for (int t = 0; t < K_T; ++t) {
    x[t].noalias() = sol.V[t] * d;
    if (dims.sigma_z > 0.0) {
      const ComplexMatrix z =
          random_cgaussian(dims.N_T, n_symbols, dims.sigma_z_sq(), rng);
      x[t].noalias() += sol.W[t] * z;
    }
  }

  LinkTrialResult res;
  res.symbols = n_symbols;
  res.bits_per_node = 2LL * N_s * n_symbols;
  res.bit_errors_legit = Eigen::ArrayXi::Zero(K_R);
  res.bit_errors_eve = Eigen::ArrayXi::Zero(std::max(K_E, 0));
  res.sqerr_legit = RealVector::Zero(K_R);
  res.sqerr_eve = RealVector::Zero(std::max(K_E, 0));

  auto count_errors = [&](const ComplexMatrix& d_hat) -> long long {
    long long errs = 0;
    for (int k = 0; k < n_symbols; ++k)
      for (int s = 0; s < N_s; ++s) {
        const std::uint8_t b0 = d_hat(s, k).real() < 0.0 ? 1 : 0;
        const std::uint8_t b1 = d_hat(s, k).imag() < 0.0 ? 1 : 0;
        const size_t base = 2 * (size_t(k) * N_s + s);
        errs += (b0 != bits[base]) + (b1 != bits[base + 1]);
      }
    return errs;
  };

  for (int l = 0; l < K_R; ++l) {
    ComplexMatrix y = ComplexMatrix::Zero(dims.N_R, n_symbols);
    for (int t = 0; t < K_T; ++t) y.noalias() += true_ch.C_hat[t][l] * x[t];
    y += random_cgaussian(dims.N_R, n_symbols,
                          dims.sigma_nl(l) * dims.sigma_nl(l), rng);
    const ComplexMatrix d_hat = sol.R[l] * y;
    res.bit_errors_legit(l) = int(count_errors(d_hat));
    res.sqerr_legit(l) = (d - d_hat).squaredNorm() / double(n_symbols);
  }

  std::vector<ComplexMatrix> g_col(K_T);
  for (int e = 0; e < K_E; ++e) {
    for (int t = 0; t < K_T; ++t) g_col[t] = true_ch.G_hat[t][e];
    const ComplexMatrix filt = eve_mmse_filter(sol.V, g_col, dims.sigma_ne(e));
    ComplexMatrix y = ComplexMatrix::Zero(dims.N_E, n_symbols);
    for (int t = 0; t < K_T; ++t) y.noalias() += true_ch.G_hat[t][e] * x[t];
    y += random_cgaussian(dims.N_E, n_symbols,
                          dims.sigma_ne(e) * dims.sigma_ne(e), rng);
    const ComplexMatrix d_hat = filt * y;
    res.bit_errors_eve(e) = int(count_errors(d_hat));
    res.sqerr_eve(e) = (d - d_hat).squaredNorm() / double(n_symbols);
  }
  return res;
}

std::string policy_name(DesignPolicy p) {
  switch (p) {
    case DesignPolicy::Perfect: return "perfect";
    case DesignPolicy::NonRobust: return "nr";
    case DesignPolicy::RobustSE: return "r_se";
    case DesignPolicy::RobustNBE: return "r_nbe";
  }
  return "?";
}

std::string cluster_policy_name(ClusterPolicy p) {
  switch (p) {
    case ClusterPolicy::FullSync: return "mbsfn";
    case ClusterPolicy::Greedy: return "greedy";
    case ClusterPolicy::BestPerUser: return "sc_ptm";
  }
  return "?";
}

namespace {

struct Accumulator {
  std::vector<double> ber, mse;  // one aggregate per trial
  long long total_bits = 0;
  long long total_errors = 0;

  void add_trial(double trial_ber, double trial_mse, long long bits,
                 long long errors) {
    ber.push_back(trial_ber);
    mse.push_back(trial_mse);
    total_bits += bits;
    total_errors += errors;
  }

  void add_mse_only(double trial_mse) { mse.push_back(trial_mse); }

  static double mean(const std::vector<double>& v) {
    return v.empty() ? std::numeric_limits<double>::quiet_NaN()
                     : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  }

  static double half_width(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    const double sd = std::sqrt(acc / double(v.size() - 1));
    return 1.96 * sd / std::sqrt(double(v.size()));
  }

  double binomial_half_width() const {
    if (total_bits == 0) return 0.0;
    const double p = double(total_errors) / double(total_bits);
    return 1.96 * std::sqrt(std::max(p * (1.0 - p), 0.0) / double(total_bits));
  }
};

}  // namespace

PolicyDesign design_with_policy(DesignPolicy policy, const SystemDims& dims,
                                const ChannelSet& est,
                                const DesignBudgets& budgets, Rng& rng) {
  DesignProblem prob;
  prob.dims = dims;
  prob.channels = est;
  prob.beta = budgets.beta;
  prob.max_outer_iters = budgets.max_outer_iters;
  prob.max_robust_iters = budgets.max_robust_iters;
  PolicyDesign out;
  try {
    switch (policy) {
      case DesignPolicy::Perfect:
      case DesignPolicy::NonRobust: {
        prob.flags = RobustFlags{0, 0};
        prob.u = UncertaintyInput::zero(dims);
        DesignResult r = coordinate_descent(prob, rng);
        out.solution = std::move(r.solution);
        out.report = std::move(r.report);
        out.ok = true;
        break;
      }
      case DesignPolicy::RobustSE: {
        prob.flags = RobustFlags{1, 1};
        prob.u = UncertaintyInput::stochastic(dims, budgets.sigma_tl_sq,
                                              budgets.sigma_te_sq);
        DesignResult r = coordinate_descent(prob, rng);
        out.solution = std::move(r.solution);
        out.report = std::move(r.report);
        out.ok = true;
        break;
      }
      case DesignPolicy::RobustNBE: {
        prob.channels.leg_error =
            ErrorModel::norm_bounded(dims.K_T, dims.K_R, budgets.tau_tl);
        prob.channels.eve_error =
            ErrorModel::norm_bounded(dims.K_T, dims.K_E, budgets.tau_te);
        NbeResult r = nbe_design(prob, rng);
        out.solution = std::move(r.solution);
        out.report = std::move(r.report);
        out.ok = true;
        break;
      }
    }
  } catch (const SingularMatrixError&) {
    out.ok = false;
  } catch (const NumericalError&) {
    out.ok = false;
  }
  return out;
}

SweepResult sweep(const SweepConfig& cfg, Rng& rng) {
  if (cfg.trials < 1) throw std::invalid_argument("sweep: trials must be >= 1");
  SweepResult out;
  out.points.reserve(cfg.snr_db.size());

  for (Eigen::Index i = 0; i < cfg.snr_db.size(); ++i) {
    SystemDims dims = cfg.dims;
    const double snr_lin = std::pow(10.0, cfg.snr_db(i) / 10.0);
    const double sigma_n = std::sqrt(dims.P_T / snr_lin);
    dims.set_uniform_noise(sigma_n, sigma_n);
    dims.validate();

    Rng point_rng = rng.substream(std::uint64_t(i));
    Accumulator acc_ber_l, acc_ber_e;
    PointStats ps;
    ps.snr_db = cfg.snr_db(i);

    for (int trial = 0; trial < cfg.trials; ++trial) {
      Rng trial_rng = point_rng.substream(std::uint64_t(trial));
      Rng est_rng = trial_rng.substream(0);
      Rng design_rng = trial_rng.substream(1);
      Rng eval_rng = trial_rng.substream(2);
      Rng sim_rng = trial_rng.substream(3);

      const ChannelSet est = draw_channel_set(dims, ErrorModel::perfect(),
                                              ErrorModel::perfect(), est_rng);
      DesignBudgets budgets;
      budgets.sigma_tl_sq = cfg.design_sigma_tl_sq;
      budgets.sigma_te_sq = cfg.design_sigma_te_sq;
      budgets.tau_tl = cfg.design_tau_tl;
      budgets.tau_te = cfg.design_tau_te;
      budgets.beta = cfg.beta;
      budgets.max_outer_iters = cfg.max_outer_iters;
      budgets.max_robust_iters = cfg.max_robust_iters;
      PolicyDesign des =
          design_with_policy(cfg.policy, dims, est, budgets, design_rng);
      if (!des.ok) {
        ++ps.design_failures;
        continue;
      }
      if (!des.report.converged) ++ps.design_failures;
      const TransceiverSolution& sol = des.solution;

      ChannelSet true_ch = est;
      for (int t = 0; t < dims.K_T; ++t) {
        for (int l = 0; l < dims.K_R; ++l)
          true_ch.C_hat[t][l] += draw_error(cfg.eval_legit.kind,
                                            cfg.eval_legit.value, dims.N_R,
                                            dims.N_T, eval_rng);
        for (int e = 0; e < dims.K_E; ++e)
          true_ch.G_hat[t][e] += draw_error(cfg.eval_eve.kind,
                                            cfg.eval_eve.value, dims.N_E,
                                            dims.N_T, eval_rng);
      }

      if (cfg.symbols == 0) {
        // Degenerate sweep: no symbols, so no BER — report the exact
        // conditional MSE of the fixed filters on the realized channels.
        TransceiverSolution ev = sol;
        std::vector<ComplexMatrix> g_cols(dims.K_T);
        for (int e = 0; e < dims.K_E; ++e) {
          for (int t = 0; t < dims.K_T; ++t) g_cols[t] = true_ch.G_hat[t][e];
          ev.E[e] = eve_mmse_filter(sol.V, g_cols, dims.sigma_ne(e));
        }
        const RobustFlags off{0, 0};
        const UncertaintyInput uz = UncertaintyInput::zero(dims);
        double ml = 0.0;
        for (int l = 0; l < dims.K_R; ++l)
          ml += mse_legitimate(ev, true_ch, dims, off, uz, l);
        acc_ber_l.add_mse_only(ml / dims.K_R);
        if (dims.K_E > 0) {
          double me = 0.0;
          for (int e = 0; e < dims.K_E; ++e)
            me += mse_eavesdropper(ev, true_ch, dims, off, uz, e);
          acc_ber_e.add_mse_only(me / dims.K_E);
        }
      } else {
        const LinkTrialResult lt =
            run_link_trial(sol, true_ch, dims, cfg.symbols, sim_rng);

        const long long legit_bits = lt.bits_per_node * dims.K_R;
        const long long legit_errs = lt.bit_errors_legit.sum();
        acc_ber_l.add_trial(double(legit_errs) / double(legit_bits),
                            lt.sqerr_legit.mean(), legit_bits, legit_errs);
        if (dims.K_E > 0) {
          const long long eve_bits = lt.bits_per_node * dims.K_E;
          const long long eve_errs = lt.bit_errors_eve.sum();
          acc_ber_e.add_trial(double(eve_errs) / double(eve_bits),
                              lt.sqerr_eve.mean(), eve_bits, eve_errs);
        }
      }
      if (cfg.progress)
        std::cout << "progress experiment=sweep policy=" << policy_name(cfg.policy)
                  << " snr_db=" << cfg.snr_db(i) << " trial=" << trial
                  << " done=1\n";
    }

    ps.ber_legit = Accumulator::mean(acc_ber_l.ber);
    ps.mse_legit = Accumulator::mean(acc_ber_l.mse);
    ps.ber_eve = Accumulator::mean(acc_ber_e.ber);
    ps.mse_eve = Accumulator::mean(acc_ber_e.mse);
    ps.hw_ber_legit = cfg.trials >= 2 ? Accumulator::half_width(acc_ber_l.ber)
                                      : acc_ber_l.binomial_half_width();
    ps.hw_ber_eve = cfg.trials >= 2 ? Accumulator::half_width(acc_ber_e.ber)
                                    : acc_ber_e.binomial_half_width();
    ps.hw_mse_legit = Accumulator::half_width(acc_ber_l.mse);
    ps.hw_mse_eve = Accumulator::half_width(acc_ber_e.mse);
    out.points.push_back(ps);
  }
  return out;
}

GapResult security_gap(const RealVector& snr_db, const RealVector& ber_legit,
                       const RealVector& ber_eve, const GapSpec& spec) {
  const Eigen::Index n = snr_db.size();
  if (n < 2 || ber_legit.size() != n || ber_eve.size() != n)
    throw std::invalid_argument("security_gap: need matched curves, >= 2 pts");
  for (Eigen::Index i = 1; i < n; ++i)
    if (!(snr_db(i) > snr_db(i - 1)))
      throw std::invalid_argument("security_gap: SNR grid must be ascending");

  const double kLogFloor = 1e-12;  // keeps log interpolation finite at BER 0
  auto log_ber = [&](double b) { return std::log10(std::max(b, kLogFloor)); };

  // Smallest SNR where the legitimate curve reaches its target.
  Eigen::Index first_ok = -1;
  for (Eigen::Index i = 0; i < n; ++i)
    if (ber_legit(i) <= spec.target_legit) {
      first_ok = i;
      break;
    }
  if (first_ok < 0)
    throw TargetNotBracketedError(
        "security_gap: legitimate BER never reaches its target in the grid");
  if (first_ok == 0)
    throw TargetNotBracketedError(
        "security_gap: legitimate BER already below target at the lowest SNR");

  // Largest SNR where the eavesdropper curve still meets its floor.
  Eigen::Index last_ok = -1;
  for (Eigen::Index i = n - 1; i >= 0; --i)
    if (ber_eve(i) >= spec.target_eve) {
      last_ok = i;
      break;
    }
  if (last_ok < 0)
    throw TargetNotBracketedError(
        "security_gap: eavesdropper BER below its floor on the whole grid");
  if (last_ok == n - 1)
    throw TargetNotBracketedError(
        "security_gap: eavesdropper BER above its floor at the highest SNR");

  auto crossing = [&](const RealVector& ber, Eigen::Index a, Eigen::Index b,
                      double target) {
    const double ya = log_ber(ber(a));
    const double yb = log_ber(ber(b));
    const double yt = std::log10(target);
    if (ya == yb) return snr_db(b);
    const double w = (yt - ya) / (yb - ya);
    return snr_db(a) + w * (snr_db(b) - snr_db(a));
  };

  GapResult g;
  g.snr_min_legit_db =
      crossing(ber_legit, first_ok - 1, first_ok, spec.target_legit);
  g.snr_max_eve_db = crossing(ber_eve, last_ok, last_ok + 1, spec.target_eve);
  g.gap_db = g.snr_min_legit_db - g.snr_max_eve_db;
  return g;
}

std::vector<GroupStat> system_level_run(const SystemRunConfig& cfg, Rng& rng) {
  if (cfg.groups < 1)
    throw std::invalid_argument("system_level_run: need >= 1 group");
  std::vector<GroupStat> stats;
  stats.reserve(cfg.groups);

  for (int g = 0; g < cfg.groups; ++g) {
    Rng group_rng = rng.substream(std::uint64_t(g));
    Rng layout_rng = group_rng.substream(0);
    Rng chan_rng = group_rng.substream(1);
    Rng design_rng = group_rng.substream(2);
    Rng eval_rng = group_rng.substream(3);
    Rng sim_rng = group_rng.substream(4);

    const NetworkLayout layout =
        generate_system_scenario(cfg.layout, layout_rng);
    const RealMatrix gains = layout_gain_table(layout);
    const int n_users = int(layout.users.size());
    const int n_eves = int(layout.eves.size());

    // Cluster selection sees only the legitimate users' gains.
    ClusterRequest req;
    req.gains = gains.leftCols(n_users);
    req.candidates = layout.sync_area;
    req.target_size = cfg.cluster_size;
    req.tx_power = cfg.p_t;
    req.noise_power = cfg.noise_power;

    std::vector<int> cluster;
    switch (cfg.policy) {
      case ClusterPolicy::FullSync: cluster = layout.sync_area; break;
      case ClusterPolicy::Greedy: cluster = greedy_cluster(req); break;
      case ClusterPolicy::BestPerUser: cluster = best_bs_per_user(req); break;
    }

    SystemDims dims;
    dims.K_T = int(cluster.size());
    dims.K_R = n_users;
    dims.K_E = n_eves;
    dims.N_T = cfg.n_t;
    dims.N_R = cfg.n_r;
    dims.N_E = cfg.n_e;
    dims.N_s = cfg.n_s;
    dims.P_T = cfg.p_t;
    dims.sigma_z = std::sqrt(cfg.sigma_z_sq);
    dims.Gamma = cfg.gamma;

    // Interference from every BS outside the serving cluster enters as
    // additional Gaussian noise at each receiver.
    std::vector<char> in_cluster(layout.bs.size(), 0);
    for (int idx : cluster) in_cluster[idx] = 1;
    dims.sigma_nl = RealVector::Zero(n_users);
    dims.sigma_ne = RealVector::Zero(n_eves);
    for (int u = 0; u < n_users; ++u) {
      double p = cfg.noise_power;
      for (int t = 0; t < int(layout.bs.size()); ++t)
        if (!in_cluster[t]) p += gains(t, u) * cfg.p_t;
      dims.sigma_nl(u) = std::sqrt(p);
    }
    for (int e = 0; e < n_eves; ++e) {
      double p = cfg.noise_power;
      for (int t = 0; t < int(layout.bs.size()); ++t)
        if (!in_cluster[t]) p += gains(t, n_users + e) * cfg.p_t;
      dims.sigma_ne(e) = std::sqrt(p);
    }
    dims.validate();

    // Channel estimates scaled by pathloss; error radii scale with the link
    // gain (the uncertainty lives on the fading estimate).
    ChannelSet est;
    est.C_hat.assign(dims.K_T, std::vector<ComplexMatrix>(n_users));
    est.G_hat.assign(dims.K_T, std::vector<ComplexMatrix>(n_eves));
    ErrorModel leg = ErrorModel::norm_bounded(dims.K_T, n_users, 0.0);
    ErrorModel eve = ErrorModel::norm_bounded(dims.K_T, n_eves, 0.0);
    for (int ti = 0; ti < dims.K_T; ++ti) {
      const int bs = cluster[ti];
      for (int u = 0; u < n_users; ++u) {
        est.C_hat[ti][u] =
            draw_rayleigh_channel(dims.N_R, dims.N_T, gains(bs, u), chan_rng);
        leg.value(ti, u) = cfg.tau_tl * gains(bs, u);
      }
      for (int e = 0; e < n_eves; ++e) {
        est.G_hat[ti][e] = draw_rayleigh_channel(dims.N_E, dims.N_T,
                                                 gains(bs, n_users + e),
                                                 chan_rng);
        eve.value(ti, e) = cfg.tau_te * gains(bs, n_users + e);
      }
    }
    est.leg_error = leg;
    est.eve_error = eve;

    DesignProblem prob;
    prob.dims = dims;
    prob.channels = est;
    prob.beta = cfg.beta;
    prob.max_outer_iters = cfg.max_outer_iters;
    prob.max_robust_iters = cfg.max_robust_iters;

    GroupStat stat;
    stat.group_id = g;
    stat.k_t = dims.K_T;

    try {
      NbeResult design = nbe_design(prob, design_rng);
      stat.design_converged = design.report.converged;

      ChannelSet true_ch = est;
      for (int ti = 0; ti < dims.K_T; ++ti) {
        for (int u = 0; u < n_users; ++u)
          true_ch.C_hat[ti][u] +=
              draw_error(ErrorKind::NormBounded, leg.value(ti, u), dims.N_R,
                         dims.N_T, eval_rng);
        for (int e = 0; e < n_eves; ++e)
          true_ch.G_hat[ti][e] +=
              draw_error(ErrorKind::NormBounded, eve.value(ti, e), dims.N_E,
                         dims.N_T, eval_rng);
      }

      const LinkTrialResult lt = run_link_trial(design.solution, true_ch,
                                                dims, cfg.symbols, sim_rng);
      stat.ber_legit = double(lt.bit_errors_legit.sum()) /
                       double(lt.bits_per_node * dims.K_R);
      stat.mse_legit = lt.sqerr_legit.mean();
      if (dims.K_E > 0) {
        stat.ber_eve = double(lt.bit_errors_eve.sum()) /
                       double(lt.bits_per_node * dims.K_E);
        stat.mse_eve = lt.sqerr_eve.mean();
      }
    } catch (const SingularMatrixError&) {
      stat.design_converged = false;
      stat.ber_legit = stat.ber_eve = 0.5;
      stat.mse_legit = stat.mse_eve = double(dims.N_s);
    } catch (const NumericalError&) {
      stat.design_converged = false;
      stat.ber_legit = stat.ber_eve = 0.5;
      stat.mse_legit = stat.mse_eve = double(dims.N_s);
    }

    if (cfg.progress)
      std::cout << "progress experiment=system policy="
                << cluster_policy_name(cfg.policy) << " group=" << g
                << " k_t=" << stat.k_t << " ber_legit=" << stat.ber_legit
                << " ber_eve=" << stat.ber_eve << "\n";
    stats.push_back(stat);
  }
  return stats;
}

}  // namespace mcsec
