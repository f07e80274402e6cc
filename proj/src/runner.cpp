#include "mcsec/runner.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#ifndef MCSEC_VERSION
#define MCSEC_VERSION "untagged"
#endif

namespace mcsec {

std::string build_version() { return MCSEC_VERSION; }

namespace {

// Stream tags keeping the experiments' random draws independent of each
// other and of the policy list order in the config.
constexpr std::uint64_t kSweepTag = 0x10;
constexpr std::uint64_t kAnTag = 0x20;
constexpr std::uint64_t kThresholdTag = 0x30;
constexpr std::uint64_t kSystemTag = 0x40;

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string num(long long v) { return std::to_string(v); }
std::string num(int v) { return std::to_string(v); }

class Csv {
 public:
  Csv(const std::filesystem::path& path,
      const std::vector<std::string>& header)
      : f_(path, std::ios::binary), cols_(header.size()) {
    if (!f_) throw ConfigError("cannot write '" + path.string() + "'");
    write_row(header);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != cols_)
      throw std::logic_error("csv row width mismatch");
    write_row(cells);
  }

 private:
  void write_row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) f_ << ',';
      f_ << cells[i];
    }
    f_ << '\n';
  }

  std::ofstream f_;
  size_t cols_;
};

DesignPolicy policy_from_name(const std::string& s) {
  if (s == "perfect") return DesignPolicy::Perfect;
  if (s == "nr") return DesignPolicy::NonRobust;
  if (s == "r_se") return DesignPolicy::RobustSE;
  if (s == "r_nbe") return DesignPolicy::RobustNBE;
  throw ConfigError("unknown design policy '" + s + "'");
}

ClusterPolicy cluster_from_name(const std::string& s) {
  if (s == "mbsfn") return ClusterPolicy::FullSync;
  if (s == "greedy") return ClusterPolicy::Greedy;
  if (s == "sc_ptm") return ClusterPolicy::BestPerUser;
  throw ConfigError("unknown cluster policy '" + s + "'");
}

SystemDims dims_from(const ResolvedConfig& c) {
  SystemDims d;
  d.K_T = c.k_t;
  d.K_R = c.k_r;
  d.K_E = c.k_e;
  d.N_T = c.n_t;
  d.N_R = c.n_r;
  d.N_E = c.n_e;
  d.N_s = c.n_s;
  d.P_T = dbm_to_linear(c.p_t_dbm);
  d.sigma_z = std::sqrt(c.sigma_z_sq);
  d.Gamma = c.gamma;
  d.set_uniform_noise(1.0, 1.0);  // overwritten per SNR point
  return d;
}

DesignBudgets budgets_from(const ResolvedConfig& c) {
  DesignBudgets b;
  b.sigma_tl_sq = c.sigma_tl_sq;
  b.sigma_te_sq = c.sigma_te_sq;
  b.tau_tl = c.tau_tl;
  b.tau_te = c.tau_te;
  b.beta = c.beta;
  b.max_outer_iters = c.max_outer_iters;
  b.max_robust_iters = c.max_robust_iters;
  return b;
}

SweepConfig sweep_config_for(const ResolvedConfig& c, DesignPolicy policy) {
  SweepConfig sc;
  sc.dims = dims_from(c);
  sc.policy = policy;
  sc.design_sigma_tl_sq = c.sigma_tl_sq;
  sc.design_sigma_te_sq = c.sigma_te_sq;
  sc.design_tau_tl = c.tau_tl;
  sc.design_tau_te = c.tau_te;
  sc.snr_db = c.snr_db;
  sc.trials = c.trials;
  sc.symbols = c.symbols;
  sc.beta = c.beta;
  sc.max_outer_iters = c.max_outer_iters;
  sc.max_robust_iters = c.max_robust_iters;
  sc.progress = c.progress;
  // The Perfect baseline is evaluated on the estimates themselves; everyone
  // else sees evaluation errors of the configured model.
  if (policy == DesignPolicy::Perfect || c.eval_model == "perfect") {
    sc.eval_legit = {ErrorKind::Perfect, 0.0};
    sc.eval_eve = {ErrorKind::Perfect, 0.0};
  } else if (c.eval_model == "stochastic") {
    sc.eval_legit = {ErrorKind::Stochastic, c.sigma_tl_sq};
    sc.eval_eve = {ErrorKind::Stochastic, c.sigma_te_sq};
  } else {
    sc.eval_legit = {ErrorKind::NormBounded, c.tau_tl};
    sc.eval_eve = {ErrorKind::NormBounded, c.tau_te};
  }
  return sc;
}

const std::vector<std::string> kSweepHeader = {
    "experiment", "policy",        "sigma_z_sq",   "snr_db",
    "ber_legit",  "hw_ber_legit",  "ber_eve",      "hw_ber_eve",
    "mse_legit",  "hw_mse_legit",  "mse_eve",      "hw_mse_eve",
    "design_failures"};

void write_sweep_rows(Csv& csv, const std::string& experiment,
                      const std::string& policy, double sigma_z_sq,
                      const SweepResult& res) {
  for (const PointStats& p : res.points)
    csv.row({experiment, policy, num(sigma_z_sq), num(p.snr_db),
             num(p.ber_legit), num(p.hw_ber_legit), num(p.ber_eve),
             num(p.hw_ber_eve), num(p.mse_legit), num(p.hw_mse_legit),
             num(p.mse_eve), num(p.hw_mse_eve), num(p.design_failures)});
}

/// fig3_ber / fig4_mse / custom: one BER+MSE sweep per configured policy.
void run_policy_sweeps(const ResolvedConfig& c, Rng& root,
                       const std::filesystem::path& out,
                       std::vector<std::string>& artifacts) {
  const std::string file = c.experiment + ".csv";
  Csv csv(out / file, kSweepHeader);
  for (const std::string& pol : c.policies) {
    const DesignPolicy policy = policy_from_name(pol);
    Rng rng = root.substream(kSweepTag).substream(std::uint64_t(policy));
    const SweepResult res = sweep(sweep_config_for(c, policy), rng);
    write_sweep_rows(csv, c.experiment, pol, c.sigma_z_sq, res);
  }
  artifacts.push_back(file);
}

void run_fig5(const ResolvedConfig& c, Rng& root,
              const std::filesystem::path& out,
              std::vector<std::string>& artifacts) {
  Csv gaps(out / "fig5_gap.csv",
           {"experiment", "policy", "target_ber_legit", "target_ber_eve",
            "snr_min_legit_db", "snr_max_eve_db", "gap_db"});
  Csv curves(out / "fig5_gap_curves.csv", kSweepHeader);
  const GapSpec spec{c.target_ber_legit, c.target_ber_eve};
  for (const std::string& pol : c.policies) {
    const DesignPolicy policy = policy_from_name(pol);
    Rng rng = root.substream(kSweepTag).substream(std::uint64_t(policy));
    const SweepResult res = sweep(sweep_config_for(c, policy), rng);
    write_sweep_rows(curves, c.experiment, pol, c.sigma_z_sq, res);

    RealVector snr(res.points.size()), bl(res.points.size()),
        be(res.points.size());
    for (size_t i = 0; i < res.points.size(); ++i) {
      snr(Eigen::Index(i)) = res.points[i].snr_db;
      bl(Eigen::Index(i)) = res.points[i].ber_legit;
      be(Eigen::Index(i)) = res.points[i].ber_eve;
    }
    const GapResult g = security_gap(snr, bl, be, spec);
    gaps.row({c.experiment, pol, num(c.target_ber_legit),
              num(c.target_ber_eve), num(g.snr_min_legit_db),
              num(g.snr_max_eve_db), num(g.gap_db)});
  }
  artifacts.push_back("fig5_gap.csv");
  artifacts.push_back("fig5_gap_curves.csv");
}

void run_fig6(const ResolvedConfig& c, Rng& root,
              const std::filesystem::path& out,
              std::vector<std::string>& artifacts) {
  const std::string file = c.experiment + ".csv";
  Csv csv(out / file, kSweepHeader);
  const DesignPolicy policy = policy_from_name(c.an_policy);
  for (Eigen::Index gi = 0; gi < c.an_sigma_z_sq_grid.size(); ++gi) {
    SweepConfig sc = sweep_config_for(c, policy);
    sc.dims.sigma_z = std::sqrt(c.an_sigma_z_sq_grid(gi));
    // Every AN level replays the same channel/design/noise stream so the
    // comparison is paired draw for draw.
    Rng rng = root.substream(kAnTag);
    const SweepResult res = sweep(sc, rng);
    write_sweep_rows(csv, c.experiment, c.an_policy, c.an_sigma_z_sq_grid(gi),
                     res);
  }
  artifacts.push_back(file);
}

void run_fig7(const ResolvedConfig& c, Rng& root,
              const std::filesystem::path& out,
              std::vector<std::string>& artifacts) {
  const std::string file = c.experiment + ".csv";
  Csv csv(out / file,
          {"experiment", "policy", "gamma", "sigma_z_sq", "trial",
           "min_eps_e", "satisfied", "converged", "smse"});
  const DesignPolicy policy = policy_from_name(c.thr_policy);
  const DesignBudgets budgets = budgets_from(c);
  const double kFeasTol = 1e-4;  // matched to the feasibility acceptance gate
  const double an_levels[2] = {c.thr_sigma_z_sq_on, 0.0};

  for (Eigen::Index gi = 0; gi < c.gamma_grid.size(); ++gi) {
    for (double an : an_levels) {
      for (int trial = 0; trial < c.trials; ++trial) {
        SystemDims dims = dims_from(c);
        dims.Gamma = c.gamma_grid(gi);
        dims.sigma_z = std::sqrt(an);
        const double snr_lin = std::pow(10.0, c.thr_snr_db / 10.0);
        const double sigma_n = std::sqrt(dims.P_T / snr_lin);
        dims.set_uniform_noise(sigma_n, sigma_n);
        dims.validate();

        // AN-on and AN-off replay the same channel and design streams.
        Rng trial_rng =
            root.substream(kThresholdTag).substream(gi).substream(trial);
        Rng est_rng = trial_rng.substream(0);
        Rng design_rng = trial_rng.substream(1);
        const ChannelSet est = draw_channel_set(
            dims, ErrorModel::perfect(), ErrorModel::perfect(), est_rng);
        const PolicyDesign des =
            design_with_policy(policy, dims, est, budgets, design_rng);

        double min_eps = std::numeric_limits<double>::quiet_NaN();
        double smse_v = std::numeric_limits<double>::quiet_NaN();
        bool converged = false;
        if (des.ok) {
          min_eps = std::numeric_limits<double>::infinity();
          for (int e = 0; e < dims.K_E; ++e)
            min_eps = std::min(min_eps,
                               dims.Gamma + des.report.constraint_residuals(e));
          smse_v = des.report.final_smse;
          converged = des.report.converged;
        }
        const bool satisfied = des.ok && min_eps >= dims.Gamma - kFeasTol;
        csv.row({c.experiment, c.thr_policy, num(c.gamma_grid(gi)), num(an),
                 num(trial), num(min_eps), num(int(satisfied)),
                 num(int(converged)), num(smse_v)});
        if (c.progress)
          std::printf(
              "progress experiment=fig7_threshold gamma=%s sigma_z_sq=%s "
              "trial=%d done=1\n",
              num(c.gamma_grid(gi)).c_str(), num(an).c_str(), trial);
      }
    }
  }
  artifacts.push_back(file);
}

void run_fig8(const ResolvedConfig& c, Rng& root,
              const std::filesystem::path& out,
              std::vector<std::string>& artifacts) {
  const std::string file = c.experiment + ".csv";
  Csv csv(out / file,
          {"experiment", "policy", "group_id", "k_t", "ber_legit", "ber_eve",
           "mse_legit", "mse_eve", "converged"});

  SystemRunConfig sc;
  sc.layout.area_km2 = c.area_km2;
  sc.layout.n_bs = c.n_bs;
  sc.layout.sync_size = c.sync_size;
  sc.layout.n_members = c.n_members;
  sc.layout.n_eves = c.net_n_eves;
  sc.layout.group_radius_m = c.group_radius_m;
  sc.layout.carrier_freq_hz = c.carrier_freq_mhz * 1e6;
  sc.layout.h_bs_m = c.h_bs_m;
  sc.layout.h_ue_m = c.h_ue_m;
  sc.groups = c.groups;
  sc.cluster_size = c.cluster_size;
  sc.n_t = c.n_t;
  sc.n_r = c.n_r;
  sc.n_e = c.n_e;
  sc.n_s = c.n_s;
  sc.p_t = dbm_to_linear(c.net_p_t_dbm);
  sc.sigma_z_sq = c.net_sigma_z_sq;
  sc.gamma = c.gamma;
  sc.noise_power = dbm_to_linear(c.noise_dbm);
  sc.tau_tl = c.tau_tl;
  sc.tau_te = c.tau_te;
  sc.symbols = c.symbols;
  sc.beta = c.beta;
  sc.max_outer_iters = c.max_outer_iters;
  sc.max_robust_iters = c.max_robust_iters;
  sc.progress = c.progress;

  for (const std::string& pol : c.cluster_policies) {
    sc.policy = cluster_from_name(pol);
    // Same stream per policy: every policy sees identical deployments, so
    // the CDF comparison is paired group for group.
    Rng rng = root.substream(kSystemTag);
    const std::vector<GroupStat> stats = system_level_run(sc, rng);
    for (const GroupStat& s : stats)
      csv.row({c.experiment, pol, num(s.group_id), num(s.k_t),
               num(s.ber_legit), num(s.ber_eve), num(s.mse_legit),
               num(s.mse_eve), num(int(s.design_converged))});
  }
  artifacts.push_back(file);

  if (c.dump_layouts) {
    Rng rng = root.substream(kSystemTag);
    for (int g = 0; g < c.groups; ++g) {
      Rng layout_rng = rng.substream(std::uint64_t(g)).substream(0);
      const NetworkLayout layout =
          generate_system_scenario(sc.layout, layout_rng);
      const std::string name = "layout_" + std::to_string(g) + ".txt";
      std::ofstream f(out / name, std::ios::binary);
      if (!f) throw ConfigError("cannot write '" + (out / name).string() + "'");
      f << serialize_layout(layout);
      artifacts.push_back(name);
    }
  }
}

}  // namespace

std::vector<std::string> run_experiment(const ResolvedConfig& cfg,
                                        const std::string& config_path) {
  const std::filesystem::path out(cfg.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec)
    throw ConfigError("cannot create output directory '" + cfg.out_dir +
                      "': " + ec.message());

  Rng root(std::uint64_t(cfg.seed));
  std::vector<std::string> artifacts;

  if (cfg.experiment == "fig3_ber" || cfg.experiment == "fig4_mse" ||
      cfg.experiment == "custom") {
    run_policy_sweeps(cfg, root, out, artifacts);
  } else if (cfg.experiment == "fig5_gap") {
    run_fig5(cfg, root, out, artifacts);
  } else if (cfg.experiment == "fig6_an") {
    run_fig6(cfg, root, out, artifacts);
  } else if (cfg.experiment == "fig7_threshold") {
    run_fig7(cfg, root, out, artifacts);
  } else if (cfg.experiment == "fig8_system") {
    run_fig8(cfg, root, out, artifacts);
  } else {
    throw ConfigError("unknown experiment '" + cfg.experiment + "'");
  }

  std::ofstream mf(out / "manifest.txt", std::ios::binary);
  if (!mf)
    throw ConfigError("cannot write '" + (out / "manifest.txt").string() + "'");
  mf << "mcsec run manifest\n";
  mf << "schema = 1\n";
  mf << "version = " << build_version() << "\n";
  mf << "config = " << config_path << "\n";
  mf << "seed = " << cfg.seed << "\n";
  mf << "experiment = " << cfg.experiment << "\n";
  mf << "artifacts =";
  for (const std::string& a : artifacts) mf << " " << a;
  mf << "\n[resolved]\n" << cfg.manifest_block();
  artifacts.push_back("manifest.txt");
  return artifacts;
}

}  // namespace mcsec
