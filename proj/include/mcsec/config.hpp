#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "mcsec/numerics.hpp"

namespace mcsec {

/// Fatal configuration problem (unreadable file, malformed override, ...).
/// Schema and invariant violations are usually collected as Diagnostics
/// instead so `validate` can list all of them at once.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One schema or invariant violation, tied to the source line when the
/// offending value came from the file (line 0 = default or override).
struct Diagnostic {
  std::string file;
  int line = 0;
  std::string message;

  std::string format() const;
};

/// Raw parse of the line-oriented config grammar:
///   [section]
///   key = value            # comment
/// Values are kept verbatim (lists split later). Later assignments of the
/// same section.key win, which is how --set overrides work.
struct ConfigFile {
  struct Entry {
    std::string section;
    std::string key;
    std::string value;
    int line = 0;  // 0 for --set overrides
  };

  std::string name;  // file path or override marker, for diagnostics
  std::vector<Entry> entries;

  /// Parse a file from disk. Throws ConfigError when the file cannot be
  /// read; grammar problems become Diagnostics.
  static ConfigFile parse_file(const std::string& path,
                               std::vector<Diagnostic>& issues);
  static ConfigFile parse_text(const std::string& text, const std::string& name,
                               std::vector<Diagnostic>& issues);

  /// Apply one "section.key=value" override (the --set argument form).
  /// Throws ConfigError when the spec does not have that shape.
  void apply_override(const std::string& spec);
};

/// The full typed configuration: union of every experiment's parameters,
/// each with the documented default. Experiment drivers read the fields
/// they need.
struct ResolvedConfig {
  // [run]
  std::string experiment;  // fig3_ber|fig4_mse|fig5_gap|fig6_an|fig7_threshold|fig8_system|custom
  long seed = 1;
  std::string out_dir = "runs/out";
  bool progress = false;

  // [system]
  int k_t = 4, k_r = 8, k_e = 2;
  int n_t = 16, n_r = 8, n_e = 4, n_s = 2;
  double p_t_dbm = 0.0;
  double sigma_z_sq = 0.09;
  double gamma = 0.5;

  // [errors] design budgets and the evaluation error model
  double sigma_tl_sq = 0.04, sigma_te_sq = 0.09;
  double tau_tl = 0.04, tau_te = 0.09;
  std::string eval_model = "stochastic";  // stochastic|norm_bounded|perfect

  // [sweep]
  RealVector snr_db;  // default {0,5,10,15,20}
  int trials = 3;
  int symbols = 10000;
  std::vector<std::string> policies;  // subset of perfect|nr|r_se|r_nbe

  // [algorithm]
  double beta = 1e-4;
  int max_outer_iters = 50;
  int max_robust_iters = 30;

  // [gap]
  double target_ber_legit = 1e-4;
  double target_ber_eve = 0.3;

  // [an]
  RealVector an_sigma_z_sq_grid;  // default {0, 0.04, 0.09}
  std::string an_policy = "r_se";

  // [threshold]
  RealVector gamma_grid;  // default 0.1 .. 0.9
  double thr_sigma_z_sq_on = 0.09;
  double thr_snr_db = 10.0;
  std::string thr_policy = "r_se";

  // [network]
  double area_km2 = 10.0;
  int n_bs = 100;
  int sync_size = 20;
  int n_members = 9;
  int net_n_eves = 2;
  double group_radius_m = 500.0;
  double carrier_freq_mhz = 700.0;
  double h_bs_m = 30.0;
  double h_ue_m = 1.5;
  int groups = 30;
  int cluster_size = 10;
  double net_p_t_dbm = 46.0;
  double noise_dbm = -100.0;
  double net_sigma_z_sq = 0.04;
  std::vector<std::string> cluster_policies;  // subset of mbsfn|greedy|sc_ptm
  bool dump_layouts = false;

  /// Deterministic "section.key = value" dump of every field in schema
  /// order, used by the run manifest.
  std::string manifest_block() const;
};

/// Type-check every entry against the schema, reject unknown keys (naming
/// key and line), fill a ResolvedConfig, and run the cross-field invariant
/// checks. All problems are appended to `issues`; the returned config is
/// best-effort usable only when `issues` stayed empty.
ResolvedConfig resolve_config(const ConfigFile& raw,
                              std::vector<Diagnostic>& issues);

/// dBm to linear power in milliwatt units (0 dBm = 1.0).
double dbm_to_linear(double dbm);

}  // namespace mcsec
