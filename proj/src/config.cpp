#include "mcsec/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mcsec {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::vector<std::string> split_words(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

std::string Diagnostic::format() const {
  std::ostringstream os;
  os << file;
  if (line > 0) os << ":" << line;
  os << ": " << message;
  return os.str();
}

ConfigFile ConfigFile::parse_text(const std::string& text,
                                  const std::string& name,
                                  std::vector<Diagnostic>& issues) {
  ConfigFile cf;
  cf.name = name;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        issues.push_back({name, lineno, "malformed section header '" + line + "'"});
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      issues.push_back({name, lineno,
                        "expected 'key = value', got '" + line + "'"});
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      issues.push_back({name, lineno, "empty key before '='"});
      continue;
    }
    if (section.empty()) {
      issues.push_back({name, lineno,
                        "key '" + key + "' appears before any [section]"});
      continue;
    }
    cf.entries.push_back({section, key, value, lineno});
  }
  return cf;
}

ConfigFile ConfigFile::parse_file(const std::string& path,
                                  std::vector<Diagnostic>& issues) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_text(buf.str(), path, issues);
}

void ConfigFile::apply_override(const std::string& spec) {
  const size_t eq = spec.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + spec + "' is not of the form section.key=value");
  const std::string path = trim(spec.substr(0, eq));
  const std::string value = trim(spec.substr(eq + 1));
  const size_t dot = path.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 >= path.size())
    throw ConfigError("override '" + spec + "' is not of the form section.key=value");
  entries.push_back({path.substr(0, dot), path.substr(dot + 1), value, 0});
}

double dbm_to_linear(double dbm) { return std::pow(10.0, dbm / 10.0); }

namespace {

/// Typed access to the raw entries with consumption tracking. Last
/// assignment of a key wins; every diagnostic carries the winning line.
class Reader {
 public:
  Reader(const ConfigFile& raw, std::vector<Diagnostic>& issues)
      : raw_(raw), issues_(issues) {}

  bool has(const std::string& sec, const std::string& key) {
    return find(sec, key) != nullptr;
  }

  long integer(const std::string& sec, const std::string& key, long def,
               long lo, long hi) {
    const ConfigFile::Entry* e = find(sec, key);
    if (!e) return def;
    char* end = nullptr;
    const std::string v = trim(e->value);
    const long x = std::strtol(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size()) {
      complain(*e, "expected an integer, got '" + e->value + "'");
      return def;
    }
    if (x < lo || x > hi) {
      complain(*e, "value " + v + " outside [" + std::to_string(lo) + ", " +
                       std::to_string(hi) + "]");
      return def;
    }
    return x;
  }

  double real(const std::string& sec, const std::string& key, double def,
              double lo, double hi, bool lo_strict = false) {
    const ConfigFile::Entry* e = find(sec, key);
    if (!e) return def;
    double x = def;
    if (!parse_real(*e, e->value, x)) return def;
    if (x < lo || x > hi || (lo_strict && x == lo)) {
      complain(*e, "value " + fmt_double(x) + " outside " +
                       (lo_strict ? "(" : "[") + fmt_double(lo) + ", " +
                       fmt_double(hi) + "]");
      return def;
    }
    return x;
  }

  RealVector real_list(const std::string& sec, const std::string& key,
                       const RealVector& def) {
    const ConfigFile::Entry* e = find(sec, key);
    if (!e) return def;
    const std::vector<std::string> words = split_words(e->value);
    if (words.empty()) {
      complain(*e, "expected a non-empty list of numbers");
      return def;
    }
    RealVector out(words.size());
    for (size_t i = 0; i < words.size(); ++i) {
      double x = 0.0;
      if (!parse_real(*e, words[i], x)) return def;
      out(Eigen::Index(i)) = x;
    }
    return out;
  }

  std::string word(const std::string& sec, const std::string& key,
                   const std::string& def,
                   const std::vector<std::string>& allowed) {
    const ConfigFile::Entry* e = find(sec, key);
    if (!e) return def;
    const std::string v = trim(e->value);
    if (!allowed.empty() &&
        std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
      complain(*e, "value '" + v + "' not one of {" + join(allowed) + "}");
      return def;
    }
    return v;
  }

  std::vector<std::string> word_list(const std::string& sec,
                                     const std::string& key,
                                     const std::vector<std::string>& def,
                                     const std::vector<std::string>& allowed) {
    const ConfigFile::Entry* e = find(sec, key);
    if (!e) return def;
    const std::vector<std::string> words = split_words(e->value);
    if (words.empty()) {
      complain(*e, "expected a non-empty list");
      return def;
    }
    for (const std::string& w : words)
      if (std::find(allowed.begin(), allowed.end(), w) == allowed.end()) {
        complain(*e, "value '" + w + "' not one of {" + join(allowed) + "}");
        return def;
      }
    return words;
  }

  bool flag(const std::string& sec, const std::string& key, bool def) {
    const ConfigFile::Entry* e = find(sec, key);
    if (!e) return def;
    const std::string v = trim(e->value);
    if (v == "0" || v == "false") return false;
    if (v == "1" || v == "true") return true;
    complain(*e, "expected 0/1/true/false, got '" + v + "'");
    return def;
  }

  /// Any entry whose section.key was never requested is unknown.
  void reject_unknown() {
    for (const auto& e : raw_.entries) {
      if (!consumed_.count(e.section + "." + e.key))
        issues_.push_back({raw_.name, e.line,
                           "unknown key '" + e.section + "." + e.key + "'"});
    }
  }

  /// Line of the winning assignment, for cross-field diagnostics.
  int line_of(const std::string& sec, const std::string& key) const {
    int line = 0;
    for (const auto& e : raw_.entries)
      if (e.section == sec && e.key == key) line = e.line;
    return line;
  }

 private:
  const ConfigFile::Entry* find(const std::string& sec,
                                const std::string& key) {
    consumed_.insert(sec + "." + key);
    const ConfigFile::Entry* hit = nullptr;
    for (const auto& e : raw_.entries)
      if (e.section == sec && e.key == key) hit = &e;  // last one wins
    return hit;
  }

  bool parse_real(const ConfigFile::Entry& e, const std::string& word,
                  double& out) {
    const std::string v = trim(word);
    char* end = nullptr;
    out = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(out)) {
      complain(e, "expected a number, got '" + v + "'");
      return false;
    }
    return true;
  }

  static std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
      if (i) s += ", ";
      s += v[i];
    }
    return s;
  }

  void complain(const ConfigFile::Entry& e, const std::string& msg) {
    issues_.push_back({raw_.name, e.line, "key '" + e.section + "." + e.key +
                                              "': " + msg});
  }

  const ConfigFile& raw_;
  std::vector<Diagnostic>& issues_;
  std::set<std::string> consumed_;
};

RealVector make_vec(std::initializer_list<double> v) {
  RealVector out(Eigen::Index(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

ResolvedConfig resolve_config(const ConfigFile& raw,
                              std::vector<Diagnostic>& issues) {
  Reader r(raw, issues);
  ResolvedConfig c;
  c.snr_db = make_vec({0, 5, 10, 15, 20});
  c.policies = {"nr", "r_se", "r_nbe"};
  c.an_sigma_z_sq_grid = make_vec({0.0, 0.04, 0.09});
  c.gamma_grid = make_vec({0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9});
  c.cluster_policies = {"mbsfn", "greedy", "sc_ptm"};

  const std::vector<std::string> experiments = {
      "fig3_ber", "fig4_mse",      "fig5_gap",   "fig6_an",
      "fig7_threshold", "fig8_system", "custom"};
  const std::vector<std::string> design_pols = {"perfect", "nr", "r_se",
                                                "r_nbe"};
  const std::vector<std::string> cluster_pols = {"mbsfn", "greedy", "sc_ptm"};

  c.experiment = r.word("run", "experiment", "", experiments);
  c.seed = r.integer("run", "seed", c.seed, 0, (1L << 62));
  c.out_dir = r.word("run", "out", c.out_dir, {});
  c.progress = r.flag("run", "progress", c.progress);

  c.k_t = int(r.integer("system", "k_t", c.k_t, 1, 64));
  c.k_r = int(r.integer("system", "k_r", c.k_r, 1, 256));
  c.k_e = int(r.integer("system", "k_e", c.k_e, 0, 256));
  c.n_t = int(r.integer("system", "n_t", c.n_t, 1, 256));
  c.n_r = int(r.integer("system", "n_r", c.n_r, 1, 256));
  c.n_e = int(r.integer("system", "n_e", c.n_e, 1, 256));
  c.n_s = int(r.integer("system", "n_s", c.n_s, 1, 256));
  c.p_t_dbm = r.real("system", "p_t_dbm", c.p_t_dbm, -100.0, 100.0);
  c.sigma_z_sq = r.real("system", "sigma_z_sq", c.sigma_z_sq, 0.0, 1e12);
  c.gamma = r.real("system", "gamma", c.gamma, 0.0, 1e12, true);

  c.sigma_tl_sq = r.real("errors", "sigma_tl_sq", c.sigma_tl_sq, 0.0, 1e6);
  c.sigma_te_sq = r.real("errors", "sigma_te_sq", c.sigma_te_sq, 0.0, 1e6);
  c.tau_tl = r.real("errors", "tau_tl", c.tau_tl, 0.0, 1e6);
  c.tau_te = r.real("errors", "tau_te", c.tau_te, 0.0, 1e6);
  c.eval_model = r.word("errors", "eval_model", c.eval_model,
                        {"stochastic", "norm_bounded", "perfect"});

  c.snr_db = r.real_list("sweep", "snr_db", c.snr_db);
  c.trials = int(r.integer("sweep", "trials", c.trials, 1, 1000000));
  c.symbols = int(r.integer("sweep", "symbols", c.symbols, 0, 100000000));
  c.policies = r.word_list("sweep", "policies", c.policies, design_pols);

  c.beta = r.real("algorithm", "beta", c.beta, 0.0, 1.0, true);
  c.max_outer_iters =
      int(r.integer("algorithm", "max_outer_iters", c.max_outer_iters, 1, 100000));
  c.max_robust_iters =
      int(r.integer("algorithm", "max_robust_iters", c.max_robust_iters, 1, 100000));

  c.target_ber_legit =
      r.real("gap", "target_ber_legit", c.target_ber_legit, 0.0, 0.5, true);
  c.target_ber_eve =
      r.real("gap", "target_ber_eve", c.target_ber_eve, 0.0, 0.5, true);

  c.an_sigma_z_sq_grid =
      r.real_list("an", "sigma_z_sq_grid", c.an_sigma_z_sq_grid);
  c.an_policy = r.word("an", "policy", c.an_policy, design_pols);

  c.gamma_grid = r.real_list("threshold", "gamma_grid", c.gamma_grid);
  c.thr_sigma_z_sq_on =
      r.real("threshold", "sigma_z_sq_on", c.thr_sigma_z_sq_on, 0.0, 1e12);
  c.thr_snr_db = r.real("threshold", "snr_db", c.thr_snr_db, -50.0, 100.0);
  c.thr_policy = r.word("threshold", "policy", c.thr_policy, design_pols);

  c.area_km2 = r.real("network", "area_km2", c.area_km2, 0.0, 1e6, true);
  c.n_bs = int(r.integer("network", "n_bs", c.n_bs, 1, 100000));
  c.sync_size = int(r.integer("network", "sync_size", c.sync_size, 1, 100000));
  c.n_members = int(r.integer("network", "n_members", c.n_members, 0, 10000));
  c.net_n_eves = int(r.integer("network", "n_eves", c.net_n_eves, 0, 10000));
  c.group_radius_m =
      r.real("network", "group_radius_m", c.group_radius_m, 0.0, 1e7, true);
  c.carrier_freq_mhz =
      r.real("network", "carrier_freq_mhz", c.carrier_freq_mhz, 150.0, 1500.0);
  c.h_bs_m = r.real("network", "h_bs_m", c.h_bs_m, 30.0, 200.0);
  c.h_ue_m = r.real("network", "h_ue_m", c.h_ue_m, 1.0, 10.0);
  c.groups = int(r.integer("network", "groups", c.groups, 1, 100000));
  c.cluster_size =
      int(r.integer("network", "cluster_size", c.cluster_size, 1, 100000));
  c.net_p_t_dbm = r.real("network", "p_t_dbm", c.net_p_t_dbm, -100.0, 100.0);
  c.noise_dbm = r.real("network", "noise_dbm", c.noise_dbm, -200.0, 100.0);
  c.net_sigma_z_sq =
      r.real("network", "sigma_z_sq", c.net_sigma_z_sq, 0.0, 1e12);
  c.cluster_policies =
      r.word_list("network", "policies", c.cluster_policies, cluster_pols);
  c.dump_layouts = r.flag("network", "dump_layouts", c.dump_layouts);

  r.reject_unknown();

  // Cross-field invariants. Every violation is reported; none aborts.
  auto diag = [&](const std::string& sec, const std::string& key,
                  const std::string& msg) {
    issues.push_back({raw.name, r.line_of(sec, key), msg});
  };

  if (c.experiment.empty())
    diag("run", "experiment",
         "run.experiment is required (fig3_ber, fig4_mse, fig5_gap, fig6_an, "
         "fig7_threshold, fig8_system or custom)");
  if (c.n_s > std::min(c.n_t, c.n_r))
    diag("system", "n_s",
         "system.n_s = " + std::to_string(c.n_s) +
             " exceeds min(n_t, n_r) = " +
             std::to_string(std::min(c.n_t, c.n_r)) +
             "; cannot carry that many streams");
  if (c.k_e > 0 && c.gamma > double(c.n_s))
    diag("system", "gamma",
         "system.gamma = " + fmt_double(c.gamma) +
             " exceeds the eavesdropper-MSE ceiling: eps_e <= tr(I_Ns) = " +
             std::to_string(c.n_s) +
             ", so the floor can never bind above it");
  if (c.sigma_z_sq >= dbm_to_linear(c.p_t_dbm))
    diag("system", "sigma_z_sq",
         "system.sigma_z_sq = " + fmt_double(c.sigma_z_sq) +
             " leaves no power for data: per-BS budget is " +
             fmt_double(dbm_to_linear(c.p_t_dbm)) + " (linear)");
  for (Eigen::Index i = 1; i < c.snr_db.size(); ++i)
    if (!(c.snr_db(i) > c.snr_db(i - 1))) {
      diag("sweep", "snr_db", "sweep.snr_db must be strictly ascending");
      break;
    }
  for (Eigen::Index i = 0; i < c.gamma_grid.size(); ++i) {
    if (c.gamma_grid(i) <= 0.0 || c.gamma_grid(i) > double(c.n_s)) {
      diag("threshold", "gamma_grid",
           "threshold.gamma_grid entries must lie in (0, n_s]");
      break;
    }
    if (i > 0 && !(c.gamma_grid(i) > c.gamma_grid(i - 1))) {
      diag("threshold", "gamma_grid",
           "threshold.gamma_grid must be strictly ascending");
      break;
    }
  }
  for (Eigen::Index i = 0; i < c.an_sigma_z_sq_grid.size(); ++i) {
    if (c.an_sigma_z_sq_grid(i) < 0.0) {
      diag("an", "sigma_z_sq_grid", "an.sigma_z_sq_grid entries must be >= 0");
      break;
    }
    if (i > 0 && !(c.an_sigma_z_sq_grid(i) > c.an_sigma_z_sq_grid(i - 1))) {
      diag("an", "sigma_z_sq_grid",
           "an.sigma_z_sq_grid must be strictly ascending");
      break;
    }
  }
  if (c.experiment == "fig5_gap" && c.symbols < 1)
    diag("sweep", "symbols",
         "sweep.symbols must be >= 1 for fig5_gap (BER curves are required)");
  if (c.sync_size > c.n_bs)
    diag("network", "sync_size",
         "network.sync_size = " + std::to_string(c.sync_size) +
             " exceeds network.n_bs = " + std::to_string(c.n_bs));
  if (c.cluster_size > c.sync_size)
    diag("network", "cluster_size",
         "network.cluster_size = " + std::to_string(c.cluster_size) +
             " exceeds network.sync_size = " + std::to_string(c.sync_size));
  if (c.net_sigma_z_sq >= dbm_to_linear(c.net_p_t_dbm))
    diag("network", "sigma_z_sq",
         "network.sigma_z_sq leaves no power for data under network.p_t_dbm");

  return c;
}

namespace {
void append_kv(std::string& s, const std::string& key, const std::string& v) {
  s += key;
  s += " = ";
  s += v;
  s += "\n";
}
std::string vec_str(const RealVector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += " ";
    s += fmt_double(v(i));
  }
  return s;
}
std::string words_str(const std::vector<std::string>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += " ";
    s += v[i];
  }
  return s;
}
}  // namespace

std::string ResolvedConfig::manifest_block() const {
  std::string s;
  append_kv(s, "run.experiment", experiment);
  append_kv(s, "run.seed", std::to_string(seed));
  append_kv(s, "run.out", out_dir);
  append_kv(s, "run.progress", progress ? "1" : "0");
  append_kv(s, "system.k_t", std::to_string(k_t));
  append_kv(s, "system.k_r", std::to_string(k_r));
  append_kv(s, "system.k_e", std::to_string(k_e));
  append_kv(s, "system.n_t", std::to_string(n_t));
  append_kv(s, "system.n_r", std::to_string(n_r));
  append_kv(s, "system.n_e", std::to_string(n_e));
  append_kv(s, "system.n_s", std::to_string(n_s));
  append_kv(s, "system.p_t_dbm", fmt_double(p_t_dbm));
  append_kv(s, "system.sigma_z_sq", fmt_double(sigma_z_sq));
  append_kv(s, "system.gamma", fmt_double(gamma));
  append_kv(s, "errors.sigma_tl_sq", fmt_double(sigma_tl_sq));
  append_kv(s, "errors.sigma_te_sq", fmt_double(sigma_te_sq));
  append_kv(s, "errors.tau_tl", fmt_double(tau_tl));
  append_kv(s, "errors.tau_te", fmt_double(tau_te));
  append_kv(s, "errors.eval_model", eval_model);
  append_kv(s, "sweep.snr_db", vec_str(snr_db));
  append_kv(s, "sweep.trials", std::to_string(trials));
  append_kv(s, "sweep.symbols", std::to_string(symbols));
  append_kv(s, "sweep.policies", words_str(policies));
  append_kv(s, "algorithm.beta", fmt_double(beta));
  append_kv(s, "algorithm.max_outer_iters", std::to_string(max_outer_iters));
  append_kv(s, "algorithm.max_robust_iters", std::to_string(max_robust_iters));
  append_kv(s, "gap.target_ber_legit", fmt_double(target_ber_legit));
  append_kv(s, "gap.target_ber_eve", fmt_double(target_ber_eve));
  append_kv(s, "an.sigma_z_sq_grid", vec_str(an_sigma_z_sq_grid));
  append_kv(s, "an.policy", an_policy);
  append_kv(s, "threshold.gamma_grid", vec_str(gamma_grid));
  append_kv(s, "threshold.sigma_z_sq_on", fmt_double(thr_sigma_z_sq_on));
  append_kv(s, "threshold.snr_db", fmt_double(thr_snr_db));
  append_kv(s, "threshold.policy", thr_policy);
  append_kv(s, "network.area_km2", fmt_double(area_km2));
  append_kv(s, "network.n_bs", std::to_string(n_bs));
  append_kv(s, "network.sync_size", std::to_string(sync_size));
  append_kv(s, "network.n_members", std::to_string(n_members));
  append_kv(s, "network.n_eves", std::to_string(net_n_eves));
  append_kv(s, "network.group_radius_m", fmt_double(group_radius_m));
  append_kv(s, "network.carrier_freq_mhz", fmt_double(carrier_freq_mhz));
  append_kv(s, "network.h_bs_m", fmt_double(h_bs_m));
  append_kv(s, "network.h_ue_m", fmt_double(h_ue_m));
  append_kv(s, "network.groups", std::to_string(groups));
  append_kv(s, "network.cluster_size", std::to_string(cluster_size));
  append_kv(s, "network.p_t_dbm", fmt_double(net_p_t_dbm));
  append_kv(s, "network.noise_dbm", fmt_double(noise_dbm));
  append_kv(s, "network.sigma_z_sq", fmt_double(net_sigma_z_sq));
  append_kv(s, "network.policies", words_str(cluster_policies));
  append_kv(s, "network.dump_layouts", dump_layouts ? "1" : "0");
  return s;
}

}  // namespace mcsec
