#pragma once

#include <string>
#include <vector>

#include "mcsec/config.hpp"
#include "mcsec/simkit.hpp"

namespace mcsec {

/// Library version baked in at build time (git describe when available).
std::string build_version();

/// Run the experiment selected by cfg.experiment, writing its CSV artifacts
/// plus manifest.txt into cfg.out_dir (created if missing). Returns the
/// artifact file names, manifest last. `config_path` is recorded in the
/// manifest verbatim.
///
/// Throws ConfigError for configs that should have been rejected earlier,
/// and NumericalError / SingularMatrixError / TargetNotBracketedError when
/// an experiment fails numerically.
std::vector<std::string> run_experiment(const ResolvedConfig& cfg,
                                        const std::string& config_path);

}  // namespace mcsec
