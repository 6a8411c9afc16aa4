#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "varexp/mesh.hpp"
#include "varexp/solvers.hpp"

namespace varexp {

/// Bad configuration input. `line` is 0 for command-line overrides and -1
/// for a key that was never set (its default failed a cross-key check).
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, int line, const std::string& message);

    const std::string& key() const { return key_; }
    int line() const { return line_; }

private:
    std::string key_;
    int line_;
};

/// Resolved settings for one command run. Domain geometry lives in
/// `domain`; everything else is a solver knob or a per-command option.
struct RunConfig {
    DomainSpec domain{};
    int n = 201;
    double lambda = 1.0;
    std::vector<double> lambda_list;  // empty: commands pick their own
    SolverParams solver{};
    int mp_path_nodes = 41;
    double mp_tol = 1e-6;
    std::uint64_t seed = 42;
    std::string out_dir = "out";
    double t_max = 10.0;
    double dt0 = 1e-3;
    double blowup_threshold = 1e6;

    /// Where each key was last set: file line, 0 for the command line.
    std::map<std::string, int> origins;
    int origin(const std::string& key) const;

    /// Canonical `key = value` listing of every setting (17 significant digits).
    std::vector<std::pair<std::string, std::string>> entries() const;
    /// FNV-1a hash of the canonical listing, as 16 hex digits.
    std::string hash() const;
};

/// Names of every accepted key, in documentation order.
const std::vector<std::string>& config_keys();

/// Applies one `key = value` setting without validating cross-key constraints.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value, int line);

/// Parses `key = value` lines with `#` comments on top of `base`.
RunConfig parse_config_text(const std::string& text, RunConfig base = {});
RunConfig parse_config_file(const std::string& path, RunConfig base = {});

/// Cross-key checks (2 < q+1 < p, D2 inside the box, n >= 5, tolerances);
/// throws ConfigError naming the offending key.
void validate_config(const RunConfig& config);

} // namespace varexp
