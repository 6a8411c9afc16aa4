#include "varexp/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace varexp {

ConfigError::ConfigError(std::string key, int line, const std::string& message)
    : std::runtime_error((line > 0    ? "line " + std::to_string(line) + ": "
                          : line == 0 ? std::string("command line: ")
                                      : std::string("default value: ")) +
                         "key '" + key + "': " + message),
      key_(std::move(key)), line_(line) {}

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double to_real(const std::string& key, const std::string& v, int line) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
        throw ConfigError(key, line, "expected a real number, got '" + v + "'");
    }
    return out;
}

long long to_integer(const std::string& key, const std::string& v, int line) {
    long long out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
        throw ConfigError(key, line, "expected an integer, got '" + v + "'");
    }
    return out;
}

int to_int(const std::string& key, const std::string& v, int line) {
    const long long x = to_integer(key, v, line);
    if (x < -2147483647LL || x > 2147483647LL) {
        throw ConfigError(key, line, "integer out of range");
    }
    return static_cast<int>(x);
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&, int)>;

const std::vector<std::pair<std::string, Setter>>& setters() {
    static const std::vector<std::pair<std::string, Setter>> table{
        {"dimension", [](RunConfig& c, const auto& k, const auto& v, int l) { c.domain.dimension = to_int(k, v, l); }},
        {"x_lo", [](RunConfig& c, const auto& k, const auto& v, int l) { c.domain.x.lo = to_real(k, v, l); }},
        {"x_hi", [](RunConfig& c, const auto& k, const auto& v, int l) { c.domain.x.hi = to_real(k, v, l); }},
        {"a", [](RunConfig& c, const auto& k, const auto& v, int l) { c.domain.d2_x.lo = to_real(k, v, l); }},
        {"b", [](RunConfig& c, const auto& k, const auto& v, int l) { c.domain.d2_x.hi = to_real(k, v, l); }},
        {"y_lo", [](RunConfig& c, const auto& k, const auto& v, int l) { c.domain.y.lo = to_real(k, v, l); }},
        {"y_hi", [](RunConfig& c, const auto& k, const auto& v, int l) { c.domain.y.hi = to_real(k, v, l); }},
        {"c", [](RunConfig& c, const auto& k, const auto& v, int l) { c.domain.d2_y.lo = to_real(k, v, l); }},
        {"d", [](RunConfig& c, const auto& k, const auto& v, int l) { c.domain.d2_y.hi = to_real(k, v, l); }},
        {"p", [](RunConfig& c, const auto& k, const auto& v, int l) { c.domain.p = to_real(k, v, l); }},
        {"q", [](RunConfig& c, const auto& k, const auto& v, int l) { c.domain.q = to_real(k, v, l); }},
        {"n", [](RunConfig& c, const auto& k, const auto& v, int l) { c.n = to_int(k, v, l); }},
        {"lambda", [](RunConfig& c, const auto& k, const auto& v, int l) { c.lambda = to_real(k, v, l); }},
        {"lambda_list",
         [](RunConfig& c, const auto& k, const auto& v, int l) {
             c.lambda_list.clear();
             std::stringstream ss(v);
             std::string item;
             while (std::getline(ss, item, ',')) {
                 c.lambda_list.push_back(to_real(k, trim(item), l));
             }
         }},
        {"newton_tol", [](RunConfig& c, const auto& k, const auto& v, int l) { c.solver.newton_tol = to_real(k, v, l); }},
        {"monotone_tol",
         [](RunConfig& c, const auto& k, const auto& v, int l) { c.solver.monotone_tol = to_real(k, v, l); }},
        {"m_cap", [](RunConfig& c, const auto& k, const auto& v, int l) { c.solver.divergence_cap = to_real(k, v, l); }},
        {"mp_path_nodes", [](RunConfig& c, const auto& k, const auto& v, int l) { c.mp_path_nodes = to_int(k, v, l); }},
        {"mp_tol", [](RunConfig& c, const auto& k, const auto& v, int l) { c.mp_tol = to_real(k, v, l); }},
        {"seed",
         [](RunConfig& c, const auto& k, const auto& v, int l) {
             const long long s = to_integer(k, v, l);
             if (s < 0) {
                 throw ConfigError(k, l, "seed must be non-negative");
             }
             c.seed = static_cast<std::uint64_t>(s);
         }},
        {"out_dir",
         [](RunConfig& c, const auto& k, const auto& v, int l) {
             if (v.empty()) {
                 throw ConfigError(k, l, "empty path");
             }
             c.out_dir = v;
         }},
        {"t_max", [](RunConfig& c, const auto& k, const auto& v, int l) { c.t_max = to_real(k, v, l); }},
        {"dt0", [](RunConfig& c, const auto& k, const auto& v, int l) { c.dt0 = to_real(k, v, l); }},
        {"blowup_threshold",
         [](RunConfig& c, const auto& k, const auto& v, int l) { c.blowup_threshold = to_real(k, v, l); }},
    };
    return table;
}

} // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [name, _] : setters()) {
            k.push_back(name);
        }
        return k;
    }();
    return keys;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value, int line) {
    const auto& table = setters();
    const auto it = std::find_if(table.begin(), table.end(), [&](const auto& e) { return e.first == key; });
    if (it == table.end()) {
        throw ConfigError(key, line, "unknown key");
    }
    it->second(config, key, value, line);
    config.origins[key] = line;
}

RunConfig parse_config_text(const std::string& text, RunConfig base) {
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    std::map<std::string, int> seen;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (body.empty()) {
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(trim(body), line, "expected 'key = value'");
        }
        const std::string key = trim(body.substr(0, eq));
        if (key.empty()) {
            throw ConfigError("", line, "missing key before '='");
        }
        if (const auto prev = seen.find(key); prev != seen.end()) {
            throw ConfigError(key, line, "duplicate key (first set on line " + std::to_string(prev->second) + ")");
        }
        seen[key] = line;
        apply_setting(base, key, trim(body.substr(eq + 1)), line);
    }
    return base;
}

RunConfig parse_config_file(const std::string& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("<file>", 0, "cannot open config file '" + path + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), std::move(base));
}

void validate_config(const RunConfig& c) {
    const DomainSpec& d = c.domain;
    if (d.dimension != 1 && d.dimension != 2) {
        throw ConfigError("dimension", c.origin("dimension"), "must be 1 or 2");
    }
    if (!(d.x.lo < d.x.hi)) {
        throw ConfigError("x_hi", c.origin("x_hi"), "must exceed x_lo");
    }
    if (!(d.x.lo < d.d2_x.lo && d.d2_x.lo < d.d2_x.hi && d.d2_x.hi < d.x.hi)) {
        throw ConfigError("a", c.origin("a"), "need x_lo < a < b < x_hi");
    }
    if (d.dimension == 2) {
        if (!(d.y.lo < d.y.hi)) {
            throw ConfigError("y_hi", c.origin("y_hi"), "must exceed y_lo");
        }
        if (!(d.y.lo < d.d2_y.lo && d.d2_y.lo < d.d2_y.hi && d.d2_y.hi < d.y.hi)) {
            throw ConfigError("c", c.origin("c"), "need y_lo < c < d < y_hi");
        }
    }
    if (!(d.p > 2.0)) {
        throw ConfigError("p", c.origin("p"), "must exceed 2");
    }
    if (!(d.q + 1.0 > 2.0)) {
        throw ConfigError("q", c.origin("q"), "q + 1 = " + fmt17(d.q + 1.0) + " must exceed 2");
    }
    if (!(d.q + 1.0 < d.p)) {
        throw ConfigError("q", c.origin("q"), "q + 1 = " + fmt17(d.q + 1.0) + " must be below p = " + fmt17(d.p));
    }
    if (c.n < 5) {
        throw ConfigError("n", c.origin("n"), "need at least 5 nodes per axis");
    }
    if (!(c.lambda >= 0.0)) {
        throw ConfigError("lambda", c.origin("lambda"), "must be non-negative");
    }
    for (double l : c.lambda_list) {
        if (!(l > 0.0)) {
            throw ConfigError("lambda_list", c.origin("lambda_list"), "entries must be positive");
        }
    }
    if (!std::is_sorted(c.lambda_list.begin(), c.lambda_list.end())) {
        throw ConfigError("lambda_list", c.origin("lambda_list"), "must be sorted ascending");
    }
    if (!(c.solver.newton_tol > 0.0)) {
        throw ConfigError("newton_tol", c.origin("newton_tol"), "must be positive");
    }
    if (!(c.solver.monotone_tol > 0.0)) {
        throw ConfigError("monotone_tol", c.origin("monotone_tol"), "must be positive");
    }
    if (!(c.solver.divergence_cap > c.solver.monotone_tol)) {
        throw ConfigError("m_cap", c.origin("m_cap"), "must exceed monotone_tol");
    }
    if (c.mp_path_nodes < 3) {
        throw ConfigError("mp_path_nodes", c.origin("mp_path_nodes"), "need at least 3 path nodes");
    }
    if (!(c.mp_tol > 0.0)) {
        throw ConfigError("mp_tol", c.origin("mp_tol"), "must be positive");
    }
    if (!(c.t_max > 0.0)) {
        throw ConfigError("t_max", c.origin("t_max"), "must be positive");
    }
    if (!(c.dt0 > 0.0)) {
        throw ConfigError("dt0", c.origin("dt0"), "must be positive");
    }
    if (!(c.blowup_threshold > 0.0)) {
        throw ConfigError("blowup_threshold", c.origin("blowup_threshold"), "must be positive");
    }
}

int RunConfig::origin(const std::string& key) const {
    const auto it = origins.find(key);
    return it == origins.end() ? -1 : it->second;
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
    std::string list;
    for (std::size_t i = 0; i < lambda_list.size(); ++i) {
        list += (i ? "," : "") + fmt17(lambda_list[i]);
    }
    return {
        {"dimension", std::to_string(domain.dimension)},
        {"x_lo", fmt17(domain.x.lo)},
        {"x_hi", fmt17(domain.x.hi)},
        {"a", fmt17(domain.d2_x.lo)},
        {"b", fmt17(domain.d2_x.hi)},
        {"y_lo", fmt17(domain.y.lo)},
        {"y_hi", fmt17(domain.y.hi)},
        {"c", fmt17(domain.d2_y.lo)},
        {"d", fmt17(domain.d2_y.hi)},
        {"p", fmt17(domain.p)},
        {"q", fmt17(domain.q)},
        {"n", std::to_string(n)},
        {"lambda", fmt17(lambda)},
        {"lambda_list", list},
        {"newton_tol", fmt17(solver.newton_tol)},
        {"monotone_tol", fmt17(solver.monotone_tol)},
        {"m_cap", fmt17(solver.divergence_cap)},
        {"mp_path_nodes", std::to_string(mp_path_nodes)},
        {"mp_tol", fmt17(mp_tol)},
        {"seed", std::to_string(seed)},
        {"out_dir", out_dir},
        {"t_max", fmt17(t_max)},
        {"dt0", fmt17(dt0)},
        {"blowup_threshold", fmt17(blowup_threshold)},
    };
}

std::string RunConfig::hash() const {
    std::uint64_t h = 14695981039346656037ULL;
    for (const auto& [k, v] : entries()) {
        for (const char ch : k + "=" + v + "\n") {
            h ^= static_cast<unsigned char>(ch);
            h *= 1099511628211ULL;
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace varexp
