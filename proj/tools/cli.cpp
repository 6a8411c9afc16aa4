#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include "varexp/branches.hpp"
#include "varexp/config.hpp"
#include "varexp/solvers.hpp"
#include "varexp/version.hpp"

namespace varexp::cli {

namespace {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Failure that maps to a specific exit code; `detail` lands in the error JSON.
class Failure : public std::runtime_error {
public:
    Failure(int code, std::string kind, const std::string& message, ojson detail = ojson::object())
        : std::runtime_error(message), code_(code), kind_(std::move(kind)), detail_(std::move(detail)) {}
    int code() const { return code_; }
    const std::string& kind() const { return kind_; }
    const ojson& detail() const { return detail_; }

private:
    int code_;
    std::string kind_;
    ojson detail_;
};

struct Invocation {
    std::string command;
    std::string config_path;
    std::map<std::string, std::string> overrides;
    bool with_second = false;
    unsigned threads = 1;
    double z0 = 10.0;
    double star_tol = 1e-2;
    std::optional<double> lambda_fraction;
    double jacobian_fault = 1.0;  // hidden regression fixture
};

struct Report {
    int code = kOk;
    std::string status = "ok";
    ojson details = ojson::object();
    std::vector<std::string> outputs;
};

// Files are written only after the command has finished computing.
class OutputSet {
public:
    explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}

    void add(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }

    std::vector<std::string> flush() const {
        std::vector<std::string> names;
        for (const auto& [name, content] : files_) {
            std::ofstream os(dir_ / name, std::ios::binary);
            os << content;
            if (!os) {
                throw Failure(kSolverFailure, "io", "could not write " + (dir_ / name).string());
            }
            names.push_back(name);
        }
        return names;
    }

private:
    fs::path dir_;
    std::vector<std::pair<std::string, std::string>> files_;
};

std::string field_csv(const Field& u) {
    std::ostringstream os;
    write_field_csv(os, u);
    return os.str();
}

SolverParams solver_params(const RunConfig& cfg) {
    SolverParams p = cfg.solver;
    p.validate();
    return p;
}

MountainPassParams mp_params(const RunConfig& cfg) {
    MountainPassParams mp;
    mp.path_nodes = cfg.mp_path_nodes;
    mp.tol = cfg.mp_tol;
    mp.newton = solver_params(cfg);
    return mp;
}

LambdaStarEstimate threshold(const GridPtr& grid, const SolverParams& params, double tol) {
    const Supersolution sup = build_supersolution_small_lambda(grid, params);
    return estimate_lambda_star(grid, sup.lambda_tilde, 2.0 * sup.lambda_tilde, tol, params);
}

// --- commands ---------------------------------------------------------------

void solve_minimal(const RunConfig& cfg, const Invocation&, OutputSet& files, Report& rep, std::ostream& out) {
    if (!(cfg.lambda > 0.0)) {
        throw ConfigError("lambda", 0, "solve-minimal needs lambda > 0");
    }
    const GridPtr grid = Grid::build(cfg.domain, cfg.n);
    const IterationOutcome res = monotone_iteration(cfg.lambda, grid, solver_params(cfg));

    std::ostringstream trace;
    trace << "iteration,sup,energy\n";
    for (std::size_t k = 0; k < res.iterates_sup_norms.size(); ++k) {
        trace << k << ',' << fmt17(res.iterates_sup_norms[k]) << ',' << fmt17(res.energy_trace[k]) << '\n';
    }
    files.add("minimal_trace.csv", trace.str());
    if (res.solution) {
        files.add("minimal.csv", field_csv(*res.solution));
    }

    rep.status = to_string(res.status);
    rep.details = {{"lambda", cfg.lambda},
                   {"iterations", res.iterations},
                   {"sup", res.last_iterate.sup_norm()},
                   {"residual_sup", res.residual_sup},
                   {"min_increment", res.min_increment}};
    rep.code = res.status == IterationStatus::Converged ? kOk : kSolverFailure;
    out << "solve-minimal: lambda=" << fmt17(cfg.lambda) << " status=" << rep.status
        << " sup=" << fmt17(res.last_iterate.sup_norm()) << " iterations=" << res.iterations << '\n';
}

void lambda_star(const RunConfig& cfg, const Invocation& inv, OutputSet& files, Report& rep, std::ostream& out) {
    const GridPtr grid = Grid::build(cfg.domain, cfg.n);
    const LambdaStarEstimate est = threshold(grid, solver_params(cfg), inv.star_tol);
    files.add("lambda_star.json", to_json_text(est) + "\n");

    // no Converged probe may sit above a Diverged one
    double lowest_diverged = std::numeric_limits<double>::infinity();
    double highest_converged = -std::numeric_limits<double>::infinity();
    for (const Probe& p : est.trace) {
        if (p.status == IterationStatus::Diverged) {
            lowest_diverged = std::min(lowest_diverged, p.lambda);
        } else if (p.status == IterationStatus::Converged) {
            highest_converged = std::max(highest_converged, p.lambda);
        }
    }
    const bool ordered = highest_converged < lowest_diverged;
    const bool narrow = est.width() <= inv.star_tol * est.lo;

    rep.details = {{"lo", est.lo},
                   {"hi", est.hi},
                   {"relative_width", est.width() / est.lo},
                   {"probes", est.trace.size()},
                   {"refinement_stalled", est.refinement_stalled},
                   {"probes_ordered", ordered}};
    if (est.refinement_stalled) {
        rep.code = kSolverFailure;
        rep.status = "refinement_stalled";
    } else if (!ordered || !narrow) {
        rep.code = kContractFailure;
        rep.status = "contract_failed";
    }
    out << "lambda-star: lo=" << fmt17(est.lo) << " hi=" << fmt17(est.hi) << " probes=" << est.trace.size() << '\n';
}

void bifurcation(const RunConfig& cfg, const Invocation& inv, OutputSet& files, Report& rep, std::ostream& out) {
    const GridPtr grid = Grid::build(cfg.domain, cfg.n);
    const SolverParams params = solver_params(cfg);

    ScanOptions opt;
    opt.with_second = inv.with_second;
    opt.threads = inv.threads;
    opt.mountain_pass = mp_params(cfg);
    std::vector<double> lambdas = cfg.lambda_list;
    if (lambdas.empty() || inv.with_second) {
        const LambdaStarEstimate est = threshold(grid, params, inv.star_tol);
        opt.lambda_star_lo = est.lo;
        rep.details["lambda_star_lo"] = est.lo;
        if (lambdas.empty()) {
            for (double f : {0.2, 0.4, 0.6, 0.8}) {
                lambdas.push_back(f * est.lo);
            }
        }
        if (lambdas.back() >= est.lo) {
            throw ConfigError("lambda_list", 0, "entries must lie below the threshold estimate " + fmt17(est.lo));
        }
    }
    const BranchTable table = bifurcation_scan(grid, lambdas, opt, params);

    std::ostringstream csv;
    write_csv(csv, table);
    files.add("bifurcation.csv", csv.str());
    files.add("bifurcation.json", to_json_text(table) + "\n");

    // minimal branch must be nondecreasing in lambda; row failures are only reported
    bool monotone = true;
    std::optional<double> prev;
    ojson row_errors = ojson::array();
    for (const BranchRow& r : table.rows) {
        if (!r.error.empty()) {
            row_errors.push_back({{"lambda", r.lambda}, {"error", r.error}});
        }
        if (r.min_status != IterationStatus::Converged) {
            continue;
        }
        if (prev && r.min_sup < *prev - 1e-8) {
            monotone = false;
        }
        prev = r.min_sup;
    }
    rep.details["rows"] = table.rows.size();
    rep.details["minimal_branch_monotone"] = monotone;
    rep.details["row_errors"] = row_errors;
    if (!monotone) {
        rep.code = kContractFailure;
        rep.status = "contract_failed";
    }
    out << "bifurcation: " << table.rows.size() << " rows, " << row_errors.size() << " with errors\n";
}

void mountain_pass_cmd(const RunConfig& cfg, const Invocation& inv, OutputSet& files, Report& rep,
                       std::ostream& out) {
    const GridPtr grid = Grid::build(cfg.domain, cfg.n);
    const SolverParams params = solver_params(cfg);
    const LambdaStarEstimate est = threshold(grid, params, inv.star_tol);
    const double lambda = inv.lambda_fraction ? *inv.lambda_fraction * est.lo : cfg.lambda;
    if (!(lambda > 0.0 && lambda < est.lo)) {
        throw ConfigError("lambda", 0, "mountain-pass needs 0 < lambda < " + fmt17(est.lo));
    }

    const IterationOutcome o1 = monotone_iteration(0.9 * lambda, grid, params);
    const IterationOutcome o2 = monotone_iteration(std::min(1.1 * lambda, est.lo), grid, params);
    if (!o1.solution || !o2.solution) {
        throw SolverError("truncation bounds did not converge");
    }
    const Field& lower = *o1.solution;
    const Field utilde = minimize_truncated(lambda, lower, *o2.solution, params);
    const Field peak = default_peak(lambda, utilde, lower);
    const MPOutcome mp = mountain_pass(lambda, utilde, lower, peak, mp_params(cfg));

    files.add("utilde.csv", field_csv(utilde));
    files.add("second.csv", field_csv(mp.critical_point));

    bool above_floor = true;
    for (int d = 0; d < grid->dof_count(); ++d) {
        const auto k = static_cast<std::size_t>(grid->dof_node(d));
        above_floor = above_floor && mp.critical_point[k] >= lower[k] - 1e-8;
    }
    const bool distinct = mp.distance > 1e-2 * utilde.sup_norm();
    rep.status = to_string(mp.status);
    rep.details = {{"lambda", lambda},
                   {"lambda_star_lo", est.lo},
                   {"level", mp.level},
                   {"base_level", mp.base_level},
                   {"path_max", mp.path_max},
                   {"residual_sup", mp.residual_norm},
                   {"distance", mp.distance},
                   {"utilde_sup", utilde.sup_norm()},
                   {"second_sup", mp.critical_point.sup_norm()},
                   {"outer_iterations", mp.outer_iterations},
                   {"endpoints_fixed", mp.endpoints_fixed}};
    if (mp.status == MPStatus::Found) {
        const bool ok = mp.residual_norm <= cfg.mp_tol && mp.level >= mp.base_level - 1e-8 && above_floor &&
                        distinct && mp.endpoints_fixed;
        rep.code = ok ? kOk : kContractFailure;
    } else if (mp.status == MPStatus::PathCollapsed) {
        rep.code = mp.path_max - mp.base_level <= 1e-6 ? kOk : kContractFailure;
    } else {
        rep.code = kSolverFailure;
    }
    out << "mountain-pass: lambda=" << fmt17(lambda) << " status=" << rep.status << " level=" << fmt17(mp.level)
        << " residual=" << fmt17(mp.residual_norm) << '\n';
}

void blowup_demo(const RunConfig& cfg, const Invocation& inv, OutputSet& files, Report& rep, std::ostream& out) {
    const GridPtr grid = Grid::build(cfg.domain, cfg.n);
    const IndexBox box = interior_d1_box(*grid);
    Field z0(grid);
    for (int j = box.j0; j <= box.j1; ++j) {
        for (int i = box.i0; i <= box.i1; ++i) {
            const bool inner = i > box.i0 && i < box.i1 && (grid->dimension() == 1 || (j > box.j0 && j < box.j1));
            if (inner) {
                z0[static_cast<std::size_t>(grid->node(i, j))] = inv.z0;
            }
        }
    }
    BlowupParams bp;
    bp.dt0 = cfg.dt0;
    bp.t_max = cfg.t_max;
    bp.threshold = cfg.blowup_threshold;
    const BlowupReport res = parabolic_blowup(cfg.lambda, z0, box, bp);

    std::ostringstream csv;
    csv << "t,sup\n";
    for (std::size_t k = 0; k < res.times.size(); ++k) {
        csv << fmt17(res.times[k]) << ',' << fmt17(res.supnorm_trace[k]) << '\n';
    }
    files.add("blowup.csv", csv.str());

    bool decays = true;
    for (std::size_t k = 1; k < res.supnorm_trace.size(); ++k) {
        decays = decays && res.supnorm_trace[k] <= res.supnorm_trace[k - 1];
    }
    rep.status = res.inconclusive ? "inconclusive" : (res.blew_up ? "blew_up" : "bounded");
    rep.details = {{"lambda", cfg.lambda},
                   {"z0", inv.z0},
                   {"blew_up", res.blew_up},
                   {"inconclusive", res.inconclusive},
                   {"t_event", res.blew_up ? ojson(res.t_event) : ojson(nullptr)},
                   {"final_time", res.final_time},
                   {"steps", res.times.empty() ? 0 : res.times.size() - 1},
                   {"principal_eigenvalue", principal_eigenvalue(*grid, box)}};
    if (res.inconclusive) {
        rep.code = kSolverFailure;
    } else if (cfg.lambda == 0.0 && (res.blew_up || !decays)) {
        rep.code = kContractFailure;
    }
    out << "blowup-demo: lambda=" << fmt17(cfg.lambda) << " blew_up=" << (res.blew_up ? "true" : "false");
    if (res.blew_up) {
        out << " t_event=" << fmt17(res.t_event);
    }
    out << '\n';
}

void verify(const RunConfig& cfg, const Invocation& inv, OutputSet& files, Report& rep, std::ostream& out) {
    const GridPtr grid = Grid::build(cfg.domain, cfg.n);
    VerifyOptions opt;
    opt.seed = cfg.seed;
    opt.jacobian_fault = inv.jacobian_fault;
    const VerifyReport report = verify_suite(grid, solver_params(cfg), opt);
    const std::string text = to_json_text(report);
    files.add("verify.json", text + "\n");

    std::size_t failed = 0;
    for (const VerifyCheck& c : report.checks) {
        failed += c.passed ? 0 : 1;
        out << (c.passed ? "PASS " : "FAIL ") << c.name << " measured=" << fmt17(c.measured)
            << " threshold=" << fmt17(c.threshold) << '\n';
    }
    rep.details = {{"checks", report.checks.size()}, {"failed", failed}, {"all_passed", report.all_passed()}};
    if (!report.all_passed()) {
        rep.code = kContractFailure;
        rep.status = "checks_failed";
    }
}

using Command = void (*)(const RunConfig&, const Invocation&, OutputSet&, Report&, std::ostream&);

const std::vector<std::pair<std::string, std::string>>& command_help() {
    static const std::vector<std::pair<std::string, std::string>> help{
        {"solve-minimal", "minimal solution at `lambda` by monotone iteration"},
        {"lambda-star", "bracket the existence threshold by bisection"},
        {"bifurcation", "minimal (and optionally second) branch over `lambda_list`"},
        {"mountain-pass", "second solution at `lambda` via the truncated mountain pass"},
        {"blowup-demo", "parabolic blow-up run on an interior Laplacian box"},
        {"verify", "invariant battery; exit 4 if any check fails"},
    };
    return help;
}

Command lookup(const std::string& name) {
    if (name == "solve-minimal") return solve_minimal;
    if (name == "lambda-star") return lambda_star;
    if (name == "bifurcation") return bifurcation;
    if (name == "mountain-pass") return mountain_pass_cmd;
    if (name == "blowup-demo") return blowup_demo;
    return verify;
}

// Shortest round-trip spelling of numeric defaults, for --help only.
std::string help_value(const std::string& v) {
    double x = 0.0;
    const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || end != v.data() + v.size()) {
        return v;
    }
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

ojson config_json(const RunConfig& cfg) {
    ojson j = ojson::object();
    for (const auto& [k, v] : cfg.entries()) {
        j[k] = v;
    }
    return j;
}

void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& cfg, const Report& rep,
                    double seconds, const ojson& error) {
    ojson m;
    m["command"] = command;
    m["versions"] = {{"varexp", kVersion},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)}};
    m["config_hash"] = cfg.hash();
    m["seed"] = cfg.seed;
    m["config"] = config_json(cfg);
    m["status"] = rep.status;
    m["exit_code"] = rep.code;
    m["details"] = rep.details;
    m["outputs"] = rep.outputs;
    m["timings"] = {{"total_seconds", seconds}};
    if (!error.is_null()) {
        m["error"] = error;
    }
    std::ofstream os(dir / (command + ".manifest.json"));
    os << m.dump(2) << '\n';
}

ojson error_json(const std::string& kind, const std::string& message, const ojson& detail) {
    ojson e{{"kind", kind}, {"message", message}};
    for (const auto& [k, v] : detail.items()) {
        e[k] = v;
    }
    return e;
}

} // namespace

void write_field_csv(std::ostream& os, const Field& u) {
    const Grid& g = u.grid();
    const bool two_d = g.dimension() == 2;
    os << (two_d ? "x,y,u\n" : "x,u\n");
    for (std::size_t k = 0; k < g.node_count(); ++k) {
        const int node = static_cast<int>(k);
        os << fmt17(g.x(g.index_x(node))) << ',';
        if (two_d) {
            os << fmt17(g.y(g.index_y(node))) << ',';
        }
        os << fmt17(u[k]) << '\n';
    }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Invocation inv;
    const auto default_entries = RunConfig{}.entries();
    const std::map<std::string, std::string> default_values(default_entries.begin(), default_entries.end());

    CLI::App app{"Mixed Laplacian / p-Laplacian concave-convex solver"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--config", inv.config_path, "key = value configuration file")->check(CLI::ExistingFile);
    for (const std::string& key : config_keys()) {
        const auto it = default_values.find(key);
        const std::string def = it == default_values.end() || it->second.empty() ? "(none)" : help_value(it->second);
        app.add_option_function<std::string>(
               "--" + key, [&inv, key](const std::string& v) { inv.overrides[key] = v; },
               "overrides `" + key + "` (default " + def + ")")
            ->group("Configuration keys");
    }
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, help] : command_help()) {
        subs[name] = app.add_subcommand(name, help);
    }
    subs["lambda-star"]->add_option("--tol", inv.star_tol, "relative bracket width")->capture_default_str();
    subs["bifurcation"]->add_flag("--second", inv.with_second, "also compute the mountain-pass branch");
    subs["bifurcation"]->add_option("--threads", inv.threads, "concurrent rows")->capture_default_str();
    subs["mountain-pass"]->add_option("--lambda-fraction", inv.lambda_fraction,
                                      "use lambda = fraction * threshold estimate instead of `lambda`");
    subs["blowup-demo"]->add_option("--z0", inv.z0, "initial value inside the box")->capture_default_str();
    // regression fixture: scales the p-element Jacobian weights
    subs["verify"]->add_option("--jacobian-fault", inv.jacobian_fault)->group("");

    std::vector<std::string> rest(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(rest.begin(), rest.end());
    try {
        app.parse(rest);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << ojson{{"exit_code", kConfigError}, {"error", error_json("usage", e.what(), ojson::object())}}.dump()
            << '\n';
        return kConfigError;
    }
    for (const auto& [name, sub] : subs) {
        if (sub->parsed()) {
            inv.command = name;
        }
    }

    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg;
    Report rep;
    std::optional<fs::path> dir;
    ojson error;
    try {
        try {
            if (!inv.config_path.empty()) {
                cfg = parse_config_file(inv.config_path, cfg);
            }
            for (const std::string& key : config_keys()) {
                if (const auto it = inv.overrides.find(key); it != inv.overrides.end()) {
                    apply_setting(cfg, key, it->second, 0);
                }
            }
            validate_config(cfg);
            std::error_code ec;
            fs::create_directories(cfg.out_dir, ec);
            if (ec) {
                throw ConfigError("out_dir", 0, "cannot create '" + cfg.out_dir + "': " + ec.message());
            }
            dir = fs::path(cfg.out_dir);

            OutputSet files(*dir);
            lookup(inv.command)(cfg, inv, files, rep, out);
            rep.outputs = files.flush();
        } catch (const ConfigError& e) {
            throw Failure(kConfigError, "config", e.what(), {{"key", e.key()}, {"line", e.line()}});
        } catch (const GridError& e) {
            throw Failure(kConfigError, "config", e.what());
        } catch (const BracketError& e) {
            throw Failure(kSolverFailure, "bracket", e.what());
        } catch (const SolverError& e) {
            throw Failure(kSolverFailure, "solver", e.what(),
                          {{"iteration", e.iteration()}, {"residual", e.residual()}});
        } catch (const std::invalid_argument& e) {
            throw Failure(kConfigError, "config", e.what());
        }
    } catch (const Failure& f) {
        rep.code = f.code();
        rep.status = "error";
        error = error_json(f.kind(), f.what(), f.detail());
    } catch (const std::exception& e) {
        rep.code = kSolverFailure;
        rep.status = "error";
        error = error_json("internal", e.what(), ojson::object());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (dir) {
        write_manifest(*dir, inv.command, cfg, rep, seconds, error);
    }
    if (rep.code != kOk) {
        ojson e{{"command", inv.command}, {"exit_code", rep.code}, {"status", rep.status}};
        if (!error.is_null()) {
            e["error"] = error;
        }
        e["details"] = rep.details;
        err << e.dump() << '\n';
    }
    return rep.code;
}

} // namespace varexp::cli
