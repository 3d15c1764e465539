#pragma once

// Problem/config JSON parsing, CSV artifacts and the replicate-study driver
// used by the command-line tool. Needs nlohmann/json on the include path.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "optimizer.hpp"

namespace moeeqi::io {

using json = nlohmann::json;

/// Schema violation; `path` names the offending field, e.g. "config.beta".
class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string path, const std::string& msg)
        : std::runtime_error(path + ": " + msg), path_(std::move(path)) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

namespace detail {

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) throw ValidationError(path + "." + key, "required field is missing");
    return obj.at(key);
}

inline double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ValidationError(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ValidationError(path, "expected a finite number");
    return d;
}

inline int as_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ValidationError(path, "expected an integer");
    return v.get<int>();
}

inline bool as_bool(const json& v, const std::string& path) {
    if (!v.is_boolean()) throw ValidationError(path, "expected true or false");
    return v.get<bool>();
}

inline void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& path) {
    for (const auto& [k, _] : obj.items())
        if (std::none_of(known.begin(), known.end(), [&](const char* s) { return k == s; }))
            throw ValidationError(path + "." + k, "unknown field");
}

inline ImprovementMode parse_mode(const json& v, const std::string& path) {
    if (v == "aggressive") return ImprovementMode::aggressive;
    if (v == "non_aggressive") return ImprovementMode::non_aggressive;
    throw ValidationError(path, "expected \"aggressive\" or \"non_aggressive\"");
}

}  // namespace detail

// ---------------------------------------------------------------- problem

struct ProblemFile {
    ProblemSpec spec;
    double a = 0.0;
    std::optional<CostParams> cost;
    json echo;
};

inline CostParams parse_cost(const json& j, const std::string& path) {
    if (!j.is_object()) throw ValidationError(path, "expected an object");
    detail::reject_unknown(j,
                           {"dose_cost", "doses_per_person", "wastage", "population", "horizon_years",
                            "shelf_life_years", "center_setup", "staff_cost", "centers", "staff"},
                           path);
    CostParams c;
    auto num = [&](const char* key) { return detail::as_number(detail::require(j, key, path), path + "." + key); };
    c.dose_cost = num("dose_cost");
    c.doses_per_person = num("doses_per_person");
    c.wastage = num("wastage");
    c.population = num("population");
    c.horizon_years = num("horizon_years");
    c.shelf_life_years = num("shelf_life_years");
    c.center_setup = num("center_setup");
    c.staff_cost = num("staff_cost");
    c.centers = num("centers");
    c.staff = num("staff");
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ValidationError(path, e.what());
    }
    return c;
}

inline ProblemFile parse_problem(const json& j) {
    const std::string root = "problem";
    if (!j.is_object()) throw ValidationError(root, "expected a JSON object");
    detail::reject_unknown(j, {"kind", "a", "constraints", "cost"}, root);
    const auto& kind = detail::require(j, "kind", root);
    if (kind != "toy") throw ValidationError(root + ".kind", "only \"toy\" is supported");

    ProblemFile out;
    if (j.contains("a")) out.a = detail::as_number(j.at("a"), root + ".a");
    if (out.a < 0) throw ValidationError(root + ".a", "must be >= 0");

    ConstraintSpec cs;
    if (j.contains("constraints")) {
        const auto& c = j.at("constraints");
        const std::string cp = root + ".constraints";
        if (!c.is_object()) throw ValidationError(cp, "expected an object");
        detail::reject_unknown(c, {"upper"}, cp);
        const auto& up = detail::require(c, "upper", cp);
        if (!up.is_array() || up.size() != 2) throw ValidationError(cp + ".upper", "expected an array of two entries");
        for (std::size_t i = 0; i < 2; ++i)
            if (!up[i].is_null())
                cs.upper[i] = detail::as_number(up[i], cp + ".upper[" + std::to_string(i) + "]");
    }
    if (j.contains("cost")) out.cost = parse_cost(j.at("cost"), root + ".cost");
    out.spec = toy_problem(out.a, cs);
    out.echo = j;
    return out;
}

// ----------------------------------------------------------------- config

/// Settings that only the study command reads.
struct StudySettings {
    std::vector<double> betas;
    bool include_moeei = true;
    int truth_resolution = 500;
};

struct ConfigFile {
    RunConfig run;
    StudySettings study;
    json echo;
};

inline ConfigFile parse_config(const json& j) {
    const std::string root = "config";
    if (!j.is_object()) throw ValidationError(root, "expected a JSON object");
    detail::reject_unknown(j,
                           {"beta", "mc_samples", "iterations", "initial_design_size", "grid_resolution",
                            "mode_schedule", "comparator", "seed", "refit_hyperparameters",
                            "literal_constraint_formula", "min_score", "fit_restarts", "design_restarts",
                            "fixed_controls", "study"},
                           root);
    ConfigFile out;
    RunConfig& c = out.run;
    auto path = [&](const char* k) { return root + "." + k; };

    c.beta = detail::as_number(detail::require(j, "beta", root), path("beta"));
    if (!(c.beta >= 0.5 && c.beta < 1.0)) throw ValidationError(path("beta"), "must lie in [0.5, 1)");
    if (j.contains("mc_samples")) c.mc_samples = detail::as_int(j.at("mc_samples"), path("mc_samples"));
    if (c.mc_samples < 2) throw ValidationError(path("mc_samples"), "must be >= 2");
    if (j.contains("iterations")) c.iterations = detail::as_int(j.at("iterations"), path("iterations"));
    if (c.iterations < 0) throw ValidationError(path("iterations"), "must be >= 0");
    if (j.contains("initial_design_size"))
        c.initial_design_size = detail::as_int(j.at("initial_design_size"), path("initial_design_size"));
    if (c.initial_design_size < 2) throw ValidationError(path("initial_design_size"), "must be >= 2");
    if (j.contains("grid_resolution"))
        c.grid_resolution = detail::as_int(j.at("grid_resolution"), path("grid_resolution"));
    if (c.grid_resolution < 2) throw ValidationError(path("grid_resolution"), "must be >= 2");
    if (j.contains("fit_restarts")) c.fit_restarts = detail::as_int(j.at("fit_restarts"), path("fit_restarts"));
    if (c.fit_restarts < 1) throw ValidationError(path("fit_restarts"), "must be >= 1");
    if (j.contains("design_restarts"))
        c.design_restarts = detail::as_int(j.at("design_restarts"), path("design_restarts"));
    if (c.design_restarts < 1) throw ValidationError(path("design_restarts"), "must be >= 1");

    if (j.contains("mode_schedule")) {
        const auto& ms = j.at("mode_schedule");
        if (!ms.is_array()) throw ValidationError(path("mode_schedule"), "expected an array");
        int total = 0;
        for (std::size_t i = 0; i < ms.size(); ++i) {
            const std::string p = path("mode_schedule") + "[" + std::to_string(i) + "]";
            detail::reject_unknown(ms[i], {"mode", "iterations"}, p);
            ModeSpan span;
            span.mode = detail::parse_mode(detail::require(ms[i], "mode", p), p + ".mode");
            span.iterations = detail::as_int(detail::require(ms[i], "iterations", p), p + ".iterations");
            if (span.iterations < 0) throw ValidationError(p + ".iterations", "must be >= 0");
            total += span.iterations;
            c.mode_schedule.push_back(span);
        }
        if (total != c.iterations)
            throw ValidationError(path("mode_schedule"), "iteration counts must sum to config.iterations");
    }
    if (j.contains("comparator")) {
        const auto& v = j.at("comparator");
        if (v == "moeeqi")
            c.comparator = Comparator::moeeqi;
        else if (v == "moeei")
            c.comparator = Comparator::moeei;
        else
            throw ValidationError(path("comparator"), "expected \"moeeqi\" or \"moeei\"");
    }
    if (j.contains("seed")) {
        const auto& v = j.at("seed");
        if (!v.is_number_unsigned()) throw ValidationError(path("seed"), "expected a non-negative integer");
        c.seed = v.get<std::uint64_t>();
    }
    if (j.contains("refit_hyperparameters"))
        c.refit_hyperparameters = detail::as_bool(j.at("refit_hyperparameters"), path("refit_hyperparameters"));
    if (j.contains("literal_constraint_formula"))
        c.literal_constraint_formula =
            detail::as_bool(j.at("literal_constraint_formula"), path("literal_constraint_formula"));
    if (j.contains("min_score") && !j.at("min_score").is_null())
        c.min_score = detail::as_number(j.at("min_score"), path("min_score"));
    if (j.contains("fixed_controls")) {
        const auto& fc = j.at("fixed_controls");
        if (!fc.is_object()) throw ValidationError(path("fixed_controls"), "expected an object");
        for (const auto& [k, v] : fc.items()) {
            const std::string p = path("fixed_controls") + "." + k;
            std::size_t idx = 0;
            try {
                std::size_t used = 0;
                idx = std::stoul(k, &used);
                if (used != k.size()) throw std::invalid_argument(k);
            } catch (const std::exception&) {
                throw ValidationError(p, "keys must be zero-based coordinate indices");
            }
            c.fixed_controls[idx] = detail::as_number(v, p);
        }
    }

    out.study.betas = {c.beta};
    if (j.contains("study")) {
        const auto& st = j.at("study");
        const std::string sp = path("study");
        if (!st.is_object()) throw ValidationError(sp, "expected an object");
        detail::reject_unknown(st, {"betas", "include_moeei", "truth_resolution"}, sp);
        if (st.contains("betas")) {
            const auto& b = st.at("betas");
            if (!b.is_array() || b.empty()) throw ValidationError(sp + ".betas", "expected a non-empty array");
            out.study.betas.clear();
            for (std::size_t i = 0; i < b.size(); ++i) {
                const std::string p = sp + ".betas[" + std::to_string(i) + "]";
                const double v = detail::as_number(b[i], p);
                if (!(v >= 0.5 && v < 1.0)) throw ValidationError(p, "must lie in [0.5, 1)");
                out.study.betas.push_back(v);
            }
        }
        if (st.contains("include_moeei"))
            out.study.include_moeei = detail::as_bool(st.at("include_moeei"), sp + ".include_moeei");
        if (st.contains("truth_resolution"))
            out.study.truth_resolution = detail::as_int(st.at("truth_resolution"), sp + ".truth_resolution");
        if (out.study.truth_resolution < 2) throw ValidationError(sp + ".truth_resolution", "must be >= 2");
    }
    out.echo = j;
    return out;
}

inline json read_json_file(const std::filesystem::path& p, const std::string& what) {
    std::ifstream in(p);
    if (!in) throw ValidationError(what, "cannot open " + p.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(what, std::string("invalid JSON: ") + e.what());
    }
}

// -------------------------------------------------------------------- CSV

/// Shortest round-trippable text for a double (17 significant digits).
inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw std::runtime_error("CSV: no column " + name);
        return std::size_t(it - header.begin());
    }
    double number(std::size_t row, const std::string& name) const { return std::stod(rows.at(row).at(column(name))); }
};

inline void write_table(const std::filesystem::path& p, const Table& t) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
        out << '\n';
    };
    line(t.header);
    for (const auto& r : t.rows) line(r);
    if (!out) throw std::runtime_error("write failed for " + p.string());
}

inline Table read_table(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::stringstream ss(s);
        std::string c;
        while (std::getline(ss, c, ',')) cells.push_back(c);
        if (!s.empty() && s.back() == ',') cells.emplace_back();
        return cells;
    };
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty CSV " + p.string());
    t.header = split(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto r = split(line);
        if (r.size() != t.header.size()) throw std::runtime_error("ragged CSV row in " + p.string());
        t.rows.push_back(std::move(r));
    }
    return t;
}

/// Message text made safe for an unquoted CSV cell.
inline std::string csv_safe(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

inline std::vector<std::string> coord_names(std::size_t dim) {
    std::vector<std::string> n;
    for (std::size_t k = 0; k < dim; ++k) n.push_back("x" + std::to_string(k + 1));
    return n;
}

inline Table observations_table(const RunState& s) {
    Table t;
    const std::size_t v = s.datasets[0].dim();
    t.header = coord_names(v);
    for (const char* h : {"mean1", "variance1", "mean2", "variance2", "replications", "iteration_added"})
        t.header.push_back(h);
    for (std::size_t j = 0; j < s.datasets[0].size(); ++j) {
        const auto& a = s.datasets[0][j];
        const auto& b = s.datasets[1][j];
        std::vector<std::string> r;
        for (std::size_t k = 0; k < v; ++k) r.push_back(fmt(a.location[k]));
        r.insert(r.end(), {fmt(a.mean), fmt(a.variance), fmt(b.mean), fmt(b.variance),
                           std::to_string(a.replications), std::to_string(s.iteration_added.at(j))});
        t.rows.push_back(std::move(r));
    }
    return t;
}

inline Table front_table(const ParetoFront& f, std::size_t dim) {
    Table t;
    t.header = {"q1", "q2"};
    for (auto& n : coord_names(dim)) t.header.push_back(n);
    for (const auto& p : f) {
        std::vector<std::string> r{fmt(p.q1), fmt(p.q2)};
        for (std::size_t k = 0; k < dim; ++k) r.push_back(k < p.source.size() ? fmt(p.source[k]) : "");
        t.rows.push_back(std::move(r));
    }
    return t;
}

/// Parses a front table back; throws if it is not a valid staircase.
inline ParetoFront read_front(const Table& t) {
    std::vector<FrontPoint> pts;
    std::vector<std::size_t> xs;
    for (std::size_t k = 0; k < t.header.size(); ++k)
        if (t.header[k].size() > 1 && t.header[k][0] == 'x') xs.push_back(k);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        FrontPoint p;
        p.q1 = t.number(i, "q1");
        p.q2 = t.number(i, "q2");
        for (std::size_t k : xs) p.source.coords.push_back(std::stod(t.rows[i][k]));
        pts.push_back(std::move(p));
    }
    ParetoFront f(pts);
    if (f.size() != pts.size()) throw std::runtime_error("front CSV contains dominated or duplicate rows");
    for (std::size_t i = 0; i < pts.size(); ++i)
        if (f[i].q1 != pts[i].q1 || f[i].q2 != pts[i].q2)
            throw std::runtime_error("front CSV rows are not sorted by q1");
    return f;
}

inline Table evolution_table(const RunState& s) {
    Table t;
    const std::size_t v = s.datasets[0].dim();
    t.header = {"iteration", "mode", "score", "replicated", "fallback", "front_size"};
    for (auto& n : coord_names(v)) t.header.push_back(n);
    for (const auto& h : s.history) {
        std::vector<std::string> r{std::to_string(h.iteration), std::string(to_string(h.mode)), fmt(h.score),
                                   h.replicated ? "1" : "0",  h.fallback ? "1" : "0",
                                   std::to_string(h.front.size())};
        for (std::size_t k = 0; k < v; ++k) r.push_back(fmt(h.chosen[k]));
        t.rows.push_back(std::move(r));
    }
    return t;
}

// ------------------------------------------------------------- run command

struct RunOutcome {
    RunState state;
    double wall_seconds = 0.0;
};

inline json run_meta(const ProblemFile& problem, const ConfigFile& config, const RunConfig& effective,
                     const RunState& s, double wall_seconds) {
    json meta;
    meta["seed"] = effective.seed;
    json cfg = config.echo;
    cfg["seed"] = effective.seed;
    meta["config"] = cfg;
    meta["problem"] = problem.echo;
    meta["wall_time_seconds"] = wall_seconds;
    meta["iterations_completed"] = s.history.size();
    meta["stopped_early"] = s.stopped_early;
    meta["design_locations"] = s.datasets[0].size();
    meta["front_size"] = s.front.size();
    if (problem.cost) meta["intervention_cost"] = intervention_cost(*problem.cost);
    return meta;
}

inline RunOutcome execute_run(const ProblemFile& problem, const RunConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    RunOutcome out{run(problem.spec, cfg), 0.0};
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

inline void write_run_artifacts(const std::filesystem::path& dir, const ProblemFile& problem,
                                const ConfigFile& config, const RunConfig& effective, const RunOutcome& r) {
    std::filesystem::create_directories(dir);
    const std::size_t v = problem.spec.bounds.dim();
    write_table(dir / "observations.csv", observations_table(r.state));
    write_table(dir / "front.csv", front_table(r.state.front, v));
    write_table(dir / "evolution.csv", evolution_table(r.state));
    std::ofstream(dir / "run_meta.json") << run_meta(problem, config, effective, r.state, r.wall_seconds).dump(2)
                                         << '\n';
}

// ----------------------------------------------------------- study command

struct Variant {
    std::string name;
    Comparator comparator;
    double beta;
};

inline std::vector<Variant> study_variants(const StudySettings& st) {
    std::vector<Variant> v;
    for (double b : st.betas) v.push_back({"moeeqi_beta_" + fmt(b), Comparator::moeeqi, b});
    if (st.include_moeei) v.push_back({"moeei", Comparator::moeei, 0.5});
    return v;
}

/// Linear-interpolation quantile of an unsorted sample.
inline double sample_quantile(std::vector<double> xs, double p) {
    std::sort(xs.begin(), xs.end());
    const double h = (double(xs.size()) - 1.0) * p;
    const std::size_t lo = std::size_t(std::floor(h));
    const std::size_t hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (h - double(lo)) * (xs[hi] - xs[lo]);
}

struct StudyResult {
    int runs = 0;
    int failures = 0;
};

/// Runs `replicates` seeded repetitions of every variant and writes
/// metrics.csv (one row per variant, replicate and iteration),
/// metrics_summary.csv (mean and 5%/95% bands per variant and iteration)
/// and failures.csv. Replicate r uses seed base + r.
inline StudyResult run_study(const ProblemFile& problem, const ConfigFile& config, int replicates,
                             std::uint64_t base_seed, const std::filesystem::path& dir) {
    if (replicates < 1) throw ValidationError("replicates", "must be >= 1");
    if (!problem.spec.ground_truth) throw ValidationError("problem.kind", "study needs a problem with ground truth");
    std::filesystem::create_directories(dir);
    const ParetoFront truth = true_pareto_front(problem.spec, config.study.truth_resolution);
    const std::vector<double> factors{5.0, 10.0};

    Table metrics, failures;
    metrics.header = {"variant", "comparator", "beta", "replicate", "seed", "iteration",
                      "mean_distance", "penalized_5", "penalized_10", "front_size", "score"};
    failures.header = {"variant", "replicate", "seed", "iteration", "message"};
    // (variant, iteration) -> per-replicate columns for the summary.
    std::map<std::pair<std::size_t, int>, std::array<std::vector<double>, 4>> per_iter;

    StudyResult res;
    const auto variants = study_variants(config.study);
    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
        const auto& var = variants[vi];
        for (int r = 1; r <= replicates; ++r) {
            RunConfig cfg = config.run;
            cfg.comparator = var.comparator;
            cfg.beta = var.beta;
            cfg.seed = base_seed + std::uint64_t(r);
            ++res.runs;
            try {
                const RunState s = run(problem.spec, cfg);
                for (const auto& h : s.history) {
                    const Metrics m = evaluate_metrics(h.front, truth, factors);
                    metrics.rows.push_back({var.name, std::string(to_string(var.comparator)), fmt(var.beta),
                                            std::to_string(r), std::to_string(cfg.seed), std::to_string(h.iteration),
                                            fmt(m.mean_distance), fmt(m.penalized_distance[0]),
                                            fmt(m.penalized_distance[1]), std::to_string(m.front_size),
                                            fmt(h.score)});
                    auto& cols = per_iter[{vi, h.iteration}];
                    cols[0].push_back(m.mean_distance);
                    cols[1].push_back(m.penalized_distance[0]);
                    cols[2].push_back(m.penalized_distance[1]);
                    cols[3].push_back(double(m.front_size));
                }
            } catch (const RunError& e) {
                ++res.failures;
                failures.rows.push_back({var.name, std::to_string(r), std::to_string(cfg.seed),
                                         std::to_string(e.iteration()), csv_safe(e.what())});
            } catch (const std::exception& e) {
                ++res.failures;
                failures.rows.push_back({var.name, std::to_string(r), std::to_string(cfg.seed), "-1",
                                         csv_safe(e.what())});
            }
        }
    }

    Table summary;
    summary.header = {"variant", "iteration", "replicates"};
    for (const char* m : {"mean_distance", "penalized_5", "penalized_10", "front_size"})
        for (const char* s : {"_mean", "_q05", "_q95"}) summary.header.push_back(std::string(m) + s);
    for (const auto& [key, cols] : per_iter) {
        std::vector<std::string> row{variants[key.first].name, std::to_string(key.second),
                                     std::to_string(cols[0].size())};
        for (const auto& c : cols) {
            double mean = 0.0;
            for (double x : c) mean += x;
            mean /= double(c.size());
            row.insert(row.end(), {fmt(mean), fmt(sample_quantile(c, 0.05)), fmt(sample_quantile(c, 0.95))});
        }
        summary.rows.push_back(std::move(row));
    }
    write_table(dir / "metrics.csv", metrics);
    write_table(dir / "metrics_summary.csv", summary);
    write_table(dir / "failures.csv", failures);

    json meta;
    meta["base_seed"] = base_seed;
    meta["replicates"] = replicates;
    meta["config"] = config.echo;
    meta["problem"] = problem.echo;
    meta["runs"] = res.runs;
    meta["failures"] = res.failures;
    std::ofstream(dir / "study_meta.json") << meta.dump(2) << '\n';
    return res;
}

}  // namespace moeeqi::io
