// moeeqi: run single optimisations, compute ground-truth fronts, or drive
// seeded replicate studies from JSON problem/config files.
//
// Exit status: 0 success, 1 runtime failure, 2 invalid input.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <moeeqi/io.hpp>

namespace fs = std::filesystem;
using namespace moeeqi;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kInvalid = 2;

/// MOEEQI_SEED beats --seed, which beats the config file.
std::uint64_t resolve_seed(std::uint64_t from_config, const std::optional<std::uint64_t>& flag) {
    if (const char* env = std::getenv("MOEEQI_SEED"); env && *env) {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(env, &used);
            if (used == std::string(env).size()) return v;
        } catch (const std::exception&) {
        }
        throw io::ValidationError("MOEEQI_SEED", "expected a non-negative integer");
    }
    return flag.value_or(from_config);
}

void check_fixed_controls(const io::ProblemFile& p, const RunConfig& c) {
    const Box& b = p.spec.bounds;
    for (const auto& [k, v] : c.fixed_controls) {
        const std::string path = "config.fixed_controls." + std::to_string(k);
        if (k >= b.dim()) throw io::ValidationError(path, "coordinate index out of range");
        if (v < b.lower[k] || v > b.upper[k]) throw io::ValidationError(path, "value outside the control bounds");
    }
}

struct Inputs {
    io::ProblemFile problem;
    io::ConfigFile config;
};

Inputs load(const std::string& problem_path, const std::string& config_path) {
    Inputs in{io::parse_problem(io::read_json_file(problem_path, "problem")),
              io::parse_config(io::read_json_file(config_path, "config"))};
    check_fixed_controls(in.problem, in.config.run);
    return in;
}

int cmd_run(const std::string& problem_path, const std::string& config_path, const fs::path& out,
            const std::optional<std::uint64_t>& seed) {
    const Inputs in = load(problem_path, config_path);
    RunConfig cfg = in.config.run;
    cfg.seed = resolve_seed(cfg.seed, seed);
    const auto result = io::execute_run(in.problem, cfg);
    io::write_run_artifacts(out, in.problem, in.config, cfg, result);
    std::cout << "run: " << result.state.history.size() << " iterations, " << result.state.datasets[0].size()
              << " locations, front of " << result.state.front.size() << " points, seed " << cfg.seed << " ("
              << result.wall_seconds << " s) -> " << out.string() << "\n";
    return kOk;
}

int cmd_oracle(const std::string& problem_path, int resolution, const fs::path& out) {
    const auto problem = io::parse_problem(io::read_json_file(problem_path, "problem"));
    if (resolution < 2) throw io::ValidationError("resolution", "must be >= 2");
    if (!problem.spec.ground_truth) throw io::ValidationError("problem.kind", "problem has no ground truth");
    const ParetoFront f = true_pareto_front(problem.spec, resolution);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    io::write_table(out, io::front_table(f, problem.spec.bounds.dim()));
    std::cout << "oracle: " << f.size() << " front points at resolution " << resolution << " -> " << out.string()
              << "\n";
    return kOk;
}

int cmd_study(const std::string& problem_path, const std::string& config_path, int replicates, const fs::path& out,
              const std::optional<std::uint64_t>& seed) {
    const Inputs in = load(problem_path, config_path);
    const std::uint64_t base = resolve_seed(in.config.run.seed, seed);
    const auto res = io::run_study(in.problem, in.config, replicates, base, out);
    std::cout << "study: " << res.runs << " runs, " << res.failures << " failed -> " << out.string() << "\n";
    if (res.failures > 0) std::cerr << "see " << (out / "failures.csv").string() << "\n";
    return res.failures == res.runs ? kRuntime : kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-objective Bayesian optimisation under environmental uncertainty"};
    app.require_subcommand(1);

    std::string problem, config, out;
    std::optional<std::uint64_t> seed;
    int replicates = 20;
    int resolution = 500;

    auto* run = app.add_subcommand("run", "Run one sequential design and write CSV artifacts");
    run->add_option("--problem", problem, "Problem JSON file")->required();
    run->add_option("--config", config, "Run configuration JSON file")->required();
    run->add_option("--out", out, "Output directory")->required();
    run->add_option("--seed", seed, "Override the configured seed");

    auto* oracle = app.add_subcommand("oracle", "Write the ground-truth Pareto front as CSV");
    oracle->add_option("--problem", problem, "Problem JSON file")->required();
    oracle->add_option("--resolution", resolution, "Grid levels per control dimension")->capture_default_str();
    oracle->add_option("--out", out, "Output CSV file")->required();

    auto* study = app.add_subcommand("study", "Seeded replicate study over the configured betas and MO-E-EI");
    study->add_option("--problem", problem, "Problem JSON file")->required();
    study->add_option("--config", config, "Run configuration JSON file")->required();
    study->add_option("--out", out, "Output directory")->required();
    study->add_option("--replicates", replicates, "Replicates per variant")->capture_default_str();
    study->add_option("--seed", seed, "Base seed; replicate r uses base + r");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInvalid;
    }

    try {
        if (*run) return cmd_run(problem, config, out, seed);
        if (*oracle) return cmd_oracle(problem, resolution, out);
        return cmd_study(problem, config, replicates, out, seed);
    } catch (const io::ValidationError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
}
