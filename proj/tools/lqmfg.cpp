#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "lqmfg/cli/run.hpp"

namespace
{

using lqmfg::cli::Json;

/// Prints a machine-readable error record to stderr and returns the exit code.
int report(const std::string& kind, const std::string& message, std::size_t line = 0, std::size_t column = 0)
{
    Json err{{"kind", kind}, {"message", message}};
    if (line > 0)
    {
        err["line"] = line;
        err["column"] = column;
    }
    const Json doc{{"format_version", lqmfg::cli::format_version}, {"error", err}};
    std::cerr << doc.dump() << '\n';
    return kind == "usage" || kind == "parse" ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Linear-quadratic mean-field games with common noise: Riccati solves, population simulation and "
                 "convergence experiments."};
    app.set_version_flag("--version", lqmfg::version);

    std::string config_path, preset, out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> steps;
    bool quiet = false;
    auto* config_opt = app.add_option("--config", config_path, "Scenario file (JSON)");
    auto* preset_opt = app.add_option("--preset", preset, "Built-in scenario: netsec-closed-form, netsec-numeric");
    config_opt->excludes(preset_opt);
    app.add_option("--out", out_dir, "Output directory (overrides the scenario)");
    app.add_option("--seed", seed, "Base seed (overrides the scenario)");
    app.add_option("--steps", steps, "Grid steps M (overrides the scenario)")->check(CLI::PositiveNumber);
    app.add_flag("--quiet", quiet, "Print nothing on success");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForVersion& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        return report("usage", e.what());
    }

    try
    {
        if (config_opt->count() == 0 && preset_opt->count() == 0)
            throw lqmfg::UsageError("one of --config or --preset is required");
        auto cfg = config_opt->count() ? lqmfg::cli::load_scenario(config_path) : lqmfg::cli::preset_config(preset);
        if (!out_dir.empty())
            cfg.output.dir = out_dir;
        if (seed)
            cfg.experiment.seed = *seed;
        if (steps)
            cfg.solver.steps = *steps;

        const auto res = lqmfg::cli::run(cfg);
        if (!quiet)
        {
            std::cout << "wrote " << res.files.size() << " files to " << res.dir.string() << " in "
                      << res.wall_seconds << " s\n";
            for (const auto& f : res.files)
                std::cout << "  " << f << '\n';
        }
        return 0;
    }
    catch (const lqmfg::ParseError& e)
    {
        return report("parse", e.what(), e.line(), e.column());
    }
    catch (const lqmfg::Error& e)
    {
        return report(lqmfg::to_string(e.kind()), e.what());
    }
    catch (const std::exception& e)
    {
        return report("internal", e.what());
    }
}
