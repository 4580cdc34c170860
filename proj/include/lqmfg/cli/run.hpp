#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lqmfg/cli/scenario.hpp"
#include "lqmfg/lqmfg.hpp"

namespace lqmfg::cli
{

/// One output file, held in memory until the whole run has succeeded.
struct Artifact
{
    std::string name;
    std::string content;
};

struct RunResult
{
    std::filesystem::path dir;
    std::vector<std::string> files;  // written in this order, manifest last
    double wall_seconds{0.0};
};

namespace detail
{

/// Seventeen significant digits, so values read back exactly.
inline std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline Json estimate_json(const MeanEstimate& e)
{
    return {{"mean", e.mean}, {"std_error", e.std_error}, {"count", e.count}};
}

inline Json error_json(const Error& e)
{
    return {{"kind", to_string(e.kind())}, {"message", e.what()}};
}

inline std::string dump(const Json& j)
{
    return j.dump(2) + "\n";
}

/// Header cells `name_i_j` (or `name_i` for vectors) for one n x m block.
inline void matrix_header(std::ostringstream& os, const std::string& name, Eigen::Index rows, Eigen::Index cols,
                          bool vector = false)
{
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
        {
            os << ',' << name << '_' << i;
            if (!vector)
                os << '_' << j;
        }
}

inline void matrix_cells(std::ostringstream& os, const Eigen::MatrixXd& m)
{
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            os << ',' << num(m(i, j));
}

inline std::string riccati_csv(const RiccatiSolution& sol, const FeedbackLaw& law)
{
    const auto n = sol.P[0].rows();
    const auto k = law.K_z[0].rows();
    std::ostringstream os;
    os << 't';
    matrix_header(os, "P", n, n);
    matrix_header(os, "Gamma", n, n);
    matrix_header(os, "Phi", n, 1, true);
    matrix_header(os, "Sigma", k, k);
    matrix_header(os, "K_z", k, n);
    matrix_header(os, "K_m", k, n);
    matrix_header(os, "c_u", k, 1, true);
    os << '\n';
    for (std::size_t j = 0; j < sol.P.size(); ++j)
    {
        os << num(sol.grid.time(j));
        matrix_cells(os, sol.P[j]);
        matrix_cells(os, sol.Gamma[j]);
        matrix_cells(os, sol.Phi[j]);
        matrix_cells(os, sol.Sigma[j]);
        matrix_cells(os, law.K_z[j]);
        matrix_cells(os, law.K_m[j]);
        matrix_cells(os, law.c_u[j]);
        os << '\n';
    }
    return os.str();
}

inline double max_frobenius_gap(const MatrixSeq& a, const MatrixSeq& b)
{
    double worst = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j)
        worst = std::max(worst, (a[j] - b[j]).norm());
    return worst;
}

inline Json validation_json(const ValidationReport& r)
{
    Json checks = Json::array();
    for (const auto& c : r.checks)
    {
        Json j{{"name", c.name}, {"passed", c.passed}};
        if (c.node)
            j["node"] = *c.node;
        if (!c.passed)
        {
            j["value"] = c.value;
            j["detail"] = c.detail;
        }
        checks.push_back(std::move(j));
    }
    return checks;
}

inline Json diagnostic_json(const DiagnosticReport& d)
{
    return {{"lambda_star", d.lambda_star}, {"norm_alpha", d.norm_alpha}, {"norm_C", d.norm_C},
            {"norm_C0", d.norm_C0},         {"norm_beta", d.norm_beta},   {"norm_beta0", d.norm_beta0},
            {"lhs", d.lhs},                 {"rhs", d.rhs},               {"holds", d.holds}};
}

struct SolveStage
{
    RiccatiSolution solution;
    Json crosscheck;
};

/// Solves by the configured routes. With `both`, the alternative route is
/// compared against the direct one and its failure is reported, not thrown.
inline SolveStage solve_stage(const LqMfgModel& model, const SolverSpec& s, const Json& config)
{
    SolveStage out;
    auto& cc = out.crosscheck;
    cc["format_version"] = format_version;
    cc["validation"] = validation_json(validate(model));
    cc["diagnostic"] = diagnostic_json(wellposedness_diagnostic(model));

    const IterativeOptions iter{s.max_iters, s.tol};
    auto& sol = out.solution;
    sol.grid = model.grid();

    Json p{{"method", s.p_method}};
    if (s.p_method == "iterative")
    {
        const auto r = solve_P_iterative(model, iter);
        sol.P = r.P;
        p["iterations"] = r.iterations;
        p["residual"] = r.residual;
        p["worst_monotonicity"] = r.worst_monotonicity;
    }
    else
    {
        sol.P = solve_P_direct(model);
        if (s.p_method == "both")
        {
            Json it;
            try
            {
                const auto r = solve_P_iterative(model, iter);
                it["iterations"] = r.iterations;
                it["residual"] = r.residual;
                it["worst_monotonicity"] = r.worst_monotonicity;
                it["max_frobenius_gap"] = max_frobenius_gap(r.P, sol.P);
            }
            catch (const Error& e)
            {
                it["error"] = error_json(e);
            }
            p["iterative"] = std::move(it);
        }
    }
    cc["P"] = std::move(p);

    Json g{{"method", s.gamma_method}};
    auto pi_json = [](const PiTransformResult& r) {
        double worst = std::numeric_limits<double>::infinity();
        for (double v : r.condition.node_min_eigenvalue)
            worst = std::min(worst, v);
        return Json{{"condition_holds", r.condition.all_pass()}, {"condition_min_eigenvalue", worst}};
    };
    if (s.gamma_method == "pi_transform")
    {
        const auto r = solve_Gamma_via_Pi(model, sol.P);
        sol.Gamma = r.Gamma;
        g["pi_transform"] = pi_json(r);
    }
    else
    {
        sol.Gamma = solve_Gamma_direct(model, sol.P);
        if (s.gamma_method == "both")
        {
            Json pt;
            try
            {
                const auto r = solve_Gamma_via_Pi(model, sol.P);
                pt = pi_json(r);
                pt["max_frobenius_gap"] = max_frobenius_gap(r.Gamma, sol.Gamma);
            }
            catch (const Error& e)
            {
                pt["error"] = error_json(e);
            }
            g["pi_transform"] = std::move(pt);
        }
    }
    cc["Gamma"] = std::move(g);
    cc["config"] = config;

    sol.Phi = solve_Phi(model, sol.P, sol.Gamma);
    sol.Sigma = compute_sigma(model, sol.P);
    return out;
}

inline Json rate_json(const RateFitReport& r, const std::string& key)
{
    return {{"key", key},
            {"statistic", r.statistic},
            {"values", r.values},
            {"std_errors", r.std_errors},
            {"slope", r.slope},
            {"intercept", r.intercept},
            {"slope_stderr", r.slope_stderr},
            {"half_order_constant", r.half_order_constant},
            {"degenerate", r.degenerate}};
}

inline std::string rate_csv(const RateFitReport& r)
{
    std::ostringstream os;
    os << "N,statistic,stderr\n";
    for (std::size_t i = 0; i < r.Ns.size(); ++i)
        os << r.Ns[i] << ',' << num(r.values[i]) << ',' << num(r.std_errors[i]) << '\n';
    return os.str();
}

inline void simulate_stage(const LqMfgModel& model, const FeedbackLaw& law, const ScenarioConfig& cfg,
                           const Json& config, std::vector<Artifact>& out)
{
    const auto& e = cfg.experiment;
    const auto& pre = cfg.output.prefix;
    const MeanFieldOptions mf{cfg.solver.m00_beta_literal};
    const auto Em = integrate_Em(model, law);
    const auto sample = simulate_population(model, law, Em, e.N, e.seed, {.mean_field = mf, .record_paths = true});
    const auto n = model.n();
    const auto k = model.k();
    const auto& grid = model.grid();

    std::ostringstream mcsv;
    mcsv << 't';
    matrix_header(mcsv, "m", n, 1, true);
    matrix_header(mcsv, "Em", n, 1, true);
    mcsv << '\n';
    for (std::size_t j = 0; j < grid.nodes(); ++j)
    {
        mcsv << num(grid.time(j));
        matrix_cells(mcsv, sample.m[j]);
        matrix_cells(mcsv, sample.Em[j]);
        mcsv << '\n';
    }
    out.push_back({pre + "meanfield.csv", mcsv.str()});

    std::ostringstream pcsv;
    pcsv << 't';
    matrix_header(pcsv, "xbar", n, 1, true);
    matrix_header(pcsv, "zhat_mean", n, 1, true);
    matrix_header(pcsv, "m", n, 1, true);
    pcsv << '\n';
    for (std::size_t j = 0; j < grid.nodes(); ++j)
    {
        Eigen::VectorXd zm = Eigen::VectorXd::Zero(n);
        for (std::size_t i = 0; i < e.N; ++i)
            zm += sample.z_hat[i][j];
        zm /= static_cast<double>(e.N);
        pcsv << num(grid.time(j));
        matrix_cells(pcsv, sample.state_average[j]);
        matrix_cells(pcsv, zm);
        matrix_cells(pcsv, sample.m[j]);
        pcsv << '\n';
    }
    out.push_back({pre + "population.csv", pcsv.str()});

    std::vector<std::size_t> agents = e.agents;
    if (agents.empty())
        for (std::size_t i = 1; i <= e.N; ++i)
            agents.push_back(i);
    for (std::size_t a : agents)
    {
        std::ostringstream acsv;
        acsv << 't';
        matrix_header(acsv, "zhat", n, 1, true);
        matrix_header(acsv, "u", k, 1, true);
        matrix_header(acsv, "x", n, 1, true);
        acsv << '\n';
        for (std::size_t j = 0; j < grid.nodes(); ++j)
        {
            acsv << num(grid.time(j));
            matrix_cells(acsv, sample.z_hat[a - 1][j]);
            matrix_cells(acsv, sample.u[a - 1][j]);
            matrix_cells(acsv, sample.x[a - 1][j]);
            acsv << '\n';
        }
        out.push_back({pre + "agent_" + std::to_string(a) + ".csv", acsv.str()});
    }

    Json rep{{"format_version", format_version},
             {"N", e.N},
             {"seed", e.seed},
             {"J_central", sample.J_central},
             {"J_limit", sample.J_limit},
             {"sup_average_gap", sample.sup_average_gap},
             {"sup_filtered_average_gap", sample.sup_filtered_average_gap},
             {"sup_agent_gap", sample.sup_agent_gap},
             {"config", config}};
    out.push_back({pre + "simulate.json", dump(rep)});
}

inline void rate_stage(const LqMfgModel& model, const FeedbackLaw& law, const ScenarioConfig& cfg, const Json& config,
                       std::vector<Artifact>& out)
{
    const auto& e = cfg.experiment;
    const auto& pre = cfg.output.prefix;
    const MeanFieldOptions mf{cfg.solver.m00_beta_literal};
    const auto ladder = run_ladder(model, law, e.Ns, e.S, e.seed, mf);

    std::vector<std::pair<std::string, LadderStatistic>> stats;
    if (e.kind == "rate_state")
        stats = {{"average_gap", LadderStatistic::average_gap},
                 {"agent_gap", LadderStatistic::agent_gap},
                 {"filtered_average_gap", LadderStatistic::filtered_average_gap}};
    else
        stats = {{"cost_gap", LadderStatistic::cost_gap}};

    Json list = Json::array();
    for (const auto& [key, stat] : stats)
    {
        const auto fit = fit_ladder(ladder, stat);
        list.push_back(rate_json(fit, key));
        out.push_back({pre + "rate_" + key + ".csv", rate_csv(fit)});
    }
    Json rep{{"format_version", format_version}, {"kind", e.kind}, {"Ns", e.Ns}, {"S", e.S},
             {"seed", e.seed}, {"statistics", std::move(list)}, {"config", config}};
    out.push_back({pre + "rate.json", dump(rep)});
}

inline void deviation_stage(const LqMfgModel& model, const FeedbackLaw& law, const ScenarioConfig& cfg,
                            const Json& config, std::vector<Artifact>& out)
{
    const auto& e = cfg.experiment;
    const auto& pre = cfg.output.prefix;
    const MeanFieldOptions mf{cfg.solver.m00_beta_literal};
    const auto rep = deviation_experiment(model, law, e.N, e.S, e.candidates, e.seed, mf);

    Json cands = Json::array();
    std::ostringstream csv;
    csv << "candidate,cost,cost_stderr,gain,gain_stderr,limit_gain,limit_gain_stderr,identical\n";
    for (const auto& r : rep.results)
    {
        const auto& c = r.candidate;
        cands.push_back({{"name", c.name},
                         {"theta", c.theta},
                         {"phi", c.phi},
                         {"offset", c.offset},
                         {"zero_control", c.zero_control},
                         {"cost", estimate_json(r.cost)},
                         {"gain", estimate_json(r.gain)},
                         {"limit_cost", estimate_json(r.limit_cost)},
                         {"limit_gain", estimate_json(r.limit_gain)},
                         {"identical", r.identical}});
        csv << c.name << ',' << num(r.cost.mean) << ',' << num(r.cost.std_error) << ',' << num(r.gain.mean) << ','
            << num(r.gain.std_error) << ',' << num(r.limit_gain.mean) << ',' << num(r.limit_gain.std_error) << ','
            << (r.identical ? 1 : 0) << '\n';
    }
    Json doc{{"format_version", format_version},
             {"N", rep.N},
             {"S", rep.S},
             {"seed", rep.seed},
             {"baseline_cost", estimate_json(rep.baseline_cost)},
             {"baseline_limit_cost", estimate_json(rep.baseline_limit_cost)},
             {"candidates", std::move(cands)},
             {"max_gain", rep.max_gain},
             {"max_limit_gain", rep.max_limit_gain}};
    if (!e.Ns.empty())
    {
        const auto decay = deviation_decay(model, law, e.Ns, e.S, e.candidates, e.seed, mf);
        doc["decay"] = rate_json(decay, "max_gain");
        doc["decay"]["Ns"] = e.Ns;
        out.push_back({pre + "deviation_decay.csv", rate_csv(decay)});
    }
    doc["config"] = config;
    out.push_back({pre + "deviation.csv", csv.str()});
    out.push_back({pre + "deviation.json", dump(doc)});
}

}  // namespace detail

/// Writes `content` to `path` through a temporary file and a rename, so a
/// reader never sees a partial file.
inline void write_atomic(const std::filesystem::path& path, const std::string& content)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f)
            throw IoError("cannot create '" + tmp.string() + "'");
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        f.flush();
        if (!f)
            throw IoError("cannot write '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
    {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot rename into '" + path.string() + "'");
    }
}

/// Computes every artifact of a scenario in memory. Nothing touches the
/// file system, so a failing run leaves no output behind.
[[nodiscard]] inline std::vector<Artifact> compute_artifacts(const ScenarioConfig& cfg)
{
    // Where the files go is not part of what they say.
    Json config = to_json(cfg);
    config.erase("output");
    const auto model = LqMfgModel::build(to_model_data(cfg.model, cfg.steps()));
    auto stage = detail::solve_stage(model, cfg.solver, config);
    const auto law = build_feedback(model, stage.solution);

    std::vector<Artifact> out;
    const auto& pre = cfg.output.prefix;
    out.push_back({pre + "riccati.csv", detail::riccati_csv(stage.solution, law)});
    out.push_back({pre + "crosscheck.json", detail::dump(stage.crosscheck)});

    const auto& kind = cfg.experiment.kind;
    if (kind == "simulate")
        detail::simulate_stage(model, law, cfg, config, out);
    else if (kind == "rate_state" || kind == "rate_cost")
        detail::rate_stage(model, law, cfg, config, out);
    else if (kind == "deviation")
        detail::deviation_stage(model, law, cfg, config, out);
    return out;
}

/// Runs a scenario and writes its artifacts plus a manifest into the output
/// directory. The manifest carries wall time and is the only artifact that
/// differs between repeated runs.
inline RunResult run(const ScenarioConfig& cfg)
{
    const auto start = std::chrono::steady_clock::now();
    const auto artifacts = compute_artifacts(cfg);

    RunResult res;
    res.dir = cfg.output.dir;
    std::error_code ec;
    std::filesystem::create_directories(res.dir, ec);
    if (ec)
        throw IoError("cannot create output directory '" + res.dir.string() + "'");
    Json files = Json::array();
    for (const auto& a : artifacts)
    {
        write_atomic(res.dir / a.name, a.content);
        res.files.push_back(a.name);
        files.push_back(a.name);
    }

    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream eigen;
    eigen << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION;
    Json manifest{{"format_version", format_version},
                  {"config", to_json(cfg)},
                  {"versions",
                   {{"lqmfg", version},
                    {"eigen", eigen.str()},
                    {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                          std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                          std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                    {"compiler", __VERSION__}}},
                  {"threads", thread_count()},
                  {"wall_time_seconds", res.wall_seconds},
                  {"artifacts", files}};
    const auto name = cfg.output.prefix + "manifest.json";
    write_atomic(res.dir / name, detail::dump(manifest));
    res.files.push_back(name);
    return res;
}

}  // namespace lqmfg::cli
