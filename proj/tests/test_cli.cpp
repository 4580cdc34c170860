#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lqmfg/cli/run.hpp"
#include "support.hpp"

using namespace lqmfg;
using namespace lqmfg::cli;
namespace fs = std::filesystem;

namespace
{

fs::path fresh_dir(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("lqmfg_test_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

const Artifact& find(const std::vector<Artifact>& v, const std::string& name)
{
    for (const auto& a : v)
        if (a.name == name)
            return a;
    throw std::runtime_error("missing artifact " + name);
}

/// Column `col` of a CSV body, with its header cell.
std::pair<std::string, std::vector<double>> csv_column(const std::string& text, std::size_t col)
{
    std::istringstream in(text);
    std::string line, header;
    std::vector<double> values;
    bool first = true;
    while (std::getline(in, line))
    {
        std::istringstream row(line);
        std::string cell;
        for (std::size_t c = 0; c <= col; ++c)
            std::getline(row, cell, ',');
        if (first)
            header = cell;
        else
            values.push_back(std::stod(cell));
        first = false;
    }
    return {header, values};
}

/// A 2-D model whose alpha is not a multiple of the identity.
const char* const non_scalar_alpha = R"({
  "model": {
    "n": 2, "k": 1, "T": 1, "steps": 50, "x0": [1, 0.5],
    "A": {"const": [[0.1, 0.2], [0, -0.3]]},
    "B": {"const": [[1], [0.5]]},
    "alpha": {"const": [[1, 0], [0, 2]]},
    "sigma": {"const": [0.2, 0.1]},
    "Q": {"const": [[1, 0], [0, 1]]},
    "R": {"const": [[1]]},
    "G": {"const": [[1, 0], [0, 1]]}
  },
  "solver": {"gamma_method": "both", "p_method": "both"}
})";

struct Exec
{
    int status;
    std::string out;
    std::string err;
};

Exec run_cli(const std::string& args, const std::string& tag)
{
    const auto dir = fresh_dir("exec_" + tag);
    fs::create_directories(dir);
    const auto out = dir / "stdout", err = dir / "stderr";
    const std::string cmd = std::string(LQMFG_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, read_file(out), read_file(err)};
}

}  // namespace

TEST(Preset, ClosedFormRiccatiColumnMatchesLogistic)
{
    const auto art = compute_artifacts(preset_config("netsec-closed-form"));
    const auto& csv = find(art, "riccati.csv").content;
    const auto [t_name, t] = csv_column(csv, 0);
    const auto [p_name, p] = csv_column(csv, 1);
    const auto [phi_name, phi] = csv_column(csv, 3);
    EXPECT_EQ(t_name, "t");
    EXPECT_EQ(p_name, "P_0_0");
    EXPECT_EQ(phi_name, "Phi_0");
    ASSERT_EQ(p.size(), 1001u);
    for (std::size_t j = 0; j < p.size(); ++j)
    {
        EXPECT_NEAR(p[j], test::closed_P(t[j]), 1e-6);
        EXPECT_EQ(phi[j], 0.0);
    }
}

TEST(Preset, NumericHasTerminalWeightFive)
{
    const auto cfg = preset_config("netsec-numeric");
    EXPECT_EQ(cfg.experiment.N, 50u);
    EXPECT_TRUE(validate(to_model_data(cfg.model, 100)).all_pass());
    const auto art = compute_artifacts([&] {
        auto c = cfg;
        c.experiment.kind = "solve";
        return c;
    }());
    const auto [name, p] = csv_column(find(art, "riccati.csv").content, 1);
    EXPECT_EQ(p.back(), 5.0);
}

TEST(Preset, UnknownNameIsUsageError)
{
    EXPECT_THROW((void)preset_config("nope"), UsageError);
}

TEST(Preset, MatchesLibraryPresetModel)
{
    for (const auto& name : preset_names())
    {
        const auto a = to_model_data(preset_spec(name), 40);
        const auto b = preset_model(name, 40);
        EXPECT_EQ(a.A.values(), b.A.values());
        EXPECT_EQ(a.D0.values(), b.D0.values());
        EXPECT_EQ(a.sigma0.values(), b.sigma0.values());
        EXPECT_EQ(a.Q.values(), b.Q.values());
        EXPECT_EQ(a.G, b.G);
        EXPECT_EQ(a.x0, b.x0);
    }
}

TEST(Scenario, RoundTripPreservesConfig)
{
    auto cfg = parse_scenario(non_scalar_alpha);
    cfg.experiment.kind = "deviation";
    cfg.experiment.Ns = {4, 8, 16, 32};
    cfg.experiment.candidates = {{"self", 1, 1, 0, false}, {"odd", 0.3, 1.7, -1e-17, false}};
    cfg.experiment.seed = 18446744073709551615ull;
    cfg.solver.steps = 77;
    cfg.solver.tol = 1.0 / 3.0;
    cfg.output.prefix = "run_";
    const auto again = parse_scenario(serialize(cfg));
    EXPECT_EQ(again, cfg);
    EXPECT_EQ(serialize(again), serialize(cfg));

    const auto preset = preset_config("netsec-numeric");
    EXPECT_EQ(parse_scenario(serialize(preset)), preset);
}

TEST(Scenario, ScheduleRoundTripAndLength)
{
    std::ostringstream os;
    os << R"({"model": {"n": 1, "k": 1, "steps": 4, "x0": [1], "R": {"const": [[1]]},
          "A": {"schedule": [[[0.1]], [[0.2]], [[0.3]], [[0.4]], [[0.5]]]}}})";
    const auto cfg = parse_scenario(os.str());
    EXPECT_EQ(parse_scenario(serialize(cfg)), cfg);
    const auto d = to_model_data(cfg.model, 4);
    EXPECT_EQ(d.A[2](0, 0), 0.3);
    EXPECT_THROW((void)to_model_data(cfg.model, 5), UsageError);
}

TEST(Scenario, SyntaxErrorReportsLineAndColumn)
{
    try
    {
        (void)parse_scenario("{\n  \"model\": {\"preset\": \"netsec-numeric\",}\n}");
        FAIL();
    }
    catch (const ParseError& e)
    {
        EXPECT_EQ(e.line(), 2u);
        EXPECT_EQ(e.column(), 40u);  // the stray '}'
    }
}

TEST(Scenario, SchemaErrorsNameTheKey)
{
    auto message = [](const std::string& text) -> std::string {
        try
        {
            (void)parse_scenario(text);
        }
        catch (const Error& e)
        {
            return e.what();
        }
        return "";
    };
    EXPECT_NE(message(R"({"model": {"preset": "netsec-numeric"}, "solver": {"p_metod": "direct"}})").find("/solver/p_metod"),
              std::string::npos);
    EXPECT_NE(message(R"({"model": {"preset": "netsec-numeric"}, "experiment": {"S": -3}})").find("/experiment/S"),
              std::string::npos);
    EXPECT_NE(message(R"({"model": {"preset": "netsec-numeric"}, "solver": {"p_method": "newton"}})").find("p_method"),
              std::string::npos);
    EXPECT_NE(message(R"({"model": {"n": 1, "A": {"const": [[1, 2], [3]]}}})").find("/model/A"), std::string::npos);
    EXPECT_NE(message(R"({"model": {"n": 1, "G": {"schedule": [[[1]]]}}})").find("/model/G"), std::string::npos);
    EXPECT_NE(message(R"({"solver": {}})").find("model"), std::string::npos);
    EXPECT_THROW((void)parse_scenario(R"({"model": {"preset": "nope"}})"), UsageError);
    EXPECT_THROW((void)parse_scenario(R"({"model": {"preset": "netsec-numeric"}, "experiment": {"kind": "x"}})"),
                 ParseError);
}

TEST(Run, PiPathReportsUsageErrorWhileDirectPathEmits)
{
    const auto art = compute_artifacts(parse_scenario(non_scalar_alpha));
    const auto cc = Json::parse(find(art, "crosscheck.json").content);
    EXPECT_EQ(cc["Gamma"]["pi_transform"]["error"]["kind"], "usage");
    EXPECT_LT(cc["P"]["iterative"]["max_frobenius_gap"].get<double>(), 1e-5);
    const auto [name, p] = csv_column(find(art, "riccati.csv").content, 1);
    EXPECT_EQ(p.size(), 51u);
}

TEST(Run, PiOnlyRouteFailsOnViolatedPrecondition)
{
    auto cfg = parse_scenario(non_scalar_alpha);
    cfg.solver.gamma_method = "pi_transform";
    EXPECT_THROW((void)compute_artifacts(cfg), UsageError);
}

TEST(Run, CrossCheckAgreesOnPreset)
{
    auto cfg = preset_config("netsec-closed-form");
    cfg.solver.p_method = "both";
    cfg.solver.gamma_method = "both";
    const auto cc = Json::parse(find(compute_artifacts(cfg), "crosscheck.json").content);
    EXPECT_LT(cc["P"]["iterative"]["max_frobenius_gap"].get<double>(), 1e-5);
    EXPECT_LT(cc["Gamma"]["pi_transform"]["max_frobenius_gap"].get<double>(), 1e-5);
    EXPECT_TRUE(cc["Gamma"]["pi_transform"]["condition_holds"].get<bool>());
    EXPECT_FALSE(cc["diagnostic"]["holds"].get<bool>());
}

TEST(Run, ShortLadderIsUsageError)
{
    auto cfg = preset_config("netsec-closed-form");
    cfg.experiment.kind = "rate_state";
    cfg.experiment.Ns = {10, 20, 40};
    cfg.experiment.S = 64;
    EXPECT_THROW((void)compute_artifacts(cfg), UsageError);
}

TEST(Run, ArtifactsAreByteIdenticalAcrossRuns)
{
    auto cfg = preset_config("netsec-closed-form");
    cfg.model.steps = 100;
    cfg.experiment.kind = "deviation";
    cfg.experiment.N = 4;
    cfg.experiment.S = 64;
    cfg.output.dir = fresh_dir("det_a").string();
    const auto a = run(cfg);
    cfg.output.dir = fresh_dir("det_b").string();
    const auto b = run(cfg);
    ASSERT_EQ(a.files, b.files);
    for (const auto& f : a.files)
        if (f != "manifest.json")
            EXPECT_EQ(read_file(a.dir / f), read_file(b.dir / f)) << f;
}

TEST(Run, WritesManifestAndNoTemporaries)
{
    auto cfg = preset_config("netsec-numeric");
    cfg.model.steps = 100;
    cfg.experiment.N = 3;
    cfg.experiment.agents = {2};
    cfg.output.dir = fresh_dir("manifest").string();
    cfg.output.prefix = "x_";
    const auto res = run(cfg);
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(res.dir))
        names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    EXPECT_EQ(names, (std::vector<std::string>{"x_agent_2.csv", "x_crosscheck.json", "x_manifest.json",
                                               "x_meanfield.csv", "x_population.csv", "x_riccati.csv",
                                               "x_simulate.json"}));
    const auto m = Json::parse(read_file(res.dir / "x_manifest.json"));
    EXPECT_EQ(m["format_version"], 1);
    EXPECT_EQ(m["artifacts"].size(), 6u);
    EXPECT_TRUE(m["versions"].contains("eigen"));
    EXPECT_TRUE(m["wall_time_seconds"].is_number());
    EXPECT_EQ(parse_scenario(m["config"].dump()), cfg);
}

TEST(Run, FailedRunWritesNothing)
{
    auto cfg = parse_scenario(non_scalar_alpha);
    cfg.solver.gamma_method = "pi_transform";
    cfg.output.dir = fresh_dir("failed").string();
    EXPECT_THROW((void)run(cfg), UsageError);
    EXPECT_FALSE(fs::exists(cfg.output.dir));
}

TEST(Run, SimulatedPathsMatchLibrary)
{
    auto cfg = preset_config("netsec-numeric");
    cfg.model.steps = 200;
    cfg.experiment.N = 5;
    cfg.experiment.seed = 12;
    const auto art = compute_artifacts(cfg);
    const auto model = LqMfgModel::build(preset_model("netsec-numeric", 200));
    const auto law = test::solve_law(model);
    const auto Em = integrate_Em(model, law);
    const auto sample = simulate_population(model, law, Em, 5, 12);
    const auto [zname, z] = csv_column(find(art, "agent_4.csv").content, 1);
    const auto [mname, m] = csv_column(find(art, "meanfield.csv").content, 1);
    EXPECT_EQ(zname, "zhat_0");
    EXPECT_EQ(mname, "m_0");
    for (std::size_t j = 0; j < z.size(); ++j)
    {
        EXPECT_EQ(z[j], sample.z_hat[3][j](0));
        EXPECT_EQ(m[j], sample.m[j](0));
    }
}

TEST(Run, RateReportHasCompanionCsv)
{
    auto cfg = preset_config("netsec-closed-form");
    cfg.model.steps = 50;
    cfg.experiment.kind = "rate_cost";
    cfg.experiment.Ns = {2, 4, 8, 16};
    cfg.experiment.S = 64;
    const auto art = compute_artifacts(cfg);
    const auto rep = Json::parse(find(art, "rate.json").content);
    EXPECT_EQ(rep["statistics"][0]["key"], "cost_gap");
    EXPECT_TRUE(rep["statistics"][0]["slope"].is_number());
    const auto [name, v] = csv_column(find(art, "rate_cost_gap.csv").content, 1);
    EXPECT_EQ(name, "statistic");
    ASSERT_EQ(v.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i)
        EXPECT_EQ(v[i], rep["statistics"][0]["values"][i].get<double>());
}

TEST(Executable, PresetRunSucceeds)
{
    const auto dir = fresh_dir("exe_ok");
    const auto r = run_cli("--preset netsec-closed-form --steps 200 --quiet --out " + dir.string(), "ok");
    EXPECT_EQ(r.status, 0) << r.err;
    EXPECT_TRUE(r.out.empty());
    const auto [name, p] = csv_column(read_file(dir / "riccati.csv"), 1);
    EXPECT_EQ(p.size(), 201u);
}

TEST(Executable, ShortLadderExitsWithUsageRecord)
{
    const auto dir = fresh_dir("exe_cfg");
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "s.json");
        f << R"({"model": {"preset": "netsec-closed-form", "steps": 50},
                 "experiment": {"kind": "rate_state", "Ns": [10, 20, 40], "S": 64}})";
    }
    const auto r = run_cli("--config " + (dir / "s.json").string() + " --out " + (dir / "out").string(), "ladder");
    EXPECT_EQ(r.status, 2);
    const auto err = Json::parse(r.err);
    EXPECT_EQ(err["format_version"], 1);
    EXPECT_EQ(err["error"]["kind"], "usage");
    EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Executable, ValidationFailureExitsNonzero)
{
    const auto dir = fresh_dir("exe_invalid");
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "s.json");
        f << R"({"model": {"n": 1, "k": 1, "steps": 10, "x0": [1], "R": {"const": [[0]]}}})";
    }
    const auto r = run_cli("--config " + (dir / "s.json").string() + " --out " + (dir / "out").string(), "invalid");
    EXPECT_EQ(r.status, 1);
    EXPECT_EQ(Json::parse(r.err)["error"]["kind"], "validation");
}

TEST(Executable, ConflictingSourcesAreUsageError)
{
    const auto r = run_cli("--preset netsec-numeric --config x.json", "conflict");
    EXPECT_EQ(r.status, 2);
    EXPECT_EQ(Json::parse(r.err)["error"]["kind"], "usage");
}

TEST(Scenario, SampleFilesParseAndValidate)
{
    std::size_t seen = 0;
    for (const auto& entry : fs::directory_iterator(LQMFG_SCENARIO_DIR))
    {
        if (entry.path().extension() != ".json")
            continue;
        const auto cfg = load_scenario(entry.path().string());
        EXPECT_TRUE(validate(to_model_data(cfg.model, cfg.steps())).all_pass()) << entry.path();
        EXPECT_EQ(parse_scenario(serialize(cfg)), cfg) << entry.path();
        ++seen;
    }
    EXPECT_GE(seen, 4u);
}
