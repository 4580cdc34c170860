#pragma once

#include <json.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "lqmfg/error.hpp"
#include "lqmfg/grid.hpp"
#include "lqmfg/model.hpp"
#include "lqmfg/population.hpp"
#include "lqmfg/presets.hpp"

namespace lqmfg::cli
{

/// Insertion-ordered JSON so written documents keep a stable, readable key order.
using Json = nlohmann::ordered_json;

inline constexpr int format_version = 1;

/// Row-major matrix as written in scenario files.
using Rows = std::vector<std::vector<double>>;

/// A coefficient given either as one constant matrix or as M + 1 node values.
struct CoefficientSpec
{
    bool schedule{false};
    std::vector<Rows> values;

    bool operator==(const CoefficientSpec&) const = default;
};

/// The model block of a scenario. A preset model records only its name and
/// step count; its coefficients are filled in when the name is resolved.
struct ModelSpec
{
    std::string preset;
    int n{1};
    int k{1};
    double T{1.0};
    std::size_t steps{1000};
    std::vector<double> x0{0.0};
    double r_min{tol::r_min};
    std::map<std::string, CoefficientSpec> coefficients;

    bool operator==(const ModelSpec&) const = default;
};

struct SolverSpec
{
    /// Overrides the model's step count when set.
    std::optional<std::size_t> steps;
    std::string p_method{"direct"};      // direct | iterative | both
    std::string gamma_method{"direct"};  // direct | pi_transform | both
    bool m00_beta_literal{false};
    int max_iters{100};
    double tol{1e-10};

    bool operator==(const SolverSpec&) const = default;
};

struct ExperimentSpec
{
    std::string kind{"solve"};  // solve | simulate | rate_state | rate_cost | deviation
    std::vector<std::size_t> Ns;
    std::size_t S{256};
    std::uint64_t seed{1};
    std::size_t N{50};
    std::vector<Candidate> candidates{default_candidates()};
    /// Agents (1-based) whose paths are written by `simulate`; empty means all.
    std::vector<std::size_t> agents;

    bool operator==(const ExperimentSpec&) const = default;
};

struct OutputSpec
{
    std::string dir{"out"};
    std::string prefix;

    bool operator==(const OutputSpec&) const = default;
};

struct ScenarioConfig
{
    ModelSpec model;
    SolverSpec solver;
    ExperimentSpec experiment;
    OutputSpec output;

    bool operator==(const ScenarioConfig&) const = default;

    [[nodiscard]] std::size_t steps() const { return solver.steps.value_or(model.steps); }
};

/// Coefficient names in file order. G is terminal and may only be constant.
inline const std::vector<std::string>& coefficient_names()
{
    static const std::vector<std::string> names{"A",  "B",  "alpha", "b",     "C",      "D", "beta", "sigma",
                                                "C0", "D0", "beta0", "sigma0", "Q",     "R", "G"};
    return names;
}

inline const std::vector<std::string>& experiment_kinds()
{
    static const std::vector<std::string> kinds{"solve", "simulate", "rate_state", "rate_cost", "deviation"};
    return kinds;
}

namespace detail
{

inline Rows to_rows(const Eigen::MatrixXd& m)
{
    Rows r(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            r[i][j] = m(i, j);
    return r;
}

inline Eigen::MatrixXd to_matrix(const Rows& r)
{
    const auto rows = static_cast<Eigen::Index>(r.size());
    const auto cols = static_cast<Eigen::Index>(r.empty() ? 0 : r[0].size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            m(i, j) = r[i][j];
    return m;
}

/// Fills the coefficient blocks of a spec from a constant-coefficient model.
inline void fill_constant_coefficients(ModelSpec& spec, const ModelData& d)
{
    const std::pair<const char*, const CoefficientSchedule*> sched[] = {
        {"A", &d.A},   {"B", &d.B},   {"alpha", &d.alpha}, {"b", &d.b},           {"C", &d.C},
        {"D", &d.D},   {"beta", &d.beta}, {"sigma", &d.sigma}, {"C0", &d.C0},     {"D0", &d.D0},
        {"beta0", &d.beta0}, {"sigma0", &d.sigma0}, {"Q", &d.Q}, {"R", &d.R}};
    spec.coefficients.clear();
    for (const auto& [name, s] : sched)
        spec.coefficients[name] = {false, {to_rows((*s)[0])}};
    spec.coefficients["G"] = {false, {to_rows(d.G)}};
    spec.n = d.n;
    spec.k = d.k;
    spec.T = d.grid.horizon();
    spec.x0.assign(d.x0.data(), d.x0.data() + d.x0.size());
    spec.r_min = d.r_min;
}

/// Converts a byte offset into 1-based line and column.
inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte)
{
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    {
        if (text[i] == '\n')
        {
            ++line;
            col = 1;
        }
        else
            ++col;
    }
    return {line, col};
}

/// Typed access to one JSON object that rejects unknown keys.
class Reader
{
public:
    Reader(const Json& obj, std::string path) : obj_(obj), path_(std::move(path))
    {
        if (!obj_.is_object())
            fail("", "expected an object");
    }

    [[nodiscard]] bool has(const char* key) const { return obj_.contains(key); }

    [[nodiscard]] const Json& at(const char* key) const
    {
        seen_.push_back(key);
        return obj_.at(key);
    }

    template <class T>
    void get(const char* key, T& out) const
    {
        if (!has(key))
            return;
        out = as<T>(at(key), key);
    }

    template <class T>
    [[nodiscard]] T as(const Json& v, const std::string& key) const
    {
        if constexpr (std::is_same_v<T, bool>)
        {
            if (!v.is_boolean())
                fail(key, "expected a boolean");
            return v.get<bool>();
        }
        else if constexpr (std::is_same_v<T, std::string>)
        {
            if (!v.is_string())
                fail(key, "expected a string");
            return v.get<std::string>();
        }
        else if constexpr (std::is_floating_point_v<T>)
        {
            if (!v.is_number())
                fail(key, "expected a number");
            return v.get<double>();
        }
        else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>)
        {
            if (!v.is_number_unsigned())
                fail(key, "expected a nonnegative integer");
            return static_cast<T>(v.get<std::uint64_t>());
        }
        else if constexpr (std::is_integral_v<T>)
        {
            if (!v.is_number_integer())
                fail(key, "expected an integer");
            return static_cast<T>(v.get<std::int64_t>());
        }
        else
        {
            if (!v.is_array())
                fail(key, "expected an array");
            T out;
            for (std::size_t i = 0; i < v.size(); ++i)
                out.push_back(as<typename T::value_type>(v[i], key + "[" + std::to_string(i) + "]"));
            return out;
        }
    }

    /// Throws for any key that was never read.
    void finish() const
    {
        for (const auto& [key, _] : obj_.items())
            if (std::find(seen_.begin(), seen_.end(), key) == seen_.end())
                fail(key, "unknown key");
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const
    {
        throw ParseError(where(key) + ": " + what);
    }

    [[nodiscard]] std::string where(const std::string& key) const
    {
        return key.empty() ? (path_.empty() ? std::string("/") : path_) : path_ + "/" + key;
    }

private:
    const Json& obj_;
    std::string path_;
    mutable std::vector<std::string> seen_;
};

inline Rows parse_matrix(const Json& v, const std::string& where)
{
    if (!v.is_array() || v.empty())
        throw ParseError(where + ": expected a non-empty array of rows");
    Rows rows;
    // A flat array of numbers is a column vector.
    if (v[0].is_number())
    {
        for (std::size_t i = 0; i < v.size(); ++i)
        {
            if (!v[i].is_number())
                throw ParseError(where + ": expected numbers in a flat vector");
            rows.push_back({v[i].get<double>()});
        }
        return rows;
    }
    for (std::size_t i = 0; i < v.size(); ++i)
    {
        const auto& row = v[i];
        if (!row.is_array() || row.empty())
            throw ParseError(where + "[" + std::to_string(i) + "]: expected a non-empty row");
        std::vector<double> r;
        for (const auto& x : row)
        {
            if (!x.is_number())
                throw ParseError(where + "[" + std::to_string(i) + "]: expected numbers");
            r.push_back(x.get<double>());
        }
        if (!rows.empty() && r.size() != rows[0].size())
            throw ParseError(where + ": rows have different lengths");
        rows.push_back(std::move(r));
    }
    return rows;
}

inline CoefficientSpec parse_coefficient(const Json& v, const std::string& where)
{
    Reader r(v, where);
    CoefficientSpec c;
    if (r.has("const") == r.has("schedule"))
        r.fail("", "expected exactly one of \"const\" or \"schedule\"");
    if (r.has("const"))
    {
        c.values.push_back(parse_matrix(r.at("const"), where + "/const"));
    }
    else
    {
        c.schedule = true;
        const auto& s = r.at("schedule");
        if (!s.is_array() || s.empty())
            r.fail("schedule", "expected a non-empty array of matrices");
        for (std::size_t j = 0; j < s.size(); ++j)
            c.values.push_back(parse_matrix(s[j], where + "/schedule[" + std::to_string(j) + "]"));
    }
    r.finish();
    return c;
}

inline void require_choice(const Reader& r, const char* key, const std::string& v,
                           std::initializer_list<const char*> allowed)
{
    std::string list;
    for (const char* a : allowed)
    {
        if (v == a)
            return;
        list += list.empty() ? a : std::string(", ") + a;
    }
    r.fail(key, "'" + v + "' is not one of " + list);
}

}  // namespace detail

/// Spec for a named preset: the constant coefficients plus the name.
[[nodiscard]] inline ModelSpec preset_spec(const std::string& name, std::size_t steps = 1000)
{
    ModelSpec spec;
    spec.preset = name;
    spec.steps = steps;
    detail::fill_constant_coefficients(spec, preset_model(name, 1));
    return spec;
}

/// Full scenario for a preset. The numeric example simulates a population of
/// 50; the closed-form example solves the Riccati system.
[[nodiscard]] inline ScenarioConfig preset_config(const std::string& name)
{
    ScenarioConfig c;
    c.model = preset_spec(name);
    if (name == "netsec-numeric")
    {
        c.experiment.kind = "simulate";
        c.experiment.N = 50;
    }
    return c;
}

/// Builds model data on a grid of `steps` intervals.
[[nodiscard]] inline ModelData to_model_data(const ModelSpec& spec, std::size_t steps)
{
    if (spec.n < 1 || spec.k < 1)
        throw UsageError("model dimensions n and k must be positive");
    const TimeGrid grid(spec.T, steps);
    ModelData d = zero_model(spec.n, spec.k, grid);
    d.r_min = spec.r_min;
    d.x0 = Eigen::Map<const Eigen::VectorXd>(spec.x0.data(), static_cast<Eigen::Index>(spec.x0.size()));

    auto schedule = [&](const std::string& name, const CoefficientSpec& c) {
        if (!c.schedule)
            return CoefficientSchedule::constant(detail::to_matrix(c.values[0]), steps);
        if (c.values.size() != grid.nodes())
        {
            std::ostringstream os;
            os << "schedule '" << name << "' has " << c.values.size() << " values but " << steps << " steps need "
               << grid.nodes();
            throw UsageError(os.str());
        }
        std::vector<Eigen::MatrixXd> v;
        for (const auto& m : c.values)
            v.push_back(detail::to_matrix(m));
        return CoefficientSchedule(std::move(v));
    };
    CoefficientSchedule* targets[] = {&d.A, &d.B,  &d.alpha, &d.b,     &d.C, &d.D, &d.beta, &d.sigma,
                                      &d.C0, &d.D0, &d.beta0, &d.sigma0, &d.Q, &d.R};
    const auto& names = coefficient_names();
    for (std::size_t i = 0; i < 14; ++i)
    {
        const auto it = spec.coefficients.find(names[i]);
        if (it != spec.coefficients.end())
            *targets[i] = schedule(names[i], it->second);
    }
    if (const auto it = spec.coefficients.find("G"); it != spec.coefficients.end())
        d.G = detail::to_matrix(it->second.values[0]);
    return d;
}

/// Parses a scenario document. Syntax errors carry line and column; schema
/// errors name the offending key by its JSON path.
[[nodiscard]] inline ScenarioConfig parse_scenario(const std::string& text)
{
    Json doc;
    try
    {
        doc = Json::parse(text);
    }
    catch (const nlohmann::json::parse_error& e)
    {
        // The reported byte is one past the offending character.
        const auto [line, col] = detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ParseError(e.what(), line, col);
    }

    ScenarioConfig cfg;
    detail::Reader top(doc, "");
    std::size_t version = format_version;
    top.get("format_version", version);
    if (version != static_cast<std::size_t>(format_version))
        top.fail("format_version", "unsupported version " + std::to_string(version));

    if (!top.has("model"))
        top.fail("model", "missing model block");
    {
        detail::Reader r(top.at("model"), "/model");
        auto& m = cfg.model;
        if (r.has("preset"))
        {
            const auto name = r.as<std::string>(r.at("preset"), "preset");
            r.get("steps", m.steps);
            r.finish();
            m = preset_spec(name, m.steps);
        }
        else
        {
            r.get("n", m.n);
            r.get("k", m.k);
            r.get("T", m.T);
            r.get("steps", m.steps);
            r.get("r_min", m.r_min);
            if (r.has("x0"))
            {
                const auto x0 = detail::parse_matrix(r.at("x0"), "/model/x0");
                m.x0.clear();
                for (const auto& row : x0)
                {
                    if (row.size() != 1)
                        r.fail("x0", "expected a vector");
                    m.x0.push_back(row[0]);
                }
            }
            else
                m.x0.assign(static_cast<std::size_t>(std::max(m.n, 1)), 0.0);
            for (const auto& name : coefficient_names())
            {
                if (!r.has(name.c_str()))
                    continue;
                auto c = detail::parse_coefficient(r.at(name.c_str()), "/model/" + name);
                if (name == "G" && c.schedule)
                    r.fail("G", "terminal weight must be constant");
                m.coefficients[name] = std::move(c);
            }
            r.finish();
        }
        if (m.n < 1 || m.k < 1)
            r.fail("", "n and k must be positive");
        if (!(m.T > 0.0))
            r.fail("T", "must be positive");
        if (m.steps < 1)
            r.fail("steps", "must be positive");
    }

    if (top.has("solver"))
    {
        detail::Reader r(top.at("solver"), "/solver");
        auto& s = cfg.solver;
        if (r.has("steps"))
            s.steps = r.as<std::size_t>(r.at("steps"), "steps");
        r.get("p_method", s.p_method);
        r.get("gamma_method", s.gamma_method);
        r.get("m00_beta_literal", s.m00_beta_literal);
        r.get("max_iters", s.max_iters);
        r.get("tol", s.tol);
        r.finish();
        detail::require_choice(r, "p_method", s.p_method, {"direct", "iterative", "both"});
        detail::require_choice(r, "gamma_method", s.gamma_method, {"direct", "pi_transform", "both"});
        if (s.steps && *s.steps < 1)
            r.fail("steps", "must be positive");
        if (s.max_iters < 1)
            r.fail("max_iters", "must be positive");
        if (!(s.tol > 0.0))
            r.fail("tol", "must be positive");
    }

    if (top.has("experiment"))
    {
        detail::Reader r(top.at("experiment"), "/experiment");
        auto& e = cfg.experiment;
        r.get("kind", e.kind);
        r.get("Ns", e.Ns);
        r.get("S", e.S);
        r.get("seed", e.seed);
        r.get("N", e.N);
        r.get("agents", e.agents);
        if (r.has("candidates"))
        {
            const auto& list = r.at("candidates");
            if (!list.is_array())
                r.fail("candidates", "expected an array");
            e.candidates.clear();
            for (std::size_t i = 0; i < list.size(); ++i)
            {
                detail::Reader c(list[i], "/experiment/candidates[" + std::to_string(i) + "]");
                Candidate cand;
                c.get("name", cand.name);
                c.get("theta", cand.theta);
                c.get("phi", cand.phi);
                c.get("offset", cand.offset);
                c.get("zero_control", cand.zero_control);
                c.finish();
                e.candidates.push_back(std::move(cand));
            }
        }
        r.finish();
        bool known = false;
        for (const auto& k : experiment_kinds())
            known = known || k == e.kind;
        if (!known)
            r.fail("kind", "'" + e.kind + "' is not one of solve, simulate, rate_state, rate_cost, deviation");
        if (e.N < 1)
            r.fail("N", "must be positive");
        if (e.S < 1)
            r.fail("S", "must be positive");
        for (std::size_t a : e.agents)
            if (a < 1 || a > e.N)
                r.fail("agents", "agent indices run from 1 to N");
    }

    if (top.has("output"))
    {
        detail::Reader r(top.at("output"), "/output");
        r.get("dir", cfg.output.dir);
        r.get("prefix", cfg.output.prefix);
        r.finish();
    }
    top.finish();
    return cfg;
}

[[nodiscard]] inline Json to_json(const ScenarioConfig& cfg)
{
    Json doc;
    doc["format_version"] = format_version;

    Json model;
    const auto& m = cfg.model;
    if (!m.preset.empty())
    {
        model["preset"] = m.preset;
        model["steps"] = m.steps;
    }
    else
    {
        model["n"] = m.n;
        model["k"] = m.k;
        model["T"] = m.T;
        model["steps"] = m.steps;
        model["r_min"] = m.r_min;
        model["x0"] = m.x0;
        for (const auto& name : coefficient_names())
        {
            const auto it = m.coefficients.find(name);
            if (it == m.coefficients.end())
                continue;
            if (it->second.schedule)
                model[name]["schedule"] = it->second.values;
            else
                model[name]["const"] = it->second.values[0];
        }
    }
    doc["model"] = std::move(model);

    Json solver;
    if (cfg.solver.steps)
        solver["steps"] = *cfg.solver.steps;
    solver["p_method"] = cfg.solver.p_method;
    solver["gamma_method"] = cfg.solver.gamma_method;
    solver["m00_beta_literal"] = cfg.solver.m00_beta_literal;
    solver["max_iters"] = cfg.solver.max_iters;
    solver["tol"] = cfg.solver.tol;
    doc["solver"] = std::move(solver);

    Json exp;
    const auto& e = cfg.experiment;
    exp["kind"] = e.kind;
    exp["Ns"] = e.Ns;
    exp["S"] = e.S;
    exp["seed"] = e.seed;
    exp["N"] = e.N;
    exp["agents"] = e.agents;
    Json cands = Json::array();
    for (const auto& c : e.candidates)
        cands.push_back(
            {{"name", c.name}, {"theta", c.theta}, {"phi", c.phi}, {"offset", c.offset}, {"zero_control", c.zero_control}});
    exp["candidates"] = std::move(cands);
    doc["experiment"] = std::move(exp);

    doc["output"] = {{"dir", cfg.output.dir}, {"prefix", cfg.output.prefix}};
    return doc;
}

[[nodiscard]] inline std::string serialize(const ScenarioConfig& cfg)
{
    return to_json(cfg).dump(2) + "\n";
}

[[nodiscard]] inline ScenarioConfig load_scenario(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open scenario file '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return parse_scenario(os.str());
}

}  // namespace lqmfg::cli
