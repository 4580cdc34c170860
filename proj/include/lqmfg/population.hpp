#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lqmfg/error.hpp"
#include "lqmfg/linalg.hpp"
#include "lqmfg/meanfield.hpp"
#include "lqmfg/model.hpp"
#include "lqmfg/noise.hpp"
#include "lqmfg/parallel.hpp"
#include "lqmfg/riccati.hpp"
#include "lqmfg/stats.hpp"

namespace lqmfg
{

/// Alternative feedback for the deviating agent:
///   u = theta K_z zhat + phi K_m E[m] + c_u + offset 1,  or u = 0.
struct Candidate
{
    std::string name{"self"};
    double theta{1.0};
    double phi{1.0};
    double offset{0.0};
    bool zero_control{false};

    /// True when the candidate is the equilibrium feedback itself.
    [[nodiscard]] bool is_self() const { return !zero_control && theta == 1.0 && phi == 1.0 && offset == 0.0; }

    bool operator==(const Candidate&) const = default;
};

/// Gain scalings theta in {0, 0.5, 0.8, 1.2, 1.5, 2}, zero control and
/// offsets +-0.5, preceded by the self candidate.
[[nodiscard]] inline std::vector<Candidate> default_candidates()
{
    std::vector<Candidate> c{{"self", 1.0, 1.0, 0.0, false}};
    for (double th : {0.0, 0.5, 0.8, 1.2, 1.5, 2.0})
    {
        std::ostringstream os;
        os << "theta=" << th;
        c.push_back({os.str(), th, 1.0, 0.0, false});
    }
    c.push_back({"zero", 0.0, 0.0, 0.0, true});
    c.push_back({"offset=+0.5", 1.0, 1.0, 0.5, false});
    c.push_back({"offset=-0.5", 1.0, 1.0, -0.5, false});
    return c;
}

/// Brownian increments of one Monte-Carlo sample: the common stream and
/// one column per agent (column i is stream i + 1).
struct SampleNoise
{
    NoisePath common;
    Eigen::MatrixXd individual;  // steps x N

    static SampleNoise generate(const TimeGrid& grid, std::size_t N, std::uint64_t seed)
    {
        SampleNoise s{NoisePath::generate(grid, seed, 0),
                      Eigen::MatrixXd(static_cast<Eigen::Index>(grid.steps()), static_cast<Eigen::Index>(N))};
        const double scale = std::sqrt(grid.step());
        for (std::size_t i = 0; i < N; ++i)
        {
            auto col = s.individual.col(static_cast<Eigen::Index>(i));
            NormalStream(seed, i + 1).fill(col, grid.steps(), scale);
        }
        return s;
    }
};

/// Full record of one simulated population.
struct PopulationSample
{
    std::size_t N{0};
    TimeGrid grid;
    std::vector<VectorSeq> x;       // centralized states, per agent
    std::vector<VectorSeq> z_hat;   // filtered states
    std::vector<VectorSeq> z_bar;   // limiting states (both noises, m in place of the conditional mean)
    std::vector<VectorSeq> u;       // controls
    VectorSeq state_average;
    VectorSeq m;
    VectorSeq Em;
    std::vector<double> J_central;
    std::vector<double> J_limit;

    double sup_average_gap{0.0};              // sup_t |x^(N) - m|^2
    std::vector<double> sup_agent_gap;        // sup_t |x_i - zbar_i|^2
    double sup_filtered_average_gap{0.0};     // sup_t |mean_i zhat_i - m|^2
};

struct PopulationOptions
{
    MeanFieldOptions mean_field{};
    bool record_paths{true};
    /// Agent 1 (index 0) plays this instead of the equilibrium feedback.
    std::optional<Candidate> deviation{};
};

namespace detail
{

inline Eigen::VectorXd colwise_quadratic(const Eigen::MatrixXd& W, const Eigen::MatrixXd& V)
{
    return (V.array() * (W * V).array()).colwise().sum().transpose();
}

inline PopulationSample prepare_sample(const TimeGrid& grid, std::size_t N, const VectorSeq& Em, const VectorSeq& m,
                                       bool record)
{
    PopulationSample out;
    out.N = N;
    out.grid = grid;
    out.sup_agent_gap.assign(N, 0.0);
    out.J_central.assign(N, 0.0);
    out.J_limit.assign(N, 0.0);
    if (record)
    {
        out.x.assign(N, VectorSeq(grid.nodes()));
        out.z_hat.assign(N, VectorSeq(grid.nodes()));
        out.z_bar.assign(N, VectorSeq(grid.nodes()));
        out.u.assign(N, VectorSeq(grid.nodes()));
        out.state_average.resize(grid.nodes());
        out.m = m;
        out.Em = Em;
    }
    return out;
}

/// Euler-Maruyama on the coupled N-agent system with filtered and limiting
/// states alongside. Any dimensions.
inline PopulationSample run_population_generic(const LqMfgModel& model, const FeedbackLaw& law, const VectorSeq& Em,
                                       const VectorSeq& m, const SampleNoise& noise, std::size_t N,
                                       const PopulationOptions& opts)
{
    const auto& grid = model.grid();
    const std::size_t M = grid.steps();
    const double h = grid.step();
    const Eigen::Index n = model.n();
    const Eigen::Index cols = static_cast<Eigen::Index>(N);
    const double invN = 1.0 / static_cast<double>(N);
    const bool deviate = opts.deviation && !opts.deviation->is_self();

    PopulationSample out = prepare_sample(grid, N, Em, m, opts.record_paths);

    Eigen::MatrixXd X = model.x0().replicate(1, cols);
    Eigen::MatrixXd Zh = X;
    Eigen::MatrixXd Zb = X;
    Eigen::MatrixXd U(model.k(), cols), Dx(n, cols), Dz(n, cols), Tmp(n, cols);
    Eigen::VectorXd xbar(n), run_central = Eigen::VectorXd::Zero(cols), run_limit = Eigen::VectorXd::Zero(cols);

    for (std::size_t j = 0;; ++j)
    {
        const auto c = model.at(j);
        U.noalias() = law.K_z[j] * Zh;
        U.colwise() += law.K_m[j] * Em[j] + law.c_u[j];
        if (deviate)
        {
            const auto& cand = *opts.deviation;
            if (cand.zero_control)
                U.col(0).setZero();
            else
                U.col(0) = cand.theta * (law.K_z[j] * Zh.col(0)) + cand.phi * (law.K_m[j] * Em[j]) + law.c_u[j] +
                           Eigen::VectorXd::Constant(model.k(), cand.offset);
        }
        xbar.noalias() = X.rowwise().sum() * invN;

        out.sup_average_gap = std::max(out.sup_average_gap, (xbar - m[j]).squaredNorm());
        out.sup_filtered_average_gap =
            std::max(out.sup_filtered_average_gap, (Zh.rowwise().sum() * invN - m[j]).squaredNorm());
        const Eigen::VectorXd gap = (X - Zb).colwise().squaredNorm().transpose();
        for (std::size_t i = 0; i < N; ++i)
            out.sup_agent_gap[i] = std::max(out.sup_agent_gap[i], gap(static_cast<Eigen::Index>(i)));

        const double w = (j == 0 || j == M) ? 0.5 * h : h;
        const Eigen::VectorXd energy = colwise_quadratic(c.R, U);
        Tmp = X.colwise() - xbar;
        run_central += w * (colwise_quadratic(c.Q, Tmp) + energy);
        Tmp = Zb.colwise() - m[j];
        run_limit += w * (colwise_quadratic(c.Q, Tmp) + energy);

        if (opts.record_paths)
        {
            out.state_average[j] = xbar;
            for (std::size_t i = 0; i < N; ++i)
            {
                const auto ii = static_cast<Eigen::Index>(i);
                out.x[i][j] = X.col(ii);
                out.z_hat[i][j] = Zh.col(ii);
                out.z_bar[i][j] = Zb.col(ii);
                out.u[i][j] = U.col(ii);
            }
        }
        if (j == M)
            break;

        const auto dW = noise.individual.row(static_cast<Eigen::Index>(j)).array();
        const double dW0 = noise.common.increments(static_cast<Eigen::Index>(j));
        const Eigen::VectorXd x_off = c.alpha * xbar + c.b.col(0);
        const Eigen::VectorXd x_off_i = c.beta * xbar + c.sigma.col(0);
        const Eigen::VectorXd x_off_0 = c.beta0 * xbar + c.sigma0.col(0);
        const Eigen::VectorXd z_off = c.alpha * Em[j] + c.b.col(0);
        const Eigen::VectorXd z_off_i = c.beta * Em[j] + c.sigma.col(0);
        const Eigen::VectorXd b_off = c.alpha * m[j] + c.b.col(0);
        const Eigen::VectorXd b_off_i = c.beta * m[j] + c.sigma.col(0);
        const Eigen::VectorXd b_off_0 = c.beta0 * m[j] + c.sigma0.col(0);

        // Centralized states.
        Dx.noalias() = c.A * X;
        Dx.noalias() += c.B * U;
        Dx.colwise() += x_off;
        Tmp.noalias() = c.C * X;
        Tmp.noalias() += c.D * U;
        Tmp.colwise() += x_off_i;
        Dz.noalias() = c.C0 * X;
        Dz.noalias() += c.D0 * U;
        Dz.colwise() += x_off_0;
        X += h * Dx;
        X.array() += Tmp.array().rowwise() * dW;
        X += dW0 * Dz;

        // Limiting states.
        Dx.noalias() = c.A * Zb;
        Dx.noalias() += c.B * U;
        Dx.colwise() += b_off;
        Tmp.noalias() = c.C * Zb;
        Tmp.noalias() += c.D * U;
        Tmp.colwise() += b_off_i;
        Dz.noalias() = c.C0 * Zb;
        Dz.noalias() += c.D0 * U;
        Dz.colwise() += b_off_0;
        Zb += h * Dx;
        Zb.array() += Tmp.array().rowwise() * dW;
        Zb += dW0 * Dz;

        // Filtered states.
        Dx.noalias() = c.A * Zh;
        Dx.noalias() += c.B * U;
        Dx.colwise() += z_off;
        Tmp.noalias() = c.C * Zh;
        Tmp.noalias() += c.D * U;
        Tmp.colwise() += z_off_i;
        Zh += h * Dx;
        Zh.array() += Tmp.array().rowwise() * dW;

        if (!X.allFinite() || !Zh.allFinite() || !Zb.allFinite())
        {
            std::ostringstream os;
            os << "population simulation became non-finite at node " << j + 1;
            throw DivergenceError(os.str(), j + 1, std::numeric_limits<double>::quiet_NaN());
        }
    }

    const Eigen::VectorXd term_central = colwise_quadratic(model.G(), X);
    const Eigen::VectorXd term_limit = colwise_quadratic(model.G(), Zb);
    for (std::size_t i = 0; i < N; ++i)
    {
        const auto ii = static_cast<Eigen::Index>(i);
        out.J_central[i] = 0.5 * (run_central(ii) + term_central(ii));
        out.J_limit[i] = 0.5 * (run_limit(ii) + term_limit(ii));
    }
    return out;
}

/// Same scheme as run_population_generic, fused into one pass over the
/// agents for n = k = 1. Agrees with the generic kernel up to rounding.
inline PopulationSample run_population_scalar(const LqMfgModel& model, const FeedbackLaw& law, const VectorSeq& Em,
                                              const VectorSeq& m, const SampleNoise& noise, std::size_t N,
                                              const PopulationOptions& opts)
{
    const auto& grid = model.grid();
    const std::size_t M = grid.steps();
    const double h = grid.step();
    const double invN = 1.0 / static_cast<double>(N);
    const bool deviate = opts.deviation && !opts.deviation->is_self();
    const bool record = opts.record_paths;

    PopulationSample out = prepare_sample(grid, N, Em, m, record);
    const double x0 = model.x0()(0);
    std::vector<double> x(N, x0), zh(N, x0), zb(N, x0), u(N), run_c(N, 0.0), run_l(N, 0.0);
    double x_sum = 0.0;
    for (std::size_t i = 0; i < N; ++i)
        x_sum += x[i];
    double zh_sum = x_sum;

    for (std::size_t j = 0;; ++j)
    {
        const auto c = model.at(j);
        const double A = c.A(0, 0), B = c.B(0, 0), al = c.alpha(0, 0), b = c.b(0, 0);
        const double C = c.C(0, 0), D = c.D(0, 0), be = c.beta(0, 0), si = c.sigma(0, 0);
        const double C0 = c.C0(0, 0), D0 = c.D0(0, 0), be0 = c.beta0(0, 0), si0 = c.sigma0(0, 0);
        const double Q = c.Q(0, 0), R = c.R(0, 0);
        const double kz = law.K_z[j](0, 0), km = law.K_m[j](0, 0), cu = law.c_u[j](0);
        const double em = Em[j](0), mj = m[j](0);
        const double u_off = km * em + cu;
        const double xbar = x_sum * invN;
        const double w = (j == 0 || j == M) ? 0.5 * h : h;

        out.sup_average_gap = std::max(out.sup_average_gap, (xbar - mj) * (xbar - mj));
        const double zbar_mean = zh_sum * invN - mj;
        out.sup_filtered_average_gap = std::max(out.sup_filtered_average_gap, zbar_mean * zbar_mean);
        if (record)
            out.state_average[j] = Eigen::VectorXd::Constant(1, xbar);

        for (std::size_t i = 0; i < N; ++i)
        {
            u[i] = kz * zh[i] + u_off;
            const double g = x[i] - zb[i];
            out.sup_agent_gap[i] = std::max(out.sup_agent_gap[i], g * g);
        }
        if (deviate)
        {
            const auto& cand = *opts.deviation;
            u[0] = cand.zero_control ? 0.0 : cand.theta * (kz * zh[0]) + cand.phi * (km * em) + cu + cand.offset;
        }
        for (std::size_t i = 0; i < N; ++i)
        {
            const double e = R * u[i] * u[i];
            const double dx = x[i] - xbar, dz = zb[i] - mj;
            run_c[i] += w * (Q * dx * dx + e);
            run_l[i] += w * (Q * dz * dz + e);
        }
        if (record)
            for (std::size_t i = 0; i < N; ++i)
            {
                out.x[i][j] = Eigen::VectorXd::Constant(1, x[i]);
                out.z_hat[i][j] = Eigen::VectorXd::Constant(1, zh[i]);
                out.z_bar[i][j] = Eigen::VectorXd::Constant(1, zb[i]);
                out.u[i][j] = Eigen::VectorXd::Constant(1, u[i]);
            }
        if (j == M)
            break;

        const double dW0 = noise.common.increments(static_cast<Eigen::Index>(j));
        const double x_off = al * xbar + b, x_off_i = be * xbar + si, x_off_0 = be0 * xbar + si0;
        const double z_off = al * em + b, z_off_i = be * em + si;
        const double b_off = al * mj + b, b_off_i = be * mj + si, b_off_0 = be0 * mj + si0;
        const double* dW = noise.individual.data() + j;
        const auto stride = noise.individual.rows();
        x_sum = 0.0;
        zh_sum = 0.0;
        for (std::size_t i = 0; i < N; ++i)
        {
            const double dw = dW[static_cast<Eigen::Index>(i) * stride];
            const double ui = u[i];
            const double xi = x[i], zi = zh[i], bi = zb[i];
            x[i] = xi + h * (A * xi + B * ui + x_off) + (C * xi + D * ui + x_off_i) * dw +
                   dW0 * (C0 * xi + D0 * ui + x_off_0);
            zb[i] = bi + h * (A * bi + B * ui + b_off) + (C * bi + D * ui + b_off_i) * dw +
                    dW0 * (C0 * bi + D0 * ui + b_off_0);
            zh[i] = zi + h * (A * zi + B * ui + z_off) + (C * zi + D * ui + z_off_i) * dw;
            x_sum += x[i];
            zh_sum += zh[i];
        }
        if (!std::isfinite(x_sum) || !std::isfinite(zh_sum) || !std::isfinite(zb[0]))
        {
            std::ostringstream os;
            os << "population simulation became non-finite at node " << j + 1;
            throw DivergenceError(os.str(), j + 1, std::numeric_limits<double>::quiet_NaN());
        }
    }

    const double G = model.G()(0, 0);
    for (std::size_t i = 0; i < N; ++i)
    {
        out.J_central[i] = 0.5 * (run_c[i] + G * x[i] * x[i]);
        out.J_limit[i] = 0.5 * (run_l[i] + G * zb[i] * zb[i]);
    }
    return out;
}

inline PopulationSample run_population(const LqMfgModel& model, const FeedbackLaw& law, const VectorSeq& Em,
                                       const VectorSeq& m, const SampleNoise& noise, std::size_t N,
                                       const PopulationOptions& opts)
{
    if (model.n() == 1 && model.k() == 1)
        return run_population_scalar(model, law, Em, m, noise, N, opts);
    return run_population_generic(model, law, Em, m, noise, N, opts);
}

inline void require_population(std::size_t N)
{
    if (N == 0)
        throw UsageError("population size N must be at least 1");
}

}  // namespace detail

/// One population of N agents driven by the streams of `seed`.
[[nodiscard]] inline PopulationSample simulate_population(const LqMfgModel& model, const FeedbackLaw& law,
                                                          const VectorSeq& Em, std::size_t N, std::uint64_t seed,
                                                          const PopulationOptions& opts = {})
{
    detail::require_population(N);
    detail::require_law(model, law);
    const auto noise = SampleNoise::generate(model.grid(), N, seed);
    const auto m = integrate_m(model, law, Em, noise.common, opts.mean_field);
    return detail::run_population(model, law, Em, m, noise, N, opts);
}

// ---------------------------------------------------------------------------
// Convergence-rate experiments.

struct LadderPoint
{
    std::size_t N{0};
    MeanEstimate average_gap;           // E sup_t |x^(N) - m|^2
    MeanEstimate filtered_average_gap;  // E sup_t |mean zhat - m|^2
    double agent_gap{0.0};              // sup_i E sup_t |x_i - zbar_i|^2
    double agent_gap_stderr{0.0};
    MeanEstimate cost_gap;              // mean over agents of |J_central - J_limit|
};

struct LadderResult
{
    std::vector<std::size_t> Ns;
    std::size_t S{0};
    std::uint64_t seed{0};
    std::vector<LadderPoint> points;
};

struct RateFitReport
{
    std::string statistic;
    std::vector<std::size_t> Ns;
    std::vector<double> values;
    std::vector<double> std_errors;
    std::size_t S{0};
    std::uint64_t seed{0};
    double slope{std::numeric_limits<double>::quiet_NaN()};
    double intercept{std::numeric_limits<double>::quiet_NaN()};
    double slope_stderr{std::numeric_limits<double>::quiet_NaN()};
    /// c in the envelope c / sqrt(N), fitted with the slope fixed at -1/2.
    double half_order_constant{std::numeric_limits<double>::quiet_NaN()};
    bool degenerate{false};
};

namespace detail
{

inline void require_ladder(const std::vector<std::size_t>& Ns, std::size_t S)
{
    if (Ns.size() < 4)
        throw UsageError("rate experiments need at least 4 population sizes");
    for (std::size_t i = 0; i < Ns.size(); ++i)
        if (Ns[i] == 0 || (i > 0 && Ns[i] <= Ns[i - 1]))
            throw UsageError("population sizes must be positive and strictly increasing");
    if (S < 64)
        throw UsageError("rate experiments need S >= 64 samples");
}

}  // namespace detail

/// Values at or below this are rounding residue of an exactly zero gap.
inline constexpr double rate_fit_floor = 1e-24;

/// Log-log least-squares fit of values against N. Any value at or below
/// rate_fit_floor makes the fit degenerate (slope left NaN).

[[nodiscard]] inline RateFitReport fit_rate(std::string statistic, const std::vector<std::size_t>& Ns,
                                            std::vector<double> values, std::vector<double> std_errors)
{
    RateFitReport r;
    r.statistic = std::move(statistic);
    r.Ns = Ns;
    r.values = std::move(values);
    r.std_errors = std::move(std_errors);
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < Ns.size(); ++i)
    {
        if (!(r.values[i] > rate_fit_floor) || !std::isfinite(r.values[i]))
        {
            r.degenerate = true;
            return r;
        }
        lx.push_back(std::log(static_cast<double>(Ns[i])));
        ly.push_back(std::log(r.values[i]));
    }
    const auto f = fit_line(lx, ly);
    r.slope = f.slope;
    r.intercept = f.intercept;
    r.slope_stderr = f.slope_stderr;
    double s = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i)
        s += ly[i] + 0.5 * lx[i];
    r.half_order_constant = std::exp(s / static_cast<double>(lx.size()));
    return r;
}

/// Runs S samples at every N of the ladder. Sample s of size N uses
/// sample_seed(seed, N, s); results are reduced in sample order.
[[nodiscard]] inline LadderResult run_ladder(const LqMfgModel& model, const FeedbackLaw& law,
                                             const std::vector<std::size_t>& Ns, std::size_t S, std::uint64_t seed,
                                             const MeanFieldOptions& mf = {})
{
    detail::require_ladder(Ns, S);
    detail::require_law(model, law);
    const auto Em = integrate_Em(model, law);
    LadderResult res{Ns, S, seed, {}};

    for (std::size_t N : Ns)
    {
        std::vector<double> avg(S), favg(S), cost(S);
        std::vector<std::vector<double>> agent(S);
        parallel_for(S, [&](std::size_t s) {
            const auto sample = simulate_population(model, law, Em, N, sample_seed(seed, N, s),
                                                    {.mean_field = mf, .record_paths = false});
            avg[s] = sample.sup_average_gap;
            favg[s] = sample.sup_filtered_average_gap;
            agent[s] = sample.sup_agent_gap;
            CompensatedSum c;
            for (std::size_t i = 0; i < N; ++i)
                c.add(std::abs(sample.J_central[i] - sample.J_limit[i]));
            cost[s] = c.value() / static_cast<double>(N);
        });

        LadderPoint p;
        p.N = N;
        p.average_gap = mean_estimate(avg);
        p.filtered_average_gap = mean_estimate(favg);
        p.cost_gap = mean_estimate(cost);
        std::vector<double> per_agent(S);
        for (std::size_t i = 0; i < N; ++i)
        {
            for (std::size_t s = 0; s < S; ++s)
                per_agent[s] = agent[s][i];
            const auto e = mean_estimate(per_agent);
            if (i == 0 || e.mean > p.agent_gap)
            {
                p.agent_gap = e.mean;
                p.agent_gap_stderr = e.std_error;
            }
        }
        res.points.push_back(p);
    }
    return res;
}

enum class LadderStatistic
{
    average_gap,
    filtered_average_gap,
    agent_gap,
    cost_gap
};

[[nodiscard]] inline const char* to_string(LadderStatistic s)
{
    switch (s)
    {
    case LadderStatistic::average_gap: return "E sup_t |x^(N) - m|^2";
    case LadderStatistic::filtered_average_gap: return "E sup_t |mean_i zhat_i - m|^2";
    case LadderStatistic::agent_gap: return "sup_i E sup_t |x_i - zbar_i|^2";
    case LadderStatistic::cost_gap: return "mean_i |J_i - Jlim_i|";
    }
    return "unknown";
}

[[nodiscard]] inline RateFitReport fit_ladder(const LadderResult& ladder, LadderStatistic stat)
{
    std::vector<double> v, e;
    for (const auto& p : ladder.points)
    {
        switch (stat)
        {
        case LadderStatistic::average_gap:
            v.push_back(p.average_gap.mean);
            e.push_back(p.average_gap.std_error);
            break;
        case LadderStatistic::filtered_average_gap:
            v.push_back(p.filtered_average_gap.mean);
            e.push_back(p.filtered_average_gap.std_error);
            break;
        case LadderStatistic::agent_gap:
            v.push_back(p.agent_gap);
            e.push_back(p.agent_gap_stderr);
            break;
        case LadderStatistic::cost_gap:
            v.push_back(p.cost_gap.mean);
            e.push_back(p.cost_gap.std_error);
            break;
        }
    }
    auto r = fit_rate(to_string(stat), ladder.Ns, std::move(v), std::move(e));
    r.S = ladder.S;
    r.seed = ladder.seed;
    return r;
}

/// State-average rate: E sup_t |x^(N) - m|^2 against N.
[[nodiscard]] inline RateFitReport rate_experiment_state(const LqMfgModel& model, const FeedbackLaw& law,
                                                         const std::vector<std::size_t>& Ns, std::size_t S,
                                                         std::uint64_t seed, const MeanFieldOptions& mf = {})
{
    return fit_ladder(run_ladder(model, law, Ns, S, seed, mf), LadderStatistic::average_gap);
}

/// Cost rate: mean over agents and samples of |J_i - Jlim_i| against N.
[[nodiscard]] inline RateFitReport rate_experiment_cost(const LqMfgModel& model, const FeedbackLaw& law,
                                                        const std::vector<std::size_t>& Ns, std::size_t S,
                                                        std::uint64_t seed, const MeanFieldOptions& mf = {})
{
    return fit_ladder(run_ladder(model, law, Ns, S, seed, mf), LadderStatistic::cost_gap);
}

// ---------------------------------------------------------------------------
// Unilateral deviations.

struct CandidateResult
{
    Candidate candidate;
    MeanEstimate cost;        // centralized cost of agent 1
    MeanEstimate gain;        // paired: baseline - candidate
    MeanEstimate limit_cost;  // limiting cost of agent 1
    MeanEstimate limit_gain;
    /// True when the candidate coincided with the baseline on every sample.
    bool identical{false};
};

struct DeviationReport
{
    std::size_t N{0};
    std::size_t S{0};
    std::uint64_t seed{0};
    MeanEstimate baseline_cost;
    MeanEstimate baseline_limit_cost;
    std::vector<CandidateResult> results;
    double max_gain{0.0};
    double max_limit_gain{0.0};
};

[[nodiscard]] inline DeviationReport deviation_experiment(const LqMfgModel& model, const FeedbackLaw& law,
                                                          std::size_t N, std::size_t S,
                                                          const std::vector<Candidate>& candidates,
                                                          std::uint64_t seed, const MeanFieldOptions& mf = {})
{
    if (candidates.empty())
        throw UsageError("deviation experiment needs at least one candidate");
    if (S < 64)
        throw UsageError("deviation experiment needs S >= 64 samples");
    detail::require_population(N);
    detail::require_law(model, law);

    const auto Em = integrate_Em(model, law);
    const std::size_t C = candidates.size();
    std::vector<double> base(S), base_lim(S);
    std::vector<std::vector<double>> cost(C, std::vector<double>(S)), lim(C, std::vector<double>(S));
    std::vector<std::vector<char>> same(C, std::vector<char>(S));

    parallel_for(S, [&](std::size_t s) {
        const auto noise = SampleNoise::generate(model.grid(), N, sample_seed(seed, N, s));
        const auto m = integrate_m(model, law, Em, noise.common, mf);
        const auto b = detail::run_population(model, law, Em, m, noise, N, {.mean_field = mf, .record_paths = false});
        base[s] = b.J_central[0];
        base_lim[s] = b.J_limit[0];
        for (std::size_t c = 0; c < C; ++c)
        {
            const auto r = detail::run_population(model, law, Em, m, noise, N,
                                                  {.mean_field = mf, .record_paths = false, .deviation = candidates[c]});
            cost[c][s] = r.J_central[0];
            lim[c][s] = r.J_limit[0];
            same[c][s] = r.J_central == b.J_central && r.J_limit == b.J_limit;
        }
    });

    DeviationReport rep;
    rep.N = N;
    rep.S = S;
    rep.seed = seed;
    rep.baseline_cost = mean_estimate(base);
    rep.baseline_limit_cost = mean_estimate(base_lim);
    rep.max_gain = -std::numeric_limits<double>::infinity();
    rep.max_limit_gain = -std::numeric_limits<double>::infinity();
    std::vector<double> diff(S);
    for (std::size_t c = 0; c < C; ++c)
    {
        CandidateResult r;
        r.candidate = candidates[c];
        r.cost = mean_estimate(cost[c]);
        r.limit_cost = mean_estimate(lim[c]);
        for (std::size_t s = 0; s < S; ++s)
            diff[s] = base[s] - cost[c][s];
        r.gain = mean_estimate(diff);
        for (std::size_t s = 0; s < S; ++s)
            diff[s] = base_lim[s] - lim[c][s];
        r.limit_gain = mean_estimate(diff);
        r.identical = std::all_of(same[c].begin(), same[c].end(), [](char x) { return x != 0; });
        rep.max_gain = std::max(rep.max_gain, r.gain.mean);
        rep.max_limit_gain = std::max(rep.max_limit_gain, r.limit_gain.mean);
        rep.results.push_back(std::move(r));
    }
    return rep;
}

/// Positive part of the maximum deviation gain across a ladder of N, with
/// its log-log fit (degenerate when some maximum gain is not positive).
[[nodiscard]] inline RateFitReport deviation_decay(const LqMfgModel& model, const FeedbackLaw& law,
                                                   const std::vector<std::size_t>& Ns, std::size_t S,
                                                   const std::vector<Candidate>& candidates, std::uint64_t seed,
                                                   const MeanFieldOptions& mf = {})
{
    detail::require_ladder(Ns, S);
    std::vector<double> v, e;
    for (std::size_t N : Ns)
    {
        const auto rep = deviation_experiment(model, law, N, S, candidates, seed, mf);
        double best = 0.0, best_se = 0.0;
        for (const auto& r : rep.results)
            if (r.gain.mean > best)
            {
                best = r.gain.mean;
                best_se = r.gain.std_error;
            }
        v.push_back(best);
        e.push_back(best_se);
    }
    auto r = fit_rate("max(0, max_c gain_c)", Ns, std::move(v), std::move(e));
    r.S = S;
    r.seed = seed;
    return r;
}

}  // namespace lqmfg
