#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "lqmfg/lqmfg.hpp"

namespace lqmfg::test
{

// Closed forms of the network-security example (T = 1).
inline double closed_P(double t)
{
    const double e = std::exp(4.0 * (t - 1.0));
    return (3.0 - e) / (1.0 + e);
}

inline double closed_Pi(double t)
{
    return 3.0 / (1.0 + 2.0 * std::exp(3.0 * (t - 1.0)));
}

inline double closed_Gamma(double t)
{
    return closed_Pi(t) - closed_P(t);
}

/// Composite Simpson rule on [a, b] with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels = 20000)
{
    const double h = (b - a) / panels;
    double s = f(a) + f(b);
    for (int i = 1; i < panels; ++i)
        s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

inline LqMfgModel preset(const char* name, std::size_t steps = 1000)
{
    return LqMfgModel::build(preset_model(name, steps));
}

struct RandomModelOptions
{
    bool pi_structure{false};  // alpha = delta I, beta = beta0 = C0 = 0
};

/// Constant-coefficient model with n <= 3, k <= 2, entries in [-1, 1],
/// Q, G random PSD and R = I + random PSD.
inline ModelData random_model(std::mt19937_64& rng, std::size_t steps, RandomModelOptions opts = {})
{
    std::uniform_int_distribution<int> dim_n(1, 3), dim_k(1, 2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int n = dim_n(rng), k = dim_k(rng);
    auto mat = [&](int r, int c) {
        Eigen::MatrixXd m(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
                m(i, j) = u(rng);
        return m;
    };
    auto psd = [&](int r) {
        const Eigen::MatrixXd l = mat(r, r);
        return Eigen::MatrixXd(l * l.transpose());
    };
    auto sched = [steps](const Eigen::MatrixXd& v) { return CoefficientSchedule::constant(v, steps); };

    ModelData d = zero_model(n, k, TimeGrid(1.0, steps));
    d.A = sched(mat(n, n));
    d.B = sched(mat(n, k));
    d.b = sched(mat(n, 1));
    d.C = sched(mat(n, n));
    d.D = sched(mat(n, k));
    d.sigma = sched(mat(n, 1));
    d.D0 = sched(mat(n, k));
    d.sigma0 = sched(mat(n, 1));
    if (opts.pi_structure)
    {
        d.alpha = sched(u(rng) * Eigen::MatrixXd::Identity(n, n));
    }
    else
    {
        d.alpha = sched(mat(n, n));
        d.beta = sched(mat(n, n));
        d.beta0 = sched(mat(n, n));
        d.C0 = sched(mat(n, n));
    }
    d.Q = sched(psd(n));
    d.R = sched(Eigen::MatrixXd::Identity(k, k) + psd(k));
    d.G = psd(n);
    d.x0 = mat(n, 1);
    return d;
}

inline FeedbackLaw zero_law(const TimeGrid& grid, int n, int k)
{
    FeedbackLaw law;
    law.grid = grid;
    law.K_z.assign(grid.nodes(), Eigen::MatrixXd::Zero(k, n));
    law.K_m = law.K_z;
    law.c_u.assign(grid.nodes(), Eigen::VectorXd::Zero(k));
    return law;
}

inline FeedbackLaw solve_law(const LqMfgModel& model)
{
    return build_feedback(model, solve_riccati(model));
}

/// Model without common noise or mean-field coupling in the dynamics:
/// A = 0.4, B = 1.2, C = 0.3, D = 0.5, b = 0.2, sigma = 0.6, Q = 2, R = 1,
/// G = 1.5, x0 = 1. Q still tracks E[m] in the limiting cost.
inline ModelData decoupled_model(std::size_t steps)
{
    ScalarParams p;
    p.a = 0.4;
    p.b = 1.2;
    p.c = 0.3;
    p.d = 0.5;
    p.k = 0.2;
    p.sigma = 0.6;
    p.q = 2.0;
    p.r = 1.0;
    p.g = 1.5;
    p.x = 1.0;
    return scalar_model(p, steps);
}

/// Optimal expected cost of the limiting tracking problem against a given
/// deterministic m (no common noise):
///   min E 1/2 { int (z - m)'Q(z - m) + u'Ru dt + z(T)'G z(T) },
///   dz = (Az + Bu + alpha m + b) dt + (Cz + Du + beta m + sigma) dW.
/// The value is 1/2 x0'P(0)x0 + s(0)'x0 + r(0), with s and r integrated here
/// from the HJB equation (P is taken from the caller).
inline double tracking_value(const LqMfgModel& model, const MatrixSeq& P, const VectorSeq& m)
{
    const auto& grid = model.grid();
    const std::size_t M = grid.steps();
    const double h = grid.step();
    auto lerp = [](const auto& a, const auto& b, double th) { return ((1.0 - th) * a + th * b).eval(); };

    struct Terms
    {
        Eigen::VectorXd ds;
        double f;
    };
    auto terms = [&](std::size_t j, const Eigen::MatrixXd& Pt, const Eigen::VectorXd& mt, const Eigen::VectorXd& s) {
        const auto c = model.at(j);
        const Eigen::VectorXd v = c.beta * mt + c.sigma.col(0);
        const Eigen::MatrixXd Sig = c.R + c.D.transpose() * Pt * c.D;
        const Eigen::MatrixXd S = Pt * c.B + c.C.transpose() * Pt * c.D;
        const Eigen::VectorXd w = c.B.transpose() * s + c.D.transpose() * Pt * v;
        const Eigen::VectorXd Siw = Sig.ldlt().solve(w);
        const Eigen::VectorXd drift = c.alpha * mt + c.b.col(0);
        Terms t;
        t.ds = -(c.A.transpose() * s + Pt * drift + c.C.transpose() * Pt * v - c.Q * mt - S * Siw);
        t.f = s.dot(drift) + 0.5 * v.dot(Pt * v) + 0.5 * mt.dot(c.Q * mt) - 0.5 * w.dot(Siw);
        return t;
    };

    std::vector<Eigen::VectorXd> s(M + 1);
    s[M] = Eigen::VectorXd::Zero(model.n());
    for (std::size_t j = M; j-- > 0;)
    {
        const Eigen::MatrixXd Pm = lerp(P[j], P[j + 1], 0.5);
        const Eigen::VectorXd mm = lerp(m[j], m[j + 1], 0.5);
        const auto& y = s[j + 1];
        const auto k1 = terms(j, P[j + 1], m[j + 1], y).ds;
        const auto k2 = terms(j, Pm, mm, y - 0.5 * h * k1).ds;
        const auto k3 = terms(j, Pm, mm, y - 0.5 * h * k2).ds;
        const auto k4 = terms(j, P[j], m[j], y - h * k3).ds;
        s[j] = y - h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    double r = 0.0;
    for (std::size_t j = 0; j <= M; ++j)
        r += ((j == 0 || j == M) ? 0.5 : 1.0) * h * terms(std::min(j, M), P[j], m[j], s[j]).f;
    const auto& x0 = model.x0();
    return 0.5 * x0.dot(P[0] * x0) + s[0].dot(x0) + r;
}

inline double max_abs_gap(const MatrixSeq& a, const std::function<double(double)>& f, const TimeGrid& grid)
{
    double worst = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j)
        worst = std::max(worst, std::abs(a[j](0, 0) - f(grid.time(j))));
    return worst;
}

}  // namespace lqmfg::test
