#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lqmfg/error.hpp"
#include "lqmfg/grid.hpp"
#include "lqmfg/linalg.hpp"
#include "lqmfg/model.hpp"
#include "lqmfg/ode.hpp"

namespace lqmfg
{

/// Nodewise solution of the backward system for P, Gamma and Phi.
struct RiccatiSolution
{
    TimeGrid grid;
    MatrixSeq P;
    MatrixSeq Gamma;
    VectorSeq Phi;
    MatrixSeq Sigma;
};

/// Decentralized feedback u = K_z zhat + K_m E[m] + c_u, per node.
struct FeedbackLaw
{
    TimeGrid grid;
    MatrixSeq K_z;
    MatrixSeq K_m;
    VectorSeq c_u;

    [[nodiscard]] Eigen::VectorXd control(std::size_t j, const Eigen::VectorXd& z_hat, const Eigen::VectorXd& Em) const
    {
        return K_z[j] * z_hat + K_m[j] * Em + c_u[j];
    }
};

struct IterativeOptions
{
    int max_iters{100};
    double tol{1e-10};
};

struct IterativeResult
{
    MatrixSeq P;
    int iterations{0};
    double residual{0.0};
    /// Smallest eigenvalue of P_i - P_{i+1} seen over all iterations and nodes.
    double worst_monotonicity{0.0};
};

struct PiConditionReport
{
    std::vector<bool> node_pass;
    std::vector<double> node_min_eigenvalue;

    [[nodiscard]] bool all_pass() const
    {
        for (bool b : node_pass)
            if (!b)
                return false;
        return true;
    }
};

struct PiTransformResult
{
    MatrixSeq Pi;
    MatrixSeq Gamma;
    PiConditionReport condition;
};

// ---------------------------------------------------------------------------
// Pointwise right-hand sides. Each returns dY/dt for the coefficients `c`.

/// Sigma = R + D'PD + D0'PD0.
[[nodiscard]] inline Eigen::MatrixXd sigma_of(const Coefficients& c, const Eigen::MatrixXd& P)
{
    return symmetrized(c.R + c.D.transpose() * P * c.D + c.D0.transpose() * P * c.D0);
}

/// S = PB + C'PD + C0'PD0, so the optimal gain is -Sigma^{-1} S'.
[[nodiscard]] inline Eigen::MatrixXd cross_term(const Coefficients& c, const Eigen::MatrixXd& P)
{
    return P * c.B + c.C.transpose() * P * c.D + c.C0.transpose() * P * c.D0;
}

[[nodiscard]] inline Eigen::MatrixXd p_rhs(const Coefficients& c, const Eigen::MatrixXd& P, double r_min, double t)
{
    const Eigen::MatrixXd S = cross_term(c, P);
    const Eigen::MatrixXd Si = spd_inverse(sigma_of(c, P), r_min, t);
    return -(P * c.A + c.A.transpose() * P + c.C.transpose() * P * c.C + c.C0.transpose() * P * c.C0 + c.Q -
             S * Si * S.transpose());
}

[[nodiscard]] inline Eigen::MatrixXd gamma_rhs(const Coefficients& c, const Eigen::MatrixXd& P,
                                               const Eigen::MatrixXd& Gamma, double r_min, double t)
{
    const Eigen::MatrixXd S = cross_term(c, P);
    const Eigen::MatrixXd Si = spd_inverse(sigma_of(c, P), r_min, t);
    const Eigen::MatrixXd A_hat = c.A - c.B * Si * S.transpose();
    const Eigen::MatrixXd Vb = c.D.transpose() * P * c.beta + c.D0.transpose() * P * c.beta0;
    const Eigen::MatrixXd GB = Gamma * c.B;
    return -(Gamma * A_hat + A_hat.transpose() * Gamma - GB * Si * Vb + c.C.transpose() * P * c.beta +
             c.C0.transpose() * P * c.beta0 - S * Si * Vb + (P + Gamma) * c.alpha - GB * Si * c.B.transpose() * Gamma - c.Q);
}

[[nodiscard]] inline Eigen::MatrixXd phi_rhs(const Coefficients& c, const Eigen::MatrixXd& P,
                                             const Eigen::MatrixXd& Gamma, const Eigen::MatrixXd& Phi, double r_min,
                                             double t)
{
    const Eigen::MatrixXd S = cross_term(c, P);
    const Eigen::MatrixXd Si = spd_inverse(sigma_of(c, P), r_min, t);
    const Eigen::MatrixXd L = (S + Gamma * c.B) * Si;
    return -((c.A.transpose() - L * c.B.transpose()) * Phi + (c.C.transpose() - L * c.D.transpose()) * P * c.sigma +
             (c.C0.transpose() - L * c.D0.transpose()) * P * c.sigma0 + (P + Gamma) * c.b);
}

/// Right-hand side of the symmetric equation for Pi = P + Gamma when
/// alpha = delta I and beta = beta0 = 0.
[[nodiscard]] inline Eigen::MatrixXd pi_rhs(const Coefficients& c, const Eigen::MatrixXd& P, const Eigen::MatrixXd& Pi,
                                            double delta, double r_min, double t)
{
    const Eigen::MatrixXd Si = spd_inverse(sigma_of(c, P), r_min, t);
    const Eigen::MatrixXd PD = P * c.D;
    const Eigen::MatrixXd PD0 = P * c.D0;
    const Eigen::MatrixXd A_t = c.A - c.B * Si * (PD.transpose() * c.C + PD0.transpose() * c.C0);
    const Eigen::MatrixXd cross = c.C.transpose() * PD * Si * PD0.transpose() * c.C0;
    const Eigen::MatrixXd PiB = Pi * c.B;
    return -(Pi * A_t + A_t.transpose() * Pi + delta * Pi + c.C.transpose() * (P - PD * Si * PD.transpose()) * c.C +
             c.C0.transpose() * (P - PD0 * Si * PD0.transpose()) * c.C0 - cross - cross.transpose() -
             PiB * Si * PiB.transpose());
}

/// Symmetrized matrix whose PSD-ness is the solvability condition for Pi.
[[nodiscard]] inline Eigen::MatrixXd pi_condition_matrix(const Coefficients& c, const Eigen::MatrixXd& P, double r_min,
                                                         double t)
{
    const Eigen::MatrixXd Si = spd_inverse(sigma_of(c, P), r_min, t);
    const Eigen::MatrixXd cross = c.C.transpose() * P * c.D * Si * c.D0.transpose() * P * c.C0;
    return symmetrized(-cross - cross.transpose());
}

/// Gain Psi = Sigma^{-1} S' used by the iterative scheme.
[[nodiscard]] inline Eigen::MatrixXd iteration_gain(const Coefficients& c, const Eigen::MatrixXd& P, double r_min,
                                                    double t)
{
    return spd_inverse(sigma_of(c, P), r_min, t) * cross_term(c, P).transpose();
}

/// Linear Lyapunov right-hand side for P_{i+1} given the gain Psi of P_i.
[[nodiscard]] inline Eigen::MatrixXd lyapunov_rhs(const Coefficients& c, const Eigen::MatrixXd& Psi,
                                                  const Eigen::MatrixXd& P)
{
    const Eigen::MatrixXd A_h = c.A - c.B * Psi;
    const Eigen::MatrixXd C_h = c.C - c.D * Psi;
    const Eigen::MatrixXd C0_h = c.C0 - c.D0 * Psi;
    const Eigen::MatrixXd Q_h = c.Q + Psi.transpose() * c.R * Psi;
    return -(P * A_h + A_h.transpose() * P + C_h.transpose() * P * C_h + C0_h.transpose() * P * C0_h + Q_h);
}

// ---------------------------------------------------------------------------
// Solvers.

namespace detail
{

inline double stage_time(const TimeGrid& grid, std::size_t j, double theta)
{
    return grid.time(j) + theta * grid.step();
}

inline MatrixSeq to_matrices(const VectorSeq& v)
{
    MatrixSeq out;
    out.reserve(v.size());
    for (const auto& x : v)
        out.emplace_back(x);
    return out;
}

inline VectorSeq to_vectors(const MatrixSeq& m)
{
    VectorSeq out;
    out.reserve(m.size());
    for (const auto& x : m)
        out.emplace_back(x.col(0));
    return out;
}

}  // namespace detail

[[nodiscard]] inline MatrixSeq solve_P_direct(const LqMfgModel& model)
{
    const auto& grid = model.grid();
    return integrate_backward(
        grid, model.G(),
        [&](std::size_t j, double theta, const Eigen::MatrixXd& P) {
            return p_rhs(model.at(j), P, model.r_min(), detail::stage_time(grid, j, theta));
        },
        symmetrize, psd_check("P"));
}

[[nodiscard]] inline IterativeResult solve_P_iterative(const LqMfgModel& model, IterativeOptions opts = {})
{
    if (opts.max_iters < 1 || !(opts.tol > 0.0))
        throw UsageError("iterative solver needs max_iters >= 1 and tol > 0");

    const auto& grid = model.grid();
    const Eigen::MatrixXd no_gain = Eigen::MatrixXd::Zero(model.k(), model.n());
    IterativeResult res;
    res.worst_monotonicity = std::numeric_limits<double>::infinity();
    MatrixSeq prev = integrate_backward(
        grid, model.G(),
        [&](std::size_t j, double, const Eigen::MatrixXd& P) { return lyapunov_rhs(model.at(j), no_gain, P); },
        symmetrize, psd_check("P_0"));

    for (int i = 0; i < opts.max_iters; ++i)
    {
        const NodeInterpolator interp(prev);
        MatrixSeq next = integrate_backward(
            grid, model.G(),
            [&](std::size_t j, double theta, const Eigen::MatrixXd& P) {
                const auto c = model.at(j);
                const Eigen::MatrixXd psi =
                    iteration_gain(c, interp.at(j, theta), model.r_min(), detail::stage_time(grid, j, theta));
                return lyapunov_rhs(c, psi, P);
            },
            symmetrize, psd_check("P_i"));

        for (std::size_t j = 0; j < next.size(); ++j)
        {
            const double lo = min_eigenvalue(prev[j] - next[j]);
            res.worst_monotonicity = std::min(res.worst_monotonicity, lo);
            if (!(lo >= -tol::psd))
            {
                std::ostringstream os;
                os << "iterative Riccati sequence is not monotone at iteration " << i + 1 << ", node " << j
                   << " (min eigenvalue of P_i - P_{i+1} = " << lo << ")";
                throw ConsistencyError(os.str());
            }
        }

        res.residual = max_frobenius_gap(prev, next);
        res.iterations = i + 1;
        prev = std::move(next);
        if (res.residual < opts.tol)
        {
            res.P = std::move(prev);
            return res;
        }
    }
    std::ostringstream os;
    os << "iterative Riccati solver did not converge in " << opts.max_iters << " iterations (residual "
       << res.residual << ")";
    throw NonConvergenceError(os.str(), res.residual, res.iterations);
}

[[nodiscard]] inline MatrixSeq solve_Gamma_direct(const LqMfgModel& model, const MatrixSeq& P)
{
    const auto& grid = model.grid();
    const NodeInterpolator p(P);
    return integrate_backward(
        grid, Eigen::MatrixXd::Zero(model.n(), model.n()),
        [&](std::size_t j, double theta, const Eigen::MatrixXd& G) {
            return gamma_rhs(model.at(j), p.at(j, theta), G, model.r_min(), detail::stage_time(grid, j, theta));
        },
        keep, no_check);
}

/// Returns the scalar delta with alpha = delta I on every node, or nothing.
[[nodiscard]] inline std::optional<std::vector<double>> scalar_alpha(const LqMfgModel& model)
{
    std::vector<double> deltas;
    const auto& d = model.data();
    for (const auto& a : d.alpha.values())
    {
        const double delta = a(0, 0);
        const Eigen::MatrixXd diff = a - delta * Eigen::MatrixXd::Identity(a.rows(), a.cols());
        if (!diff.isZero(0.0))
            return std::nullopt;
        deltas.push_back(delta);
    }
    return deltas;
}

[[nodiscard]] inline PiTransformResult solve_Gamma_via_Pi(const LqMfgModel& model, const MatrixSeq& P)
{
    const auto deltas = scalar_alpha(model);
    if (!deltas)
        throw UsageError("Pi-transform requires alpha(t) = delta(t) I");
    if (!model.data().beta.is_zero() || !model.data().beta0.is_zero())
        throw UsageError("Pi-transform requires beta = beta0 = 0");

    const auto& grid = model.grid();
    PiTransformResult out;
    for (std::size_t j = 0; j < grid.nodes(); ++j)
    {
        const double lo = min_eigenvalue(pi_condition_matrix(model.at(j), P[j], model.r_min(), grid.time(j)));
        out.condition.node_min_eigenvalue.push_back(lo);
        out.condition.node_pass.push_back(lo >= -tol::psd);
    }

    const NodeInterpolator p(P);
    out.Pi = integrate_backward(
        grid, model.G(),
        [&](std::size_t j, double theta, const Eigen::MatrixXd& Pi) {
            return pi_rhs(model.at(j), p.at(j, theta), Pi, (*deltas)[j], model.r_min(),
                          detail::stage_time(grid, j, theta));
        },
        symmetrize, psd_check("Pi"));
    out.Gamma.reserve(P.size());
    for (std::size_t j = 0; j < P.size(); ++j)
        out.Gamma.push_back(out.Pi[j] - P[j]);
    return out;
}

[[nodiscard]] inline VectorSeq solve_Phi(const LqMfgModel& model, const MatrixSeq& P, const MatrixSeq& Gamma)
{
    const auto& grid = model.grid();
    const NodeInterpolator p(P);
    const NodeInterpolator g(Gamma);
    return detail::to_vectors(integrate_backward(
        grid, Eigen::MatrixXd::Zero(model.n(), 1),
        [&](std::size_t j, double theta, const Eigen::MatrixXd& Phi) {
            return phi_rhs(model.at(j), p.at(j, theta), g.at(j, theta), Phi, model.r_min(),
                           detail::stage_time(grid, j, theta));
        },
        keep, no_check));
}

[[nodiscard]] inline MatrixSeq compute_sigma(const LqMfgModel& model, const MatrixSeq& P)
{
    MatrixSeq out;
    out.reserve(P.size());
    for (std::size_t j = 0; j < P.size(); ++j)
    {
        Eigen::MatrixXd s = sigma_of(model.at(j), P[j]);
        (void)spd_inverse(s, model.r_min(), model.grid().time(j));
        out.push_back(std::move(s));
    }
    return out;
}

[[nodiscard]] inline FeedbackLaw build_feedback(const LqMfgModel& model, const RiccatiSolution& sol)
{
    FeedbackLaw law;
    law.grid = sol.grid;
    const std::size_t nodes = sol.grid.nodes();
    law.K_z.reserve(nodes);
    law.K_m.reserve(nodes);
    law.c_u.reserve(nodes);
    for (std::size_t j = 0; j < nodes; ++j)
    {
        const auto c = model.at(j);
        const Eigen::MatrixXd& P = sol.P[j];
        const Eigen::MatrixXd Si = spd_inverse(sol.Sigma[j], model.r_min(), sol.grid.time(j));
        law.K_z.push_back(-Si * cross_term(c, P).transpose());
        law.K_m.push_back(-Si * (c.B.transpose() * sol.Gamma[j] + c.D.transpose() * P * c.beta +
                                 c.D0.transpose() * P * c.beta0));
        law.c_u.push_back(-Si * (c.B.transpose() * sol.Phi[j] + c.D.transpose() * P * c.sigma +
                                 c.D0.transpose() * P * c.sigma0));
    }
    return law;
}

enum class PMethod
{
    direct,
    iterative
};

enum class GammaMethod
{
    direct,
    pi_transform
};

struct SolveOptions
{
    PMethod p_method{PMethod::direct};
    GammaMethod gamma_method{GammaMethod::direct};
    IterativeOptions iterative{};
};

/// P, Gamma, Phi and Sigma by the chosen routes.
[[nodiscard]] inline RiccatiSolution solve_riccati(const LqMfgModel& model, const SolveOptions& opts = {})
{
    RiccatiSolution sol;
    sol.grid = model.grid();
    sol.P = opts.p_method == PMethod::direct ? solve_P_direct(model) : solve_P_iterative(model, opts.iterative).P;
    sol.Gamma = opts.gamma_method == GammaMethod::direct ? solve_Gamma_direct(model, sol.P)
                                                         : solve_Gamma_via_Pi(model, sol.P).Gamma;
    sol.Phi = solve_Phi(model, sol.P, sol.Gamma);
    sol.Sigma = compute_sigma(model, sol.P);
    return sol;
}

}  // namespace lqmfg
