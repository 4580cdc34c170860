#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <sstream>

#include "lqmfg/error.hpp"
#include "lqmfg/grid.hpp"
#include "lqmfg/linalg.hpp"
#include "lqmfg/model.hpp"
#include "lqmfg/noise.hpp"
#include "lqmfg/riccati.hpp"

namespace lqmfg
{

struct MeanFieldOptions
{
    /// Use C0 + beta instead of C0 + beta0 in the
    /// common-noise coefficient of m.
    bool m00_beta_literal{false};
};

struct MeanFieldPath
{
    TimeGrid grid;
    VectorSeq m;
    VectorSeq Em;
};

struct FilteredStatePath
{
    TimeGrid grid;
    VectorSeq z_hat;
    VectorSeq u;
};

namespace detail
{

inline void require_finite(const Eigen::VectorXd& v, std::size_t node, const char* what)
{
    if (!v.allFinite())
    {
        std::ostringstream os;
        os << what << " became non-finite at node " << node;
        throw DivergenceError(os.str(), node, std::numeric_limits<double>::quiet_NaN());
    }
}

inline void require_law(const LqMfgModel& model, const FeedbackLaw& law)
{
    if (!(law.grid == model.grid()) || law.K_z.size() != model.grid().nodes())
        throw UsageError("feedback law grid does not match the model grid");
}

inline void require_noise(const LqMfgModel& model, const NoisePath& path)
{
    if (static_cast<std::size_t>(path.increments.size()) != model.grid().steps())
        throw UsageError("noise path length does not match the model grid");
}

}  // namespace detail

/// E[u](t_j) = (K_z + K_m) E[m] + c_u, using E[zhat] = E[m].
[[nodiscard]] inline Eigen::VectorXd mean_control(const FeedbackLaw& law, std::size_t j, const Eigen::VectorXd& Em)
{
    return (law.K_z[j] + law.K_m[j]) * Em + law.c_u[j];
}

/// Forward Euler for dE[m] = {(A + alpha) E[m] + B E[u] + b} dt.
[[nodiscard]] inline VectorSeq integrate_Em(const LqMfgModel& model, const FeedbackLaw& law)
{
    detail::require_law(model, law);
    const auto& grid = model.grid();
    const double h = grid.step();
    VectorSeq Em(grid.nodes());
    Em[0] = model.x0();
    for (std::size_t j = 0; j < grid.steps(); ++j)
    {
        const auto c = model.at(j);
        const Eigen::VectorXd eu = mean_control(law, j, Em[j]);
        Em[j + 1] = Em[j] + h * ((c.A + c.alpha) * Em[j] + c.B * eu + c.b.col(0));
        detail::require_finite(Em[j + 1], j + 1, "E[m]");
    }
    return Em;
}

/// Euler-Maruyama for the mean-field limit driven by the common noise.
[[nodiscard]] inline VectorSeq integrate_m(const LqMfgModel& model, const FeedbackLaw& law, const VectorSeq& Em,
                                           const NoisePath& common, const MeanFieldOptions& opts = {})
{
    detail::require_law(model, law);
    detail::require_noise(model, common);
    const auto& grid = model.grid();
    const double h = grid.step();
    VectorSeq m(grid.nodes());
    m[0] = model.x0();
    for (std::size_t j = 0; j < grid.steps(); ++j)
    {
        const auto c = model.at(j);
        const Eigen::VectorXd eu = mean_control(law, j, Em[j]);
        const Eigen::MatrixXd& b0 = opts.m00_beta_literal ? c.beta : c.beta0;
        const Eigen::VectorXd drift = (c.A + c.alpha) * m[j] + c.B * eu + c.b.col(0);
        const Eigen::VectorXd diff0 = (c.C0 + b0) * m[j] + c.D0 * eu + c.sigma0.col(0);
        m[j + 1] = m[j] + h * drift + common.increments(static_cast<Eigen::Index>(j)) * diff0;
        detail::require_finite(m[j + 1], j + 1, "m");
    }
    return m;
}

[[nodiscard]] inline MeanFieldPath mean_field_path(const LqMfgModel& model, const FeedbackLaw& law,
                                                   const NoisePath& common, const MeanFieldOptions& opts = {})
{
    MeanFieldPath p;
    p.grid = model.grid();
    p.Em = integrate_Em(model, law);
    p.m = integrate_m(model, law, p.Em, common, opts);
    return p;
}

/// Euler-Maruyama for the filtered state under the decentralized control,
/// driven by the agent's own noise.
[[nodiscard]] inline FilteredStatePath integrate_z_hat(const LqMfgModel& model, const FeedbackLaw& law,
                                                       const VectorSeq& Em, const NoisePath& individual)
{
    detail::require_law(model, law);
    detail::require_noise(model, individual);
    const auto& grid = model.grid();
    const double h = grid.step();
    FilteredStatePath p;
    p.grid = grid;
    p.z_hat.resize(grid.nodes());
    p.u.resize(grid.nodes());
    p.z_hat[0] = model.x0();
    for (std::size_t j = 0; j < grid.steps(); ++j)
    {
        const auto c = model.at(j);
        const Eigen::VectorXd& z = p.z_hat[j];
        p.u[j] = law.control(j, z, Em[j]);
        const Eigen::VectorXd drift = c.A * z + c.B * p.u[j] + c.alpha * Em[j] + c.b.col(0);
        const Eigen::VectorXd diff = c.C * z + c.D * p.u[j] + c.beta * Em[j] + c.sigma.col(0);
        p.z_hat[j + 1] = z + h * drift + individual.increments(static_cast<Eigen::Index>(j)) * diff;
        detail::require_finite(p.z_hat[j + 1], j + 1, "zhat");
    }
    const std::size_t last = grid.steps();
    p.u[last] = law.control(last, p.z_hat[last], Em[last]);
    return p;
}

}  // namespace lqmfg
