#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <utility>

#include "lqmfg/error.hpp"
#include "lqmfg/grid.hpp"
#include "lqmfg/linalg.hpp"

namespace lqmfg
{

/// Cubic (4-point Lagrange) interpolation of a node sequence at
/// t_j + theta h. Exact at the nodes; falls back to lower degree on grids
/// with fewer than four nodes.
class NodeInterpolator
{
public:
    explicit NodeInterpolator(const MatrixSeq& nodes) : nodes_(&nodes) {}

    [[nodiscard]] Eigen::MatrixXd at(std::size_t interval, double theta) const
    {
        const auto& v = *nodes_;
        if (theta == 0.0)
            return v[interval];
        if (theta == 1.0)
            return v[interval + 1];

        const std::size_t count = std::min<std::size_t>(4, v.size());
        const std::size_t last_start = v.size() - count;
        const std::size_t start = std::min(interval > 0 ? interval - 1 : 0, last_start);
        const double x = static_cast<double>(interval) + theta;

        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(v[0].rows(), v[0].cols());
        for (std::size_t a = start; a < start + count; ++a)
        {
            double w = 1.0;
            for (std::size_t b = start; b < start + count; ++b)
                if (b != a)
                    w *= (x - static_cast<double>(b)) / (static_cast<double>(a) - static_cast<double>(b));
            out.noalias() += w * v[a];
        }
        return out;
    }

private:
    const MatrixSeq* nodes_;
};

/// Classical RK4 integrated backward from t_M to t_0 on the grid.
///
/// `rhs(j, theta, Y)` returns dY/dt on interval j at t_j + theta h. `post`
/// maps every stage input and every accepted step (e.g. symmetrization);
/// `check(j, Y)` runs on each accepted node and may throw.
template <class Rhs, class Post, class Check>
[[nodiscard]] MatrixSeq integrate_backward(const TimeGrid& grid, const Eigen::MatrixXd& terminal, Rhs&& rhs,
                                           Post&& post, Check&& check)
{
    const std::size_t m = grid.steps();
    const double h = grid.step();
    MatrixSeq out(m + 1);
    out[m] = terminal;
    Eigen::MatrixXd y = terminal;
    for (std::size_t step = m; step-- > 0;)
    {
        const Eigen::MatrixXd k1 = rhs(step, 1.0, y);
        const Eigen::MatrixXd k2 = rhs(step, 0.5, post(Eigen::MatrixXd(y - 0.5 * h * k1)));
        const Eigen::MatrixXd k3 = rhs(step, 0.5, post(Eigen::MatrixXd(y - 0.5 * h * k2)));
        const Eigen::MatrixXd k4 = rhs(step, 0.0, post(Eigen::MatrixXd(y - h * k3)));
        y = post(Eigen::MatrixXd(y - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)));
        if (!y.allFinite())
        {
            std::ostringstream os;
            os << "backward integration produced non-finite values at node " << step;
            throw DivergenceError(os.str(), step, std::numeric_limits<double>::quiet_NaN());
        }
        check(step, y);
        out[step] = y;
    }
    return out;
}

inline constexpr auto keep = [](Eigen::MatrixXd y) { return y; };
inline constexpr auto symmetrize = [](Eigen::MatrixXd y) { return symmetrized(y); };
inline constexpr auto no_check = [](std::size_t, const Eigen::MatrixXd&) {};

/// Throws DivergenceError when the node value loses positive
/// semidefiniteness beyond tol::psd.
inline auto psd_check(const char* what)
{
    return [what](std::size_t j, const Eigen::MatrixXd& y) {
        const double lo = min_eigenvalue(y);
        if (!(lo >= -tol::psd))
        {
            std::ostringstream os;
            os << what << " lost positive semidefiniteness at node " << j << " (min eigenvalue " << lo << ")";
            throw DivergenceError(os.str(), j, lo);
        }
    };
}

}  // namespace lqmfg
