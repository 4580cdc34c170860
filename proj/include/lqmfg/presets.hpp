#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "lqmfg/error.hpp"
#include "lqmfg/grid.hpp"
#include "lqmfg/model.hpp"

namespace lqmfg
{

/// Scalar constant-coefficient parameters of the network-security example.
/// Names follow the scalar model: a, b (control), delta (alpha), k (drift
/// offset), c, d, d0, sigma, sigma0, q, r, g, x.
struct ScalarParams
{
    double a{0}, b{0}, delta{0}, k{0};
    double c{0}, d{0}, d0{0};
    double sigma{0}, sigma0{0};
    double q{0}, r{1}, g{0};
    double x{0};
    double T{1};
};

[[nodiscard]] inline ModelData scalar_model(const ScalarParams& p, std::size_t steps)
{
    ModelData d = zero_model(1, 1, TimeGrid(p.T, steps));
    auto s = [steps](double v) { return CoefficientSchedule::constant(Eigen::MatrixXd::Constant(1, 1, v), steps); };
    d.A = s(p.a);
    d.B = s(p.b);
    d.alpha = s(p.delta);
    d.b = s(p.k);
    d.C = s(p.c);
    d.D = s(p.d);
    d.D0 = s(p.d0);
    d.sigma = s(p.sigma);
    d.sigma0 = s(p.sigma0);
    d.Q = s(p.q);
    d.R = s(p.r);
    d.G = Eigen::MatrixXd::Constant(1, 1, p.g);
    d.x0 = Eigen::VectorXd::Constant(1, p.x);
    return d;
}

/// a = b = delta = sigma = sigma0 = r = g = 1, c = d = d0 = k = 0, q = 3.
[[nodiscard]] inline ScalarParams netsec_closed_form_params()
{
    ScalarParams p;
    p.a = p.b = p.delta = p.sigma = p.sigma0 = p.r = p.g = 1.0;
    p.q = 3.0;
    p.x = 1.0;
    p.T = 1.0;
    return p;
}

[[nodiscard]] inline ScalarParams netsec_numeric_params()
{
    ScalarParams p;
    p.a = 1.5;
    p.b = 2.8;
    p.delta = 1.0;
    p.k = 2.0;
    p.c = 0.6;
    p.d = 2.5;
    p.d0 = 6.0;
    p.sigma = 0.8;
    p.sigma0 = 0.3;
    p.q = 3.3;
    p.r = 2.5;
    p.g = 5.0;
    p.x = 1.0;
    p.T = 1.0;
    return p;
}

inline const std::vector<std::string>& preset_names()
{
    static const std::vector<std::string> names{"netsec-closed-form", "netsec-numeric"};
    return names;
}

[[nodiscard]] inline ModelData preset_model(std::string_view name, std::size_t steps = 1000)
{
    if (name == "netsec-closed-form")
        return scalar_model(netsec_closed_form_params(), steps);
    if (name == "netsec-numeric")
        return scalar_model(netsec_numeric_params(), steps);
    throw UsageError("unknown preset '" + std::string(name) + "'; valid presets: netsec-closed-form, netsec-numeric");
}

}  // namespace lqmfg
