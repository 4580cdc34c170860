#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lqmfg/error.hpp"
#include "lqmfg/grid.hpp"
#include "lqmfg/linalg.hpp"

namespace lqmfg
{

/// Raw, unvalidated description of a linear-quadratic mean-field game:
///
///   dx_i = [A x_i + B u_i + alpha x^(N) + b] dt
///        + [C x_i + D u_i + beta x^(N) + sigma] dW_i
///        + [C0 x_i + D0 u_i + beta0 x^(N) + sigma0] dW_0,     x_i(0) = x0,
///
///   J_i = 1/2 E{ int <Q (x_i - x^(N)), x_i - x^(N)> + <R u_i, u_i> dt + <G x_i(T), x_i(T)> }.
struct ModelData
{
    int n{1};
    int k{1};
    TimeGrid grid;

    CoefficientSchedule A, B, alpha, b;
    CoefficientSchedule C, D, beta, sigma;
    CoefficientSchedule C0, D0, beta0, sigma0;
    CoefficientSchedule Q, R;
    Eigen::MatrixXd G;
    Eigen::VectorXd x0;

    double r_min{tol::r_min};
};

/// Convenience for constant-coefficient models: every schedule starts at zero
/// with the right shape, and G, x0 at zero.
[[nodiscard]] inline ModelData zero_model(int n, int k, TimeGrid grid)
{
    const std::size_t m = grid.steps();
    ModelData d;
    d.n = n;
    d.k = k;
    d.grid = grid;
    d.A = d.alpha = d.C = d.beta = d.C0 = d.beta0 = d.Q = CoefficientSchedule::zero(n, n, m);
    d.b = d.sigma = d.sigma0 = CoefficientSchedule::zero(n, 1, m);
    d.B = d.D = d.D0 = CoefficientSchedule::zero(n, k, m);
    d.R = CoefficientSchedule::zero(k, k, m);
    d.G = Eigen::MatrixXd::Zero(n, n);
    d.x0 = Eigen::VectorXd::Zero(n);
    return d;
}

struct CheckResult
{
    std::string name;
    bool passed{true};
    std::optional<std::size_t> node;  // offending node (schedule checks only)
    double value{0.0};                // offending asymmetry / eigenvalue
    std::string detail;
};

struct ValidationReport
{
    std::vector<CheckResult> checks;

    [[nodiscard]] bool all_pass() const
    {
        return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
    }

    [[nodiscard]] std::string summary() const
    {
        std::ostringstream os;
        bool first = true;
        for (const auto& c : checks)
        {
            if (c.passed)
                continue;
            if (!first)
                os << "; ";
            first = false;
            os << c.name << ": " << c.detail;
        }
        return first ? std::string("all checks pass") : os.str();
    }

    bool operator==(const ValidationReport& o) const
    {
        if (checks.size() != o.checks.size())
            return false;
        for (std::size_t i = 0; i < checks.size(); ++i)
        {
            const auto& a = checks[i];
            const auto& b = o.checks[i];
            if (a.name != b.name || a.passed != b.passed || a.node != b.node || a.value != b.value || a.detail != b.detail)
                return false;
        }
        return true;
    }
};

namespace detail
{

struct NamedSchedule
{
    const char* name;
    const CoefficientSchedule* schedule;
};

inline void check_finite(const char* name, const Eigen::MatrixXd& m, std::optional<std::size_t> node)
{
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            if (!std::isfinite(m(r, c)))
            {
                std::ostringstream os;
                os << "non-finite entry in '" << name << "'";
                if (node)
                    os << " at node " << *node;
                os << ", entry (" << r << "," << c << ")";
                throw StructuralError(os.str());
            }
}

inline void check_structure(const ModelData& d)
{
    if (d.n < 1 || d.k < 1)
        throw StructuralError("state and control dimensions must be positive");
    if (!(d.r_min > 0.0))
        throw StructuralError("r_min must be positive");

    const NamedSchedule all[] = {{"A", &d.A},       {"B", &d.B},   {"alpha", &d.alpha}, {"b", &d.b},
                                 {"C", &d.C},       {"D", &d.D},   {"beta", &d.beta},   {"sigma", &d.sigma},
                                 {"C0", &d.C0},     {"D0", &d.D0}, {"beta0", &d.beta0}, {"sigma0", &d.sigma0},
                                 {"Q", &d.Q},       {"R", &d.R}};
    const std::size_t nodes = d.grid.nodes();
    for (const auto& s : all)
    {
        if (s.schedule->size() != nodes)
        {
            std::ostringstream os;
            os << "schedule '" << s.name << "' has " << s.schedule->size() << " values but the grid has " << nodes
               << " nodes";
            throw StructuralError(os.str());
        }
    }

    if (d.A.rows() != d.n || d.A.cols() != d.n)
    {
        std::ostringstream os;
        os << "schedule 'A' is " << d.A.rows() << "x" << d.A.cols() << " but n = " << d.n;
        throw StructuralError(os.str());
    }
    if (d.B.cols() != d.k)
    {
        std::ostringstream os;
        os << "schedule 'B' has " << d.B.cols() << " columns but k = " << d.k;
        throw StructuralError(os.str());
    }

    struct Expect
    {
        NamedSchedule s;
        Eigen::Index rows, cols;
        const char* row_ref;
        const char* col_ref;
    };
    const Eigen::Index n = d.n, k = d.k;
    const Expect expected[] = {
        {{"alpha", &d.alpha}, n, n, "A", "A"},   {{"C", &d.C}, n, n, "A", "A"},
        {{"beta", &d.beta}, n, n, "A", "A"},     {{"C0", &d.C0}, n, n, "A", "A"},
        {{"beta0", &d.beta0}, n, n, "A", "A"},   {{"Q", &d.Q}, n, n, "A", "A"},
        {{"b", &d.b}, n, 1, "A", "(vector)"},    {{"sigma", &d.sigma}, n, 1, "A", "(vector)"},
        {{"sigma0", &d.sigma0}, n, 1, "A", "(vector)"},
        {{"B", &d.B}, n, k, "A", "B"},           {{"D", &d.D}, n, k, "A", "B"},
        {{"D0", &d.D0}, n, k, "A", "B"},         {{"R", &d.R}, k, k, "B", "B"},
    };
    for (const auto& e : expected)
    {
        const auto* s = e.s.schedule;
        if (s->rows() != e.rows)
        {
            std::ostringstream os;
            os << "dimension mismatch: schedule '" << e.s.name << "' has " << s->rows() << " rows, expected " << e.rows
               << " to match schedule '" << e.row_ref << "'";
            throw StructuralError(os.str());
        }
        if (s->cols() != e.cols)
        {
            std::ostringstream os;
            os << "dimension mismatch: schedule '" << e.s.name << "' has " << s->cols() << " columns, expected "
               << e.cols << " to match schedule '" << e.col_ref << "'";
            throw StructuralError(os.str());
        }
    }
    if (d.G.rows() != n || d.G.cols() != n)
        throw StructuralError("dimension mismatch: 'G' must be n x n to match schedule 'A'");
    if (d.x0.size() != n)
        throw StructuralError("dimension mismatch: 'x0' must have length n to match schedule 'A'");

    for (const auto& s : all)
        for (std::size_t j = 0; j < s.schedule->size(); ++j)
            check_finite(s.name, (*s.schedule)[j], j);
    check_finite("G", d.G, std::nullopt);
    check_finite("x0", d.x0, std::nullopt);
}

inline CheckResult check_symmetric(const char* name, const CoefficientSchedule& s)
{
    CheckResult r{std::string("symmetric ") + name, true, std::nullopt, 0.0, ""};
    for (std::size_t j = 0; j < s.size(); ++j)
    {
        const double a = max_asymmetry(s[j]);
        if (a > tol::symmetry)
        {
            r.passed = false;
            r.node = j;
            r.value = a;
            std::ostringstream os;
            os << name << " asymmetric by " << a << " at node " << j;
            r.detail = os.str();
            return r;
        }
    }
    return r;
}

inline CheckResult check_min_eig(const std::string& label, const char* name, const CoefficientSchedule& s,
                                 double floor)
{
    CheckResult r{label, true, std::nullopt, 0.0, ""};
    for (std::size_t j = 0; j < s.size(); ++j)
    {
        const double lo = min_eigenvalue(s[j]);
        if (!(lo >= floor))
        {
            r.passed = false;
            r.node = j;
            r.value = lo;
            std::ostringstream os;
            os << name << " has eigenvalue " << lo << " < " << floor << " at node " << j;
            r.detail = os.str();
            return r;
        }
    }
    return r;
}

}  // namespace detail

/// Checks assumptions on the weights. Shape or finiteness problems are not
/// reported: they throw StructuralError.
[[nodiscard]] inline ValidationReport validate(const ModelData& d)
{
    detail::check_structure(d);

    ValidationReport report;
    report.checks.push_back({"shape consistency", true, std::nullopt, 0.0, ""});
    report.checks.push_back({"finite entries", true, std::nullopt, 0.0, ""});
    report.checks.push_back(detail::check_symmetric("Q", d.Q));
    report.checks.push_back(detail::check_symmetric("R", d.R));
    {
        CheckResult g{"symmetric G", true, std::nullopt, 0.0, ""};
        const double a = max_asymmetry(d.G);
        if (a > tol::symmetry)
        {
            g.passed = false;
            g.value = a;
            g.detail = "G asymmetric by " + std::to_string(a);
        }
        report.checks.push_back(g);
    }
    report.checks.push_back(detail::check_min_eig("Q positive semidefinite", "Q", d.Q, -tol::psd));
    {
        CheckResult g{"G positive semidefinite", true, std::nullopt, 0.0, ""};
        const double lo = min_eigenvalue(d.G);
        if (!(lo >= -tol::psd))
        {
            g.passed = false;
            g.value = lo;
            g.detail = "G has eigenvalue " + std::to_string(lo);
        }
        report.checks.push_back(g);
    }
    report.checks.push_back(detail::check_min_eig("R >> 0 (R >= r_min I)", "R", d.R, d.r_min));
    return report;
}

/// Coefficients in effect on one grid interval (or at the terminal node).
struct Coefficients
{
    const Eigen::MatrixXd& A;
    const Eigen::MatrixXd& B;
    const Eigen::MatrixXd& alpha;
    const Eigen::MatrixXd& b;
    const Eigen::MatrixXd& C;
    const Eigen::MatrixXd& D;
    const Eigen::MatrixXd& beta;
    const Eigen::MatrixXd& sigma;
    const Eigen::MatrixXd& C0;
    const Eigen::MatrixXd& D0;
    const Eigen::MatrixXd& beta0;
    const Eigen::MatrixXd& sigma0;
    const Eigen::MatrixXd& Q;
    const Eigen::MatrixXd& R;
};

/// A validated model. Immutable; safe to share across threads.
class LqMfgModel
{
public:
    /// Validates and takes ownership. Throws StructuralError on malformed
    /// data and ValidationError when any assumption check fails.
    static LqMfgModel build(ModelData data)
    {
        auto report = validate(data);
        if (!report.all_pass())
            throw ValidationError("model validation failed: " + report.summary());
        return LqMfgModel(std::move(data));
    }

    [[nodiscard]] const ModelData& data() const noexcept { return d_; }
    [[nodiscard]] int n() const noexcept { return d_.n; }
    [[nodiscard]] int k() const noexcept { return d_.k; }
    [[nodiscard]] const TimeGrid& grid() const noexcept { return d_.grid; }
    [[nodiscard]] const Eigen::MatrixXd& G() const noexcept { return d_.G; }
    [[nodiscard]] const Eigen::VectorXd& x0() const noexcept { return d_.x0; }
    [[nodiscard]] double r_min() const noexcept { return d_.r_min; }

    /// Coefficients on [t_j, t_{j+1}); j = M gives the terminal node values.
    [[nodiscard]] Coefficients at(std::size_t j) const
    {
        return {d_.A[j],  d_.B[j],  d_.alpha[j], d_.b[j],  d_.C[j],      d_.D[j],      d_.beta[j],
                d_.sigma[j], d_.C0[j], d_.D0[j], d_.beta0[j], d_.sigma0[j], d_.Q[j], d_.R[j]};
    }

private:
    explicit LqMfgModel(ModelData d) : d_(std::move(d)) {}

    ModelData d_;
};

[[nodiscard]] inline ValidationReport validate(const LqMfgModel& model)
{
    return validate(model.data());
}

/// Sufficient condition for well-posedness of the consistency system,
/// 4 lambda* < -2|alpha| - 6|C|^2 - 6|C0|^2 - 5|beta|^2 - 5|beta0|^2,
/// with operator 2-norms taken as sup over grid nodes. Advisory only.
struct DiagnosticReport
{
    double lambda_star{0.0};
    double norm_alpha{0.0};
    double norm_C{0.0};
    double norm_C0{0.0};
    double norm_beta{0.0};
    double norm_beta0{0.0};
    double lhs{0.0};
    double rhs{0.0};
    bool holds{false};
};

[[nodiscard]] inline DiagnosticReport wellposedness_diagnostic(const LqMfgModel& model)
{
    const auto& d = model.data();
    auto sup_norm = [](const CoefficientSchedule& s) {
        double v = 0.0;
        for (const auto& m : s.values())
            v = std::max(v, operator_norm(m));
        return v;
    };

    DiagnosticReport r;
    r.lambda_star = -std::numeric_limits<double>::infinity();
    for (const auto& a : d.A.values())
        r.lambda_star = std::max(r.lambda_star, max_eigenvalue(a));
    r.norm_alpha = sup_norm(d.alpha);
    r.norm_C = sup_norm(d.C);
    r.norm_C0 = sup_norm(d.C0);
    r.norm_beta = sup_norm(d.beta);
    r.norm_beta0 = sup_norm(d.beta0);
    r.lhs = 4.0 * r.lambda_star;
    r.rhs = -2.0 * r.norm_alpha - 6.0 * r.norm_C * r.norm_C - 6.0 * r.norm_C0 * r.norm_C0 -
            5.0 * r.norm_beta * r.norm_beta - 5.0 * r.norm_beta0 * r.norm_beta0;
    r.holds = r.lhs < r.rhs;
    return r;
}

}  // namespace lqmfg
