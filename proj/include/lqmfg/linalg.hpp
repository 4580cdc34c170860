#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <vector>

#include "lqmfg/error.hpp"

namespace lqmfg
{

using MatrixSeq = std::vector<Eigen::MatrixXd>;
using VectorSeq = std::vector<Eigen::VectorXd>;

namespace tol
{
inline constexpr double symmetry = 1e-10;
inline constexpr double psd = 1e-10;
inline constexpr double r_min = 1e-8;
}  // namespace tol

[[nodiscard]] inline Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m)
{
    return 0.5 * (m + m.transpose());
}

[[nodiscard]] inline double max_asymmetry(const Eigen::MatrixXd& m)
{
    if (m.size() == 0)
        return 0.0;
    return (m - m.transpose()).cwiseAbs().maxCoeff();
}

/// Smallest eigenvalue of the symmetric part of a square matrix.
[[nodiscard]] inline double min_eigenvalue(const Eigen::MatrixXd& m)
{
    if (m.rows() == 1)
        return m(0, 0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

[[nodiscard]] inline double max_eigenvalue(const Eigen::MatrixXd& m)
{
    if (m.rows() == 1)
        return m(0, 0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

/// Operator 2-norm (largest singular value).
[[nodiscard]] inline double operator_norm(const Eigen::MatrixXd& m)
{
    if (m.size() == 0)
        return 0.0;
    if (m.cols() == 1 || m.rows() == 1)
        return m.norm();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues()(0);
}

[[nodiscard]] inline bool all_finite(const Eigen::MatrixXd& m)
{
    return m.allFinite();
}

/// Inverse of a symmetric positive definite weight, refusing anything whose
/// smallest eigenvalue is below r_min.
[[nodiscard]] inline Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& sigma, double r_min, double time)
{
    const Eigen::MatrixXd s = symmetrized(sigma);
    if (s.rows() == 1)
    {
        if (!(s(0, 0) >= r_min))
        {
            std::ostringstream os;
            os << "Sigma is singular at t=" << time << " (min eigenvalue " << s(0, 0) << " < r_min " << r_min << ")";
            throw SingularityError(os.str(), time);
        }
        return Eigen::MatrixXd::Constant(1, 1, 1.0 / s(0, 0));
    }
    const double lo = min_eigenvalue(s);
    if (!(lo >= r_min))
    {
        std::ostringstream os;
        os << "Sigma is singular at t=" << time << " (min eigenvalue " << lo << " < r_min " << r_min << ")";
        throw SingularityError(os.str(), time);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    return llt.solve(Eigen::MatrixXd::Identity(s.rows(), s.cols()));
}

/// Max over nodes of the Frobenius norm of the difference.
[[nodiscard]] inline double max_frobenius_gap(const MatrixSeq& a, const MatrixSeq& b)
{
    double worst = 0.0;
    for (std::size_t j = 0; j < a.size() && j < b.size(); ++j)
        worst = std::max(worst, (a[j] - b[j]).norm());
    return worst;
}

}  // namespace lqmfg
