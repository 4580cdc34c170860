#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"

using namespace lqmfg;
using lqmfg::test::closed_Gamma;
using lqmfg::test::closed_P;
using lqmfg::test::closed_Pi;

namespace
{

LqMfgModel zero_data_model(std::size_t steps = 100)
{
    ModelData d = zero_model(2, 1, TimeGrid(1.0, steps));
    d.A = CoefficientSchedule::constant(Eigen::MatrixXd{{0.3, -0.2}, {0.1, 0.4}}, steps);
    d.B = CoefficientSchedule::constant(Eigen::MatrixXd{{1.0}, {0.5}}, steps);
    d.C = CoefficientSchedule::constant(Eigen::MatrixXd{{0.2, 0.0}, {0.0, 0.1}}, steps);
    d.D = CoefficientSchedule::constant(Eigen::MatrixXd{{0.3}, {0.0}}, steps);
    d.R = CoefficientSchedule::constant(Eigen::MatrixXd::Identity(1, 1), steps);
    d.x0 = Eigen::VectorXd::Ones(2);
    return LqMfgModel::build(d);
}

double max_norm(const MatrixSeq& s)
{
    double w = 0.0;
    for (const auto& m : s)
        w = std::max(w, m.cwiseAbs().maxCoeff());
    return w;
}

double max_norm(const VectorSeq& s)
{
    double w = 0.0;
    for (const auto& m : s)
        w = std::max(w, m.cwiseAbs().maxCoeff());
    return w;
}

}  // namespace

TEST(SolvePDirect, ZeroWeightsGiveZero)
{
    const auto m = zero_data_model();
    EXPECT_EQ(max_norm(solve_P_direct(m)), 0.0);
}

TEST(SolvePDirect, MatchesLogisticClosedForm)
{
    const auto m = test::preset("netsec-closed-form");
    const auto P = solve_P_direct(m);
    EXPECT_NEAR(P[0](0, 0), closed_P(0.0), 1e-6);
    EXPECT_LE(test::max_abs_gap(P, closed_P, m.grid()), 1e-6);
    EXPECT_EQ(P.back()(0, 0), 1.0);
}

TEST(SolvePDirect, MatchesTanhOracle)
{
    ModelData d = zero_model(1, 1, TimeGrid(1.0, 1000));
    d.B = CoefficientSchedule::constant(Eigen::MatrixXd::Ones(1, 1), 1000);
    d.Q = d.R = d.B;
    const auto P = solve_P_direct(LqMfgModel::build(d));
    EXPECT_NEAR(P[0](0, 0), std::tanh(1.0), 1e-10);
}

TEST(SolvePDirect, SymmetricAndPsdOnRandomModels)
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 5; ++trial)
    {
        const auto m = LqMfgModel::build(test::random_model(rng, 200));
        for (const auto& P : solve_P_direct(m))
        {
            EXPECT_LE(max_asymmetry(P), tol::symmetry);
            EXPECT_GE(min_eigenvalue(P), -tol::psd);
        }
    }
}

TEST(SolvePDirect, FourthOrderGridConvergence)
{
    double prev = 0.0;
    for (std::size_t steps : {50, 100, 200})
    {
        const auto m = test::preset("netsec-closed-form", steps);
        const double err = test::max_abs_gap(solve_P_direct(m), closed_P, m.grid());
        if (prev > 0.0)
            EXPECT_GE(prev / err, 8.0) << "steps=" << steps;
        prev = err;
    }
}

TEST(SolvePDirect, CenteredDifferenceResidualIsSecondOrder)
{
    auto residual = [](std::size_t steps) {
        const auto m = test::preset("netsec-numeric", steps);
        const auto sol = solve_riccati(m);
        const double h = m.grid().step();
        double rp = 0.0, rg = 0.0, rf = 0.0;
        for (std::size_t j = 1; j < steps; ++j)
        {
            const auto c = m.at(j);
            const double t = m.grid().time(j);
            const Eigen::MatrixXd dP = (sol.P[j + 1] - sol.P[j - 1]) / (2 * h);
            const Eigen::MatrixXd dG = (sol.Gamma[j + 1] - sol.Gamma[j - 1]) / (2 * h);
            const Eigen::MatrixXd dF = (sol.Phi[j + 1] - sol.Phi[j - 1]) / (2 * h);
            rp = std::max(rp, (dP - p_rhs(c, sol.P[j], m.r_min(), t)).norm());
            rg = std::max(rg, (dG - gamma_rhs(c, sol.P[j], sol.Gamma[j], m.r_min(), t)).norm());
            rf = std::max(rf, (dF - phi_rhs(c, sol.P[j], sol.Gamma[j], sol.Phi[j], m.r_min(), t)).norm());
        }
        return std::array<double, 3>{rp, rg, rf};
    };
    const auto coarse = residual(200);
    const auto fine = residual(400);
    for (int i = 0; i < 3; ++i)
    {
        // C_res fitted on the coarse grid must bound the fine residual.
        const double c_res = coarse[i] / std::pow(1.0 / 200, 2);
        EXPECT_LE(fine[i], 1.1 * c_res * std::pow(1.0 / 400, 2)) << "component " << i;
        EXPECT_GE(coarse[i] / fine[i], 3.5) << "component " << i;
    }
}

TEST(SolvePIterative, ZeroWeightsConvergeInOneIteration)
{
    const auto r = solve_P_iterative(zero_data_model());
    EXPECT_EQ(r.iterations, 1);
    EXPECT_EQ(max_norm(r.P), 0.0);
}

TEST(SolvePIterative, NoControlChannelIsLyapunovSolution)
{
    ModelData d = zero_model(1, 1, TimeGrid(1.0, 200));
    d.A = CoefficientSchedule::constant(Eigen::MatrixXd::Constant(1, 1, -0.5), 200);
    d.C = CoefficientSchedule::constant(Eigen::MatrixXd::Constant(1, 1, 0.4), 200);
    d.Q = d.R = CoefficientSchedule::constant(Eigen::MatrixXd::Ones(1, 1), 200);
    d.G = Eigen::MatrixXd::Constant(1, 1, 2.0);
    const auto m = LqMfgModel::build(d);
    const auto r = solve_P_iterative(m);
    EXPECT_EQ(r.iterations, 1);
    // Pdot = -(2a + c^2) P - q, P(1) = g.
    const double lam = 2 * -0.5 + 0.16;
    for (std::size_t j = 0; j < r.P.size(); ++j)
    {
        const double s = 1.0 - m.grid().time(j);
        const double exact = 2.0 * std::exp(lam * s) + (std::exp(lam * s) - 1.0) / lam;
        EXPECT_NEAR(r.P[j](0, 0), exact, 1e-10);
    }
}

TEST(SolvePIterative, AgreesWithDirectAndIsMonotone)
{
    for (const char* name : {"netsec-closed-form", "netsec-numeric"})
    {
        const auto m = test::preset(name);
        const auto r = solve_P_iterative(m);
        EXPECT_LT(max_frobenius_gap(r.P, solve_P_direct(m)), 1e-5) << name;
        EXPECT_GE(r.worst_monotonicity, -tol::psd) << name;
        EXPECT_LT(r.residual, 1e-10);
    }
}

TEST(SolvePIterative, ReportsNonConvergence)
{
    const auto m = test::preset("netsec-numeric", 100);
    try
    {
        (void)solve_P_iterative(m, {.max_iters = 1, .tol = 1e-10});
        FAIL() << "expected NonConvergenceError";
    }
    catch (const NonConvergenceError& e)
    {
        EXPECT_GT(e.residual(), 1e-10);
        EXPECT_EQ(e.iterations(), 1);
    }
}

TEST(SolveGammaDirect, ZeroForcingGivesZero)
{
    const auto m = zero_data_model();
    EXPECT_EQ(max_norm(solve_Gamma_direct(m, solve_P_direct(m))), 0.0);
}

TEST(SolveGammaDirect, MatchesClosedForm)
{
    const auto m = test::preset("netsec-closed-form");
    const auto G = solve_Gamma_direct(m, solve_P_direct(m));
    EXPECT_LE(test::max_abs_gap(G, closed_Gamma, m.grid()), 1e-6);
    EXPECT_EQ(G.back()(0, 0), 0.0);
}

TEST(SolveGammaDirect, AgreesWithHundredfoldRefinement)
{
    auto gamma0 = [](std::size_t steps) {
        const auto m = test::preset("netsec-numeric", steps);
        return solve_Gamma_direct(m, solve_P_direct(m));
    };
    const auto coarse = gamma0(1000);
    const auto fine = gamma0(100000);
    for (std::size_t j = 0; j < coarse.size(); ++j)
        EXPECT_NEAR(coarse[j](0, 0), fine[100 * j](0, 0), 1e-7) << "node " << j;
}

TEST(SolveGammaViaPi, MatchesClosedForm)
{
    const auto m = test::preset("netsec-closed-form");
    const auto P = solve_P_direct(m);
    const auto r = solve_Gamma_via_Pi(m, P);
    EXPECT_LE(test::max_abs_gap(r.Pi, closed_Pi, m.grid()), 1e-6);
    EXPECT_LE(test::max_abs_gap(r.Gamma, closed_Gamma, m.grid()), 1e-6);
    EXPECT_TRUE(r.condition.all_pass());
}

TEST(SolveGammaViaPi, AgreesWithDirectOnRandomModels)
{
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 10; ++trial)
    {
        const auto m = LqMfgModel::build(test::random_model(rng, 500, {.pi_structure = true}));
        const auto P = solve_P_direct(m);
        const auto r = solve_Gamma_via_Pi(m, P);
        EXPECT_TRUE(r.condition.all_pass()) << "C0 = 0 makes the condition vacuous";
        EXPECT_LT(max_frobenius_gap(r.Gamma, solve_Gamma_direct(m, P)), 1e-5) << "trial " << trial;
    }
}

TEST(SolveGammaViaPi, RejectsNonScalarAlphaAndBeta)
{
    std::mt19937_64 rng(5);
    ModelData d = test::random_model(rng, 50, {.pi_structure = true});
    d.beta = CoefficientSchedule::constant(Eigen::MatrixXd::Identity(d.n, d.n) * 0.1, 50);
    auto m = LqMfgModel::build(d);
    EXPECT_THROW((void)solve_Gamma_via_Pi(m, solve_P_direct(m)), UsageError);

    ModelData e = zero_model(2, 1, TimeGrid(1.0, 50));
    e.alpha = CoefficientSchedule::constant(Eigen::MatrixXd{{1.0, 0.0}, {0.0, 2.0}}, 50);
    e.R = CoefficientSchedule::constant(Eigen::MatrixXd::Identity(1, 1), 50);
    m = LqMfgModel::build(e);
    EXPECT_THROW((void)solve_Gamma_via_Pi(m, solve_P_direct(m)), UsageError);
}

TEST(SolveGammaViaPi, ConditionReportFlagsNegativeNodes)
{
    // Scalar: -2 c c0 d d0 P^2 / Sigma < 0 when all four share a sign.
    ScalarParams p;
    p.a = 0.2;
    p.b = 1.0;
    p.c = 0.5;
    p.d = 0.5;
    p.d0 = 0.5;
    p.q = 1.0;
    p.r = 1.0;
    p.g = 1.0;
    ModelData d = scalar_model(p, 100);
    d.C0 = CoefficientSchedule::constant(Eigen::MatrixXd::Constant(1, 1, 0.5), 100);
    const auto m = LqMfgModel::build(d);
    const auto r = solve_Gamma_via_Pi(m, solve_P_direct(m));
    EXPECT_FALSE(r.condition.all_pass());
    EXPECT_LT(r.condition.node_min_eigenvalue.back(), 0.0);
}

TEST(SolvePhi, ZeroForcingGivesZero)
{
    const auto m = zero_data_model();
    const auto P = solve_P_direct(m);
    EXPECT_EQ(max_norm(solve_Phi(m, P, solve_Gamma_direct(m, P))), 0.0);
}

TEST(SolvePhi, ClosedFormExampleIsIdenticallyZero)
{
    const auto sol = solve_riccati(test::preset("netsec-closed-form"));
    EXPECT_LE(max_norm(sol.Phi), 1e-10);
}

TEST(SolvePhi, FrozenCoefficientLinearOde)
{
    ScalarParams p;
    p.a = 0.3;
    p.b = 0.7;
    p.c = 0.2;
    p.d = 0.4;
    p.k = 1.0;
    p.r = 1.0;
    const auto m = LqMfgModel::build(scalar_model(p, 1000));
    const double P = 2.0, G = 0.5;
    const MatrixSeq Ps(1001, Eigen::MatrixXd::Constant(1, 1, P));
    const MatrixSeq Gs(1001, Eigen::MatrixXd::Constant(1, 1, G));
    const auto phi = solve_Phi(m, Ps, Gs);

    // Phi' + lambda Phi + (P + Gamma) b = 0 with lambda = a - (P b + c P d + Gamma b) b / Sigma.
    const double sigma = p.r + p.d * p.d * P;
    const double lam = p.a - (P * p.b + p.c * P * p.d + G * p.b) * p.b / sigma;
    for (std::size_t j = 0; j <= 1000; ++j)
    {
        const double s = 1.0 - m.grid().time(j);
        EXPECT_NEAR(phi[j](0), (P + G) * p.k * (std::exp(lam * s) - 1.0) / lam, 1e-8);
    }
}

TEST(BuildFeedback, NoControlChannelGivesZeroLaw)
{
    std::mt19937_64 rng(3);
    ModelData d = test::random_model(rng, 50);
    d.B = d.D = d.D0 = CoefficientSchedule::zero(d.n, d.k, 50);
    const auto m = LqMfgModel::build(d);
    const auto law = build_feedback(m, solve_riccati(m));
    EXPECT_EQ(max_norm(law.K_z), 0.0);
    EXPECT_EQ(max_norm(law.K_m), 0.0);
    EXPECT_EQ(max_norm(law.c_u), 0.0);
}

TEST(BuildFeedback, ClosedFormGains)
{
    const auto m = test::preset("netsec-closed-form");
    const auto sol = solve_riccati(m);
    const auto law = build_feedback(m, sol);
    for (std::size_t j = 0; j < law.K_z.size(); ++j)
    {
        EXPECT_NEAR(law.K_z[j](0, 0), -sol.P[j](0, 0), 1e-14);
        EXPECT_NEAR(law.K_m[j](0, 0), -sol.Gamma[j](0, 0), 1e-14);
        EXPECT_NEAR(law.c_u[j](0), 0.0, 1e-10);
    }
}

TEST(BuildFeedback, NumericPresetTerminalGain)
{
    const auto m = test::preset("netsec-numeric");
    const auto law = build_feedback(m, solve_riccati(m));
    const double expected = -(2.8 * 5 + 0.6 * 2.5 * 5) / (2.5 + 2.5 * 2.5 * 5 + 6.0 * 6.0 * 5);
    EXPECT_NEAR(law.K_z.back()(0, 0), expected, 1e-14);
}

TEST(SolveRiccati, TerminalConditionsExact)
{
    std::mt19937_64 rng(99);
    const auto m = LqMfgModel::build(test::random_model(rng, 100));
    const auto sol = solve_riccati(m);
    EXPECT_EQ((sol.P.back() - m.G()).norm(), 0.0);
    EXPECT_EQ(sol.Gamma.back().norm(), 0.0);
    EXPECT_EQ(sol.Phi.back().norm(), 0.0);
    for (const auto& s : sol.Sigma)
        EXPECT_GE(min_eigenvalue(s), m.r_min());
}

TEST(SolveRiccati, ZeroDataCollapse)
{
    const auto m = zero_data_model();
    const auto sol = solve_riccati(m);
    const auto law = build_feedback(m, sol);
    EXPECT_EQ(max_norm(sol.P) + max_norm(sol.Gamma) + max_norm(sol.Phi), 0.0);
    EXPECT_EQ(max_norm(law.K_z) + max_norm(law.K_m) + max_norm(law.c_u), 0.0);
}

TEST(Integrator, DivergenceOnLostDefiniteness)
{
    const TimeGrid grid(1.0, 10);
    auto rhs = [](std::size_t, double, const Eigen::MatrixXd& y) { return Eigen::MatrixXd::Ones(y.rows(), y.cols()); };
    EXPECT_THROW((void)integrate_backward(grid, Eigen::MatrixXd::Zero(1, 1), rhs, keep, psd_check("Y")),
                 DivergenceError);
}

TEST(Integrator, DivergenceOnNonFinite)
{
    const TimeGrid grid(1.0, 10);
    auto rhs = [](std::size_t, double, const Eigen::MatrixXd& y) {
        return Eigen::MatrixXd::Constant(y.rows(), y.cols(), std::numeric_limits<double>::infinity());
    };
    EXPECT_THROW((void)integrate_backward(grid, Eigen::MatrixXd::Zero(1, 1), rhs, keep, no_check), DivergenceError);
}

TEST(Linalg, SingularSigmaReportsTime)
{
    try
    {
        (void)spd_inverse(Eigen::MatrixXd::Constant(1, 1, 1e-12), 1e-8, 0.25);
        FAIL();
    }
    catch (const SingularityError& e)
    {
        EXPECT_EQ(e.time(), 0.25);
    }
}

TEST(Interpolator, ExactOnCubics)
{
    MatrixSeq nodes;
    for (int j = 0; j <= 6; ++j)
        nodes.push_back(Eigen::MatrixXd::Constant(1, 1, std::pow(j, 3) - 2.0 * j));
    const NodeInterpolator it(nodes);
    for (std::size_t j : {0, 2, 5})
        for (double th : {0.0, 0.25, 0.5, 1.0})
        {
            const double x = j + th;
            EXPECT_NEAR(it.at(j, th)(0, 0), x * x * x - 2.0 * x, 1e-12);
        }
}
