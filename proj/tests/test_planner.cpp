#include <doctest.h>

#include <random>

#include "drcap/planner.hpp"

using namespace drcap;

namespace {

// Hand-assembled scenario set: one customer, unit costs, given mismatches.
ScenarioSet toy_set(const Eigen::VectorXd& D, double a = 1.0) {
    const int T = static_cast<int>(D.size());
    Eigen::MatrixXd errs = D;
    Eigen::VectorXd ren = Eigen::VectorXd::Zero(T);
    Eigen::MatrixXd coeffs = Eigen::MatrixXd::Constant(T, 1, a);
    const Eigen::VectorXd a_hat = Eigen::VectorXd::Constant(1, a);
    return assemble_scenarios(errs, ren, coeffs, a_hat, a_hat, 1.0);
}

ScenarioSet random_set(int T, int N, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> ua(0.5, 3.0);
    Eigen::MatrixXd errs(T, N);
    Eigen::VectorXd ren(T);
    Eigen::MatrixXd a(T, N);
    for (int t = 0; t < T; ++t) {
        ren[t] = 0.5 * g(rng);
        for (int i = 0; i < N; ++i) {
            errs(t, i) = g(rng);
            a(t, i) = ua(rng);
        }
    }
    const Eigen::VectorXd a_hat = a.colwise().mean();
    return assemble_scenarios(errs, ren, a, a_hat, a_hat, 1.0);
}

}  // namespace

TEST_CASE("two-scenario toy has the analytic capacity optimum") {
    // a = A = 1, D in {2, 4}: while the cap binds in both scenarios the mean
    // dual is 6 - 4*kappa, so c = 2.5 balances at kappa* = 0.875.
    Eigen::VectorXd D(2);
    D << 2.0, 4.0;
    const ScenarioSet set = toy_set(D);
    CHECK(mean_capacity_dual(set, 1.0, 0.5) == doctest::Approx(4.0).epsilon(1e-12));
    const OptSolution sol = solve_opt(set, {1.0, 2.5});
    CHECK(sol.plan.kappa == doctest::Approx(0.875).epsilon(1e-5));
    // at the optimum the expected dual balances the capacity price
    CHECK(mean_capacity_dual(set, 1.0, sol.plan.kappa) == doctest::Approx(2.5).epsilon(1e-4));
}

TEST_CASE("expensive capacity drives kappa to zero") {
    Eigen::VectorXd D(2);
    D << 2.0, 4.0;
    const ScenarioSet set = toy_set(D);
    // E[theta](0) = 6, so any c above that buys nothing
    const OptSolution sol = solve_opt(set, {1.0, 7.0});
    CHECK(sol.plan.kappa == 0.0);
}

TEST_CASE("free capacity leaves every scenario uncapped") {
    const ScenarioSet set = random_set(50, 3, 11);
    const OptSolution sol = solve_opt(set, {0.8, 0.0});
    for (const auto& d : sol.dispatches) {
        CHECK(d.theta_lo == 0.0);
        CHECK(d.theta_hi == 0.0);
    }
}

TEST_CASE("opt expected cost decomposes into dispatch plus capacity") {
    const ScenarioSet set = random_set(60, 2, 3);
    const LseCost cost{1.2, 0.7};
    const OptSolution sol = solve_opt(set, cost);
    CHECK(sol.plan.expected_cost ==
          doctest::Approx(mean_realtime_cost(set, cost.A, sol.plan.kappa) +
                          cost.c_slot * sol.plan.kappa).epsilon(1e-12));
    // no interior kappa beats it on the training set itself
    for (double k : {0.0, 0.5 * sol.plan.kappa, 1.5 * sol.plan.kappa, worst_case_kappa(set)}) {
        const double alt = mean_realtime_cost(set, cost.A, k) + cost.c_slot * k;
        CHECK(sol.plan.expected_cost <= alt + 1e-6 * (1.0 + alt));
    }
}

TEST_CASE("expected real-time cost is convex in kappa") {
    for (std::uint64_t seed : {1, 2, 3}) {
        const ScenarioSet set = random_set(40, 2, seed);
        const double hi = worst_case_kappa(set);
        for (int k = 1; k < 9; ++k) {
            const double mid = hi * k / 9.0, h = hi / 18.0;
            const double f0 = mean_realtime_cost(set, 1.0, mid - h);
            const double f1 = mean_realtime_cost(set, 1.0, mid);
            const double f2 = mean_realtime_cost(set, 1.0, mid + h);
            CHECK(f1 <= 0.5 * (f0 + f2) + 1e-9 * (1.0 + std::abs(f1)));
        }
    }
}

TEST_CASE("worst-case kappa is exactly the empirical support of |D|") {
    Eigen::VectorXd D(4);
    D << 1.0, -5.5, 3.0, 2.0;
    CHECK(worst_case_kappa(toy_set(D)) == 5.5);
}

TEST_CASE("sequential plan never exceeds its capacity and is dearer than opt") {
    const ScenarioSet set = random_set(80, 3, 17);
    const LseCost cost{1.0, 0.4};
    const CapacityPlan seq = solve_seq(set, cost);
    CHECK(seq.kappa == worst_case_kappa(set));
    const OptSolution opt = solve_opt(set, cost);
    CHECK(opt.plan.expected_cost <= seq.expected_cost + 1e-9);
}
