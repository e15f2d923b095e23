#include <doctest.h>

#include "drcap/pred.hpp"

using namespace drcap;

namespace {

ScenarioSet two_slot_set(double d0, double d1, double a_realized, double a_hat_v) {
    Eigen::MatrixXd errs(2, 1);
    errs << d0, d1;
    Eigen::VectorXd ren = Eigen::VectorXd::Zero(2);
    Eigen::MatrixXd a = Eigen::MatrixXd::Constant(2, 1, a_realized);
    const Eigen::VectorXd a_hat = Eigen::VectorXd::Constant(1, a_hat_v);
    return assemble_scenarios(errs, ren, a, a_hat, a_hat, 1.0);
}

}  // namespace

TEST_CASE("interior price matches the closed form") {
    Eigen::VectorXd a_hat(1);
    a_hat << 1.0;
    const PriceRule rule = price_rule(a_hat, 1.0, 10.0);  // cap slack
    CHECK(rule.S == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rule.price(3.0) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(rule.estimated_leftover(3.0) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(estimated_response(a_hat, rule.price(3.0))[0] == doctest::Approx(1.5).epsilon(1e-12));
    // H = (S/2) p^2 + A (D - pS)^2
    CHECK(rule.stage_cost(3.0) == doctest::Approx(4.5).epsilon(1e-12));
}

TEST_CASE("price clamps to the capacity boundary") {
    Eigen::VectorXd a_hat(1);
    a_hat << 1.0;
    const PriceRule rule = price_rule(a_hat, 1.0, 0.5);
    // interior p = 3 would leave 1.5 > kappa; boundary price (D - kappa)/S = 5
    CHECK(rule.price(3.0) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(rule.estimated_leftover(3.0) == doctest::Approx(0.5).epsilon(1e-12));
    // symmetric for negative mismatch
    CHECK(rule.price(-3.0) == doctest::Approx(-5.0).epsilon(1e-12));
    CHECK(rule.estimated_leftover(-3.0) == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("stage cost is what the estimated response realizes") {
    Eigen::VectorXd a_hat(3);
    a_hat << 0.8, 1.4, 2.1;
    const PriceRule rule = price_rule(a_hat, 0.9, 0.7);
    for (double D : {-4.0, -0.3, 0.0, 2.5, 9.0}) {
        const double p = rule.price(D);
        const Eigen::VectorXd x = estimated_response(a_hat, p);
        const double direct =
            (a_hat.array() * x.array().square()).sum() +
            0.9 * (D - x.sum()) * (D - x.sum());
        CHECK(rule.stage_cost(D) == doctest::Approx(direct).epsilon(1e-12));
        CHECK(std::abs(rule.estimated_leftover(D)) <= rule.kappa + 1e-12);
    }
}

TEST_CASE("kappa grid search beats the endpoints") {
    Eigen::MatrixXd errs(6, 2);
    errs << 1, 2, -3, 1, 0.5, 0.5, 2, 2, -1, -1, 4, -2;
    Eigen::VectorXd ren = Eigen::VectorXd::Zero(6);
    Eigen::MatrixXd a = Eigen::MatrixXd::Constant(6, 2, 1.0);
    const Eigen::VectorXd a_hat = Eigen::VectorXd::Constant(2, 1.0);
    const ScenarioSet set = assemble_scenarios(errs, ren, a, a_hat, a_hat, 1.0);
    const LseCost cost{1.0, 0.5};
    const PredSolution sol = solve_pred(set, cost, 400);

    auto objective = [&](double kappa) {
        const PriceRule r = price_rule(a_hat, cost.A, kappa);
        double acc = 0.0;
        for (int t = 0; t < set.slots(); ++t) acc += r.stage_cost(set.D[t]);
        return acc / set.slots() + cost.c_slot * kappa;
    };
    CHECK(sol.plan.expected_cost == doctest::Approx(objective(sol.rule.kappa)).epsilon(1e-10));
    CHECK(sol.plan.expected_cost <= objective(0.0) + 1e-12);
    CHECK(sol.plan.expected_cost <= objective(worst_case_kappa(set)) + 1e-12);
}

TEST_CASE("simulation responds with realized coefficients, not estimates") {
    // a_hat = 1 sets the price; realized a = 2 halves the response.
    const ScenarioSet set = two_slot_set(3.0, -3.0, 2.0, 1.0);
    const PriceRule rule = price_rule(set.a_hat, 1.0, 10.0);
    const PolicySim sim = simulate_pred(rule, set);
    const double p = rule.price(3.0);  // 3
    CHECK(sim.dr_total[0] == doctest::Approx(p / (2.0 * 2.0)).epsilon(1e-12));
    CHECK(sim.leftover[0] == doctest::Approx(3.0 - p / 4.0).epsilon(1e-12));
    CHECK(sim.leftover[1] == doctest::Approx(-(3.0 - p / 4.0)).epsilon(1e-12));
    // under-response can exceed the estimated leftover; it is recorded as-is
    CHECK(sim.leftover.cwiseAbs().maxCoeff() > rule.estimated_leftover(3.0));
    CHECK(sim.kappa == rule.kappa);
}
