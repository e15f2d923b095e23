#include "drcap/pred.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace drcap {

double PriceRule::price(double D) const {
    if (S <= 0.0) return 0.0;
    double p = 2.0 * A * D / (1.0 + 2.0 * A * S);
    const double p_lo = (D - kappa) / S;  // leftover = kappa face
    const double p_hi = (D + kappa) / S;  // leftover = -kappa face
    return std::clamp(p, p_lo, p_hi);
}

double PriceRule::stage_cost(double D) const {
    const double p = price(D);
    const double leftover = D - p * S;
    // Estimated customer disutility sum a_hat_i (p/2a_hat_i)^2 = (S/2) p^2.
    return 0.5 * S * p * p + A * leftover * leftover;
}

Eigen::VectorXd estimated_response(const Eigen::VectorXd& a_hat, double p) {
    return p / 2.0 * a_hat.cwiseInverse();
}

PriceRule price_rule(const Eigen::VectorXd& a_hat, double A, double kappa) {
    if ((a_hat.array() <= 0.0).any())
        throw std::invalid_argument("price_rule: a_hat must be positive");
    if (A <= 0.0) throw std::invalid_argument("price_rule: A must be positive");
    if (kappa < 0.0) throw std::invalid_argument("price_rule: kappa must be nonnegative");
    PriceRule rule;
    rule.kappa = kappa;
    rule.A = A;
    rule.S = (0.5 * a_hat.cwiseInverse()).sum();
    return rule;
}

PredSolution solve_pred(const ScenarioSet& train, const LseCost& cost, int grid_points) {
    if (train.slots() == 0) throw std::invalid_argument("solve_pred: empty scenario set");
    if (grid_points < 2) throw std::invalid_argument("solve_pred: grid_points must be >= 2");
    const double kappa_seq = worst_case_kappa(train);
    const int T = train.slots();

    double best_kappa = 0.0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int g = 0; g < grid_points; ++g) {
        const double kappa = kappa_seq * g / (grid_points - 1);
        PriceRule rule = price_rule(train.a_hat, cost.A, kappa);
        double acc = 0.0;
        for (int t = 0; t < T; ++t) acc += rule.stage_cost(train.D(t));
        const double total = acc / T + cost.c_slot * kappa;
        if (total < best_cost) {
            best_cost = total;
            best_kappa = kappa;
        }
    }

    PredSolution sol;
    sol.rule = price_rule(train.a_hat, cost.A, best_kappa);
    sol.plan.kappa = best_kappa;
    sol.plan.expected_cost = best_cost;
    sol.plan.policy_tag = "PRED";
    return sol;
}

PolicySim simulate_pred(const PriceRule& rule, const ScenarioSet& test) {
    const int T = test.slots();
    if (T == 0) throw std::invalid_argument("simulate_pred: empty scenario set");
    PolicySim sim;
    sim.kappa = rule.kappa;
    sim.cost.resize(T);
    sim.leftover.resize(T);
    sim.dr_total.resize(T);
    for (int t = 0; t < T; ++t) {
        const Scenario s = test.scenario(t);
        const double p = rule.price(s.D);
        const Eigen::VectorXd x = estimated_response(s.a, p);
        const double leftover = s.D - x.sum();
        sim.cost(t) = (s.a.array() * x.array().square()).sum() + rule.A * leftover * leftover;
        sim.leftover(t) = leftover;
        sim.dr_total(t) = x.sum();
    }
    return sim;
}

}  // namespace drcap
