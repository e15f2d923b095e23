#include "drcap/planner.hpp"

#include <cmath>
#include <stdexcept>

#include "drcap/pred.hpp"

namespace drcap {

double mean_capacity_dual(const ScenarioSet& scenarios, double A, double kappa) {
    const int T = scenarios.slots();
    if (T == 0) throw std::invalid_argument("mean_capacity_dual: empty scenario set");
    double acc = 0.0;
    for (int t = 0; t < T; ++t) {
        const Scenario s = scenarios.scenario(t);
        const DispatchResult r = dispatch_capped(s.a, A, s.D, kappa);
        acc += r.theta_lo + r.theta_hi;
    }
    return acc / T;
}

double mean_realtime_cost(const ScenarioSet& scenarios, double A, double kappa) {
    const int T = scenarios.slots();
    if (T == 0) throw std::invalid_argument("mean_realtime_cost: empty scenario set");
    double acc = 0.0;
    for (int t = 0; t < T; ++t) {
        const Scenario s = scenarios.scenario(t);
        const DispatchResult r = dispatch_capped(s.a, A, s.D, kappa);
        acc += realized_social_cost(r, s.a, A);
    }
    return acc / T;
}

double worst_case_kappa(const ScenarioSet& scenarios) {
    if (scenarios.slots() == 0) throw std::invalid_argument("worst_case_kappa: empty scenario set");
    return std::max(std::abs(scenarios.D.maxCoeff()), std::abs(scenarios.D.minCoeff()));
}

OptSolution solve_opt(const ScenarioSet& scenarios, const LseCost& cost) {
    const int T = scenarios.slots();
    const double kappa_seq = worst_case_kappa(scenarios);

    double kappa = 0.0;
    if (kappa_seq > 0.0) {
        if (cost.c_slot <= 0.0) {
            // Free capacity: cover the largest unconstrained leftover so no
            // scenario is ever capped.
            for (int t = 0; t < T; ++t) {
                const Scenario s = scenarios.scenario(t);
                const DispatchResult r = dispatch_unconstrained(s.a, cost.A, s.D);
                kappa = std::max(kappa, std::abs(r.delta));
            }
        } else if (mean_capacity_dual(scenarios, cost.A, 0.0) <= cost.c_slot) {
            kappa = 0.0;
        } else {
            // E[theta_lo + theta_hi] is nonincreasing in kappa; bisect the
            // balance condition c = E[theta_lo + theta_hi] on [0, kappa_seq].
            double lo = 0.0, hi = kappa_seq;
            const double width = 1e-6 * kappa_seq;
            while (hi - lo > width) {
                const double mid = 0.5 * (lo + hi);
                if (mean_capacity_dual(scenarios, cost.A, mid) > cost.c_slot)
                    lo = mid;
                else
                    hi = mid;
            }
            kappa = 0.5 * (lo + hi);
        }
    }

    OptSolution sol;
    sol.plan.kappa = kappa;
    sol.plan.policy_tag = "OPT";
    sol.dispatches.reserve(T);
    double acc = 0.0;
    for (int t = 0; t < T; ++t) {
        const Scenario s = scenarios.scenario(t);
        DispatchResult r = dispatch_capped(s.a, cost.A, s.D, kappa);
        acc += realized_social_cost(r, s.a, cost.A);
        sol.dispatches.push_back(std::move(r));
    }
    sol.plan.expected_cost = acc / T + cost.c_slot * kappa;
    return sol;
}

CapacityPlan solve_seq(const ScenarioSet& scenarios, const LseCost& cost) {
    CapacityPlan plan;
    plan.kappa = worst_case_kappa(scenarios);
    plan.policy_tag = "SEQ";
    const PriceRule rule = price_rule(scenarios.a_hat, cost.A, plan.kappa);
    const PolicySim sim = simulate_pred(rule, scenarios);
    plan.expected_cost = sim.mean_total_cost(cost.c_slot);
    return plan;
}

}  // namespace drcap
