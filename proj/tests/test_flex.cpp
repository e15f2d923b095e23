#include <doctest.h>

#include <random>

#include "drcap/flex.hpp"

using namespace drcap;

namespace {

ScenarioSet random_set(int T, int N, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> ua(0.5, 3.0);
    Eigen::MatrixXd errs(T, N);
    Eigen::VectorXd ren(T);
    Eigen::MatrixXd a(T, N);
    for (int t = 0; t < T; ++t) {
        ren[t] = 0.4 * g(rng);
        for (int i = 0; i < N; ++i) {
            errs(t, i) = g(rng);
            a(t, i) = ua(rng);
        }
    }
    const Eigen::VectorXd a_hat = a.colwise().mean();
    return assemble_scenarios(errs, ren, a, a_hat, a_hat, 1.0);
}

LinearContract small_contract(int N) {
    LinearContract ct;
    ct.alpha = Eigen::VectorXd::Constant(N, 1.0 / (N + 1));
    ct.beta = Eigen::VectorXd::Constant(N, 0.2);
    ct.gamma = Eigen::VectorXd::Constant(N, 0.01);
    ct.kappa = 1.0;
    return ct;
}

}  // namespace

TEST_CASE("violation slots are the most expensive ones, ties to the earlier slot") {
    Eigen::VectorXd a(4);
    a << 5, 1, 9, 3;
    CHECK(select_violations(a, 0.5) == std::vector<int>{0, 2});
    CHECK(select_violations(a, 1.0).empty());
    CHECK(select_violations(a, 0.0) == std::vector<int>{0, 1, 2, 3});
    // floor((1-rho)T): rho=0.6 over 4 slots -> 1 violation
    CHECK(select_violations(a, 0.6) == std::vector<int>{2});
    Eigen::VectorXd ties = Eigen::VectorXd::Ones(4);
    CHECK(select_violations(ties, 0.5) == std::vector<int>{0, 1});
}

TEST_CASE("violation budget is floor((1-rho)T) regardless of the series") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.5, 3.0);
    Eigen::VectorXd a(17);
    for (int t = 0; t < 17; ++t) a[t] = u(rng);
    for (double rho : {0.2, 0.5, 0.77, 0.95, 1.0}) {
        const auto v = select_violations(a, rho);
        CHECK(static_cast<int>(v.size()) == static_cast<int>(std::floor((1.0 - rho) * 17)));
    }
}

TEST_CASE("violation choice is independent of the mismatch") {
    // same coefficients, different D: the selected slots must agree
    ScenarioSet s1 = random_set(30, 2, 5);
    ScenarioSet s2 = s1;
    s2.D = -s1.D;
    s2.delta = -s1.delta;
    s2.delta_r = -s1.delta_r;
    LinearContract ct = small_contract(2);
    ct.gamma.setZero();  // keep the response an odd function of the mismatch
    const FlexParams p{0.7, 1e9, ViolationMode::Clairvoyant};
    const FlexSim f1 = simulate_lin_plus(ct, p, s1, {0.8, 0.0});
    const FlexSim f2 = simulate_lin_plus(ct, p, s2, {0.8, 0.0});
    CHECK(f1.violation_rate == f2.violation_rate);
    // identical violation pattern implies exactly mirrored responses
    CHECK((f1.sim.dr_total + f2.sim.dr_total).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("rho = 1 replays the plain contract bit for bit") {
    const ScenarioSet set = random_set(40, 3, 9);
    const LinearContract ct = small_contract(3);
    const LseCost cost{0.8, 0.03};
    const PolicySim plain = simulate_lin(ct, set, cost);
    const FlexSim flex = simulate_lin_plus(ct, {1.0, 1e9, ViolationMode::Clairvoyant}, set, cost);
    CHECK(flex.violation_rate == 0.0);
    REQUIRE(flex.sim.cost.size() == plain.cost.size());
    for (int t = 0; t < 40; ++t) {
        CHECK(flex.sim.cost[t] == plain.cost[t]);
        CHECK(flex.sim.leftover[t] == plain.leftover[t]);
        CHECK(flex.sim.dr_total[t] == plain.dr_total[t]);
    }
}

TEST_CASE("violated slots contribute no response and no customer cost") {
    const ScenarioSet set = random_set(20, 1, 33);
    const LinearContract ct = small_contract(1);
    const LseCost cost{0.8, 0.0};
    const FlexParams p{0.5, 1e9, ViolationMode::Clairvoyant};
    const FlexSim f = simulate_lin_plus(ct, p, set, cost);
    const auto viol = select_violations(set.a.col(0), 0.5);
    for (int t : viol) {
        CHECK(f.sim.dr_total[t] == 0.0);
        CHECK(f.sim.leftover[t] == set.D[t]);
        CHECK(f.sim.cost[t] == doctest::Approx(cost.A * set.D[t] * set.D[t]).epsilon(1e-12));
    }
    CHECK(f.violation_rate == doctest::Approx(static_cast<double>(viol.size()) / 20.0));
}

TEST_CASE("audit flags nothing when violations ignore the mismatch") {
    ScenarioSet set = random_set(200, 3, 71);
    // give D a solid mean so the conditional/overall ratio is well scaled
    set.delta.array() += 2.0;
    set.D = set.delta.rowwise().sum() - set.delta_r;
    const LinearContract ct = small_contract(3);
    const FlexSim f =
        simulate_lin_plus(ct, {0.8, 1.25, ViolationMode::Clairvoyant}, set, {0.8, 0.0});
    // coefficients are independent of D here, so conditional means stay close
    CHECK(f.audit.flagged.empty());
    CHECK(f.audit.mean_D == doctest::Approx(set.D.mean()).epsilon(1e-12));
}

TEST_CASE("online quantile mode needs training data and respects the budget") {
    const ScenarioSet train = random_set(60, 2, 11);
    const ScenarioSet test = random_set(60, 2, 12);
    const LinearContract ct = small_contract(2);
    const FlexParams p{0.7, 1e9, ViolationMode::OnlineQuantile};
    CHECK_THROWS_AS(simulate_lin_plus(ct, p, test, {0.8, 0.0}, nullptr), std::invalid_argument);
    const FlexSim f = simulate_lin_plus(ct, p, test, {0.8, 0.0}, &train);
    // per-customer violations never exceed floor((1-rho)T)
    CHECK(f.violation_rate <= static_cast<double>(static_cast<int>(0.3 * 60)) / 60.0 + 1e-12);
}

TEST_CASE("rho sweep finds the grid minimizer") {
    const ScenarioSet set = random_set(50, 2, 19);
    const LinearContract ct = small_contract(2);
    const LseCost cost{0.8, 0.05};
    const std::vector<double> grid = {0.2, 0.5, 0.8, 1.0};
    const RhoSweep sweep = sweep_rho(ct, set, cost, grid);
    REQUIRE(sweep.points.size() == 4);
    double best = 1e300;
    double best_rho = 1.0;
    for (const auto& pt : sweep.points) {
        if (pt.social_cost < best) {
            best = pt.social_cost;
            best_rho = pt.rho;
        }
    }
    CHECK(sweep.rho_star == best_rho);
}
