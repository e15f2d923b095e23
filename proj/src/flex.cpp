#include "drcap/flex.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace drcap {

std::vector<int> select_violations(const Eigen::VectorXd& a_series, double rho) {
    if (rho < 0.0 || rho > 1.0)
        throw std::invalid_argument("select_violations: rho must lie in [0,1]");
    const int T = static_cast<int>(a_series.size());
    const int m = static_cast<int>(std::floor((1.0 - rho) * T));
    if (m <= 0) return {};

    std::vector<int> order(T);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int p, int q) {
        if (a_series(p) != a_series(q)) return a_series(p) > a_series(q);
        return p < q;
    });
    order.resize(m);
    std::sort(order.begin(), order.end());
    return order;
}

namespace {

// (1-rho)-quantile threshold from the training series; a customer in online
// mode violates whenever its realized coefficient strictly exceeds it.
double quantile_threshold(const Eigen::VectorXd& train_series, double rho) {
    std::vector<double> v(train_series.data(), train_series.data() + train_series.size());
    std::sort(v.begin(), v.end());
    const double pos = rho * (v.size() - 1);
    const int k = static_cast<int>(std::floor(pos));
    const double frac = pos - k;
    return k + 1 < static_cast<int>(v.size()) ? v[k] + frac * (v[k + 1] - v[k]) : v.back();
}

}  // namespace

FlexSim simulate_lin_plus(const LinearContract& contract, const FlexParams& params,
                          const ScenarioSet& test, const LseCost& cost,
                          const ScenarioSet* train) {
    const int T = test.slots();
    const int N = test.customers();
    if (T == 0) throw std::invalid_argument("simulate_lin_plus: empty scenario set");
    if (params.mode == ViolationMode::OnlineQuantile && !train)
        throw std::invalid_argument("simulate_lin_plus: online mode needs a training set");

    // violates(t, i): customer i opts out of slot t.
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> violates(T, N);
    violates.setConstant(false);
    for (int i = 0; i < N; ++i) {
        if (params.mode == ViolationMode::Clairvoyant) {
            for (int t : select_violations(test.a.col(i), params.rho)) violates(t, i) = true;
        } else {
            const double thr = quantile_threshold(train->a.col(i), params.rho);
            const int budget = static_cast<int>(std::floor((1.0 - params.rho) * T));
            int used = 0;
            for (int t = 0; t < T && used < budget; ++t)
                if (test.a(t, i) > thr) {
                    violates(t, i) = true;
                    ++used;
                }
        }
    }

    FlexSim out;
    out.sim.kappa = contract.kappa;
    out.sim.cost.resize(T);
    out.sim.leftover.resize(T);
    out.sim.dr_total.resize(T);
    for (int t = 0; t < T; ++t) {
        const double D = test.D(t);
        double dr = 0.0, ccost = 0.0;
        for (int i = 0; i < N; ++i) {
            if (violates(t, i)) continue;
            const double x = contract.alpha(i) * D + contract.beta(i) * test.delta(t, i) +
                             contract.gamma(i);
            dr += x;
            ccost += test.a(t, i) * x * x;
        }
        const double leftover = D - dr;
        out.sim.cost(t) = ccost + cost.A * leftover * leftover;
        out.sim.leftover(t) = leftover;
        out.sim.dr_total(t) = dr;
    }

    out.violation_rate = violates.cast<double>().mean();
    out.audit.mean_D = test.D.mean();
    out.audit.conditional_mean_D.resize(N);
    out.audit.ratio.resize(N);
    for (int i = 0; i < N; ++i) {
        double acc = 0.0;
        int cnt = 0;
        for (int t = 0; t < T; ++t)
            if (violates(t, i)) {
                acc += test.D(t);
                ++cnt;
            }
        if (cnt == 0) {
            out.audit.conditional_mean_D(i) = std::numeric_limits<double>::quiet_NaN();
            out.audit.ratio(i) = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        const double cond = acc / cnt;
        out.audit.conditional_mean_D(i) = cond;
        out.audit.ratio(i) = out.audit.mean_D != 0.0
                                 ? cond / out.audit.mean_D
                                 : std::numeric_limits<double>::quiet_NaN();
        if (std::abs(cond) > params.audit_tolerance * std::abs(out.audit.mean_D))
            out.audit.flagged.push_back(i);
    }
    return out;
}

RhoSweep sweep_rho(const LinearContract& contract, const ScenarioSet& test,
                   const LseCost& cost, const std::vector<double>& rho_grid,
                   double audit_tolerance) {
    if (rho_grid.empty()) throw std::invalid_argument("sweep_rho: empty rho grid");

    RhoSweep sweep;
    double best = std::numeric_limits<double>::infinity();
    for (double rho : rho_grid) {
        FlexParams params;
        params.rho = rho;
        params.audit_tolerance = audit_tolerance;
        const FlexSim fs = simulate_lin_plus(contract, params, test, cost);
        RhoPoint pt;
        pt.rho = rho;
        pt.social_cost = fs.sim.mean_total_cost(cost.c_slot);
        pt.leftover_norm = fs.sim.leftover_norm(test.D);
        pt.violation_rate = fs.violation_rate;
        pt.audit_flags = static_cast<int>(fs.audit.flagged.size());
        if (pt.social_cost < best) {
            best = pt.social_cost;
            sweep.rho_star = rho;
        }
        sweep.points.push_back(pt);
    }
    return sweep;
}

void save_rho_sweep_csv(const std::string& path, const RhoSweep& sweep) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_rho_sweep_csv: cannot open " + path);
    out << "rho,social_cost,leftover_norm,violation_rate,audit_flags\n";
    char buf[256];
    for (const auto& pt : sweep.points) {
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g,%d\n", pt.rho, pt.social_cost,
                      pt.leftover_norm, pt.violation_rate, pt.audit_flags);
        out << buf;
    }
    if (!out) throw std::runtime_error("save_rho_sweep_csv: write failed for " + path);
}

}  // namespace drcap
