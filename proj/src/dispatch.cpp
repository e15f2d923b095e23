#include "drcap/dispatch.hpp"

#include <cmath>
#include <stdexcept>

namespace drcap {

namespace {

void check_model(const Eigen::VectorXd& a, double A, double D) {
    if (!(A > 0.0)) throw std::invalid_argument("dispatch: LSE coefficient A must be > 0");
    if (!std::isfinite(D)) throw std::invalid_argument("dispatch: mismatch D must be finite");
    for (Eigen::Index i = 0; i < a.size(); ++i)
        if (!(a[i] > 0.0) || !std::isfinite(a[i]))
            throw std::invalid_argument("dispatch: customer coefficients must be > 0");
}

double finish(DispatchResult& r, const Eigen::VectorXd& a, double A) {
    r.customer_cost = (a.array() * r.x.array().square()).sum();
    r.lse_cost = A * r.delta * r.delta;
    return r.customer_cost + r.lse_cost;
}

}  // namespace

DispatchResult dispatch_unconstrained(const Eigen::VectorXd& a, double A, double D) {
    check_model(a, A, D);
    DispatchResult r;
    const double sum_ratio = (A / a.array()).sum();
    r.delta = D / (1.0 + sum_ratio);
    r.x = (A / a.array()) * r.delta;
    finish(r, a, A);
    return r;
}

DispatchResult dispatch_capped(const Eigen::VectorXd& a, double A, double D, double kappa) {
    check_model(a, A, D);
    if (!(kappa >= 0.0)) throw std::invalid_argument("dispatch: kappa must be >= 0");

    DispatchResult r = dispatch_unconstrained(a, A, D);
    if (std::abs(r.delta) <= kappa) return r;

    // Binding face chosen by the sign of the unconstrained leftover.
    const double face = (r.delta > kappa) ? kappa : -kappa;
    const double total = D - face;  // sum of x on the binding face
    const Eigen::ArrayXd inv_a = a.array().inverse();
    r.x = (inv_a / inv_a.sum()) * total;
    r.delta = face;
    // Stationarity (the residual is identical across customers):
    // 2 a_i x_i - 2 A delta + theta_lo - theta_hi = 0.
    const double residual = 2.0 * a[0] * r.x[0] - 2.0 * A * face;
    if (kappa == 0.0) {
        // Degenerate box: both constraints coincide; report the residual on
        // the side matching the sign of D.
        r.theta_hi = (D > 0.0) ? residual : 0.0;
        r.theta_lo = (D < 0.0) ? -residual : 0.0;
    } else if (face > 0.0) {
        r.theta_hi = residual;
        r.theta_lo = 0.0;
    } else {
        r.theta_hi = 0.0;
        r.theta_lo = -residual;
    }
    finish(r, a, A);
    return r;
}

double kappa_subgradient(const DispatchResult& r) {
    return -(r.theta_lo + r.theta_hi);
}

double realized_social_cost(const DispatchResult& r, const Eigen::VectorXd& a, double A) {
    return (a.array() * r.x.array().square()).sum() + A * r.delta * r.delta;
}

namespace {

// Inverts an increasing marginal with marginal(0) = 0 by expanding bracket
// plus bisection.
double invert_marginal(const MarginalFn& m, int i, double price, double tol, int max_iter) {
    if (price == 0.0) return 0.0;
    double lo = 0.0, hi = (price > 0.0) ? 1.0 : -1.0;
    for (int k = 0; k < 200 && (price > 0.0 ? m(i, hi) < price : m(i, hi) > price); ++k) hi *= 2.0;
    if (price < 0.0) std::swap(lo, hi);
    for (int k = 0; k < max_iter; ++k) {
        const double mid = 0.5 * (lo + hi);
        if (m(i, mid) < price) lo = mid; else hi = mid;
        if (hi - lo < tol * (1.0 + std::abs(hi))) break;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

DispatchResult dispatch_generic(int n, const MarginalFn& marginal,
                                const ScalarMarginalFn& lse_marginal,
                                double D, double kappa, double tol, int max_iter) {
    if (!(kappa >= 0.0)) throw std::invalid_argument("dispatch: kappa must be >= 0");
    auto response = [&](double p) {
        Eigen::VectorXd x(n);
        for (int i = 0; i < n; ++i) x[i] = invert_marginal(marginal, i, p, tol, max_iter);
        return x;
    };
    // Shared marginal price p solves p = C_g'(D - sum x_i(p)); the left side
    // is increasing in p and the right side decreasing.
    double p_lo = std::min(0.0, lse_marginal(D));
    double p_hi = std::max(0.0, lse_marginal(D));
    double p = 0.0;
    for (int k = 0; k < max_iter; ++k) {
        p = 0.5 * (p_lo + p_hi);
        const Eigen::VectorXd x = response(p);
        const double g = p - lse_marginal(D - x.sum());
        if (g < 0.0) p_lo = p; else p_hi = p;
        if (p_hi - p_lo < tol * (1.0 + std::abs(p_hi))) break;
    }
    DispatchResult r;
    r.x = response(p);
    r.delta = D - r.x.sum();
    if (std::abs(r.delta) > kappa) {
        const double face = (r.delta > 0.0) ? kappa : -kappa;
        const double target = D - face;
        // Raise (or lower) the price until the aggregate response hits the face.
        double q_lo = p, q_hi = p;
        double step = std::max(1.0, std::abs(p));
        if (r.delta > 0.0) {
            while (response(q_hi).sum() < target) q_hi += (step *= 2.0);
        } else {
            while (response(q_lo).sum() > target) q_lo -= (step *= 2.0);
        }
        for (int k = 0; k < max_iter; ++k) {
            const double mid = 0.5 * (q_lo + q_hi);
            if (response(mid).sum() < target) q_lo = mid; else q_hi = mid;
            if (q_hi - q_lo < tol * (1.0 + std::abs(q_hi))) break;
        }
        p = 0.5 * (q_lo + q_hi);
        r.x = response(p);
        r.delta = face;
        const double residual = p - lse_marginal(face);
        if (face >= 0.0 && D > 0.0) {
            r.theta_hi = residual;
        } else {
            r.theta_lo = -residual;
        }
    }
    return r;
}

}  // namespace drcap
