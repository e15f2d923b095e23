#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>
#include <string>

#include "drcap/scenario.hpp"

using namespace drcap;

namespace {

std::string tmp_path(const char* name) {
    return std::string("/tmp/drcap_test_") + name;
}

Trace ramp_trace(const std::string& id, int slots, double res) {
    Trace tr;
    tr.source_id = id;
    tr.resolution_s = res;
    tr.start_epoch_s = 1672531200;  // 2023-01-01T00:00:00Z
    tr.kw.resize(slots);
    for (int k = 0; k < slots; ++k) tr.kw[k] = 1.0 + 0.25 * (k % 7);
    return tr;
}

}  // namespace

TEST_CASE("trace csv round trip") {
    const std::string path = tmp_path("traces.csv");
    std::vector<Trace> traces = {ramp_trace("home1", 12, 300.0), ramp_trace("wind", 12, 300.0)};
    traces[1].kw *= 3.0;
    save_traces_csv(path, traces);
    const std::vector<Trace> back = load_traces_csv(path);
    REQUIRE(back.size() == 2);
    for (const auto& tr : back) {
        const Trace& want = tr.source_id == "wind" ? traces[1] : traces[0];
        CHECK(tr.resolution_s == want.resolution_s);
        CHECK(tr.start_epoch_s == want.start_epoch_s);
        REQUIRE(tr.slots() == want.slots());
        CHECK((tr.kw - want.kw).cwiseAbs().maxCoeff() == 0.0);
    }
    std::remove(path.c_str());
}

TEST_CASE("trace csv rejects gaps with the offending location") {
    const std::string path = tmp_path("gappy.csv");
    std::ofstream out(path);
    out << "timestamp,source_id,kw\n"
        << "2023-01-01T00:00:00Z,home1,1.0\n"
        << "2023-01-01T00:05:00Z,home1,1.1\n"
        << "2023-01-01T00:15:00Z,home1,1.2\n";  // 00:10 missing
    out.close();
    CHECK_THROWS_WITH_AS(load_traces_csv(path),
                         doctest::Contains("gap or irregular spacing"), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("trace csv rejects malformed rows by row number") {
    const std::string path = tmp_path("badrow.csv");
    std::ofstream out(path);
    out << "timestamp,source_id,kw\n"
        << "2023-01-01T00:00:00Z,home1,1.0\n"
        << "2023-01-01T00:05:00Z,home1,oops\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_traces_csv(path), doctest::Contains("row 3"), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("periodic profile and prediction errors") {
    Trace tr = ramp_trace("home1", 8, 300.0);
    // two "days" of 4 slots each
    tr.kw << 1, 2, 3, 4, 3, 2, 1, 0;
    const Eigen::VectorXd profile = fit_periodic_profile(tr, 4);
    CHECK(profile[0] == doctest::Approx(2.0));
    CHECK(profile[1] == doctest::Approx(2.0));
    CHECK(profile[2] == doctest::Approx(2.0));
    CHECK(profile[3] == doctest::Approx(2.0));
    const ErrorSeries es = prediction_errors_with_profile(tr, profile);
    CHECK(es.errors[0] == doctest::Approx(-1.0));
    CHECK(es.errors[3] == doctest::Approx(2.0));
    CHECK(es.lo == doctest::Approx(-2.0));
    CHECK(es.hi == doctest::Approx(2.0));
    CHECK(es.errors.sum() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("bootstrap is deterministic under the seed and block-structured") {
    std::vector<Trace> base = {ramp_trace("home1", 12, 300.0)};
    const auto a = bootstrap_customers(base, 4, 42, 4);
    const auto b = bootstrap_customers(base, 4, 42, 4);
    const auto c = bootstrap_customers(base, 4, 43, 4);
    REQUIRE(a.size() == 4);
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK((a[i].kw - b[i].kw).cwiseAbs().maxCoeff() == 0.0);
        if ((a[i].kw - c[i].kw).cwiseAbs().maxCoeff() > 0.0) differs = true;
        // every block must be a verbatim day block of the base trace
        for (int blk = 0; blk < 3; ++blk) {
            bool matched = false;
            for (int src = 0; src < 3 && !matched; ++src)
                matched = (a[i].kw.segment(4 * blk, 4) - base[0].kw.segment(4 * src, 4))
                              .cwiseAbs().maxCoeff() == 0.0;
            CHECK(matched);
        }
    }
    CHECK(differs);
}

TEST_CASE("cost draws respect the truncation range and the training mean") {
    const CostDraws cd = sample_cost_coeffs(5, 2.0, 6.0, 0.4, 300, 99);
    CHECK(cd.a_tilde.minCoeff() >= 2.0);
    CHECK(cd.a_tilde.maxCoeff() <= 6.0);
    CHECK(cd.train.minCoeff() >= 2.0);
    CHECK(cd.train.maxCoeff() <= 6.0);
    CHECK(cd.test.minCoeff() >= 2.0);
    CHECK(cd.test.maxCoeff() <= 6.0);
    CHECK((cd.a_hat - cd.train.colwise().mean().transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    // train and test streams are distinct draws
    CHECK((cd.train - cd.test).cwiseAbs().maxCoeff() > 0.0);
    // zero spread collapses every realization onto the latent mean
    const CostDraws flat = sample_cost_coeffs(3, 2.0, 6.0, 0.0, 50, 99);
    for (int i = 0; i < 3; ++i) {
        CHECK((flat.train.col(i).array() - flat.a_tilde[i]).abs().maxCoeff() <= 1e-12);
        CHECK((flat.test.col(i).array() - flat.a_tilde[i]).abs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("assembled scenario moments match direct computation") {
    const int T = 40, N = 3;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd errs(T, N);
    Eigen::VectorXd ren(T);
    Eigen::MatrixXd a = Eigen::MatrixXd::Constant(T, N, 1.5);
    for (int t = 0; t < T; ++t) {
        for (int i = 0; i < N; ++i) errs(t, i) = g(rng);
        ren[t] = 0.3 * g(rng);
    }
    const Eigen::VectorXd a_hat = Eigen::VectorXd::Constant(N, 1.5);
    const ScenarioSet set = assemble_scenarios(errs, ren, a, a_hat, a_hat, 2.0);

    Eigen::MatrixXd psi(T, N + 1);
    psi.leftCols(N) = errs;
    psi.col(N) = 2.0 * ren;
    CHECK((set.mean - psi.colwise().mean().transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    const Eigen::MatrixXd M = psi.transpose() * psi / T;
    CHECK((set.second_moment - M).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((set.lo - psi.colwise().minCoeff().transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((set.hi - psi.colwise().maxCoeff().transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    const Eigen::VectorXd D = errs.rowwise().sum() - 2.0 * ren;
    CHECK((set.D - D).cwiseAbs().maxCoeff() <= 1e-12);
    const Scenario s = set.scenario(7);
    CHECK(s.D == doctest::Approx(D[7]).epsilon(1e-12));
    CHECK(s.delta_r == doctest::Approx(2.0 * ren[7]).epsilon(1e-12));
}

TEST_CASE("derive_seed splits streams deterministically") {
    CHECK(derive_seed(1, 2) == derive_seed(1, 2));
    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}
