#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include "epictrl/model.hpp"
#include "epictrl/rng.hpp"
#include "test_support.hpp"

using namespace epictrl;
using epictrl::testing::one_class_params;
using epictrl::testing::paper_i0;
using epictrl::testing::six_class_params;
using epictrl::testing::two_class_params;

namespace {

StateVec random_box_state(const ModelParams& params, SplitMix64& rng) {
    StateVec st;
    const int n = params.n;
    st.s.resize(n);
    st.i.resize(n);
    st.r.resize(n);
    st.d.resize(n);
    for (int k = 0; k < n; ++k) {
        double w[4];
        double total = 0.0;
        for (double& v : w) {
            v = rng.uniform() + 1e-9;
            total += v;
        }
        st.s[k] = params.populations[k] * w[0] / total;
        st.i[k] = params.populations[k] * w[1] / total;
        st.r[k] = params.populations[k] * w[2] / total;
        st.d[k] = params.populations[k] * w[3] / total;
    }
    return st;
}

// Plain per-equation evaluation of the model, written independently of the
// vectorized implementation and used as the oracle for sird_rhs.
Eigen::VectorXd sird_rhs_oracle(const StateVec& st, const Eigen::VectorXd& theta,
                                const ModelParams& p) {
    const int n = p.n;
    Eigen::VectorXd dx(4 * n);
    for (int k = 0; k < n; ++k) {
        double infection_sum = 0.0;
        for (int j = 0; j < n; ++j) {
            infection_sum += p.contact(k, j) * st.i[j] / p.populations[j];
        }
        const double new_infections = p.lambda * st.s[k] * infection_sum;
        dx[k] = -new_infections - p.immun_prob[k] * theta[k] * st.s[k];
        dx[n + k] = new_infections - (p.gamma_r[k] + p.gamma_d[k]) * st.i[k];
        dx[2 * n + k] = p.gamma_r[k] * st.i[k] + p.immun_prob[k] * theta[k] * st.s[k];
        dx[3 * n + k] = p.gamma_d[k] * st.i[k];
    }
    return dx;
}

}  // namespace

TEST_CASE("validate_params accepts the six-class scenario parameters") {
    CHECK(validate_params(six_class_params()).empty());
    CHECK(validate_params(six_class_params(), true).empty());
}

TEST_CASE("validate_params reports a contact entry above N_j with its indices") {
    ModelParams p = six_class_params();
    p.contact(0, 1) = p.populations[1] + 1.0;
    const auto issues = validate_params(p);
    REQUIRE(issues.size() == 1);
    CHECK(issues[0].field == "contact");
    CHECK(issues[0].row == 0);
    CHECK(issues[0].col == 1);
}

TEST_CASE("validate_params requires positive gamma_d only in observer mode") {
    ModelParams p = two_class_params();
    p.gamma_d[1] = 0.0;
    CHECK(validate_params(p).empty());
    const auto issues = validate_params(p, true);
    REQUIRE(issues.size() == 1);
    CHECK(issues[0].field == "gamma_d");
    CHECK(issues[0].row == 1);
    CHECK(issues[0].message.find("observer") != std::string::npos);
}

TEST_CASE("validate_params collects every violation") {
    ModelParams p = two_class_params();
    p.lambda = 1.5;
    p.gamma_r[0] = -0.1;
    p.contact(1, 1) = -2.0;
    CHECK(validate_params(p).size() == 3);
    CHECK_THROWS_AS(validate_params_or_throw(p), std::invalid_argument);
}

TEST_CASE("contact_normalized of the N-scaled identity is the identity") {
    ModelParams p = two_class_params();
    p.contact.setZero();
    p.contact(0, 0) = p.populations[0];
    p.contact(1, 1) = p.populations[1];
    CHECK((contact_normalized(p) - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() ==
          0.0);
}

TEST_CASE("contact_normalized hand value and range") {
    const ModelParams p1 = one_class_params();
    CHECK(contact_normalized(p1)(0, 0) == doctest::Approx(0.002).epsilon(1e-15));

    const ModelParams p6 = six_class_params();
    const Eigen::MatrixXd c = contact_normalized(p6);
    CHECK(c.minCoeff() >= 0.0);
    CHECK(c.maxCoeff() <= 1.0);
}

TEST_CASE("lift_f vanishes without infected individuals") {
    const ModelParams p = six_class_params();
    StateVec st = make_initial_state(p, Eigen::VectorXd::Zero(6), Eigen::VectorXd::Zero(6),
                                     Eigen::VectorXd::Zero(6));
    CHECK(lift_f(st, p).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lift_f is zero at the single-class infection equilibrium S = gamma/alpha") {
    const ModelParams p = one_class_params();
    StateVec st;
    st.s = Eigen::VectorXd::Constant(1, 301.0);  // N(gamma_r+gamma_d)/(lambda M)
    st.i = Eigen::VectorXd::Constant(1, 57.0);
    st.r = Eigen::VectorXd::Constant(1, 642.0);
    st.d = Eigen::VectorXd::Zero(1);
    CHECK(lift_f(st, p)[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("lift_f single-class hand evaluation") {
    // f1 = 0.5 * 800 * (2/1000) * 50 - 0.301 * 50 = 40 - 15.05 = 24.95
    const ModelParams p = one_class_params();
    StateVec st;
    st.s = Eigen::VectorXd::Constant(1, 800.0);
    st.i = Eigen::VectorXd::Constant(1, 50.0);
    st.r = Eigen::VectorXd::Constant(1, 150.0);
    st.d = Eigen::VectorXd::Zero(1);
    const Eigen::VectorXd f = lift_f(st, p);
    CHECK(f[0] == doctest::Approx(24.95).epsilon(1e-14));
    CHECK(f[1] == doctest::Approx(-40.0).epsilon(1e-14));
}

TEST_CASE("sird_rhs is zero for the disease-free state without control") {
    const ModelParams p = six_class_params();
    const StateVec st = make_initial_state(p, Eigen::VectorXd::Zero(6),
                                           Eigen::VectorXd::Zero(6), Eigen::VectorXd::Zero(6));
    CHECK(sird_rhs(st, Eigen::VectorXd::Zero(6), p).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sird_rhs conserves every class total exactly") {
    const ModelParams p = six_class_params();
    SplitMix64 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const StateVec st = random_box_state(p, rng);
        Eigen::VectorXd theta(6);
        for (int k = 0; k < 6; ++k) theta[k] = rng.uniform(0.0, 0.2);
        const Eigen::VectorXd dx = sird_rhs(st, theta, p);
        for (int k = 0; k < 6; ++k) {
            const double total = dx[k] + dx[6 + k] + dx[12 + k] + dx[18 + k];
            CHECK(std::abs(total) <= 1e-12 * p.populations[k]);
        }
    }
}

TEST_CASE("sird_rhs matches the independent per-equation oracle") {
    const ModelParams p = six_class_params();
    SplitMix64 rng(11);

    // The scenario's starting point, then random interior states.
    StateVec st = make_initial_state(p, paper_i0(), Eigen::VectorXd::Zero(6),
                                     Eigen::VectorXd::Zero(6));
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd theta(6);
        for (int k = 0; k < 6; ++k) theta[k] = rng.uniform(0.0, 0.1);
        const Eigen::VectorXd got = sird_rhs(st, theta, p);
        const Eigen::VectorXd want = sird_rhs_oracle(st, theta, p);
        CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-11 * want.cwiseAbs().maxCoeff());
        st = random_box_state(p, rng);
    }
}

TEST_CASE("sird_rhs rejects negative vaccination rates") {
    const ModelParams p = one_class_params();
    const StateVec st = make_initial_state(p, Eigen::VectorXd::Constant(1, 10.0),
                                           Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1));
    CHECK_THROWS_AS(sird_rhs(st, Eigen::VectorXd::Constant(1, -1e-3), p),
                    std::invalid_argument);
}

TEST_CASE("in_set_B tolerance band") {
    const ModelParams p = two_class_params();
    StateVec st = make_initial_state(p, Eigen::VectorXd::Constant(2, 5.0),
                                     Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2));
    CHECK(in_set_B(st, p, 0.0));
    st.s[0] = -1e-6;
    CHECK_FALSE(in_set_B(st, p, 1e-9));
    st.s[0] = -1e-12;
    CHECK(in_set_B(st, p, 1e-9));
}

TEST_CASE("in_set_D needs positive susceptibles and infection pressure") {
    const ModelParams p = two_class_params();
    StateVec st = make_initial_state(p, Eigen::VectorXd::Constant(2, 40.0),
                                     Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2));
    CHECK(in_set_D(st, p, 1e-9));
    st.i.setZero();
    CHECK_FALSE(in_set_D(st, p, 1e-9));
    st.i.setConstant(40.0);
    st.s[0] = 0.0;
    CHECK_FALSE(in_set_D(st, p, 1e-9));
}

TEST_CASE("boundary derivatives point inward (essential non-negativity)") {
    const ModelParams p = six_class_params();
    SplitMix64 rng(13);
    for (int trial = 0; trial < 500; ++trial) {
        StateVec st = random_box_state(p, rng);
        const int comp = rng.uniform_int(0, 3);
        const int k = rng.uniform_int(0, 5);
        (comp == 0 ? st.s : comp == 1 ? st.i : comp == 2 ? st.r : st.d)[k] = 0.0;
        Eigen::VectorXd theta(6);
        for (int j = 0; j < 6; ++j) theta[j] = rng.uniform(0.0, 0.3);
        const Eigen::VectorXd dx = sird_rhs(st, theta, p);
        CHECK(dx[comp * 6 + k] >= 0.0);
    }
}

TEST_CASE("sird_rhs without control restricts to lift_f on the (I, S) rows") {
    const ModelParams p = six_class_params();
    SplitMix64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const StateVec st = random_box_state(p, rng);
        const Eigen::VectorXd f = lift_f(st, p);
        const Eigen::VectorXd dx = sird_rhs(st, Eigen::VectorXd::Zero(6), p);
        for (int k = 0; k < 6; ++k) {
            CHECK(dx[6 + k] == doctest::Approx(f[k]).epsilon(1e-14));
            CHECK(dx[k] == doctest::Approx(f[6 + k]).epsilon(1e-14));
        }
    }
}

TEST_CASE("make_initial_state fills susceptibles to the exact class totals") {
    const ModelParams p = six_class_params();
    const StateVec st = make_initial_state(p, paper_i0(), Eigen::VectorXd::Zero(6),
                                           Eigen::VectorXd::Zero(6));
    for (int k = 0; k < 6; ++k) {
        CHECK(st.s[k] + st.i[k] + st.r[k] + st.d[k] == p.populations[k]);
    }
    CHECK_THROWS_AS(make_initial_state(p, p.populations * 2.0, Eigen::VectorXd::Zero(6),
                                       Eigen::VectorXd::Zero(6)),
                    std::invalid_argument);
}

TEST_CASE("flat layout round trip") {
    const ModelParams p = two_class_params();
    SplitMix64 rng(23);
    const StateVec st = random_box_state(p, rng);
    const StateVec back = StateVec::from_flat(st.to_flat(), 1.5);
    CHECK((back.s - st.s).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.i - st.i).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.r - st.r).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.d - st.d).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.time == 1.5);
}
