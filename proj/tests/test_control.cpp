#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "epictrl/analysis.hpp"
#include "epictrl/control.hpp"
#include "epictrl/integrator.hpp"
#include "epictrl/rng.hpp"
#include "test_support.hpp"

using namespace epictrl;
using epictrl::testing::one_class_params;
using epictrl::testing::six_class_params;
using epictrl::testing::two_class_params;

namespace {

StateVec interior_state(const ModelParams& p, SplitMix64& rng) {
    StateVec st;
    const int n = p.n;
    st.s.resize(n);
    st.i.resize(n);
    st.r.resize(n);
    st.d.resize(n);
    for (int k = 0; k < n; ++k) {
        const double nk = p.populations[k];
        st.s[k] = rng.uniform(0.2, 0.8) * nk;
        st.i[k] = rng.uniform(0.05, 0.5) * (nk - st.s[k]);
        const double rest = nk - st.s[k] - st.i[k];
        st.d[k] = rng.uniform() * rest;
        st.r[k] = rest - st.d[k];
    }
    return st;
}

SatConfig fig2_config() {
    // The construction-example geometry: thresholds 3 < 5 and 2 < 6.
    SatConfig cfg;
    cfg.theta_sup = 0.017;
    cfg.s_lo = Eigen::VectorXd::Constant(1, 3.0);
    cfg.s_hi = Eigen::VectorXd::Constant(1, 5.0);
    cfg.i_lo = Eigen::VectorXd::Constant(1, 2.0);
    cfg.i_hi = Eigen::VectorXd::Constant(1, 6.0);
    return cfg;
}

// Truncated-series matrix exponential, the oracle for companion_exp.
Eigen::Matrix2d taylor_exp(const Eigen::Matrix2d& a, double t) {
    Eigen::Matrix2d sum = Eigen::Matrix2d::Identity();
    Eigen::Matrix2d term = Eigen::Matrix2d::Identity();
    for (int k = 1; k < 60; ++k) {
        term = (term * a * (t / k)).eval();
        sum += term;
    }
    return sum;
}

}  // namespace

TEST_CASE("lie_terms vanish without infected individuals") {
    const ModelParams p = two_class_params();
    const StateVec st = make_initial_state(p, Eigen::VectorXd::Zero(2),
                                           Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2));
    const LieTerms lt = lie_terms(st, p);
    CHECK(lt.lf2h.cwiseAbs().maxCoeff() == 0.0);
    CHECK(lt.lglfh.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("decoupling diagonal is non-positive on B") {
    const ModelParams p = six_class_params();
    SplitMix64 rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const StateVec st = interior_state(p, rng);
        CHECK(lie_terms(st, p).lglfh.maxCoeff() <= 0.0);
    }
}

TEST_CASE("lie_terms match the second derivative of infected counts") {
    const ModelParams p = two_class_params();
    SplitMix64 rng(37);
    const double h = 1e-3;
    for (int trial = 0; trial < 10; ++trial) {
        const StateVec st = interior_state(p, rng);
        const VectorField rhs = [&p](double t, const Eigen::VectorXd& x) {
            return sird_rhs(StateVec::from_flat(x, t), Eigen::VectorXd::Zero(2), p);
        };
        const Trajectory traj = integrate(rhs, st.to_flat(), 0.0, 2.0 * h, StepSpec{h});
        REQUIRE(traj.size() == 3);
        const StateVec mid = StateVec::from_flat(traj.states[1], h);
        const LieTerms lt = lie_terms(mid, p);
        for (int k = 0; k < 2; ++k) {
            const double second_diff =
                (traj.states[2][2 + k] - 2.0 * traj.states[1][2 + k] + traj.states[0][2 + k]) /
                (h * h);
            const double scale = std::max(std::abs(lt.lf2h[k]), 1.0);
            CHECK(std::abs(second_diff - lt.lf2h[k]) <= 1e-4 * scale);
        }
    }
}

TEST_CASE("select_gains single-class hand values") {
    // Gamma = 0.301, row sum = 2: alpha2 = 0.301 + 0.301 + 2 = 2.602 and
    // alpha1 = 0.301 * 2.301 + 0.1 = 0.792601.
    const LinGains g = select_gains(one_class_params(), 0.1);
    CHECK(g.alpha2[0] == doctest::Approx(2.602).epsilon(1e-15));
    CHECK(g.alpha1[0] == doctest::Approx(0.792601).epsilon(1e-15));
}

TEST_CASE("select_gains output is positive and margin-sensitive") {
    const ModelParams p = six_class_params();
    const LinGains g = select_gains(p, 0.1);
    CHECK(g.alpha1.minCoeff() > 0.0);
    CHECK(g.alpha2.minCoeff() > 0.0);
    const LinGains g2 = select_gains(p, 0.35);
    CHECK((g2.alpha1 - g.alpha1).minCoeff() == doctest::Approx(0.25).epsilon(1e-12));
    CHECK((g2.alpha2 - g.alpha2).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(select_gains(p, 0.0), std::invalid_argument);
}

TEST_CASE("unconstrained law refuses states outside D") {
    const ModelParams p = two_class_params();
    const LinGains g = select_gains(p, 0.1);
    const StateVec st = make_initial_state(p, Eigen::VectorXd::Zero(2),
                                           Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2));
    CHECK_THROWS_WITH_AS(unconstrained_theta(st, g, p),
                         doctest::Contains("singular decoupling"), std::domain_error);
}

TEST_CASE("unconstrained law is non-negative under the selected gains") {
    const ModelParams p = six_class_params();
    const LinGains g = select_gains(p, 0.1);
    SplitMix64 rng(41);
    const double floor = default_region_floor(p);
    int tested = 0;
    while (tested < 500) {
        const StateVec st = interior_state(p, rng);
        if (!in_set_D(st, p, floor)) continue;
        ++tested;
        CHECK(unconstrained_theta(st, g, p).minCoeff() >= -1e-12);
    }
}

TEST_CASE("gain conditions are needed: small gains yield a negative input somewhere") {
    const ModelParams p = one_class_params();
    LinGains bad;
    bad.alpha1 = Eigen::VectorXd::Constant(1, 0.01);
    bad.alpha2 = Eigen::VectorXd::Constant(1, 0.01);
    SplitMix64 rng(43);
    const double floor = default_region_floor(p);
    double most_negative = 0.0;
    for (int trial = 0; trial < 5000; ++trial) {
        const StateVec st = interior_state(p, rng);
        if (!in_set_D(st, p, floor)) continue;
        most_negative = std::min(most_negative, unconstrained_theta(st, bad, p).minCoeff());
    }
    CHECK(most_negative < 0.0);
}

TEST_CASE("closed loop under the exact law follows the linear normal form") {
    const ModelParams p = two_class_params();
    const LinGains g = select_gains(p, 0.1);
    Eigen::VectorXd i0(2);
    i0 << 40.0, 25.0;
    const StateVec x0 = make_initial_state(p, i0, Eigen::VectorXd::Zero(2),
                                           Eigen::VectorXd::Zero(2));
    const Eigen::VectorXd f0 = lift_f(x0, p);

    const VectorField rhs = [&](double t, const Eigen::VectorXd& x) {
        return linearized_closed_loop_rhs(StateVec::from_flat(x, t), g, p);
    };
    const Trajectory traj = integrate(rhs, x0.to_flat(), 0.0, 1.0, StepSpec{0.01});
    for (std::size_t idx = 0; idx < traj.size(); ++idx) {
        for (int k = 0; k < 2; ++k) {
            const Eigen::Vector2d z =
                companion_exp(g.alpha1[k], g.alpha2[k], traj.times[idx]) *
                Eigen::Vector2d(x0.i[k], f0[k]);
            CHECK(traj.states[idx][2 + k] == doctest::Approx(z[0]).epsilon(1e-6));
        }
    }
}

TEST_CASE("cancelled closed-loop field equals the raw law substitution inside D") {
    const ModelParams p = six_class_params();
    const LinGains g = select_gains(p, 0.1);
    SplitMix64 rng(47);
    const double floor = default_region_floor(p);
    int tested = 0;
    while (tested < 100) {
        const StateVec st = interior_state(p, rng);
        if (!in_set_D(st, p, floor)) continue;
        ++tested;
        const Eigen::VectorXd via_theta = sird_rhs(st, unconstrained_theta(st, g, p), p);
        const Eigen::VectorXd cancelled = linearized_closed_loop_rhs(st, g, p);
        const double scale = via_theta.cwiseAbs().maxCoeff();
        CHECK((via_theta - cancelled).cwiseAbs().maxCoeff() <= 1e-9 * scale);
    }
}

TEST_CASE("blend factor edge values") {
    const SatConfig cfg = fig2_config();
    CHECK(q_blend(4.0, 2.0, cfg, 0) == 0.0);                       // lower I edge
    CHECK(q_blend(3.0, 4.0, cfg, 0) == 0.0);                       // lower S edge
    CHECK(q_blend(5.0, 6.0, cfg, 0) == 1.0);                       // corner
    CHECK(q_blend(9.0, 7.0, cfg, 0) == 1.0);                       // deep B1
    // Both arctan branches also reach one at the corner.
    CHECK(4.0 / std::numbers::pi * std::atan(1.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("blend factor on the diagonal takes the I-branch") {
    const SatConfig cfg = fig2_config();
    // (4, 4) lies exactly on the diagonal of the threshold box.
    const double expected = 4.0 / std::numbers::pi * std::atan(0.5);
    CHECK(q_blend(4.0, 4.0, cfg, 0) == doctest::Approx(expected).epsilon(1e-15));
    CHECK_THROWS_AS(q_blend(2.9, 4.0, cfg, 0), std::domain_error);
    CHECK_THROWS_AS(q_blend(4.0, 1.9, cfg, 0), std::domain_error);
}

TEST_CASE("blend factor stays in [0,1] and is continuous across region edges") {
    const SatConfig cfg = fig2_config();
    SplitMix64 rng(53);
    for (int trial = 0; trial < 2000; ++trial) {
        const double s = rng.uniform(3.0, 10.0);
        const double i = rng.uniform(2.0, 10.0);
        const double q = q_blend(s, i, cfg, 0);
        CHECK(q >= 0.0);
        CHECK(q <= 1.0);
        // Perturb across whichever edge is nearest; values must stay close.
        const double q2 = q_blend(std::min(s + 1e-9, 10.0), std::min(i + 1e-9, 10.0), cfg, 0);
        CHECK(std::abs(q2 - q) < 1e-6);
    }
}

TEST_CASE("capped law honors the amplitude bound and the pass-through branch") {
    const ModelParams p = six_class_params();
    const LinGains g = select_gains(p, 0.1);
    SatConfig cfg = make_sat_config(p, Eigen::VectorXd::Constant(6, 20.0), 0.017);
    SplitMix64 rng(59);

    int capped = 0;
    for (int trial = 0; trial < 500; ++trial) {
        StateVec st = interior_state(p, rng);
        const int k = trial % 6;
        st.s[k] = std::max(st.s[k], cfg.s_lo[k]);
        st.i[k] = std::max(st.i[k], cfg.i_lo[k]);
        const double bar = theta_bar(st, g, p, cfg, k);
        CHECK(bar <= cfg.theta_sup);
        if (bar == cfg.theta_sup) ++capped;
        // Same state under a cap too large to bind returns the raw value.
        SatConfig loose = cfg;
        loose.theta_sup = 1e9;
        if (in_set_D(st, p, default_region_floor(p))) {
            const double raw = unconstrained_theta(st, g, p)[k];
            CHECK(theta_bar(st, g, p, loose, k) == doctest::Approx(raw).epsilon(1e-12));
        }
    }
    CHECK(capped > 0);
    // Outside its region the capped law is a domain error.
    StateVec st = interior_state(p, rng);
    st.s[0] = 0.5 * cfg.s_lo[0];
    CHECK_THROWS_AS(theta_bar(st, g, p, cfg, 0), std::domain_error);
}

TEST_CASE("constrained law: zero in the A area, bounded everywhere") {
    const ModelParams p = six_class_params();
    const LinGains g = select_gains(p, 0.1);
    const SatConfig cfg = make_sat_config(p, Eigen::VectorXd::Constant(6, 20.0), 0.017);
    SplitMix64 rng(61);
    for (int trial = 0; trial < 500; ++trial) {
        StateVec st = interior_state(p, rng);
        const int k = trial % 6;
        st.i[k] = rng.uniform(0.0, 0.99) * cfg.i_lo[k];
        const Eigen::VectorXd theta = theta_sat(st, g, p, cfg);
        CHECK(theta[k] == 0.0);
        CHECK(theta.minCoeff() >= 0.0);
        CHECK(theta.maxCoeff() <= cfg.theta_sup);
    }
}

TEST_CASE("constrained law is continuous across the region boundaries") {
    const ModelParams p = six_class_params();
    const LinGains g = select_gains(p, 0.1);
    const SatConfig cfg = make_sat_config(p, Eigen::VectorXd::Constant(6, 20.0), 0.017);
    SplitMix64 rng(67);
    const double tol = 1e-6 * cfg.theta_sup;
    for (int trial = 0; trial < 300; ++trial) {
        StateVec st = interior_state(p, rng);
        const int k = trial % 6;
        // Place the state exactly on one of the four per-class boundaries.
        switch (trial % 4) {
            case 0: st.s[k] = cfg.s_lo[k]; st.i[k] = std::max(st.i[k], cfg.i_lo[k]); break;
            case 1: st.i[k] = cfg.i_lo[k]; st.s[k] = std::max(st.s[k], cfg.s_lo[k]); break;
            case 2: st.s[k] = cfg.s_hi[k]; st.i[k] = std::max(st.i[k], cfg.i_lo[k]); break;
            default: st.i[k] = cfg.i_hi[k]; st.s[k] = std::max(st.s[k], cfg.s_lo[k]); break;
        }
        const double at = theta_sat(st, g, p, cfg)[k];
        StateVec lo = st, hi = st;
        const double ds = 5e-8;  // small enough that L * ds stays below the tolerance
        if (trial % 2 == 0) {
            lo.s[k] = st.s[k] - ds;
            hi.s[k] = st.s[k] + ds;
        } else {
            lo.i[k] = std::max(0.0, st.i[k] - ds);
            hi.i[k] = st.i[k] + ds;
        }
        CHECK(std::abs(theta_sat(lo, g, p, cfg)[k] - at) < tol);
        CHECK(std::abs(theta_sat(hi, g, p, cfg)[k] - at) < tol);
    }
}

TEST_CASE("invariance thresholds: hand value, scaling, isolated class") {
    const ModelParams p = one_class_params();
    const Eigen::VectorXd i_lo = Eigen::VectorXd::Constant(1, 20.0);
    // 0.301 * 20 / (0.5 * 2) = 6.02
    CHECK(invariant_thresholds(p, i_lo)[0] == doctest::Approx(6.02).epsilon(1e-15));

    ModelParams doubled = p;
    doubled.lambda = 1.0;
    CHECK(invariant_thresholds(doubled, i_lo)[0] ==
          doctest::Approx(3.01).epsilon(1e-15));

    ModelParams isolated = two_class_params();
    isolated.contact.row(1).setZero();
    CHECK_THROWS_AS(invariant_thresholds(isolated, Eigen::VectorXd::Constant(2, 20.0)),
                    std::invalid_argument);
}

TEST_CASE("switch counting on a synthetic trajectory") {
    SatConfig cfg;
    cfg.theta_sup = 0.017;
    cfg.s_lo = Eigen::VectorXd::Constant(1, 10.0);
    cfg.s_hi = Eigen::VectorXd::Constant(1, 20.0);
    cfg.i_lo = Eigen::VectorXd::Constant(1, 5.0);
    cfg.i_hi = Eigen::VectorXd::Constant(1, 10.0);

    Trajectory traj;
    const double i_values[] = {6.0, 4.0, 3.0, 7.0, 8.0, 2.0};  // on,off,off,on,on,off
    for (int idx = 0; idx < 6; ++idx) {
        traj.times.push_back(idx);
        Eigen::VectorXd x(4);
        x << 50.0, i_values[idx], 0.0, 0.0;
        traj.states.push_back(x);
    }
    const SwitchReport report = count_switches(traj, cfg, 1);
    CHECK(report.total == 3);
    REQUIRE(report.times.size() == 3);
    CHECK(report.times[0] == 1.0);
    CHECK(report.times[1] == 3.0);
    CHECK(report.times[2] == 5.0);

    // A trajectory that never enters the B area has no switches.
    Trajectory quiet;
    for (int idx = 0; idx < 4; ++idx) {
        quiet.times.push_back(idx);
        Eigen::VectorXd x(4);
        x << 50.0, 1.0, 0.0, 0.0;
        quiet.states.push_back(x);
    }
    CHECK(count_switches(quiet, cfg, 1).total == 0);
}

TEST_CASE("companion_exp agrees with a series expansion in all three root regimes") {
    const double cases[][2] = {{6.0, 5.0},    // roots -2, -3
                               {5.0, 2.0},    // complex pair
                               {4.0, 4.0}};   // double root -2
    for (const auto& c : cases) {
        Eigen::Matrix2d a;
        a << 0.0, 1.0, -c[0], -c[1];
        for (double t : {0.0, 0.3, 1.7}) {
            const Eigen::Matrix2d got = companion_exp(c[0], c[1], t);
            const Eigen::Matrix2d want = taylor_exp(a, t);
            CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
}

TEST_CASE("decay envelope bounds the matrix exponential by construction") {
    LinGains g;
    g.alpha1 = Eigen::VectorXd::Constant(1, 6.0);
    g.alpha2 = Eigen::VectorXd::Constant(1, 5.0);
    const DecayEnvelope env = decay_envelope(g);
    CHECK(env.mu[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(env.c[0] >= 1.0);
    SplitMix64 rng(71);
    for (int trial = 0; trial < 100; ++trial) {
        const double t = rng.uniform(0.0, 20.0);
        const Eigen::Matrix2d m = companion_exp(6.0, 5.0, t);
        const double norm = m.cwiseAbs().rowwise().sum().maxCoeff();
        CHECK(norm <= env.c[0] * std::exp(-env.mu[0] * t) * (1.0 + 1e-9));
    }
}

TEST_CASE("assembled Lipschitz constants: closed forms and positivity") {
    const ModelParams p = six_class_params();
    const LinGains g = select_gains(p, 0.1);
    const SatConfig cfg = make_sat_config(p, Eigen::VectorXd::Constant(6, 20.0), 0.017);
    for (int k = 0; k < 6; ++k) {
        const AppendixConstants ac = assemble_lipschitz_constants(p, g, cfg, k, 0.1);
        const double band_i = cfg.i_hi[k] - cfg.i_lo[k];
        const double band_s = cfg.s_hi[k] - cfg.s_lo[k];
        CHECK(ac.c2 == doctest::Approx(4.0 / (std::numbers::pi * band_i)).epsilon(1e-15));
        CHECK(ac.c3 == doctest::Approx(4.0 / (std::numbers::pi * band_s)).epsilon(1e-15));
        CHECK(ac.l2 == doctest::Approx(cfg.theta_sup * ac.c2).epsilon(1e-15));
        CHECK(ac.l1 == doctest::Approx(cfg.theta_sup / std::min(band_s, band_i)).epsilon(1e-15));
        CHECK(ac.k1 > 0.0);
        CHECK(std::isfinite(ac.k1));
        CHECK(ac.global >= ac.l);
        CHECK(ac.global >= ac.l1);
    }
}

TEST_CASE("sub-threshold box is forward invariant under random inputs") {
    const ModelParams p = six_class_params();
    const SatConfig cfg = make_sat_config(p, Eigen::VectorXd::Constant(6, 20.0), 0.017);
    SplitMix64 rng(73);

    SimOptions opts;
    opts.t_end = 15.0;
    opts.stop_on_eradication = false;
    opts.clip_to_box = false;

    for (int trial = 0; trial < 12; ++trial) {
        const int k = trial % 6;
        StateVec st = interior_state(p, rng);
        st.s[k] = cfg.s_lo[k];
        st.i[k] = rng.uniform(0.0, cfg.i_lo[k]);
        const double rest = p.populations[k] - st.s[k] - st.i[k];
        st.d[k] = 0.25 * rest;
        st.r[k] = rest - st.d[k];
        const Controller ctrl = [&rng](double, const StateVec&) {
            return Eigen::VectorXd::Constant(6, 0.05).eval();
        };
        const Trajectory traj = simulate_plant(p, st, ctrl, opts);
        for (const auto& x : traj.states) {
            CHECK(x[k] <= cfg.s_lo[k] + 1e-9 * p.populations[k]);
            CHECK(x[6 + k] <= cfg.i_lo[k] + 1e-9 * p.populations[k]);
        }
    }
}
