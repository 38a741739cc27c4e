#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "epictrl/analysis.hpp"
#include "epictrl/rng.hpp"
#include "test_support.hpp"

using namespace epictrl;
using epictrl::testing::one_class_params;
using epictrl::testing::six_class_params;
using epictrl::testing::paper_i0;

namespace {

Trajectory open_loop_run(const ModelParams& p, double t_end) {
    const StateVec x0 = make_initial_state(p, paper_i0(), Eigen::VectorXd::Zero(6),
                                           Eigen::VectorXd::Zero(6));
    const Controller zero = [&p](double, const StateVec&) {
        return Eigen::VectorXd::Zero(p.n).eval();
    };
    SimOptions opts;
    opts.t_end = t_end;
    return simulate_plant(p, x0, zero, opts);
}

}  // namespace

TEST_CASE("summarize: disease-free constant trajectory") {
    const ModelParams p = six_class_params();
    Trajectory traj;
    const Eigen::VectorXd x = make_initial_state(p, Eigen::VectorXd::Zero(6),
                                                 Eigen::VectorXd::Zero(6),
                                                 Eigen::VectorXd::Zero(6))
                                  .to_flat();
    for (int idx = 0; idx < 5; ++idx) {
        traj.times.push_back(0.1 * idx);
        traj.states.push_back(x);
    }
    traj.events.push_back({0.0, EventKind::Eradication, -1});
    const RunSummary s = summarize(traj, p);
    CHECK(s.peak_total_infected == 0.0);
    CHECK(s.peak_per_class.maxCoeff() == 0.0);
    REQUIRE(s.eradication_time.has_value());
    CHECK(*s.eradication_time == 0.0);
    CHECK(s.switch_count == 0);
}

TEST_CASE("summarize: single-hump synthetic trajectory peaks at the grid maximum") {
    const ModelParams p = one_class_params();
    Trajectory traj;
    double best = 0.0;
    for (int idx = 0; idx <= 100; ++idx) {
        const double t = idx * std::numbers::pi / 100.0;
        Eigen::VectorXd x(4);
        const double infected = 100.0 * std::sin(t);
        x << 800.0 - infected, infected, 200.0, 0.0;
        traj.times.push_back(t);
        traj.states.push_back(x);
        best = std::max(best, infected);
    }
    const RunSummary s = summarize(traj, p);
    CHECK(s.peak_per_class[0] == doctest::Approx(best / 1000.0).epsilon(1e-12));
    CHECK_FALSE(s.eradication_time.has_value());
}

TEST_CASE("summarize: total peak dominates the population-weighted class peaks") {
    const ModelParams p = six_class_params();
    const Trajectory traj = open_loop_run(p, 120.0);
    const RunSummary s = summarize(traj, p);
    const double total_pop = p.populations.sum();
    for (int k = 0; k < 6; ++k) {
        CHECK(s.peak_total_infected >=
              s.peak_per_class[k] * p.populations[k] / total_pop - 1e-15);
    }
}

TEST_CASE("dstar_bound: zero start, linear scaling, and a simulated comparison") {
    const ModelParams p = one_class_params();
    const LinGains g = select_gains(p, 0.1);
    CHECK(dstar_bound(p, g, Eigen::VectorXd::Zero(1))[0] == 0.0);
    const double b1 = dstar_bound(p, g, Eigen::VectorXd::Constant(1, 10.0))[0];
    const double b3 = dstar_bound(p, g, Eigen::VectorXd::Constant(1, 30.0))[0];
    CHECK(b3 == doctest::Approx(3.0 * b1).epsilon(1e-12));

    // Exact-law run from a strictly infected start: final deaths below the bound.
    Eigen::VectorXd i0 = Eigen::VectorXd::Constant(1, 40.0);
    const StateVec x0 = make_initial_state(p, i0, Eigen::VectorXd::Zero(1),
                                           Eigen::VectorXd::Zero(1));
    const VectorField rhs = [&](double t, const Eigen::VectorXd& x) {
        return linearized_closed_loop_rhs(StateVec::from_flat(x, t), g, p);
    };
    const Trajectory traj = integrate(rhs, x0.to_flat(), 0.0, 40.0, StepSpec{0.01});
    const double final_dead = traj.states.back()[3];
    CHECK(final_dead <= dstar_bound(p, g, i0)[0]);
}

TEST_CASE("lasalle_check passes on an open-loop run") {
    const ModelParams p = six_class_params();
    const Trajectory traj = open_loop_run(p, 60.0);
    const LasalleReport rep = lasalle_check(traj, p);
    CHECK(rep.v_nonincreasing);
    CHECK(rep.dv_matches);
    CHECK(rep.s_monotone);
    CHECK(rep.r_monotone);
    CHECK(rep.worst_dv_mismatch < rep.dv_tolerance);
}

TEST_CASE("lasalle_check catches an injected decrease of R and names the step") {
    const ModelParams p = six_class_params();
    Trajectory traj = open_loop_run(p, 20.0);
    traj.states[500][2 * 6 + 3] -= 5.0;  // corrupt R of class 4 at one sample
    const LasalleReport rep = lasalle_check(traj, p);
    CHECK_FALSE(rep.r_monotone);
    CHECK(rep.first_violation_step == 500);
    CHECK(rep.violation.find("R decreased") != std::string::npos);
}

TEST_CASE("lipschitz_estimate: constant and linear maps") {
    BoxDomain box;
    box.lo = Eigen::Vector2d(-1.0, -1.0);
    box.hi = Eigen::Vector2d(1.0, 1.0);
    const auto constant = [](const Eigen::VectorXd&) { return 3.5; };
    CHECK(lipschitz_estimate(constant, box, 2000, 1) == 0.0);

    // f(x) = 2 x0 - 0.5 x1 has max-norm Lipschitz constant 2.5.
    const auto linear = [](const Eigen::VectorXd& x) { return 2.0 * x[0] - 0.5 * x[1]; };
    const double est = lipschitz_estimate(linear, box, 20000, 2);
    CHECK(est <= 2.5 + 1e-12);
    CHECK(est >= 0.9 * 2.5);
}

TEST_CASE("peak comparison refuses inadmissible starts, citing the condition") {
    const ModelParams p = one_class_params();
    const std::vector<InputProfile> profiles{{"pulse", 0.01, 5.0}};
    CHECK_THROWS_WITH_AS(peak_comparison_n1(p, profiles, 0.5, 600.0, StepSpec{0.01}),
                         doctest::Contains("I(0) >= 1"), std::invalid_argument);
    // gamma/alpha = 301 for these parameters.
    CHECK_THROWS_WITH_AS(peak_comparison_n1(p, profiles, 5.0, 200.0, StepSpec{0.01}),
                         doctest::Contains("301"), std::invalid_argument);
    CHECK_THROWS_AS(peak_comparison_n1(six_class_params(), profiles, 5.0, 600.0,
                                       StepSpec{0.01}),
                    std::invalid_argument);
}

TEST_CASE("an early vaccination pulse strictly lowers the peak") {
    const ModelParams p = one_class_params();
    const std::vector<InputProfile> profiles{{"pulse", 0.01, 5.0}, {"zero", 0.0, 0.0}};
    const PeakComparison table = peak_comparison_n1(p, profiles, 5.0, 600.0, StepSpec{0.01});
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[0].strictly_lower);
    CHECK(table.rows[0].peak < table.zero_input_peak);
    // The degenerate zero profile reproduces the baseline.
    CHECK(table.rows[1].peak == doctest::Approx(table.zero_input_peak).epsilon(1e-12));

    // Peaks happen where S crosses gamma/alpha.
    CHECK(std::abs(table.zero_input_s_at_peak - table.s_hat) < 1.0);
    CHECK(std::abs(table.rows[0].s_at_peak - table.s_hat) < 1.0);

    // Planar identity residuals stay inside the certificate budget.
    CHECK(table.rows[0].integral_residual <= 1e-3 * table.rows[0].peak);
    CHECK(table.rows[1].integral_residual <= 1e-3 * table.rows[1].peak);
}
