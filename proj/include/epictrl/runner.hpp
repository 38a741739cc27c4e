#ifndef EPICTRL_RUNNER_HPP
#define EPICTRL_RUNNER_HPP

#include <optional>
#include <string>
#include <vector>

#include "epictrl/analysis.hpp"
#include "epictrl/control.hpp"
#include "epictrl/observer.hpp"
#include "epictrl/scenario.hpp"

namespace epictrl {

/// Controller tuning resolved from a scenario: gains, saturation geometry
/// and (for observer runs) the high-gain configuration.
struct ControllerSetup {
    LinGains gains;
    SatConfig sat;
    ObserverConfig observer;
    LyapunovSolution lyapunov;
    double epsilon_star_value = 0.0;
};
ControllerSetup make_controller_setup(const Scenario& scenario);

struct RunResult {
    ControllerKind kind = ControllerKind::None;
    Trajectory traj;
    RunSummary summary;
    /// Linearizing runs: first time the state touches the boundary of D
    /// (the exact law's guarantees end there; the integration continues on
    /// the cancelled closed-loop field).
    std::optional<double> leave_d_time;
};

/**
 * @brief Simulates the scenario under one controller regime.
 *
 * `none` runs the open loop; `saturated` logs per-class switch events;
 * `linearizing` integrates the cancelled closed-loop field without box
 * clipping; `observer` co-simulates the plant and the high-gain observer
 * with substeps matched to the observer's time scale.
 */
RunResult run_controller(const Scenario& scenario, const ControllerSetup& setup,
                         ControllerKind kind);

/// Writes trajectory.csv, events.csv, summary.json and the figure files
/// into `dir`, creating it if needed.
void write_run_outputs(const std::string& dir, const Scenario& scenario,
                       const ControllerSetup& setup, const RunResult& result);

/// Full `run` operation: simulate scenario.controller, emit files, then
/// check the run certificates (box invariance, conservation, dissipation).
struct RunCertificates {
    bool in_box = false;
    bool conserved = false;
    bool lasalle = false;
    double worst_conservation = 0.0;

    bool all_pass() const { return in_box && conserved && lasalle; }
};
RunCertificates run_scenario(const Scenario& scenario, const std::string& out_dir,
                             RunResult* result_out = nullptr);

/// One verification item: a named pass/fail with a margin (how far from the
/// threshold the measured value landed; positive = slack).
struct VerifyItem {
    std::string name;
    bool pass = false;
    double margin = 0.0;
    std::string detail;
};

struct VerifyReport {
    std::vector<VerifyItem> items;
    bool all_pass() const {
        for (const auto& item : items) {
            if (!item.pass) return false;
        }
        return true;
    }
};

/// Suites: invariance, lasalle, linearization, lipschitz, observer, peak, all.
VerifyReport verify_scenario(const Scenario& scenario, const std::string& suite);

/// Summaries of every requested controller on one scenario, for ordering
/// comparisons.
struct CompareRow {
    ControllerKind kind;
    double peak_total = 0.0;
    std::optional<double> eradication_time;
    int switches = 0;
};
std::vector<CompareRow> compare_controllers(const Scenario& scenario,
                                            const std::vector<ControllerKind>& kinds);

}  // namespace epictrl

#endif  // EPICTRL_RUNNER_HPP
