#ifndef EPICTRL_INTEGRATOR_HPP
#define EPICTRL_INTEGRATOR_HPP

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "epictrl/model.hpp"

namespace epictrl {

/// Fixed-step RK4 configuration. One step is `h` days.
struct StepSpec {
    double h = 0.01;
};

enum class EventKind { SwitchOn, SwitchOff, Eradication };

struct Event {
    double time = 0.0;
    EventKind kind = EventKind::Eradication;
    int cls = -1;  ///< age class for switch events, -1 otherwise
};

std::string event_kind_name(EventKind kind);

/**
 * @brief Time series produced by one simulation run.
 *
 * All sequences share the same length as `times`, which is strictly
 * increasing. `estimates` is empty unless an observer ran alongside the
 * plant. `controls` is empty for generic (non-plant) integrations.
 */
struct Trajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> states;
    std::vector<Eigen::VectorXd> controls;
    std::vector<Eigen::VectorXd> estimates;
    std::vector<Event> events;

    /// Time of the eradication event, if it fired.
    std::optional<double> eradication_time() const;
    std::size_t size() const { return times.size(); }
};

using VectorField = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;

/// Signals a NaN/Inf derivative, naming the offending time and component.
struct IntegrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/**
 * @brief Fixed-step RK4 integration of a generic vector field.
 *
 * Deterministic: identical inputs yield bit-identical output. The last
 * step is shortened so the final sample lands on t_end.
 * @throws IntegrationError on a non-finite derivative.
 */
Trajectory integrate(const VectorField& rhs, const Eigen::VectorXd& x0, double t0,
                     double t_end, const StepSpec& step);

/// True once fewer than one infected individual remains in total.
bool eradication_stop(const Eigen::VectorXd& flat_state, int n);

/// theta as a function of the current plant state.
using Controller = std::function<Eigen::VectorXd(double, const StateVec&)>;

struct SimOptions {
    StepSpec step;
    double t_end = 400.0;
    bool stop_on_eradication = true;
    /// Clip roundoff-scale excursions outside B back to the boundary; abort
    /// on anything larger. Disabled for the exact-linearizing run, whose
    /// guarantees end when the trajectory reaches the boundary of D.
    bool clip_to_box = true;
    double clip_tol_rel = 1e-9;
    /// When set, log SwitchOn/SwitchOff events of this per-class predicate,
    /// refining each crossing time by bisection to `event_time_tol` days.
    std::function<bool(int, const StateVec&)> region_predicate;
    double event_time_tol = 1e-6;
    /// Extra RK4 substeps per recorded sample (used for stiff observer runs).
    int substeps = 1;
};

/**
 * @brief Simulates the SIRD plant under a state-feedback controller.
 *
 * Controller output is clamped at zero from below; components more
 * negative than -1e-9 * max(1, |theta|) abort the run, since the control
 * laws of this project are non-negative by construction.
 */
Trajectory simulate_plant(const ModelParams& params, const StateVec& x0,
                          const Controller& controller, const SimOptions& opts);

/**
 * @brief Plant + observer co-simulation.
 *
 * The plant runs in original coordinates with input u(z_hat); the observer
 * integrates its own 3n-dimensional dynamics fed by the measured deaths
 * y = D. `input` maps the observer state to the plant input; `observer_rhs`
 * is the observer vector field (z_hat, y) -> dz_hat.
 */
Trajectory simulate_coupled(
    const ModelParams& params, const StateVec& x0, const Eigen::VectorXd& zhat0,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& input,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>&
        observer_rhs,
    const SimOptions& opts);

}  // namespace epictrl

#endif  // EPICTRL_INTEGRATOR_HPP
