#ifndef EPICTRL_SCENARIO_HPP
#define EPICTRL_SCENARIO_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "epictrl/model.hpp"

namespace epictrl {

enum class ControllerKind { None, Linearizing, Saturated, Observer };

std::string controller_name(ControllerKind kind);
ControllerKind controller_from_name(const std::string& name);

/**
 * @brief One simulation setup: model, initial conditions, controller
 * selection and tuning, run horizon and output location.
 *
 * Loaded from a keyed text file with [sections]; the grammar is documented
 * in docs/scenario_format.md. The contact matrix and the population vector
 * come from CSV files referenced by the scenario, resolved relative to the
 * scenario file's directory.
 */
struct Scenario {
    std::string name;
    ModelParams params;
    std::vector<std::string> class_labels;

    Eigen::VectorXd i0, r0, d0;

    ControllerKind controller = ControllerKind::None;
    double margin = 0.1;            ///< additive slack of the alpha1 inequality
    double theta_sup = 0.017;       ///< amplitude cap of the constrained law
    Eigen::VectorXd i_lo;           ///< lower I thresholds (default 20 per class)
    std::optional<Eigen::VectorXd> s_lo_override;  ///< else invariance equality case
    std::optional<Eigen::VectorXd> s_hi_override;
    std::optional<Eigen::VectorXd> i_hi_override;

    Eigen::MatrixXd beta;           ///< n x 3 observer coefficients
    std::optional<double> epsilon;  ///< empty = auto-select epsilon*
    Eigen::VectorXd i0_hat;         ///< observer's assumed initial infected

    double horizon = 400.0;
    double step = 0.01;
    std::string output_dir = "out";
};

/// Parses and validates a scenario file; errors carry file:line positions.
Scenario load_scenario(const std::string& path);

}  // namespace epictrl

#endif  // EPICTRL_SCENARIO_HPP
