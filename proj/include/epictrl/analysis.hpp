#ifndef EPICTRL_ANALYSIS_HPP
#define EPICTRL_ANALYSIS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "epictrl/control.hpp"
#include "epictrl/integrator.hpp"
#include "epictrl/model.hpp"

namespace epictrl {

/// Per-class exponential-envelope verdict. For classes starting with no
/// infected individuals the envelope is scaled by |f_k(x0)| instead of
/// I_k(0), the provable form of the bound in that degenerate case.
struct DecayFit {
    double c = 0.0;
    double mu = 0.0;
    bool satisfied = false;
    bool generalized_scale = false;
};

struct RunSummary {
    double peak_total_infected = 0.0;     ///< max_t sum_k I_k / sum_k N_k
    Eigen::VectorXd peak_per_class;       ///< max_t I_k / N_k
    std::optional<double> eradication_time;
    Eigen::VectorXd final_dead;           ///< D_k at the last sample, counts
    int switch_count = 0;                 ///< switch events logged by the run
    std::vector<DecayFit> decay_fit;      ///< filled when gains are supplied
};

/// Post-hoc metrics of a finished run. Pass the gains of the linearizing
/// law to also evaluate the per-class decay envelopes.
RunSummary summarize(const Trajectory& traj, const ModelParams& params,
                     const LinGains* gains = nullptr);

/// Bound on the asymptotic deaths under the exact law:
/// gamma_d_k c_k I_k(0) / mu_k per class.
Eigen::VectorXd dstar_bound(const ModelParams& params, const LinGains& gains,
                            const Eigen::VectorXd& i0);

/**
 * @brief Certificate report for the open-loop dissipation structure.
 *
 * Checks along the trajectory: (a) V = sum_k (S_k+I_k+R_k) non-increasing,
 * (b) centered-difference dV/dt equals -sum_k gamma_d_k I_k to second order
 * in the step, (c) every S_k non-increasing, (d) every R_k non-decreasing.
 * Margins report the worst slack; a failed check names the sample index.
 */
struct LasalleReport {
    bool v_nonincreasing = false;
    bool dv_matches = false;
    bool s_monotone = false;
    bool r_monotone = false;
    double worst_v_increase = 0.0;   // most positive V step, >0 means violation
    double worst_dv_mismatch = 0.0;  // max |dV/dt + sum gamma_d I|
    double dv_tolerance = 0.0;
    int first_violation_step = -1;
    std::string violation;

    bool all_pass() const { return v_nonincreasing && dv_matches && s_monotone && r_monotone; }
};

LasalleReport lasalle_check(const Trajectory& traj, const ModelParams& params);

struct BoxDomain {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
};

/// Marks an axis-aligned region boundary at coordinate `dim` == `value`;
/// the estimator adds sample pairs straddling it.
struct BoundaryHint {
    int dim;
    double value;
};

/**
 * @brief Empirical Lipschitz constant of a scalar map on a box.
 *
 * Maximum over `samples` random pairs (mixing wide pairs, short-range pairs
 * and pairs straddling each hinted boundary) of |f(x)-f(y)| / ||x-y||_inf.
 * Deterministic for a fixed seed.
 */
double lipschitz_estimate(const std::function<double(const Eigen::VectorXd&)>& fn,
                          const BoxDomain& box, int samples, std::uint64_t seed,
                          const std::vector<BoundaryHint>& hints = {});

/// Vaccination schedule for the single-class peak-comparison experiment:
/// theta(t) = amplitude on [0, duration], zero afterwards.
struct InputProfile {
    std::string name;
    double amplitude = 0.0;
    double duration = 0.0;

    double theta(double t) const { return t <= duration ? amplitude : 0.0; }
    bool positive_initially() const { return amplitude > 0.0 && duration > 0.0; }
};

struct PeakComparisonRow {
    std::string name;
    double peak = 0.0;
    double peak_time = 0.0;
    double s_at_peak = 0.0;
    double integral_residual = 0.0;  ///< defect of the planar S-I identity
    bool strictly_lower = false;     ///< peak < zero-input peak
};

struct PeakComparison {
    double zero_input_peak = 0.0;
    double zero_input_peak_time = 0.0;
    double zero_input_s_at_peak = 0.0;
    double s_hat = 0.0;  ///< gamma/alpha = N(gamma_r+gamma_d)/(lambda M)
    double worst_conservation_drift = 0.0;  ///< across all runs of the table
    std::vector<PeakComparisonRow> rows;
};

/**
 * @brief Single-class experiment: any vaccination effort positive on an
 * initial interval strictly lowers the infection peak.
 *
 * Requires n = 1, I(0) >= 1 and S(0) > gamma/alpha; refused otherwise.
 * Also evaluates the planar integral identity along each controlled run.
 */
PeakComparison peak_comparison_n1(const ModelParams& params,
                                  const std::vector<InputProfile>& profiles, double i0,
                                  double s0, const StepSpec& step);

}  // namespace epictrl

#endif  // EPICTRL_ANALYSIS_HPP
