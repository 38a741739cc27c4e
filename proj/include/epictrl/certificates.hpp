#ifndef EPICTRL_CERTIFICATES_HPP
#define EPICTRL_CERTIFICATES_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "epictrl/analysis.hpp"
#include "epictrl/control.hpp"
#include "epictrl/observer.hpp"
#include "epictrl/runner.hpp"
#include "epictrl/scenario.hpp"

namespace epictrl {

/**
 * Numerical certificates backing the verification suites. Every certificate
 * reports its margin (distance from the failure threshold, positive = slack),
 * not only a verdict, and is deterministic for a fixed seed.
 */

struct CertResult {
    bool pass = false;
    double margin = 0.0;
    std::string detail;
};

/// Random states in B driven by random piecewise-constant non-negative
/// inputs stay in B (tolerance 1e-6 N_k per class) and conserve the
/// per-class totals to 1e-8 N_k.
struct InvarianceCert {
    CertResult invariance;
    CertResult conservation;
};
InvarianceCert cert_invariance(const ModelParams& params, int runs, double horizon,
                               double step, std::uint64_t seed);

/// At boundary states with a compartment at zero, that compartment's
/// derivative is non-negative.
CertResult cert_essential_nonnegativity(const ModelParams& params, int samples,
                                        std::uint64_t seed);

/// Trajectories entering the per-class box [0, s_lo_k] x [0, i_lo_k] never
/// leave it under any non-negative input (tolerance 1e-9 N_k).
CertResult cert_invariant_box(const ModelParams& params, const SatConfig& cfg,
                                    int starts, double horizon, double step,
                                    std::uint64_t seed);

/// Artifacts of one exact-linearizing run used by several criteria.
struct LinearizationCert {
    CertResult closed_loop_match;  ///< I_k vs the analytic 2nd-order solution
    CertResult envelope;           ///< exponential envelope with numeric (C_k, mu_k)
    std::optional<double> eradication_time;
    std::optional<double> leave_d_time;
    double peak_total = 0.0;
};
LinearizationCert cert_linearization(const Scenario& scenario, const ControllerSetup& setup);

/// min over random states in B cap D of the unconstrained law >= -1e-12.
CertResult cert_theta_nonnegativity(const ModelParams& params, const LinGains& gains,
                                    int samples, std::uint64_t seed);

/// Empirical Lipschitz constants of the blend, the capped law, their product
/// and the full constrained law, against the assembled closed-form bounds.
struct LipschitzCert {
    CertResult q_blend;
    CertResult theta_bar;
    CertResult product;
    CertResult theta_sat;
};
LipschitzCert cert_lipschitz(const ModelParams& params, const LinGains& gains,
                             const SatConfig& cfg, double margin, int pairs_per_class,
                             std::uint64_t seed);

/// Empirical Lipschitz constant of phi over wide pairs in Z (same input u
/// per pair) against the explicit per-class bound M.
CertResult cert_phi_lipschitz(const ModelParams& params, double theta_sup, int pairs,
                              std::uint64_t seed);

/// Saturated-law switching: finitely many transitions, none after
/// eradication, and (scenario-dependent) at least one off->on reactivation.
struct SwitchCert {
    CertResult finite_no_late;
    CertResult reactivation;
    int total_switches = 0;
};
SwitchCert cert_switches(const Trajectory& traj, const SatConfig& cfg, int n);

/// Observer run: z-estimation error at day 5, Lyapunov-function decrease
/// after the transient, and the peak orderings against the other regimes.
struct ObserverCert {
    CertResult error_at_5_days;
    CertResult lyapunov_decrease;
    CertResult peak_ordering;
    CertResult dissipation;    ///< LaSalle checks on the plant trajectory
    CertResult attractivity;   ///< z2, z3 -> 0 and z1 settling at the end
    double peak_total = 0.0;
    double epsilon_used = 0.0;
    double epsilon_star = 0.0;
    double worst_conservation_drift = 0.0;
};
ObserverCert cert_observer(const Scenario& scenario, const ControllerSetup& setup,
                           double peak_saturated, double peak_open);

/// Single-class peak-reduction experiment over a grid of admissible initial
/// conditions and input profiles; includes the planar integral identity and
/// the S(t_m) = gamma/alpha crossing check.
struct PeakReductionCert {
    CertResult peak_reduction;
    CertResult crossing_identity;
    CertResult integral_identity;
    double worst_conservation_drift = 0.0;
};
PeakReductionCert cert_peak_reduction(int grid, const StepSpec& step);

}  // namespace epictrl

#endif  // EPICTRL_CERTIFICATES_HPP
