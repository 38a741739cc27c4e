#ifndef EPICTRL_CONTROL_HPP
#define EPICTRL_CONTROL_HPP

#include <Eigen/Dense>
#include <vector>

#include "epictrl/integrator.hpp"
#include "epictrl/model.hpp"

namespace epictrl {

/// Per-class tuning of the linearizing feedback (alpha1_k, alpha2_k > 0).
struct LinGains {
    Eigen::VectorXd alpha1;
    Eigen::VectorXd alpha2;
};

/**
 * @brief Geometry of the constrained control law.
 *
 * Per class, the control is zero below the thresholds (s_lo, i_lo), ramps
 * up through arctan blends on the border bands up to (s_hi, i_hi), and is
 * capped at theta_sup everywhere.
 */
struct SatConfig {
    double theta_sup = 0.0;
    Eigen::VectorXd s_lo;  ///< lower S thresholds
    Eigen::VectorXd s_hi;  ///< upper S thresholds
    Eigen::VectorXd i_lo;  ///< lower I thresholds
    Eigen::VectorXd i_hi;  ///< upper I thresholds
};

struct LieTerms {
    Eigen::VectorXd lf2h;   ///< second drift derivative of the output per class
    Eigen::VectorXd lglfh;  ///< decoupling diagonal, -p_k lambda S_k sum_j C_kj I_j
};

/// Both Lie derivative vectors used by the linearizing feedback.
LieTerms lie_terms(const StateVec& state, const ModelParams& params);

/**
 * @brief Gain selection guaranteeing a non-negative input on B (intersected
 * with D).
 *
 * With Gamma = max_k(gamma_r_k + gamma_d_k):
 *   alpha2_k = gamma_r_k + gamma_d_k + Gamma + sum_j M_kj   (exactly)
 *   alpha1_k = (gamma_r_k + gamma_d_k)(Gamma + sum_j M_kj) + margin
 * The strict inequality on alpha1 is realized additively by `margin`.
 */
LinGains select_gains(const ModelParams& params, double margin);

/**
 * @brief The exact feedback-linearizing vaccination law.
 *
 * theta_k = (v_k - Lf2h_k) / LgLfh_k with v_k = -alpha2_k f_k - alpha1_k I_k.
 * @throws std::domain_error ("singular decoupling matrix") outside D.
 */
Eigen::VectorXd unconstrained_theta(const StateVec& state, const LinGains& gains,
                                    const ModelParams& params);

/**
 * @brief Arctan blending factor q_k in [0,1].
 *
 * Defined for s >= s_lo_k and i >= i_lo_k: one past both upper thresholds
 * (B1), an arctan ramp in I below the diagonal of the threshold box (B2,
 * diagonal included), an arctan ramp in S otherwise (B3).
 * @throws std::domain_error below the lower thresholds.
 */
double q_blend(double s, double i, const SatConfig& cfg, int k);

/**
 * @brief Amplitude-capped raw law, min(theta_k, theta_sup).
 *
 * Defined for (S_k, I_k) in [s_lo_k, N_k] x [i_lo_k, N_k]. When the
 * decoupling denominator for class k falls below the region floor the raw
 * law diverges to +infinity there, so the cap value is returned; this is
 * the continuous extension of the min.
 */
double theta_bar(const StateVec& state, const LinGains& gains, const ModelParams& params,
                 const SatConfig& cfg, int k);

/**
 * @brief The globally-defined constrained law: q_k * theta_bar_k inside the
 * per-class B area (S_k >= s_lo_k and I_k >= i_lo_k), zero in the A area.
 */
Eigen::VectorXd theta_sat(const StateVec& state, const LinGains& gains,
                          const ModelParams& params, const SatConfig& cfg);

/**
 * @brief Lower S thresholds making [0,s_lo_k] x [0,i_lo_k] forward invariant
 * for every non-negative input, taken at the equality case:
 *   s_lo_k = (gamma_r_k + gamma_d_k) i_lo_k / (lambda sum_j M_kj).
 * @throws std::invalid_argument on a zero contact row (isolated class).
 */
Eigen::VectorXd invariant_thresholds(const ModelParams& params, const Eigen::VectorXd& i_lo);

/// Full saturation geometry: invariance thresholds below, upper thresholds at
/// twice the lower ones (capped by N_k), and the given amplitude bound.
SatConfig make_sat_config(const ModelParams& params, const Eigen::VectorXd& i_lo,
                          double theta_sup);

struct SwitchReport {
    int total = 0;
    std::vector<double> times;                     // sorted, all classes merged
    std::vector<std::vector<double>> per_class;    // transition times per class
};

/// Transitions of the per-class predicate (S_k >= s_lo_k and I_k >= i_lo_k)
/// along a trajectory, scanned at the recorded samples.
SwitchReport count_switches(const Trajectory& traj, const SatConfig& cfg, int n);

/// exp(t * [[0,1],[-a1,-a2]]) in closed form.
Eigen::Matrix2d companion_exp(double a1, double a2, double t);

/**
 * @brief Numeric constants of the per-class exponential envelope.
 *
 * mu_k is the spectral abscissa magnitude of [[0,1],[-a1,-a2]] and
 * c_k = max over a dense grid on [0, 50/mu_k] of ||exp(A t)||_inf e^{mu t}.
 */
struct DecayEnvelope {
    Eigen::VectorXd c;
    Eigen::VectorXd mu;
};
DecayEnvelope decay_envelope(const LinGains& gains);

/**
 * @brief Closed-loop vector field of the plant under the exact linearizing
 * law, with the vaccination flow p_k theta_k S_k written in its cancelled
 * form (v - Lf2h is divided by the infection pressure, not by S_k).
 *
 * The S_k singularity of the raw law is removable in the closed loop; this
 * form stays integrable up to (and through) the boundary S_k = 0 that the
 * trajectory reaches in finite time.
 */
Eigen::VectorXd linearized_closed_loop_rhs(const StateVec& state, const LinGains& gains,
                                           const ModelParams& params);

/// Raw law values for trajectory recording: +infinity outside D.
Eigen::VectorXd unconstrained_theta_or_inf(const StateVec& state, const LinGains& gains,
                                           const ModelParams& params);

/**
 * @brief Deterministic closed-form upper bounds on the Lipschitz constants
 * of the constrained law, assembled per class.
 *
 * c2, c3 bound the blend q_k; k1 bounds the raw law on the region where the
 * cap is inactive (valid for gains built by select_gains with the given
 * margin); l = max(k1, theta_sup * max(c2,c3)) bounds q_k*theta_bar_k; l1..l4
 * cover the cross-region cases; `global` bounds theta_sat_k on its whole
 * domain.
 */
struct AppendixConstants {
    double c2 = 0, c3 = 0, c_q = 0;
    double k1 = 0;
    double l = 0, l1 = 0, l2 = 0, l3 = 0, l4 = 0;
    double global = 0;
};
AppendixConstants assemble_lipschitz_constants(const ModelParams& params,
                                               const LinGains& gains, const SatConfig& cfg,
                                               int k, double margin);

}  // namespace epictrl

#endif  // EPICTRL_CONTROL_HPP
