#ifndef EPICTRL_OBSERVER_HPP
#define EPICTRL_OBSERVER_HPP

#include <Eigen/Dense>
#include <utility>

#include "epictrl/control.hpp"
#include "epictrl/model.hpp"

namespace epictrl {

/**
 * @brief Transformed coordinates, ordered class-major: (z11, z21, z31, z12, ...).
 *
 * Per class, z1 counts deaths, z2 = gamma_d I its derivative and z3 = gamma_d f
 * its second derivative, turning the measured-output dynamics into a chain of
 * three integrators per class.
 */
struct ZState {
    Eigen::VectorXd z;

    int classes() const { return static_cast<int>(z.size()) / 3; }
    double& at(int k, int level) { return z[3 * k + level]; }
    double at(int k, int level) const { return z[3 * k + level]; }
};

/// C-tilde_kj = M_kj / (gamma_d_j N_j); the contact scaling of the z-coordinates.
Eigen::MatrixXd contact_tilde(const ModelParams& params);

/// Change of variable x -> z (per class: D_k, gamma_d_k I_k, gamma_d_k f_k).
ZState to_z(const StateVec& state, const ModelParams& params);

/**
 * @brief Inverse change of variable, tolerant to z slightly outside Z.
 *
 * The input is clamped into Z componentwise before inversion. S_k uses the
 * closed-form ratio when the per-class infection pressure clears a scale
 * floor and `s_fallback[k]` otherwise; the fallback branch carries no
 * downstream weight because the feedback is zero there.
 */
struct InverseZ {
    Eigen::VectorXd d;
    Eigen::VectorXd i;
    Eigen::VectorXd s;
    std::vector<bool> fallback;  ///< per class, true when s_fallback was used
};
InverseZ from_z(const ZState& z, const ModelParams& params,
                const Eigen::VectorXd& s_fallback);

/// Membership in the set Z with a relative tolerance on all four
/// inequality families.
bool in_set_Z(const ZState& z, const ModelParams& params, double rel_tol);

/// Componentwise projection onto Z (box bounds first, then the z3 band).
ZState clamp_to_z(const ZState& z, const ModelParams& params);

/**
 * @brief Nonlinear top-of-chain dynamics phi(z, u): the derivative of z3.
 *
 * Evaluates the closed-form h_k per class; when the per-class infection
 * pressure sum_j C-tilde_kj z2j falls below a scale floor the all-zero
 * branch applies, realizing the continuous extension of the vector field.
 */
Eigen::VectorXd phi(const ZState& z, const Eigen::VectorXd& u, const ModelParams& params);

/// Per-class bound K on the ratio term of phi (infinite when the contact
/// structure cannot support it).
Eigen::VectorXd phi_ratio_bound(const ModelParams& params);

/// Per-class Lipschitz bound M of phi on Z x U from the explicit formula.
Eigen::VectorXd phi_lipschitz_bound(const ModelParams& params, double theta_sup);

/**
 * @brief Output feedback evaluated on an observer state.
 *
 * Returns theta_sat of the inverted coordinates when z_hat lies in Z
 * (within 1e-9 relative tolerance), and zero otherwise, keeping the input
 * defined while the observer roams outside Z. Always lands in [0, theta_sup].
 */
Eigen::VectorXd output_u(const ZState& z_hat, const ModelParams& params,
                         const LinGains& gains, const SatConfig& cfg);

/**
 * @brief High-gain observer tuning: per-class beta and the time-scale epsilon.
 *
 * The per-class injection gains are (beta1/eps, beta2/eps^2, beta3/eps^3).
 */
struct ObserverConfig {
    Eigen::MatrixXd beta;  ///< n x 3, rows (beta1, beta2, beta3)
    double epsilon = 0.01;
};

/// Routh test: beta1 > 0, beta3 > 0 and beta1*beta2 > beta3 for every class.
bool beta_hurwitz(const Eigen::MatrixXd& beta);

/// Block-diagonal error-dynamics matrix A0 (3n x 3n).
Eigen::MatrixXd observer_a0(const ObserverConfig& obs);

/// Observer vector field: A z_hat + B phi(z_hat, u(z_hat)) + G (y - H z_hat).
Eigen::VectorXd observer_rhs(const ZState& z_hat, const Eigen::VectorXd& y,
                             const ModelParams& params, const ObserverConfig& obs,
                             const LinGains& gains, const SatConfig& cfg);

struct LyapunovSolution {
    Eigen::MatrixXd p;
    double residual = 0.0;
};

/**
 * @brief Solves P A0 + A0^T P = -I for the symmetric positive definite P.
 *
 * A0 is block diagonal, so the solve runs per 3x3 block as a dense linear
 * system in the 6 independent entries of each block.
 * @throws std::invalid_argument when some beta row is not Hurwitz.
 */
LyapunovSolution solve_lyapunov(const ObserverConfig& obs);

/**
 * @brief Largest admissible epsilon from the Lyapunov condition
 * eps*||D(eps)|| = 1/(2||P||) under the max norm.
 *
 * ||D(eps)|| = 1 for eps <= 1, so the value is min(1, 1/(2||P||_inf)).
 * `m_lip` (the Lipschitz constant of phi) must be positive; it does not
 * enter the selection rule, matching the envelope condition as stated.
 */
double epsilon_star(const LyapunovSolution& lyap, double m_lip);

/// Scaled estimation error eta with eta_i = (z_i - z_hat_i) / eps^(3-i) per class.
Eigen::VectorXd scaled_error(const ZState& z, const ZState& z_hat, double epsilon);

/// Coupled derivatives: plant under u(z_hat), observer fed y = D.
std::pair<Eigen::VectorXd, Eigen::VectorXd> closed_loop_rhs(
    const StateVec& x, const ZState& z_hat, const ModelParams& params,
    const ObserverConfig& obs, const LinGains& gains, const SatConfig& cfg);

}  // namespace epictrl

#endif  // EPICTRL_OBSERVER_HPP
