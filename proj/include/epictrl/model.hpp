#ifndef EPICTRL_MODEL_HPP
#define EPICTRL_MODEL_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace epictrl {

/**
 * @brief Parameters of the age-structured SIRD model.
 *
 * The population is split into n age classes. Disease transmission is
 * driven by the social contact matrix `contact` (average contacts per day
 * from an individual of class k with individuals of class j), scaled by
 * the transmission probability `lambda`. Recovery and death rates are
 * per-class, as is the probability `immun_prob` that the immunization of
 * a susceptible individual works.
 */
struct ModelParams {
    int n = 0;                    ///< number of age classes
    double lambda = 0.0;          ///< transmission probability, in (0,1]
    Eigen::MatrixXd contact;      ///< n x n contact matrix M, entries in [0, N_j]
    Eigen::VectorXd populations;  ///< N_k, individuals per class, > 0
    Eigen::VectorXd gamma_r;      ///< recovery rates, 1/day, in [0,1]
    Eigen::VectorXd gamma_d;      ///< death rates, 1/day, in [0,1]
    Eigen::VectorXd immun_prob;   ///< p_k, in (0,1]

    /// gamma_r[k] + gamma_d[k]
    double removal_rate(int k) const { return gamma_r[k] + gamma_d[k]; }

    /// max_k (gamma_r[k] + gamma_d[k])
    double removal_rate_max() const { return (gamma_r + gamma_d).maxCoeff(); }
};

/// One violated parameter invariant. `row`/`col` are -1 when not applicable.
struct ValidationIssue {
    std::string field;
    int row = -1;
    int col = -1;
    std::string message;
};

/**
 * @brief Checks every parameter invariant and reports all violations.
 *
 * @param observer_mode additionally require gamma_d > 0 componentwise
 *        (the z-coordinate inversion divides by gamma_d).
 * @return empty vector when the parameters are valid.
 */
std::vector<ValidationIssue> validate_params(const ModelParams& params,
                                             bool observer_mode = false);

/// Throws std::invalid_argument listing all violations, if any.
void validate_params_or_throw(const ModelParams& params, bool observer_mode = false);

/// C[k][j] = M[k][j] / N[j]; all entries land in [0,1] for valid params.
Eigen::MatrixXd contact_normalized(const ModelParams& params);

/**
 * @brief Plant state: absolute counts per compartment and age class.
 *
 * Valid states live in the box B: every compartment in [0, N_k]. The
 * per-class totals S_k + I_k + R_k + D_k are conserved by the dynamics.
 */
struct StateVec {
    Eigen::VectorXd s, i, r, d;
    double time = 0.0;

    int classes() const { return static_cast<int>(s.size()); }

    /// Flat layout [S; I; R; D], used by the integrator.
    Eigen::VectorXd to_flat() const;
    static StateVec from_flat(const Eigen::VectorXd& x, double time = 0.0);
};

/// State with S_k(0) = N_k - I_k - R_k - D_k, so totals equal N_k exactly.
StateVec make_initial_state(const ModelParams& params, const Eigen::VectorXd& i0,
                            const Eigen::VectorXd& r0, const Eigen::VectorXd& d0);

/**
 * @brief Drift terms of the (I, S) subsystem.
 *
 * Returns a 2n vector: components 0..n-1 hold
 *   f_k = lambda S_k sum_j C_kj I_j - (gamma_r_k + gamma_d_k) I_k
 * and components n..2n-1 hold
 *   f_{n+k} = -lambda S_k sum_j C_kj I_j.
 */
Eigen::VectorXd lift_f(const StateVec& state, const ModelParams& params);

/**
 * @brief Right-hand side of the 4n SIRD equations under vaccination rate theta.
 *
 * Per class, the four derivatives sum to zero (closed population).
 * @throws std::invalid_argument when any theta component is negative.
 */
Eigen::VectorXd sird_rhs(const StateVec& state, const Eigen::VectorXd& theta,
                         const ModelParams& params);

/// True iff every compartment lies in [-tol, N_k + tol].
bool in_set_B(const StateVec& state, const ModelParams& params, double tol);

/**
 * @brief Membership in the feedback-linearizability region D.
 *
 * True iff S_k >= floor and sum_j C_kj I_j >= floor for every class; the
 * strict positivity defining D is realized with a numerical margin.
 */
bool in_set_D(const StateVec& state, const ModelParams& params, double floor);

/// Default strictness margin for in_set_D: 1e-9 * min_k N_k.
double default_region_floor(const ModelParams& params);

}  // namespace epictrl

#endif  // EPICTRL_MODEL_HPP
