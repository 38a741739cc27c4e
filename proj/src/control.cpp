#include "epictrl/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace epictrl {

namespace {

constexpr double kPi = std::numbers::pi;

// Shared intermediate quantities of the raw law for one class.
struct RawLawParts {
    double numerator;    // alpha1 I_k + alpha2 f_k + Lf2h_k (= -v_k + Lf2h_k)
    double denominator;  // p_k lambda S_k sum_j C_kj I_j (= -LgLfh_k)
};

RawLawParts raw_law_parts(const StateVec& state, const LinGains& gains,
                          const ModelParams& params, const Eigen::MatrixXd& c,
                          const Eigen::VectorXd& f, const Eigen::VectorXd& force, int k) {
    const double lf2h = params.lambda * state.s[k] * (c.row(k) * f.head(params.n))(0) -
                        params.removal_rate(k) * f[k] +
                        params.lambda * f[params.n + k] * force[k];
    const double num = gains.alpha1[k] * state.i[k] + gains.alpha2[k] * f[k] + lf2h;
    const double den = params.immun_prob[k] * params.lambda * state.s[k] * force[k];
    return {num, den};
}

}  // namespace

LieTerms lie_terms(const StateVec& state, const ModelParams& params) {
    const int n = params.n;
    const Eigen::MatrixXd c = contact_normalized(params);
    const Eigen::VectorXd force = c * state.i;
    const Eigen::VectorXd f = lift_f(state, params);
    LieTerms out;
    out.lf2h.resize(n);
    out.lglfh.resize(n);
    for (int k = 0; k < n; ++k) {
        out.lf2h[k] = params.lambda * state.s[k] * (c.row(k) * f.head(n))(0) -
                      params.removal_rate(k) * f[k] + params.lambda * f[n + k] * force[k];
        out.lglfh[k] = -params.immun_prob[k] * params.lambda * state.s[k] * force[k];
    }
    return out;
}

LinGains select_gains(const ModelParams& params, double margin) {
    if (!(margin > 0.0)) throw std::invalid_argument("gain margin must be positive");
    const int n = params.n;
    const double big_gamma = params.removal_rate_max();
    LinGains g;
    g.alpha1.resize(n);
    g.alpha2.resize(n);
    for (int k = 0; k < n; ++k) {
        const double row_sum = params.contact.row(k).sum();
        g.alpha1[k] = params.removal_rate(k) * (big_gamma + row_sum) + margin;
        g.alpha2[k] = params.removal_rate(k) + big_gamma + row_sum;
    }
    return g;
}

Eigen::VectorXd unconstrained_theta(const StateVec& state, const LinGains& gains,
                                    const ModelParams& params) {
    if (!in_set_D(state, params, default_region_floor(params))) {
        throw std::domain_error("singular decoupling matrix: state outside D");
    }
    const int n = params.n;
    const Eigen::MatrixXd c = contact_normalized(params);
    const Eigen::VectorXd force = c * state.i;
    const Eigen::VectorXd f = lift_f(state, params);
    Eigen::VectorXd theta(n);
    for (int k = 0; k < n; ++k) {
        const auto parts = raw_law_parts(state, gains, params, c, f, force, k);
        theta[k] = parts.numerator / parts.denominator;
    }
    return theta;
}

Eigen::VectorXd unconstrained_theta_or_inf(const StateVec& state, const LinGains& gains,
                                           const ModelParams& params) {
    const int n = params.n;
    if (in_set_D(state, params, default_region_floor(params))) {
        return unconstrained_theta(state, gains, params);
    }
    return Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
}

double q_blend(double s, double i, const SatConfig& cfg, int k) {
    const double s_lo = cfg.s_lo[k], s_hi = cfg.s_hi[k];
    const double i_lo = cfg.i_lo[k], i_hi = cfg.i_hi[k];
    if (s < s_lo || i < i_lo) {
        throw std::domain_error("q_blend arguments below the lower thresholds");
    }
    if (s >= s_hi && i >= i_hi) return 1.0;  // B1
    const double diagonal = (i_hi - i_lo) / (s_hi - s_lo) * (s - s_lo) + i_lo;
    if (i <= diagonal && i < i_hi) {         // B2, diagonal included
        return 4.0 / kPi * std::atan((i - i_lo) / (i_hi - i_lo));
    }
    return 4.0 / kPi * std::atan((s - s_lo) / (s_hi - s_lo));  // B3
}

double theta_bar(const StateVec& state, const LinGains& gains, const ModelParams& params,
                 const SatConfig& cfg, int k) {
    if (state.s[k] < cfg.s_lo[k] || state.i[k] < cfg.i_lo[k]) {
        throw std::domain_error("theta_bar evaluated outside its region");
    }
    const Eigen::MatrixXd c = contact_normalized(params);
    const Eigen::VectorXd force = c * state.i;
    const Eigen::VectorXd f = lift_f(state, params);
    const auto parts = raw_law_parts(state, gains, params, c, f, force, k);
    // Vanishing infection pressure for class k sends the raw law to +inf
    // (its numerator stays positive under select_gains), so the min with the
    // cap extends continuously by the cap value.
    const double floor = params.immun_prob[k] * params.lambda * cfg.s_lo[k] *
                         default_region_floor(params);
    if (parts.denominator < floor) return cfg.theta_sup;
    return std::min(parts.numerator / parts.denominator, cfg.theta_sup);
}

Eigen::VectorXd theta_sat(const StateVec& state, const LinGains& gains,
                          const ModelParams& params, const SatConfig& cfg) {
    const int n = params.n;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < n; ++k) {
        if (state.s[k] >= cfg.s_lo[k] && state.i[k] >= cfg.i_lo[k]) {
            theta[k] = q_blend(state.s[k], state.i[k], cfg, k) *
                       theta_bar(state, gains, params, cfg, k);
        }
    }
    return theta;
}

Eigen::VectorXd invariant_thresholds(const ModelParams& params, const Eigen::VectorXd& i_lo) {
    const int n = params.n;
    Eigen::VectorXd s_lo(n);
    for (int k = 0; k < n; ++k) {
        if (!(i_lo[k] > 0.0)) throw std::invalid_argument("i_lo must be positive");
        const double row_sum = params.contact.row(k).sum();
        if (row_sum <= 0.0) {
            throw std::invalid_argument("class " + std::to_string(k) +
                                        " has a zero contact row; the invariance "
                                        "threshold is undefined for isolated classes");
        }
        s_lo[k] = params.removal_rate(k) * i_lo[k] / (params.lambda * row_sum);
    }
    return s_lo;
}

SatConfig make_sat_config(const ModelParams& params, const Eigen::VectorXd& i_lo,
                          double theta_sup) {
    if (!(theta_sup > 0.0)) throw std::invalid_argument("theta_sup must be positive");
    SatConfig cfg;
    cfg.theta_sup = theta_sup;
    cfg.i_lo = i_lo;
    cfg.s_lo = invariant_thresholds(params, i_lo);
    cfg.s_hi.resize(params.n);
    cfg.i_hi.resize(params.n);
    for (int k = 0; k < params.n; ++k) {
        cfg.s_hi[k] = std::min(2.0 * cfg.s_lo[k], params.populations[k]);
        cfg.i_hi[k] = std::min(2.0 * cfg.i_lo[k], params.populations[k]);
        if (!(cfg.s_hi[k] > cfg.s_lo[k]) || !(cfg.i_hi[k] > cfg.i_lo[k])) {
            throw std::invalid_argument("saturation thresholds do not satisfy "
                                        "s_lo < s_hi and i_lo < i_hi for class " +
                                        std::to_string(k));
        }
    }
    return cfg;
}

SwitchReport count_switches(const Trajectory& traj, const SatConfig& cfg, int n) {
    SwitchReport report;
    report.per_class.resize(n);
    if (traj.states.empty()) return report;
    std::vector<bool> active(n);
    auto predicate = [&](const Eigen::VectorXd& x, int k) {
        return x[k] >= cfg.s_lo[k] && x[n + k] >= cfg.i_lo[k];
    };
    for (int k = 0; k < n; ++k) active[k] = predicate(traj.states.front(), k);
    for (std::size_t idx = 1; idx < traj.states.size(); ++idx) {
        for (int k = 0; k < n; ++k) {
            const bool value = predicate(traj.states[idx], k);
            if (value != active[k]) {
                report.per_class[k].push_back(traj.times[idx]);
                report.times.push_back(traj.times[idx]);
                ++report.total;
                active[k] = value;
            }
        }
    }
    std::sort(report.times.begin(), report.times.end());
    return report;
}

Eigen::Matrix2d companion_exp(double a1, double a2, double t) {
    Eigen::Matrix2d a;
    a << 0.0, 1.0, -a1, -a2;
    const Eigen::Matrix2d id = Eigen::Matrix2d::Identity();
    const double disc = a2 * a2 - 4.0 * a1;
    if (disc > 1e-12 * std::max(1.0, a2 * a2)) {
        const double root = std::sqrt(disc);
        const double s1 = 0.5 * (-a2 + root);
        const double s2 = 0.5 * (-a2 - root);
        return (std::exp(s1 * t) * (a - s2 * id) - std::exp(s2 * t) * (a - s1 * id)) /
               (s1 - s2);
    }
    if (disc < -1e-12 * std::max(1.0, a2 * a2)) {
        const double sigma = -0.5 * a2;
        const double omega = 0.5 * std::sqrt(-disc);
        return std::exp(sigma * t) *
               (std::cos(omega * t) * id + std::sin(omega * t) / omega * (a - sigma * id));
    }
    const double s = -0.5 * a2;  // (near-)double root
    return std::exp(s * t) * (id + t * (a - s * id));
}

DecayEnvelope decay_envelope(const LinGains& gains) {
    const int n = static_cast<int>(gains.alpha1.size());
    DecayEnvelope env;
    env.c.resize(n);
    env.mu.resize(n);
    constexpr int kGridPoints = 10000;
    for (int k = 0; k < n; ++k) {
        const double a1 = gains.alpha1[k];
        const double a2 = gains.alpha2[k];
        const double disc = a2 * a2 - 4.0 * a1;
        // Spectral abscissa: slowest real part among the two eigenvalues.
        const double mu = disc >= 0.0 ? 0.5 * (a2 - std::sqrt(disc)) : 0.5 * a2;
        const double horizon = 50.0 / mu;
        double c_max = 0.0;
        for (int g = 0; g <= kGridPoints; ++g) {
            const double t = horizon * g / kGridPoints;
            const Eigen::Matrix2d m = companion_exp(a1, a2, t);
            const double norm_inf = m.cwiseAbs().rowwise().sum().maxCoeff();
            c_max = std::max(c_max, norm_inf * std::exp(mu * t));
        }
        env.c[k] = c_max;
        env.mu[k] = mu;
    }
    return env;
}

Eigen::VectorXd linearized_closed_loop_rhs(const StateVec& state, const LinGains& gains,
                                           const ModelParams& params) {
    const int n = params.n;
    const Eigen::MatrixXd c = contact_normalized(params);
    const Eigen::VectorXd force = c * state.i;
    const Eigen::VectorXd f = lift_f(state, params);
    Eigen::VectorXd dx(4 * n);
    for (int k = 0; k < n; ++k) {
        const auto parts = raw_law_parts(state, gains, params, c, f, force, k);
        // p_k theta_k S_k with S_k cancelled against the decoupling term.
        const double flow = parts.numerator / (params.lambda * force[k]);
        const double infection = params.lambda * state.s[k] * force[k];
        dx[k] = -infection - flow;
        dx[n + k] = f[k];
        dx[2 * n + k] = params.gamma_r[k] * state.i[k] + flow;
        dx[3 * n + k] = params.gamma_d[k] * state.i[k];
    }
    return dx;
}

namespace {

// Conservative supremum of ||grad theta_k||_1 over the region where the
// amplitude cap is inactive, via monotone bounds on every term of the raw
// law over the box [s_lo_k, N_k] x prod_j [0, N_j] (I_k >= i_lo_k), with the
// other susceptible counts anywhere in [0, N_j].
double raw_law_lipschitz_bound(const ModelParams& params, const LinGains& gains,
                               const SatConfig& cfg, int k, double margin) {
    const int n = params.n;
    const double lambda = params.lambda;
    const Eigen::MatrixXd c = contact_normalized(params);
    const Eigen::VectorXd pops = params.populations;
    const double nk = pops[k];
    const double gk = params.removal_rate(k);
    const double a1 = gains.alpha1[k];
    const double a2 = gains.alpha2[k];

    const Eigen::VectorXd row_sums = params.contact.rowwise().sum();
    const double mbar_k = row_sums[k];

    // |f_j| <= max over the box of the infection and removal terms.
    Eigen::VectorXd f_abs(n);
    for (int j = 0; j < n; ++j) {
        f_abs[j] = std::max(params.removal_rate(j) * pops[j], lambda * pops[j] * row_sums[j]);
    }

    // d num / d S_k
    double ds = (a2 + gk) * lambda * mbar_k + lambda * (c.row(k) * f_abs)(0) +
                lambda * nk * c(k, k) * lambda * mbar_k + lambda * lambda * mbar_k * mbar_k;

    // sum_l |d num / d I_l|
    double di = 0.0;
    for (int l = 0; l < n; ++l) {
        double term = (a2 + gk) * lambda * nk * c(k, l);
        if (l == k) term += a1 + (a2 + gk) * gk;
        double inner = c(k, l) * params.removal_rate(l);  // j = l contribution of gamma_j
        for (int j = 0; j < n; ++j) inner += lambda * params.contact(k, j) * c(j, l);
        term += lambda * nk * inner;
        term += 2.0 * lambda * lambda * nk * mbar_k * c(k, l);
        di += term;
    }
    const double num_grad = ds + di;

    const double pk = params.immun_prob[k];
    const double den_grad = pk * lambda * (mbar_k + nk * c.row(k).sum());

    // On the active region theta <= theta_sup, the numerator keeps the
    // additive gain margin: num >= margin * I_k >= margin * i_lo_k, hence
    // den >= num / theta_sup there. The self-contact floor applies always.
    const double den_floor =
        std::max(margin * cfg.i_lo[k] / cfg.theta_sup,
                 pk * lambda * cfg.s_lo[k] * c(k, k) * cfg.i_lo[k]);
    if (!(den_floor > 0.0)) {
        throw std::invalid_argument("cannot bound the raw law: zero denominator floor");
    }
    return (num_grad + cfg.theta_sup * den_grad) / den_floor;
}

}  // namespace

AppendixConstants assemble_lipschitz_constants(const ModelParams& params,
                                               const LinGains& gains, const SatConfig& cfg,
                                               int k, double margin) {
    AppendixConstants out;
    const double band_i = cfg.i_hi[k] - cfg.i_lo[k];
    const double band_s = cfg.s_hi[k] - cfg.s_lo[k];
    out.c2 = 4.0 / (kPi * band_i);
    out.c3 = 4.0 / (kPi * band_s);
    out.c_q = std::max(out.c2, out.c3);
    out.k1 = raw_law_lipschitz_bound(params, gains, cfg, k, margin);
    out.l = std::max(out.k1, cfg.theta_sup * out.c_q);
    out.l1 = cfg.theta_sup / std::min(band_s, band_i);  // max-norm gap between A and B1
    out.l2 = cfg.theta_sup * out.c2;
    out.l3 = cfg.theta_sup * out.c3;
    out.l4 = cfg.theta_sup * out.c3;
    out.global = std::max({out.l, out.l1, out.l2, out.l3, out.l4});
    return out;
}

}  // namespace epictrl
