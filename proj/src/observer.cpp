#include "epictrl/observer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace epictrl {

namespace {

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

// Scale floor for the per-class infection pressure sum_j C-tilde_kj z2j.
double pressure_floor(const Eigen::MatrixXd& ct, const ModelParams& params, int k) {
    double scale = 0.0;
    for (int j = 0; j < params.n; ++j) {
        scale += ct(k, j) * params.gamma_d[j] * params.populations[j];
    }
    return 1e-12 * scale;
}

}  // namespace

Eigen::MatrixXd contact_tilde(const ModelParams& params) {
    Eigen::MatrixXd ct = contact_normalized(params);
    for (int j = 0; j < params.n; ++j) ct.col(j) /= params.gamma_d[j];
    return ct;
}

ZState to_z(const StateVec& state, const ModelParams& params) {
    const int n = params.n;
    const Eigen::VectorXd f = lift_f(state, params);
    ZState out;
    out.z.resize(3 * n);
    for (int k = 0; k < n; ++k) {
        out.at(k, 0) = state.d[k];
        out.at(k, 1) = params.gamma_d[k] * state.i[k];
        out.at(k, 2) = params.gamma_d[k] * f[k];
    }
    return out;
}

ZState clamp_to_z(const ZState& z, const ModelParams& params) {
    const int n = params.n;
    const Eigen::MatrixXd ct = contact_tilde(params);
    ZState out;
    out.z.resize(3 * n);
    Eigen::VectorXd z2(n);
    for (int k = 0; k < n; ++k) {
        out.at(k, 0) = clamp(z.at(k, 0), 0.0, params.populations[k]);
        z2[k] = clamp(z.at(k, 1), 0.0, params.gamma_d[k] * params.populations[k]);
        out.at(k, 1) = z2[k];
    }
    for (int k = 0; k < n; ++k) {
        const double pressure = ct.row(k) * z2;
        const double gk = params.removal_rate(k);
        const double lo = -gk * z2[k];
        const double hi = params.populations[k] * params.gamma_d[k] * params.lambda * pressure -
                          gk * z2[k];
        out.at(k, 2) = clamp(z.at(k, 2), lo, hi);
    }
    return out;
}

InverseZ from_z(const ZState& z, const ModelParams& params,
                const Eigen::VectorXd& s_fallback) {
    const int n = params.n;
    const Eigen::MatrixXd ct = contact_tilde(params);

    const ZState zc = clamp_to_z(z, params);
    Eigen::VectorXd z1(n), z2(n), z3(n);
    for (int k = 0; k < n; ++k) {
        z1[k] = zc.at(k, 0);
        z2[k] = zc.at(k, 1);
        z3[k] = zc.at(k, 2);
    }

    InverseZ out;
    out.d = z1;
    out.i.resize(n);
    out.s.resize(n);
    out.fallback.assign(n, false);
    for (int k = 0; k < n; ++k) {
        out.i[k] = z2[k] / params.gamma_d[k];
        const double pressure = ct.row(k) * z2;
        if (pressure < pressure_floor(ct, params, k)) {
            out.s[k] = s_fallback[k];
            out.fallback[k] = true;
        } else {
            const double gk = params.removal_rate(k);
            out.s[k] = (z3[k] / params.gamma_d[k] + gk * z2[k] / params.gamma_d[k]) /
                       (params.lambda * pressure);
        }
    }
    return out;
}

bool in_set_Z(const ZState& z, const ModelParams& params, double rel_tol) {
    const int n = params.n;
    const Eigen::MatrixXd ct = contact_tilde(params);
    Eigen::VectorXd z2(n);
    for (int k = 0; k < n; ++k) z2[k] = z.at(k, 1);
    for (int k = 0; k < n; ++k) {
        const double nk = params.populations[k];
        const double z2_cap = params.gamma_d[k] * nk;
        const double tol1 = rel_tol * nk;
        const double tol2 = rel_tol * z2_cap;
        if (z.at(k, 0) < -tol1 || z.at(k, 0) > nk + tol1) return false;
        if (z.at(k, 1) < -tol2 || z.at(k, 1) > z2_cap + tol2) return false;
        const double gk = params.removal_rate(k);
        const double pressure = ct.row(k) * z2;
        double band_scale = gk * z2_cap;
        for (int j = 0; j < n; ++j) {
            band_scale += nk * params.gamma_d[k] * params.lambda * ct(k, j) *
                          params.gamma_d[j] * params.populations[j];
        }
        const double tol3 = rel_tol * band_scale;
        const double lo = -gk * z.at(k, 1);
        const double hi = nk * params.gamma_d[k] * params.lambda * pressure - gk * z.at(k, 1);
        if (z.at(k, 2) < lo - tol3 || z.at(k, 2) > hi + tol3) return false;
    }
    return true;
}

Eigen::VectorXd phi(const ZState& z, const Eigen::VectorXd& u, const ModelParams& params) {
    const int n = params.n;
    const Eigen::MatrixXd ct = contact_tilde(params);
    Eigen::VectorXd z2(n), z3(n);
    for (int k = 0; k < n; ++k) {
        z2[k] = z.at(k, 1);
        z3[k] = z.at(k, 2);
    }
    Eigen::VectorXd out(n);
    for (int k = 0; k < n; ++k) {
        const double pressure = ct.row(k) * z2;
        if (pressure < pressure_floor(ct, params, k)) {
            out[k] = 0.0;
            continue;
        }
        const double gk = params.removal_rate(k);
        const double ratio = (ct.row(k) * z3)(0) / pressure;
        // The infection-pressure term enters with a minus sign: it descends
        // from lambda f_{n+k} sum_j C_kj I_j, and f_{n+k} <= 0.
        out[k] = (z3[k] + gk * z2[k]) *
                     (-params.lambda * pressure - params.immun_prob[k] * u[k] + ratio - gk) +
                 gk * gk * z2[k];
    }
    return out;
}

Eigen::VectorXd phi_ratio_bound(const ModelParams& params) {
    const int n = params.n;
    const Eigen::MatrixXd ct = contact_tilde(params);
    const double big_gamma = params.removal_rate_max();
    Eigen::VectorXd bound(n);
    for (int k = 0; k < n; ++k) {
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            if (ct(k, j) == 0.0) continue;
            double inner = 0.0;
            for (int l = 0; l < n; ++l) {
                if (ct(j, l) == 0.0) continue;
                if (ct(k, l) == 0.0) {
                    inner = std::numeric_limits<double>::infinity();
                    break;
                }
                inner += ct(j, l) / ct(k, l);
            }
            sum += ct(k, j) * params.gamma_d[j] * params.populations[j] * inner;
        }
        bound[k] = params.lambda * sum + big_gamma;
    }
    return bound;
}

Eigen::VectorXd phi_lipschitz_bound(const ModelParams& params, double theta_sup) {
    const int n = params.n;
    const Eigen::MatrixXd ct = contact_tilde(params);
    const double big_gamma = params.removal_rate_max();
    const Eigen::VectorXd k_bound = phi_ratio_bound(params);
    Eigen::VectorXd m(n);
    for (int k = 0; k < n; ++k) {
        double pressure_cap = 0.0;
        for (int j = 0; j < n; ++j) {
            pressure_cap += ct(k, j) * params.gamma_d[j] * params.populations[j];
        }
        m[k] = (1.0 + big_gamma) *
                   (params.lambda * pressure_cap + theta_sup + k_bound[k] + big_gamma) +
               big_gamma * big_gamma;
    }
    return m;
}

Eigen::VectorXd output_u(const ZState& z_hat, const ModelParams& params,
                         const LinGains& gains, const SatConfig& cfg) {
    const int n = params.n;
    if (!in_set_Z(z_hat, params, 1e-9)) return Eigen::VectorXd::Zero(n);
    const InverseZ inv = from_z(z_hat, params, Eigen::VectorXd::Zero(n));
    StateVec x;
    x.s.resize(n);
    x.i.resize(n);
    x.r.resize(n);
    x.d = inv.d;
    for (int k = 0; k < n; ++k) {
        x.s[k] = clamp(inv.s[k], 0.0, params.populations[k]);
        x.i[k] = clamp(inv.i[k], 0.0, params.populations[k]);
        x.r[k] = clamp(params.populations[k] - x.s[k] - x.i[k] - x.d[k], 0.0,
                       params.populations[k]);
    }
    return theta_sat(x, gains, params, cfg);
}

bool beta_hurwitz(const Eigen::MatrixXd& beta) {
    for (int k = 0; k < beta.rows(); ++k) {
        const double b1 = beta(k, 0), b2 = beta(k, 1), b3 = beta(k, 2);
        if (!(b1 > 0.0 && b3 > 0.0 && b1 * b2 > b3)) return false;
    }
    return true;
}

Eigen::MatrixXd observer_a0(const ObserverConfig& obs) {
    const int n = static_cast<int>(obs.beta.rows());
    Eigen::MatrixXd a0 = Eigen::MatrixXd::Zero(3 * n, 3 * n);
    for (int k = 0; k < n; ++k) {
        Eigen::Matrix3d blk;
        blk << -obs.beta(k, 0), 1, 0,
               -obs.beta(k, 1), 0, 1,
               -obs.beta(k, 2), 0, 0;
        a0.block<3, 3>(3 * k, 3 * k) = blk;
    }
    return a0;
}

Eigen::VectorXd observer_rhs(const ZState& z_hat, const Eigen::VectorXd& y,
                             const ModelParams& params, const ObserverConfig& obs,
                             const LinGains& gains, const SatConfig& cfg) {
    const int n = params.n;
    const Eigen::VectorXd u = output_u(z_hat, params, gains, cfg);
    // The nonlinearity is fed through the projection onto Z: phi is Lipschitz
    // there, while the raw formula can blow up on the transient excursions of
    // a high-gain estimate. The observer state itself is never clamped.
    const Eigen::VectorXd top = phi(clamp_to_z(z_hat, params), u, params);
    const double eps = obs.epsilon;
    Eigen::VectorXd dz(3 * n);
    for (int k = 0; k < n; ++k) {
        const double innovation = y[k] - z_hat.at(k, 0);
        dz[3 * k + 0] = z_hat.at(k, 1) + obs.beta(k, 0) / eps * innovation;
        dz[3 * k + 1] = z_hat.at(k, 2) + obs.beta(k, 1) / (eps * eps) * innovation;
        dz[3 * k + 2] = top[k] + obs.beta(k, 2) / (eps * eps * eps) * innovation;
    }
    return dz;
}

LyapunovSolution solve_lyapunov(const ObserverConfig& obs) {
    if (!beta_hurwitz(obs.beta)) {
        throw std::invalid_argument("observer beta coefficients are not Hurwitz");
    }
    const int n = static_cast<int>(obs.beta.rows());
    LyapunovSolution out;
    out.p = Eigen::MatrixXd::Zero(3 * n, 3 * n);
    for (int k = 0; k < n; ++k) {
        Eigen::Matrix3d a;
        a << -obs.beta(k, 0), 1, 0,
             -obs.beta(k, 1), 0, 1,
             -obs.beta(k, 2), 0, 0;
        // Vectorized solve, columns of P stacked: the A^T P term is
        // blockdiag(A^T) and the P A term places a(l, j) I at block (j, l).
        Eigen::Matrix<double, 9, 9> lhs = Eigen::Matrix<double, 9, 9>::Zero();
        const Eigen::Matrix3d at = a.transpose();
        for (int j = 0; j < 3; ++j) {
            lhs.block<3, 3>(3 * j, 3 * j) += at;
            for (int l = 0; l < 3; ++l) {
                lhs.block<3, 3>(3 * j, 3 * l) += a(l, j) * Eigen::Matrix3d::Identity();
            }
        }
        Eigen::Matrix<double, 9, 1> rhs;
        const Eigen::Matrix3d neg_id = -Eigen::Matrix3d::Identity();
        for (int col = 0; col < 3; ++col) rhs.segment<3>(3 * col) = neg_id.col(col);
        const Eigen::Matrix<double, 9, 1> vec_p = lhs.colPivHouseholderQr().solve(rhs);
        Eigen::Matrix3d p;
        for (int col = 0; col < 3; ++col) p.col(col) = vec_p.segment<3>(3 * col);
        p = 0.5 * (p + p.transpose()).eval();
        out.p.block<3, 3>(3 * k, 3 * k) = p;
    }
    const Eigen::MatrixXd a0 = observer_a0(obs);
    const Eigen::MatrixXd res = out.p * a0 + a0.transpose() * out.p +
                                Eigen::MatrixXd::Identity(3 * n, 3 * n);
    out.residual = res.cwiseAbs().rowwise().sum().maxCoeff();
    return out;
}

double epsilon_star(const LyapunovSolution& lyap, double m_lip) {
    if (!(m_lip > 0.0)) throw std::invalid_argument("phi Lipschitz constant must be positive");
    const double p_norm = lyap.p.cwiseAbs().rowwise().sum().maxCoeff();
    return std::min(1.0, 1.0 / (2.0 * p_norm));
}

Eigen::VectorXd scaled_error(const ZState& z, const ZState& z_hat, double epsilon) {
    const int n = z.classes();
    Eigen::VectorXd eta(3 * n);
    for (int k = 0; k < n; ++k) {
        eta[3 * k + 0] = (z.at(k, 0) - z_hat.at(k, 0)) / (epsilon * epsilon);
        eta[3 * k + 1] = (z.at(k, 1) - z_hat.at(k, 1)) / epsilon;
        eta[3 * k + 2] = z.at(k, 2) - z_hat.at(k, 2);
    }
    return eta;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> closed_loop_rhs(
    const StateVec& x, const ZState& z_hat, const ModelParams& params,
    const ObserverConfig& obs, const LinGains& gains, const SatConfig& cfg) {
    const Eigen::VectorXd u = output_u(z_hat, params, gains, cfg);
    const Eigen::VectorXd dx = sird_rhs(x, u, params);
    const Eigen::VectorXd dz = observer_rhs(z_hat, x.d, params, obs, gains, cfg);
    return {dx, dz};
}

}  // namespace epictrl
