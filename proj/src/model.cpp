#include "epictrl/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace epictrl {

namespace {

bool finite_all(const Eigen::VectorXd& v) {
    return v.allFinite();
}

}  // namespace

std::vector<ValidationIssue> validate_params(const ModelParams& params, bool observer_mode) {
    std::vector<ValidationIssue> issues;
    auto add = [&issues](std::string field, int row, int col, std::string message) {
        issues.push_back({std::move(field), row, col, std::move(message)});
    };

    const int n = params.n;
    if (n <= 0) {
        add("n", -1, -1, "number of age classes must be positive");
        return issues;
    }
    auto check_len = [&](const char* field, const Eigen::VectorXd& v) {
        if (v.size() != n) {
            add(field, -1, -1, "expected length " + std::to_string(n) + ", got " +
                                   std::to_string(v.size()));
            return false;
        }
        if (!finite_all(v)) add(field, -1, -1, "non-finite entry");
        return true;
    };

    if (!(params.lambda > 0.0 && params.lambda <= 1.0)) {
        add("lambda", -1, -1, "must lie in (0,1], got " + std::to_string(params.lambda));
    }

    const bool pop_ok = check_len("populations", params.populations);
    if (pop_ok) {
        for (int k = 0; k < n; ++k) {
            if (!(params.populations[k] > 0.0)) {
                add("populations", k, -1, "N_k must be positive");
            }
        }
    }

    if (check_len("gamma_r", params.gamma_r)) {
        for (int k = 0; k < n; ++k) {
            if (params.gamma_r[k] < 0.0 || params.gamma_r[k] > 1.0) {
                add("gamma_r", k, -1, "must lie in [0,1]");
            }
        }
    }
    if (check_len("gamma_d", params.gamma_d)) {
        for (int k = 0; k < n; ++k) {
            if (params.gamma_d[k] < 0.0 || params.gamma_d[k] > 1.0) {
                add("gamma_d", k, -1, "must lie in [0,1]");
            } else if (observer_mode && params.gamma_d[k] == 0.0) {
                add("gamma_d", k, -1, "gamma_d must be positive for observer mode");
            }
        }
    }
    if (check_len("immun_prob", params.immun_prob)) {
        for (int k = 0; k < n; ++k) {
            if (!(params.immun_prob[k] > 0.0 && params.immun_prob[k] <= 1.0)) {
                add("immun_prob", k, -1, "must lie in (0,1]");
            }
        }
    }

    if (params.contact.rows() != n || params.contact.cols() != n) {
        add("contact", -1, -1, "expected " + std::to_string(n) + "x" + std::to_string(n) +
                                   " matrix");
    } else if (pop_ok) {
        for (int k = 0; k < n; ++k) {
            for (int j = 0; j < n; ++j) {
                const double m = params.contact(k, j);
                if (!std::isfinite(m) || m < 0.0 || m > params.populations[j]) {
                    add("contact", k, j,
                        "M_kj must lie in [0, N_j] = [0, " +
                            std::to_string(params.populations[j]) + "], got " +
                            std::to_string(m));
                }
            }
        }
    }

    return issues;
}

void validate_params_or_throw(const ModelParams& params, bool observer_mode) {
    const auto issues = validate_params(params, observer_mode);
    if (issues.empty()) return;
    std::ostringstream msg;
    msg << "invalid model parameters:";
    for (const auto& issue : issues) {
        msg << "\n  " << issue.field;
        if (issue.row >= 0) {
            msg << "[" << issue.row;
            if (issue.col >= 0) msg << "," << issue.col;
            msg << "]";
        }
        msg << ": " << issue.message;
    }
    throw std::invalid_argument(msg.str());
}

Eigen::MatrixXd contact_normalized(const ModelParams& params) {
    Eigen::MatrixXd c = params.contact;
    for (int j = 0; j < params.n; ++j) c.col(j) /= params.populations[j];
    return c;
}

Eigen::VectorXd StateVec::to_flat() const {
    const int n = classes();
    Eigen::VectorXd x(4 * n);
    x.segment(0, n) = s;
    x.segment(n, n) = i;
    x.segment(2 * n, n) = r;
    x.segment(3 * n, n) = d;
    return x;
}

StateVec StateVec::from_flat(const Eigen::VectorXd& x, double time) {
    const int n = static_cast<int>(x.size()) / 4;
    StateVec st;
    st.s = x.segment(0, n);
    st.i = x.segment(n, n);
    st.r = x.segment(2 * n, n);
    st.d = x.segment(3 * n, n);
    st.time = time;
    return st;
}

StateVec make_initial_state(const ModelParams& params, const Eigen::VectorXd& i0,
                            const Eigen::VectorXd& r0, const Eigen::VectorXd& d0) {
    StateVec st;
    st.i = i0;
    st.r = r0;
    st.d = d0;
    st.s = params.populations - i0 - r0 - d0;
    st.time = 0.0;
    for (int k = 0; k < params.n; ++k) {
        if (st.s[k] < 0.0) {
            throw std::invalid_argument("initial I+R+D exceeds N for class " +
                                        std::to_string(k));
        }
    }
    return st;
}

Eigen::VectorXd lift_f(const StateVec& state, const ModelParams& params) {
    const int n = params.n;
    const Eigen::MatrixXd c = contact_normalized(params);
    const Eigen::VectorXd force = c * state.i;  // sum_j C_kj I_j per class
    Eigen::VectorXd f(2 * n);
    for (int k = 0; k < n; ++k) {
        const double infection = params.lambda * state.s[k] * force[k];
        f[k] = infection - params.removal_rate(k) * state.i[k];
        f[n + k] = -infection;
    }
    return f;
}

Eigen::VectorXd sird_rhs(const StateVec& state, const Eigen::VectorXd& theta,
                         const ModelParams& params) {
    const int n = params.n;
    if (theta.size() != n) throw std::invalid_argument("theta has wrong length");
    for (int k = 0; k < n; ++k) {
        if (theta[k] < 0.0) {
            throw std::invalid_argument("negative vaccination rate for class " +
                                        std::to_string(k));
        }
    }
    const Eigen::MatrixXd c = contact_normalized(params);
    const Eigen::VectorXd force = c * state.i;
    Eigen::VectorXd dx(4 * n);
    for (int k = 0; k < n; ++k) {
        const double infection = params.lambda * state.s[k] * force[k];
        const double vaccination = params.immun_prob[k] * theta[k] * state.s[k];
        dx[k] = -infection - vaccination;
        dx[n + k] = infection - params.removal_rate(k) * state.i[k];
        dx[2 * n + k] = params.gamma_r[k] * state.i[k] + vaccination;
        dx[3 * n + k] = params.gamma_d[k] * state.i[k];
    }
    return dx;
}

bool in_set_B(const StateVec& state, const ModelParams& params, double tol) {
    for (int k = 0; k < params.n; ++k) {
        const double hi = params.populations[k] + tol;
        for (double v : {state.s[k], state.i[k], state.r[k], state.d[k]}) {
            if (v < -tol || v > hi) return false;
        }
    }
    return true;
}

bool in_set_D(const StateVec& state, const ModelParams& params, double floor) {
    const Eigen::VectorXd force = contact_normalized(params) * state.i;
    for (int k = 0; k < params.n; ++k) {
        if (state.s[k] < floor || force[k] < floor) return false;
    }
    return true;
}

double default_region_floor(const ModelParams& params) {
    return 1e-9 * params.populations.minCoeff();
}

}  // namespace epictrl
