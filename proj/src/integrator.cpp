#include "epictrl/integrator.hpp"

#include <cmath>
#include <sstream>

namespace epictrl {

namespace {

void check_finite(const Eigen::VectorXd& dx, double t) {
    if (dx.allFinite()) return;
    for (int c = 0; c < dx.size(); ++c) {
        if (!std::isfinite(dx[c])) {
            std::ostringstream msg;
            msg << "non-finite derivative at t=" << t << ", component " << c;
            throw IntegrationError(msg.str());
        }
    }
}

Eigen::VectorXd rk4_step(const VectorField& rhs, double t, const Eigen::VectorXd& x,
                         double h) {
    const Eigen::VectorXd k1 = rhs(t, x);
    check_finite(k1, t);
    const Eigen::VectorXd k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1);
    check_finite(k2, t + 0.5 * h);
    const Eigen::VectorXd k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2);
    check_finite(k3, t + 0.5 * h);
    const Eigen::VectorXd k4 = rhs(t + h, x + h * k3);
    check_finite(k4, t + h);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

std::string event_kind_name(EventKind kind) {
    switch (kind) {
        case EventKind::SwitchOn: return "switch_on";
        case EventKind::SwitchOff: return "switch_off";
        case EventKind::Eradication: return "eradication";
    }
    return "unknown";
}

std::optional<double> Trajectory::eradication_time() const {
    for (const auto& ev : events) {
        if (ev.kind == EventKind::Eradication) return ev.time;
    }
    return std::nullopt;
}

Trajectory integrate(const VectorField& rhs, const Eigen::VectorXd& x0, double t0,
                     double t_end, const StepSpec& step) {
    if (!(step.h > 0.0)) throw std::invalid_argument("step size must be positive");
    Trajectory traj;
    double t = t0;
    Eigen::VectorXd x = x0;
    traj.times.push_back(t);
    traj.states.push_back(x);
    while (t < t_end - 1e-12) {
        const double h = std::min(step.h, t_end - t);
        x = rk4_step(rhs, t, x, h);
        t += h;
        traj.times.push_back(t);
        traj.states.push_back(x);
    }
    return traj;
}

bool eradication_stop(const Eigen::VectorXd& flat_state, int n) {
    return flat_state.segment(n, n).sum() < 1.0;
}

namespace {

// Clips roundoff-scale excursions outside B back to the boundary; anything
// beyond the tolerance indicates a model or controller bug and aborts.
void clip_to_box(Eigen::VectorXd& x, const ModelParams& params, double tol_rel, double t) {
    const int n = params.n;
    for (int c = 0; c < 4 * n; ++c) {
        const int k = c % n;
        const double nk = params.populations[k];
        const double tol = tol_rel * nk;
        if (x[c] < 0.0) {
            if (x[c] < -tol) {
                std::ostringstream msg;
                msg << "state left B at t=" << t << ": component " << c << " = " << x[c]
                    << " (tolerance " << -tol << ")";
                throw IntegrationError(msg.str());
            }
            x[c] = 0.0;
        } else if (x[c] > nk) {
            if (x[c] > nk + tol) {
                std::ostringstream msg;
                msg << "state left B at t=" << t << ": component " << c << " = " << x[c]
                    << " exceeds N_k + tolerance";
                throw IntegrationError(msg.str());
            }
            x[c] = nk;
        }
    }
}

// Locates a predicate flip inside (t_lo, t_lo + h] by bisection on the step
// length, integrating the same field from the step's start state.
double refine_event_time(const VectorField& rhs, double t_lo, const Eigen::VectorXd& x_lo,
                         double h, const std::function<bool(const Eigen::VectorXd&)>& pred,
                         bool value_lo, double time_tol) {
    double lo = 0.0, hi = h;
    while (hi - lo > time_tol) {
        const double mid = 0.5 * (lo + hi);
        const Eigen::VectorXd x_mid = rk4_step(rhs, t_lo, x_lo, mid);
        if (pred(x_mid) == value_lo) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return t_lo + 0.5 * (lo + hi);
}

struct PlantStepper {
    const ModelParams& params;
    const SimOptions& opts;
    std::vector<bool> region;  // last predicate value per class

    void log_switches(Trajectory& traj, const VectorField& field, double t_prev,
                      const Eigen::VectorXd& x_prev, double h, const Eigen::VectorXd& x_now,
                      double t_now) {
        if (!opts.region_predicate) return;
        const int n = params.n;
        const StateVec now = StateVec::from_flat(x_now, t_now);
        for (int k = 0; k < n; ++k) {
            const bool value = opts.region_predicate(k, now);
            if (value == region[k]) continue;
            auto flat_pred = [&](const Eigen::VectorXd& x) {
                return opts.region_predicate(k, StateVec::from_flat(x, 0.0));
            };
            const double t_ev = refine_event_time(field, t_prev, x_prev, h, flat_pred,
                                                  region[k], opts.event_time_tol);
            traj.events.push_back(
                {t_ev, value ? EventKind::SwitchOn : EventKind::SwitchOff, k});
            region[k] = value;
        }
    }
};

}  // namespace

Trajectory simulate_plant(const ModelParams& params, const StateVec& x0,
                          const Controller& controller, const SimOptions& opts) {
    const int n = params.n;
    if (opts.substeps < 1) throw std::invalid_argument("substeps must be >= 1");

    auto eval_theta = [&](double t, const Eigen::VectorXd& x) {
        Eigen::VectorXd theta = controller(t, StateVec::from_flat(x, t));
        for (int k = 0; k < n; ++k) {
            if (theta[k] < 0.0) {
                if (theta[k] < -1e-9 * std::max(1.0, theta.cwiseAbs().maxCoeff())) {
                    std::ostringstream msg;
                    msg << "controller produced negative rate " << theta[k] << " for class "
                        << k << " at t=" << t;
                    throw IntegrationError(msg.str());
                }
                theta[k] = 0.0;
            }
        }
        return theta;
    };
    const VectorField field = [&](double t, const Eigen::VectorXd& x) {
        return sird_rhs(StateVec::from_flat(x, t), eval_theta(t, x), params);
    };

    Trajectory traj;
    double t = 0.0;
    Eigen::VectorXd x = x0.to_flat();

    PlantStepper stepper{params, opts, {}};
    if (opts.region_predicate) {
        stepper.region.resize(n);
        for (int k = 0; k < n; ++k) stepper.region[k] = opts.region_predicate(k, x0);
    }

    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.controls.push_back(eval_theta(t, x));

    if (opts.stop_on_eradication && eradication_stop(x, n)) {
        traj.events.push_back({t, EventKind::Eradication, -1});
        return traj;
    }

    const double h_out = opts.step.h;
    const double h_sub = h_out / opts.substeps;
    while (t < opts.t_end - 1e-12) {
        const double t_prev = t;
        const Eigen::VectorXd x_prev = x;
        const double h = std::min(h_out, opts.t_end - t);
        for (int s = 0; s < opts.substeps; ++s) {
            const double hs = std::min(h_sub, t_prev + h - t);
            if (hs <= 0.0) break;
            x = rk4_step(field, t, x, hs);
            t += hs;
        }
        t = t_prev + h;  // keep the grid exact
        if (opts.clip_to_box) clip_to_box(x, params, opts.clip_tol_rel, t);
        stepper.log_switches(traj, field, t_prev, x_prev, h, x, t);
        traj.times.push_back(t);
        traj.states.push_back(x);
        traj.controls.push_back(eval_theta(t, x));
        if (opts.stop_on_eradication && eradication_stop(x, n)) {
            traj.events.push_back({t, EventKind::Eradication, -1});
            break;
        }
    }
    return traj;
}

Trajectory simulate_coupled(
    const ModelParams& params, const StateVec& x0, const Eigen::VectorXd& zhat0,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& input,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>&
        observer_rhs,
    const SimOptions& opts) {
    const int n = params.n;
    const int nz = static_cast<int>(zhat0.size());
    if (opts.substeps < 1) throw std::invalid_argument("substeps must be >= 1");

    auto eval_u = [&](const Eigen::VectorXd& zhat) {
        Eigen::VectorXd u = input(zhat);
        for (int k = 0; k < n; ++k) u[k] = std::max(0.0, u[k]);
        return u;
    };
    // Coupled state [x; zhat]; the observer is fed the measured deaths.
    const VectorField field = [&](double t, const Eigen::VectorXd& xz) {
        const Eigen::VectorXd x = xz.head(4 * n);
        const Eigen::VectorXd zhat = xz.tail(nz);
        const Eigen::VectorXd u = eval_u(zhat);
        const Eigen::VectorXd y = x.segment(3 * n, n);
        Eigen::VectorXd dxz(4 * n + nz);
        dxz.head(4 * n) = sird_rhs(StateVec::from_flat(x, t), u, params);
        dxz.tail(nz) = observer_rhs(zhat, y);
        return dxz;
    };

    Trajectory traj;
    double t = 0.0;
    Eigen::VectorXd xz(4 * n + nz);
    xz.head(4 * n) = x0.to_flat();
    xz.tail(nz) = zhat0;

    auto record = [&]() {
        traj.times.push_back(t);
        traj.states.push_back(xz.head(4 * n));
        traj.estimates.push_back(xz.tail(nz));
        traj.controls.push_back(eval_u(xz.tail(nz)));
    };
    record();

    const double h_out = opts.step.h;
    const double h_sub = h_out / opts.substeps;
    while (t < opts.t_end - 1e-12) {
        const double t_prev = t;
        const double h = std::min(h_out, opts.t_end - t);
        for (int s = 0; s < opts.substeps; ++s) {
            const double hs = std::min(h_sub, t_prev + h - t);
            if (hs <= 0.0) break;
            xz = rk4_step(field, t, xz, hs);
            t += hs;
        }
        t = t_prev + h;
        if (opts.clip_to_box) {
            Eigen::VectorXd x = xz.head(4 * n);
            clip_to_box(x, params, opts.clip_tol_rel, t);
            xz.head(4 * n) = x;
        }
        record();
        if (opts.stop_on_eradication && eradication_stop(xz.head(4 * n), n)) {
            traj.events.push_back({t, EventKind::Eradication, -1});
            break;
        }
    }
    return traj;
}

}  // namespace epictrl
