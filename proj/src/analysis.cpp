#include "epictrl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "epictrl/rng.hpp"

namespace epictrl {

RunSummary summarize(const Trajectory& traj, const ModelParams& params,
                     const LinGains* gains) {
    const int n = params.n;
    if (traj.states.empty()) throw std::invalid_argument("empty trajectory");
    RunSummary out;
    const double total_pop = params.populations.sum();
    out.peak_per_class = Eigen::VectorXd::Zero(n);
    for (const auto& x : traj.states) {
        out.peak_total_infected =
            std::max(out.peak_total_infected, x.segment(n, n).sum() / total_pop);
        for (int k = 0; k < n; ++k) {
            out.peak_per_class[k] =
                std::max(out.peak_per_class[k], x[n + k] / params.populations[k]);
        }
    }
    out.eradication_time = traj.eradication_time();
    out.final_dead = traj.states.back().segment(3 * n, n);
    for (const auto& ev : traj.events) {
        if (ev.kind == EventKind::SwitchOn || ev.kind == EventKind::SwitchOff) {
            ++out.switch_count;
        }
    }

    if (gains != nullptr) {
        const DecayEnvelope env = decay_envelope(*gains);
        const StateVec x0 = StateVec::from_flat(traj.states.front(), traj.times.front());
        const Eigen::VectorXd f0 = lift_f(x0, params);
        out.decay_fit.resize(n);
        for (int k = 0; k < n; ++k) {
            DecayFit fit;
            fit.c = env.c[k];
            fit.mu = env.mu[k];
            fit.generalized_scale = x0.i[k] == 0.0;
            const double scale = fit.generalized_scale ? std::abs(f0[k]) : x0.i[k];
            fit.satisfied = true;
            for (std::size_t idx = 0; idx < traj.states.size(); ++idx) {
                const double t = traj.times[idx] - traj.times.front();
                const double bound = fit.c * scale * std::exp(-fit.mu * t) * (1.0 + 1e-3);
                if (traj.states[idx][n + k] > bound) {
                    fit.satisfied = false;
                    break;
                }
            }
            out.decay_fit[k] = fit;
        }
    }
    return out;
}

Eigen::VectorXd dstar_bound(const ModelParams& params, const LinGains& gains,
                            const Eigen::VectorXd& i0) {
    const DecayEnvelope env = decay_envelope(gains);
    Eigen::VectorXd bound(params.n);
    for (int k = 0; k < params.n; ++k) {
        bound[k] = params.gamma_d[k] * env.c[k] * i0[k] / env.mu[k];
    }
    return bound;
}

LasalleReport lasalle_check(const Trajectory& traj, const ModelParams& params) {
    const int n = params.n;
    LasalleReport report;
    if (traj.size() < 3) throw std::invalid_argument("trajectory too short");

    const std::size_t m = traj.size();
    std::vector<double> v(m), dissipation(m);
    for (std::size_t idx = 0; idx < m; ++idx) {
        const Eigen::VectorXd& x = traj.states[idx];
        v[idx] = x.segment(0, 3 * n).sum();  // S + I + R summed over classes
        dissipation[idx] = -(params.gamma_d.array() * x.segment(n, n).array()).sum();
    }

    auto fail = [&report](int step, const std::string& what) {
        if (report.first_violation_step < 0) {
            report.first_violation_step = step;
            report.violation = what;
        }
    };

    // Single time-forward sweep so the earliest offending sample is the one
    // reported, whichever check it trips.
    const double v_slack = 1e-12 * std::max(1.0, v.front());
    report.v_nonincreasing = true;
    report.s_monotone = true;
    report.r_monotone = true;
    for (std::size_t idx = 1; idx < m; ++idx) {
        for (int k = 0; k < n; ++k) {
            const double tol = 1e-12 * params.populations[k];
            if (traj.states[idx][k] > traj.states[idx - 1][k] + tol) {
                report.s_monotone = false;
                fail(static_cast<int>(idx), "S increased for class " + std::to_string(k));
            }
            if (traj.states[idx][2 * n + k] < traj.states[idx - 1][2 * n + k] - tol) {
                report.r_monotone = false;
                fail(static_cast<int>(idx), "R decreased for class " + std::to_string(k));
            }
        }
        const double increase = v[idx] - v[idx - 1];
        report.worst_v_increase = std::max(report.worst_v_increase, increase);
        if (increase > v_slack) {
            report.v_nonincreasing = false;
            fail(static_cast<int>(idx), "V increased");
        }
    }

    // Centered dV/dt against the dissipation identity, O(h^2) tolerance.
    double diss_scale = 0.0;
    for (double dval : dissipation) diss_scale = std::max(diss_scale, std::abs(dval));
    report.dv_matches = true;
    double h_max = 0.0;
    for (std::size_t idx = 1; idx + 1 < m; ++idx) {
        const double h0 = traj.times[idx] - traj.times[idx - 1];
        const double h1 = traj.times[idx + 1] - traj.times[idx];
        h_max = std::max(h_max, std::max(h0, h1));
        const double dv = (v[idx + 1] - v[idx - 1]) / (h0 + h1);
        const double mismatch = std::abs(dv - dissipation[idx]);
        report.worst_dv_mismatch = std::max(report.worst_dv_mismatch, mismatch);
    }
    report.dv_tolerance = 50.0 * h_max * h_max * std::max(diss_scale, 1e-3) + 1e-9;
    if (report.worst_dv_mismatch > report.dv_tolerance) {
        report.dv_matches = false;
        fail(-1, "dV/dt does not match -sum gamma_d I");
    }
    return report;
}

double lipschitz_estimate(const std::function<double(const Eigen::VectorXd&)>& fn,
                          const BoxDomain& box, int samples, std::uint64_t seed,
                          const std::vector<BoundaryHint>& hints) {
    if (samples < 2) throw std::invalid_argument("need at least two samples");
    const int dim = static_cast<int>(box.lo.size());
    SplitMix64 rng(seed);

    auto draw = [&]() {
        Eigen::VectorXd x(dim);
        for (int d = 0; d < dim; ++d) x[d] = rng.uniform(box.lo[d], box.hi[d]);
        return x;
    };

    double best = 0.0;
    auto consider = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        const double dist = (a - b).cwiseAbs().maxCoeff();
        if (dist <= 0.0) return;
        best = std::max(best, std::abs(fn(a) - fn(b)) / dist);
    };

    const int hinted = hints.empty() ? 0 : samples / 3;
    const int plain = samples - hinted;
    for (int s = 0; s < plain; ++s) {
        const Eigen::VectorXd a = draw();
        Eigen::VectorXd b;
        if (s % 2 == 0) {
            b = draw();  // wide pair
        } else {
            b = a;  // short-range pair, better derivative resolution
            for (int d = 0; d < dim; ++d) {
                b[d] += (box.hi[d] - box.lo[d]) * 1e-4 * (rng.uniform() - 0.5);
                b[d] = std::clamp(b[d], box.lo[d], box.hi[d]);
            }
        }
        consider(a, b);
    }
    for (int s = 0; s < hinted; ++s) {
        const auto& hint = hints[static_cast<std::size_t>(s) % hints.size()];
        Eigen::VectorXd a = draw();
        Eigen::VectorXd b = a;
        const double width = box.hi[hint.dim] - box.lo[hint.dim];
        a[hint.dim] = std::clamp(hint.value - width * 1e-5 * rng.uniform(), box.lo[hint.dim],
                                 box.hi[hint.dim]);
        b[hint.dim] = std::clamp(hint.value + width * 1e-5 * rng.uniform(), box.lo[hint.dim],
                                 box.hi[hint.dim]);
        consider(a, b);
    }
    return best;
}

PeakComparison peak_comparison_n1(const ModelParams& params,
                                  const std::vector<InputProfile>& profiles, double i0,
                                  double s0, const StepSpec& step) {
    if (params.n != 1) {
        throw std::invalid_argument("peak comparison requires a single age class");
    }
    const double gamma = params.removal_rate(0);
    const double alpha = params.lambda * params.contact(0, 0) / params.populations[0];
    const double s_hat = gamma / alpha;  // = N (gamma_r+gamma_d) / (lambda M)
    if (!(i0 >= 1.0)) {
        throw std::invalid_argument("precondition violated: I(0) >= 1 is required");
    }
    if (!(s0 > s_hat)) {
        std::ostringstream msg;
        msg << "precondition violated: S(0) > N(gamma_r+gamma_d)/(lambda M) = " << s_hat
            << " is required, got S(0) = " << s0;
        throw std::invalid_argument(msg.str());
    }
    if (s0 + i0 > params.populations[0]) {
        throw std::invalid_argument("S(0) + I(0) exceeds the population");
    }

    StateVec x0;
    x0.s = Eigen::VectorXd::Constant(1, s0);
    x0.i = Eigen::VectorXd::Constant(1, i0);
    x0.r = Eigen::VectorXd::Constant(1, params.populations[0] - s0 - i0);
    x0.d = Eigen::VectorXd::Zero(1);

    SimOptions opts;
    opts.step = step;
    opts.t_end = 4000.0;
    opts.stop_on_eradication = true;

    // The profile jumps at t = duration; integrating each constant piece as
    // its own leg keeps RK4 stages away from the discontinuity.
    auto run_with = [&](const InputProfile& profile) {
        if (!profile.positive_initially()) {
            const Controller zero = [](double, const StateVec&) {
                return Eigen::VectorXd::Zero(1);
            };
            return simulate_plant(params, x0, zero, opts);
        }
        const Controller pulse = [&profile](double, const StateVec&) {
            return Eigen::VectorXd::Constant(1, profile.amplitude);
        };
        SimOptions pulse_opts = opts;
        pulse_opts.t_end = profile.duration;
        Trajectory head = simulate_plant(params, x0, pulse, pulse_opts);
        if (head.eradication_time()) return head;

        const Controller zero = [](double, const StateVec&) {
            return Eigen::VectorXd::Zero(1);
        };
        SimOptions tail_opts = opts;
        tail_opts.t_end = opts.t_end - profile.duration;
        const StateVec mid = StateVec::from_flat(head.states.back(), head.times.back());
        const Trajectory tail = simulate_plant(params, mid, zero, tail_opts);
        for (std::size_t idx = 1; idx < tail.size(); ++idx) {
            head.times.push_back(tail.times[idx] + profile.duration);
            head.states.push_back(tail.states[idx]);
            head.controls.push_back(tail.controls[idx]);
        }
        for (const auto& ev : tail.events) {
            head.events.push_back({ev.time + profile.duration, ev.kind, ev.cls});
        }
        return head;
    };

    PeakComparison out;
    out.s_hat = s_hat;
    auto note_drift = [&](const Trajectory& traj) {
        for (const auto& x : traj.states) {
            const double total = x[0] + x[1] + x[2] + x[3];
            out.worst_conservation_drift =
                std::max(out.worst_conservation_drift,
                         std::abs(total - params.populations[0]) / params.populations[0]);
        }
    };
    auto peak_of = [&](const Trajectory& traj) {
        std::size_t arg = 0;
        double peak = -1.0;
        for (std::size_t idx = 0; idx < traj.size(); ++idx) {
            if (traj.states[idx][1] > peak) {
                peak = traj.states[idx][1];
                arg = idx;
            }
        }
        return std::pair<double, std::size_t>(peak, arg);
    };

    const InputProfile zero{"zero", 0.0, 0.0};
    const Trajectory base = run_with(zero);
    note_drift(base);
    const auto [base_peak, base_arg] = peak_of(base);
    out.zero_input_peak = base_peak;
    out.zero_input_peak_time = base.times[base_arg];
    out.zero_input_s_at_peak = base.states[base_arg][0];

    for (const auto& profile : profiles) {
        const Trajectory traj = run_with(profile);
        note_drift(traj);
        const auto [peak, arg] = peak_of(traj);
        PeakComparisonRow row;
        row.name = profile.name;
        row.peak = peak;
        row.peak_time = traj.times[arg];
        row.s_at_peak = traj.states[arg][0];
        row.strictly_lower = peak < base_peak;

        // Planar identity: I_max = S0 - s_hat + s_hat ln(s_hat/S0) + I0
        //                  - (p/alpha) * integral of theta(I)/I dI on the rise.
        // The profile is constant then zero, so the integral over the rising
        // phase is amplitude * ln(I(t_cut)/I0), exact in the sampled path;
        // quadrature across the input jump would smear it by O(h).
        double integral = 0.0;
        if (profile.positive_initially()) {
            const double t_cut = std::min(profile.duration, traj.times[arg]);
            double i_cut = traj.states[arg][1];
            for (std::size_t idx = 1; idx <= arg; ++idx) {
                if (traj.times[idx] >= t_cut) {
                    const double w =
                        (t_cut - traj.times[idx - 1]) / (traj.times[idx] - traj.times[idx - 1]);
                    i_cut = std::exp((1.0 - w) * std::log(traj.states[idx - 1][1]) +
                                     w * std::log(traj.states[idx][1]));
                    break;
                }
            }
            integral = profile.amplitude * std::log(i_cut / i0);
        }
        const double predicted = s0 - s_hat + s_hat * std::log(s_hat / s0) + i0 -
                                 params.immun_prob[0] / alpha * integral;
        row.integral_residual = std::abs(peak - predicted);
        out.rows.push_back(row);
    }
    return out;
}

}  // namespace epictrl
