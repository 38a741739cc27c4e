#include "epictrl/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "epictrl/rng.hpp"
#include "epictrl/runner.hpp"

namespace epictrl {

namespace {

// Random physical state: per class a uniform split of N_k over the four
// compartments.
StateVec random_state(const ModelParams& params, SplitMix64& rng) {
    const int n = params.n;
    StateVec st;
    st.s.resize(n);
    st.i.resize(n);
    st.r.resize(n);
    st.d.resize(n);
    for (int k = 0; k < n; ++k) {
        double w[4];
        double total = 0.0;
        for (double& v : w) {
            v = rng.uniform() + 1e-12;
            total += v;
        }
        const double nk = params.populations[k];
        st.s[k] = nk * w[0] / total;
        st.i[k] = nk * w[1] / total;
        st.r[k] = nk * w[2] / total;
        st.d[k] = nk * w[3] / total;
    }
    return st;
}

// Piecewise-constant non-negative input, redrawn every `segment` days.
struct PiecewiseInput {
    Eigen::MatrixXd amplitudes;  // segments x classes
    double segment;

    Eigen::VectorXd operator()(double t) const {
        int idx = static_cast<int>(t / segment);
        idx = std::min(idx, static_cast<int>(amplitudes.rows()) - 1);
        return amplitudes.row(idx).transpose();
    }
};

PiecewiseInput random_input(const ModelParams& params, double horizon, double segment,
                            double max_amplitude, SplitMix64& rng) {
    const int segments = static_cast<int>(std::ceil(horizon / segment)) + 1;
    PiecewiseInput input;
    input.segment = segment;
    input.amplitudes.resize(segments, params.n);
    for (int s = 0; s < segments; ++s) {
        for (int k = 0; k < params.n; ++k) {
            input.amplitudes(s, k) = rng.uniform(0.0, max_amplitude);
        }
    }
    return input;
}

std::string fmt(double v) {
    std::ostringstream out;
    out.precision(4);
    out << v;
    return out.str();
}

}  // namespace

InvarianceCert cert_invariance(const ModelParams& params, int runs, double horizon,
                               double step, std::uint64_t seed) {
    const int n = params.n;
    SplitMix64 rng(seed);
    double worst_excursion = 0.0;   // relative to N_k, positive = outside B
    double worst_drift = 0.0;       // conservation defect relative to N_k

    SimOptions opts;
    opts.step.h = step;
    opts.t_end = horizon;
    opts.stop_on_eradication = false;
    opts.clip_to_box = false;  // certify the raw flow, do not mask excursions

    for (int run = 0; run < runs; ++run) {
        const StateVec x0 = random_state(params, rng);
        const PiecewiseInput input = random_input(params, horizon, 5.0, 0.1, rng);
        const Controller ctrl = [&input](double t, const StateVec&) { return input(t); };
        const Trajectory traj = simulate_plant(params, x0, ctrl, opts);
        for (const auto& x : traj.states) {
            for (int k = 0; k < n; ++k) {
                const double nk = params.populations[k];
                double total = 0.0;
                for (int comp = 0; comp < 4; ++comp) {
                    const double v = x[comp * n + k];
                    worst_excursion = std::max(worst_excursion, (-v) / nk);
                    worst_excursion = std::max(worst_excursion, (v - nk) / nk);
                    total += v;
                }
                worst_drift = std::max(worst_drift, std::abs(total - nk) / nk);
            }
        }
    }

    InvarianceCert cert;
    cert.invariance.pass = worst_excursion < 1e-6;
    cert.invariance.margin = 1e-6 - worst_excursion;
    cert.invariance.detail = std::to_string(runs) + " runs, worst relative excursion " +
                             fmt(worst_excursion);
    cert.conservation.pass = worst_drift < 1e-8;
    cert.conservation.margin = 1e-8 - worst_drift;
    cert.conservation.detail = "worst relative drift " + fmt(worst_drift);
    return cert;
}

CertResult cert_essential_nonnegativity(const ModelParams& params, int samples,
                                        std::uint64_t seed) {
    const int n = params.n;
    SplitMix64 rng(seed);
    double worst = std::numeric_limits<double>::infinity();  // min boundary derivative
    for (int s = 0; s < samples; ++s) {
        StateVec st = random_state(params, rng);
        const int comp = rng.uniform_int(0, 3);
        const int k = rng.uniform_int(0, n - 1);
        (comp == 0 ? st.s : comp == 1 ? st.i : comp == 2 ? st.r : st.d)[k] = 0.0;
        Eigen::VectorXd theta(n);
        for (int j = 0; j < n; ++j) theta[j] = rng.uniform(0.0, 0.1);
        const Eigen::VectorXd dx = sird_rhs(st, theta, params);
        worst = std::min(worst, dx[comp * n + k] / params.populations[k]);
    }
    CertResult out;
    out.pass = worst >= -1e-12;
    out.margin = worst + 1e-12;
    out.detail = "min boundary derivative (relative) " + fmt(worst);
    return out;
}

CertResult cert_invariant_box(const ModelParams& params, const SatConfig& cfg,
                                    int starts, double horizon, double step,
                                    std::uint64_t seed) {
    const int n = params.n;
    SplitMix64 rng(seed);
    SimOptions opts;
    opts.step.h = step;
    opts.t_end = horizon;
    opts.stop_on_eradication = false;
    opts.clip_to_box = false;

    double worst = 0.0;  // excursion beyond the invariant box, relative to N_k
    for (int s = 0; s < starts; ++s) {
        const int k = s % n;
        StateVec st = random_state(params, rng);
        if (rng.uniform() < 0.5) {
            st.s[k] = cfg.s_lo[k];
            st.i[k] = rng.uniform(0.0, cfg.i_lo[k]);
        } else {
            st.i[k] = cfg.i_lo[k];
            st.s[k] = rng.uniform(0.0, cfg.s_lo[k]);
        }
        const double rest = params.populations[k] - st.s[k] - st.i[k];
        const double d_share = rng.uniform();
        st.d[k] = rest * d_share;
        st.r[k] = rest - st.d[k];

        const PiecewiseInput input = random_input(params, horizon, 5.0, 0.1, rng);
        const Controller ctrl = [&input](double t, const StateVec&) { return input(t); };
        const Trajectory traj = simulate_plant(params, st, ctrl, opts);
        for (const auto& x : traj.states) {
            const double nk = params.populations[k];
            worst = std::max(worst, (x[k] - cfg.s_lo[k]) / nk);
            worst = std::max(worst, (x[n + k] - cfg.i_lo[k]) / nk);
            worst = std::max(worst, -x[k] / nk);
            worst = std::max(worst, -x[n + k] / nk);
        }
    }
    CertResult out;
    out.pass = worst < 1e-9;
    out.margin = 1e-9 - worst;
    out.detail = std::to_string(starts) + " boundary starts, worst excursion " + fmt(worst);
    return out;
}

LinearizationCert cert_linearization(const Scenario& scenario, const ControllerSetup& setup) {
    const ModelParams& params = scenario.params;
    const int n = params.n;
    const RunResult run = run_controller(scenario, setup, ControllerKind::Linearizing);
    const Trajectory& traj = run.traj;

    const StateVec x0 = StateVec::from_flat(traj.states.front(), traj.times.front());
    const Eigen::VectorXd f0 = lift_f(x0, params);
    const double window_end =
        run.leave_d_time.value_or(std::numeric_limits<double>::infinity());

    // Analytic reference of the decoupled closed loop per class.
    std::vector<std::vector<double>> reference(n);
    std::size_t window_samples = 0;
    for (std::size_t idx = 0; idx < traj.size(); ++idx) {
        if (traj.times[idx] >= window_end) break;  // window_end is the first sample outside D
        window_samples = idx + 1;
    }
    Eigen::VectorXd ref_peak = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < n; ++k) {
        reference[k].resize(window_samples);
        const Eigen::Vector2d z0(x0.i[k], f0[k]);
        for (std::size_t idx = 0; idx < window_samples; ++idx) {
            const Eigen::Vector2d z =
                companion_exp(setup.gains.alpha1[k], setup.gains.alpha2[k], traj.times[idx]) *
                z0;
            reference[k][idx] = z[0];
            ref_peak[k] = std::max(ref_peak[k], std::abs(z[0]));
        }
    }

    LinearizationCert cert;
    double worst_rel = 0.0;
    for (int k = 0; k < n; ++k) {
        for (std::size_t idx = 0; idx < window_samples; ++idx) {
            const double ref = reference[k][idx];
            const double denom = std::max(std::abs(ref), 1e-3 * ref_peak[k]);
            if (denom == 0.0) continue;
            worst_rel = std::max(worst_rel,
                                 std::abs(traj.states[idx][n + k] - ref) / denom);
        }
    }
    cert.closed_loop_match.pass = worst_rel < 1e-4;
    cert.closed_loop_match.margin = 1e-4 - worst_rel;
    cert.closed_loop_match.detail =
        "worst relative deviation " + fmt(worst_rel) + " over " +
        std::to_string(window_samples) + " samples in D";

    const DecayEnvelope env = decay_envelope(setup.gains);
    double worst_ratio = 0.0;  // I_k(t) over its envelope, > 1 means violation
    bool used_generalized = false;
    for (int k = 0; k < n; ++k) {
        const bool generalized = x0.i[k] == 0.0;
        used_generalized = used_generalized || generalized;
        const double scale = generalized ? std::abs(f0[k]) : x0.i[k];
        if (scale == 0.0) continue;
        for (std::size_t idx = 0; idx < window_samples; ++idx) {
            const double bound = env.c[k] * scale *
                                 std::exp(-env.mu[k] * (traj.times[idx] - traj.times[0])) *
                                 (1.0 + 1e-3);
            worst_ratio = std::max(worst_ratio, traj.states[idx][n + k] / bound);
        }
    }
    cert.envelope.pass = worst_ratio <= 1.0;
    cert.envelope.margin = 1.0 - worst_ratio;
    cert.envelope.detail = "worst envelope utilization " + fmt(worst_ratio) +
                           (used_generalized ? " (|f_k(x0)| scale for classes with I_k(0)=0)"
                                             : "");

    cert.eradication_time = traj.eradication_time();
    cert.leave_d_time = run.leave_d_time;
    cert.peak_total = run.summary.peak_total_infected;
    return cert;
}

CertResult cert_theta_nonnegativity(const ModelParams& params, const LinGains& gains,
                                    int samples, std::uint64_t seed) {
    SplitMix64 rng(seed);
    const double floor = default_region_floor(params);
    double worst = std::numeric_limits<double>::infinity();
    int accepted = 0;
    int attempts = 0;
    const int max_attempts = 50 * samples;
    while (accepted < samples && attempts < max_attempts) {
        ++attempts;
        const StateVec st = random_state(params, rng);
        if (!in_set_D(st, params, floor)) continue;
        ++accepted;
        const Eigen::VectorXd theta = unconstrained_theta(st, gains, params);
        worst = std::min(worst, theta.minCoeff());
    }
    CertResult out;
    out.pass = accepted == samples && worst >= -1e-12;
    out.margin = worst + 1e-12;
    out.detail = "min theta over " + std::to_string(accepted) + " states in B cap D: " +
                 fmt(worst);
    return out;
}

LipschitzCert cert_lipschitz(const ModelParams& params, const LinGains& gains,
                             const SatConfig& cfg, double margin, int pairs_per_class,
                             std::uint64_t seed) {
    const int n = params.n;
    LipschitzCert cert;
    double worst_q = 0.0, worst_bar = 0.0, worst_prod = 0.0, worst_sat = 0.0;

    for (int k = 0; k < n; ++k) {
        const AppendixConstants assembled =
            assemble_lipschitz_constants(params, gains, cfg, k, margin);
        const double nk = params.populations[k];

        {  // blend factor, function of (S_k, I_k)
            BoxDomain box;
            box.lo = Eigen::Vector2d(cfg.s_lo[k], cfg.i_lo[k]);
            box.hi = Eigen::Vector2d(nk, nk);
            const auto fn = [&](const Eigen::VectorXd& x) {
                return q_blend(x[0], x[1], cfg, k);
            };
            const std::vector<BoundaryHint> hints{{0, cfg.s_hi[k]}, {1, cfg.i_hi[k]}};
            const double emp =
                lipschitz_estimate(fn, box, pairs_per_class, seed + 11 * k, hints);
            worst_q = std::max(worst_q, emp / assembled.c_q);
        }

        // (S_k, I_1..I_n) boxes; other susceptibles fixed at their maxima,
        // which is where the raw law's coefficients peak.
        auto make_state = [&](const Eigen::VectorXd& x) {
            StateVec st;
            st.s = params.populations;
            st.s[k] = x[0];
            st.i = x.tail(n);
            st.r = Eigen::VectorXd::Zero(n);
            st.d = Eigen::VectorXd::Zero(n);
            return st;
        };
        BoxDomain bar_box;
        bar_box.lo = Eigen::VectorXd::Zero(n + 1);
        bar_box.hi.resize(n + 1);
        bar_box.lo[0] = cfg.s_lo[k];
        bar_box.hi[0] = nk;
        for (int j = 0; j < n; ++j) bar_box.hi[j + 1] = params.populations[j];
        bar_box.lo[k + 1] = cfg.i_lo[k];

        {
            const auto fn = [&](const Eigen::VectorXd& x) {
                return theta_bar(make_state(x), gains, params, cfg, k);
            };
            const double emp =
                lipschitz_estimate(fn, bar_box, pairs_per_class, seed + 11 * k + 1);
            worst_bar = std::max(worst_bar, emp / assembled.k1);
        }
        {
            const auto fn = [&](const Eigen::VectorXd& x) {
                const StateVec st = make_state(x);
                return q_blend(st.s[k], st.i[k], cfg, k) * theta_bar(st, gains, params, cfg, k);
            };
            const double emp =
                lipschitz_estimate(fn, bar_box, pairs_per_class, seed + 11 * k + 2);
            worst_prod = std::max(worst_prod, emp / assembled.l);
        }
        {
            BoxDomain sat_box = bar_box;
            sat_box.lo[0] = 0.0;
            sat_box.lo[k + 1] = 0.0;
            const auto fn = [&](const Eigen::VectorXd& x) {
                return theta_sat(make_state(x), gains, params, cfg)[k];
            };
            const std::vector<BoundaryHint> hints{{0, cfg.s_lo[k]},
                                                  {0, cfg.s_hi[k]},
                                                  {k + 1, cfg.i_lo[k]},
                                                  {k + 1, cfg.i_hi[k]}};
            const double emp =
                lipschitz_estimate(fn, sat_box, pairs_per_class, seed + 11 * k + 3, hints);
            worst_sat = std::max(worst_sat, emp / assembled.global);
        }
    }

    auto finish = [](CertResult& r, double worst_ratio, const char* what) {
        r.pass = worst_ratio <= 1.0;
        r.margin = 1.0 - worst_ratio;
        r.detail = std::string(what) + ": worst empirical/assembled = " + fmt(worst_ratio);
    };
    finish(cert.q_blend, worst_q, "blend q_k");
    finish(cert.theta_bar, worst_bar, "capped law");
    finish(cert.product, worst_prod, "q_k * capped law");
    finish(cert.theta_sat, worst_sat, "constrained law");
    return cert;
}

CertResult cert_phi_lipschitz(const ModelParams& params, double theta_sup, int pairs,
                              std::uint64_t seed) {
    const int n = params.n;
    SplitMix64 rng(seed);
    const Eigen::VectorXd m_bound = phi_lipschitz_bound(params, theta_sup);
    double worst_ratio = 0.0;
    for (int s = 0; s < pairs; ++s) {
        const ZState za = to_z(random_state(params, rng), params);
        const ZState zb = to_z(random_state(params, rng), params);
        Eigen::VectorXd u(n);
        for (int k = 0; k < n; ++k) u[k] = rng.uniform(0.0, theta_sup);
        const double dist = (za.z - zb.z).cwiseAbs().maxCoeff();
        if (dist <= 0.0) continue;
        const Eigen::VectorXd fa = phi(za, u, params);
        const Eigen::VectorXd fb = phi(zb, u, params);
        for (int k = 0; k < n; ++k) {
            worst_ratio = std::max(worst_ratio, std::abs(fa[k] - fb[k]) / dist / m_bound[k]);
        }
    }
    CertResult out;
    out.pass = worst_ratio <= 1.0;
    out.margin = 1.0 - worst_ratio;
    out.detail = "worst empirical/M over " + std::to_string(pairs) + " pairs: " +
                 fmt(worst_ratio);
    return out;
}

SwitchCert cert_switches(const Trajectory& traj, const SatConfig& cfg, int n) {
    SwitchCert cert;
    const SwitchReport report = count_switches(traj, cfg, n);
    cert.total_switches = report.total;

    const auto erad = traj.eradication_time();
    bool none_late = true;
    if (erad) {
        for (double t : report.times) {
            if (t > *erad + 1e-9) none_late = false;
        }
    }
    cert.finite_no_late.pass = none_late;
    cert.finite_no_late.margin = none_late ? 1.0 : -1.0;
    cert.finite_no_late.detail = std::to_string(report.total) + " switches" +
                                 (erad ? ", none after eradication" : ", no eradication");

    bool reactivated = false;
    for (int k = 0; k < n && !reactivated; ++k) {
        const bool initial_on = traj.states.front()[k] >= cfg.s_lo[k] &&
                                traj.states.front()[n + k] >= cfg.i_lo[k];
        const std::size_t needed = initial_on ? 2 : 3;
        reactivated = report.per_class[k].size() >= needed;
    }
    cert.reactivation.pass = reactivated;
    cert.reactivation.margin = reactivated ? 1.0 : -1.0;
    cert.reactivation.detail = reactivated ? "some class switches off then on again"
                                           : "no off->on reactivation observed";
    return cert;
}

ObserverCert cert_observer(const Scenario& scenario, const ControllerSetup& setup,
                           double peak_saturated, double peak_open) {
    const ModelParams& params = scenario.params;
    const int n = params.n;

    ControllerSetup tuned = setup;
    tuned.observer.epsilon = std::min(0.01, setup.epsilon_star_value);

    const RunResult run = run_controller(scenario, tuned, ControllerKind::Observer);
    const Trajectory& traj = run.traj;

    ObserverCert cert;
    cert.epsilon_used = tuned.observer.epsilon;
    cert.epsilon_star = setup.epsilon_star_value;
    cert.peak_total = run.summary.peak_total_infected;

    for (const auto& x : traj.states) {
        for (int k = 0; k < n; ++k) {
            const double total = x[k] + x[n + k] + x[2 * n + k] + x[3 * n + k];
            cert.worst_conservation_drift =
                std::max(cert.worst_conservation_drift,
                         std::abs(total - params.populations[k]) / params.populations[k]);
        }
    }
    {
        const LasalleReport rep = lasalle_check(traj, params);
        cert.dissipation.pass = rep.all_pass();
        cert.dissipation.margin = rep.dv_tolerance - rep.worst_dv_mismatch;
        cert.dissipation.detail =
            rep.all_pass() ? "dissipation identity holds on the observer run"
                           : "observer run: " + rep.violation;
    }

    // Estimation error in z at day 5.
    double z_scale = 0.0;
    for (int k = 0; k < n; ++k) {
        z_scale = std::max(z_scale, params.gamma_d[k] * params.populations[k]);
    }
    const double threshold = 1e-3 * z_scale;
    std::size_t at5 = traj.size() - 1;
    for (std::size_t idx = 0; idx < traj.size(); ++idx) {
        if (traj.times[idx] >= 5.0) {
            at5 = idx;
            break;
        }
    }
    const ZState z_true = to_z(StateVec::from_flat(traj.states[at5], traj.times[at5]), params);
    const double err = (z_true.z - traj.estimates[at5]).cwiseAbs().maxCoeff();
    cert.error_at_5_days.pass = err <= threshold;
    cert.error_at_5_days.margin = (threshold - err) / threshold;
    cert.error_at_5_days.detail = "||z - zhat||_inf at day " + fmt(traj.times[at5]) + " = " +
                                  fmt(err) + " (threshold " + fmt(threshold) + ")";

    // Lyapunov function decrease after the initial transient.
    const Eigen::MatrixXd& p = setup.lyapunov.p;
    std::vector<double> v(traj.size());
    for (std::size_t idx = 0; idx < traj.size(); ++idx) {
        const Eigen::VectorXd& x = traj.states[idx];
        const ZState zt = to_z(StateVec::from_flat(x, traj.times[idx]), params);
        const Eigen::VectorXd eta =
            scaled_error(zt, ZState{traj.estimates[idx]}, tuned.observer.epsilon);
        v[idx] = x.segment(0, 3 * n).sum() + eta.dot(p * eta);
    }
    const double h = scenario.step;
    const double transient_end = 1.0;
    // Measurement floor of the sampled derivative on a population-scale V.
    const double slack = 1e-8 + 4.0 * 2.2e-16 * v.front() / h;
    double worst_rise = -std::numeric_limits<double>::infinity();
    for (std::size_t idx = 1; idx < traj.size(); ++idx) {
        if (traj.times[idx - 1] < transient_end) continue;
        worst_rise = std::max(worst_rise, (v[idx] - v[idx - 1]) / h);
    }
    cert.lyapunov_decrease.pass = worst_rise <= slack;
    cert.lyapunov_decrease.margin = slack - worst_rise;
    cert.lyapunov_decrease.detail = "max sampled dV/dt after day 1: " + fmt(worst_rise) +
                                    " (slack " + fmt(slack) + ")";

    // Pointwise attractivity: at the end of the run the transformed plant
    // state has z2, z3 at noise level and z1 (cumulative deaths) settled.
    {
        double worst = 0.0;
        const Eigen::VectorXd& x_end = traj.states.back();
        const ZState z_end = to_z(StateVec::from_flat(x_end, traj.times.back()), params);
        std::size_t quarter = traj.size() - 1;
        const double t_tail = traj.times.back() - 0.25 * traj.times.back();
        for (std::size_t idx = 0; idx < traj.size(); ++idx) {
            if (traj.times[idx] >= t_tail) {
                quarter = idx;
                break;
            }
        }
        for (int k = 0; k < n; ++k) {
            const double scale = params.gamma_d[k] * params.populations[k];
            worst = std::max(worst, std::abs(z_end.at(k, 1)) / scale);
            worst = std::max(worst, std::abs(z_end.at(k, 2)) / scale);
            const double settle =
                std::abs(x_end[3 * n + k] - traj.states[quarter][3 * n + k]) /
                params.populations[k];
            worst = std::max(worst, settle);
        }
        cert.attractivity.pass = worst <= 1e-3;
        cert.attractivity.margin = 1e-3 - worst;
        cert.attractivity.detail =
            "max of final |z2|,|z3| (gamma_d N scale) and last-quarter z1 drift: " +
            fmt(worst);
    }

    const double peak = cert.peak_total;
    cert.peak_ordering.pass = peak >= peak_saturated && peak < peak_open;
    cert.peak_ordering.margin =
        std::min(peak - peak_saturated, peak_open - peak) / std::max(peak_open, 1e-300);
    cert.peak_ordering.detail = "peaks: saturated " + fmt(peak_saturated) + " <= observer " +
                                fmt(peak) + " < open " + fmt(peak_open);
    return cert;
}

PeakReductionCert cert_peak_reduction(int grid, const StepSpec& step) {
    ModelParams params;
    params.n = 1;
    params.lambda = 0.5;
    params.contact = Eigen::MatrixXd::Constant(1, 1, 2.0);
    params.populations = Eigen::VectorXd::Constant(1, 10000.0);
    params.gamma_r = Eigen::VectorXd::Constant(1, 0.3);
    params.gamma_d = Eigen::VectorXd::Constant(1, 0.001);
    params.immun_prob = Eigen::VectorXd::Ones(1);
    const double gamma = params.removal_rate(0);
    const double alpha = params.lambda * params.contact(0, 0) / params.populations[0];
    const double s_hat = gamma / alpha;

    const std::vector<InputProfile> profiles{{"pulse_0.01x5d", 0.01, 5.0},
                                             {"pulse_0.05x3d", 0.05, 3.0},
                                             {"pulse_0.02x10d", 0.02, 10.0},
                                             {"zero", 0.0, 0.0}};

    PeakReductionCert cert;
    double min_reduction = std::numeric_limits<double>::infinity();
    double worst_cross = -std::numeric_limits<double>::infinity();
    double worst_integral = -std::numeric_limits<double>::infinity();

    for (int gi = 0; gi < grid; ++gi) {
        const double i0 = 1.0 + (50.0 - 1.0) * gi / (grid - 1);
        for (int gs = 0; gs < grid; ++gs) {
            const double s0 = s_hat * (1.2 + (2.8 - 1.2) * gs / (grid - 1));
            const PeakComparison table = peak_comparison_n1(params, profiles, i0, s0, step);
            cert.worst_conservation_drift =
                std::max(cert.worst_conservation_drift, table.worst_conservation_drift);

            auto check_crossing = [&](double s_at_peak, double i_peak, double theta_at_peak) {
                const double s_dot = std::abs(-alpha * i_peak * s_at_peak -
                                              params.immun_prob[0] * theta_at_peak * s_at_peak);
                const double bound = 2.0 * step.h * s_dot;
                worst_cross = std::max(worst_cross, std::abs(s_at_peak - s_hat) - bound);
            };
            check_crossing(table.zero_input_s_at_peak, table.zero_input_peak, 0.0);

            for (const auto& row : table.rows) {
                const InputProfile* profile = nullptr;
                for (const auto& pr : profiles) {
                    if (pr.name == row.name) profile = &pr;
                }
                if (profile->positive_initially()) {
                    min_reduction = std::min(
                        min_reduction, (table.zero_input_peak - row.peak) / table.zero_input_peak);
                }
                check_crossing(row.s_at_peak, row.peak, profile->theta(row.peak_time));
                worst_integral = std::max(worst_integral,
                                          row.integral_residual - 1e-3 * row.peak);
            }
        }
    }

    cert.peak_reduction.pass = min_reduction > 0.0;
    cert.peak_reduction.margin = min_reduction;
    cert.peak_reduction.detail = "min relative peak reduction " + fmt(min_reduction);
    cert.crossing_identity.pass = worst_cross <= 0.0;
    cert.crossing_identity.margin = -worst_cross;
    cert.crossing_identity.detail =
        "worst |S(t_m) - gamma/alpha| beyond 2h|dS/dt|: " + fmt(worst_cross);
    cert.integral_identity.pass = worst_integral <= 0.0;
    cert.integral_identity.margin = -worst_integral;
    cert.integral_identity.detail =
        "worst integral-identity residual beyond 1e-3 I_max: " + fmt(worst_integral);
    return cert;
}

}  // namespace epictrl
