#include "epictrl/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "epictrl/csv.hpp"
#include "epictrl/rng.hpp"

namespace epictrl {

namespace fs = std::filesystem;
using nlohmann::json;

ControllerSetup make_controller_setup(const Scenario& scenario) {
    ControllerSetup setup;
    setup.gains = select_gains(scenario.params, scenario.margin);
    setup.sat = make_sat_config(scenario.params, scenario.i_lo, scenario.theta_sup);
    if (scenario.s_lo_override) setup.sat.s_lo = *scenario.s_lo_override;
    if (scenario.s_hi_override) setup.sat.s_hi = *scenario.s_hi_override;
    if (scenario.i_hi_override) setup.sat.i_hi = *scenario.i_hi_override;

    setup.observer.beta = scenario.beta;
    setup.lyapunov = solve_lyapunov(setup.observer);
    const double m_lip = phi_lipschitz_bound(scenario.params, scenario.theta_sup).maxCoeff();
    setup.epsilon_star_value = epsilon_star(setup.lyapunov, m_lip);
    setup.observer.epsilon = scenario.epsilon.value_or(setup.epsilon_star_value);
    return setup;
}

namespace {

SimOptions base_options(const Scenario& scenario) {
    SimOptions opts;
    opts.step.h = scenario.step;
    opts.t_end = scenario.horizon;
    opts.stop_on_eradication = true;
    return opts;
}

RunResult run_linearizing(const Scenario& scenario, const ControllerSetup& setup) {
    const ModelParams& params = scenario.params;
    const int n = params.n;
    const StateVec x0 = make_initial_state(params, scenario.i0, scenario.r0, scenario.d0);
    const double h = scenario.step;
    const Eigen::MatrixXd c = contact_normalized(params);
    // The cancelled closed-loop field divides by the per-class infection
    // pressure; stop when it degrades below a relative floor.
    Eigen::VectorXd force_floor(n);
    for (int k = 0; k < n; ++k) {
        force_floor[k] = 1e-12 * (c.row(k) * params.populations)(0);
    }

    const VectorField field = [&](double t, const Eigen::VectorXd& x) {
        return linearized_closed_loop_rhs(StateVec::from_flat(x, t), setup.gains, params);
    };

    RunResult result;
    result.kind = ControllerKind::Linearizing;
    Trajectory& traj = result.traj;
    double t = 0.0;
    Eigen::VectorXd x = x0.to_flat();
    const double d_floor = default_region_floor(params);

    auto record = [&]() {
        const StateVec st = StateVec::from_flat(x, t);
        traj.times.push_back(t);
        traj.states.push_back(x);
        traj.controls.push_back(unconstrained_theta_or_inf(st, setup.gains, params));
        if (!result.leave_d_time && !in_set_D(st, params, d_floor)) {
            result.leave_d_time = t;
        }
    };
    record();

    while (t < scenario.horizon - 1e-12) {
        const StateVec st = StateVec::from_flat(x, t);
        const Eigen::VectorXd force = c * st.i;
        bool degenerate = false;
        for (int k = 0; k < n; ++k) {
            if (force[k] < force_floor[k]) degenerate = true;
        }
        if (degenerate) break;
        const double step = std::min(h, scenario.horizon - t);
        Eigen::VectorXd k1 = field(t, x);
        Eigen::VectorXd k2 = field(t + 0.5 * step, x + 0.5 * step * k1);
        Eigen::VectorXd k3 = field(t + 0.5 * step, x + 0.5 * step * k2);
        Eigen::VectorXd k4 = field(t + step, x + step * k3);
        x += (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!x.allFinite()) {
            throw IntegrationError("linearizing run produced a non-finite state at t=" +
                                   std::to_string(t + step));
        }
        t += step;
        record();
        if (eradication_stop(x, n)) {
            traj.events.push_back({t, EventKind::Eradication, -1});
            break;
        }
    }
    result.summary = summarize(traj, params, &setup.gains);
    return result;
}

}  // namespace

RunResult run_controller(const Scenario& scenario, const ControllerSetup& setup,
                         ControllerKind kind) {
    const ModelParams& params = scenario.params;
    const int n = params.n;

    if (kind == ControllerKind::Linearizing) return run_linearizing(scenario, setup);

    const StateVec x0 = make_initial_state(params, scenario.i0, scenario.r0, scenario.d0);
    SimOptions opts = base_options(scenario);

    RunResult result;
    result.kind = kind;

    if (kind == ControllerKind::None) {
        const Controller zero = [n](double, const StateVec&) {
            return Eigen::VectorXd::Zero(n);
        };
        result.traj = simulate_plant(params, x0, zero, opts);
    } else if (kind == ControllerKind::Saturated) {
        const Controller ctrl = [&](double, const StateVec& st) {
            return theta_sat(st, setup.gains, params, setup.sat);
        };
        opts.region_predicate = [&](int k, const StateVec& st) {
            return st.s[k] >= setup.sat.s_lo[k] && st.i[k] >= setup.sat.i_lo[k];
        };
        result.traj = simulate_plant(params, x0, ctrl, opts);
    } else {  // Observer
        const StateVec xhat0 = make_initial_state(params, scenario.i0_hat,
                                                  Eigen::VectorXd::Zero(n),
                                                  Eigen::VectorXd::Zero(n));
        const ZState zhat0 = to_z(xhat0, params);
        const double eps = setup.observer.epsilon;
        // Observer error poles sit at O(1/eps); keep the RK4 substep inside
        // their stability region.
        opts.substeps = std::max(1, static_cast<int>(std::ceil(8.0 * opts.step.h / eps)));
        const auto input = [&](const Eigen::VectorXd& zhat) {
            return output_u(ZState{zhat}, params, setup.gains, setup.sat);
        };
        const auto obs_field = [&](const Eigen::VectorXd& zhat, const Eigen::VectorXd& y) {
            return observer_rhs(ZState{zhat}, y, params, setup.observer, setup.gains,
                                setup.sat);
        };
        result.traj = simulate_coupled(params, x0, zhat0.z, input, obs_field, opts);
    }

    result.summary = summarize(result.traj, params,
                               kind == ControllerKind::Linearizing ? &setup.gains : nullptr);
    return result;
}

namespace {

// Vaccination inflow p_k theta_k S_k per class at one sample; the
// linearizing run uses the cancelled form, which stays finite where the
// recorded theta is infinite.
Eigen::VectorXd vaccination_flow(const ModelParams& params, const ControllerSetup& setup,
                                 ControllerKind kind, const StateVec& st,
                                 const Eigen::VectorXd& theta) {
    const int n = params.n;
    Eigen::VectorXd flow(n);
    if (kind == ControllerKind::Linearizing) {
        const Eigen::VectorXd dx = linearized_closed_loop_rhs(st, setup.gains, params);
        for (int k = 0; k < n; ++k) {
            flow[k] = dx[2 * n + k] - params.gamma_r[k] * st.i[k];
        }
    } else {
        for (int k = 0; k < n; ++k) {
            flow[k] = params.immun_prob[k] * theta[k] * st.s[k];
        }
    }
    return flow;
}

void write_gnuplot_script(const std::string& dir, const std::string& name,
                          const std::string& csv, int columns, const std::string& ylabel) {
    std::ofstream out(dir + "/" + name + ".gp");
    out << "set datafile separator ','\n"
        << "set key autotitle columnhead\n"
        << "set xlabel 'time (days)'\n"
        << "set ylabel '" << ylabel << "'\n"
        << "set terminal pngcairo size 960,640\n"
        << "set output '" << name << ".png'\n"
        << "plot for [i=2:" << columns << "] '" << csv
        << "' using 1:i with lines lw 2\n";
}

}  // namespace

void write_run_outputs(const std::string& dir, const Scenario& scenario,
                       const ControllerSetup& setup, const RunResult& result) {
    const ModelParams& params = scenario.params;
    const int n = params.n;
    fs::create_directories(dir);

    auto label = [&](int k) {
        return k < static_cast<int>(scenario.class_labels.size())
                   ? scenario.class_labels[k]
                   : "class" + std::to_string(k + 1);
    };

    // trajectory.csv
    {
        std::vector<std::string> header{"t"};
        for (const char* comp : {"S", "I", "R", "D"}) {
            for (int k = 0; k < n; ++k) header.push_back(std::string(comp) + std::to_string(k + 1));
        }
        for (int k = 0; k < n; ++k) header.push_back("theta" + std::to_string(k + 1));
        const bool with_estimates = !result.traj.estimates.empty();
        if (with_estimates) {
            for (int k = 0; k < n; ++k) {
                for (int level = 1; level <= 3; ++level) {
                    header.push_back("zhat" + std::to_string(level) + "_" +
                                     std::to_string(k + 1));
                }
            }
        }
        std::vector<std::vector<double>> rows;
        rows.reserve(result.traj.size());
        for (std::size_t idx = 0; idx < result.traj.size(); ++idx) {
            std::vector<double> row;
            row.push_back(result.traj.times[idx]);
            const Eigen::VectorXd& x = result.traj.states[idx];
            for (int c = 0; c < 4 * n; ++c) row.push_back(x[c]);
            const Eigen::VectorXd& theta = result.traj.controls[idx];
            for (int k = 0; k < n; ++k) row.push_back(theta[k]);
            if (with_estimates) {
                const Eigen::VectorXd& z = result.traj.estimates[idx];
                for (int c = 0; c < 3 * n; ++c) row.push_back(z[c]);
            }
            rows.push_back(std::move(row));
        }
        write_csv(dir + "/trajectory.csv", header, rows);
    }

    // events.csv
    {
        std::ofstream out(dir + "/events.csv");
        out << "time,kind,class\n";
        for (const auto& ev : result.traj.events) {
            out << format_double(ev.time) << ',' << event_kind_name(ev.kind) << ','
                << ev.cls << '\n';
        }
    }

    // summary.json
    {
        const RunSummary& s = result.summary;
        json j;
        j["scenario"] = scenario.name;
        j["controller"] = controller_name(result.kind);
        j["peak_total_infected"] = s.peak_total_infected;
        j["peak_per_class"] = std::vector<double>(s.peak_per_class.data(),
                                                  s.peak_per_class.data() + n);
        if (s.eradication_time) {
            j["eradication_time"] = *s.eradication_time;
        } else {
            j["eradication_time"] = nullptr;
        }
        j["final_dead"] = std::vector<double>(s.final_dead.data(), s.final_dead.data() + n);
        std::vector<double> dead_prop(n);
        for (int k = 0; k < n; ++k) dead_prop[k] = s.final_dead[k] / params.populations[k];
        j["final_dead_proportion"] = dead_prop;
        j["switch_count"] = s.switch_count;
        if (!s.decay_fit.empty()) {
            json fits = json::array();
            for (const auto& fit : s.decay_fit) {
                fits.push_back({{"c", fit.c},
                                {"mu", fit.mu},
                                {"satisfied", fit.satisfied},
                                {"generalized_scale", fit.generalized_scale}});
            }
            j["decay_fit"] = fits;
        }
        if (result.leave_d_time) j["leave_d_time"] = *result.leave_d_time;
        if (result.kind == ControllerKind::Observer) {
            j["epsilon"] = setup.observer.epsilon;
            j["epsilon_star"] = setup.epsilon_star_value;
        }
        std::ofstream out(dir + "/summary.json");
        out << j.dump(2) << '\n';
    }

    // figure data + gnuplot scripts
    {
        std::vector<std::string> header{"t"};
        for (int k = 0; k < n; ++k) header.push_back("inf_prop_" + label(k));
        header.push_back("inf_prop_total");
        std::vector<std::vector<double>> rows;
        const double total_pop = params.populations.sum();
        for (std::size_t idx = 0; idx < result.traj.size(); ++idx) {
            std::vector<double> row{result.traj.times[idx]};
            const Eigen::VectorXd& x = result.traj.states[idx];
            for (int k = 0; k < n; ++k) row.push_back(x[n + k] / params.populations[k]);
            row.push_back(x.segment(n, n).sum() / total_pop);
            rows.push_back(std::move(row));
        }
        write_csv(dir + "/fig_infected_proportion.csv", header, rows);
        write_gnuplot_script(dir, "fig_infected_proportion", "fig_infected_proportion.csv",
                             n + 2, "proportion of infected");
    }
    {
        std::vector<std::string> header{"t"};
        for (int k = 0; k < n; ++k) header.push_back("theta_" + label(k));
        std::vector<std::vector<double>> rows;
        for (std::size_t idx = 0; idx < result.traj.size(); ++idx) {
            std::vector<double> row{result.traj.times[idx]};
            for (int k = 0; k < n; ++k) row.push_back(result.traj.controls[idx][k]);
            rows.push_back(std::move(row));
        }
        write_csv(dir + "/fig_control.csv", header, rows);
        write_gnuplot_script(dir, "fig_control", "fig_control.csv", n + 1,
                             "vaccination rate (1/day)");
    }
    {
        std::vector<std::string> header{"t", "vaccinated_percent_per_day"};
        std::vector<std::vector<double>> rows;
        const double total_pop = params.populations.sum();
        for (std::size_t idx = 0; idx < result.traj.size(); ++idx) {
            const StateVec st =
                StateVec::from_flat(result.traj.states[idx], result.traj.times[idx]);
            const Eigen::VectorXd flow = vaccination_flow(params, setup, result.kind, st,
                                                          result.traj.controls[idx]);
            rows.push_back({result.traj.times[idx], flow.sum() / total_pop * 100.0});
        }
        write_csv(dir + "/fig_vaccinated_percent.csv", header, rows);
        write_gnuplot_script(dir, "fig_vaccinated_percent", "fig_vaccinated_percent.csv", 2,
                             "% of population vaccinated per day");
    }
}

RunCertificates run_scenario(const Scenario& scenario, const std::string& out_dir,
                             RunResult* result_out) {
    const ControllerSetup setup = make_controller_setup(scenario);
    RunResult result = run_controller(scenario, setup, scenario.controller);
    write_run_outputs(out_dir, scenario, setup, result);

    const ModelParams& params = scenario.params;
    const int n = params.n;
    RunCertificates certs;

    // The exact law's invariance and dissipation guarantees hold while the
    // state stays in D; the run past that boundary (linearizing mode only)
    // is an explicit continuation outside them.
    Trajectory guaranteed = result.traj;
    if (result.kind == ControllerKind::Linearizing && result.leave_d_time) {
        const double cut = *result.leave_d_time;  // first sample outside D
        std::size_t keep = 0;
        while (keep < guaranteed.size() && guaranteed.times[keep] < cut) ++keep;
        guaranteed.times.resize(keep);
        guaranteed.states.resize(keep);
        guaranteed.controls.resize(keep);
    }

    certs.in_box = true;
    for (const auto& x : guaranteed.states) {
        for (int k = 0; k < n && certs.in_box; ++k) {
            const double tol = 1e-6 * params.populations[k];
            for (int comp = 0; comp < 4; ++comp) {
                const double v = x[comp * n + k];
                if (v < -tol || v > params.populations[k] + tol) {
                    certs.in_box = false;
                    break;
                }
            }
        }
    }

    // Conservation has no such caveat; check the full run.
    for (const auto& x : result.traj.states) {
        for (int k = 0; k < n; ++k) {
            const double total = x[k] + x[n + k] + x[2 * n + k] + x[3 * n + k];
            const double drift = std::abs(total - params.populations[k]) /
                                 params.populations[k];
            certs.worst_conservation = std::max(certs.worst_conservation, drift);
        }
    }
    certs.conserved = certs.worst_conservation < 1e-8;

    certs.lasalle = guaranteed.size() >= 3 && lasalle_check(guaranteed, params).all_pass();

    if (result_out != nullptr) *result_out = std::move(result);
    return certs;
}

std::vector<CompareRow> compare_controllers(const Scenario& scenario,
                                            const std::vector<ControllerKind>& kinds) {
    const ControllerSetup setup = make_controller_setup(scenario);
    std::vector<CompareRow> rows;
    for (ControllerKind kind : kinds) {
        const RunResult result = run_controller(scenario, setup, kind);
        CompareRow row;
        row.kind = kind;
        row.peak_total = result.summary.peak_total_infected;
        row.eradication_time = result.summary.eradication_time;
        if (kind == ControllerKind::Saturated) {
            row.switches = count_switches(result.traj, setup.sat, scenario.params.n).total;
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace epictrl
