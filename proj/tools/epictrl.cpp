#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "epictrl/certificates.hpp"
#include "epictrl/csv.hpp"
#include "epictrl/runner.hpp"

namespace {

using namespace epictrl;

void print_vector(const char* name, const Eigen::VectorXd& v) {
    std::printf("%-18s", name);
    for (int k = 0; k < v.size(); ++k) std::printf(" %12.6g", v[k]);
    std::printf("\n");
}

int cmd_run(const std::string& scenario_path, const std::string& out_override) {
    const Scenario scenario = load_scenario(scenario_path);
    const std::string out_dir = out_override.empty() ? scenario.output_dir : out_override;
    RunResult result;
    const RunCertificates certs = run_scenario(scenario, out_dir, &result);

    std::printf("scenario   : %s\n", scenario.name.c_str());
    std::printf("controller : %s\n", controller_name(result.kind).c_str());
    std::printf("peak total infected proportion: %.6g\n",
                result.summary.peak_total_infected);
    if (result.summary.eradication_time) {
        std::printf("eradication after %.2f days\n", *result.summary.eradication_time);
    } else {
        std::printf("no eradication within the horizon\n");
    }
    if (result.leave_d_time) {
        std::printf("trajectory reached the boundary of D at day %.4f\n",
                    *result.leave_d_time);
    }
    std::printf("outputs in %s/\n", out_dir.c_str());
    std::printf("certificates: box=%s conservation=%s (drift %.3g) dissipation=%s\n",
                certs.in_box ? "pass" : "FAIL", certs.conserved ? "pass" : "FAIL",
                certs.worst_conservation, certs.lasalle ? "pass" : "FAIL");
    return certs.all_pass() ? 0 : 1;
}

int cmd_compare(const std::string& scenario_path, const std::string& controllers) {
    const Scenario scenario = load_scenario(scenario_path);
    std::vector<ControllerKind> kinds;
    std::string token;
    for (char ch : controllers + ",") {
        if (ch == ',') {
            if (!token.empty()) kinds.push_back(controller_from_name(token));
            token.clear();
        } else {
            token.push_back(ch);
        }
    }
    const auto rows = compare_controllers(scenario, kinds);
    std::printf("%-14s %-22s %-18s %s\n", "controller", "peak total proportion",
                "eradication (days)", "switches");
    for (const auto& row : rows) {
        std::printf("%-14s %-22.6g %-18s %d\n", controller_name(row.kind).c_str(),
                    row.peak_total,
                    row.eradication_time ? std::to_string(*row.eradication_time).c_str()
                                         : "-",
                    row.switches);
    }
    return 0;
}

int cmd_verify(const std::string& scenario_path, const std::string& suite) {
    const Scenario scenario = load_scenario(scenario_path);
    const VerifyReport report = verify_scenario(scenario, suite);
    for (const auto& item : report.items) {
        std::printf("[%s] %-45s margin=%-12.4g %s\n", item.pass ? "PASS" : "FAIL",
                    item.name.c_str(), item.margin, item.detail.c_str());
    }
    std::printf("%zu checks, %s\n", report.items.size(),
                report.all_pass() ? "all passed" : "FAILURES present");
    return report.all_pass() ? 0 : 1;
}

int cmd_gains(const std::string& scenario_path) {
    const Scenario scenario = load_scenario(scenario_path);
    const ControllerSetup setup = make_controller_setup(scenario);
    const ModelParams& params = scenario.params;

    std::printf("scenario %s: %d age classes\n\n", scenario.name.c_str(), params.n);
    print_vector("alpha1", setup.gains.alpha1);
    print_vector("alpha2", setup.gains.alpha2);
    const DecayEnvelope env = decay_envelope(setup.gains);
    print_vector("envelope C_k", env.c);
    print_vector("envelope mu_k", env.mu);

    std::printf("\nsaturation thresholds (theta_sup = %g):\n", setup.sat.theta_sup);
    print_vector("S lower", setup.sat.s_lo);
    print_vector("S upper", setup.sat.s_hi);
    print_vector("I lower", setup.sat.i_lo);
    print_vector("I upper", setup.sat.i_hi);

    std::printf("\nLipschitz constants per class (assembled bounds):\n");
    Eigen::VectorXd c_q(params.n), k1(params.n), global(params.n);
    for (int k = 0; k < params.n; ++k) {
        const AppendixConstants ac =
            assemble_lipschitz_constants(params, setup.gains, setup.sat, k, scenario.margin);
        c_q[k] = ac.c_q;
        k1[k] = ac.k1;
        global[k] = ac.global;
    }
    print_vector("blend C", c_q);
    print_vector("raw law K1", k1);
    print_vector("theta_sat", global);
    print_vector("phi bound M", phi_lipschitz_bound(params, scenario.theta_sup));

    std::printf("\nobserver: beta = (%g, %g, %g), Lyapunov residual %.3g\n",
                scenario.beta(0, 0), scenario.beta(0, 1), scenario.beta(0, 2),
                setup.lyapunov.residual);
    std::printf("epsilon* = %.6g, scenario epsilon = %s\n", setup.epsilon_star_value,
                scenario.epsilon ? std::to_string(*scenario.epsilon).c_str() : "auto");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Age-structured SIRD vaccination control toolkit"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir;
    std::string controllers = "none,linearizing,saturated,observer";
    std::string suite = "all";

    auto* run = app.add_subcommand("run", "simulate a scenario and write CSV/JSON outputs");
    run->add_option("scenario", scenario_path, "scenario file")->required();
    run->add_option("--out", out_dir, "output directory (defaults to the scenario's)");

    auto* compare = app.add_subcommand("compare", "peak/eradication table across controllers");
    compare->add_option("scenario", scenario_path, "scenario file")->required();
    compare->add_option("--controllers", controllers, "comma-separated controller list");

    auto* verify = app.add_subcommand("verify", "run a property-certificate suite");
    verify->add_option("scenario", scenario_path, "scenario file")->required();
    verify->add_option("--suite", suite,
                       "invariance|lasalle|linearization|lipschitz|observer|peak|all");

    auto* gains = app.add_subcommand("gains", "print controller and observer tuning");
    gains->add_option("scenario", scenario_path, "scenario file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(scenario_path, out_dir);
        if (compare->parsed()) return cmd_compare(scenario_path, controllers);
        if (verify->parsed()) return cmd_verify(scenario_path, suite);
        if (gains->parsed()) return cmd_gains(scenario_path);
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    }
    return 0;
}
