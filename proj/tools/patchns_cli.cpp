// Command-line driver: scenario runs, operator and identity
// verification, decay studies, and initial-data dumps.
//
// Exit codes: 0 success, 1 check failure, 2 configuration error,
// 3 numerical invalidity.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "patchns/verify.hpp"

using namespace patchns;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitNumerical = 3;

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int resolution_override = 0;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_config) {
    auto* copt = cmd->add_option("--config", o.config_path, "scenario configuration (JSON)");
    if (needs_config) copt->required();
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--seed", o.seed, "override the sampling seed")
        ->each([&o](const std::string&) { o.seed_set = true; });
    cmd->add_option("--resolution-override", o.resolution_override,
                    "override the grid resolution n");
    cmd->add_flag("--quiet", o.quiet, "suppress progress output");
}

ScenarioConfig load_with_overrides(const CommonOpts& o) {
    ScenarioConfig cfg = load_config(o.config_path);
    if (o.seed_set) cfg.seed = o.seed;
    if (o.resolution_override > 0) {
        if (!is_power_of_two(o.resolution_override))
            throw std::invalid_argument(
                "config: field 'resolution-override' must be a power of two");
        cfg.n = o.resolution_override;
    }
    return cfg;
}

void write_report(const std::string& out_dir, const std::string& name,
                  const std::vector<CheckResult>& checks) {
    std::filesystem::create_directories(out_dir);
    nlohmann::json j{{"tool", name},
                     {"version", kVersion},
                     {"all_pass", all_pass(checks)},
                     {"checks", checks_to_json(checks)}};
    std::ofstream out(out_dir + "/" + name + ".json");
    out << j.dump(2) << "\n";
}

void print_checks(const std::vector<CheckResult>& checks, bool quiet) {
    if (quiet) return;
    for (const auto& c : checks)
        std::printf("[%s] %-40s value %.6g (threshold %.6g)\n", c.pass ? "PASS" : "FAIL",
                    c.name.c_str(), c.value, c.threshold);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"2D periodic compressible flow with a transported density patch"};
    app.require_subcommand(1);

    CommonOpts run_o, vo_o, vi_o, ds_o, io_o;
    auto* cmd_run = app.add_subcommand("run", "integrate a scenario and stream diagnostics");
    add_common(cmd_run, run_o, true);

    auto* cmd_vo =
        app.add_subcommand("verify-operators", "Fourier multiplier and identity checks");
    add_common(cmd_vo, vo_o, false);

    auto* cmd_vi = app.add_subcommand(
        "verify-identities", "flux/vorticity representations and jump relations on a run");
    add_common(cmd_vi, vi_o, true);

    std::vector<std::string> p_args{"4", "inf"};
    auto* cmd_ds = app.add_subcommand("decay-study", "frozen-velocity jump decay fits");
    add_common(cmd_ds, ds_o, true);
    cmd_ds->add_option("--p", p_args, "curve norms to fit (numbers or 'inf')");

    auto* cmd_io = app.add_subcommand(
        "init-only", "build the initial state, dump checkpoint and smallness report");
    add_common(cmd_io, io_o, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_run->parsed()) {
            ScenarioConfig cfg = load_with_overrides(run_o);
            Runner runner(cfg, run_o.out_dir, run_o.quiet);
            RunSummary s = runner.run();
            if (!run_o.quiet)
                std::printf("status: %s (t = %.4f, %d steps)\n", s.status.c_str(),
                            s.final_time, s.steps);
            if (s.status == "completed") return kExitOk;
            return kExitNumerical;
        }
        if (cmd_vo->parsed()) {
            int n = vo_o.resolution_override > 0 ? vo_o.resolution_override : 64;
            auto checks = verify_operators(n, 2.0 * M_PI, vo_o.seed_set ? vo_o.seed : 1);
            print_checks(checks, vo_o.quiet);
            write_report(vo_o.out_dir, "verify_operators", checks);
            return all_pass(checks) ? kExitOk : kExitCheckFailed;
        }
        if (cmd_vi->parsed()) {
            ScenarioConfig cfg = load_with_overrides(vi_o);
            auto checks = verify_identities(cfg, vi_o.out_dir, vi_o.quiet);
            print_checks(checks, vi_o.quiet);
            write_report(vi_o.out_dir, "verify_identities", checks);
            return all_pass(checks) ? kExitOk : kExitCheckFailed;
        }
        if (cmd_ds->parsed()) {
            ScenarioConfig cfg = load_with_overrides(ds_o);
            std::vector<double> ps;
            for (const auto& a : p_args)
                ps.push_back(a == "inf" ? std::numeric_limits<double>::infinity()
                                        : std::stod(a));
            auto checks = decay_study(cfg, ps, ds_o.out_dir, ds_o.quiet);
            print_checks(checks, ds_o.quiet);
            write_report(ds_o.out_dir, "decay_study", checks);
            return all_pass(checks) ? kExitOk : kExitCheckFailed;
        }
        if (cmd_io->parsed()) {
            ScenarioConfig cfg = load_with_overrides(io_o);
            std::filesystem::create_directories(io_o.out_dir);
            auto laws =
                std::make_shared<ConstitutiveLaws>(ConstitutiveLaws::from_preset(cfg.laws));
            FluidState st = build_initial_state(cfg.patch, cfg.velocity, cfg.n, cfg.L, laws,
                                                cfg.particle_factor, cfg.markers);
            auto rep = smallness_report(st, cfg.alpha, cfg.seed, cfg.pair_budget,
                                        cfg.probe_r0(st.h()));
            io::write_checkpoint(io_o.out_dir + "/initial_state.pnsc", st);
            nlohmann::json j{{"c0", rep.c0},
                             {"u_h1_sq", rep.u_h1_sq},
                             {"rho_dev_l2", rep.rho_dev_l2},
                             {"rho_dev_pw_sup", rep.rho_dev_pw.sup},
                             {"rho_dev_pw_seminorm", rep.rho_dev_pw.seminorm()},
                             {"jump_rho_l4", rep.jump_rho_l4},
                             {"jump_rho_linf", rep.jump_rho_linf},
                             {"frak_p", rep.frak_p},
                             {"ell_phi", rep.ell},
                             {"composite_c338", rep.composite.value},
                             {"provenance",
                              {{"config_hash", config_hash(cfg)}, {"version", kVersion}}}};
            std::ofstream out(io_o.out_dir + "/smallness.json");
            out << j.dump(2) << "\n";
            if (!io_o.quiet) std::printf("c0 = %.6g\n", rep.c0);
            return kExitOk;
        }
    } catch (const invalid_state& e) {
        std::fprintf(stderr, "numerical invalidity: %s\n", e.what());
        return kExitNumerical;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    }
    return kExitOk;
}
