#include <cstdio>
#include <exception>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "blochdg/scenario.hpp"

namespace {

blochdg::ScenarioConfig load_with_overrides(const std::string& path,
                                            const std::vector<std::string>& overrides,
                                            std::uint64_t* seed_flag) {
    std::ifstream f(path);
    if (!f) throw blochdg::ConfigError("cannot open config file '" + path + "'");
    blochdg::json j;
    try {
        j = blochdg::json::parse(f);
    } catch (const blochdg::json::parse_error& e) {
        throw blochdg::ConfigError(path + ": " + e.what());
    }
    for (const auto& o : overrides) blochdg::apply_override(j, o);
    if (seed_flag) j["seed"] = *seed_flag;
    return blochdg::parse_config(j, path);
}

void print_series_summary(const blochdg::RunOutput& out) {
    for (const auto& [key, series] : out.series) {
        std::printf("%-24s frames=%zu plateau(ref)=%.9g\n", key.c_str(), series.magnitude.size(),
                    series.reference);
    }
    for (const auto& [key, e] : out.energy) {
        std::printf("energy %-17s %s (worst lhs/rhs %.9g)%s\n", key.c_str(),
                    e.pass ? "PASS" : "FAIL", e.worst_ratio,
                    e.conclusive ? "" : " [inconclusive]");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"blochdg: Bloch-equation spin dynamics on structured meshes"};
    app.require_subcommand(1);

    std::string config_path, output_dir = "out";
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", config_path, "scenario configuration (JSON)")->required();
        sub->add_option("--output-dir", output_dir, "directory for CSV outputs and the manifest");
        sub->add_option("--override", overrides, "config override key.path=value (repeatable)");
        sub->add_option("--seed", seed, "replaces the config seed")->each([&](const std::string&) {
            seed_set = true;
        });
        sub->add_option("--threads", threads, "cap for data-parallel loops (0 = hardware)");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "run the scenario in the config");
    add_common(simulate);
    CLI::App* convergence =
        app.add_subcommand("convergence", "grid-refinement study on the configured setup");
    add_common(convergence);
    CLI::App* steady =
        app.add_subcommand("steady-state", "compare simulated plateaus with the spoiled fixed point");
    add_common(steady);
    CLI::App* sweep = app.add_subcommand("sweep", "velocity sweep over velocity.sweep_mm_s");
    add_common(sweep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        blochdg::set_thread_limit(threads);
        auto cfg = load_with_overrides(config_path, overrides, seed_set ? &seed : nullptr);
        blochdg::RunOutput out;
        if (simulate->parsed()) {
            out = blochdg::run_scenario(cfg);
        } else if (convergence->parsed()) {
            out = blochdg::run_convergence(cfg);
            std::printf("observed order: %.3f%s\n", out.convergence.observed_order,
                        out.convergence.monotone ? "" : " (non-monotone errors!)");
            for (size_t i = 0; i < out.convergence.h.size(); ++i) {
                std::printf("  h=%-12.6g L2(My)=%-12.6g Linf=%.6g\n", out.convergence.h[i],
                            out.convergence.error[i], out.convergence.error_linf[i]);
            }
        } else if (steady->parsed()) {
            out = blochdg::run_steady_state_check(cfg);
            std::printf("max relative error vs fixed point: %.3e\n",
                        out.scalars.at("max_rel_err"));
        } else {
            out = blochdg::run_sweep(cfg);
        }
        print_series_summary(out);
        blochdg::write_outputs(out, output_dir);
        std::printf("outputs written to %s\n", output_dir.c_str());
        return 0;
    } catch (const blochdg::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
