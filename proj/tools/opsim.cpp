#include "opsim/config.hpp"
#include "opsim/executor.hpp"
#include "opsim/logging.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

int cmd_validate(const std::string& config_path) {
    try {
        opsim::LoadedSimulation loaded = opsim::load_simulation_config(config_path);
        opsim::Simulation sim(std::move(loaded.sys), std::move(loaded.def));
        // Building runs the sequence validation plus template coverage and
        // the per-model sanity checks; it is the same work `run` does first.
        sim.build();
        std::cout << "validation clean: " << sim.def().decisions.size() << " decision model(s)"
                  << (sim.def().emulator ? ", 1 emulator" : "") << ", span " << sim.def().n_steps
                  << " step(s)\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "validation failed: " << e.what() << "\n";
        return kExitValidation;
    }
}

int cmd_run(const std::string& config_path, const std::string& output_override) {
    bool built = false;
    try {
        opsim::LoadedSimulation loaded = opsim::load_simulation_config(config_path, output_override);
        opsim::Simulation sim(std::move(loaded.sys), std::move(loaded.def));
        sim.build();
        built = true;
        sim.execute();
        std::cout << "simulation finished; results in " << sim.def().output_dir << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return built ? kExitRuntime : kExitValidation;
    }
}

int cmd_export(const std::string& output_dir, const std::string& model, const std::string& name,
               const std::string& kind, bool lookahead, const std::string& csv_path) {
    try {
        opsim::SimulationResults results = opsim::SimulationResults::open(output_dir);
        const opsim::ResultKey key{model, kind, name};
        if (!results.store().has_key(key)) {
            std::cerr << "unknown key " << key.str() << "\n";
            return kExitRuntime;
        }
        std::ofstream out(csv_path);
        if (!out) {
            std::cerr << "cannot write " << csv_path << "\n";
            return kExitRuntime;
        }
        out << "execution_time,horizon_step,component,value,realized_flag\n";
        out.precision(17);
        auto execs = results.store().executions(key);
        std::sort(execs.begin(), execs.end());
        std::vector<std::string> components;
        for (const auto& layout : results.store().layouts())
            if (layout.key == key) components = layout.components;
        for (const auto exec : execs) {
            const opsim::Matrix m = results.store().read_result(key, exec);
            const int realized = results.store().n_realized(key, exec);
            for (int t = 0; t < m.rows; ++t) {
                const bool is_realized = t < realized;
                if (!is_realized && !lookahead) continue;
                for (int c = 0; c < m.cols; ++c)
                    out << opsim::format_iso8601(exec) << "," << (t + 1) << ","
                        << components[static_cast<size_t>(c)] << "," << m.at(t, c) << ","
                        << (is_realized ? 1 : 0) << "\n";
            }
        }
        std::cout << "exported " << key.str() << " to " << csv_path << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "export failed: " << e.what() << "\n";
        return kExitRuntime;
    }
}

} // namespace

int main(int argc, char** argv) {
    opsim::init_log_level_from_env();

    CLI::App app{"opsim - quasi-static power system operations simulation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_override;
    auto* validate = app.add_subcommand("validate", "validate a simulation config and its inputs");
    validate->add_option("config", config_path, "simulation config JSON")->required();

    auto* run = app.add_subcommand("run", "build and execute a simulation");
    run->add_option("config", config_path, "simulation config JSON")->required();
    run->add_option("--output", output_override, "override the configured output directory");

    std::string export_dir, export_model, export_name, export_to;
    std::string export_kind = "variable";
    bool export_lookahead = false;
    auto* exp = app.add_subcommand("export", "export a stored result to CSV");
    exp->add_option("output_dir", export_dir, "simulation output directory")->required();
    exp->add_option("--model", export_model, "model name")->required();
    exp->add_option("--name", export_name, "entry name, e.g. ActivePower")->required();
    exp->add_option("--kind", export_kind, "variable|parameter|dual|auxiliary");
    exp->add_flag("--lookahead", export_lookahead, "include look-ahead rows");
    exp->add_option("--to", export_to, "destination CSV path")->required();

    CLI11_PARSE(app, argc, argv);

    if (validate->parsed()) return cmd_validate(config_path);
    if (run->parsed()) return cmd_run(config_path, output_override);
    if (exp->parsed())
        return cmd_export(export_dir, export_model, export_name, export_kind, export_lookahead,
                          export_to);
    return kExitValidation;
}
