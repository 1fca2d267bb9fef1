#include "opsim/executor.hpp"

#include "opsim/logging.hpp"
#include "opsim/solver.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace opsim {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

const char* to_string(SimStatus s) {
    switch (s) {
        case SimStatus::Created: return "created";
        case SimStatus::Built: return "built";
        case SimStatus::Running: return "running";
        case SimStatus::Finished: return "finished";
        case SimStatus::Failed: return "failed";
    }
    return "?";
}

std::string store_file_path(const std::string& output_dir) {
    return (fs::path(output_dir) / "store" / "results.opst").string();
}

Simulation::Simulation(SystemModel sys, SimulationDef def)
    : sys_(std::move(sys)), def_(std::move(def)) {
    for (const auto& d : def_.decisions)
        seq_.decisions.push_back({d.name, d.horizon_steps, d.resolution, d.interval});
    if (def_.emulator) {
        seq_.emulator_resolution = def_.emulator->resolution;
        seq_.emulator_name = def_.emulator->name;
    }
    seq_.feedforwards = def_.feedforwards;
    seq_.chronology = def_.chronology;
}

DecisionModel& Simulation::decision_model(const std::string& name) {
    for (auto& m : models_)
        if (m->name() == name) return *m;
    throw ContractError("unknown decision model '" + name + "'");
}

void Simulation::seed_boundary_state() {
    // Complete device initial conditions skip the relaxed initialization.
    bool complete = true;
    for (const auto& g : sys_.thermal_gens()) complete &= g.initial.has_value();
    for (const auto& s : sys_.storages()) complete &= s.initial_soc.has_value();

    std::map<std::string, double> on0, p0, soc0;
    std::map<std::string, int> dur0;
    if (complete) {
        for (const auto& g : sys_.thermal_gens()) {
            on0[g.name] = g.initial->on ? 1.0 : 0.0;
            p0[g.name] = g.initial->power;
            dur0[g.name] = g.initial->duration_h;
        }
        for (const auto& s : sys_.storages()) soc0[s.name] = *s.initial_soc;
    } else {
        // Relaxed solve of the outermost model, against the forecasts in
        // force at the simulation start, yields valid u0/x0.
        used_relaxed_init_ = true;
        log_info("initial conditions incomplete; running relaxed initialization solve");
        models_.front()->refresh_series(def_.start);
        BundledSolver relax_solver(def_.solver);
        const SolveResult res = relax_solver.relax_and_solve(models_.front()->container());
        if (!res.optimal())
            throw ValidationError("relaxed initialization failed: " +
                                  std::string(to_string(res.status)) + " " + res.diagnostic);
        const OptContainer& c = models_.front()->container();
        for (const auto& g : sys_.thermal_gens()) {
            const double p = c.has_variable({VarKind::ActivePower, g.name, 1})
                                 ? res.primal[static_cast<size_t>(
                                       c.variable_ref({VarKind::ActivePower, g.name, 1}))]
                                 : 0.0;
            // Producing units count as on regardless of the relaxation's
            // fractional commitment value, and the derived point carries no
            // residual min up/down obligation.
            const double on = p > 1e-6 ? 1.0 : 0.0;
            on0[g.name] = on;
            p0[g.name] = on > 0.5 ? std::clamp(p, g.p_min, g.p_max) : 0.0;
            dur0[g.name] = std::max({g.min_up_h, g.min_dn_h, 1});
        }
        for (const auto& s : sys_.storages()) {
            double soc = s.initial_soc ? *s.initial_soc : 0.5 * s.energy_cap;
            if (c.has_variable({VarKind::SoC, s.name, 1}))
                soc = res.primal[static_cast<size_t>(c.variable_ref({VarKind::SoC, s.name, 1}))];
            soc0[s.name] = soc;
        }
    }

    for (const auto& g : sys_.thermal_gens()) {
        for (StateSpace space : {StateSpace::Decision, StateSpace::System}) {
            state_.write_boundary(space, VarKind::OnStatus, g.name, on0[g.name]);
            state_.write_boundary(space, VarKind::ActivePower, g.name, p0[g.name]);
        }
        state_.set_boundary_duration(g.name, dur0[g.name]);
    }
    for (const auto& s : sys_.storages()) {
        for (StateSpace space : {StateSpace::Decision, StateSpace::System})
            state_.write_boundary(space, VarKind::SoC, s.name, soc0[s.name]);
    }
}

void Simulation::build() {
    if (status_ != SimStatus::Created)
        throw ContractError("build_simulation: status is " + std::string(to_string(status_)));
    validate_sequence(seq_, sys_, def_.start, def_.n_steps);

    const fs::path out(def_.output_dir);
    fs::create_directories(out / "containers");
    fs::create_directories(out / "store");
    fs::create_directories(out / "logs");
    set_log_sink_file((out / "logs" / "opsim.log").string());
    if (!def_.resolved_config_json.empty()) {
        std::ofstream cfg(out / "config_resolved.json", std::ios::binary);
        cfg << def_.resolved_config_json;
    }

    // Build each model exactly once (the only time containers are built).
    for (const auto& d : def_.decisions) {
        std::vector<FeedforwardSpec> incoming;
        for (const auto& ff : def_.feedforwards)
            if (ff.target_model == d.name) incoming.push_back(ff);
        models_.push_back(std::make_unique<DecisionModel>(d, sys_, incoming, def_.solver));
        const std::string stamp = format_iso8601(TimePoint(
            std::chrono::duration_cast<std::chrono::seconds>(
                std::chrono::system_clock::now().time_since_epoch())
                .count()));
        models_.back()->container().set_build_stamp(stamp);
        models_.back()->container().serialize((out / "containers" / (d.name + ".json")).string());
        log_info("built model '" + d.name + "': " +
                 std::to_string(models_.back()->container().n_variables()) + " vars, " +
                 std::to_string(models_.back()->container().n_constraints()) + " rows");
    }
    if (def_.emulator) {
        std::vector<FeedforwardSpec> incoming;
        for (const auto& ff : def_.feedforwards)
            if (ff.target_model == def_.emulator->name) incoming.push_back(ff);
        emulator_.emplace(*def_.emulator, sys_, incoming, def_.solver);
        emulator_->container().serialize(
            (out / "containers" / (def_.emulator->name + ".json")).string());
        log_info("built emulator '" + def_.emulator->name + "': " +
                 std::to_string(emulator_->container().n_variables()) + " vars, " +
                 std::to_string(emulator_->container().n_constraints()) + " rows");
    }

    // State at the finest timeline, preallocated over the span.
    const TimeSpan fine =
        seq_.emulator_resolution ? *seq_.emulator_resolution : seq_.decisions.back().interval;
    const TimeSpan span = seq_.decisions.front().interval * def_.n_steps;
    const int n_slots = static_cast<int>(span.seconds / fine.seconds);
    state_ = SimulationState(def_.start, fine, n_slots);
    for (const auto& g : sys_.thermal_gens()) {
        for (StateSpace space : {StateSpace::Decision, StateSpace::System}) {
            state_.preallocate(space, VarKind::OnStatus, g.name);
            state_.preallocate(space, VarKind::ActivePower, g.name);
        }
    }
    for (const auto& s : sys_.storages())
        for (StateSpace space : {StateSpace::Decision, StateSpace::System})
            state_.preallocate(space, VarKind::SoC, s.name);
    seed_boundary_state();

    status_ = SimStatus::Built;
}

void Simulation::register_store_layout(ResultsStore& store) {
    std::vector<ResultLayout> layouts;
    auto add_model_layouts = [&](const std::string& model, const OptContainer& c, int horizon) {
        std::map<VarKind, std::vector<std::string>> var_comps;
        std::map<ParamKind, std::vector<std::string>> param_comps;
        for (const auto& v : c.variables()) {
            if (v.key.t != 1) continue;
            var_comps[v.key.kind].push_back(v.key.component);
        }
        for (const auto& p : c.parameters()) {
            if (p.key.t > 1) continue; // t==0 boundary params and t==1 series heads
            auto& comps = param_comps[p.key.kind];
            if (std::find(comps.begin(), comps.end(), p.key.component) == comps.end())
                comps.push_back(p.key.component);
        }
        for (const auto& [kind, comps] : var_comps)
            layouts.push_back({{model, "variable", to_string(kind)}, comps, horizon});
        for (const auto& [kind, comps] : param_comps) {
            const bool per_step = kind != ParamKind::InitialPower &&
                                  kind != ParamKind::InitialOnStatus &&
                                  kind != ParamKind::InitialSoC && kind != ParamKind::EnergyTarget;
            layouts.push_back({{model, "parameter", to_string(kind)}, comps, per_step ? horizon : 1});
        }
        layouts.push_back({{model, "dual", "balance"}, {"system"}, horizon});
        layouts.push_back({{model, "auxiliary", "objective"}, {"value"}, 1});
    };
    for (size_t k = 0; k < models_.size(); ++k)
        add_model_layouts(models_[k]->name(), models_[k]->container(),
                          models_[k]->def().horizon_steps);
    if (emulator_) add_model_layouts(emulator_->name(), emulator_->container(), 1);
    store.register_layout(layouts);
}

void Simulation::persist_solution(ResultsStore& store, const DecisionSolution& sol,
                                  const SolveResult& res, const OptContainer& container) {
    // Variables, grouped by kind into horizon x components matrices.
    for (const auto& [kind, comps] : sol.values) {
        const ResultKey key{sol.model, "variable", to_string(kind)};
        if (!store.has_key(key)) continue;
        std::vector<std::string> order;
        for (const auto& layout : store.layouts())
            if (layout.key == key) order = layout.components;
        Matrix m(sol.horizon_steps, static_cast<int>(order.size()));
        for (int cix = 0; cix < static_cast<int>(order.size()); ++cix) {
            auto it = comps.find(order[static_cast<size_t>(cix)]);
            if (it == comps.end()) continue;
            for (int t = 0; t < sol.horizon_steps; ++t)
                m.at(t, cix) = it->second[static_cast<size_t>(t)];
        }
        store.write_result(key, sol.issue, m, sol.interval_steps);
    }
    // Parameters in force at solve time.
    std::map<ParamKind, std::map<std::string, std::map<int, double>>> params;
    for (const auto& p : container.parameters())
        params[p.key.kind][p.key.component][p.key.t] = p.value;
    for (const auto& [kind, comps] : params) {
        const ResultKey key{sol.model, "parameter", to_string(kind)};
        if (!store.has_key(key)) continue;
        std::vector<std::string> order;
        int horizon = 1;
        for (const auto& layout : store.layouts())
            if (layout.key == key) {
                order = layout.components;
                horizon = layout.horizon;
            }
        Matrix m(horizon, static_cast<int>(order.size()));
        for (int cix = 0; cix < static_cast<int>(order.size()); ++cix) {
            auto it = comps.find(order[static_cast<size_t>(cix)]);
            if (it == comps.end()) continue;
            for (const auto& [t, v] : it->second) {
                const int row = std::max(t, 1) - 1;
                if (row < horizon) m.at(row, cix) = v;
            }
        }
        store.write_result(key, sol.issue, m, std::min(sol.interval_steps, horizon));
    }
    // Balance duals (LP solves only).
    if (!res.duals.empty()) {
        const ResultKey key{sol.model, "dual", "balance"};
        Matrix m(sol.horizon_steps, 1);
        for (int t = 1; t <= sol.horizon_steps; ++t) {
            const std::string name = "balance[" + std::to_string(t) + "]";
            for (int i = 0; i < container.n_constraints(); ++i)
                if (container.constraint(i).name == name)
                    m.at(t - 1, 0) = res.duals[static_cast<size_t>(i)];
        }
        store.write_result(key, sol.issue, m, sol.interval_steps);
    }
    Matrix obj(1, 1);
    obj.at(0, 0) = sol.objective;
    store.write_result({sol.model, "auxiliary", "objective"}, sol.issue, obj, 1);
}

void Simulation::dump_diagnostics(const std::string& model, TimePoint issue,
                                  const OptContainer& container, const SolveResult& res) {
    const fs::path dir = fs::path(def_.output_dir) / "diagnostics";
    fs::create_directories(dir);
    container.serialize((dir / (model + "_container.json")).string());
    ordered_json j;
    j["model"] = model;
    j["issue_time"] = format_iso8601(issue);
    j["status"] = to_string(res.status);
    j["diagnostic"] = res.diagnostic;
    ordered_json writes = ordered_json::array();
    const auto& journal = state_.journal();
    const size_t from = journal.size() > 64 ? journal.size() - 64 : 0;
    for (size_t i = from; i < journal.size(); ++i) {
        const auto& rec = journal[i];
        ordered_json r;
        r["model"] = rec.model;
        r["component"] = rec.component;
        r["kind"] = to_string(rec.kind);
        r["space"] = rec.space == StateSpace::Decision ? "u" : "x";
        r["at"] = format_iso8601(rec.at);
        writes.push_back(std::move(r));
    }
    j["recent_state_writes"] = std::move(writes);
    std::ofstream out(dir / (model + "_failure.json"));
    out << j.dump(1, '\t');
    log_error("diagnostics dumped to " + (dir / (model + "_failure.json")).string());
}

void Simulation::execute() {
    if (status_ != SimStatus::Built)
        throw ContractError("execute_simulation requires built status, have " +
                            std::string(to_string(status_)));
    status_ = SimStatus::Running;

    ResultsStore store = ResultsStore::create(
        def_.store, def_.store.backend == StoreConfig::Backend::File
                        ? store_file_path(def_.output_dir)
                        : "");
    register_store_layout(store);

    const auto order = compute_execution_order(seq_, def_.start, def_.n_steps);
    const auto t_begin = std::chrono::steady_clock::now();
    try {
        run_loop(store, order);
    } catch (...) {
        // Partial results stay readable; the failure is already diagnosed.
        status_ = SimStatus::Failed;
        store.close();
        throw;
    }
    store.close();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
    log_info("simulation finished in " + std::to_string(secs) + "s");
    status_ = SimStatus::Finished;
}

void Simulation::run_loop(ResultsStore& store, const std::vector<std::vector<Execution>>& order) {
    for (int s = 0; s < def_.n_steps; ++s) {
        for (const Execution& ex : order[static_cast<size_t>(s)]) {
            if (ex.is_emulator()) {
                EmulationOutcome out = emulator_->run_step(ex.issue, state_);
                ++solve_counts_[emulator_->name()];
                if (!out.result.optimal()) {
                    dump_diagnostics(emulator_->name(), ex.issue, emulator_->container(), out.result);
                    throw ValidationError("emulator infeasible at " + format_iso8601(ex.issue) +
                                          " even with penalty slacks");
                }
                if (out.slack_activated)
                    log_warn("emulator used " + std::to_string(out.slack_total * sys_.base_power()) +
                             " MW of balance slack at " + format_iso8601(ex.issue));
                persist_solution(store, *out.solution, out.result, emulator_->container());
                update_state(state_, *out.solution, StateSpace::System);
                log_info("[step " + std::to_string(s + 1) + "/" + std::to_string(def_.n_steps) +
                         "] " + emulator_->name() + "@" + format_iso8601(ex.issue) + " " +
                         to_string(out.result.status) + " obj=" +
                         std::to_string(out.result.objective) + " iters=" +
                         std::to_string(out.result.stats.iterations) + " " +
                         std::to_string(out.result.stats.wall_ms) + "ms");
                continue;
            }
            DecisionModel& model = *models_[static_cast<size_t>(ex.model_index)];
            model.update(ex.issue, state_, def_.chronology);
            const SolveResult res = model.solve();
            ++solve_counts_[model.name()];
            log_info("[step " + std::to_string(s + 1) + "/" + std::to_string(def_.n_steps) + "] " +
                     model.name() + "@" + format_iso8601(ex.issue) + " " + to_string(res.status) +
                     " obj=" + std::to_string(res.objective) +
                     " iters=" + std::to_string(res.stats.iterations) +
                     " nodes=" + std::to_string(res.stats.nodes) + " " +
                     std::to_string(res.stats.wall_ms) + "ms");
            if (!res.optimal()) {
                if (!def_.halt_on_infeasible && model.last_solution() != nullptr) {
                    // Skip-and-carry: hold the previous decisions, re-stamped
                    // at this issue time.
                    log_warn("model '" + model.name() + "' " + to_string(res.status) + " at " +
                             format_iso8601(ex.issue) + "; carrying previous solution");
                    DecisionSolution carried = *model.last_solution();
                    carried.issue = ex.issue;
                    update_state(state_, carried, StateSpace::Decision);
                    continue;
                }
                dump_diagnostics(model.name(), ex.issue, model.container(), res);
                throw ValidationError("model '" + model.name() + "' " +
                                      std::string(to_string(res.status)) + " at " +
                                      format_iso8601(ex.issue) + "; simulation halted");
            }
            persist_solution(store, *model.last_solution(), res, model.container());
            update_state(state_, *model.last_solution(), StateSpace::Decision);
        }
    }
}

// ---------------------------------------------------------------------------

SimulationResults SimulationResults::open(const std::string& output_dir) {
    const std::string path = store_file_path(output_dir);
    if (!fs::exists(path))
        throw IoError("no results store under '" + output_dir + "' (expected " + path + ")");
    return SimulationResults(ResultsStore::open_readonly(path));
}

SimulationResults::RealizedSeries SimulationResults::realized_trajectory(
    const std::string& model, const std::string& entry_name, const std::string& kind) const {
    const ResultKey key{model, kind, entry_name};
    RealizedSeries out;
    for (const auto& layout : store_.layouts())
        if (layout.key == key) out.components = layout.components;
    if (out.components.empty()) throw ContractError("no stored results for " + key.str());

    auto execs = store_.executions(key);
    std::sort(execs.begin(), execs.end());
    for (const TimePoint exec : execs) {
        const Matrix m = store_.read_result(key, exec);
        const int realized = store_.n_realized(key, exec);
        for (int t = 0; t < std::min(realized, m.rows); ++t) {
            std::vector<double> row(static_cast<size_t>(m.cols));
            for (int c = 0; c < m.cols; ++c) row[static_cast<size_t>(c)] = m.at(t, c);
            out.values.push_back(std::move(row));
            out.times.push_back(TimePoint{}); // filled below once spacing is known
        }
    }
    // Execution spacing gives the realized-step cadence.
    if (execs.size() >= 1 && !out.times.empty()) {
        const int per_exec = static_cast<int>(out.times.size() / execs.size());
        const TimeSpan res = execs.size() >= 2
                                 ? TimeSpan((execs[1] - execs[0]).seconds / per_exec)
                                 : TimeSpan(3600);
        for (size_t i = 0; i < out.times.size(); ++i)
            out.times[i] = execs.front() + res * static_cast<std::int64_t>(i);
    }
    return out;
}

} // namespace opsim
