#pragma once

#include "opsim/problems.hpp"
#include "opsim/sequence.hpp"
#include "opsim/store.hpp"
#include "opsim/system_model.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace opsim {

enum class SimStatus { Created, Built, Running, Finished, Failed };
const char* to_string(SimStatus s);

struct SimulationDef {
    std::vector<DecisionModelDef> decisions; // outermost first
    std::optional<EmulationModelDef> emulator;
    std::vector<FeedforwardSpec> feedforwards;
    Chronology chronology = Chronology::InterProblem;
    TimePoint start{};
    int n_steps = 0; // steps of the outermost model's interval
    StoreConfig store;
    SolverOptions solver;
    std::string output_dir;
    bool halt_on_infeasible = true; // false: reuse the previous solution and carry on
    std::string resolved_config_json; // persisted verbatim for reproducibility
};

class Simulation {
public:
    Simulation(SystemModel sys, SimulationDef def);

    // Fig.-5 build: validate the sequence, build every model once, attach
    // solvers, serialize containers, preallocate the state, and derive
    // u0/x0 (relaxed solve when device initial conditions are incomplete).
    void build();

    // Fig.-6 execution: instantiate the store, walk the precomputed order
    // (update -> solve -> persist -> state update), emulator ticks last.
    void execute();

    SimStatus status() const { return status_; }
    const SystemModel& system() const { return sys_; }
    const SimulationDef& def() const { return def_; }
    const SimulationState& state() const { return state_; }
    const SequenceSpec& sequence() const { return seq_; }
    bool used_relaxed_init() const { return used_relaxed_init_; }
    const std::map<std::string, int>& solve_counts() const { return solve_counts_; }

    DecisionModel& decision_model(const std::string& name);
    EmulationModel* emulation_model() { return emulator_ ? &*emulator_ : nullptr; }

private:
    void seed_boundary_state();
    void run_loop(ResultsStore& store, const std::vector<std::vector<Execution>>& order);
    void persist_solution(ResultsStore& store, const DecisionSolution& sol,
                          const SolveResult& res, const OptContainer& container);
    void register_store_layout(ResultsStore& store);
    void dump_diagnostics(const std::string& model, TimePoint issue, const OptContainer& container,
                          const SolveResult& res);

    SystemModel sys_;
    SimulationDef def_;
    SequenceSpec seq_;
    std::vector<std::unique_ptr<DecisionModel>> models_;
    std::optional<EmulationModel> emulator_;
    SimulationState state_;
    SimStatus status_ = SimStatus::Created;
    bool used_relaxed_init_ = false;
    std::map<std::string, int> solve_counts_;
};

// Reopens a finished (or failed-but-partial) simulation's store.
class SimulationResults {
public:
    static SimulationResults open(const std::string& output_dir);

    const ResultsStore& store() const { return store_; }
    ResultsStore& store() { return store_; }

    struct RealizedSeries {
        std::vector<TimePoint> times;
        std::vector<std::string> components;
        std::vector<std::vector<double>> values; // [time][component]
    };
    // Concatenation of realized windows across executions.
    RealizedSeries realized_trajectory(const std::string& model, const std::string& entry_name,
                                       const std::string& kind = "variable") const;

private:
    explicit SimulationResults(ResultsStore store) : store_(std::move(store)) {}
    ResultsStore store_;
};

// Store file location within an output directory.
std::string store_file_path(const std::string& output_dir);

} // namespace opsim
