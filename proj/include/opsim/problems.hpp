#pragma once

#include "opsim/formulations.hpp"
#include "opsim/sequence.hpp"
#include "opsim/solver.hpp"
#include "opsim/system_model.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace opsim {

// DecisionModel and EmulationModel: a template-built container plus timing
// metadata and the per-execution update/solve lifecycle. Containers are
// built exactly once; executions only update parameters in place.

struct DecisionModelDef {
    std::string name;
    ProblemTemplate tmpl;
    int horizon_steps = 0;
    TimeSpan resolution{};
    TimeSpan interval{};
};

class DecisionModel {
public:
    DecisionModel(DecisionModelDef def, const SystemModel& sys,
                  std::vector<FeedforwardSpec> incoming, const SolverOptions& solver_options);

    const std::string& name() const { return def_.name; }
    const DecisionModelDef& def() const { return def_; }
    ModelTiming timing() const {
        return {def_.name, def_.horizon_steps, def_.resolution, def_.interval};
    }
    int interval_steps() const {
        return static_cast<int>(def_.interval.seconds / def_.resolution.seconds);
    }

    const OptContainer& container() const { return container_; }
    OptContainer& container() { return container_; }
    BundledSolver& solver() { return solver_; }
    bool is_milp() const;

    // Refreshes forecast parameters at `issue`, initial conditions per the
    // chronology, and feedforward parameters from the state. Structure is
    // untouched. Throws on missing forecast windows or a stale issue time.
    void update(TimePoint issue, const SimulationState& state, Chronology chronology);

    // Forecast-driven parameters only; used by the relaxed initialization,
    // which runs before any state exists.
    void refresh_series(TimePoint issue) { update_series_params(issue); }

    // Solves and, when optimal, stores the full-horizon solution with its
    // realized/look-ahead split. Returns the raw solver result either way.
    SolveResult solve();

    const DecisionSolution* last_solution() const {
        return last_solution_ ? &*last_solution_ : nullptr;
    }
    const InitialConditionValues& last_initial_conditions() const { return last_ics_; }
    std::optional<TimePoint> last_issue() const { return last_issue_; }

private:
    friend class EmulationModel;
    static void apply_initial_conditions(OptContainer& c, const SystemModel& sys,
                                         const InitialConditionValues& ics);
    void update_series_params(TimePoint issue);

    DecisionModelDef def_;
    const SystemModel& sys_;
    std::vector<FeedforwardSpec> incoming_;
    OptContainer container_;
    BundledSolver solver_;
    OptContainer::Fingerprint fingerprint_;
    std::optional<TimePoint> last_issue_;
    std::optional<TimePoint> last_solved_issue_;
    std::optional<DecisionSolution> last_solution_;
    InitialConditionValues last_ics_;
};

struct EmulationModelDef {
    std::string name;
    ProblemTemplate tmpl;
    TimeSpan resolution{};
};

struct EmulationOutcome {
    SolveResult result;
    std::optional<DecisionSolution> solution; // one step; OnStatus reflects commitments in force
    bool slack_activated = false;
    double slack_total = 0.0; // per-unit power absorbed by balance slacks
};

class EmulationModel {
public:
    EmulationModel(EmulationModelDef def, const SystemModel& sys,
                   std::vector<FeedforwardSpec> incoming, const SolverOptions& solver_options);

    const std::string& name() const { return def_.name; }
    const EmulationModelDef& def() const { return def_; }
    const OptContainer& container() const { return container_; }
    OptContainer& container() { return container_; }

    // One myopic step against realized inputs: update every parameter from
    // actuals/state/x, solve, and on infeasibility retry once with the
    // penalty slacks activated. Never reads forecasts.
    EmulationOutcome run_step(TimePoint at, const SimulationState& state);

private:
    void set_slack_bounds(bool active);

    EmulationModelDef def_;
    const SystemModel& sys_;
    std::vector<FeedforwardSpec> incoming_;
    OptContainer container_;
    BundledSolver solver_;
    OptContainer::Fingerprint fingerprint_;
    std::optional<TimePoint> last_at_;
};

// Shared extraction: container primal -> per-kind, per-component series.
DecisionSolution extract_solution(const OptContainer& c, const std::vector<double>& primal,
                                  const std::string& model, TimePoint issue, TimeSpan resolution,
                                  int horizon_steps, int interval_steps, double objective);

} // namespace opsim
