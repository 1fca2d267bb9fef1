#include "opsim/problems.hpp"

#include "opsim/logging.hpp"

#include <algorithm>
#include <limits>
#include <cmath>

namespace opsim {

namespace {

// Components that carry ForecastBound parameters, with their series labels.
struct SeriesNeed {
    std::string component;
    std::string label;
    ParamKind kind;
};

std::vector<SeriesNeed> series_needs(const OptContainer& c) {
    std::vector<SeriesNeed> needs;
    for (const auto& p : c.parameters()) {
        if (p.key.t != 1) continue; // one entry per component
        if (p.key.kind == ParamKind::ForecastBound)
            needs.push_back({p.key.component, "max_active_power", ParamKind::ForecastBound});
        else if (p.key.kind == ParamKind::RequirementRHS)
            needs.push_back({p.key.component, "requirement", ParamKind::RequirementRHS});
    }
    return needs;
}

void check_timing(const DecisionModelDef& def) {
    if (!def.resolution.positive())
        throw ValidationError("model '" + def.name + "': resolution must be positive");
    if (!def.interval.positive())
        throw ValidationError("model '" + def.name + "': interval must be positive");
    if (!def.interval.multiple_of(def.resolution))
        throw ValidationError("model '" + def.name + "': interval " + format_duration(def.interval) +
                              " not multiple of resolution " + format_duration(def.resolution));
    if (def.horizon_steps * def.resolution.seconds < def.interval.seconds)
        throw ValidationError("model '" + def.name + "': horizon shorter than interval");
}

} // namespace

DecisionSolution extract_solution(const OptContainer& c, const std::vector<double>& primal,
                                  const std::string& model, TimePoint issue, TimeSpan resolution,
                                  int horizon_steps, int interval_steps, double objective) {
    DecisionSolution sol;
    sol.model = model;
    sol.issue = issue;
    sol.resolution = resolution;
    sol.horizon_steps = horizon_steps;
    sol.interval_steps = interval_steps;
    sol.objective = objective;
    for (int v = 0; v < c.n_variables(); ++v) {
        const VarKey& key = c.variable(v).key;
        if (key.t < 1 || key.t > horizon_steps) continue;
        auto& series = sol.values[key.kind][key.component];
        if (series.empty()) series.assign(static_cast<size_t>(horizon_steps), 0.0);
        series[static_cast<size_t>(key.t - 1)] = primal[static_cast<size_t>(v)];
    }
    return sol;
}

// ---------------------------------------------------------------------------
// DecisionModel
// ---------------------------------------------------------------------------

DecisionModel::DecisionModel(DecisionModelDef def, const SystemModel& sys,
                             std::vector<FeedforwardSpec> incoming,
                             const SolverOptions& solver_options)
    : def_(std::move(def)),
      sys_(sys),
      incoming_(std::move(incoming)),
      container_("unbuilt"),
      solver_(solver_options) {
    check_timing(def_);
    // Forecast availability for every forecast-driven parameter this model
    // will carry; full span coverage is the sequence validator's job.
    BuildOptions opt;
    opt.horizon = def_.horizon_steps;
    opt.dt_hours = def_.resolution.to_hours();
    opt.is_emulator = false;
    container_ = build_problem(def_.tmpl, sys_, def_.name, opt, incoming_);
    for (const auto& need : series_needs(container_)) {
        bool found = false;
        for (const auto& f : sys_.forecasts())
            found |= f.component == need.component && f.label == need.label &&
                     f.resolution == def_.resolution;
        if (!found)
            throw ValidationError("model '" + def_.name + "': missing forecast (" + need.component +
                                  ", " + need.label + ") at resolution " +
                                  format_duration(def_.resolution));
    }
    fingerprint_ = container_.fingerprint();
}

bool DecisionModel::is_milp() const {
    for (const auto& v : container_.variables())
        if (v.integral) return true;
    return false;
}

void DecisionModel::update_series_params(TimePoint issue) {
    for (const auto& need : series_needs(container_)) {
        const std::vector<double> window = sys_.get_forecast_window(
            need.component, need.label, issue, def_.horizon_steps, def_.resolution);
        for (int t = 1; t <= def_.horizon_steps; ++t)
            container_.update_parameter({need.kind, need.component, t},
                                        window[static_cast<size_t>(t - 1)]);
    }
}

void DecisionModel::apply_initial_conditions(OptContainer& c, const SystemModel& sys,
                                             const InitialConditionValues& ics) {
    for (const auto& g : sys.thermal_gens()) {
        auto it = ics.thermal.find(g.name);
        if (it == ics.thermal.end()) continue;
        const auto& ic = it->second;
        if (c.has_parameter({ParamKind::InitialPower, g.name, 0}))
            c.update_parameter({ParamKind::InitialPower, g.name, 0}, ic.power);
        if (c.has_parameter({ParamKind::InitialOnStatus, g.name, 0}))
            c.update_parameter({ParamKind::InitialOnStatus, g.name, 0}, ic.on);
        const bool on = ic.on > 0.5;
        for (int t = 1; c.has_parameter({ParamKind::ForcedOn, g.name, t}); ++t) {
            const bool forced = on && (g.min_up_h - ic.duration_h) >= t;
            c.update_parameter({ParamKind::ForcedOn, g.name, t}, forced ? 1.0 : 0.0);
        }
        for (int t = 1; c.has_parameter({ParamKind::ForcedOff, g.name, t}); ++t) {
            const bool forced = !on && (g.min_dn_h - ic.duration_h) >= t;
            c.update_parameter({ParamKind::ForcedOff, g.name, t}, forced ? 1.0 : 0.0);
        }
    }
    for (const auto& s : sys.storages()) {
        auto it = ics.storage_soc.find(s.name);
        if (it == ics.storage_soc.end()) continue;
        if (c.has_parameter({ParamKind::InitialSoC, s.name, 0}))
            c.update_parameter({ParamKind::InitialSoC, s.name, 0}, it->second);
    }
}

void DecisionModel::update(TimePoint issue, const SimulationState& state, Chronology chronology) {
    if (last_issue_ && issue < *last_issue_)
        throw ContractError("model '" + def_.name + "': stale update at " + format_iso8601(issue) +
                            " (already executed " + format_iso8601(*last_issue_) + ")");
    update_series_params(issue);
    last_ics_ = get_initial_conditions(sys_, issue, state, chronology,
                                       last_solution_ ? &*last_solution_ : nullptr, def_.resolution);
    apply_initial_conditions(container_, sys_, last_ics_);
    update_feedforward_params(container_, incoming_, state, sys_, issue, def_.resolution,
                              def_.horizon_steps);
    if (container_.fingerprint() != fingerprint_)
        throw ContractError("model '" + def_.name + "': container structure changed after build");
    last_issue_ = issue;
}

SolveResult DecisionModel::solve() {
    if (!last_issue_) throw ContractError("model '" + def_.name + "': solve before update");
    const SolveResult res = is_milp() ? solver_.solve_milp(container_) : solver_.solve_lp(container_);
    if (res.optimal()) {
        last_solution_ = extract_solution(container_, res.primal, def_.name, *last_issue_,
                                          def_.resolution, def_.horizon_steps, interval_steps(),
                                          res.objective);
        last_solved_issue_ = last_issue_;
    }
    return res;
}

// ---------------------------------------------------------------------------
// EmulationModel
// ---------------------------------------------------------------------------

EmulationModel::EmulationModel(EmulationModelDef def, const SystemModel& sys,
                               std::vector<FeedforwardSpec> incoming,
                               const SolverOptions& solver_options)
    : def_(std::move(def)),
      sys_(sys),
      incoming_(std::move(incoming)),
      container_("unbuilt"),
      solver_(solver_options) {
    if (!def_.resolution.positive())
        throw ValidationError("emulator '" + def_.name + "': resolution must be positive");
    BuildOptions opt;
    opt.horizon = 1;
    opt.dt_hours = def_.resolution.to_hours();
    opt.is_emulator = true;
    container_ = build_problem(def_.tmpl, sys_, def_.name, opt, incoming_);
    for (const auto& v : container_.variables())
        if (v.integral)
            throw ValidationError("emulator '" + def_.name + "' must not contain binaries");
    fingerprint_ = container_.fingerprint();
}

void EmulationModel::set_slack_bounds(bool active) {
    for (int v = 0; v < container_.n_variables(); ++v) {
        const VarKey& key = container_.variable(v).key;
        if (key.kind == VarKind::Slack &&
            (key.component == "balance_pos" || key.component == "balance_neg"))
            container_.set_variable_bounds(v, 0.0,
                                           active ? std::numeric_limits<double>::infinity() : 0.0);
    }
}

EmulationOutcome EmulationModel::run_step(TimePoint at, const SimulationState& state) {
    if (last_at_ && at <= *last_at_)
        throw ContractError("emulator '" + def_.name + "': stale step at " + format_iso8601(at));

    // Realized inputs; the emulator never touches forecast windows.
    for (const auto& p : container_.parameters()) {
        if (p.key.kind == ParamKind::ForecastBound)
            container_.update_parameter(p.key,
                                        sys_.get_realization(p.key.component, "max_active_power", at));
        else if (p.key.kind == ParamKind::RequirementRHS)
            container_.update_parameter(p.key,
                                        sys_.get_realization(p.key.component, "requirement", at));
    }
    // Initial conditions always come from the system state x.
    const InitialConditionValues ics =
        get_initial_conditions(sys_, at, state, Chronology::InterProblem, nullptr, def_.resolution);
    DecisionModel::apply_initial_conditions(container_, sys_, ics);
    update_feedforward_params(container_, incoming_, state, sys_, at, def_.resolution, 1);
    if (container_.fingerprint() != fingerprint_)
        throw ContractError("emulator '" + def_.name + "': container structure changed after build");
    last_at_ = at;

    EmulationOutcome out;
    out.result = solver_.solve_lp(container_);
    if (out.result.status == SolveStatus::Infeasible) {
        log_warn("emulator '" + def_.name + "' infeasible at " + format_iso8601(at) +
                 "; retrying with penalty slacks");
        set_slack_bounds(true);
        out.result = solver_.solve_lp(container_);
        out.slack_activated = true;
        set_slack_bounds(false);
    }
    if (!out.result.optimal()) return out;

    DecisionSolution sol = extract_solution(container_, out.result.primal, def_.name, at,
                                            def_.resolution, 1, 1, out.result.objective);
    // Commitments in force become part of the system state so downstream
    // initial conditions and durations can be derived from x alone.
    for (const auto& g : sys_.thermal_gens()) {
        double on = 1.0;
        if (container_.has_parameter({ParamKind::FeedforwardOnStatus, g.name, 1}))
            on = container_.parameter_value({ParamKind::FeedforwardOnStatus, g.name, 1});
        sol.values[VarKind::OnStatus][g.name] = {on};
    }
    for (const auto& [kind, comps] : sol.values) {
        if (kind != VarKind::Slack) continue;
        for (const auto& [comp, vals] : comps) out.slack_total += std::fabs(vals[0]);
    }
    out.solution = std::move(sol);
    return out;
}

} // namespace opsim
