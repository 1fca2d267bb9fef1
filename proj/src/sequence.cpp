#include "opsim/sequence.hpp"

#include <algorithm>
#include <cmath>

namespace opsim {

Chronology chronology_from_string(const std::string& s) {
    if (s == "InterProblemChronology") return Chronology::InterProblem;
    if (s == "IntraProblemChronology") return Chronology::IntraProblem;
    throw ValidationError("unknown chronology '" + s + "'");
}

const char* to_string(Chronology c) {
    return c == Chronology::InterProblem ? "InterProblemChronology" : "IntraProblemChronology";
}

// ---------------------------------------------------------------------------
// validation
// ---------------------------------------------------------------------------

void validate_sequence(const SequenceSpec& seq, const SystemModel& sys, TimePoint start,
                       int n_steps) {
    if (seq.decisions.empty()) throw ValidationError("sequence has no decision models");
    if (n_steps <= 0) throw ValidationError("simulation span must cover at least one step");

    for (const auto& m : seq.decisions) {
        if (!m.resolution.positive())
            throw ValidationError("model '" + m.name + "': resolution must be positive");
        if (!m.interval.positive())
            throw ValidationError("model '" + m.name + "': interval must be positive");
        if (!m.interval.multiple_of(m.resolution))
            throw ValidationError("model '" + m.name + "': interval " + format_duration(m.interval) +
                                  " not multiple of resolution " + format_duration(m.resolution));
        if (m.horizon_steps * m.resolution.seconds < m.interval.seconds)
            throw ValidationError("model '" + m.name + "': horizon shorter than interval (" +
                                  std::to_string(m.horizon_steps) + " x " +
                                  format_duration(m.resolution) + " < " + format_duration(m.interval) +
                                  ")");
    }
    for (size_t k = 0; k + 1 < seq.decisions.size(); ++k) {
        const auto& outer = seq.decisions[k];
        const auto& inner = seq.decisions[k + 1];
        if (!outer.interval.multiple_of(inner.interval))
            throw ValidationError("interval " + format_duration(inner.interval) + " of model '" +
                                  inner.name + "' does not divide " + format_duration(outer.interval) +
                                  " of model '" + outer.name + "'");
    }
    const TimeSpan innermost = seq.decisions.back().interval;
    if (seq.emulator_resolution) {
        if (!seq.emulator_resolution->positive())
            throw ValidationError("emulator resolution must be positive");
        if (!innermost.multiple_of(*seq.emulator_resolution))
            throw ValidationError("emulator resolution " + format_duration(*seq.emulator_resolution) +
                                  " does not divide the innermost interval " +
                                  format_duration(innermost));
    }

    // Feedforward ordering and component resolution.
    auto model_pos = [&](const std::string& name) -> int {
        for (size_t k = 0; k < seq.decisions.size(); ++k)
            if (seq.decisions[k].name == name) return static_cast<int>(k);
        if (!seq.emulator_name.empty() && name == seq.emulator_name)
            return static_cast<int>(seq.decisions.size()); // emulator runs after all decisions
        return -1;
    };
    for (const auto& ff : seq.feedforwards) {
        const int src = model_pos(ff.source_model);
        const int dst = model_pos(ff.target_model);
        if (src < 0)
            throw ValidationError("feedforward source model '" + ff.source_model + "' unknown");
        if (dst < 0)
            throw ValidationError("feedforward target model '" + ff.target_model + "' unknown");
        if (src >= static_cast<int>(seq.decisions.size()))
            throw ValidationError("feedforward source cannot be the emulator");
        if (src >= dst)
            throw ValidationError("feedforward source '" + ff.source_model +
                                  "' does not execute before target '" + ff.target_model + "'");
        for (const auto& comp : ff.components)
            if (!sys.component_exists(comp))
                throw ValidationError("feedforward component '" + comp + "' does not exist");
    }

    // Forecast coverage: every forecast-driven component needs windows for
    // every issue time of every decision model across the span, long enough
    // for the model horizon and at the model resolution.
    struct Need {
        std::string component;
        std::string label;
    };
    std::vector<Need> needs;
    for (const auto& d : sys.loads()) needs.push_back({d.name, "max_active_power"});
    for (const auto& g : sys.renewable_gens()) needs.push_back({g.name, "max_active_power"});
    for (const auto& r : sys.reserves()) needs.push_back({r.requirement_series_name, "requirement"});

    const TimeSpan step = seq.decisions.front().interval;
    const TimePoint end = start + step * n_steps;
    for (const auto& m : seq.decisions) {
        for (TimePoint issue = start; issue < end; issue = issue + m.interval) {
            for (const auto& need : needs) {
                bool have_resolution = false;
                bool covered = false;
                for (const auto& f : sys.forecasts()) {
                    if (f.component != need.component || f.label != need.label ||
                        f.resolution != m.resolution)
                        continue;
                    have_resolution = true;
                    if (f.issue_index(issue) >= 0 && f.horizon_steps >= m.horizon_steps) {
                        covered = true;
                        break;
                    }
                }
                if (!have_resolution)
                    throw ValidationError("model '" + m.name + "': no forecast for (" +
                                          need.component + ", " + need.label + ") at resolution " +
                                          format_duration(m.resolution));
                if (!covered)
                    throw ValidationError("insufficient forecast coverage: model '" + m.name +
                                          "' needs (" + need.component + ", " + need.label +
                                          ") issued " + format_iso8601(issue) + " with " +
                                          std::to_string(m.horizon_steps) + " steps");
            }
        }
    }
    if (seq.emulator_resolution) {
        for (const auto& need : needs) {
            const RealizationSeries* r = sys.find_realization(need.component, need.label);
            if (r == nullptr)
                throw ValidationError("emulator needs a realization series for (" + need.component +
                                      ", " + need.label + ")");
            if (r->resolution != *seq.emulator_resolution)
                throw ValidationError("realization series (" + need.component + ", " + need.label +
                                      ") resolution " + format_duration(r->resolution) +
                                      " does not match the emulator resolution " +
                                      format_duration(*seq.emulator_resolution));
            if (r->start > start || r->end() < end)
                throw ValidationError("realization series (" + need.component + ", " + need.label +
                                      ") does not cover the simulation span");
        }
    }
}

// ---------------------------------------------------------------------------
// execution order
// ---------------------------------------------------------------------------

std::vector<std::vector<Execution>> compute_execution_order(const SequenceSpec& seq,
                                                            TimePoint start, int n_steps) {
    const TimeSpan step = seq.decisions.front().interval;
    const TimeSpan tick = seq.emulator_resolution ? *seq.emulator_resolution
                                                  : seq.decisions.back().interval;
    std::vector<std::vector<Execution>> order;
    order.reserve(static_cast<size_t>(n_steps));
    for (int s = 0; s < n_steps; ++s) {
        std::vector<Execution> events;
        const TimePoint step_start = start + step * s;
        for (TimePoint t = step_start; t < step_start + step; t = t + tick) {
            const std::int64_t offset = (t - start).seconds;
            for (size_t k = 0; k < seq.decisions.size(); ++k)
                if (offset % seq.decisions[k].interval.seconds == 0)
                    events.push_back({static_cast<int>(k), t});
            if (seq.emulator_resolution && offset % seq.emulator_resolution->seconds == 0)
                events.push_back({-1, t});
        }
        order.push_back(std::move(events));
    }
    return order;
}

// ---------------------------------------------------------------------------
// SimulationState
// ---------------------------------------------------------------------------

SimulationState::SimulationState(TimePoint start, TimeSpan resolution, int n_slots)
    : start_(start), resolution_(resolution), n_slots_(n_slots) {}

int SimulationState::slot_of(TimePoint t) const {
    const std::int64_t delta = (t - (start_ - resolution_)).seconds;
    if (delta < 0 || delta % resolution_.seconds != 0) return -1;
    const std::int64_t k = delta / resolution_.seconds;
    if (k > n_slots_) return -1;
    return static_cast<int>(k);
}

void SimulationState::preallocate(StateSpace space, VarKind kind, const std::string& component) {
    auto key = std::make_tuple(static_cast<int>(space), kind, component);
    if (series_.contains(key)) return;
    Series s;
    s.values.assign(static_cast<size_t>(n_slots_) + 1, 0.0);
    s.valid.assign(static_cast<size_t>(n_slots_) + 1, 0);
    series_.emplace(std::move(key), std::move(s));
}

bool SimulationState::has_key(StateSpace space, VarKind kind, const std::string& component) const {
    return series_.contains(std::make_tuple(static_cast<int>(space), kind, component));
}

void SimulationState::write(StateSpace space, VarKind kind, const std::string& component,
                            TimePoint at, double value, const StateWriteRecord& rec) {
    preallocate(space, kind, component);
    const int slot = slot_of(at);
    if (slot < 0)
        throw ContractError("state write off the timeline grid at " + format_iso8601(at));
    auto& s = series_.at(std::make_tuple(static_cast<int>(space), kind, component));
    s.values[static_cast<size_t>(slot)] = value;
    s.valid[static_cast<size_t>(slot)] = 1;
    StateWriteRecord full = rec;
    full.space = space;
    full.kind = kind;
    full.component = component;
    full.at = at;
    journal_.push_back(std::move(full));
}

void SimulationState::write_boundary(StateSpace space, VarKind kind, const std::string& component,
                                     double value) {
    preallocate(space, kind, component);
    auto& s = series_.at(std::make_tuple(static_cast<int>(space), kind, component));
    s.values[0] = value;
    s.valid[0] = 1;
}

std::optional<double> SimulationState::latest_at_or_before(StateSpace space, VarKind kind,
                                                           const std::string& component,
                                                           TimePoint t) const {
    auto it = series_.find(std::make_tuple(static_cast<int>(space), kind, component));
    if (it == series_.end()) return std::nullopt;
    const auto& s = it->second;
    std::int64_t delta = (t - (start_ - resolution_)).seconds;
    if (delta < 0) return std::nullopt;
    std::int64_t k = delta / resolution_.seconds;
    if (k > n_slots_) k = n_slots_;
    for (std::int64_t i = k; i >= 0; --i)
        if (s.valid[static_cast<size_t>(i)]) return s.values[static_cast<size_t>(i)];
    return std::nullopt;
}

std::optional<double> SimulationState::latest_before(StateSpace space, VarKind kind,
                                                     const std::string& component, TimePoint t) const {
    return latest_at_or_before(space, kind, component, t - resolution_);
}

int SimulationState::run_length_before(StateSpace space, const std::string& component,
                                       TimePoint t) const {
    auto it = series_.find(std::make_tuple(static_cast<int>(space), VarKind::OnStatus, component));
    if (it == series_.end()) return 0;
    const auto& s = it->second;
    std::int64_t delta = (t - resolution_ - (start_ - resolution_)).seconds;
    if (delta < 0) return 0;
    std::int64_t k = delta / resolution_.seconds;
    if (k > n_slots_) k = n_slots_;
    // Find the value in force just before t, then count the run.
    std::int64_t pos = k;
    while (pos >= 0 && !s.valid[static_cast<size_t>(pos)]) --pos;
    if (pos < 0) return 0;
    const bool on = s.values[static_cast<size_t>(pos)] > 0.5;
    int slots = 0;
    bool reached_boundary = false;
    for (std::int64_t i = pos; i >= 0; --i) {
        if (!s.valid[static_cast<size_t>(i)]) break;
        if ((s.values[static_cast<size_t>(i)] > 0.5) != on) break;
        ++slots;
        if (i == 0) reached_boundary = true;
    }
    const double hours_per_slot = static_cast<double>(resolution_.seconds) / 3600.0;
    int hours = static_cast<int>(std::floor(slots * hours_per_slot + 1e-9));
    if (reached_boundary) {
        auto bd = boundary_durations_.find(component);
        if (bd != boundary_durations_.end())
            hours += std::max(0, bd->second - static_cast<int>(std::floor(hours_per_slot + 1e-9)));
    }
    return std::max(hours, 1);
}

void SimulationState::set_boundary_duration(const std::string& component, int hours) {
    boundary_durations_[component] = hours;
}

int SimulationState::boundary_duration(const std::string& component) const {
    auto it = boundary_durations_.find(component);
    return it == boundary_durations_.end() ? 1 : it->second;
}

// ---------------------------------------------------------------------------
// state updates and chronologies
// ---------------------------------------------------------------------------

void update_state(SimulationState& state, const DecisionSolution& solution, StateSpace space) {
    const std::int64_t fine = state.resolution().seconds;
    const std::int64_t coarse = solution.resolution.seconds;
    for (const auto& [kind, comps] : solution.values) {
        for (const auto& [component, values] : comps) {
            for (int tau = 1; tau <= solution.interval_steps; ++tau) {
                const double v = values[static_cast<size_t>(tau - 1)];
                const TimePoint period_start = solution.step_time(tau);
                // Zero-order hold onto the finest timeline.
                for (std::int64_t off = 0; off < coarse; off += fine) {
                    state.write(space, kind, component, period_start + TimeSpan(off), v,
                                {solution.model, solution.issue, tau, solution.interval_steps});
                }
            }
        }
    }
}

InitialConditionValues get_initial_conditions(const SystemModel& sys, TimePoint issue,
                                              const SimulationState& state, Chronology chronology,
                                              const DecisionSolution* own_previous,
                                              TimeSpan own_resolution) {
    InitialConditionValues out;
    const StateSpace space =
        chronology == Chronology::InterProblem ? StateSpace::System : StateSpace::Decision;

    auto from_own = [&](VarKind kind, const std::string& comp) -> std::optional<double> {
        if (own_previous == nullptr) return std::nullopt;
        auto kit = own_previous->values.find(kind);
        if (kit == own_previous->values.end()) return std::nullopt;
        auto cit = kit->second.find(comp);
        if (cit == kit->second.end()) return std::nullopt;
        // Value in force just before `issue` within the realized window.
        const std::int64_t delta = ((issue - own_resolution) - own_previous->issue).seconds;
        if (delta < 0) return std::nullopt;
        const int tau = static_cast<int>(delta / own_previous->resolution.seconds) + 1;
        if (tau < 1 || tau > own_previous->interval_steps) return std::nullopt;
        return cit->second[static_cast<size_t>(tau - 1)];
    };

    auto read = [&](VarKind kind, const std::string& comp) -> std::optional<double> {
        if (chronology == Chronology::IntraProblem) {
            if (auto v = from_own(kind, comp)) return v;
        }
        return state.latest_before(space, kind, comp, issue);
    };

    for (const auto& g : sys.thermal_gens()) {
        InitialConditionValues::ThermalIc ic;
        const auto on = read(VarKind::OnStatus, g.name);
        const auto power = read(VarKind::ActivePower, g.name);
        if (!power) {
            out.complete = false;
            continue;
        }
        ic.power = *power;
        ic.on = on ? (*on > 0.5 ? 1.0 : 0.0) : (ic.power > 1e-6 ? 1.0 : 0.0);
        ic.duration_h = state.run_length_before(
            chronology == Chronology::InterProblem ? StateSpace::System : StateSpace::Decision,
            g.name, issue);
        out.thermal[g.name] = ic;
    }
    for (const auto& s : sys.storages()) {
        const auto soc = read(VarKind::SoC, s.name);
        if (!soc) {
            out.complete = false;
            continue;
        }
        out.storage_soc[s.name] = *soc;
    }
    return out;
}

} // namespace opsim
