#pragma once

#include "opsim/feedforwards.hpp"
#include "opsim/opt_container.hpp"
#include "opsim/system_model.hpp"
#include "opsim/time.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace opsim {

// SimulationSequence roles: timing validation, execution-order
// precalculation, and the initial-conditions chronology. SimulationState
// holds the rolling u (decision) and x (system) trajectories on the finest
// timeline.

enum class Chronology { InterProblem, IntraProblem };

Chronology chronology_from_string(const std::string& s);
const char* to_string(Chronology c);

struct ModelTiming {
    std::string name;
    int horizon_steps = 0;
    TimeSpan resolution{};
    TimeSpan interval{};
};

struct SequenceSpec {
    std::vector<ModelTiming> decisions; // outermost first
    std::optional<TimeSpan> emulator_resolution;
    std::string emulator_name;
    std::vector<FeedforwardSpec> feedforwards;
    Chronology chronology = Chronology::InterProblem;
};

// Checks every sequence invariant: per-model horizon/interval/resolution
// consistency, interval divisibility between consecutive models, emulator
// resolution divisibility, feedforward source-before-target ordering, and
// forecast coverage of the whole span for every forecast-driven component.
// Throws ValidationError naming the violated rule and models.
void validate_sequence(const SequenceSpec& seq, const SystemModel& sys, TimePoint start,
                       int n_steps);

struct Execution {
    int model_index = -1; // index into SequenceSpec::decisions; -1 = emulator
    TimePoint issue{};
    bool is_emulator() const { return model_index < 0; }
};

// Deterministic Fig.-3-style interleaving per simulation step: at each
// timestamp the due decision models run outermost-first, and the emulator
// runs after all decisions due at that timestamp.
std::vector<std::vector<Execution>> compute_execution_order(const SequenceSpec& seq,
                                                            TimePoint start, int n_steps);

// --- simulation state --------------------------------------------------

enum class StateSpace { Decision, System }; // u and x

struct StateWriteRecord {
    std::string model;
    TimePoint issue{};
    int horizon_index = 0; // 1-based step of the writing solution
    int interval_steps = 0;
    StateSpace space = StateSpace::Decision;
    VarKind kind = VarKind::ActivePower;
    std::string component;
    TimePoint at{};
};

class SimulationState {
public:
    SimulationState() = default;
    // Timeline slot 0 is the boundary (start - resolution) holding initial
    // conditions; slots 1..n_slots cover the span at the finest resolution.
    SimulationState(TimePoint start, TimeSpan resolution, int n_slots);

    TimeSpan resolution() const { return resolution_; }
    TimePoint start() const { return start_; }

    void preallocate(StateSpace space, VarKind kind, const std::string& component);
    bool has_key(StateSpace space, VarKind kind, const std::string& component) const;

    void write(StateSpace space, VarKind kind, const std::string& component, TimePoint at,
               double value, const StateWriteRecord& rec);
    void write_boundary(StateSpace space, VarKind kind, const std::string& component, double value);

    // Most recent value with timestamp <= t (zero-order hold).
    std::optional<double> latest_at_or_before(StateSpace space, VarKind kind,
                                              const std::string& component, TimePoint t) const;
    // Most recent value with timestamp strictly before t.
    std::optional<double> latest_before(StateSpace space, VarKind kind,
                                        const std::string& component, TimePoint t) const;

    // Consecutive steps (scanning back from just before `t`) during which the
    // on-status equalled its value just before `t`; used for min up/down
    // accounting. Returns 0 when nothing is recorded.
    int run_length_before(StateSpace space, const std::string& component, TimePoint t) const;

    const std::vector<StateWriteRecord>& journal() const { return journal_; }
    void set_boundary_duration(const std::string& component, int hours);
    int boundary_duration(const std::string& component) const;

private:
    struct Series {
        std::vector<double> values;
        std::vector<std::uint8_t> valid;
    };
    int slot_of(TimePoint t) const; // -1 when off-grid or out of range

    TimePoint start_{};
    TimeSpan resolution_{};
    int n_slots_ = 0;
    std::map<std::tuple<int, VarKind, std::string>, Series> series_;
    std::map<std::string, int> boundary_durations_;
    std::vector<StateWriteRecord> journal_;
};

// A decision model's stored solution over its full horizon.
struct DecisionSolution {
    std::string model;
    TimePoint issue{};
    TimeSpan resolution{};
    int horizon_steps = 0;
    int interval_steps = 0; // realized prefix length
    std::map<VarKind, std::map<std::string, std::vector<double>>> values;
    double objective = 0.0;

    TimePoint step_time(int tau) const { return issue + resolution * (tau - 1); }
};

// Writes a solution into the state: decision solutions update u over their
// realized window only (zero-order held onto the state timeline); emulation
// solutions update x. Later writes supersede earlier values at the same
// timestamp.
void update_state(SimulationState& state, const DecisionSolution& solution, StateSpace space);

// Initial-condition values selected by the chronology: InterProblem reads
// the system state x; IntraProblem reads the model's own previous results.
struct InitialConditionValues {
    struct ThermalIc {
        double on = 0.0;
        double power = 0.0;
        int duration_h = 1;
    };
    std::map<std::string, ThermalIc> thermal;
    std::map<std::string, double> storage_soc;
    bool complete = true; // false when some device had no source value
};

InitialConditionValues get_initial_conditions(const SystemModel& sys, TimePoint issue,
                                              const SimulationState& state, Chronology chronology,
                                              const DecisionSolution* own_previous,
                                              TimeSpan own_resolution);

} // namespace opsim
