#pragma once

#include "opsim/opt_container.hpp"
#include "opsim/system_model.hpp"
#include "opsim/time.hpp"

#include <string>
#include <vector>

namespace opsim {

// Coupling constraints that inject one model's solution into another. The
// constraint rows are attached at build time; their parameter values are
// refreshed from the simulation state before every solve.

enum class FeedforwardKind { SemiContinuous, UpperBound, LowerBound, EnergyTarget };

FeedforwardKind feedforward_kind_from_string(const std::string& s);
const char* to_string(FeedforwardKind k);

struct FeedforwardSpec {
    FeedforwardKind kind = FeedforwardKind::SemiContinuous;
    std::string source_model;
    std::string target_model;
    VarKind source_kind = VarKind::OnStatus;
    VarKind target_kind = VarKind::ActivePower;
    std::vector<std::string> components; // concrete component names
};

// Replaces the static bounds of the target power variables with
// P_lb * v <= p <= P_ub * v rows, v being a FeedforwardOnStatus parameter
// substituted numerically into the RHS on every update.
void attach_semicontinuous(OptContainer& target, const FeedforwardSpec& spec,
                           const SystemModel& sys, int horizon);

// p <= param (UpperBound) or p >= param (LowerBound) on every step.
void attach_bound(OptContainer& target, const FeedforwardSpec& spec, int horizon);

// SoC_H >= param - slack with the slack penalized in the objective.
void attach_energy_target(OptContainer& target, const FeedforwardSpec& spec,
                          const SystemModel& sys, int horizon, double penalty_per_mwh);

class SimulationState; // sequence module

// Refreshes every feedforward parameter of `target` from the latest state.
// Target step tau at timestamp T reads the most recent source value at or
// before T (zero-order hold across resolution mismatches). Throws on a state
// gap (no source value at or before a required timestamp).
void update_feedforward_params(OptContainer& target, const std::vector<FeedforwardSpec>& specs,
                               const SimulationState& state, const SystemModel& sys,
                               TimePoint issue, TimeSpan target_resolution, int horizon);

} // namespace opsim
