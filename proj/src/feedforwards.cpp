#include "opsim/feedforwards.hpp"

#include "opsim/sequence.hpp"

#include <cmath>
#include <limits>

namespace opsim {

FeedforwardKind feedforward_kind_from_string(const std::string& s) {
    if (s == "SemiContinuous") return FeedforwardKind::SemiContinuous;
    if (s == "UpperBound") return FeedforwardKind::UpperBound;
    if (s == "LowerBound") return FeedforwardKind::LowerBound;
    if (s == "EnergyTarget") return FeedforwardKind::EnergyTarget;
    throw ValidationError("unknown feedforward kind '" + s + "'");
}

const char* to_string(FeedforwardKind k) {
    switch (k) {
        case FeedforwardKind::SemiContinuous: return "SemiContinuous";
        case FeedforwardKind::UpperBound: return "UpperBound";
        case FeedforwardKind::LowerBound: return "LowerBound";
        case FeedforwardKind::EnergyTarget: return "EnergyTarget";
    }
    return "?";
}

namespace {

ParamRef get_or_add_param(OptContainer& c, const ParamKey& key, double init) {
    return c.has_parameter(key) ? c.parameter_ref(key) : c.add_parameter(key, init);
}

std::string step_name(const std::string& base, const std::string& comp, int t) {
    return base + "[" + comp + "," + std::to_string(t) + "]";
}

} // namespace

void attach_semicontinuous(OptContainer& target, const FeedforwardSpec& spec,
                           const SystemModel& sys, int horizon) {
    for (const auto& comp : spec.components) {
        const ThermalGen* g = sys.find_thermal(comp);
        if (g == nullptr)
            throw ValidationError("semicontinuous feedforward: '" + comp + "' is not a thermal unit");
        for (int t = 1; t <= horizon; ++t) {
            const VarKey pkey{spec.target_kind, comp, t};
            if (!target.has_variable(pkey))
                throw ContractError("semicontinuous feedforward: target variable " + pkey.str() +
                                    " missing");
            const VarRef p = target.variable_ref(pkey);
            // The commitment status is substituted numerically into the RHS
            // on every update: p <= P_ub*v and -p <= -P_lb*v.
            const ParamRef v = get_or_add_param(target, {ParamKind::FeedforwardOnStatus, comp, t}, 1.0);
            target.set_variable_bounds(p, 0.0, target.variable(p).ub);
            target.add_constraint({step_name("ff_ub", comp, t), {{p, 1.0}}, Sense::LE, 0.0,
                                   {{v, g->p_max}}});
            target.add_constraint({step_name("ff_lb", comp, t), {{p, -1.0}}, Sense::LE, 0.0,
                                   {{v, -g->p_min}}});
        }
    }
}

void attach_bound(OptContainer& target, const FeedforwardSpec& spec, int horizon) {
    const bool upper = spec.kind == FeedforwardKind::UpperBound;
    for (const auto& comp : spec.components) {
        for (int t = 1; t <= horizon; ++t) {
            const VarKey vkey{spec.target_kind, comp, t};
            if (!target.has_variable(vkey))
                throw ContractError("bound feedforward: target variable " + vkey.str() + " missing");
            const VarRef v = target.variable_ref(vkey);
            const ParamRef param = get_or_add_param(
                target, {ParamKind::FeedforwardBound, comp, t},
                upper ? target.variable(v).ub : 0.0);
            if (upper)
                target.add_constraint({step_name("ffbound_up", comp, t), {{v, 1.0}}, Sense::LE, 0.0,
                                       {{param, 1.0}}});
            else
                target.add_constraint({step_name("ffbound_lo", comp, t), {{v, -1.0}}, Sense::LE, 0.0,
                                       {{param, -1.0}}});
        }
    }
}

void attach_energy_target(OptContainer& target, const FeedforwardSpec& spec,
                          const SystemModel& sys, int horizon, double penalty_per_mwh) {
    for (const auto& comp : spec.components) {
        if (sys.find_storage(comp) == nullptr)
            throw ValidationError("energy-target feedforward: '" + comp + "' is not a storage unit");
        const VarKey skey{VarKind::SoC, comp, horizon};
        if (!target.has_variable(skey))
            throw ContractError("energy-target feedforward: variable " + skey.str() + " missing");
        const VarRef soc = target.variable_ref(skey);
        const VarRef slack = target.add_variable({VarKind::Slack, comp, horizon}, 0.0,
                                                 std::numeric_limits<double>::infinity(), false);
        const ParamRef param = get_or_add_param(target, {ParamKind::EnergyTarget, comp, 0}, 0.0);
        target.add_constraint({"energy_target[" + comp + "]", {{soc, 1.0}, {slack, 1.0}}, Sense::GE,
                               0.0, {{param, 1.0}}});
        target.add_objective_term(slack, penalty_per_mwh * sys.base_power());
    }
}

void update_feedforward_params(OptContainer& target, const std::vector<FeedforwardSpec>& specs,
                               const SimulationState& state, const SystemModel& sys,
                               TimePoint issue, TimeSpan target_resolution, int horizon) {
    auto read = [&](VarKind kind, const std::string& comp, TimePoint at) {
        const auto v = state.latest_at_or_before(StateSpace::Decision, kind, comp, at);
        if (!v)
            throw ValidationError("state gap: no " + std::string(to_string(kind)) + " value for '" +
                                  comp + "' at or before " + format_iso8601(at));
        return *v;
    };

    for (const auto& spec : specs) {
        for (const auto& comp : spec.components) {
            switch (spec.kind) {
                case FeedforwardKind::SemiContinuous: {
                    const bool with_transitions =
                        target.has_parameter({ParamKind::FeedforwardStart, comp, 1});
                    for (int t = 1; t <= horizon; ++t) {
                        const TimePoint at = issue + target_resolution * (t - 1);
                        const double raw = read(spec.source_kind, comp, at);
                        const double on = raw > 0.5 ? 1.0 : 0.0;
                        target.update_parameter({ParamKind::FeedforwardOnStatus, comp, t}, on);
                        if (with_transitions) {
                            const auto prev_raw = state.latest_at_or_before(
                                StateSpace::Decision, spec.source_kind, comp, at - target_resolution);
                            const double prev = prev_raw && *prev_raw > 0.5 ? 1.0 : 0.0;
                            target.update_parameter({ParamKind::FeedforwardStart, comp, t},
                                                    std::max(0.0, on - prev));
                            target.update_parameter({ParamKind::FeedforwardStop, comp, t},
                                                    std::max(0.0, prev - on));
                        }
                    }
                    break;
                }
                case FeedforwardKind::UpperBound:
                case FeedforwardKind::LowerBound: {
                    for (int t = 1; t <= horizon; ++t) {
                        const TimePoint at = issue + target_resolution * (t - 1);
                        target.update_parameter({ParamKind::FeedforwardBound, comp, t},
                                                read(spec.source_kind, comp, at));
                    }
                    break;
                }
                case FeedforwardKind::EnergyTarget: {
                    const TimePoint end = issue + target_resolution * (horizon - 1);
                    target.update_parameter({ParamKind::EnergyTarget, comp, 0},
                                            read(spec.source_kind, comp, end));
                    break;
                }
            }
        }
    }
}

} // namespace opsim
