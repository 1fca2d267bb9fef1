#include "opsim/formulations.hpp"

#include "opsim/logging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace opsim {

NetworkFormulation network_formulation_from_string(const std::string& s) {
    if (s == "CopperPlate") return NetworkFormulation::CopperPlate;
    if (s == "PTDFDCPower") return NetworkFormulation::PTDFDCPower;
    throw ValidationError("unknown network formulation '" + s + "'");
}

const char* to_string(NetworkFormulation n) {
    return n == NetworkFormulation::CopperPlate ? "CopperPlate" : "PTDFDCPower";
}

// ---------------------------------------------------------------------------
// PTDF
// ---------------------------------------------------------------------------

PtdfMatrix compute_ptdf(const SystemModel& sys, const std::string& slack_bus,
                        SlackConvention convention) {
    const int n = static_cast<int>(sys.buses().size());
    const int slack = sys.bus_index(slack_bus);
    if (slack < 0) throw ValidationError("unknown slack bus '" + slack_bus + "'");
    const auto& lines = sys.lines();
    const int nl = static_cast<int>(lines.size());

    // Bus susceptance matrix.
    std::vector<double> bbus(static_cast<size_t>(n) * n, 0.0);
    for (const auto& ln : lines) {
        const int f = sys.bus_index(ln.from_bus);
        const int t = sys.bus_index(ln.to_bus);
        const double y = 1.0 / ln.reactance;
        bbus[static_cast<size_t>(f) * n + f] += y;
        bbus[static_cast<size_t>(t) * n + t] += y;
        bbus[static_cast<size_t>(f) * n + t] -= y;
        bbus[static_cast<size_t>(t) * n + f] -= y;
    }

    // Invert the slack-reduced matrix by Gauss-Jordan.
    const int r = n - 1;
    std::vector<int> keep;
    for (int i = 0; i < n; ++i)
        if (i != slack) keep.push_back(i);
    std::vector<double> a(static_cast<size_t>(r) * 2 * r, 0.0);
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < r; ++j)
            a[static_cast<size_t>(i) * 2 * r + j] =
                bbus[static_cast<size_t>(keep[static_cast<size_t>(i)]) * n + keep[static_cast<size_t>(j)]];
        a[static_cast<size_t>(i) * 2 * r + r + i] = 1.0;
    }
    for (int col = 0; col < r; ++col) {
        int piv = col;
        for (int row = col + 1; row < r; ++row)
            if (std::fabs(a[static_cast<size_t>(row) * 2 * r + col]) >
                std::fabs(a[static_cast<size_t>(piv) * 2 * r + col]))
                piv = row;
        if (std::fabs(a[static_cast<size_t>(piv) * 2 * r + col]) < 1e-9)
            throw ValidationError("disconnected network: reduced susceptance matrix is singular");
        if (piv != col)
            for (int k = 0; k < 2 * r; ++k)
                std::swap(a[static_cast<size_t>(piv) * 2 * r + k], a[static_cast<size_t>(col) * 2 * r + k]);
        const double inv = 1.0 / a[static_cast<size_t>(col) * 2 * r + col];
        for (int k = 0; k < 2 * r; ++k) a[static_cast<size_t>(col) * 2 * r + k] *= inv;
        for (int row = 0; row < r; ++row) {
            if (row == col) continue;
            const double f = a[static_cast<size_t>(row) * 2 * r + col];
            if (f == 0.0) continue;
            for (int k = 0; k < 2 * r; ++k)
                a[static_cast<size_t>(row) * 2 * r + k] -= f * a[static_cast<size_t>(col) * 2 * r + k];
        }
    }

    // X: inverse expanded with a zero slack row/column.
    std::vector<double> x(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j)
            x[static_cast<size_t>(keep[static_cast<size_t>(i)]) * n + keep[static_cast<size_t>(j)]] =
                a[static_cast<size_t>(i) * 2 * r + r + j];

    PtdfMatrix ptdf;
    ptdf.n_lines = nl;
    ptdf.n_buses = n;
    ptdf.slack = slack;
    ptdf.m.assign(static_cast<size_t>(nl) * n, 0.0);
    for (int l = 0; l < nl; ++l) {
        const int f = sys.bus_index(lines[static_cast<size_t>(l)].from_bus);
        const int t = sys.bus_index(lines[static_cast<size_t>(l)].to_bus);
        const double inv_x = 1.0 / lines[static_cast<size_t>(l)].reactance;
        for (int b = 0; b < n; ++b) {
            if (b == slack) continue;
            ptdf.m[static_cast<size_t>(l) * n + b] =
                inv_x * (x[static_cast<size_t>(f) * n + b] - x[static_cast<size_t>(t) * n + b]);
        }
    }
    if (convention == SlackConvention::Distributed) {
        // Uniform distributed slack: subtract each row's mean so rows sum to
        // zero; flows under balanced injections are unchanged.
        for (int l = 0; l < nl; ++l) {
            double mean = 0.0;
            for (int b = 0; b < n; ++b) mean += ptdf.m[static_cast<size_t>(l) * n + b];
            mean /= static_cast<double>(n);
            for (int b = 0; b < n; ++b) ptdf.m[static_cast<size_t>(l) * n + b] -= mean;
        }
    }
    return ptdf;
}

// ---------------------------------------------------------------------------
// build_problem
// ---------------------------------------------------------------------------

namespace {

std::string step_name(const std::string& base, const std::string& comp, int t) {
    return base + "[" + comp + "," + std::to_string(t) + "]";
}

// Injection bookkeeping accumulated during the argument phase and consumed
// by the network builders.
struct BalanceScratch {
    struct VarTerm {
        VarRef var;
        double coef;
        int bus;
    };
    struct LoadTerm {
        ParamRef param;
        double peak;
        int bus;
    };
    std::vector<std::vector<VarTerm>> inj;    // per step (1-based offset 0)
    std::vector<std::vector<LoadTerm>> loads; // per step

    explicit BalanceScratch(int horizon) : inj(static_cast<size_t>(horizon)), loads(static_cast<size_t>(horizon)) {}
};

double linear_cost_per_pu_h(const SystemModel& sys, double cost_per_mwh) {
    return cost_per_mwh * sys.base_power();
}

struct PwlSegment {
    double slope;     // $/h per pu
    double intercept; // $/h at p = 0
};

std::vector<PwlSegment> pwl_segments(const ThermalGen& g) {
    std::vector<PwlSegment> segs;
    for (size_t i = 1; i < g.pwl.size(); ++i) {
        const double slope = (g.pwl[i].cost - g.pwl[i - 1].cost) / (g.pwl[i].power - g.pwl[i - 1].power);
        segs.push_back({slope, g.pwl[i - 1].cost - slope * g.pwl[i - 1].power});
    }
    return segs;
}

} // namespace

void build_thermal_uc(OptContainer& c, const SystemModel& sys, const ThermalGen& g,
                      const BuildOptions& opt) {
    const int H = opt.horizon;
    const double dt = opt.dt_hours;
    if (g.min_up_h > H || g.min_dn_h > H)
        log_warn("thermal '" + g.name + "': min up/down (" + std::to_string(g.min_up_h) + "/" +
                 std::to_string(g.min_dn_h) + " h) exceeds the horizon; window truncated");

    const ParamRef p0 = c.parameter_ref({ParamKind::InitialPower, g.name, 0});
    const ParamRef on0 = c.parameter_ref({ParamKind::InitialOnStatus, g.name, 0});

    const auto segs = g.pwl.empty() ? std::vector<PwlSegment>{} : pwl_segments(g);
    for (int t = 1; t <= H; ++t) {
        const VarRef p = c.variable_ref({VarKind::ActivePower, g.name, t});
        const VarRef on = c.variable_ref({VarKind::OnStatus, g.name, t});
        const VarRef start = c.variable_ref({VarKind::Start, g.name, t});
        const VarRef stop = c.variable_ref({VarKind::Stop, g.name, t});

        // Semicontinuous limits: on*P_lb <= p <= on*P_ub.
        c.add_constraint({step_name("uc_lb", g.name, t), {{p, -1.0}, {on, g.p_min}}, Sense::LE, 0.0, {}});
        c.add_constraint({step_name("uc_ub", g.name, t), {{p, 1.0}, {on, -g.p_max}}, Sense::LE, 0.0, {}});

        // Status transition and start/stop exclusivity.
        if (t == 1) {
            c.add_constraint({step_name("status", g.name, t),
                              {{on, 1.0}, {start, -1.0}, {stop, 1.0}},
                              Sense::EQ,
                              0.0,
                              {{on0, 1.0}}});
        } else {
            const VarRef on_prev = c.variable_ref({VarKind::OnStatus, g.name, t - 1});
            c.add_constraint({step_name("status", g.name, t),
                              {{on, 1.0}, {on_prev, -1.0}, {start, -1.0}, {stop, 1.0}},
                              Sense::EQ,
                              0.0,
                              {}});
        }
        c.add_constraint({step_name("startstop", g.name, t), {{start, 1.0}, {stop, 1.0}}, Sense::LE, 1.0, {}});
        // Transition logic tightenings, valid for binary statuses.
        c.add_constraint({step_name("start_on", g.name, t), {{start, 1.0}, {on, -1.0}}, Sense::LE, 0.0, {}});
        c.add_constraint({step_name("stop_on", g.name, t), {{stop, 1.0}, {on, 1.0}}, Sense::LE, 1.0, {}});

        // Ramps with start/stop relief.
        if (t == 1) {
            c.add_constraint({step_name("ramp_up", g.name, t),
                              {{p, 1.0}, {start, -g.p_min}},
                              Sense::LE,
                              g.ramp_up * dt,
                              {{p0, 1.0}}});
            c.add_constraint({step_name("ramp_dn", g.name, t),
                              {{p, -1.0}, {stop, -g.p_min}},
                              Sense::LE,
                              g.ramp_dn * dt,
                              {{p0, -1.0}}});
        } else {
            const VarRef p_prev = c.variable_ref({VarKind::ActivePower, g.name, t - 1});
            c.add_constraint({step_name("ramp_up", g.name, t),
                              {{p, 1.0}, {p_prev, -1.0}, {start, -g.p_min}},
                              Sense::LE,
                              g.ramp_up * dt,
                              {}});
            c.add_constraint({step_name("ramp_dn", g.name, t),
                              {{p, -1.0}, {p_prev, 1.0}, {stop, -g.p_min}},
                              Sense::LE,
                              g.ramp_dn * dt,
                              {}});
        }

        // Min up/down rolling windows.
        if (g.min_up_h >= 2) {
            LinearConstraint row;
            row.name = step_name("min_up", g.name, t);
            for (int tp = std::max(1, t - g.min_up_h + 1); tp <= t; ++tp)
                row.terms.push_back({c.variable_ref({VarKind::Start, g.name, tp}), 1.0});
            row.terms.push_back({on, -1.0});
            row.sense = Sense::LE;
            row.rhs_base = 0.0;
            c.add_constraint(std::move(row));
        }
        if (g.min_dn_h >= 2) {
            LinearConstraint row;
            row.name = step_name("min_dn", g.name, t);
            for (int tp = std::max(1, t - g.min_dn_h + 1); tp <= t; ++tp)
                row.terms.push_back({c.variable_ref({VarKind::Stop, g.name, tp}), 1.0});
            row.terms.push_back({on, 1.0});
            row.sense = Sense::LE;
            row.rhs_base = 1.0;
            c.add_constraint(std::move(row));
        }

        // Residual min up/down from the initial duration, driven by
        // ForcedOn/ForcedOff parameters refreshed each execution.
        if (g.min_up_h >= 2 && t <= g.min_up_h - 1) {
            const ParamRef forced = c.parameter_ref({ParamKind::ForcedOn, g.name, t});
            c.add_constraint({step_name("forced_on", g.name, t), {{on, -1.0}}, Sense::LE, 0.0,
                              {{forced, -1.0}}});
        }
        if (g.min_dn_h >= 2 && t <= g.min_dn_h - 1) {
            const ParamRef forced = c.parameter_ref({ParamKind::ForcedOff, g.name, t});
            c.add_constraint({step_name("forced_off", g.name, t), {{on, 1.0}}, Sense::LE, 1.0,
                              {{forced, -1.0}}});
        }

        // Costs: variable (linear or PWL epigraph), no-load, startup.
        if (segs.empty()) {
            c.add_objective_term(p, linear_cost_per_pu_h(sys, g.variable_cost) * dt);
        } else {
            const VarRef cost = c.variable_ref({VarKind::CostEpigraph, g.name, t});
            for (size_t s = 0; s < segs.size(); ++s) {
                c.add_constraint({step_name("pwl" + std::to_string(s), g.name, t),
                                  {{cost, 1.0}, {p, -segs[s].slope}, {on, -segs[s].intercept}},
                                  Sense::GE,
                                  0.0,
                                  {}});
            }
            c.add_objective_term(cost, dt);
        }
        c.add_objective_term(on, g.no_load_cost * dt);
        c.add_objective_term(start, g.startup_cost);
    }
}

void build_thermal_dispatch(OptContainer& c, const SystemModel& sys, const ThermalGen& g,
                            const BuildOptions& opt, const ThermalBuildFlags& flags) {
    const int H = opt.horizon;
    const double dt = opt.dt_hours;
    const ParamRef p0 = c.parameter_ref({ParamKind::InitialPower, g.name, 0});

    const auto segs = g.pwl.empty() ? std::vector<PwlSegment>{} : pwl_segments(g);
    for (int t = 1; t <= H; ++t) {
        const VarRef p = c.variable_ref({VarKind::ActivePower, g.name, t});

        // Ramps; with a semicontinuous feedforward attached the commitment
        // transitions relieve them the way start/stop variables do in the
        // unit-commitment formulation.
        std::vector<ParamSlot> up_slots;
        std::vector<ParamSlot> dn_slots;
        if (flags.semicontinuous) {
            up_slots.push_back({c.parameter_ref({ParamKind::FeedforwardStart, g.name, t}), g.p_min});
            dn_slots.push_back({c.parameter_ref({ParamKind::FeedforwardStop, g.name, t}), g.p_min});
        }
        if (t == 1) {
            up_slots.push_back({p0, 1.0});
            dn_slots.push_back({p0, -1.0});
            c.add_constraint({step_name("ramp_up", g.name, t), {{p, 1.0}}, Sense::LE,
                              g.ramp_up * dt, up_slots});
            c.add_constraint({step_name("ramp_dn", g.name, t), {{p, -1.0}}, Sense::LE,
                              g.ramp_dn * dt, dn_slots});
        } else {
            const VarRef p_prev = c.variable_ref({VarKind::ActivePower, g.name, t - 1});
            c.add_constraint({step_name("ramp_up", g.name, t), {{p, 1.0}, {p_prev, -1.0}},
                              Sense::LE, g.ramp_up * dt, up_slots});
            c.add_constraint({step_name("ramp_dn", g.name, t), {{p, -1.0}, {p_prev, 1.0}},
                              Sense::LE, g.ramp_dn * dt, dn_slots});
        }

        if (segs.empty()) {
            c.add_objective_term(p, linear_cost_per_pu_h(sys, g.variable_cost) * dt);
        } else {
            const VarRef cost = c.variable_ref({VarKind::CostEpigraph, g.name, t});
            for (size_t s = 0; s < segs.size(); ++s) {
                LinearConstraint row;
                row.name = step_name("pwl" + std::to_string(s), g.name, t);
                row.terms = {{cost, 1.0}, {p, -segs[s].slope}};
                row.sense = Sense::GE;
                if (flags.semicontinuous) {
                    row.rhs_base = 0.0;
                    row.rhs_params = {{c.parameter_ref({ParamKind::FeedforwardOnStatus, g.name, t}),
                                       segs[s].intercept}};
                } else {
                    row.rhs_base = segs[s].intercept;
                }
                c.add_constraint(std::move(row));
            }
            c.add_objective_term(cost, dt);
        }
    }
}

void build_renewable(OptContainer& c, const SystemModel& sys, const RenewableGen& g,
                     const BuildOptions& opt) {
    for (int t = 1; t <= opt.horizon; ++t) {
        const VarRef p = c.variable_ref({VarKind::ActivePower, g.name, t});
        const ParamRef avail = c.parameter_ref({ParamKind::ForecastBound, g.name, t});
        c.add_constraint({step_name("re_ub", g.name, t), {{p, 1.0}}, Sense::LE, 0.0,
                          {{avail, g.rating}}});
        if (g.curtailment_cost > 0.0) {
            // cost * (available - p); the available-energy part enters the
            // objective constant through the same parameter.
            const double per_pu_h = linear_cost_per_pu_h(sys, g.curtailment_cost) * opt.dt_hours;
            c.add_objective_term(p, -per_pu_h);
            c.add_objective_constant_param(avail, per_pu_h * g.rating);
        }
    }
}

void build_storage(OptContainer& c, const SystemModel& sys, const Storage& u,
                   const BuildOptions& opt) {
    (void)sys;
    const double dt = opt.dt_hours;
    const ParamRef soc0 = c.parameter_ref({ParamKind::InitialSoC, u.name, 0});
    for (int t = 1; t <= opt.horizon; ++t) {
        const VarRef soc = c.variable_ref({VarKind::SoC, u.name, t});
        const VarRef ch = c.variable_ref({VarKind::Charge, u.name, t});
        const VarRef dis = c.variable_ref({VarKind::Discharge, u.name, t});
        LinearConstraint row;
        row.name = step_name("soc", u.name, t);
        row.terms = {{soc, 1.0}, {ch, -u.eff_charge * dt}, {dis, dt / u.eff_discharge}};
        row.sense = Sense::EQ;
        if (t == 1) {
            row.rhs_params = {{soc0, 1.0}};
        } else {
            row.terms.push_back({c.variable_ref({VarKind::SoC, u.name, t - 1}), -1.0});
        }
        c.add_constraint(std::move(row));
    }
}

void build_reserve(OptContainer& c, const SystemModel& sys, const ReserveProduct& product,
                   const BuildOptions& opt, const std::map<std::string, ThermalBuildFlags>& thermal_flags,
                   bool uc_mode) {
    for (int t = 1; t <= opt.horizon; ++t) {
        LinearConstraint req;
        req.name = step_name("req", product.name, t);
        req.sense = Sense::GE;
        req.rhs_base = 0.0;
        // Requirement series values are MW; the row lives in per-unit.
        req.rhs_params = {{c.parameter_ref({ParamKind::RequirementRHS, product.requirement_series_name, t}),
                           1.0 / sys.base_power()}};
        for (const auto& dev : product.contributing_devices) {
            const VarRef r = c.variable_ref({VarKind::Reserve, dev, t});
            req.terms.push_back({r, 1.0});
            if (const ThermalGen* g = sys.find_thermal(dev)) {
                const VarRef p = c.variable_ref({VarKind::ActivePower, dev, t});
                if (uc_mode) {
                    const VarRef on = c.variable_ref({VarKind::OnStatus, dev, t});
                    c.add_constraint({step_name("headroom_" + product.name, dev, t),
                                      {{p, 1.0}, {r, 1.0}, {on, -g->p_max}},
                                      Sense::LE,
                                      0.0,
                                      {}});
                } else if (thermal_flags.count(dev) != 0 && thermal_flags.at(dev).semicontinuous) {
                    const ParamRef on = c.parameter_ref({ParamKind::FeedforwardOnStatus, dev, t});
                    c.add_constraint({step_name("headroom_" + product.name, dev, t),
                                      {{p, 1.0}, {r, 1.0}},
                                      Sense::LE,
                                      0.0,
                                      {{on, g->p_max}}});
                } else {
                    c.add_constraint({step_name("headroom_" + product.name, dev, t),
                                      {{p, 1.0}, {r, 1.0}},
                                      Sense::LE,
                                      g->p_max,
                                      {}});
                }
            } else if (const Storage* s = sys.find_storage(dev)) {
                const VarRef dis = c.variable_ref({VarKind::Discharge, dev, t});
                const VarRef ch = c.variable_ref({VarKind::Charge, dev, t});
                c.add_constraint({step_name("headroom_" + product.name, dev, t),
                                  {{r, 1.0}, {dis, 1.0}, {ch, -1.0}},
                                  Sense::LE,
                                  s->p_discharge_max,
                                  {}});
            }
        }
        c.add_constraint(std::move(req));
    }
}

OptContainer build_problem(const ProblemTemplate& tmpl, const SystemModel& sys,
                           const std::string& model_name, const BuildOptions& opt,
                           const std::vector<FeedforwardSpec>& feedforwards) {
    const int H = opt.horizon;
    if (H <= 0) throw ContractError("build_problem: horizon must be positive");

    // Template coverage.
    auto formulation_of = [&](const char* type, bool present) -> std::string {
        if (!present) return "";
        auto it = tmpl.device_map.find(type);
        if (it == tmpl.device_map.end())
            throw ValidationError("template has no formulation for component type '" +
                                  std::string(type) + "'");
        return it->second;
    };
    const std::string thermal_form = formulation_of("ThermalGen", !sys.thermal_gens().empty());
    const std::string renewable_form = formulation_of("RenewableGen", !sys.renewable_gens().empty());
    const std::string load_form = formulation_of("Load", !sys.loads().empty());
    const std::string storage_form = formulation_of("Storage", !sys.storages().empty());
    if (!thermal_form.empty() && thermal_form != kThermalUC && thermal_form != kThermalDispatch)
        throw ValidationError("unknown thermal formulation '" + thermal_form + "'");
    if (!renewable_form.empty() && renewable_form != kRenewableFullDispatch)
        throw ValidationError("unknown renewable formulation '" + renewable_form + "'");
    if (!load_form.empty() && load_form != kStaticPowerLoad)
        throw ValidationError("unknown load formulation '" + load_form + "'");
    if (!storage_form.empty() && storage_form != kStorageBasicDispatch)
        throw ValidationError("unknown storage formulation '" + storage_form + "'");
    std::vector<const ReserveProduct*> active_reserves;
    for (const auto& r : sys.reserves()) {
        auto it = tmpl.service_map.find(r.name);
        if (it == tmpl.service_map.end())
            throw ValidationError("template has no formulation for reserve '" + r.name + "'");
        if (it->second != kRangeReserve)
            throw ValidationError("unknown reserve formulation '" + it->second + "'");
        active_reserves.push_back(&r);
    }
    const bool uc_mode = thermal_form == kThermalUC;

    // Feedforward flags per thermal component.
    std::map<std::string, ThermalBuildFlags> thermal_flags;
    for (const auto& g : sys.thermal_gens()) thermal_flags[g.name] = {};
    for (const auto& ff : feedforwards) {
        if (ff.kind != FeedforwardKind::SemiContinuous) continue;
        if (uc_mode)
            throw ValidationError("semicontinuous feedforward cannot target a unit-commitment model");
        for (const auto& comp : ff.components) {
            if (!thermal_flags.count(comp))
                throw ValidationError("semicontinuous feedforward component '" + comp +
                                      "' is not a thermal unit");
            thermal_flags[comp].semicontinuous = true;
        }
    }

    OptContainer c(model_name);
    BalanceScratch scratch(H);

    // --- argument phase: variables and parameters for every formulation ---
    for (const auto& g : sys.thermal_gens()) {
        if (thermal_form.empty()) break;
        const int bus = sys.bus_index(g.bus);
        const bool semi = thermal_flags[g.name].semicontinuous;
        for (int t = 1; t <= H; ++t) {
            // In dispatch mode the static range applies unless commitments
            // arrive by feedforward, in which case the rows take over.
            double lb = uc_mode || semi ? 0.0 : g.p_min;
            const VarRef p = c.add_variable({VarKind::ActivePower, g.name, t}, lb, g.p_max, false);
            scratch.inj[static_cast<size_t>(t - 1)].push_back({p, 1.0, bus});
            if (uc_mode) {
                c.add_variable({VarKind::OnStatus, g.name, t}, 0.0, 1.0, true);
                c.add_variable({VarKind::Start, g.name, t}, 0.0, 1.0, true);
                c.add_variable({VarKind::Stop, g.name, t}, 0.0, 1.0, true);
            }
            if (!g.pwl.empty())
                c.add_variable({VarKind::CostEpigraph, g.name, t}, 0.0,
                               std::numeric_limits<double>::infinity(), false);
            if (semi) {
                c.add_parameter({ParamKind::FeedforwardOnStatus, g.name, t}, 1.0);
                c.add_parameter({ParamKind::FeedforwardStart, g.name, t}, 0.0);
                c.add_parameter({ParamKind::FeedforwardStop, g.name, t}, 0.0);
            }
        }
        const auto& init = g.initial;
        c.add_parameter({ParamKind::InitialPower, g.name, 0}, init ? init->power : 0.0);
        if (uc_mode) {
            c.add_parameter({ParamKind::InitialOnStatus, g.name, 0},
                            init && init->on ? 1.0 : 0.0);
            for (int t = 1; t <= std::min(H, g.min_up_h - 1); ++t) {
                const bool forced = init && init->on && g.min_up_h - init->duration_h >= t;
                c.add_parameter({ParamKind::ForcedOn, g.name, t}, forced ? 1.0 : 0.0);
            }
            for (int t = 1; t <= std::min(H, g.min_dn_h - 1); ++t) {
                const bool forced = init && !init->on && g.min_dn_h - init->duration_h >= t;
                c.add_parameter({ParamKind::ForcedOff, g.name, t}, forced ? 1.0 : 0.0);
            }
        }
    }
    for (const auto& g : sys.renewable_gens()) {
        if (renewable_form.empty()) break;
        const int bus = sys.bus_index(g.bus);
        for (int t = 1; t <= H; ++t) {
            const VarRef p = c.add_variable({VarKind::ActivePower, g.name, t}, 0.0, g.rating, false);
            scratch.inj[static_cast<size_t>(t - 1)].push_back({p, 1.0, bus});
            c.add_parameter({ParamKind::ForecastBound, g.name, t}, 1.0);
        }
    }
    for (const auto& d : sys.loads()) {
        if (load_form.empty()) break;
        const int bus = sys.bus_index(d.bus);
        for (int t = 1; t <= H; ++t) {
            const ParamRef fr = c.add_parameter({ParamKind::ForecastBound, d.name, t}, 1.0);
            scratch.loads[static_cast<size_t>(t - 1)].push_back({fr, d.peak, bus});
        }
    }
    for (const auto& s : sys.storages()) {
        if (storage_form.empty()) break;
        const int bus = sys.bus_index(s.bus);
        for (int t = 1; t <= H; ++t) {
            c.add_variable({VarKind::SoC, s.name, t}, 0.0, s.energy_cap, false);
            const VarRef ch = c.add_variable({VarKind::Charge, s.name, t}, 0.0, s.p_charge_max, false);
            const VarRef dis =
                c.add_variable({VarKind::Discharge, s.name, t}, 0.0, s.p_discharge_max, false);
            scratch.inj[static_cast<size_t>(t - 1)].push_back({dis, 1.0, bus});
            scratch.inj[static_cast<size_t>(t - 1)].push_back({ch, -1.0, bus});
        }
        c.add_parameter({ParamKind::InitialSoC, s.name, 0},
                        s.initial_soc ? *s.initial_soc : 0.5 * s.energy_cap);
    }
    for (const ReserveProduct* r : active_reserves) {
        for (int t = 1; t <= H; ++t) {
            for (const auto& dev : r->contributing_devices)
                c.add_variable({VarKind::Reserve, dev, t}, 0.0,
                               std::numeric_limits<double>::infinity(), false);
            c.add_parameter({ParamKind::RequirementRHS, r->requirement_series_name, t}, 0.0);
        }
    }
    const int slack_bus_idx = sys.bus_index(sys.slack_bus().name);
    if (opt.is_emulator) {
        for (int t = 1; t <= H; ++t) {
            const VarRef sp = c.add_variable({VarKind::Slack, "balance_pos", t}, 0.0, 0.0, false);
            const VarRef sn = c.add_variable({VarKind::Slack, "balance_neg", t}, 0.0, 0.0, false);
            scratch.inj[static_cast<size_t>(t - 1)].push_back({sp, 1.0, slack_bus_idx});
            scratch.inj[static_cast<size_t>(t - 1)].push_back({sn, -1.0, slack_bus_idx});
            c.add_objective_term(sp, opt.balance_slack_penalty);
            c.add_objective_term(sn, opt.balance_slack_penalty);
        }
    }

    // --- network constraints ---
    for (int t = 1; t <= H; ++t) {
        const auto& inj = scratch.inj[static_cast<size_t>(t - 1)];
        const auto& loads = scratch.loads[static_cast<size_t>(t - 1)];
        if (inj.empty()) throw ValidationError("empty balance: no injection devices in the system");
        LinearConstraint bal;
        bal.name = "balance[" + std::to_string(t) + "]";
        bal.sense = Sense::EQ;
        bal.rhs_base = 0.0;
        for (const auto& term : inj) bal.terms.push_back({term.var, term.coef});
        for (const auto& ld : loads) bal.rhs_params.push_back({ld.param, ld.peak});
        c.add_constraint(std::move(bal));
    }
    if (tmpl.network == NetworkFormulation::PTDFDCPower) {
        const PtdfMatrix ptdf = compute_ptdf(sys, sys.slack_bus().name);
        for (int l = 0; l < ptdf.n_lines; ++l) {
            const auto& line = sys.lines()[static_cast<size_t>(l)];
            for (int t = 1; t <= H; ++t) {
                const auto& inj = scratch.inj[static_cast<size_t>(t - 1)];
                const auto& loads = scratch.loads[static_cast<size_t>(t - 1)];
                LinearConstraint pos;
                pos.name = "flow_pos[" + line.name + "," + std::to_string(t) + "]";
                pos.sense = Sense::LE;
                pos.rhs_base = line.rating;
                LinearConstraint neg;
                neg.name = "flow_neg[" + line.name + "," + std::to_string(t) + "]";
                neg.sense = Sense::LE;
                neg.rhs_base = line.rating;
                for (const auto& term : inj) {
                    const double f = ptdf.at(l, term.bus) * term.coef;
                    if (std::fabs(f) < 1e-12) continue;
                    pos.terms.push_back({term.var, f});
                    neg.terms.push_back({term.var, -f});
                }
                for (const auto& ld : loads) {
                    const double f = ptdf.at(l, ld.bus) * ld.peak;
                    if (std::fabs(f) < 1e-12) continue;
                    pos.rhs_params.push_back({ld.param, f});
                    neg.rhs_params.push_back({ld.param, -f});
                }
                if (!pos.terms.empty()) c.add_constraint(std::move(pos));
                if (!neg.terms.empty()) c.add_constraint(std::move(neg));
            }
        }
    }

    // --- device constraints ---
    if (!thermal_form.empty()) {
        for (const auto& g : sys.thermal_gens()) {
            if (uc_mode)
                build_thermal_uc(c, sys, g, opt);
            else
                build_thermal_dispatch(c, sys, g, opt, thermal_flags[g.name]);
        }
    }
    if (!renewable_form.empty())
        for (const auto& g : sys.renewable_gens()) build_renewable(c, sys, g, opt);
    if (!storage_form.empty())
        for (const auto& s : sys.storages()) build_storage(c, sys, s, opt);

    // --- services ---
    for (const ReserveProduct* r : active_reserves)
        build_reserve(c, sys, *r, opt, thermal_flags, uc_mode);

    // --- feedforwards ---
    for (const auto& ff : feedforwards) {
        switch (ff.kind) {
            case FeedforwardKind::SemiContinuous:
                attach_semicontinuous(c, ff, sys, H);
                break;
            case FeedforwardKind::UpperBound:
            case FeedforwardKind::LowerBound:
                attach_bound(c, ff, H);
                break;
            case FeedforwardKind::EnergyTarget:
                attach_energy_target(c, ff, sys, H, opt.energy_target_penalty);
                break;
        }
    }

    // --- checks ---
    const SanityReport report = c.sanity_check();
    for (const auto& f : report.findings)
        (f.fatal ? log_error : log_warn)("sanity [" + model_name + "] " + f.category + ": " + f.message);
    if (report.has_fatal())
        throw ValidationError("fatal sanity findings in model '" + model_name + "':\n" +
                              report.to_string());
    return c;
}

} // namespace opsim
