#include "opsim/opt_container.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace opsim {

using ordered_json = nlohmann::ordered_json;

namespace {

const std::pair<VarKind, const char*> kVarKindNames[] = {
    {VarKind::ActivePower, "ActivePower"}, {VarKind::OnStatus, "OnStatus"},
    {VarKind::Start, "Start"},             {VarKind::Stop, "Stop"},
    {VarKind::Reserve, "Reserve"},         {VarKind::SoC, "SoC"},
    {VarKind::Charge, "Charge"},           {VarKind::Discharge, "Discharge"},
    {VarKind::Flow, "Flow"},               {VarKind::Slack, "Slack"},
    {VarKind::CostEpigraph, "CostEpigraph"},
};

const std::pair<ParamKind, const char*> kParamKindNames[] = {
    {ParamKind::ForecastBound, "ForecastBound"},
    {ParamKind::RequirementRHS, "RequirementRHS"},
    {ParamKind::FeedforwardOnStatus, "FeedforwardOnStatus"},
    {ParamKind::FeedforwardStart, "FeedforwardStart"},
    {ParamKind::FeedforwardStop, "FeedforwardStop"},
    {ParamKind::FeedforwardBound, "FeedforwardBound"},
    {ParamKind::EnergyTarget, "EnergyTarget"},
    {ParamKind::InitialPower, "InitialPower"},
    {ParamKind::InitialOnStatus, "InitialOnStatus"},
    {ParamKind::InitialSoC, "InitialSoC"},
    {ParamKind::ForcedOn, "ForcedOn"},
    {ParamKind::ForcedOff, "ForcedOff"},
};

const char* sense_name(Sense s) {
    switch (s) {
        case Sense::LE: return "<=";
        case Sense::EQ: return "==";
        default: return ">=";
    }
}

Sense sense_from_string(const std::string& s) {
    if (s == "<=") return Sense::LE;
    if (s == "==") return Sense::EQ;
    if (s == ">=") return Sense::GE;
    throw ValidationError("unknown constraint sense '" + s + "'");
}

} // namespace

const char* to_string(VarKind k) {
    for (const auto& [kind, name] : kVarKindNames)
        if (kind == k) return name;
    return "?";
}

const char* to_string(ParamKind k) {
    for (const auto& [kind, name] : kParamKindNames)
        if (kind == k) return name;
    return "?";
}

VarKind var_kind_from_string(const std::string& s) {
    for (const auto& [kind, name] : kVarKindNames)
        if (s == name) return kind;
    throw ValidationError("unknown variable kind '" + s + "'");
}

ParamKind param_kind_from_string(const std::string& s) {
    for (const auto& [kind, name] : kParamKindNames)
        if (s == name) return kind;
    throw ValidationError("unknown parameter kind '" + s + "'");
}

std::string VarKey::str() const {
    return std::string(to_string(kind)) + "(" + component + "," + std::to_string(t) + ")";
}

std::string ParamKey::str() const {
    return std::string(to_string(kind)) + "(" + component + "," + std::to_string(t) + ")";
}

bool SanityReport::has_fatal() const {
    for (const auto& f : findings)
        if (f.fatal) return true;
    return false;
}

std::string SanityReport::to_string() const {
    std::ostringstream os;
    for (const auto& f : findings)
        os << (f.fatal ? "[fatal] " : "[warn] ") << f.category << ": " << f.message << "\n";
    return os.str();
}

OptContainer::OptContainer(std::string model_name) : name_(std::move(model_name)) {}

VarRef OptContainer::add_variable(const VarKey& key, double lb, double ub, bool integral) {
    if (var_index_.contains(key))
        throw ContractError("duplicate variable key " + key.str());
    if (lb > ub)
        throw ContractError("inverted bounds for " + key.str() + ": lb=" + std::to_string(lb) +
                            " > ub=" + std::to_string(ub));
    const VarRef ref = static_cast<VarRef>(vars_.size());
    vars_.push_back(Variable{key, lb, ub, integral});
    var_index_.emplace(key, ref);
    obj_coef_base_.push_back(0.0);
    obj_coef_params_.emplace_back();
    obj_coef_effective_.push_back(0.0);
    return ref;
}

ParamRef OptContainer::add_parameter(const ParamKey& key, double initial_value) {
    if (param_index_.contains(key))
        throw ContractError("duplicate parameter key " + key.str());
    if (!std::isfinite(initial_value))
        throw ContractError("nonfinite initial value for parameter " + key.str());
    const ParamRef ref = static_cast<ParamRef>(params_.size());
    params_.push_back(Parameter{key, initial_value, {}, {}, false});
    param_index_.emplace(key, ref);
    return ref;
}

ConstraintRef OptContainer::add_constraint(LinearConstraint c) {
    std::vector<bool> seen(vars_.size(), false);
    for (const auto& term : c.terms) {
        if (term.var < 0 || term.var >= n_variables())
            throw ContractError("constraint '" + c.name + "' references unknown variable index " +
                                std::to_string(term.var));
        if (!std::isfinite(term.coef))
            throw ContractError("constraint '" + c.name + "' has nonfinite coefficient on " +
                                vars_[static_cast<size_t>(term.var)].key.str());
        if (seen[static_cast<size_t>(term.var)])
            throw ContractError("constraint '" + c.name + "' has duplicate variable " +
                                vars_[static_cast<size_t>(term.var)].key.str());
        seen[static_cast<size_t>(term.var)] = true;
    }
    for (const auto& slot : c.rhs_params) {
        if (slot.param < 0 || slot.param >= static_cast<ParamRef>(params_.size()))
            throw ContractError("constraint '" + c.name + "' references unknown parameter index " +
                                std::to_string(slot.param));
        if (!std::isfinite(slot.mult))
            throw ContractError("constraint '" + c.name + "' has nonfinite parameter multiplier");
    }
    const ConstraintRef ref = static_cast<ConstraintRef>(cons_.size());
    for (const auto& slot : c.rhs_params)
        params_[static_cast<size_t>(slot.param)].rhs_slots.push_back(ref);
    cons_.push_back(std::move(c));
    rhs_effective_.push_back(0.0);
    refresh_rhs(ref);
    return ref;
}

void OptContainer::add_objective_term(VarRef var, double coef) {
    if (var < 0 || var >= n_variables())
        throw ContractError("objective references unknown variable index " + std::to_string(var));
    if (!std::isfinite(coef)) throw ContractError("nonfinite objective coefficient");
    obj_coef_base_[static_cast<size_t>(var)] += coef;
    refresh_obj_coef(var);
}

void OptContainer::add_objective_param(VarRef var, ParamRef param, double mult) {
    if (var < 0 || var >= n_variables())
        throw ContractError("objective references unknown variable index " + std::to_string(var));
    obj_coef_params_[static_cast<size_t>(var)].push_back(ParamSlot{param, mult});
    params_[static_cast<size_t>(param)].obj_slots.push_back(var);
    refresh_obj_coef(var);
}

void OptContainer::add_objective_constant(double c) {
    obj_const_base_ += c;
    refresh_obj_constant();
}

void OptContainer::add_objective_constant_param(ParamRef param, double mult) {
    obj_const_params_.push_back(ParamSlot{param, mult});
    params_[static_cast<size_t>(param)].in_obj_constant = true;
    refresh_obj_constant();
}

void OptContainer::set_maximize(bool maximize) { maximize_ = maximize; }

bool OptContainer::has_variable(const VarKey& key) const { return var_index_.contains(key); }

VarRef OptContainer::variable_ref(const VarKey& key) const {
    auto it = var_index_.find(key);
    if (it == var_index_.end()) throw ContractError("unknown variable key " + key.str());
    return it->second;
}

bool OptContainer::has_parameter(const ParamKey& key) const { return param_index_.contains(key); }

ParamRef OptContainer::parameter_ref(const ParamKey& key) const {
    auto it = param_index_.find(key);
    if (it == param_index_.end()) throw ContractError("unknown parameter key " + key.str());
    return it->second;
}

std::int64_t OptContainer::n_nonzeros() const {
    std::int64_t nnz = 0;
    for (const auto& c : cons_) nnz += static_cast<std::int64_t>(c.terms.size());
    return nnz;
}

double OptContainer::parameter_value(const ParamKey& key) const {
    return params_[static_cast<size_t>(parameter_ref(key))].value;
}

void OptContainer::set_variable_bounds(VarRef v, double lb, double ub) {
    if (v < 0 || v >= n_variables()) throw ContractError("unknown variable index");
    if (lb > ub) throw ContractError("inverted bounds for " + vars_[static_cast<size_t>(v)].key.str());
    vars_[static_cast<size_t>(v)].lb = lb;
    vars_[static_cast<size_t>(v)].ub = ub;
}

void OptContainer::update_parameter(const ParamKey& key, double value) {
    if (!std::isfinite(value))
        throw ContractError("nonfinite value for parameter " + key.str());
    const ParamRef ref = parameter_ref(key);
    Parameter& p = params_[static_cast<size_t>(ref)];
    p.value = value;
    for (ConstraintRef c : p.rhs_slots) refresh_rhs(c);
    for (VarRef v : p.obj_slots) refresh_obj_coef(v);
    if (p.in_obj_constant) refresh_obj_constant();
}

void OptContainer::refresh_rhs(ConstraintRef cref) {
    const LinearConstraint& c = cons_[static_cast<size_t>(cref)];
    double rhs = c.rhs_base;
    for (const auto& slot : c.rhs_params)
        rhs += slot.mult * params_[static_cast<size_t>(slot.param)].value;
    rhs_effective_[static_cast<size_t>(cref)] = rhs;
}

void OptContainer::refresh_obj_coef(VarRef v) {
    double coef = obj_coef_base_[static_cast<size_t>(v)];
    for (const auto& slot : obj_coef_params_[static_cast<size_t>(v)])
        coef += slot.mult * params_[static_cast<size_t>(slot.param)].value;
    obj_coef_effective_[static_cast<size_t>(v)] = coef;
}

void OptContainer::refresh_obj_constant() {
    double c = obj_const_base_;
    for (const auto& slot : obj_const_params_)
        c += slot.mult * params_[static_cast<size_t>(slot.param)].value;
    obj_const_effective_ = c;
}

SanityReport OptContainer::sanity_check() const {
    SanityReport report;
    auto flag_nonfinite = [&](const std::string& where) {
        report.findings.push_back({true, "nonfinite value", where});
    };
    for (size_t i = 0; i < cons_.size(); ++i) {
        const auto& c = cons_[i];
        if (c.terms.empty())
            report.findings.push_back({true, "empty constraint", "constraint '" + c.name + "' has no terms"});
        for (const auto& term : c.terms) {
            const double a = term.coef;
            if (!std::isfinite(a)) {
                flag_nonfinite("coefficient in '" + c.name + "'");
            } else if (a != 0.0 && (std::fabs(a) < 1e-6 || std::fabs(a) > 1e6)) {
                report.findings.push_back(
                    {false, "coefficient range",
                     "constraint '" + c.name + "' coefficient " + std::to_string(a) + " on " +
                         vars_[static_cast<size_t>(term.var)].key.str() + " outside [1e-6, 1e6]"});
            }
        }
        if (!std::isfinite(rhs_effective_[i])) flag_nonfinite("rhs of '" + c.name + "'");
    }
    for (const auto& v : vars_) {
        if (std::isnan(v.lb) || std::isnan(v.ub)) flag_nonfinite("bounds of " + v.key.str());
    }
    for (size_t v = 0; v < vars_.size(); ++v) {
        const double c = obj_coef_effective_[v];
        if (!std::isfinite(c)) {
            flag_nonfinite("objective coefficient on " + vars_[v].key.str());
        } else if (c != 0.0 && (std::fabs(c) < 1e-6 || std::fabs(c) > 1e6)) {
            report.findings.push_back({false, "coefficient range",
                                       "objective coefficient " + std::to_string(c) + " on " +
                                           vars_[v].key.str() + " outside [1e-6, 1e6]"});
        }
    }
    if (!std::isfinite(obj_const_effective_)) flag_nonfinite("objective constant");
    return report;
}

std::string OptContainer::serialize_to_string() const {
    ordered_json j;
    j["format"] = "opsim-container";
    j["version"] = 1;
    j["model"] = name_;
    j["build_stamp"] = build_stamp_;
    j["maximize"] = maximize_;

    ordered_json jvars = ordered_json::array();
    for (const auto& v : vars_) {
        ordered_json jv;
        jv["kind"] = to_string(v.key.kind);
        jv["component"] = v.key.component;
        jv["t"] = v.key.t;
        if (std::isfinite(v.lb)) jv["lb"] = v.lb; else jv["lb"] = "-inf";
        if (std::isfinite(v.ub)) jv["ub"] = v.ub; else jv["ub"] = "inf";
        jv["integral"] = v.integral;
        jvars.push_back(std::move(jv));
    }
    j["variables"] = std::move(jvars);

    ordered_json jparams = ordered_json::array();
    for (const auto& p : params_) {
        ordered_json jp;
        jp["kind"] = to_string(p.key.kind);
        jp["component"] = p.key.component;
        jp["t"] = p.key.t;
        jp["value"] = p.value;
        jparams.push_back(std::move(jp));
    }
    j["parameters"] = std::move(jparams);

    ordered_json jcons = ordered_json::array();
    for (const auto& c : cons_) {
        ordered_json jc;
        jc["name"] = c.name;
        ordered_json terms = ordered_json::array();
        for (const auto& t : c.terms) terms.push_back(ordered_json::array({t.var, t.coef}));
        jc["terms"] = std::move(terms);
        jc["sense"] = sense_name(c.sense);
        jc["rhs"] = c.rhs_base;
        if (!c.rhs_params.empty()) {
            ordered_json slots = ordered_json::array();
            for (const auto& s : c.rhs_params) slots.push_back(ordered_json::array({s.param, s.mult}));
            jc["rhs_params"] = std::move(slots);
        }
        jcons.push_back(std::move(jc));
    }
    j["constraints"] = std::move(jcons);

    ordered_json jobj;
    ordered_json jcoefs = ordered_json::array();
    for (size_t v = 0; v < vars_.size(); ++v) {
        if (obj_coef_base_[v] == 0.0 && obj_coef_params_[v].empty()) continue;
        ordered_json e;
        e["var"] = static_cast<int>(v);
        e["coef"] = obj_coef_base_[v];
        if (!obj_coef_params_[v].empty()) {
            ordered_json slots = ordered_json::array();
            for (const auto& s : obj_coef_params_[v]) slots.push_back(ordered_json::array({s.param, s.mult}));
            e["params"] = std::move(slots);
        }
        jcoefs.push_back(std::move(e));
    }
    jobj["terms"] = std::move(jcoefs);
    jobj["constant"] = obj_const_base_;
    if (!obj_const_params_.empty()) {
        ordered_json slots = ordered_json::array();
        for (const auto& s : obj_const_params_) slots.push_back(ordered_json::array({s.param, s.mult}));
        jobj["constant_params"] = std::move(slots);
    }
    j["objective"] = std::move(jobj);
    return j.dump(1, '\t');
}

void OptContainer::serialize(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << serialize_to_string();
    out.close();
    if (!out) throw IoError("failed writing container to '" + path + "'");
}

OptContainer OptContainer::deserialize_from_string(const std::string& text) {
    ordered_json j = ordered_json::parse(text);
    if (j.value("format", "") != "opsim-container")
        throw ValidationError("not an opsim container document");
    OptContainer c(j.value("model", ""));
    c.build_stamp_ = j.value("build_stamp", "");
    c.maximize_ = j.value("maximize", false);
    for (const auto& jv : j.at("variables")) {
        const double lb = jv.at("lb").is_string() ? -std::numeric_limits<double>::infinity()
                                                  : jv.at("lb").get<double>();
        const double ub = jv.at("ub").is_string() ? std::numeric_limits<double>::infinity()
                                                  : jv.at("ub").get<double>();
        c.add_variable(VarKey{var_kind_from_string(jv.at("kind").get<std::string>()),
                              jv.at("component").get<std::string>(), jv.at("t").get<int>()},
                       lb, ub, jv.at("integral").get<bool>());
    }
    for (const auto& jp : j.at("parameters")) {
        c.add_parameter(ParamKey{param_kind_from_string(jp.at("kind").get<std::string>()),
                                 jp.at("component").get<std::string>(), jp.at("t").get<int>()},
                        jp.at("value").get<double>());
    }
    for (const auto& jc : j.at("constraints")) {
        LinearConstraint lc;
        lc.name = jc.at("name").get<std::string>();
        for (const auto& t : jc.at("terms"))
            lc.terms.push_back({t.at(0).get<int>(), t.at(1).get<double>()});
        lc.sense = sense_from_string(jc.at("sense").get<std::string>());
        lc.rhs_base = jc.at("rhs").get<double>();
        if (jc.contains("rhs_params"))
            for (const auto& s : jc.at("rhs_params"))
                lc.rhs_params.push_back({s.at(0).get<int>(), s.at(1).get<double>()});
        c.add_constraint(std::move(lc));
    }
    const auto& jobj = j.at("objective");
    for (const auto& e : jobj.at("terms")) {
        const VarRef v = e.at("var").get<int>();
        c.add_objective_term(v, e.at("coef").get<double>());
        if (e.contains("params"))
            for (const auto& s : e.at("params"))
                c.add_objective_param(v, s.at(0).get<int>(), s.at(1).get<double>());
    }
    c.add_objective_constant(jobj.at("constant").get<double>());
    if (jobj.contains("constant_params"))
        for (const auto& s : jobj.at("constant_params"))
            c.add_objective_constant_param(s.at(0).get<int>(), s.at(1).get<double>());
    return c;
}

OptContainer OptContainer::deserialize(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_from_string(buf.str());
}

bool OptContainer::structurally_equal(const OptContainer& other) const {
    if (name_ != other.name_ || maximize_ != other.maximize_) return false;
    if (vars_.size() != other.vars_.size() || cons_.size() != other.cons_.size() ||
        params_.size() != other.params_.size())
        return false;
    for (size_t i = 0; i < vars_.size(); ++i) {
        const auto& a = vars_[i];
        const auto& b = other.vars_[i];
        if (a.key != b.key || a.lb != b.lb || a.ub != b.ub || a.integral != b.integral) return false;
    }
    for (size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].key != other.params_[i].key || params_[i].value != other.params_[i].value)
            return false;
    }
    for (size_t i = 0; i < cons_.size(); ++i) {
        const auto& a = cons_[i];
        const auto& b = other.cons_[i];
        if (a.name != b.name || a.sense != b.sense || a.rhs_base != b.rhs_base ||
            a.terms != b.terms || a.rhs_params != b.rhs_params)
            return false;
    }
    if (obj_coef_base_ != other.obj_coef_base_ || obj_coef_params_ != other.obj_coef_params_)
        return false;
    return obj_const_base_ == other.obj_const_base_ && obj_const_params_ == other.obj_const_params_;
}

} // namespace opsim
