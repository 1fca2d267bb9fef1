#pragma once

#include "opsim/error.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace opsim {

// A minimal algebraic model container: variables with bounds/integrality,
// linear constraints, a linear objective, and named parameters that can
// rewrite constraint right-hand sides and objective coefficients in place.
// Parameters are restricted to exactly those two slot kinds; anything else
// requires a rebuild.

enum class VarKind : std::uint8_t {
    ActivePower,
    OnStatus,
    Start,
    Stop,
    Reserve,
    SoC,
    Charge,
    Discharge,
    Flow,
    Slack,
    CostEpigraph,
};

enum class ParamKind : std::uint8_t {
    ForecastBound,
    RequirementRHS,
    FeedforwardOnStatus,
    FeedforwardStart,
    FeedforwardStop,
    FeedforwardBound,
    EnergyTarget,
    InitialPower,
    InitialOnStatus,
    InitialSoC,
    ForcedOn,
    ForcedOff,
};

const char* to_string(VarKind k);
const char* to_string(ParamKind k);
VarKind var_kind_from_string(const std::string& s);
ParamKind param_kind_from_string(const std::string& s);

struct VarKey {
    VarKind kind;
    std::string component;
    int t = 0; // 1..horizon (0 reserved for boundary conditions)

    friend bool operator==(const VarKey&, const VarKey&) = default;
    friend auto operator<=>(const VarKey&, const VarKey&) = default;
    std::string str() const;
};

struct ParamKey {
    ParamKind kind;
    std::string component;
    int t = 0;

    friend bool operator==(const ParamKey&, const ParamKey&) = default;
    friend auto operator<=>(const ParamKey&, const ParamKey&) = default;
    std::string str() const;
};

using VarRef = int;
using ConstraintRef = int;
using ParamRef = int;

enum class Sense : std::uint8_t { LE, EQ, GE };

struct LinearTerm {
    VarRef var;
    double coef;
    friend bool operator==(const LinearTerm&, const LinearTerm&) = default;
};

// rhs_effective = rhs_base + sum(mult_i * value(param_i))
struct ParamSlot {
    ParamRef param;
    double mult;
    friend bool operator==(const ParamSlot&, const ParamSlot&) = default;
};

struct LinearConstraint {
    std::string name;
    std::vector<LinearTerm> terms;
    Sense sense = Sense::LE;
    double rhs_base = 0.0;
    std::vector<ParamSlot> rhs_params;
};

struct SanityFinding {
    bool fatal = false;
    std::string category; // "coefficient range", "nonfinite value", "empty constraint"
    std::string message;
};

struct SanityReport {
    std::vector<SanityFinding> findings;
    bool has_fatal() const;
    std::string to_string() const;
};

class OptContainer {
public:
    struct Variable {
        VarKey key;
        double lb;
        double ub;
        bool integral;
    };

    struct Parameter {
        ParamKey key;
        double value;
        // Book-keeping of where the parameter lands, kept in memory so
        // updates are in-place index lookups.
        std::vector<ConstraintRef> rhs_slots;
        std::vector<VarRef> obj_slots;
        bool in_obj_constant = false;
    };

    explicit OptContainer(std::string model_name = "");

    // --- build phase -------------------------------------------------------
    VarRef add_variable(const VarKey& key, double lb, double ub, bool integral);
    ParamRef add_parameter(const ParamKey& key, double initial_value);
    ConstraintRef add_constraint(LinearConstraint c);

    // Objective is always minimized. Coefficient slots:
    //   coef_effective(var) = coef_base(var) + sum(mult_i * value(param_i))
    void add_objective_term(VarRef var, double coef);
    void add_objective_param(VarRef var, ParamRef param, double mult);
    void add_objective_constant(double c);
    void add_objective_constant_param(ParamRef param, double mult);
    void set_maximize(bool maximize); // convenience for tests / generic LPs

    // --- lookup ------------------------------------------------------------
    bool has_variable(const VarKey& key) const;
    VarRef variable_ref(const VarKey& key) const;
    bool has_parameter(const ParamKey& key) const;
    ParamRef parameter_ref(const ParamKey& key) const;

    int n_variables() const { return static_cast<int>(vars_.size()); }
    int n_constraints() const { return static_cast<int>(cons_.size()); }
    std::int64_t n_nonzeros() const;

    const Variable& variable(VarRef v) const { return vars_.at(static_cast<size_t>(v)); }
    const LinearConstraint& constraint(ConstraintRef c) const { return cons_.at(static_cast<size_t>(c)); }
    const Parameter& parameter(ParamRef p) const { return params_.at(static_cast<size_t>(p)); }
    const std::vector<Variable>& variables() const { return vars_; }
    const std::vector<LinearConstraint>& constraints() const { return cons_; }
    const std::vector<Parameter>& parameters() const { return params_; }

    double objective_coef(VarRef v) const { return obj_coef_effective_.at(static_cast<size_t>(v)); }
    double objective_constant() const { return obj_const_effective_; }
    bool maximize() const { return maximize_; }
    double rhs_value(ConstraintRef c) const { return rhs_effective_.at(static_cast<size_t>(c)); }
    double parameter_value(const ParamKey& key) const;

    // Variable bound mutation is a solver-facing affordance (branch & bound,
    // slack activation); it never changes structure.
    void set_variable_bounds(VarRef v, double lb, double ub);

    // --- update phase ------------------------------------------------------
    // In-place update of every slot bound to `key`. Structure (variable,
    // constraint, nonzero counts) is untouched.
    void update_parameter(const ParamKey& key, double value);

    // --- checks & persistence ----------------------------------------------
    SanityReport sanity_check() const;
    void serialize(const std::string& path) const;
    static OptContainer deserialize(const std::string& path);
    std::string serialize_to_string() const;
    static OptContainer deserialize_from_string(const std::string& text);

    // Structural + value equality of the logical content (round-trip law).
    bool structurally_equal(const OptContainer& other) const;

    const std::string& model_name() const { return name_; }
    const std::string& build_stamp() const { return build_stamp_; }
    void set_build_stamp(std::string stamp) { build_stamp_ = std::move(stamp); }

    // Fingerprint used by the executor to assert build-once identity.
    struct Fingerprint {
        int n_vars;
        int n_cons;
        std::int64_t nnz;
        friend bool operator==(const Fingerprint&, const Fingerprint&) = default;
    };
    Fingerprint fingerprint() const { return {n_variables(), n_constraints(), n_nonzeros()}; }

private:
    void refresh_rhs(ConstraintRef c);
    void refresh_obj_coef(VarRef v);
    void refresh_obj_constant();

    std::string name_;
    std::string build_stamp_;
    bool maximize_ = false;

    std::vector<Variable> vars_;
    std::vector<LinearConstraint> cons_;
    std::vector<Parameter> params_;

    std::map<VarKey, VarRef> var_index_;
    std::map<ParamKey, ParamRef> param_index_;

    std::vector<double> obj_coef_base_;
    std::vector<std::vector<ParamSlot>> obj_coef_params_;
    std::vector<double> obj_coef_effective_;
    double obj_const_base_ = 0.0;
    std::vector<ParamSlot> obj_const_params_;
    double obj_const_effective_ = 0.0;

    std::vector<double> rhs_effective_;
};

} // namespace opsim
