#pragma once

#include "opsim/opt_container.hpp"

#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace opsim {

enum class SolveStatus { Optimal, Infeasible, Unbounded, IterationLimit, NodeLimit };

const char* to_string(SolveStatus s);

struct SolverOptions {
    int max_iterations = 50000;  // simplex pivots per LP solve
    long node_limit = 100000;    // branch & bound nodes
    double mip_gap = 0.0;        // relative early-stop gap; 0 solves to LP exactness
    double feas_tol = 1e-9;
    double opt_tol = 1e-9;       // reduced-cost tolerance
    double int_tol = 1e-6;
    double pivot_tol = 1e-10;
    double penalty = 1e6;        // relax_and_solve bound-slack penalty
};

struct SolveStats {
    long iterations = 0; // simplex pivots (all phases, all nodes)
    long nodes = 0;      // branch & bound nodes processed
    double wall_ms = 0.0;
};

struct SolveResult {
    SolveStatus status = SolveStatus::Infeasible;
    double objective = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> primal; // per VarRef; populated iff status == Optimal
    std::vector<double> duals;  // per ConstraintRef; LP solves only
    SolveStats stats;
    std::string diagnostic;
    double penalty_slack_total = 0.0; // relax_and_solve: total bound-slack activation
    bool used_warm_incumbent = false;

    bool optimal() const { return status == SolveStatus::Optimal; }
};

// Contract every pluggable LP/MILP engine satisfies. One instance is bound
// to one model's container for the lifetime of a simulation so engines can
// retain factorizations, bases, and incumbents across parameter updates.
class SolverInterface {
public:
    virtual ~SolverInterface() = default;

    // Integrality flags must be absent unless relax_integrality is set.
    virtual SolveResult solve_lp(const OptContainer& c, bool relax_integrality = false) = 0;
    virtual SolveResult solve_milp(const OptContainer& c) = 0;

    // LP relaxation with penalized bound slacks on every row. Always returns
    // a usable point unless the slacked LP itself is unbounded.
    virtual SolveResult relax_and_solve(const OptContainer& c) = 0;

    virtual void reset_warm_start() = 0;
};

// The bundled dense-simplex / branch-and-bound engine. Deterministic:
// Dantzig pricing with lowest-index tie breaking, falling back to Bland's
// rule after a degeneracy stall so termination is guaranteed.
class BundledSolver final : public SolverInterface {
public:
    explicit BundledSolver(SolverOptions options = {});
    ~BundledSolver() override;
    BundledSolver(BundledSolver&&) noexcept;
    BundledSolver& operator=(BundledSolver&&) noexcept;

    SolveResult solve_lp(const OptContainer& c, bool relax_integrality = false) override;
    SolveResult solve_milp(const OptContainer& c) override;
    SolveResult relax_and_solve(const OptContainer& c) override;
    void reset_warm_start() override;

    const SolverOptions& options() const { return options_; }

private:
    struct Workspace;
    SolverOptions options_;
    std::unique_ptr<Workspace> ws_;       // persistent across solves of one container
    std::vector<double> incumbent_;       // last MILP incumbent (container var space)
    bool have_incumbent_ = false;
};

// Textual export in CPLEX LP format for cross-checks with external engines.
void write_lp_file(const OptContainer& c, const std::string& path);

// Convenience used by tests and one-shot evaluations.
SolveResult solve_lp_once(const OptContainer& c, SolverOptions options = {},
                          bool relax_integrality = false);
SolveResult solve_milp_once(const OptContainer& c, SolverOptions options = {});

} // namespace opsim
