#include "opsim/solver.hpp"

#include "opsim/logging.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <queue>
#include <sstream>
#include <cstdlib>

namespace opsim {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double now_ms() {
    using namespace std::chrono;
    return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}
} // namespace

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Unbounded: return "unbounded";
        case SolveStatus::IterationLimit: return "iteration_limit";
        case SolveStatus::NodeLimit: return "node_limit";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Workspace: dense bounded-variable primal simplex over the container rows
// plus one slack column per row (slack bounds encode the row sense). The
// tableau stores B^-1 A for every column, so the trailing slack block is
// B^-1 itself; basic-value recomputation and warm starts lean on that. The
// workspace persists across solves of one container: parameter updates only
// touch costs, bounds and the RHS, never the tableau, so the previous
// optimal basis seeds the next solve.
// ---------------------------------------------------------------------------

struct BundledSolver::Workspace {
    enum class VState : std::uint8_t { Basic, AtLower, AtUpper, FreeZero };

    int n = 0;     // container variables
    int n_pen = 0; // penalty columns (relax mode only)
    int m = 0;     // rows
    int N = 0;     // n + n_pen + m
    std::int64_t structure_nnz = 0;
    bool relax_mode = false;

    std::vector<double> T;    // m x N row-major, B^-1 A
    std::vector<double> lb;   // N
    std::vector<double> ub;   // N
    std::vector<double> cost; // N, internal minimization costs
    std::vector<double> rhs;  // m
    std::vector<double> x;    // N, current point
    std::vector<int> basic;   // m -> variable index
    std::vector<VState> state;
    std::vector<double> dj;         // reduced costs of the active phase
    std::vector<std::int8_t> sigma; // per-row phase-1 infeasibility sign
    std::vector<std::uint8_t> banned; // columns without a stable pivot, per solve
    bool has_basis = false;

    long iterations = 0;

    int slack_index(int row) const { return N - m + row; }

    void build(const OptContainer& c, bool relax) {
        n = c.n_variables();
        m = c.n_constraints();
        relax_mode = relax;
        n_pen = 0;
        std::vector<std::pair<int, double>> pen_cols; // (row, coef)
        if (relax) {
            for (int i = 0; i < m; ++i) {
                const Sense s = c.constraint(i).sense;
                if (s == Sense::LE || s == Sense::EQ) pen_cols.push_back({i, -1.0});
                if (s == Sense::GE || s == Sense::EQ) pen_cols.push_back({i, +1.0});
            }
            n_pen = static_cast<int>(pen_cols.size());
        }
        N = n + n_pen + m;
        structure_nnz = c.n_nonzeros();

        T.assign(static_cast<size_t>(m) * N, 0.0);
        lb.assign(static_cast<size_t>(N), 0.0);
        ub.assign(static_cast<size_t>(N), 0.0);
        cost.assign(static_cast<size_t>(N), 0.0);
        rhs.assign(static_cast<size_t>(m), 0.0);
        x.assign(static_cast<size_t>(N), 0.0);
        state.assign(static_cast<size_t>(N), VState::AtLower);
        basic.assign(static_cast<size_t>(m), -1);
        dj.assign(static_cast<size_t>(N), 0.0);
        sigma.assign(static_cast<size_t>(m), 0);
        banned.assign(static_cast<size_t>(N), 0);

        for (int i = 0; i < m; ++i) {
            const auto& row = c.constraint(i);
            double* tr = &T[static_cast<size_t>(i) * N];
            for (const auto& term : row.terms) tr[term.var] = term.coef;
            tr[slack_index(i)] = 1.0;
            switch (row.sense) {
                case Sense::LE:
                    lb[slack_index(i)] = 0.0;
                    ub[slack_index(i)] = kInf;
                    break;
                case Sense::EQ:
                    lb[slack_index(i)] = 0.0;
                    ub[slack_index(i)] = 0.0;
                    break;
                case Sense::GE:
                    lb[slack_index(i)] = -kInf;
                    ub[slack_index(i)] = 0.0;
                    break;
            }
        }
        for (int k = 0; k < n_pen; ++k) {
            const auto [row, coef] = pen_cols[static_cast<size_t>(k)];
            T[static_cast<size_t>(row) * N + n + k] = coef;
            lb[n + k] = 0.0;
            ub[n + k] = kInf;
        }
        // Fresh tableau corresponds to B = I over the slacks.
        for (int j = 0; j < N; ++j) state[j] = VState::AtLower;
        for (int i = 0; i < m; ++i) {
            basic[i] = slack_index(i);
            state[slack_index(i)] = VState::Basic;
        }
        has_basis = true;
    }

    bool matches(const OptContainer& c, bool relax) const {
        return relax == relax_mode && n == c.n_variables() && m == c.n_constraints() &&
               structure_nnz == c.n_nonzeros();
    }

    void sync(const OptContainer& c, bool negate_obj, double penalty) {
        for (int j = 0; j < n; ++j) {
            const auto& v = c.variable(j);
            lb[j] = v.lb;
            ub[j] = v.ub;
            cost[j] = negate_obj ? -c.objective_coef(j) : c.objective_coef(j);
        }
        for (int k = 0; k < n_pen; ++k) cost[n + k] = penalty;
        for (int i = 0; i < m; ++i) rhs[i] = c.rhs_value(i);
    }

    bool is_basic(int j) const { return state[j] == VState::Basic; }

    double nonbasic_value(int j) {
        switch (state[j]) {
            case VState::AtLower:
                if (std::isfinite(lb[j])) return lb[j];
                state[j] = std::isfinite(ub[j]) ? VState::AtUpper : VState::FreeZero;
                return nonbasic_value(j);
            case VState::AtUpper:
                if (std::isfinite(ub[j])) return ub[j];
                state[j] = std::isfinite(lb[j]) ? VState::AtLower : VState::FreeZero;
                return nonbasic_value(j);
            default:
                return 0.0;
        }
    }

    // x_B = B^-1 b - sum over nonbasic j of T[:,j] x_j, slack block as B^-1.
    void compute_basic_values() {
        std::vector<int> nz;
        for (int j = 0; j < N; ++j) {
            if (is_basic(j)) continue;
            x[j] = nonbasic_value(j);
            if (x[j] != 0.0) nz.push_back(j);
        }
        const int s0 = N - m;
        std::vector<double> beta(static_cast<size_t>(m));
        for (int i = 0; i < m; ++i) {
            const double* tr = &T[static_cast<size_t>(i) * N];
            double v = 0.0;
            for (int k = 0; k < m; ++k) v += tr[s0 + k] * rhs[k];
            for (int j : nz) v -= tr[j] * x[j];
            beta[static_cast<size_t>(i)] = v;
        }
        for (int i = 0; i < m; ++i) x[basic[i]] = beta[static_cast<size_t>(i)];
    }

    // sigma_i: +1 basic above ub, -1 below lb, 0 feasible. Returns the count
    // of infeasible rows.
    int refresh_sigma(double feas_tol) {
        int count = 0;
        for (int i = 0; i < m; ++i) {
            const int b = basic[i];
            const double tol_lo = feas_tol * std::max(1.0, std::fabs(lb[b]));
            const double tol_hi = feas_tol * std::max(1.0, std::fabs(ub[b]));
            if (x[b] < lb[b] - tol_lo) {
                sigma[i] = -1;
                ++count;
            } else if (x[b] > ub[b] + tol_hi) {
                sigma[i] = +1;
                ++count;
            } else {
                sigma[i] = 0;
            }
        }
        return count;
    }

    // Phase-1 reduced costs: d_j = -sum over infeasible rows of sigma_i T[i][j].
    void phase1_reduced_costs() {
        std::fill(dj.begin(), dj.end(), 0.0);
        for (int i = 0; i < m; ++i) {
            if (sigma[i] == 0) continue;
            const double s = static_cast<double>(sigma[i]);
            const double* tr = &T[static_cast<size_t>(i) * N];
            for (int j = 0; j < N; ++j) dj[j] -= s * tr[j];
        }
        for (int i = 0; i < m; ++i) dj[basic[i]] = 0.0;
    }

    // Phase-2 reduced costs from scratch: d = c - c_B B^-1 A.
    void phase2_reduced_costs() {
        std::copy(cost.begin(), cost.end(), dj.begin());
        for (int i = 0; i < m; ++i) {
            const double cb = cost[basic[i]];
            if (cb == 0.0) continue;
            const double* tr = &T[static_cast<size_t>(i) * N];
            for (int j = 0; j < N; ++j) dj[j] -= cb * tr[j];
        }
        for (int i = 0; i < m; ++i) dj[basic[i]] = 0.0;
    }

    struct Entering {
        int j = -1;
        int dir = 0; // +1 increase, -1 decrease
    };

    // Dantzig pricing (most negative merit), ties and Bland fallback both
    // resolve to the lowest variable index.
    Entering price(bool bland, double opt_tol) const {
        Entering best;
        double best_score = opt_tol;
        for (int j = 0; j < N; ++j) {
            if (is_basic(j) || banned[j]) continue;
            if (lb[j] == ub[j]) continue; // fixed, cannot move
            const double d = dj[j];
            int dir = 0;
            if ((state[j] == VState::AtLower || state[j] == VState::FreeZero) && d < -opt_tol)
                dir = +1;
            else if ((state[j] == VState::AtUpper || state[j] == VState::FreeZero) && d > opt_tol)
                dir = -1;
            if (dir == 0) continue;
            if (bland) return {j, dir};
            const double score = std::fabs(d);
            if (score > best_score) {
                best_score = score;
                best = {j, dir};
            }
        }
        return best;
    }

    struct Ratio {
        double theta = kInf;
        int row = -1;          // -1 with finite theta: bound flip
        bool to_upper = false; // leaving variable parks at its upper bound
    };

    struct RowLimit {
        bool blocks = false;
        double strict = kInf;  // exact distance to the blocking bound
        double relaxed = kInf; // distance with the feasibility tolerance added
        bool hit_upper = false;
    };

    RowLimit row_limit(int i, int j, int dir, bool phase1, double feas_tol) const {
        const double w = T[static_cast<size_t>(i) * N + j];
        if (std::fabs(w) < 1e-11) return {};
        const double rate = -dir * w; // d x_basic(i) / d theta
        const int b = basic[i];
        double bound;
        RowLimit out;
        if (phase1 && sigma[i] != 0) {
            // Infeasible basics block only at the bound they violate.
            if (sigma[i] < 0 && rate > 0) {
                bound = lb[b];
                out.hit_upper = false;
            } else if (sigma[i] > 0 && rate < 0) {
                bound = ub[b];
                out.hit_upper = true;
            } else {
                return {};
            }
        } else if (rate > 0) {
            if (!std::isfinite(ub[b])) return {};
            bound = ub[b];
            out.hit_upper = true;
        } else {
            if (!std::isfinite(lb[b])) return {};
            bound = lb[b];
            out.hit_upper = false;
        }
        const double dist = (bound - x[b]) / rate;
        const double tol = feas_tol * std::max(1.0, std::fabs(bound));
        out.strict = std::max(dist, 0.0);
        out.relaxed = std::max(dist, 0.0) + tol / std::fabs(rate);
        out.blocks = true;
        return out;
    }

    // Two-pass (Harris) min-ratio step for entering j moving in `dir`.
    // Pass 1 finds the tolerance-relaxed step limit; pass 2 picks the
    // largest pivot among rows whose strict limit fits under it, remaining
    // ties resolving to the lowest basic variable index. In Bland mode the
    // classic rule applies instead - strict minimum ratio, lowest basic
    // index - because the anti-cycling guarantee depends on it.
    Ratio ratio_test(int j, int dir, bool phase1, double feas_tol, bool bland) const {
        Ratio r;
        const double flip =
            std::isfinite(ub[j]) && std::isfinite(lb[j]) ? ub[j] - lb[j] : kInf;
        if (bland) {
            double min_strict = flip;
            for (int i = 0; i < m; ++i) {
                const RowLimit rl = row_limit(i, j, dir, phase1, feas_tol);
                if (!rl.blocks) continue;
                if (rl.strict < min_strict - 1e-12 ||
                    (rl.strict < min_strict + 1e-12 && r.row >= 0 && basic[i] < basic[r.row])) {
                    min_strict = std::min(rl.strict, min_strict);
                    r.row = i;
                    r.to_upper = rl.hit_upper;
                }
            }
            r.theta = r.row >= 0 ? min_strict : flip;
            return r;
        }
        double theta_relaxed = flip;
        for (int i = 0; i < m; ++i) {
            const RowLimit rl = row_limit(i, j, dir, phase1, feas_tol);
            if (rl.blocks) theta_relaxed = std::min(theta_relaxed, rl.relaxed);
        }
        if (!std::isfinite(theta_relaxed)) return r; // unbounded direction

        double best_piv = 0.0;
        double strict_of_choice = flip;
        for (int i = 0; i < m; ++i) {
            const RowLimit rl = row_limit(i, j, dir, phase1, feas_tol);
            if (!rl.blocks || rl.strict > theta_relaxed) continue;
            const double piv = std::fabs(T[static_cast<size_t>(i) * N + j]);
            if (piv > best_piv * (1.0 + 1e-9) ||
                (piv >= best_piv * (1.0 - 1e-9) && r.row >= 0 && basic[i] < basic[r.row])) {
                best_piv = piv;
                r.row = i;
                r.to_upper = rl.hit_upper;
                strict_of_choice = rl.strict;
            }
        }
        r.theta = r.row >= 0 ? std::min(strict_of_choice, flip) : flip;
        return r;
    }

    void apply_step(int j, int dir, double theta) {
        if (theta == 0.0) return;
        for (int i = 0; i < m; ++i) {
            const double w = T[static_cast<size_t>(i) * N + j];
            if (w != 0.0) x[basic[i]] -= dir * theta * w;
        }
        x[j] += dir * theta;
    }

    // Replace basic[r] by entering j; Gaussian elimination keeps T = B^-1 A.
    // Eliminations walk only the pivot row's nonzero columns.
    mutable std::vector<int> pivot_nz_;

    void pivot(int r, int j, bool update_dj) {
        double* rowR = &T[static_cast<size_t>(r) * N];
        const double piv = rowR[j];
        const double inv = 1.0 / piv;
        pivot_nz_.clear();
        for (int k = 0; k < N; ++k) {
            rowR[k] *= inv;
            if (rowR[k] != 0.0) pivot_nz_.push_back(k);
        }
        rowR[j] = 1.0;
        for (int i = 0; i < m; ++i) {
            if (i == r) continue;
            double* rowI = &T[static_cast<size_t>(i) * N];
            const double f = rowI[j];
            if (f == 0.0) continue;
            for (int k : pivot_nz_) rowI[k] -= f * rowR[k];
            rowI[j] = 0.0;
        }
        if (update_dj) {
            const double f = dj[j];
            if (f != 0.0)
                for (int k : pivot_nz_) dj[k] -= f * rowR[k];
            dj[j] = 0.0;
        }
        basic[r] = j;
        state[j] = VState::Basic;
    }

    double internal_objective() const {
        double v = 0.0;
        for (int j = 0; j < N; ++j)
            if (cost[j] != 0.0) v += cost[j] * x[j];
        return v;
    }

    double penalty_total() const {
        double v = 0.0;
        for (int k = 0; k < n_pen; ++k) v += x[n + k];
        return v;
    }

    int refresh_sigma_count_debug(double feas_tol) {
        int count = 0;
        for (int i = 0; i < m; ++i) count += sigma[i] != 0;
        (void)feas_tol;
        return count;
    }

    SolveStatus primal_simplex(const SolverOptions& opt, std::string& diagnostic) {
        const bool trace = std::getenv("OPSIM_SIMPLEX_TRACE") != nullptr;
        std::fill(banned.begin(), banned.end(), 0);
        long n_banned = 0;
        compute_basic_values();
        int phase = refresh_sigma(opt.feas_tol) > 0 ? 1 : 2;
        if (phase == 1)
            phase1_reduced_costs();
        else
            phase2_reduced_costs();

        long stall = 0;
        long iters_this_solve = 0;
        long since_refresh = 0;
        while (true) {
            if (iters_this_solve >= opt.max_iterations) {
                diagnostic = "iteration limit (" + std::to_string(opt.max_iterations) +
                             ") reached in phase " + std::to_string(phase);
                return SolveStatus::IterationLimit;
            }
            if (trace && iters_this_solve % 1000 == 0)
                std::fprintf(stderr, "[simplex] iter=%ld phase=%d infeas=%d stall=%ld banned=%ld obj=%.6g\n",
                             iters_this_solve, phase, refresh_sigma_count_debug(opt.feas_tol), stall,
                             n_banned, internal_objective());
            const bool bland = stall > 100;
            const Entering e = price(bland, opt.opt_tol);
            if (e.j < 0) {
                if (phase == 1) return SolveStatus::Infeasible;
                // Confirm with fresh reduced costs: incremental updates may
                // leave dj stale.
                phase2_reduced_costs();
                const Entering verify = price(bland, opt.opt_tol);
                if (verify.j < 0) {
                    if (n_banned > 0)
                        diagnostic = "skipped " + std::to_string(n_banned) +
                                     " numerically unstable column(s)";
                    return SolveStatus::Optimal;
                }
                continue;
            }
            const Ratio r = ratio_test(e.j, e.dir, phase == 1, opt.feas_tol, bland);
            if (!std::isfinite(r.theta)) {
                if (phase == 1) {
                    diagnostic = "numerical breakdown: unbounded phase-1 direction";
                    return SolveStatus::IterationLimit;
                }
                return SolveStatus::Unbounded;
            }
            if (r.row >= 0 &&
                std::fabs(T[static_cast<size_t>(r.row) * N + e.j]) < opt.pivot_tol) {
                // No stable pivot anywhere in this column; sideline it for
                // the rest of this solve.
                banned[e.j] = 1;
                ++n_banned;
                continue;
            }
            ++iters_this_solve;
            ++iterations;
            stall = r.theta <= 1e-12 ? stall + 1 : 0;

            apply_step(e.j, e.dir, r.theta);
            if (r.row < 0) {
                state[e.j] = e.dir > 0 ? VState::AtUpper : VState::AtLower;
                x[e.j] = e.dir > 0 ? ub[e.j] : lb[e.j];
            } else {
                const int leaving = basic[r.row];
                x[leaving] = r.to_upper ? ub[leaving] : lb[leaving];
                state[leaving] = r.to_upper ? VState::AtUpper : VState::AtLower;
                pivot(r.row, e.j, phase == 2);
            }

            if (phase == 1) {
                if (refresh_sigma(opt.feas_tol) == 0) {
                    phase = 2;
                    phase2_reduced_costs();
                    stall = 0;
                } else {
                    phase1_reduced_costs();
                }
            } else if (++since_refresh >= 500) {
                // Periodic refresh bounds numerical drift in dj and x_B.
                compute_basic_values();
                since_refresh = 0;
                if (refresh_sigma(opt.feas_tol) > 0) {
                    phase = 1;
                    phase1_reduced_costs();
                } else {
                    phase2_reduced_costs();
                }
            }
        }
    }
};

// ---------------------------------------------------------------------------
// BundledSolver
// ---------------------------------------------------------------------------

BundledSolver::BundledSolver(SolverOptions options) : options_(options) {}
BundledSolver::~BundledSolver() = default;
BundledSolver::BundledSolver(BundledSolver&&) noexcept = default;
BundledSolver& BundledSolver::operator=(BundledSolver&&) noexcept = default;

void BundledSolver::reset_warm_start() {
    ws_.reset();
    incumbent_.clear();
    have_incumbent_ = false;
}

namespace {

bool any_integral(const OptContainer& c) {
    for (const auto& v : c.variables())
        if (v.integral) return true;
    return false;
}

} // namespace

SolveResult BundledSolver::solve_lp(const OptContainer& c, bool relax_integrality) {
    if (!relax_integrality && any_integral(c))
        throw ContractError("solve_lp called on a container with integrality flags; "
                            "use solve_milp or request relaxation");
    const double t0 = now_ms();
    if (!ws_ || !ws_->matches(c, false)) {
        ws_ = std::make_unique<Workspace>();
        ws_->build(c, false);
    }
    ws_->sync(c, c.maximize(), options_.penalty);
    const long it0 = ws_->iterations;

    SolveResult res;
    res.status = ws_->primal_simplex(options_, res.diagnostic);
    res.stats.iterations = ws_->iterations - it0;
    if (res.status == SolveStatus::Optimal) {
        res.primal.assign(ws_->x.begin(), ws_->x.begin() + ws_->n);
        double obj = ws_->internal_objective();
        ws_->phase2_reduced_costs();
        res.duals.resize(static_cast<size_t>(ws_->m));
        for (int k = 0; k < ws_->m; ++k) {
            const double y = -ws_->dj[ws_->slack_index(k)];
            res.duals[static_cast<size_t>(k)] = c.maximize() ? -y : y;
        }
        if (c.maximize()) obj = -obj;
        res.objective = obj + c.objective_constant();
    }
    res.stats.wall_ms = now_ms() - t0;
    return res;
}

namespace {

struct BnbNode {
    double bound;
    long id;
    std::vector<std::pair<int, std::pair<double, double>>> fixes; // var -> [lb,ub]
};

struct BnbOrder {
    bool operator()(const BnbNode& a, const BnbNode& b) const {
        if (a.bound != b.bound) return a.bound > b.bound; // min-heap on bound
        // Children inherit the parent objective as their bound, so ties are
        // the common case; taking the newest first dives down one subtree,
        // which keeps the warm-started basis one bound-change away.
        return a.id < b.id;
    }
};

} // namespace

SolveResult BundledSolver::solve_milp(const OptContainer& c) {
    const double t0 = now_ms();
    std::vector<int> int_vars;
    for (int j = 0; j < c.n_variables(); ++j)
        if (c.variable(j).integral) int_vars.push_back(j);
    if (int_vars.empty()) {
        SolveResult r = solve_lp(c, false);
        r.duals.clear();
        return r;
    }

    if (!ws_ || !ws_->matches(c, false)) {
        ws_ = std::make_unique<Workspace>();
        ws_->build(c, false);
    }
    ws_->sync(c, c.maximize(), options_.penalty);
    const long it0 = ws_->iterations;
    const bool negate = c.maximize();

    // Warm incumbent: the previous solution seeds the search when it is
    // still feasible under the current bounds and right-hand sides.
    double inc_obj = kInf; // internal (min) orientation, without constant
    std::vector<double> inc_x;
    bool used_warm = false;
    if (have_incumbent_ && static_cast<int>(incumbent_.size()) == c.n_variables()) {
        bool ok = true;
        for (int j = 0; j < c.n_variables() && ok; ++j) {
            const auto& v = c.variable(j);
            const double xv = incumbent_[static_cast<size_t>(j)];
            if (xv < v.lb - 1e-7 || xv > v.ub + 1e-7) ok = false;
            if (v.integral && std::fabs(xv - std::round(xv)) > options_.int_tol) ok = false;
        }
        for (int i = 0; i < c.n_constraints() && ok; ++i) {
            const auto& row = c.constraint(i);
            double lhs = 0.0;
            for (const auto& term : row.terms)
                lhs += term.coef * incumbent_[static_cast<size_t>(term.var)];
            const double b = c.rhs_value(i);
            const double tol = 1e-7 * std::max(1.0, std::fabs(b));
            if (row.sense == Sense::LE && lhs > b + tol) ok = false;
            if (row.sense == Sense::GE && lhs < b - tol) ok = false;
            if (row.sense == Sense::EQ && std::fabs(lhs - b) > tol) ok = false;
        }
        if (ok) {
            double obj = 0.0;
            for (int j = 0; j < c.n_variables(); ++j)
                obj += c.objective_coef(j) * incumbent_[static_cast<size_t>(j)];
            inc_obj = negate ? -obj : obj;
            inc_x = incumbent_;
            used_warm = true;
        }
    }

    std::vector<std::pair<double, double>> base_bounds(static_cast<size_t>(c.n_variables()));
    for (int j = 0; j < c.n_variables(); ++j)
        base_bounds[static_cast<size_t>(j)] = {c.variable(j).lb, c.variable(j).ub};
    const auto restore_bounds = [&]() {
        for (int j = 0; j < ws_->n; ++j) {
            ws_->lb[j] = base_bounds[static_cast<size_t>(j)].first;
            ws_->ub[j] = base_bounds[static_cast<size_t>(j)].second;
        }
    };

    // Prune threshold: effectively exact (1e-9 relative) unless a looser
    // mip_gap was requested explicitly.
    const auto prune_eps = [&](double inc) {
        const double scale = std::max(1.0, std::fabs(inc));
        return std::max(1e-9 * scale, options_.mip_gap * scale);
    };

    std::priority_queue<BnbNode, std::vector<BnbNode>, BnbOrder> heap;
    long next_id = 0;
    heap.push(BnbNode{-kInf, next_id++, {}});

    SolveResult res;
    long nodes = 0;
    bool aborted_limit = false;
    bool unbounded = false;
    std::string abort_diag;

    // Depth-first dives with best-first restarts: children go onto a LIFO
    // stack (round-nearest on top) so a dive backtracks through siblings
    // until it reaches a leaf, keeping every node one bound-change from the
    // warm basis; when the stack drains, the next subtree comes from the
    // best-first heap.
    std::vector<BnbNode> dive_stack;
    while (!dive_stack.empty() || !heap.empty()) {
        if (nodes >= options_.node_limit) {
            aborted_limit = true;
            abort_diag = "node limit (" + std::to_string(options_.node_limit) + ") reached";
            break;
        }
        const bool from_heap = dive_stack.empty();
        BnbNode node;
        if (!dive_stack.empty()) {
            node = std::move(dive_stack.back());
            dive_stack.pop_back();
        } else {
            node = heap.top();
            heap.pop();
        }
        if (inc_obj < kInf && node.bound >= inc_obj - prune_eps(inc_obj)) {
            if (from_heap) break; // best-first: nothing better remains
            continue;             // abandon the dive, fall back to the heap
        }
        ++nodes;
        if (std::getenv("OPSIM_BNB_TRACE") != nullptr && nodes % 25 == 0)
            std::fprintf(stderr, "[bnb] nodes=%ld heap=%zu inc=%.6g bound=%.6g\n", nodes,
                         heap.size(), inc_obj, node.bound);

        restore_bounds();
        for (const auto& [var, bb] : node.fixes) {
            ws_->lb[var] = std::max(ws_->lb[var], bb.first);
            ws_->ub[var] = std::min(ws_->ub[var], bb.second);
        }
        std::string diag;
        const SolveStatus st = ws_->primal_simplex(options_, diag);
        if (st == SolveStatus::IterationLimit) {
            restore_bounds();
            res.status = SolveStatus::IterationLimit;
            res.diagnostic = diag;
            res.stats.iterations = ws_->iterations - it0;
            res.stats.nodes = nodes;
            res.stats.wall_ms = now_ms() - t0;
            return res;
        }
        if (st == SolveStatus::Unbounded) {
            unbounded = node.fixes.empty(); // only the root relaxation is meaningful here
            if (unbounded) break;
            continue;
        }
        if (st == SolveStatus::Infeasible) continue;

        const double obj = ws_->internal_objective();
        if (inc_obj < kInf && obj >= inc_obj - prune_eps(inc_obj)) continue;

        // Most fractional integer variable, ties to the lowest index.
        // Commitment statuses take priority: once the on-pattern is fixed,
        // the start/stop transitions follow integrally through the status
        // rows, so branching on them first is what actually moves a dive
        // toward a leaf.
        int branch_var = -1;
        double best_dist = options_.int_tol;
        for (int pass = 0; pass < 2 && branch_var < 0; ++pass) {
            for (int j : int_vars) {
                if (pass == 0 && c.variable(j).key.kind != VarKind::OnStatus) continue;
                const double dist = std::fabs(ws_->x[j] - std::round(ws_->x[j]));
                if (dist > best_dist + 1e-12) {
                    best_dist = dist;
                    branch_var = j;
                }
            }
        }
        if (branch_var < 0) {
            inc_obj = obj;
            inc_x.assign(ws_->x.begin(), ws_->x.begin() + ws_->n);
            for (int j : int_vars)
                inc_x[static_cast<size_t>(j)] = std::round(inc_x[static_cast<size_t>(j)]);
            continue;
        }

        const double frac_val = ws_->x[branch_var];
        const double fl = std::floor(frac_val);
        if (node.id == 0 && inc_obj == kInf) {
            // Rounding probes seed the pruning with an early incumbent.
            // Fractional statuses round generously upward: extra commitment
            // only removes transitions, so up/down-time logic stays
            // satisfiable and the probe usually lands close to the optimum.
            const std::vector<double> root_x(ws_->x.begin(), ws_->x.begin() + ws_->n);
            for (const double threshold : {0.5, 0.1, 0.0}) {
                restore_bounds();
                for (int j : int_vars) {
                    const auto [blo, bhi] = base_bounds[static_cast<size_t>(j)];
                    double pin;
                    if (c.variable(j).key.kind == VarKind::OnStatus) {
                        pin = root_x[static_cast<size_t>(j)] > threshold ? std::ceil(root_x[static_cast<size_t>(j)])
                                                                         : std::floor(root_x[static_cast<size_t>(j)]);
                        if (threshold == 0.0) pin = bhi; // commit everything committable
                    } else {
                        pin = std::round(root_x[static_cast<size_t>(j)]);
                    }
                    pin = std::clamp(pin, blo, bhi);
                    ws_->lb[j] = pin;
                    ws_->ub[j] = pin;
                }
                std::string probe_diag;
                if (ws_->primal_simplex(options_, probe_diag) != SolveStatus::Optimal) continue;
                bool integral = true;
                for (int j : int_vars)
                    integral &= std::fabs(ws_->x[j] - std::round(ws_->x[j])) <= options_.int_tol;
                if (!integral) continue;
                const double probe_obj = ws_->internal_objective();
                if (probe_obj < inc_obj) {
                    inc_obj = probe_obj;
                    inc_x.assign(ws_->x.begin(), ws_->x.begin() + ws_->n);
                    for (int j : int_vars)
                        inc_x[static_cast<size_t>(j)] = std::round(inc_x[static_cast<size_t>(j)]);
                }
            }
            restore_bounds();
        }
        BnbNode down{obj, next_id++, node.fixes};
        down.fixes.push_back({branch_var, {-kInf, fl}});
        BnbNode up{obj, next_id++, node.fixes};
        up.fixes.push_back({branch_var, {fl + 1.0, kInf}});
        if (frac_val - fl >= 0.5) {
            dive_stack.push_back(std::move(down));
            dive_stack.push_back(std::move(up));
        } else {
            dive_stack.push_back(std::move(up));
            dive_stack.push_back(std::move(down));
        }
        if (dive_stack.size() > 5000) {
            for (auto& n : dive_stack) heap.push(std::move(n));
            dive_stack.clear();
        }
    }
    restore_bounds();

    res.stats.iterations = ws_->iterations - it0;
    res.stats.nodes = nodes;
    res.stats.wall_ms = now_ms() - t0;
    res.used_warm_incumbent = used_warm;
    if (unbounded) {
        res.status = SolveStatus::Unbounded;
        return res;
    }
    if (inc_obj < kInf) {
        res.status = aborted_limit ? SolveStatus::NodeLimit : SolveStatus::Optimal;
        res.primal = inc_x;
        res.objective = (negate ? -inc_obj : inc_obj) + c.objective_constant();
        if (aborted_limit) res.diagnostic = abort_diag;
        incumbent_ = inc_x;
        have_incumbent_ = true;
    } else {
        res.status = aborted_limit ? SolveStatus::NodeLimit : SolveStatus::Infeasible;
        if (aborted_limit) res.diagnostic = abort_diag;
    }
    return res;
}

SolveResult BundledSolver::relax_and_solve(const OptContainer& c) {
    const double t0 = now_ms();
    // Transient workspace: integrality dropped, penalized bound slacks on
    // every row so the relaxation always yields usable initial values.
    Workspace ws;
    ws.build(c, true);
    ws.sync(c, c.maximize(), options_.penalty);

    SolveResult res;
    res.status = ws.primal_simplex(options_, res.diagnostic);
    res.stats.iterations = ws.iterations;
    if (res.status == SolveStatus::Infeasible) {
        res.diagnostic = "slacked relaxation reported infeasible (numerical breakdown)";
        res.status = SolveStatus::IterationLimit;
    } else if (res.status == SolveStatus::Unbounded) {
        res.diagnostic = "slacked relaxation unbounded: corrupt input data";
    } else if (res.status == SolveStatus::Optimal) {
        res.primal.assign(ws.x.begin(), ws.x.begin() + ws.n);
        res.penalty_slack_total = ws.penalty_total();
        double obj = ws.internal_objective();
        if (c.maximize()) obj = -obj;
        res.objective = obj + c.objective_constant();
    }
    res.stats.wall_ms = now_ms() - t0;
    return res;
}

// ---------------------------------------------------------------------------

namespace {

std::string lp_var_name(const OptContainer& c, int j) {
    const auto& k = c.variable(j).key;
    std::string s = std::string(to_string(k.kind)) + "_" + k.component + "_" + std::to_string(k.t);
    for (char& ch : s)
        if (!std::isalnum(static_cast<unsigned char>(ch))) ch = '_';
    return s;
}

} // namespace

void write_lp_file(const OptContainer& c, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.precision(17);
    out << (c.maximize() ? "Maximize" : "Minimize") << "\n obj:";
    bool first = true;
    for (int j = 0; j < c.n_variables(); ++j) {
        const double a = c.objective_coef(j);
        if (a == 0.0) continue;
        out << (a < 0 ? " - " : first ? " " : " + ") << std::fabs(a) << " " << lp_var_name(c, j);
        first = false;
    }
    if (first) out << " 0 " << lp_var_name(c, 0);
    out << "\nSubject To\n";
    for (int i = 0; i < c.n_constraints(); ++i) {
        const auto& row = c.constraint(i);
        out << " c" << i << ":";
        bool rf = true;
        for (const auto& t : row.terms) {
            if (t.coef == 0.0) continue;
            out << (t.coef < 0 ? " - " : rf ? " " : " + ") << std::fabs(t.coef) << " "
                << lp_var_name(c, t.var);
            rf = false;
        }
        if (rf) out << " 0 " << lp_var_name(c, 0);
        out << (row.sense == Sense::LE ? " <= " : row.sense == Sense::GE ? " >= " : " = ")
            << c.rhs_value(i) << "\n";
    }
    out << "Bounds\n";
    for (int j = 0; j < c.n_variables(); ++j) {
        const auto& v = c.variable(j);
        out << " ";
        if (std::isfinite(v.lb)) out << v.lb << " <= ";
        else out << "-inf <= ";
        out << lp_var_name(c, j);
        if (std::isfinite(v.ub)) out << " <= " << v.ub;
        out << "\n";
    }
    bool have_int = false;
    for (int j = 0; j < c.n_variables(); ++j) have_int |= c.variable(j).integral;
    if (have_int) {
        out << "General\n";
        for (int j = 0; j < c.n_variables(); ++j)
            if (c.variable(j).integral) out << " " << lp_var_name(c, j) << "\n";
    }
    out << "End\n";
}

SolveResult solve_lp_once(const OptContainer& c, SolverOptions options, bool relax_integrality) {
    BundledSolver s(options);
    return s.solve_lp(c, relax_integrality);
}

SolveResult solve_milp_once(const OptContainer& c, SolverOptions options) {
    BundledSolver s(options);
    return s.solve_milp(c);
}

} // namespace opsim
