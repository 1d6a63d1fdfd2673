#ifndef BIOAGE_PDE_HPP
#define BIOAGE_PDE_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "bioage/densities.hpp"
#include "bioage/errors.hpp"
#include "bioage/model.hpp"
#include "bioage/moments.hpp"
#include "bioage/quadrature.hpp"

namespace bioage {

struct Grid {
    double b_max = 0.0;
    int n_cells = 0;
    double db = 0.0;

    static Grid make(double b_max, int n_cells) {
        if (n_cells < 16) throw RangeError("grid: n_cells must be >= 16");
        if (!(b_max > 0.0)) throw RangeError("grid: b_max must be > 0");
        return {b_max, n_cells, b_max / n_cells};
    }

    double edge(int i) const { return i * db; }
    double center(int i) const { return (i + 0.5) * db; }
    int cell_of(double b) const {
        const int i = static_cast<int>(b / db);
        return std::min(std::max(i, 0), n_cells - 1);
    }
};

// Mass-per-cell representation of u(t, .); density u_i = mass_i / db. The
// ledger fields account for every unit of mass that entered or left the grid.
struct DensityState {
    double t = 0.0;
    std::vector<double> cell_masses;
    double outflow_mass = 0.0;  // advected past b_max or jumped beyond it
    double births_mass = 0.0;   // injected by the birth source (within grid)
    double deaths_mass = 0.0;   // removed by mortality
    double initial_mass = 0.0;

    double total_mass() const {
        long double s = 0.0L;
        for (double m : cell_masses) s += m;
        return static_cast<double>(s);
    }

    // total + outflow + deaths - births - initial; should vanish to rounding.
    double ledger_residual() const {
        const long double r = static_cast<long double>(total_mass()) + outflow_mass +
                              deaths_mass - births_mass - initial_mass;
        return static_cast<double>(r);
    }
};

// Conservative redistribution operator for one jump family: the mass of each
// source cell moves to the cell range covering the image of that cell under
// the inverse jump map, split by exact interval overlap. Columns sum to one
// with the overflow share counted, which is what preserves total mass.
struct JumpOperatorMatrix {
    std::vector<std::uint32_t> dest_first;  // first destination cell per column
    std::vector<std::uint32_t> offsets;     // prefix offsets into weights
    std::vector<double> weights;
    std::vector<double> overflow;  // weight share landing beyond b_max

    double column_sum(int j) const {
        double s = overflow[static_cast<size_t>(j)];
        for (auto w = offsets[static_cast<size_t>(j)]; w < offsets[static_cast<size_t>(j) + 1]; ++w)
            s += weights[w];
        return s;
    }

    // out += scale * R * m; returns the mass that fell into the overflow bin
    // (already multiplied by scale).
    double apply_scaled(const std::vector<double>& m, double scale,
                        std::vector<double>& out) const {
        double lost = 0.0;
        const int n = static_cast<int>(dest_first.size());
        for (int j = 0; j < n; ++j) {
            const double mj = m[static_cast<size_t>(j)];
            if (mj == 0.0) continue;
            const double smj = scale * mj;
            std::uint32_t dest = dest_first[static_cast<size_t>(j)];
            for (auto w = offsets[static_cast<size_t>(j)]; w < offsets[static_cast<size_t>(j) + 1];
                 ++w, ++dest)
                out[dest] += smj * weights[w];
            lost += smj * overflow[static_cast<size_t>(j)];
        }
        return lost;
    }
};

inline JumpOperatorMatrix build_jump_matrix(const Grid& grid, const JumpFamily& family) {
    JumpOperatorMatrix r;
    r.dest_first.resize(static_cast<size_t>(grid.n_cells));
    r.offsets.resize(static_cast<size_t>(grid.n_cells) + 1, 0);
    r.overflow.resize(static_cast<size_t>(grid.n_cells), 0.0);
    double y1 = jump_target(family, 0.0);  // = 0
    for (int j = 0; j < grid.n_cells; ++j) {
        const double y0 = y1;
        y1 = jump_target(family, grid.edge(j + 1));
        const double len = y1 - y0;
        const size_t col = static_cast<size_t>(j);
        if (!(len > 0.0)) {  // degenerate image: all mass into one cell
            if (y0 >= grid.b_max) {
                r.dest_first[col] = 0;
                r.overflow[col] = 1.0;
            } else {
                r.dest_first[col] = static_cast<std::uint32_t>(grid.cell_of(y0));
                r.weights.push_back(1.0);
            }
            r.offsets[col + 1] = static_cast<std::uint32_t>(r.weights.size());
            continue;
        }
        const double y1_in = std::min(y1, grid.b_max);
        if (y0 >= grid.b_max) {
            r.dest_first[col] = 0;
            r.overflow[col] = 1.0;
        } else {
            const int i_lo = static_cast<int>(y0 / grid.db);
            const int i_hi = std::min(grid.n_cells - 1,
                                      static_cast<int>(y1_in / grid.db));
            r.dest_first[col] = static_cast<std::uint32_t>(i_lo);
            for (int i = i_lo; i <= i_hi; ++i) {
                const double lo = std::max(y0, grid.edge(i));
                const double hi = std::min(y1_in, grid.edge(i + 1));
                r.weights.push_back(std::max(0.0, hi - lo) / len);
            }
            r.overflow[col] = y1 > grid.b_max ? (y1 - grid.b_max) / len : 0.0;
        }
        r.offsets[col + 1] = static_cast<std::uint32_t>(r.weights.size());
    }
    return r;
}

// Exact per-cell masses of the gamma birth density (incomplete-gamma
// differences in the integer-shape closed form).
inline std::vector<double> gamma_cell_masses(const Grid& grid, const DemographyParams& dem) {
    std::vector<double> cells(static_cast<size_t>(grid.n_cells));
    double prev = 0.0;
    for (int i = 0; i < grid.n_cells; ++i) {
        const double next = gamma_cdf(dem, grid.edge(i + 1));
        cells[static_cast<size_t>(i)] = next - prev;
        prev = next;
    }
    return cells;
}

inline DensityState discretize_initial(const Grid& grid, const InitialCondition& ic,
                                       double dirac_mass = 1.0) {
    DensityState state;
    state.cell_masses.assign(static_cast<size_t>(grid.n_cells), 0.0);
    if (const auto* dirac = std::get_if<DiracCohort>(&ic)) {
        if (dirac->b0 < 0.0 || dirac->b0 >= grid.b_max)
            throw RangeError("initial cohort age lies outside the grid");
        state.cell_masses[static_cast<size_t>(grid.cell_of(dirac->b0))] = dirac_mass;
    } else {
        const auto& u0 = std::get<InitialDensity>(ic);
        for (int i = 0; i < grid.n_cells; ++i) {
            if (grid.edge(i) > u0.support_hi) break;
            state.cell_masses[static_cast<size_t>(i)] = integrate_adaptive(
                [&u0](double b) { return u0(b); }, grid.edge(i),
                std::min(grid.edge(i + 1), u0.support_hi), 1e-12);
        }
    }
    state.initial_mass = state.total_mass();
    return state;
}

// One operator-split step: upwind advection (zero inflow at b = 0, outflow
// ledger at b_max), then the explicit jump exchange, then mortality and the
// gamma birth source. Split order is fixed; splitting error is O(dt), same
// as the advection scheme.
inline void step(DensityState& state, double dt, const ValidatedParams& params,
                 const Grid& grid, const JumpOperatorMatrix& r_plus,
                 const JumpOperatorMatrix& r_minus,
                 const std::vector<double>* birth_cells, std::vector<double>& scratch) {
    const double tau_plus = params.tau_plus();
    const double tau_minus = params.tau_minus();
    const double mu = params.has_demography() ? params.demography().mu : 0.0;
    const double beta = params.has_demography() ? params.demography().beta : 0.0;
    if (dt > grid.db * (1.0 + 1e-12))
        throw CflError("step: dt must not exceed the cell width (unit drift speed)");
    if (dt * (tau_plus + tau_minus + mu) > 1.0 + 1e-12)
        throw CflError("step: dt (tau_+ + tau_- + mu) must not exceed 1");

    auto& m = state.cell_masses;
    const int n = grid.n_cells;

    // (1) advection
    const double nu = dt / grid.db;
    state.outflow_mass += nu * m[static_cast<size_t>(n - 1)];
    for (int i = n - 1; i >= 1; --i)
        m[static_cast<size_t>(i)] += nu * (m[static_cast<size_t>(i - 1)] - m[static_cast<size_t>(i)]);
    m[0] -= nu * m[0];

    // (2) jump exchange
    const double tau_total = tau_plus + tau_minus;
    if (tau_total > 0.0) {
        scratch.assign(m.size(), 0.0);
        double lost = 0.0;
        if (tau_plus > 0.0) lost += r_plus.apply_scaled(m, dt * tau_plus, scratch);
        if (tau_minus > 0.0) lost += r_minus.apply_scaled(m, dt * tau_minus, scratch);
        const double keep = 1.0 - dt * tau_total;
        for (size_t i = 0; i < m.size(); ++i) m[i] = keep * m[i] + scratch[i];
        state.outflow_mass += lost;
    }

    // (3) demography
    if (params.has_demography()) {
        double removed = 0.0;
        const double keep = 1.0 - dt * mu;
        for (auto& mi : m) {
            removed += dt * mu * mi;
            mi *= keep;
        }
        state.deaths_mass += removed;
        double injected = 0.0;
        for (size_t i = 0; i < m.size(); ++i) {
            const double add = dt * beta * (*birth_cells)[i];
            m[i] += add;
            injected += add;
        }
        state.births_mass += injected;
    }

    state.t += dt;
}

// Midpoint-rule moments: E_k = sum_i mass_i center_i^k.
inline MomentVector density_moments(const DensityState& state, const Grid& grid, int K) {
    if (K < 0) throw RangeError("density_moments: K must be >= 0");
    MomentVector mv;
    mv.t = state.t;
    mv.values.assign(static_cast<size_t>(K) + 1, 0.0);
    mv.log_flags.assign(static_cast<size_t>(K) + 1, 0);
    for (int k = 0; k <= K; ++k) {
        double s = 0.0;
        for (int i = 0; i < grid.n_cells; ++i)
            s += state.cell_masses[static_cast<size_t>(i)] * std::pow(grid.center(i), k);
        mv.values[static_cast<size_t>(k)] = s;
    }
    return mv;
}

struct DensityTrajectory {
    Grid grid;
    std::vector<DensityState> snapshots;
};

// Owns the matrices and the birth source so repeated stepping stays cheap.
class PdeSimulation {
public:
    PdeSimulation(ValidatedParams params, Grid grid, DensityState initial)
        : params_(std::move(params)), grid_(grid), state_(std::move(initial)) {
        if (params_.tau_plus() > 0.0) r_plus_ = build_jump_matrix(grid_, params_.jump_plus());
        if (params_.tau_minus() > 0.0) r_minus_ = build_jump_matrix(grid_, params_.jump_minus());
        if (params_.has_demography())
            birth_cells_ = gamma_cell_masses(grid_, params_.demography());
    }

    const DensityState& state() const { return state_; }
    const Grid& grid() const { return grid_; }

    // Steps of at most dt until t_target, shortening the last step to land
    // exactly; dt must already satisfy both CFL conditions.
    void advance_to(double t_target, double dt) {
        if (t_target < state_.t) throw RangeError("advance_to: t_target must be >= state.t");
        while (state_.t < t_target - 1e-12 * (1.0 + t_target)) {
            const double h = std::min(dt, t_target - state_.t);
            step(state_, h, params_, grid_, r_plus_, r_minus_,
                 params_.has_demography() ? &birth_cells_ : nullptr, scratch_);
            check_positivity();
        }
        state_.t = t_target;
    }

    // Largest admissible step for these parameters.
    double default_dt() const {
        const double mu = params_.has_demography() ? params_.demography().mu : 0.0;
        const double rate = params_.tau_plus() + params_.tau_minus() + mu;
        return rate > 0.0 ? std::min(grid_.db, 1.0 / rate) : grid_.db;
    }

private:
    void check_positivity() const {
        for (double m : state_.cell_masses)
            if (m < -1e-12 * (state_.initial_mass + 1.0))
                throw std::logic_error("pde step produced negative mass");
    }

    ValidatedParams params_;
    Grid grid_;
    JumpOperatorMatrix r_plus_, r_minus_;
    std::vector<double> birth_cells_;
    DensityState state_;
    std::vector<double> scratch_;
};

}  // namespace bioage

#endif
