#ifndef BIOAGE_COMPARE_HPP
#define BIOAGE_COMPARE_HPP

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "bioage/errors.hpp"
#include "bioage/ibm.hpp"
#include "bioage/moments.hpp"
#include "bioage/pde.hpp"

namespace bioage {

struct ComparisonEntry {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct ComparisonReport {
    std::string scenario;
    std::vector<ComparisonEntry> entries;
    std::map<std::string, std::string> provenance;

    bool all_pass() const {
        for (const auto& e : entries)
            if (!e.pass) return false;
        return true;
    }

    void add(std::string name, double value, double tolerance) {
        entries.push_back({std::move(name), value, tolerance,
                           std::fabs(value) <= tolerance});
    }
};

// L1 distance between two probability distributions on the histogram's
// binning; the PDE mass is integrated over each bin by cell overlap. The
// histogram overflow bin is paired with the PDE outflow ledger. Result in
// [0, 2].
inline double l1_distance(const Histogram& hist, const DensityState& state,
                          const Grid& grid) {
    if (std::fabs(hist.b_max - grid.b_max) > 1e-9 * (1.0 + grid.b_max))
        throw BinningMismatchError("histogram and grid cover different age ranges");
    if (hist.total == 0) throw BinningMismatchError("histogram is empty");

    std::vector<double> pde_bins(hist.n_bins(), 0.0);
    double pde_total = state.outflow_mass;
    for (int i = 0; i < grid.n_cells; ++i) {
        const double m = state.cell_masses[static_cast<size_t>(i)];
        pde_total += m;
        if (m == 0.0) continue;
        const double lo = grid.edge(i), hi = grid.edge(i + 1);
        size_t j = static_cast<size_t>(lo / hist.bin_width);
        for (; j < pde_bins.size(); ++j) {
            const double bin_lo = static_cast<double>(j) * hist.bin_width;
            const double bin_hi = bin_lo + hist.bin_width;
            if (bin_lo >= hi) break;
            const double overlap = std::min(hi, bin_hi) - std::max(lo, bin_lo);
            if (overlap > 0.0) pde_bins[j] += m * overlap / (hi - lo);
        }
    }
    if (!(pde_total > 0.0)) throw BinningMismatchError("density state carries no mass");

    double dist = 0.0;
    const double n = static_cast<double>(hist.total);
    for (size_t j = 0; j < hist.n_bins(); ++j)
        dist += std::fabs(static_cast<double>(hist.counts[j]) / n - pde_bins[j] / pde_total);
    dist += std::fabs(static_cast<double>(hist.overflow) / n + 0.0 -
                      state.outflow_mass / pde_total);
    return dist;
}

struct SupportCheck {
    bool within_bound = false;
    double observed_max = 0.0;
    double bound = 0.0;
};

// Rejuvenation-only support bound: ages stay below b* + t.
inline SupportCheck support_check(const Population& pop, double b_star, double t) {
    SupportCheck c;
    c.bound = b_star + t;
    c.observed_max = pop.max_age();
    c.within_bound = c.observed_max <= c.bound + 1e-9 * (1.0 + c.bound);
    return c;
}

// PDE variant: support edge is the right edge of the last cell holding more
// than 1e-12 of the total mass; one cell of first-order smearing is allowed.
inline SupportCheck support_check(const DensityState& state, const Grid& grid,
                                  double b_star, double t) {
    SupportCheck c;
    c.bound = b_star + t + grid.db;
    const double threshold = 1e-12 * state.total_mass();
    c.observed_max = 0.0;
    for (int i = grid.n_cells - 1; i >= 0; --i) {
        if (state.cell_masses[static_cast<size_t>(i)] > threshold) {
            c.observed_max = grid.edge(i + 1);
            break;
        }
    }
    if (state.outflow_mass > threshold) c.observed_max = grid.b_max;
    c.within_bound = c.observed_max <= c.bound + 1e-9 * (1.0 + c.bound);
    return c;
}

// Per-k relative differences of normalized moments E_k/E_0 against a
// tolerance profile (index 0 of tol_profile applies to k = 1, and so on).
inline ComparisonReport moment_agreement(const MomentVector& a, const MomentVector& b,
                                         int k_max, const std::vector<double>& tol_profile,
                                         const std::string& label = "moments") {
    ComparisonReport report;
    report.scenario = label;
    const double a0 = a.value(0), b0 = b.value(0);
    for (int k = 1; k <= k_max; ++k) {
        const double na = a.value(k) / a0;
        const double nb = b.value(k) / b0;
        const double denom = std::max(std::fabs(nb), 1e-300);
        const double tol = tol_profile[static_cast<size_t>(k - 1)];
        report.add(label + ":E" + std::to_string(k), (na - nb) / denom, tol);
    }
    return report;
}

}  // namespace bioage

#endif
