#ifndef BIOAGE_DENSITIES_HPP
#define BIOAGE_DENSITIES_HPP

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <variant>

#include "bioage/errors.hpp"

namespace bioage {

// Nonnegative initial density with compact support [0, support_hi]. The raw
// amplitude is kept: the PDE and the moment quadrature consume it as-is, the
// individual-based sampler normalizes it to a probability density.
struct InitialDensity {
    std::string name;
    double support_hi = 0.0;
    std::function<double(double)> f;

    double operator()(double b) const { return (b < 0.0 || b > support_hi) ? 0.0 : f(b); }
};

// u0(b) = (2/5) max(0, b (1 - b/10)); total mass 20/3, mean 5.
inline InitialDensity parabolic_density() {
    return {"parabolic", 10.0,
            [](double b) { return 0.4 * std::max(0.0, b * (1.0 - b / 10.0)); }};
}

inline InitialDensity uniform_density(double lo, double hi) {
    if (!(hi > lo && lo >= 0.0)) throw RangeError("uniform density requires 0 <= lo < hi");
    return {"uniform", hi, [lo, hi](double b) { return (b >= lo && b < hi) ? 1.0 : 0.0; }};
}

// Gaussian restricted to [0, hi]; not renormalized (mass < 1 by truncation).
inline InitialDensity truncated_gaussian_density(double mean, double sd, double hi) {
    if (!(sd > 0.0 && hi > 0.0)) throw RangeError("gaussian density requires sd > 0 and hi > 0");
    const double norm = 1.0 / (sd * std::sqrt(2.0 * 3.14159265358979323846));
    return {"gaussian", hi, [mean, sd, norm](double b) {
                const double z = (b - mean) / sd;
                return norm * std::exp(-0.5 * z * z);
            }};
}

// Empty initial condition for runs driven purely by the birth source. The
// individual-based sampler rejects it; the PDE and the cascade accept it.
inline InitialDensity zero_density() {
    return {"zero", 1.0, [](double) { return 0.0; }};
}

struct DiracCohort {
    double b0 = 0.0;
};

using InitialCondition = std::variant<DiracCohort, InitialDensity>;

inline double initial_support_hi(const InitialCondition& ic) {
    if (const auto* dirac = std::get_if<DiracCohort>(&ic)) return dirac->b0;
    return std::get<InitialDensity>(ic).support_hi;
}

}  // namespace bioage

#endif
