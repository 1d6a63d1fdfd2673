#ifndef BIOAGE_MODEL_HPP
#define BIOAGE_MODEL_HPP

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <variant>

#include "bioage/errors.hpp"

namespace bioage {

// ---------------------------------------------------------------------------
// Jump families
//
// A jump replaces the pre-jump age b_pre by the post-jump age b solving
// f(b) = b_pre. Every admissible f satisfies f(0) = 0 and f'(b) >= 0, which
// is what makes the transport operator mass-preserving and positive.
// ---------------------------------------------------------------------------

// f(b) = g * b. Rejuvenation uses g > 1, premature aging 0 < g < 1.
struct LinearJump {
    double g = 1.0;
};

// f(b) = (1 + delta * b^m) * b, delta > 0, m >= 0. Rejuvenating: f(b) >= b.
struct PolynomialRejuvenation {
    double delta = 0.1;
    double m = 1.0;
};

// f(b) = (1 - delta / (1 + chi_sat * b^m)) * b, 0 <= chi_sat <= delta < 1.
// Aging: f(b) <= b, with the age gain saturating for large b when chi_sat > 0.
struct SaturatingAging {
    double delta = 0.1;
    double chi_sat = 0.0;
    double m = 1.0;
};

using JumpFamily = std::variant<LinearJump, PolynomialRejuvenation, SaturatingAging>;

struct JumpEval {
    double f = 0.0;
    double f_prime = 0.0;
};

inline JumpEval jump_map_eval(const JumpFamily& family, double b) {
    if (const auto* lin = std::get_if<LinearJump>(&family)) {
        return {lin->g * b, lin->g};
    }
    if (const auto* poly = std::get_if<PolynomialRejuvenation>(&family)) {
        const double bm = std::pow(b, poly->m);
        return {(1.0 + poly->delta * bm) * b, 1.0 + poly->delta * (poly->m + 1.0) * bm};
    }
    const auto& sat = std::get<SaturatingAging>(family);
    const double bm = std::pow(b, sat.m);
    const double h = 1.0 + sat.chi_sat * bm;
    const double f = (1.0 - sat.delta / h) * b;
    const double f_prime = 1.0 - sat.delta / h + sat.delta * sat.chi_sat * sat.m * bm / (h * h);
    return {f, f_prime};
}

inline bool is_linear(const JumpFamily& family) {
    return std::holds_alternative<LinearJump>(family);
}

// Slope of a linear family; throws for nonlinear ones.
inline double linear_g(const JumpFamily& family) {
    if (const auto* lin = std::get_if<LinearJump>(&family)) return lin->g;
    throw UnsupportedFamilyError("operation requires a linear jump family");
}

inline bool is_rejuvenating(const JumpFamily& family) {
    if (const auto* lin = std::get_if<LinearJump>(&family)) return lin->g >= 1.0;
    return std::holds_alternative<PolynomialRejuvenation>(family);
}

// Post-jump age: the root b of f(b) = b_pre. Linear families invert exactly;
// nonlinear ones use bracketed bisection refined by Newton steps (f is
// monotone, so the bracket is guaranteed).
inline double jump_target(const JumpFamily& family, double b_pre) {
    if (b_pre < 0.0) throw RangeError("jump_target: b_pre must be >= 0");
    if (const auto* lin = std::get_if<LinearJump>(&family)) return b_pre / lin->g;
    if (b_pre == 0.0) return 0.0;

    double lo = 0.0, hi = 0.0;
    if (std::holds_alternative<PolynomialRejuvenation>(family)) {
        lo = 0.0;
        hi = b_pre;  // f(b) >= b, so the root lies at or below b_pre
    } else {
        const auto& sat = std::get<SaturatingAging>(family);
        lo = b_pre;  // f(b) <= b
        hi = b_pre / (1.0 - sat.delta);
        // f(b) >= (1 - delta) b, so f(hi) >= b_pre; pad for roundoff.
        while (jump_map_eval(family, hi).f < b_pre) hi *= 1.0 + 1e-12;
    }

    const double tol = 1e-12;
    double b = 0.5 * (lo + hi);
    for (int iter = 0; iter < 200; ++iter) {
        const JumpEval e = jump_map_eval(family, b);
        const double resid = e.f - b_pre;
        if (std::fabs(resid) <= tol * (1.0 + std::fabs(b_pre))) return b;
        if (resid > 0.0) {
            hi = b;
        } else {
            lo = b;
        }
        double b_next = (e.f_prime > 0.0) ? b - resid / e.f_prime : b;
        if (!(b_next > lo && b_next < hi)) b_next = 0.5 * (lo + hi);  // bisect
        if (b_next == b) return b;  // stagnated at machine precision
        b = b_next;
    }
    throw ConvergenceError("jump_target: root solve did not converge (ill-posed family?)");
}

// ---------------------------------------------------------------------------
// Model parameters
// ---------------------------------------------------------------------------

struct ModelParams {
    double tau_plus = 0.0;   // rejuvenation jump rate per individual (1/year)
    double tau_minus = 0.0;  // premature-aging jump rate per individual (1/year)
    JumpFamily jump_plus = LinearJump{1.1};
    JumpFamily jump_minus = LinearJump{0.9};

    static ModelParams linear(double tau_plus, double tau_minus, double g_plus,
                              double g_minus) {
        return {tau_plus, tau_minus, LinearJump{g_plus}, LinearJump{g_minus}};
    }

    // Probabilistic parameterization: tau is the total jump rate and p the
    // probability that a jump rejuvenates.
    static ModelParams from_tau_p(double tau, double p, double g_plus, double g_minus) {
        if (!(tau > 0.0)) throw RangeError("tau must be > 0 in the (tau, p) parameterization");
        if (!(p >= 0.0 && p <= 1.0)) throw RangeError("p must lie in [0, 1]");
        return linear(tau * p, tau * (1.0 - p), g_plus, g_minus);
    }
};

// Birth-death extension: constant mortality, constant birth flow, and a
// gamma-distributed biological age at birth (integer shape alpha).
struct DemographyParams {
    double mu = 0.0;         // mortality rate (1/year)
    double beta = 0.0;       // birth flow (individuals/year)
    int alpha = 1;           // gamma shape
    double gamma_rate = 1.0; // gamma rate parameter (1/year)
};

namespace detail {

inline void check_family(const JumpFamily& family, const char* side, bool want_rejuvenating) {
    if (const auto* lin = std::get_if<LinearJump>(&family)) {
        if (want_rejuvenating && !(lin->g > 1.0))
            throw RangeError(std::string("g_plus must exceed 1 when tau_plus > 0 (got ") +
                             std::to_string(lin->g) + ")");
        if (!want_rejuvenating && !(lin->g > 0.0 && lin->g < 1.0))
            throw RangeError(std::string("g_minus must lie in (0, 1) when tau_minus > 0 (got ") +
                             std::to_string(lin->g) + ")");
        return;
    }
    if (const auto* poly = std::get_if<PolynomialRejuvenation>(&family)) {
        if (!want_rejuvenating)
            throw RangeError(std::string(side) + ": a rejuvenating family cannot model aging jumps");
        if (!(poly->delta > 0.0)) throw RangeError("polynomial rejuvenation requires delta > 0");
        if (!(poly->m >= 0.0)) throw RangeError("polynomial rejuvenation requires m >= 0");
        return;
    }
    const auto& sat = std::get<SaturatingAging>(family);
    if (want_rejuvenating)
        throw RangeError(std::string(side) + ": an aging family cannot model rejuvenation jumps");
    if (!(sat.delta > 0.0 && sat.delta < 1.0))
        throw RangeError("saturating aging requires 0 < delta < 1");
    if (!(sat.chi_sat >= 0.0 && sat.chi_sat <= sat.delta))
        throw RangeError("saturating aging requires 0 <= chi_sat <= delta");
    if (!(sat.m >= 0.0)) throw RangeError("saturating aging requires m >= 0");
}

}  // namespace detail

// Immutable validated parameter set; every downstream operation takes one of
// these, so range checks happen exactly once.
class ValidatedParams {
public:
    double tau_plus() const { return model_.tau_plus; }
    double tau_minus() const { return model_.tau_minus; }
    const JumpFamily& jump_plus() const { return model_.jump_plus; }
    const JumpFamily& jump_minus() const { return model_.jump_minus; }
    bool has_demography() const { return demography_.has_value(); }
    const DemographyParams& demography() const { return *demography_; }
    const std::optional<DemographyParams>& demography_opt() const { return demography_; }

    bool linear_families() const {
        return (model_.tau_plus <= 0.0 || is_linear(model_.jump_plus)) &&
               (model_.tau_minus <= 0.0 || is_linear(model_.jump_minus));
    }

    double g_plus() const { return linear_g(model_.jump_plus); }
    double g_minus() const { return linear_g(model_.jump_minus); }

    friend ValidatedParams validate(const ModelParams&, std::optional<DemographyParams>);

private:
    ValidatedParams(ModelParams m, std::optional<DemographyParams> d)
        : model_(std::move(m)), demography_(std::move(d)) {}

    ModelParams model_;
    std::optional<DemographyParams> demography_;
};

inline ValidatedParams validate(const ModelParams& params,
                                std::optional<DemographyParams> demography = std::nullopt) {
    if (!(params.tau_plus >= 0.0)) throw RangeError("tau_plus must be >= 0");
    if (!(params.tau_minus >= 0.0)) throw RangeError("tau_minus must be >= 0");
    if (params.tau_plus > 0.0) detail::check_family(params.jump_plus, "jump_plus", true);
    if (params.tau_minus > 0.0) detail::check_family(params.jump_minus, "jump_minus", false);
    if (demography) {
        if (!(demography->mu > 0.0)) throw RangeError("mu must be > 0");
        if (!(demography->beta > 0.0)) throw RangeError("beta must be > 0");
        if (demography->alpha < 1) throw RangeError("alpha must be an integer >= 1");
        if (!(demography->gamma_rate > 0.0)) throw RangeError("gamma_rate must be > 0");
    }
    return ValidatedParams(params, std::move(demography));
}

// ---------------------------------------------------------------------------
// Moment rates chi_k and their continuous extension
// ---------------------------------------------------------------------------

namespace detail {

inline void require_linear(const ValidatedParams& params, const char* op) {
    if (!params.linear_families())
        throw UnsupportedFamilyError(std::string(op) +
                                     " is only defined for linear jump families");
}

}  // namespace detail

// chi(x) = tau_plus (1 - g_plus^-x) + tau_minus (1 - g_minus^-x). The rate at
// which the x-th moment relaxes (chi > 0) or blows up (chi < 0).
inline double chi_continuous(const ValidatedParams& params, double x) {
    detail::require_linear(params, "chi_continuous");
    double value = 0.0;
    if (params.tau_plus() > 0.0)
        value += params.tau_plus() * (1.0 - std::pow(params.g_plus(), -x));
    if (params.tau_minus() > 0.0)
        value += params.tau_minus() * (1.0 - std::pow(params.g_minus(), -x));
    return value;
}

inline double chi_k(const ValidatedParams& params, int k) {
    if (k < 0) throw RangeError("chi_k: k must be >= 0");
    return chi_continuous(params, static_cast<double>(k));
}

enum class ChiCase {
    IncreasingThenDecreasing,  // interior maximum at x_max, then down to -inf
    Decreasing,                // monotone from chi(0) = 0 down to -inf
};

struct ChiShape {
    ChiCase case_tag = ChiCase::Decreasing;
    double x_max = std::numeric_limits<double>::quiet_NaN();  // set in case (i) only
    double criterion = 0.0;  // tau_plus ln g_plus + tau_minus ln g_minus
};

// Shape of x -> chi(x) for the combined model. Case (i) iff the derivative at
// zero, tau_plus ln g_plus + tau_minus ln g_minus, is positive.
inline ChiShape chi_x_max(const ValidatedParams& params) {
    detail::require_linear(params, "chi_x_max");
    if (!(params.tau_plus() > 0.0 && params.tau_minus() > 0.0))
        throw RangeError("chi_x_max requires tau_plus > 0 and tau_minus > 0");
    const double lp = std::log(params.g_plus());   // > 0
    const double lm = std::log(params.g_minus());  // < 0
    ChiShape shape;
    shape.criterion = params.tau_plus() * lp + params.tau_minus() * lm;
    if (shape.criterion > 0.0) {
        shape.case_tag = ChiCase::IncreasingThenDecreasing;
        shape.x_max = (std::log(params.tau_plus() * lp) - std::log(-params.tau_minus() * lm)) /
                      (lp - lm);
    }
    return shape;
}

// ---------------------------------------------------------------------------
// Gamma birth density (integer shape, so the factorial normalization is exact)
// ---------------------------------------------------------------------------

inline double gamma_density(const DemographyParams& dem, double b) {
    if (b < 0.0) throw RangeError("gamma_density: b must be >= 0");
    double fact = 1.0;
    for (int j = 2; j < dem.alpha; ++j) fact *= j;
    return std::pow(dem.gamma_rate, dem.alpha) * std::pow(b, dem.alpha - 1) *
           std::exp(-dem.gamma_rate * b) / fact;
}

// E_k of the gamma density: rate^-k (alpha + k - 1)! / (alpha - 1)!.
inline double gamma_moment(const DemographyParams& dem, int k) {
    if (k < 0) throw RangeError("gamma_moment: k must be >= 0");
    double prod = 1.0;
    for (int j = 0; j < k; ++j) prod *= dem.alpha + j;
    return prod * std::pow(dem.gamma_rate, -k);
}

// P(age at birth <= b); closed form for integer shape.
inline double gamma_cdf(const DemographyParams& dem, double b) {
    if (b <= 0.0) return 0.0;
    const double x = dem.gamma_rate * b;
    double term = 1.0, sum = 1.0;
    for (int j = 1; j < dem.alpha; ++j) {
        term *= x / j;
        sum += term;
    }
    return 1.0 - std::exp(-x) * sum;
}

}  // namespace bioage

#endif
