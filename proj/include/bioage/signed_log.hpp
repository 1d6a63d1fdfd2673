#ifndef BIOAGE_SIGNED_LOG_HPP
#define BIOAGE_SIGNED_LOG_HPP

#include <cmath>
#include <limits>
#include <numbers>

namespace bioage {

// Sign + log-magnitude scalar. The moment cascade spans hundreds of orders
// of magnitude on long runs; once a component passes ~1e300 the state is
// carried in this representation instead of raw doubles.
struct SignedLog {
    double lg = -std::numeric_limits<double>::infinity();  // ln |value|
    int sgn = 0;

    static SignedLog from_double(double v) {
        if (v == 0.0) return {};
        return {std::log(std::fabs(v)), v > 0.0 ? 1 : -1};
    }

    // Overflows to +-inf for |value| beyond double range.
    double to_double() const { return sgn == 0 ? 0.0 : sgn * std::exp(lg); }

    double log10_mag() const { return lg / std::numbers::ln10; }

    bool is_zero() const { return sgn == 0; }
};

inline SignedLog operator*(double c, SignedLog a) {
    if (c == 0.0 || a.sgn == 0) return {};
    return {a.lg + std::log(std::fabs(c)), c > 0.0 ? a.sgn : -a.sgn};
}

inline SignedLog operator+(SignedLog a, SignedLog b) {
    if (a.sgn == 0) return b;
    if (b.sgn == 0) return a;
    const SignedLog& hi = (a.lg >= b.lg) ? a : b;
    const SignedLog& lo = (a.lg >= b.lg) ? b : a;
    const double d = lo.lg - hi.lg;  // <= 0
    if (a.sgn == b.sgn) return {hi.lg + std::log1p(std::exp(d)), a.sgn};
    const double e = std::exp(d);
    if (e == 1.0) return {};  // exact cancellation
    return {hi.lg + std::log1p(-e), hi.sgn};
}

}  // namespace bioage

#endif
