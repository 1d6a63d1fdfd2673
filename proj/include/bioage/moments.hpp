#ifndef BIOAGE_MOMENTS_HPP
#define BIOAGE_MOMENTS_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "bioage/densities.hpp"
#include "bioage/errors.hpp"
#include "bioage/model.hpp"
#include "bioage/quadrature.hpp"
#include "bioage/signed_log.hpp"

namespace bioage {

// Threshold above which a moment component is carried as log10 magnitude.
inline constexpr double kMomentOverflowThreshold = 1e300;

// E_0..E_K at one instant. A set component of log_flags marks a value too
// large for a double: values[k] then stores log10(E_k) and E_k > 0.
struct MomentVector {
    double t = 0.0;
    std::vector<double> values;
    std::vector<std::uint8_t> log_flags;

    MomentVector() = default;
    MomentVector(double time, std::vector<double> vals)
        : t(time), values(std::move(vals)), log_flags(values.size(), 0) {}

    int order() const { return static_cast<int>(values.size()) - 1; }
    bool flagged(int k) const { return log_flags[static_cast<size_t>(k)] != 0; }

    // Linear-scale value; +inf when the component only exists as a log.
    double value(int k) const {
        const double v = values[static_cast<size_t>(k)];
        return flagged(k) ? std::pow(10.0, v) : v;
    }

    double log10_of(int k) const {
        const double v = values[static_cast<size_t>(k)];
        return flagged(k) ? v : std::log10(v);
    }

    SignedLog as_signed_log(int k) const {
        const double v = values[static_cast<size_t>(k)];
        if (flagged(k)) return {v * std::numbers::ln10, 1};
        return SignedLog::from_double(v);
    }
};

struct MomentTrajectory {
    std::vector<MomentVector> snapshots;
    int order = 0;
    double dt = 0.0;
    bool stiffness_warning = false;
    bool switched_to_log = false;
    double log_switch_time = std::numeric_limits<double>::quiet_NaN();
};

// ---------------------------------------------------------------------------
// Moments of an initial density by adaptive quadrature
// ---------------------------------------------------------------------------

inline MomentVector moments_of_density(const InitialDensity& u0, int K,
                                       double rel_tol = 1e-10) {
    if (K < 0) throw RangeError("moments_of_density: K must be >= 0");
    std::vector<double> vals(static_cast<size_t>(K) + 1);
    for (int k = 0; k <= K; ++k) {
        vals[static_cast<size_t>(k)] = integrate_adaptive(
            [&u0, k](double b) { return std::pow(b, k) * u0(b); }, 0.0, u0.support_hi,
            rel_tol);
    }
    return MomentVector(0.0, std::move(vals));
}

// ---------------------------------------------------------------------------
// Cascade integration: dE_k/dt = k E_{k-1} - chi_k E_k, lower triangular.
// With demography each component also decays at mu and k >= 0 gains the
// birth source beta * E_k(Gamma); E_0 obeys dE_0/dt = beta - mu E_0.
// Without demography E_0 is copied, never integrated.
// ---------------------------------------------------------------------------

namespace detail {

template <class Num>
Num from_signed_log(SignedLog s);
template <>
inline double from_signed_log<double>(SignedLog s) { return s.to_double(); }
template <>
inline SignedLog from_signed_log<SignedLog>(SignedLog s) { return s; }

// decay[k] = chi_k (+ mu); source[k] = beta * E_k(Gamma), zero when absent.
template <class Num>
void cascade_rhs(const std::vector<double>& decay, const std::vector<SignedLog>& source,
                 bool has_source, const std::vector<Num>& e, std::vector<Num>& d) {
    const size_t n = e.size();
    if (has_source) {
        d[0] = from_signed_log<Num>(source[0]) + (-decay[0]) * e[0];
    } else {
        d[0] = Num{};  // keeps E_0 bitwise constant through the RK4 update
    }
    for (size_t k = 1; k < n; ++k) {
        d[k] = static_cast<double>(k) * e[k - 1] + (-decay[k]) * e[k];
        if (has_source) d[k] = d[k] + from_signed_log<Num>(source[k]);
    }
}

template <class Num>
struct Rk4Scratch {
    std::vector<Num> k1, k2, k3, k4, tmp;
    explicit Rk4Scratch(size_t n) : k1(n), k2(n), k3(n), k4(n), tmp(n) {}
};

template <class Num>
void rk4_step(std::vector<Num>& y, double dt, const std::vector<double>& decay,
              const std::vector<SignedLog>& source, bool has_source,
              Rk4Scratch<Num>& s) {
    const size_t n = y.size();
    cascade_rhs(decay, source, has_source, y, s.k1);
    for (size_t i = 0; i < n; ++i) s.tmp[i] = y[i] + (0.5 * dt) * s.k1[i];
    cascade_rhs(decay, source, has_source, s.tmp, s.k2);
    for (size_t i = 0; i < n; ++i) s.tmp[i] = y[i] + (0.5 * dt) * s.k2[i];
    cascade_rhs(decay, source, has_source, s.tmp, s.k3);
    for (size_t i = 0; i < n; ++i) s.tmp[i] = y[i] + dt * s.k3[i];
    cascade_rhs(decay, source, has_source, s.tmp, s.k4);
    for (size_t i = 0; i < n; ++i) {
        y[i] = y[i] + (dt / 6.0) * s.k1[i] + (dt / 3.0) * s.k2[i] + (dt / 3.0) * s.k3[i] +
               (dt / 6.0) * s.k4[i];
    }
}

inline MomentVector snapshot_double(double t, const std::vector<double>& e) {
    return MomentVector(t, e);
}

inline MomentVector snapshot_slog(double t, const std::vector<SignedLog>& e) {
    MomentVector mv;
    mv.t = t;
    mv.values.resize(e.size());
    mv.log_flags.assign(e.size(), 0);
    const double lg_threshold = std::log(kMomentOverflowThreshold);
    for (size_t k = 0; k < e.size(); ++k) {
        if (e[k].sgn != 0 && e[k].lg > lg_threshold) {
            mv.values[k] = e[k].sgn * e[k].log10_mag();
            mv.log_flags[k] = 1;
        } else {
            mv.values[k] = e[k].to_double();
        }
    }
    return mv;
}

}  // namespace detail

inline MomentTrajectory integrate_moments(const ValidatedParams& params,
                                          const MomentVector& e_init, double t_end,
                                          double dt,
                                          const std::vector<double>& output_times) {
    if (!(dt > 0.0)) throw RangeError("integrate_moments: dt must be > 0");
    const int K = e_init.order();
    if (K < 0) throw RangeError("integrate_moments: empty initial moment vector");

    const bool demog = params.has_demography();
    const double mu = demog ? params.demography().mu : 0.0;

    std::vector<double> decay(static_cast<size_t>(K) + 1);
    for (int k = 0; k <= K; ++k) decay[static_cast<size_t>(k)] = chi_k(params, k) + mu;

    // Birth source in log space: beta * gamma_moment(k) overflows doubles for
    // large k long before the state does.
    std::vector<SignedLog> source(static_cast<size_t>(K) + 1);
    if (demog) {
        const auto& dem = params.demography();
        double lg = std::log(dem.beta);
        source[0] = {lg, 1};
        for (int k = 1; k <= K; ++k) {
            lg += std::log(dem.alpha + k - 1.0) - std::log(dem.gamma_rate);
            source[static_cast<size_t>(k)] = {lg, 1};
        }
    }

    MomentTrajectory traj;
    traj.order = K;
    traj.dt = dt;
    traj.stiffness_warning = std::fabs(decay[static_cast<size_t>(K)] - mu) * dt > 0.5;

    std::vector<double> e(e_init.values.size());
    std::vector<SignedLog> e_log(e_init.values.size());
    bool log_mode = false;
    for (int k = 0; k <= K; ++k) {
        e_log[static_cast<size_t>(k)] = e_init.as_signed_log(k);
        if (e_init.flagged(k)) log_mode = true;
        e[static_cast<size_t>(k)] = e_init.value(k);
    }
    if (demog && std::isinf(detail::from_signed_log<double>(source[static_cast<size_t>(K)])))
        log_mode = true;

    detail::Rk4Scratch<double> scratch_d(e.size());
    detail::Rk4Scratch<SignedLog> scratch_l(e.size());

    double t = 0.0;
    auto maybe_switch = [&](double now) {
        if (log_mode) return;
        for (double v : e) {
            if (std::fabs(v) > kMomentOverflowThreshold) {
                for (size_t i = 0; i < e.size(); ++i) e_log[i] = SignedLog::from_double(e[i]);
                log_mode = true;
                traj.switched_to_log = true;
                traj.log_switch_time = now;
                return;
            }
        }
    };
    maybe_switch(0.0);

    auto advance_to = [&](double target) {
        while (t < target - 1e-12 * (1.0 + target)) {
            const double h = std::min(dt, target - t);
            if (log_mode) {
                detail::rk4_step(e_log, h, decay, source, demog, scratch_l);
            } else {
                detail::rk4_step(e, h, decay, source, demog, scratch_d);
            }
            t += h;
            maybe_switch(t);
        }
        t = target;
    };

    for (double t_out : output_times) {
        if (t_out < t - 1e-12 || t_out > t_end + 1e-12)
            throw RangeError("integrate_moments: output times must be sorted within [0, t_end]");
        advance_to(t_out);
        traj.snapshots.push_back(log_mode ? detail::snapshot_slog(t, e_log)
                                          : detail::snapshot_double(t, e));
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Equilibria and the sign structure of chi_k
// ---------------------------------------------------------------------------

// Ebar_k = E_0 * prod_{j<=k} j / chi_j, defined while every chi_j > 0.
inline MomentVector equilibrium_moments(const ValidatedParams& params, double e0,
                                        int k_stop) {
    if (k_stop < 0) throw RangeError("equilibrium_moments: K_stop must be >= 0");
    MomentVector mv;
    mv.t = std::numeric_limits<double>::infinity();
    mv.values.resize(static_cast<size_t>(k_stop) + 1);
    mv.log_flags.assign(static_cast<size_t>(k_stop) + 1, 0);
    mv.values[0] = e0;
    double lg10 = std::log10(e0);
    for (int k = 1; k <= k_stop; ++k) {
        const double chi = chi_k(params, k);
        if (!(chi > 0.0))
            throw SignError("equilibrium_moments: chi_" + std::to_string(k) +
                            " <= 0, equilibrium product undefined");
        lg10 += std::log10(static_cast<double>(k)) - std::log10(chi);
        if (lg10 > 300.0) {
            mv.values[static_cast<size_t>(k)] = lg10;
            mv.log_flags[static_cast<size_t>(k)] = 1;
        } else {
            mv.values[static_cast<size_t>(k)] =
                mv.values[static_cast<size_t>(k - 1)] * k / chi;
        }
    }
    return mv;
}

struct K0Result {
    enum class Kind { Index, AllPositive, NonePositive } kind = Kind::AllPositive;
    int k0 = 0;  // largest k with chi_k > 0 when kind == Index; 0 for NonePositive
};

// Locates the sign change of k -> chi_k over 1..K. The shape lemma for chi(x)
// allows at most one change; anything else is a numerical problem.
inline K0Result find_k0(const ValidatedParams& params, int K) {
    if (K < 1) throw RangeError("find_k0: K must be >= 1");
    int first_negative = 0;  // 0 = none seen
    for (int k = 1; k <= K; ++k) {
        const double chi = chi_k(params, k);
        if (std::fabs(chi) <= 1e-14)
            throw PatternError("find_k0: chi_" + std::to_string(k) +
                               " is numerically zero; perturb the parameters");
        if (chi < 0.0) {
            if (first_negative == 0) first_negative = k;
        } else if (first_negative != 0) {
            throw PatternError("find_k0: chi_k changes sign more than once (k = " +
                               std::to_string(k) + ")");
        }
    }
    if (first_negative == 0) return {K0Result::Kind::AllPositive, K};
    if (first_negative == 1) return {K0Result::Kind::NonePositive, 0};
    return {K0Result::Kind::Index, first_negative - 1};
}

// Closed-form mean for the symmetric model (tau_+ = tau_- = tau/2, equal
// deltas): M' = 1 + c M with c = tau delta^2 / (1 - delta^2).
inline double mean_trajectory_symmetric(double tau, double delta, double m0, double t) {
    if (!(tau > 0.0)) throw RangeError("mean_trajectory_symmetric: tau must be > 0");
    if (!(delta >= 0.0 && delta < 1.0))
        throw RangeError("mean_trajectory_symmetric: delta must lie in [0, 1)");
    const double c = tau * delta * delta / (1.0 - delta * delta);
    if (c == 0.0) return m0 + t;
    return m0 * std::exp(c * t) + std::expm1(c * t) / c;
}

// Residuals r_k of the equilibrium recursion; nonzero residuals at k > k0
// are the numerical witness that no positive moment sequence can satisfy it.
inline std::vector<double> recursion_residual(const MomentVector& e,
                                              const ValidatedParams& params) {
    for (int k = 0; k <= e.order(); ++k)
        if (e.flagged(k) || !std::isfinite(e.values[static_cast<size_t>(k)]))
            throw RangeError("recursion_residual: E_k must be finite");
    const bool demog = params.has_demography();
    const double mu = demog ? params.demography().mu : 0.0;
    const double beta = demog ? params.demography().beta : 0.0;
    std::vector<double> r(e.values.size());
    r[0] = demog ? beta - mu * e.values[0] : 0.0;
    for (int k = 1; k <= e.order(); ++k) {
        double rk = k * e.values[static_cast<size_t>(k - 1)] -
                    (chi_k(params, k) + mu) * e.values[static_cast<size_t>(k)];
        if (demog) rk += beta * gamma_moment(params.demography(), k);
        r[static_cast<size_t>(k)] = rk;
    }
    return r;
}

}  // namespace bioage

#endif
