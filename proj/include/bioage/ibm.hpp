#ifndef BIOAGE_IBM_HPP
#define BIOAGE_IBM_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "bioage/densities.hpp"
#include "bioage/errors.hpp"
#include "bioage/model.hpp"
#include "bioage/moments.hpp"
#include "bioage/rng.hpp"

namespace bioage {

struct EventCounts {
    std::uint64_t rejuvenation = 0;
    std::uint64_t aging = 0;
    std::uint64_t births = 0;
    std::uint64_t deaths = 0;
};

struct Histogram {
    double bin_width = 1.0;
    double b_max = 0.0;
    std::vector<std::uint64_t> counts;  // bin i covers [i w, (i+1) w)
    std::uint64_t overflow = 0;
    std::uint64_t total = 0;

    size_t n_bins() const { return counts.size(); }
    double density(size_t i) const {
        return total == 0 ? 0.0
                          : static_cast<double>(counts[i]) /
                                (static_cast<double>(total) * bin_width);
    }
};

// Inverse-CDF sampler for an initial density: 2^16 quantile knots built from
// a trapezoid CDF, linear interpolation in between. The table bias is far
// below Monte-Carlo error at any feasible population size.
class DensitySamplerTable {
public:
    explicit DensitySamplerTable(const InitialDensity& u0) {
        constexpr int M = 1 << 16;
        const double hi = u0.support_hi;
        if (!(hi > 0.0)) throw RangeError("density sampler requires a positive support bound");
        const double dx = hi / M;
        std::vector<double> cdf(M + 1, 0.0);
        double prev = std::max(0.0, u0(0.0));
        for (int j = 1; j <= M; ++j) {
            const double cur = std::max(0.0, u0(j * dx));
            cdf[static_cast<size_t>(j)] =
                cdf[static_cast<size_t>(j - 1)] + 0.5 * (prev + cur) * dx;
            prev = cur;
        }
        const double mass = cdf[M];
        if (!(mass > 0.0)) throw RangeError("density sampler: u0 integrates to zero");
        inv_cdf_.resize(M + 1);
        int j = 0;
        for (int i = 0; i <= M; ++i) {
            const double q = mass * static_cast<double>(i) / M;
            while (j < M && cdf[static_cast<size_t>(j + 1)] < q) ++j;
            const double seg = cdf[static_cast<size_t>(j + 1)] - cdf[static_cast<size_t>(j)];
            const double frac = seg > 0.0 ? (q - cdf[static_cast<size_t>(j)]) / seg : 0.0;
            inv_cdf_[static_cast<size_t>(i)] = (j + frac) * dx;
        }
        inv_cdf_.back() = hi;
    }

    double sample(Rng& rng) const {
        const double y = rng.uniform() * (inv_cdf_.size() - 1);
        const size_t i = static_cast<size_t>(y);
        const double frac = y - static_cast<double>(i);
        return inv_cdf_[i] * (1.0 - frac) + inv_cdf_[i + 1] * frac;
    }

private:
    std::vector<double> inv_cdf_;
};

// Finite population of biological ages. Ages are stored as offsets from the
// simulation clock (age_i = offset_i + t), so drift between events is free
// and advance costs O(events), not O(events * N).
class Population {
public:
    Population(std::vector<double> offsets, double t, Rng rng)
        : offsets_(std::move(offsets)), t_(t), rng_(std::move(rng)) {}

    double t() const { return t_; }
    size_t size() const { return offsets_.size(); }
    double age(size_t i) const { return offsets_[i] + t_; }
    const EventCounts& event_counts() const { return counts_; }

    std::vector<double> ages() const {
        std::vector<double> out(offsets_.size());
        for (size_t i = 0; i < offsets_.size(); ++i) out[i] = offsets_[i] + t_;
        return out;
    }

    double max_age() const {
        double m = 0.0;
        for (double x : offsets_) m = std::max(m, x + t_);
        return offsets_.empty() ? 0.0 : m;
    }

    friend Population init_population(std::uint64_t n, const InitialCondition& ic,
                                      std::uint64_t seed, std::uint64_t stream);
    friend void advance(Population& pop, double t_target, const ValidatedParams& params);

private:
    std::vector<double> offsets_;
    double t_ = 0.0;
    Rng rng_;
    EventCounts counts_;
};

inline Population init_population(std::uint64_t n, const InitialCondition& ic,
                                  std::uint64_t seed, std::uint64_t stream = 0) {
    if (n < 1) throw RangeError("init_population: n must be >= 1");
    Rng rng(seed, stream);
    std::vector<double> offsets(n);
    if (const auto* dirac = std::get_if<DiracCohort>(&ic)) {
        if (dirac->b0 < 0.0) throw RangeError("init_population: b0 must be >= 0");
        std::fill(offsets.begin(), offsets.end(), dirac->b0);
    } else {
        const DensitySamplerTable table(std::get<InitialDensity>(ic));
        for (auto& x : offsets) x = table.sample(rng);
    }
    return Population(std::move(offsets), 0.0, std::move(rng));
}

// Exact-event simulation: a population-level exponential clock with rate
// N (tau_+ + tau_-) for jumps plus independent birth (beta) and death (mu N)
// clocks; rates are recomputed after every event. RNG draw order per event:
// waiting time, event-type selector, then the event's own draws.
inline void advance(Population& pop, double t_target, const ValidatedParams& params) {
    if (t_target < pop.t_) throw RangeError("advance: t_target must be >= pop.t");
    const double tau_plus = params.tau_plus();
    const double tau_minus = params.tau_minus();
    const double tau_total = tau_plus + tau_minus;
    const double p_rejuv = tau_total > 0.0 ? tau_plus / tau_total : 0.0;
    const bool demog = params.has_demography();
    const double mu = demog ? params.demography().mu : 0.0;
    const double beta = demog ? params.demography().beta : 0.0;

    double t = pop.t_;
    while (true) {
        const double n = static_cast<double>(pop.offsets_.size());
        const double rate_jump = n * tau_total;
        const double rate_death = mu * n;
        const double rate_total = rate_jump + rate_death + beta;
        if (rate_total <= 0.0) break;  // pure drift: the clock just moves
        const double dt = pop.rng_.exponential(rate_total);
        if (t + dt > t_target) break;
        t += dt;
        const double which = pop.rng_.uniform() * rate_total;
        if (which < rate_jump) {
            const size_t i = static_cast<size_t>(pop.rng_.uniform_index(pop.offsets_.size()));
            const bool rejuvenate = pop.rng_.uniform() < p_rejuv;
            const JumpFamily& family = rejuvenate ? params.jump_plus() : params.jump_minus();
            const double age_pre = pop.offsets_[i] + t;
            pop.offsets_[i] = jump_target(family, age_pre) - t;
            if (rejuvenate) {
                ++pop.counts_.rejuvenation;
            } else {
                ++pop.counts_.aging;
            }
        } else if (which < rate_jump + rate_death) {
            const size_t i = static_cast<size_t>(pop.rng_.uniform_index(pop.offsets_.size()));
            pop.offsets_[i] = pop.offsets_.back();
            pop.offsets_.pop_back();
            ++pop.counts_.deaths;
        } else {
            const auto& dem = params.demography();
            const double b = pop.rng_.gamma_integer_shape(dem.alpha, dem.gamma_rate);
            pop.offsets_.push_back(b - t);
            ++pop.counts_.births;
        }
    }
    pop.t_ = t_target;
}

inline Histogram histogram(const Population& pop, double bin_width, double b_max) {
    if (!(bin_width > 0.0)) throw RangeError("histogram: bin_width must be > 0");
    if (!(b_max > 0.0)) throw RangeError("histogram: b_max must be > 0");
    Histogram h;
    h.bin_width = bin_width;
    h.b_max = b_max;
    h.counts.assign(static_cast<size_t>(std::ceil(b_max / bin_width)), 0);
    h.total = pop.size();
    for (size_t i = 0; i < pop.size(); ++i) {
        const double b = pop.age(i);
        if (b >= b_max) {
            ++h.overflow;
        } else {
            ++h.counts[static_cast<size_t>(b / bin_width)];
        }
    }
    return h;
}

// Unnormalized sample moments E_k = sum_i age_i^k, so E_0 = N. A component
// whose power sum overflows is recomputed by log-sum-exp and flagged.
inline MomentVector sample_moments(const Population& pop, int K) {
    if (K < 0) throw RangeError("sample_moments: K must be >= 0");
    MomentVector mv;
    mv.t = pop.t();
    mv.values.assign(static_cast<size_t>(K) + 1, 0.0);
    mv.log_flags.assign(static_cast<size_t>(K) + 1, 0);
    const std::vector<double> ages = pop.ages();
    mv.values[0] = static_cast<double>(ages.size());
    for (int k = 1; k <= K; ++k) {
        double sum = 0.0;
        for (double b : ages) sum += std::pow(b, k);
        if (std::isinf(sum)) {
            double lg_max = -std::numeric_limits<double>::infinity();
            for (double b : ages)
                if (b > 0.0) lg_max = std::max(lg_max, k * std::log(b));
            double acc = 0.0;
            for (double b : ages)
                if (b > 0.0) acc += std::exp(k * std::log(b) - lg_max);
            mv.values[static_cast<size_t>(k)] = (lg_max + std::log(acc)) / std::numbers::ln10;
            mv.log_flags[static_cast<size_t>(k)] = 1;
        } else {
            mv.values[static_cast<size_t>(k)] = sum;
        }
    }
    return mv;
}

}  // namespace bioage

#endif
