#ifndef BIOAGE_RUNNER_HPP
#define BIOAGE_RUNNER_HPP

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "bioage/compare.hpp"
#include "bioage/config.hpp"
#include "bioage/ibm.hpp"
#include "bioage/io.hpp"
#include "bioage/moments.hpp"
#include "bioage/pde.hpp"

namespace bioage {

namespace detail {

inline int worker_count(int jobs) {
    unsigned n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
    if (const char* env = std::getenv("BIOLAGE_THREADS")) {
        const unsigned cap = static_cast<unsigned>(std::strtoul(env, nullptr, 10));
        if (cap >= 1) n = std::min(n, cap);
    }
    return static_cast<int>(std::min<unsigned>(n, static_cast<unsigned>(jobs)));
}

// Runs fn(job) for job = 0..jobs-1 across workers. Results must be written
// into per-job slots by the caller; replicate streams make the outcome
// independent of the thread count.
template <class Fn>
void parallel_for_jobs(int jobs, Fn&& fn) {
    const int workers = worker_count(jobs);
    if (workers <= 1) {
        for (int j = 0; j < jobs; ++j) fn(j);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        while (true) {
            const int j = next.fetch_add(1);
            if (j >= jobs) return;
            try {
                fn(j);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

struct ReplicateResult {
    std::vector<Histogram> histograms;   // one per output time
    std::vector<MomentVector> moments;   // one per output time
    EventCounts events;
};

inline ReplicateResult run_ibm_replicate(const RunSpec& spec, const ValidatedParams& params,
                                         std::uint64_t replicate, int k_order) {
    const double b_max = spec.resolved_b_max();
    Population pop =
        init_population(spec.numerics.n_individuals, spec.initial, spec.numerics.seed, replicate);
    ReplicateResult result;
    for (double t_out : spec.numerics.output_times) {
        advance(pop, t_out, params);
        result.histograms.push_back(histogram(pop, spec.numerics.bin_width, b_max));
        result.moments.push_back(sample_moments(pop, k_order));
    }
    result.events = pop.event_counts();
    return result;
}

inline std::string index_name(const char* stem, int i, const char* suffix) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s%03d%s", stem, i, suffix);
    return buf;
}

inline nlohmann::json report_to_json(const ComparisonReport& report) {
    nlohmann::json j;
    j["scenario"] = report.scenario;
    j["all_pass"] = report.all_pass();
    j["provenance"] = report.provenance;
    j["entries"] = nlohmann::json::array();
    for (const auto& e : report.entries) {
        j["entries"].push_back({{"name", e.name},
                                {"value", e.value},
                                {"tolerance", e.tolerance},
                                {"pass", e.pass}});
    }
    return j;
}

inline MomentVector initial_moments(const RunSpec& spec, int k_order) {
    if (const auto* dirac = std::get_if<DiracCohort>(&spec.initial)) {
        std::vector<double> vals(static_cast<size_t>(k_order) + 1);
        vals[0] = static_cast<double>(spec.numerics.n_individuals);
        for (int k = 1; k <= k_order; ++k)
            vals[static_cast<size_t>(k)] = vals[static_cast<size_t>(k - 1)] * dirac->b0;
        return MomentVector(0.0, std::move(vals));
    }
    return moments_of_density(std::get<InitialDensity>(spec.initial), k_order);
}

// --------------------------------------------------------------------------
// Scenarios
// --------------------------------------------------------------------------

inline void run_ibm_scenario(const RunSpec& spec, const ValidatedParams& params,
                             OutputSession& session) {
    const int reps = spec.numerics.replicates;
    std::vector<ReplicateResult> results(static_cast<size_t>(reps));
    parallel_for_jobs(reps, [&](int r) {
        results[static_cast<size_t>(r)] =
            run_ibm_replicate(spec, params, static_cast<std::uint64_t>(r),
                              spec.numerics.moment_order);
    });
    nlohmann::json events = nlohmann::json::array();
    for (int r = 0; r < reps; ++r) {
        const auto& res = results[static_cast<size_t>(r)];
        for (size_t j = 0; j < res.histograms.size(); ++j) {
            session.write_file(index_name("hist_r", r, "") + index_name("_t", static_cast<int>(j), ".csv"),
                               emit_histogram_csv(res.histograms[j]));
        }
        session.write_file(index_name("moments_r", r, ".csv"), emit_moments_csv(res.moments));
        events.push_back({{"replicate", r},
                          {"rejuvenation", res.events.rejuvenation},
                          {"aging", res.events.aging},
                          {"births", res.events.births},
                          {"deaths", res.events.deaths}});
    }
    session.write_json("events.json", events);
}

inline void run_pde_scenario(const RunSpec& spec, const ValidatedParams& params,
                             OutputSession& session) {
    const Grid grid = Grid::make(spec.resolved_b_max(), spec.numerics.n_cells);
    DensityState initial = discretize_initial(
        grid, spec.initial, static_cast<double>(spec.numerics.n_individuals));
    PdeSimulation sim(params, grid, std::move(initial));
    const double dt = spec.numerics.dt > 0.0 ? spec.numerics.dt : sim.default_dt();
    std::vector<DensityState> snapshots;
    std::vector<MomentVector> moments;
    for (double t_out : spec.numerics.output_times) {
        sim.advance_to(t_out, dt);
        snapshots.push_back(sim.state());
        moments.push_back(density_moments(sim.state(), grid, spec.numerics.moment_order));
    }
    session.write_file("density.csv", emit_density_csv(grid, snapshots));
    session.write_file("moments.csv", emit_moments_csv(moments));

    const DensityState& last = sim.state();
    const double denom = std::max(last.initial_mass + last.births_mass, 1e-300);
    nlohmann::json ledger;
    ledger["initial_mass"] = last.initial_mass;
    ledger["final_total_mass"] = last.total_mass();
    ledger["outflow_mass"] = last.outflow_mass;
    ledger["births_mass"] = last.births_mass;
    ledger["deaths_mass"] = last.deaths_mass;
    ledger["residual"] = last.ledger_residual();
    ledger["residual_relative"] = last.ledger_residual() / denom;
    ledger["outflow_fraction"] = last.outflow_mass / denom;
    ledger["dt"] = dt;
    session.write_json("mass_ledger.json", ledger);
}

inline void run_moments_scenario(const RunSpec& spec, const ValidatedParams& params,
                                 OutputSession& session) {
    const int k_order = spec.numerics.moment_order;
    const MomentVector e_init = initial_moments(spec, k_order);
    const MomentTrajectory traj =
        integrate_moments(params, e_init, spec.numerics.t_end, spec.resolved_ode_dt(),
                          spec.numerics.output_times);
    session.write_file("moments.csv", emit_moments_csv(traj.snapshots));

    nlohmann::json meta;
    meta["K"] = traj.order;
    meta["dt"] = traj.dt;
    meta["stiffness_warning"] = traj.stiffness_warning;
    meta["switched_to_log"] = traj.switched_to_log;
    if (traj.switched_to_log) meta["log_switch_time"] = traj.log_switch_time;
    try {
        const K0Result k0 = find_k0(params, std::max(1, k_order));
        switch (k0.kind) {
            case K0Result::Kind::Index: meta["k0"] = k0.k0; break;
            case K0Result::Kind::AllPositive: meta["k0"] = "all_positive"; break;
            case K0Result::Kind::NonePositive: meta["k0"] = "none_positive"; break;
        }
    } catch (const PatternError&) {
        meta["k0"] = "pattern_error";
    } catch (const UnsupportedFamilyError&) {
        meta["k0"] = nullptr;
    }
    if (traj.stiffness_warning && !spec.quiet)
        std::cerr << "warning: |chi_K| dt > 0.5; consider a smaller numerics.dt\n";
    session.write_json("metadata.json", meta);
}

inline void run_analyze_chi_scenario(const RunSpec& spec, const ValidatedParams& params,
                                     OutputSession& session) {
    const int k_order = std::max(1, spec.numerics.moment_order);
    std::string csv = "k,chi_k\n";
    for (int k = 0; k <= k_order; ++k)
        csv += std::to_string(k) + "," + format_double(chi_k(params, k)) + "\n";
    session.write_file("chi.csv", csv);

    nlohmann::json analysis;
    if (params.tau_plus() > 0.0 && params.tau_minus() > 0.0) {
        const ChiShape shape = chi_x_max(params);
        analysis["criterion"] = shape.criterion;
        if (shape.case_tag == ChiCase::IncreasingThenDecreasing) {
            analysis["case"] = "(i)";
            analysis["x_max"] = shape.x_max;
        } else {
            analysis["case"] = "(ii)";
            analysis["x_max"] = nullptr;
        }
    } else if (params.tau_minus() <= 0.0) {
        analysis["case"] = "rejuvenation-only";
        analysis["x_max"] = nullptr;
    } else {
        analysis["case"] = "aging-only";
        analysis["x_max"] = nullptr;
    }
    try {
        const K0Result k0 = find_k0(params, k_order);
        switch (k0.kind) {
            case K0Result::Kind::Index: analysis["k0"] = k0.k0; break;
            case K0Result::Kind::AllPositive: analysis["k0"] = "all_positive"; break;
            case K0Result::Kind::NonePositive: analysis["k0"] = "none_positive"; break;
        }
    } catch (const PatternError&) {
        analysis["k0"] = "pattern_error";
    }
    session.write_json("analysis.json", analysis);
}

inline ComparisonReport run_compare_scenario(const RunSpec& spec, const ValidatedParams& params,
                                             OutputSession& session) {
    const int reps = spec.numerics.replicates;
    if (reps < 2) throw ParseError("compare requires numerics.replicates >= 2");
    const int k_cmp = std::min(4, spec.numerics.moment_order);
    const auto& times = spec.numerics.output_times;

    std::vector<ReplicateResult> results(static_cast<size_t>(reps));
    parallel_for_jobs(reps, [&](int r) {
        results[static_cast<size_t>(r)] =
            run_ibm_replicate(spec, params, static_cast<std::uint64_t>(r), k_cmp);
    });

    const Grid grid = Grid::make(spec.resolved_b_max(), spec.numerics.n_cells);
    PdeSimulation sim(params, grid,
                      discretize_initial(grid, spec.initial,
                                         static_cast<double>(spec.numerics.n_individuals)));
    const double dt_pde = spec.numerics.dt > 0.0 ? spec.numerics.dt : sim.default_dt();
    std::vector<DensityState> pde_states;
    std::vector<MomentVector> pde_moments;
    for (double t_out : times) {
        sim.advance_to(t_out, dt_pde);
        pde_states.push_back(sim.state());
        pde_moments.push_back(density_moments(sim.state(), grid, k_cmp));
    }

    const double dt_ode = spec.resolved_ode_dt();
    const MomentTrajectory ode =
        integrate_moments(params, initial_moments(spec, k_cmp), spec.numerics.t_end, dt_ode, times);

    ComparisonReport report;
    report.scenario = "compare";
    report.provenance["seed"] = std::to_string(spec.numerics.seed);
    report.provenance["n_individuals"] = std::to_string(spec.numerics.n_individuals);
    report.provenance["replicates"] = std::to_string(reps);
    report.provenance["n_cells"] = std::to_string(grid.n_cells);
    report.provenance["dt_pde"] = format_double(dt_pde);
    report.provenance["dt_ode"] = format_double(dt_ode);
    report.provenance["b_max"] = format_double(grid.b_max);

    for (size_t j = 0; j < times.size(); ++j) {
        const std::string at = "t=" + format_double(times[j]);
        report.add(at + ":L1(ibm,pde)",
                   l1_distance(results[0].histograms[j], pde_states[j], grid), 0.05);

        for (int k = 1; k <= k_cmp; ++k) {
            // Normalized moments: IBM replicate mean with its standard error.
            double mean = 0.0;
            for (const auto& res : results)
                mean += res.moments[j].value(k) / res.moments[j].value(0);
            mean /= reps;
            double var = 0.0;
            for (const auto& res : results) {
                const double d = res.moments[j].value(k) / res.moments[j].value(0) - mean;
                var += d * d;
            }
            const double se = std::sqrt(var / (reps - 1.0) / reps);

            const double m_ode = ode.snapshots[j].value(k) / ode.snapshots[j].value(0);
            const double m_pde = pde_moments[j].value(k) / pde_moments[j].value(0);
            const double se_rel = se / std::fabs(m_ode);
            report.add(at + ":E" + std::to_string(k) + "(ibm,ode)", (mean - m_ode) / m_ode,
                       3.0 * se_rel + 0.01);
            report.add(at + ":E" + std::to_string(k) + "(ibm,pde)", (mean - m_pde) / m_pde,
                       3.0 * se_rel + 0.01);
            report.add(at + ":E" + std::to_string(k) + "(pde,ode)", (m_pde - m_ode) / m_ode,
                       0.01);
        }
    }
    session.write_json("report.json", report_to_json(report));
    return report;
}

}  // namespace detail

// Dispatches a validated RunSpec, writes all outputs plus the manifest, and
// removes partial outputs on failure. Throws on any error.
inline void execute(const RunSpec& spec) {
    const ValidatedParams params = spec.validated();
    OutputSession session(spec.out_dir);
    try {
        switch (spec.scenario) {
            case Scenario::Ibm:
                detail::run_ibm_scenario(spec, params, session);
                break;
            case Scenario::Pde:
                detail::run_pde_scenario(spec, params, session);
                break;
            case Scenario::Moments:
                detail::run_moments_scenario(spec, params, session);
                break;
            case Scenario::AnalyzeChi:
                detail::run_analyze_chi_scenario(spec, params, session);
                break;
            case Scenario::Compare: {
                const ComparisonReport report = detail::run_compare_scenario(spec, params, session);
                if (!spec.quiet) {
                    for (const auto& e : report.entries)
                        std::cout << (e.pass ? "PASS " : "FAIL ") << e.name
                                  << "  value=" << format_double(e.value)
                                  << "  tol=" << format_double(e.tolerance) << "\n";
                    std::cout << (report.all_pass() ? "compare: all entries pass\n"
                                                    : "compare: some entries FAILED\n");
                }
                break;
            }
        }
        session.finalize(spec.echo());
    } catch (...) {
        session.discard();
        throw;
    }
}

}  // namespace bioage

#endif
