#pragma once

// Drives the streaming learner from a dataset: one observation at a time in
// stream order, with optional replay passes and a final polish to convergence.

#include <chrono>
#include <cstdint>
#include <optional>
#include <vector>

#include "stkg/data_io.hpp"
#include "stkg/streaming_solver.hpp"

namespace stkg {

struct FitOptions {
    SolverConfig solver;
    /// Passes over the stream. The first absorbs every observation; later
    /// passes replay the same order running the per-sample sweeps again on
    /// the complete Gram state (no observation is absorbed twice).
    int passes = 1;
    std::optional<std::uint64_t> shuffle_seed;  ///< Randomized arrival order.
    bool converge = false;                      ///< run_to_convergence after streaming.
    bool record_timing = false;                 ///< Per-update wall time of the first pass.
};

struct FitResult {
    SolverState state;
    std::vector<double> update_seconds;
    double total_seconds = 0.0;
    std::optional<ConvergenceReport> convergence;
};

inline FitResult fit_dataset(const Dataset& train, const DomainMap& domain, const FitOptions& opts) {
    opts.solver.validate();
    if (opts.passes < 1) throw ConfigError("passes must be >= 1");
    if (train.empty()) throw ConfigError("training dataset is empty");
    using clock = std::chrono::steady_clock;

    FitResult result{init(domain.basis()), {}, 0.0, std::nullopt};
    if (opts.record_timing) result.update_seconds.reserve(train.size());
    const auto start = clock::now();

    auto stream = opts.shuffle_seed ? ObservationStream(train, *opts.shuffle_seed) : ObservationStream(train);
    while (const Observation* obs = stream.next()) {
        const auto t0 = clock::now();
        const Vector a = alpha(domain.to_basis(*obs), domain.basis());
        update(result.state, a, obs->y, opts.solver);
        if (opts.record_timing) {
            result.update_seconds.push_back(std::chrono::duration<double>(clock::now() - t0).count());
        }
    }
    for (int pass = 1; pass < opts.passes; ++pass) {
        for (std::size_t i = 0; i < train.size(); ++i) {
            coordinate_sweeps(result.state, opts.solver.sweeps_per_sample, opts.solver);
        }
    }
    if (opts.converge) result.convergence = run_to_convergence(result.state, opts.solver);
    result.total_seconds = std::chrono::duration<double>(clock::now() - start).count();
    return result;
}

}  // namespace stkg
