#pragma once

// Monte-Carlo evaluation: repeated generate -> mask -> stream-fit -> predict
// runs, aggregated into per-grid-point MSE, an error histogram, a per-location
// time series and update timings. Also the runtime scaling probe.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include "stkg/data_io.hpp"
#include "stkg/fit.hpp"
#include "stkg/presets.hpp"
#include "stkg/synthetic.hpp"

namespace stkg {

struct Histogram {
    std::vector<double> edges;  ///< counts.size() + 1 ascending edges.
    std::vector<std::size_t> counts;
    double mean = 0.0;
    double stddev = 0.0;

    [[nodiscard]] std::size_t total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }
};

namespace detail {

// Linear-interpolated quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

/// Histogram of pred - truth. bins == 0 selects Freedman-Diaconis.
inline Histogram error_histogram(std::span<const double> pred, std::span<const double> truth, std::size_t bins = 0) {
    if (pred.size() != truth.size()) throw ConfigError("error_histogram: length mismatch");
    if (pred.empty()) throw ConfigError("error_histogram: empty input");
    std::vector<double> err(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) err[i] = pred[i] - truth[i];

    Histogram h;
    const double n = static_cast<double>(err.size());
    h.mean = std::accumulate(err.begin(), err.end(), 0.0) / n;
    double ss = 0.0;
    for (double e : err) ss += (e - h.mean) * (e - h.mean);
    h.stddev = err.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;

    std::vector<double> sorted = err;
    std::sort(sorted.begin(), sorted.end());
    double lo = sorted.front();
    double hi = sorted.back();
    if (hi - lo <= 0.0) {
        // Degenerate: one bin centred on the common value.
        h.edges = {lo - 0.5, lo + 0.5};
        h.counts = {err.size()};
        return h;
    }
    if (bins == 0) {
        const double iqr = detail::quantile_sorted(sorted, 0.75) - detail::quantile_sorted(sorted, 0.25);
        const double width = 2.0 * iqr / std::cbrt(n);
        bins = width > 0.0 ? static_cast<std::size_t>(std::ceil((hi - lo) / width))
                           : static_cast<std::size_t>(std::ceil(std::log2(n))) + 1;  // Sturges
        bins = std::clamp<std::size_t>(bins, 1, 1000);
    }
    const double width = (hi - lo) / static_cast<double>(bins);
    h.edges.resize(bins + 1);
    for (std::size_t k = 0; k <= bins; ++k) h.edges[k] = lo + width * static_cast<double>(k);
    h.edges.back() = hi;
    h.counts.assign(bins, 0);
    for (double e : err) {
        auto k = static_cast<std::size_t>((e - lo) / width);
        h.counts[std::min(k, bins - 1)] += 1;
    }
    return h;
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    double r2 = 0.0;
    std::size_t n = 0;

    /// Two-sided confidence interval for the slope.
    [[nodiscard]] std::pair<double, double> slope_ci(double level = 0.95) const {
        if (n < 3) return {-INFINITY, INFINITY};
        const boost::math::students_t dist(static_cast<double>(n - 2));
        const double q = boost::math::quantile(boost::math::complement(dist, (1.0 - level) / 2.0));
        return {slope - q * slope_stderr, slope + q * slope_stderr};
    }
};

/// Ordinary least squares y = intercept + slope * x.
inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw ConfigError("linear_fit needs >= 2 paired points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw ConfigError("linear_fit: x values are all equal");
    LinearFit fit;
    fit.n = x.size();
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - fit.intercept - fit.slope * x[i];
        sse += r * r;
    }
    fit.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
    fit.slope_stderr = x.size() > 2 ? std::sqrt(sse / (n - 2.0) / sxx) : 0.0;
    return fit;
}

/// Predictions for every row of the generated field (test hook signature).
using PredictorHook = std::function<std::vector<double>(const SyntheticField&, const MaskSplit&)>;

struct EvalConfig {
    int replicates = 25;
    std::uint64_t base_seed = 1;
    /// Streaming fit followed by sweeps to convergence on the final state.
    /// The sweep cap is raised because a weight inflated while n < p can
    /// take tens of thousands of sweeps to shrink back.
    FitOptions fit = [] {
        FitOptions f;
        f.converge = true;
        f.solver.max_sweeps = 50000;
        return f;
    }();
    /// Spatial location of the reported time series; default is the centre
    /// of the first block (or of the domain).
    std::optional<std::vector<double>> series_location;
    std::size_t histogram_bins = 0;
    unsigned threads = 0;  ///< 0: hardware concurrency.
    bool keep_predictions = false;
    PredictorHook predictor;  ///< Empty: streaming fit on the training split.
};

struct SeriesRow {
    std::vector<double> location;
    double t = 0.0;
    double y_true = 0.0;
    double y_obs = 0.0;
    double y_pred = 0.0;
    bool is_test = false;
};

struct EvalReport {
    std::vector<Observation> grid;     ///< Grid points (y holds the replicate-0 sample).
    std::vector<double> mse_grid;      ///< Against the noise-free field.
    std::vector<double> mse_grid_noisy;  ///< Against the noisy sample.
    std::vector<int> block_label;      ///< 0 outside blocks, k for block k.
    std::vector<double> test_rate;     ///< Fraction of replicates where the point was withheld.
    double mse_random_missing = 0.0;
    double mse_random_missing_noisy = 0.0;
    std::vector<double> mse_blocks;    ///< Per block, against the noise-free field.
    double mse_train = 0.0;
    Histogram histogram;               ///< Test-point errors against the noise-free field.
    std::vector<SeriesRow> series;
    std::vector<double> update_seconds;  ///< Replicate 0.
    double fit_seconds = 0.0;          ///< Replicate 0.
    std::size_t p = 0;
    std::size_t n_train = 0;
    nlohmann::json config;
    std::vector<std::vector<double>> predictions;     ///< Per replicate, when kept.
    std::vector<std::vector<double>> truths;          ///< Per replicate, when kept.
};

namespace detail {

struct ReplicateResult {
    std::vector<double> pred;
    std::vector<double> truth;
    std::vector<double> observed;
    std::vector<int> label;
    std::vector<double> update_seconds;
    double fit_seconds = 0.0;
    std::size_t n_train = 0;
};

inline nlohmann::json fit_options_json(const FitOptions& f) {
    nlohmann::json j;
    j["sweeps_per_sample"] = f.solver.sweeps_per_sample;
    j["convergence_tol"] = f.solver.convergence_tol;
    j["clamp_negative_radicand"] = f.solver.clamp_negative_radicand;
    j["max_sweeps"] = f.solver.max_sweeps;
    j["passes"] = f.passes;
    j["converge"] = f.converge;
    j["shuffle_seed"] = f.shuffle_seed ? nlohmann::json(*f.shuffle_seed) : nlohmann::json(nullptr);
    return j;
}

}  // namespace detail

inline nlohmann::json preset_json(const ExperimentPreset& preset) {
    nlohmann::json j;
    j["name"] = preset.name;
    j["basis"] = {{"ns", preset.basis.ns},
                  {"nt", preset.basis.nt},
                  {"supports", preset.basis.supports},
                  {"normalized_space", preset.basis.normalized_space}};
    if (preset.process) {
        if (const auto* w = std::get_if<PlanarWaveSpec>(&*preset.process)) {
            j["process"] = {{"kind", "wave"}, {"v_s", w->v_s}, {"lambda_s", w->lambda_s},
                            {"sigma", w->sigma}, {"decay_scale", w->decay_scale}};
        } else {
            const auto& s = std::get<SeasonalFieldSpec>(*preset.process);
            nlohmann::json regions = nlohmann::json::array();
            for (const auto& r : s.regions) {
                regions.push_back({{"s_lo", r.span.lo}, {"s_hi", r.span.hi},
                                   {"period", std::isinf(r.period) ? nlohmann::json("inf") : nlohmann::json(r.period)}});
            }
            j["process"] = {{"kind", "seasonal"}, {"sigma", s.sigma}, {"regions", regions}};
        }
    }
    if (preset.grid) {
        j["grid"] = {{"s_count", preset.grid->s_values.size()}, {"t_count", preset.grid->t_values.size()},
                     {"s_range", {preset.grid->s_range.lo, preset.grid->s_range.hi}},
                     {"t_range", {preset.grid->t_range.lo, preset.grid->t_range.hi}}};
    }
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : preset.mask.blocks) {
        nlohmann::json s = nlohmann::json::array();
        for (const auto& r : b.s) s.push_back({r.lo, r.hi});
        blocks.push_back({{"s", s}, {"t", {b.t.lo, b.t.hi}}});
    }
    j["mask"] = {{"blocks", blocks},
                 {"random_missing_fraction", preset.mask.random_missing_fraction},
                 {"train_count", preset.mask.train_count ? nlohmann::json(*preset.mask.train_count) : nlohmann::json(nullptr)}};
    return j;
}

/// Streaming fit on the training split, predictions at every grid row.
inline std::vector<double> fit_and_predict(const SyntheticField& field, const MaskSplit& split,
                                           const BasisConfig& basis, const FitOptions& fit,
                                           FitResult* result_out = nullptr) {
    const DomainMap domain(field.data.header, basis);
    FitResult result = fit_dataset(split.train, domain, fit);
    std::vector<double> pred(field.data.size());
    for (std::size_t i = 0; i < field.data.size(); ++i) {
        pred[i] = predict(result.state, alpha(domain.to_basis(field.data.rows[i]), basis));
    }
    if (result_out) *result_out = std::move(result);
    return pred;
}

/// Replicate r uses seed base_seed + r for both the noise and the random
/// part of the mask.
inline EvalReport run_mc(const ExperimentPreset& preset, const EvalConfig& cfg) {
    if (cfg.replicates < 1) throw ConfigError("replicates must be >= 1");
    if (!preset.process || !preset.grid) throw ConfigError("preset '" + preset.name + "' has no synthetic generator");
    cfg.fit.solver.validate();

    const auto probe = generate(preset, cfg.base_seed);
    const BasisConfig basis = basis_for(preset.basis, probe.data.header);
    const auto reps = static_cast<std::size_t>(cfg.replicates);
    std::vector<detail::ReplicateResult> results(reps);

    const auto run_one = [&](std::size_t r) {
        const std::uint64_t seed = cfg.base_seed + r;
        auto& out = results[r];
        SyntheticField field = generate(preset, seed);
        MaskSpec mask = preset.mask;
        mask.rng_seed = seed;
        const MaskSplit split = apply_mask(field.data, mask);
        if (cfg.predictor) {
            out.pred = cfg.predictor(field, split);
            if (out.pred.size() != field.data.size()) throw ConfigError("predictor hook returned wrong length");
        } else {
            FitOptions fit = cfg.fit;
            fit.record_timing = (r == 0);
            FitResult fr;
            out.pred = fit_and_predict(field, split, basis, fit, &fr);
            out.update_seconds = std::move(fr.update_seconds);
            out.fit_seconds = fr.total_seconds;
        }
        out.truth = std::move(field.truth);
        out.observed.resize(field.data.size());
        for (std::size_t i = 0; i < field.data.size(); ++i) out.observed[i] = field.data.rows[i].y;
        out.label = split.label;
        out.n_train = split.train.size();
    };

    unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(reps));
    std::vector<std::exception_ptr> errors(reps);
    {
        std::mutex mu;
        std::size_t next = 0;
        const auto worker = [&] {
            while (true) {
                std::size_t r;
                {
                    std::lock_guard lock(mu);
                    if (next >= reps) return;
                    r = next++;
                }
                try {
                    run_one(r);
                } catch (...) {
                    errors[r] = std::current_exception();
                }
            }
        };
        std::vector<std::jthread> pool;
        for (unsigned k = 1; k < threads; ++k) pool.emplace_back(worker);
        worker();
    }
    for (std::size_t r = 0; r < reps; ++r) {
        if (!errors[r]) continue;
        try {
            std::rethrow_exception(errors[r]);
        } catch (const std::exception& e) {
            throw Error("replicate " + std::to_string(r) + " (seed " + std::to_string(cfg.base_seed + r) +
                        ") failed: " + e.what());
        }
    }

    // Deterministic reduction in replicate order.
    EvalReport report;
    const std::size_t npts = probe.data.size();
    report.grid = probe.data.rows;
    report.p = basis.p();
    report.n_train = results[0].n_train;
    report.mse_grid.assign(npts, 0.0);
    report.mse_grid_noisy.assign(npts, 0.0);
    report.test_rate.assign(npts, 0.0);
    report.block_label.assign(npts, 0);
    const std::size_t nblocks = preset.mask.blocks.size();
    std::vector<double> block_sum(nblocks, 0.0);
    std::vector<double> block_count(nblocks, 0.0);
    double rm_sum = 0.0, rm_noisy_sum = 0.0, rm_count = 0.0, train_sum = 0.0, train_count = 0.0;
    std::vector<double> test_pred, test_truth;

    for (const auto& res : results) {
        for (std::size_t i = 0; i < npts; ++i) {
            const double e = res.pred[i] - res.truth[i];
            const double en = res.pred[i] - res.observed[i];
            report.mse_grid[i] += e * e;
            report.mse_grid_noisy[i] += en * en;
            const int label = res.label[i];
            if (label > 0) {
                report.block_label[i] = label;
                block_sum[static_cast<std::size_t>(label - 1)] += e * e;
                block_count[static_cast<std::size_t>(label - 1)] += 1.0;
            } else if (label == kRandomMissingLabel) {
                rm_sum += e * e;
                rm_noisy_sum += en * en;
                rm_count += 1.0;
            } else {
                train_sum += e * e;
                train_count += 1.0;
            }
            if (label != kTrainLabel) {
                report.test_rate[i] += 1.0;
                test_pred.push_back(res.pred[i]);
                test_truth.push_back(res.truth[i]);
            }
        }
    }
    const double inv = 1.0 / static_cast<double>(reps);
    for (std::size_t i = 0; i < npts; ++i) {
        report.mse_grid[i] *= inv;
        report.mse_grid_noisy[i] *= inv;
        report.test_rate[i] *= inv;
    }
    report.mse_random_missing = rm_count > 0 ? rm_sum / rm_count : 0.0;
    report.mse_random_missing_noisy = rm_count > 0 ? rm_noisy_sum / rm_count : 0.0;
    report.mse_train = train_count > 0 ? train_sum / train_count : 0.0;
    report.mse_blocks.resize(nblocks);
    for (std::size_t b = 0; b < nblocks; ++b) report.mse_blocks[b] = block_count[b] > 0 ? block_sum[b] / block_count[b] : 0.0;
    if (!test_pred.empty()) report.histogram = error_histogram(test_pred, test_truth, cfg.histogram_bins);

    // Time series at one location from replicate 0.
    std::vector<double> location;
    if (cfg.series_location) {
        location = *cfg.series_location;
    } else if (!preset.mask.blocks.empty()) {
        for (const auto& r : preset.mask.blocks.front().s) location.push_back(0.5 * (r.lo + r.hi));
    } else {
        location.push_back(0.5 * (preset.grid->s_range.lo + preset.grid->s_range.hi));
    }
    // Snap to the nearest grid location.
    double best = INFINITY;
    double snapped = preset.grid->s_values.front();
    for (double s : preset.grid->s_values) {
        if (std::abs(s - location[0]) < best) {
            best = std::abs(s - location[0]);
            snapped = s;
        }
    }
    const auto& r0 = results[0];
    for (std::size_t i = 0; i < npts; ++i) {
        if (report.grid[i].s[0] != snapped) continue;
        report.series.push_back({{snapped}, report.grid[i].t, r0.truth[i], r0.observed[i], r0.pred[i],
                                 r0.label[i] != kTrainLabel});
    }
    report.update_seconds = r0.update_seconds;
    report.fit_seconds = r0.fit_seconds;

    if (cfg.keep_predictions) {
        for (auto& res : results) {
            report.predictions.push_back(std::move(res.pred));
            report.truths.push_back(std::move(res.truth));
        }
    }

    report.config = {{"preset", preset_json(preset)},
                     {"replicates", cfg.replicates},
                     {"base_seed", cfg.base_seed},
                     {"fit", detail::fit_options_json(cfg.fit)},
                     {"histogram_bins", cfg.histogram_bins},
                     {"series_location", location},
                     {"p", report.p},
                     {"rng", Rng::kAlgorithm}};
    return report;
}

/// Writes mse_grid.csv, histogram.csv, series.csv, timing.csv, report.json.
inline void write_report(const EvalReport& report, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const auto path = [&](const char* name) { return (fs::path(dir) / name).string(); };
    const auto num = [](double v) { return detail::format17(v); };

    atomic_write(path("mse_grid.csv"), [&](std::ostream& out) {
        out << "s,t,mse,mse_noisy,block,test_rate\n";
        for (std::size_t i = 0; i < report.grid.size(); ++i) {
            out << num(report.grid[i].s[0]) << ',' << num(report.grid[i].t) << ',' << num(report.mse_grid[i]) << ','
                << num(report.mse_grid_noisy[i]) << ',' << report.block_label[i] << ',' << num(report.test_rate[i])
                << '\n';
        }
    });
    atomic_write(path("histogram.csv"), [&](std::ostream& out) {
        out << "bin_lo,bin_hi,count\n";
        for (std::size_t k = 0; k < report.histogram.counts.size(); ++k) {
            out << num(report.histogram.edges[k]) << ',' << num(report.histogram.edges[k + 1]) << ','
                << report.histogram.counts[k] << '\n';
        }
    });
    atomic_write(path("series.csv"), [&](std::ostream& out) {
        out << "s,t,y_true,y_obs,y_pred,is_test\n";
        for (const auto& row : report.series) {
            out << num(row.location[0]) << ',' << num(row.t) << ',' << num(row.y_true) << ',' << num(row.y_obs)
                << ',' << num(row.y_pred) << ',' << (row.is_test ? 1 : 0) << '\n';
        }
    });
    atomic_write(path("timing.csv"), [&](std::ostream& out) {
        out << "sample,update_seconds,cumulative_seconds\n";
        double total = 0.0;
        for (std::size_t i = 0; i < report.update_seconds.size(); ++i) {
            total += report.update_seconds[i];
            out << i + 1 << ',' << num(report.update_seconds[i]) << ',' << num(total) << '\n';
        }
    });
    nlohmann::json summary = {{"mse_random_missing", report.mse_random_missing},
                              {"mse_random_missing_noisy", report.mse_random_missing_noisy},
                              {"mse_blocks", report.mse_blocks},
                              {"mse_train", report.mse_train},
                              {"histogram_mean", report.histogram.mean},
                              {"histogram_std", report.histogram.stddev},
                              {"n_train", report.n_train},
                              {"p", report.p},
                              {"fit_seconds_replicate0", report.fit_seconds}};
    atomic_write(path("report.json"), [&](std::ostream& out) {
        out << nlohmann::json{{"config", report.config}, {"summary", summary}}.dump(2) << '\n';
    });
}

struct TimingRow {
    std::uint64_t n = 0;
    double seconds_per_update = 0.0;
    std::size_t state_bytes = 0;
};

struct TimingProfile {
    std::vector<TimingRow> rows;
    LinearFit fit;  ///< seconds_per_update against n.
};

/// Per-update wall time at the scheduled sample counts, on uniformly random
/// points with Gaussian responses. Each row is the median over `block`
/// consecutive updates starting at that n. Single-threaded.
inline TimingProfile timing_profile(const BasisConfig& bcfg, const SolverConfig& scfg,
                                    std::vector<std::uint64_t> n_schedule, std::size_t block = 25,
                                    std::uint64_t seed = 7) {
    if (n_schedule.empty()) throw ConfigError("timing_profile: empty schedule");
    std::sort(n_schedule.begin(), n_schedule.end());
    using clock = std::chrono::steady_clock;
    Rng rng(seed);
    const auto random_alpha = [&] {
        SpaceTimePoint pt;
        for (const auto& r : bcfg.spatial_ranges()) pt.s.push_back(r.lo + rng.uniform() * r.width());
        pt.t = rng.uniform() * bcfg.r_t();
        return alpha(pt, bcfg);
    };
    SolverState state = init(bcfg);
    TimingProfile profile;
    std::vector<double> times;
    for (const auto target : n_schedule) {
        while (state.n + 1 < target) update(state, random_alpha(), rng.normal(), scfg);
        times.clear();
        for (std::size_t k = 0; k < block; ++k) {
            const Vector a = random_alpha();
            const double y = rng.normal();
            const auto t0 = clock::now();
            update(state, a, y, scfg);
            times.push_back(std::chrono::duration<double>(clock::now() - t0).count());
        }
        std::sort(times.begin(), times.end());
        profile.rows.push_back({target, times[times.size() / 2], state.memory_bytes()});
    }
    std::vector<double> xs, ys;
    for (const auto& row : profile.rows) {
        xs.push_back(static_cast<double>(row.n));
        ys.push_back(row.seconds_per_update);
    }
    if (xs.size() >= 2) profile.fit = linear_fit(xs, ys);
    return profile;
}

}  // namespace stkg
