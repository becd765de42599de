#include <filesystem>
#include <fstream>
#include <numeric>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "stkg/eval.hpp"

using namespace stkg;

namespace {

EvalConfig hook_config(PredictorHook hook, int replicates = 4) {
    EvalConfig cfg;
    cfg.replicates = replicates;
    cfg.threads = 1;
    cfg.predictor = std::move(hook);
    return cfg;
}

std::vector<double> zeros(const SyntheticField& f, const MaskSplit&) { return std::vector<double>(f.data.size(), 0.0); }

}  // namespace

TEST(ErrorHistogram, CountsAndMoments) {
    const std::vector<double> pred{1.0, 2.0, 3.0, 4.0, 5.0};
    const std::vector<double> truth(5, 0.0);
    const auto h = error_histogram(pred, truth, 4);
    ASSERT_EQ(h.counts.size(), 4u);
    ASSERT_EQ(h.edges.size(), 5u);
    EXPECT_EQ(h.edges.front(), 1.0);
    EXPECT_EQ(h.edges.back(), 5.0);
    EXPECT_EQ(std::accumulate(h.counts.begin(), h.counts.end(), std::size_t{0}), 5u);
    EXPECT_EQ(h.counts.back(), 2u);
    EXPECT_DOUBLE_EQ(h.mean, 3.0);
    EXPECT_DOUBLE_EQ(h.stddev, std::sqrt(2.5));
}

TEST(ErrorHistogram, DegenerateAndAutomaticBins) {
    const std::vector<double> same(10, 2.0), zero(10, 0.0);
    const auto d = error_histogram(same, zero);
    EXPECT_EQ(d.counts, (std::vector<std::size_t>{10}));
    EXPECT_LT(d.edges[0], 2.0);
    EXPECT_GT(d.edges[1], 2.0);
    std::vector<double> pred(1000), truth(1000, 0.0);
    Rng rng(1);
    for (auto& v : pred) v = rng.normal();
    const auto h = error_histogram(pred, truth);
    EXPECT_GT(h.counts.size(), 5u);
    EXPECT_LT(h.counts.size(), 100u);
    EXPECT_EQ(std::accumulate(h.counts.begin(), h.counts.end(), std::size_t{0}), 1000u);
    EXPECT_THROW((void)error_histogram(pred, std::vector<double>(3)), ConfigError);
    EXPECT_THROW((void)error_histogram(std::vector<double>{}, std::vector<double>{}), ConfigError);
}

TEST(LinearFit, ExactLineAndConfidenceInterval) {
    const std::vector<double> x{1, 2, 3, 4, 5}, y{3, 5, 7, 9, 11};
    const auto fit = linear_fit(x, y);
    EXPECT_NEAR(fit.slope, 2.0, 1e-14);
    EXPECT_NEAR(fit.intercept, 1.0, 1e-13);
    EXPECT_NEAR(fit.r2, 1.0, 1e-14);
    const auto [lo, hi] = fit.slope_ci();
    EXPECT_NEAR(lo, 2.0, 1e-12);
    EXPECT_NEAR(hi, 2.0, 1e-12);
    // Known t quantile: t_{0.975, 3} = 3.182446305284263.
    const std::vector<double> yn{3, 5.5, 7, 8.5, 11};
    const auto noisy = linear_fit(x, yn);
    const auto ci = noisy.slope_ci();
    EXPECT_NEAR((ci.second - ci.first) / 2.0, 3.182446305284263 * noisy.slope_stderr, 1e-9);
    EXPECT_THROW((void)linear_fit(std::vector<double>{1, 1}, std::vector<double>{1, 2}), ConfigError);
}

TEST(RunMc, PerfectPredictorHasZeroError) {
    const auto report = run_mc(wave_preset(), hook_config([](const SyntheticField& f, const MaskSplit&) { return f.truth; }));
    EXPECT_EQ(report.mse_random_missing, 0.0);
    for (double m : report.mse_blocks) EXPECT_EQ(m, 0.0);
    EXPECT_EQ(report.mse_train, 0.0);
    EXPECT_NEAR(report.mse_random_missing_noisy, 0.09, 0.01);
}

TEST(RunMc, ZeroPredictorGivesSignalPower) {
    const auto preset = wave_preset();
    auto cfg = hook_config(zeros, 6);
    cfg.keep_predictions = true;
    const auto report = run_mc(preset, cfg);
    // Independent second pass over the kept predictions and regenerated masks.
    double rm = 0.0, rm_count = 0.0;
    std::vector<double> block(preset.mask.blocks.size(), 0.0), block_count(block.size(), 0.0);
    for (int r = 0; r < cfg.replicates; ++r) {
        const auto seed = cfg.base_seed + static_cast<std::uint64_t>(r);
        const auto field = generate(preset, seed);
        auto mask = preset.mask;
        mask.rng_seed = seed;
        const auto split = apply_mask(field.data, mask);
        const auto& pred = report.predictions[static_cast<std::size_t>(r)];
        EXPECT_EQ(report.truths[static_cast<std::size_t>(r)], field.truth);
        for (std::size_t i = 0; i < field.data.size(); ++i) {
            const double e2 = (pred[i] - field.truth[i]) * (pred[i] - field.truth[i]);
            if (split.label[i] == kRandomMissingLabel) {
                rm += e2;
                rm_count += 1.0;
            } else if (split.label[i] > 0) {
                block[static_cast<std::size_t>(split.label[i] - 1)] += e2;
                block_count[static_cast<std::size_t>(split.label[i] - 1)] += 1.0;
            }
        }
    }
    EXPECT_NEAR(report.mse_random_missing, rm / rm_count, 1e-12);
    for (std::size_t b = 0; b < block.size(); ++b) EXPECT_NEAR(report.mse_blocks[b], block[b] / block_count[b], 1e-12);
    EXPECT_NEAR(report.mse_random_missing_noisy, report.mse_random_missing + 0.09, 0.02);
}

TEST(RunMc, GridAccumulatorsAreConsistent) {
    const auto report = run_mc(wave_preset(), hook_config(zeros, 3));
    ASSERT_EQ(report.grid.size(), 2100u);
    ASSERT_EQ(report.mse_grid.size(), 2100u);
    for (std::size_t i = 0; i < report.grid.size(); ++i) {
        const auto truth = std::get<PlanarWaveSpec>(*wave_preset().process).mean(report.grid[i].s[0], report.grid[i].t);
        EXPECT_NEAR(report.mse_grid[i], truth * truth, 1e-12);
        EXPECT_GE(report.test_rate[i], 0.0);
        EXPECT_LE(report.test_rate[i], 1.0);
        if (report.block_label[i] > 0) {
            EXPECT_EQ(report.test_rate[i], 1.0);
        }
    }
    EXPECT_EQ(report.n_train, 700u);
    EXPECT_EQ(report.p, 390u);
    EXPECT_FALSE(report.series.empty());
}

TEST(RunMc, ReproducibleAcrossThreadCounts) {
    EvalConfig cfg;
    cfg.replicates = 2;
    cfg.threads = 1;
    cfg.keep_predictions = true;
    const auto a = run_mc(wave_preset(), cfg);
    cfg.threads = 2;
    const auto b = run_mc(wave_preset(), cfg);
    EXPECT_EQ(a.predictions, b.predictions);
    EXPECT_EQ(a.mse_random_missing, b.mse_random_missing);
    EXPECT_EQ(a.mse_blocks, b.mse_blocks);
    EXPECT_EQ(a.update_seconds.size(), 700u);
    EXPECT_EQ(a.config["rng"], Rng::kAlgorithm);
    EXPECT_EQ(a.config["fit"]["converge"], true);
}

TEST(RunMc, ErrorsNameTheReplicate) {
    int calls = 0;
    auto cfg = hook_config([&](const SyntheticField& f, const MaskSplit&) {
        if (++calls == 2) throw NumericError("boom");
        return std::vector<double>(f.data.size(), 0.0);
    });
    try {
        (void)run_mc(wave_preset(), cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("replicate 1"), std::string::npos) << e.what();
    }
    cfg.replicates = 0;
    EXPECT_THROW((void)run_mc(wave_preset(), cfg), ConfigError);
    EXPECT_THROW((void)run_mc(sst_shape_preset(), hook_config(zeros)), ConfigError);
    auto wrong = hook_config([](const SyntheticField&, const MaskSplit&) { return std::vector<double>(3); }, 1);
    EXPECT_THROW((void)run_mc(wave_preset(), wrong), Error);
}

TEST(WriteReport, ProducesFiveFilesWithSchemas) {
    const auto dir = std::filesystem::temp_directory_path() / "stkg_test_eval_report";
    std::filesystem::remove_all(dir);
    const auto report = run_mc(seasonal_preset(), hook_config(zeros, 2));
    write_report(report, dir.string());
    const std::vector<std::pair<std::string, std::string>> expected{
        {"mse_grid.csv", "s,t,mse,mse_noisy,block,test_rate"},
        {"histogram.csv", "bin_lo,bin_hi,count"},
        {"series.csv", "s,t,y_true,y_obs,y_pred,is_test"},
        {"timing.csv", "sample,update_seconds,cumulative_seconds"},
    };
    for (const auto& [name, columns] : expected) {
        std::ifstream in(dir / name);
        ASSERT_TRUE(in) << name;
        std::string first;
        std::getline(in, first);
        EXPECT_EQ(first, columns) << name;
    }
    std::ifstream json_in(dir / "report.json");
    const auto j = nlohmann::json::parse(json_in);
    EXPECT_EQ(j["config"]["preset"]["name"], "seasonal");
    EXPECT_DOUBLE_EQ(j["summary"]["mse_random_missing"].get<double>(), report.mse_random_missing);
    std::size_t count = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        (void)entry;
        ++count;
    }
    EXPECT_EQ(count, 5u);
    std::filesystem::remove_all(dir);
}

TEST(TimingProfile, RowsAndConstantMemory) {
    const BasisConfig basis({{0.0, 10.0}}, 8, {3.0}, 10.0, 9);
    const auto profile = timing_profile(basis, {}, {300, 100, 200}, 10);
    ASSERT_EQ(profile.rows.size(), 3u);
    EXPECT_EQ(profile.rows[0].n, 100u);
    EXPECT_EQ(profile.rows[2].n, 300u);
    for (const auto& row : profile.rows) {
        EXPECT_GT(row.seconds_per_update, 0.0);
        EXPECT_EQ(row.state_bytes, profile.rows[0].state_bytes);
    }
    EXPECT_EQ(profile.fit.n, 3u);
    EXPECT_THROW((void)timing_profile(basis, {}, {}), ConfigError);
}
