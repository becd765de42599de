#pragma once

// Named parameterizations of the four reference experiments: the damped
// planar wave, spatially varying seasonalities, and the two gridded
// climate-data shapes (tropical Pacific SST anomalies, CRU precipitation).

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "stkg/basis.hpp"
#include "stkg/data_io.hpp"
#include "stkg/rng.hpp"
#include "stkg/synthetic.hpp"

namespace stkg {

using ProcessSpec = std::variant<PlanarWaveSpec, SeasonalFieldSpec>;

struct BasisParams {
    int ns = 15;
    int nt = 25;
    std::vector<double> supports{5.0};
    /// When true the spatial basis lives on [0, 1]^d and supports are
    /// fractions of each dimension's range.
    bool normalized_space = false;
};

struct ExperimentPreset {
    std::string name;
    BasisParams basis;
    /// Synthetic presets only.
    std::optional<ProcessSpec> process;
    std::optional<Grid> grid;
    MaskSpec mask;
    /// Grid shape of the real-data presets: points per spatial dim and months.
    std::vector<std::size_t> spatial_shape;
    std::size_t time_steps = 0;
};

/// Basis on the dataset's own domain: spatial ranges copied from the header
/// (or [0, 1] when normalized) and R_t equal to the header's time span.
inline BasisConfig basis_for(const BasisParams& params, const DatasetHeader& header) {
    std::vector<Interval> ranges;
    for (const auto& r : header.spatial_ranges) ranges.push_back(params.normalized_space ? Interval{0.0, 1.0} : r);
    return BasisConfig(std::move(ranges), params.ns, params.supports, header.time_range.width(), params.nt);
}

inline ExperimentPreset wave_preset() {
    ExperimentPreset p;
    p.name = "wave";
    p.basis = {15, 25, {5.0}, false};
    p.process = PlanarWaveSpec{3.0, 9.0, 0.3, 20.0};
    // 30 x 70 grid: s = 0..29, t = 0, 0.2, ..., 13.8 on [0, 14].
    p.grid = Grid{Grid::uniform(0.0, 1.0, 30), Grid::uniform(0.0, 0.2, 70), {0.0, 29.0}, {0.0, 14.0}};
    // Box edges sit halfway between grid lines.
    p.mask.blocks = {
        {{{3.5, 8.5}}, {0.5, 13.1}},    // narrow strip missing most of the time
        {{{12.5, 26.5}}, {3.9, 6.1}},   // wide region, data before and after
        {{{12.5, 26.5}}, {11.5, 14.0}}, // wide region, data only before
    };
    p.mask.train_count = 700;
    return p;
}

inline ExperimentPreset seasonal_preset() {
    ExperimentPreset p;
    p.name = "seasonal";
    p.basis = {15, 35, {3.0}, false};
    constexpr double inf = std::numeric_limits<double>::infinity();
    p.process = SeasonalFieldSpec{{{{0.0, 5.0}, 10.0}, {{5.0, 10.0}, 30.0}, {{10.0, 14.5}, inf}}, 0.3};
    // 30 x 60 grid: s = 0, 0.5, ..., 14.5 and t = 0..59. The half-unit
    // spacing keeps adjacent L = 3 components well overlapped. The time range
    // ends at 67.5 so that 4 R_t / T is odd for T = 10 and T = 30, which makes
    // cos(2 pi t / T) a single temporal basis function.
    p.grid = Grid{Grid::uniform(0.0, 0.5, 30), Grid::uniform(0.0, 1.0, 60), {0.0, 14.5}, {0.0, 67.5}};
    // 24 locations x 30 steps, spanning all three regions.
    p.mask.blocks = {{{{1.25, 12.75}}, {14.5, 44.5}}};
    p.mask.train_count = 600;
    return p;
}

inline ExperimentPreset sst_shape_preset() {
    ExperimentPreset p;
    p.name = "sst-shape";
    p.basis = {8, 100, {0.5}, true};
    p.spatial_shape = {30, 84};  // 29S..29N and 124E..70W at 2 degrees
    p.time_steps = 36;
    p.mask.train_count = 63503;
    return p;
}

inline ExperimentPreset cru_shape_preset() {
    ExperimentPreset p;
    p.name = "cru-shape";
    p.basis = {6, 300, {0.5}, true};
    p.spatial_shape = {20, 24};  // 40N..50N and 107W..95W at 0.5 degrees
    p.time_steps = 60;
    p.mask.train_count = 14400;
    return p;
}

inline std::optional<ExperimentPreset> find_preset(const std::string& name) {
    if (name == "wave") return wave_preset();
    if (name == "seasonal") return seasonal_preset();
    if (name == "sst-shape") return sst_shape_preset();
    if (name == "cru-shape") return cru_shape_preset();
    return std::nullopt;
}

/// Header of a gridded real-data preset (latitude first, then longitude;
/// time in months on [0, time_steps]).
inline DatasetHeader preset_header(const ExperimentPreset& p) {
    DatasetHeader h;
    if (p.name == "sst-shape") {
        h.spatial_ranges = {{-29.0, 29.0}, {124.0, 290.0}};
    } else if (p.name == "cru-shape") {
        h.spatial_ranges = {{40.0, 49.5}, {-107.0, -95.5}};
    } else if (p.grid) {
        h.spatial_ranges = {p.grid->s_range};
        h.time_range = p.grid->t_range;
        return h;
    } else {
        throw ConfigError("preset '" + p.name + "' has no domain");
    }
    h.time_range = {0.0, static_cast<double>(p.time_steps)};
    return h;
}

/// Placeholder data with the shape of a real-data preset: every grid
/// location (spatial_shape points per dimension, ends included) at months
/// 0 .. time_steps-1, values standard normal. Exercises ingestion and
/// fitting at full scale; carries no signal.
inline SyntheticField gen_gridded_shape(const ExperimentPreset& p, std::uint64_t seed) {
    if (p.spatial_shape.empty() || p.time_steps == 0) {
        throw ConfigError("preset '" + p.name + "' has no grid shape");
    }
    SyntheticField out;
    auto& header = out.data.header;
    header = preset_header(p);
    header.extras = {{"generator", "gridded-shape"}, {"rng", Rng::kAlgorithm}, {"seed", std::to_string(seed)}};
    std::vector<std::vector<double>> axes;
    std::size_t locations = 1;
    for (std::size_t i = 0; i < p.spatial_shape.size(); ++i) {
        const auto count = p.spatial_shape[i];
        if (count < 2) throw ConfigError("grid shape needs at least 2 points per dimension");
        const auto& r = header.spatial_ranges[i];
        std::vector<double> axis(count);
        for (std::size_t k = 0; k < count; ++k) {
            axis[k] = k + 1 == count ? r.hi : r.lo + r.width() * static_cast<double>(k) / static_cast<double>(count - 1);
        }
        axes.push_back(std::move(axis));
        locations *= count;
    }
    Rng rng(seed);
    out.data.rows.reserve(locations * p.time_steps);
    out.truth.reserve(locations * p.time_steps);
    std::vector<double> s(axes.size());
    for (std::size_t month = 0; month < p.time_steps; ++month) {
        for (std::size_t loc = 0; loc < locations; ++loc) {
            // Last dimension varies fastest.
            std::size_t rem = loc;
            for (std::size_t i = axes.size(); i-- > 0;) {
                s[i] = axes[i][rem % axes[i].size()];
                rem /= axes[i].size();
            }
            out.truth.push_back(0.0);
            out.data.rows.push_back({s, static_cast<double>(month), rng.normal()});
        }
    }
    return out;
}

inline SyntheticField generate(const ExperimentPreset& p, std::uint64_t seed) {
    if (!p.process && !p.spatial_shape.empty()) return gen_gridded_shape(p, seed);
    if (!p.process || !p.grid) throw ConfigError("preset '" + p.name + "' has no synthetic generator");
    if (const auto* wave = std::get_if<PlanarWaveSpec>(&*p.process)) return gen_planar_wave(*p.grid, *wave, seed);
    return gen_seasonal_field(*p.grid, std::get<SeasonalFieldSpec>(*p.process), seed);
}

}  // namespace stkg
