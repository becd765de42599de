#pragma once

// Synthetic space-time processes on regular 1-D space x time grids, and the
// train/test split with contiguous withheld blocks plus randomly missing
// points.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "stkg/data_io.hpp"
#include "stkg/error.hpp"
#include "stkg/rng.hpp"

namespace stkg {

/// Regular grid: every spatial value paired with every time value.
struct Grid {
    std::vector<double> s_values;
    std::vector<double> t_values;
    Interval s_range;
    Interval t_range;

    /// `count` points lo, lo + step, ...; the declared range ends at `hi`.
    static std::vector<double> uniform(double lo, double step, std::size_t count) {
        std::vector<double> out(count);
        for (std::size_t i = 0; i < count; ++i) out[i] = lo + step * static_cast<double>(i);
        return out;
    }

    [[nodiscard]] std::size_t size() const { return s_values.size() * t_values.size(); }

    void validate() const {
        if (s_values.empty() || t_values.empty()) throw ConfigError("grid must be non-empty");
        for (double s : s_values) {
            if (!s_range.contains(s)) throw ConfigError("grid spatial value outside declared range");
        }
        for (double t : t_values) {
            if (!t_range.contains(t)) throw ConfigError("grid time value outside declared range");
        }
    }
};

struct PlanarWaveSpec {
    double v_s = 3.0;         ///< Speed in spatial units per time unit.
    double lambda_s = 9.0;    ///< Wavelength in spatial units.
    double sigma = 0.3;       ///< Noise standard deviation.
    double decay_scale = 20.0;

    void validate() const {
        if (!(lambda_s > 0.0)) throw ConfigError("wave: lambda_s must be positive");
        if (!(sigma >= 0.0)) throw ConfigError("wave: sigma must be >= 0");
        if (!(decay_scale > 0.0)) throw ConfigError("wave: decay_scale must be positive");
        if (!std::isfinite(v_s)) throw ConfigError("wave: v_s must be finite");
    }

    [[nodiscard]] double mean(double s, double t) const {
        return std::cos(2.0 * std::numbers::pi / lambda_s * (s - v_s * t)) * std::exp(-s / decay_scale);
    }
};

struct SeasonalRegion {
    Interval span;
    double period = std::numeric_limits<double>::infinity();  ///< Infinite: constant mean.
};

struct SeasonalFieldSpec {
    /// Ordered, contiguous spatial intervals; each is half-open except the last.
    std::vector<SeasonalRegion> regions;
    double sigma = 0.3;

    void validate() const {
        if (regions.empty()) throw ConfigError("seasonal: at least one region is required");
        if (!(sigma >= 0.0)) throw ConfigError("seasonal: sigma must be >= 0");
        for (std::size_t i = 0; i < regions.size(); ++i) {
            const auto& r = regions[i];
            if (!(r.span.width() > 0.0)) throw ConfigError("seasonal: empty region");
            if (!(r.period > 0.0)) throw ConfigError("seasonal: periods must be positive or infinite");
            if (i > 0 && regions[i - 1].span.hi != r.span.lo) {
                throw ConfigError("seasonal: regions must be contiguous");
            }
        }
    }

    /// Index of the region containing s, or nullopt.
    [[nodiscard]] std::optional<std::size_t> region_of(double s) const {
        for (std::size_t i = 0; i < regions.size(); ++i) {
            const auto& span = regions[i].span;
            const bool last = i + 1 == regions.size();
            if (s >= span.lo && (s < span.hi || (last && s == span.hi))) return i;
        }
        return std::nullopt;
    }

    [[nodiscard]] double mean(double s, double t) const {
        const auto idx = region_of(s);
        if (!idx) throw DomainError("seasonal: spatial point " + format_double(s) + " not covered by any region");
        const double period = regions[*idx].period;
        if (std::isinf(period)) return 1.0;
        return std::cos(2.0 * std::numbers::pi / period * t);
    }
};

/// Generated dataset together with the noise-free field at every row.
struct SyntheticField {
    Dataset data;
    std::vector<double> truth;
};

namespace detail {

template <typename MeanFn>
SyntheticField generate_on_grid(const Grid& grid, double sigma, std::uint64_t seed, const std::string& name,
                                MeanFn&& mean) {
    grid.validate();
    SyntheticField out;
    auto& header = out.data.header;
    header.spatial_ranges = {grid.s_range};
    header.time_range = grid.t_range;
    header.extras = {{"generator", name}, {"rng", Rng::kAlgorithm}, {"seed", std::to_string(seed)}};
    Rng rng(seed);
    out.data.rows.reserve(grid.size());
    out.truth.reserve(grid.size());
    // Time-major: all spatial points at t_0, then t_1, ...
    for (double t : grid.t_values) {
        for (double s : grid.s_values) {
            const double clean = mean(s, t);
            out.truth.push_back(clean);
            out.data.rows.push_back({{s}, t, clean + sigma * rng.normal()});
        }
    }
    return out;
}

}  // namespace detail

inline SyntheticField gen_planar_wave(const Grid& grid, const PlanarWaveSpec& spec, std::uint64_t seed) {
    spec.validate();
    return detail::generate_on_grid(grid, spec.sigma, seed, "planar-wave",
                                    [&](double s, double t) { return spec.mean(s, t); });
}

inline SyntheticField gen_seasonal_field(const Grid& grid, const SeasonalFieldSpec& spec, std::uint64_t seed) {
    spec.validate();
    for (double s : grid.s_values) {
        if (!spec.region_of(s)) {
            throw DomainError("seasonal: spatial point " + format_double(s) + " not covered by any region");
        }
    }
    return detail::generate_on_grid(grid, spec.sigma, seed, "seasonal",
                                    [&](double s, double t) { return spec.mean(s, t); });
}

/// Closed axis-aligned space-time box.
struct SpaceTimeBox {
    std::vector<Interval> s;
    Interval t;

    [[nodiscard]] bool contains(const Observation& obs) const {
        if (obs.s.size() != s.size()) return false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (!s[i].contains(obs.s[i])) return false;
        }
        return t.contains(obs.t);
    }
};

struct MaskSpec {
    std::vector<SpaceTimeBox> blocks;
    /// Fraction of non-block points withheld at random.
    double random_missing_fraction = 0.0;
    /// When set, overrides the fraction: withhold at random until exactly
    /// this many points remain for training.
    std::optional<std::size_t> train_count;
    std::uint64_t rng_seed = 0;
};

/// Per-row role in a split.
inline constexpr int kTrainLabel = -1;
inline constexpr int kRandomMissingLabel = 0;  ///< Blocks are labelled 1, 2, ...

struct MaskSplit {
    Dataset train;
    Dataset test;
    std::vector<std::size_t> train_index;  ///< Row indices into the source dataset.
    std::vector<std::size_t> test_index;
    std::vector<int> label;  ///< Per source row.
};

inline MaskSplit apply_mask(const Dataset& ds, const MaskSpec& mask) {
    if (!(mask.random_missing_fraction >= 0.0 && mask.random_missing_fraction < 1.0)) {
        throw ConfigError("mask: random_missing_fraction must be in [0, 1)");
    }
    for (const auto& box : mask.blocks) {
        if (box.s.size() != static_cast<std::size_t>(ds.header.d())) {
            throw ConfigError("mask: block dimension does not match dataset");
        }
        for (std::size_t i = 0; i < box.s.size(); ++i) {
            const auto& dom = ds.header.spatial_ranges[i];
            if (!(box.s[i].lo <= box.s[i].hi) || box.s[i].lo < dom.lo || box.s[i].hi > dom.hi) {
                throw ConfigError("mask: block outside spatial domain");
            }
        }
        if (!(box.t.lo <= box.t.hi) || box.t.lo < ds.header.time_range.lo || box.t.hi > ds.header.time_range.hi) {
            throw ConfigError("mask: block outside time domain");
        }
    }

    MaskSplit split;
    split.label.assign(ds.size(), kTrainLabel);
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t b = 0; b < mask.blocks.size(); ++b) {
            if (mask.blocks[b].contains(ds.rows[i])) {
                split.label[i] = static_cast<int>(b) + 1;
                break;
            }
        }
        if (split.label[i] == kTrainLabel) candidates.push_back(i);
    }

    std::size_t withhold = 0;
    if (mask.train_count) {
        if (*mask.train_count > candidates.size()) {
            throw ConfigError("mask: requested " + std::to_string(*mask.train_count) + " training points but only " +
                              std::to_string(candidates.size()) + " lie outside the blocks");
        }
        withhold = candidates.size() - *mask.train_count;
    } else {
        withhold = static_cast<std::size_t>(
            std::llround(mask.random_missing_fraction * static_cast<double>(candidates.size())));
    }
    Rng rng(mask.rng_seed);
    rng.shuffle(std::span<std::size_t>(candidates));
    for (std::size_t k = 0; k < withhold; ++k) split.label[candidates[k]] = kRandomMissingLabel;

    split.train.header = ds.header;
    split.test.header = ds.header;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (split.label[i] == kTrainLabel) {
            split.train.rows.push_back(ds.rows[i]);
            split.train_index.push_back(i);
        } else {
            split.test.rows.push_back(ds.rows[i]);
            split.test_index.push_back(i);
        }
    }
    if (split.train.empty()) throw ConfigError("mask leaves an empty training set");
    return split;
}

}  // namespace stkg
