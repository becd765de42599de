// Command-line driver: simulate, fit, predict, eval, cov-map.
// Exit codes: 0 success, 2 usage or configuration error, 1 runtime error.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stkg/basis.hpp"
#include "stkg/covariance_model.hpp"
#include "stkg/data_io.hpp"
#include "stkg/eval.hpp"
#include "stkg/fit.hpp"
#include "stkg/presets.hpp"
#include "stkg/streaming_solver.hpp"
#include "stkg/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct BasisFlags {
    std::string preset;
    std::optional<int> ns;
    std::optional<int> nt;
    std::vector<double> supports;
    bool normalized = false;

    void add(CLI::App* app) {
        app->add_option("--preset", preset, "Experiment preset")
            ->check(CLI::IsMember({"wave", "seasonal", "sst-shape", "cru-shape"}));
        app->add_option("--ns", ns, "Spline components per spatial dimension");
        app->add_option("--nt", nt, "Temporal harmonics");
        app->add_option("--support", supports, "Spline support width(s), one per scale")->delimiter(',');
        app->add_flag("--normalized", normalized, "Spatial basis on [0, 1]^d; supports are range fractions");
    }

    [[nodiscard]] std::optional<stkg::ExperimentPreset> preset_or_none() const {
        if (preset.empty()) return std::nullopt;
        return stkg::find_preset(preset);
    }

    [[nodiscard]] stkg::BasisParams resolve() const {
        stkg::BasisParams params;
        if (const auto p = preset_or_none()) params = p->basis;
        else if (!ns || !nt || supports.empty()) {
            throw stkg::ConfigError("basis needs --preset or all of --ns, --nt, --support");
        }
        if (ns) params.ns = *ns;
        if (nt) params.nt = *nt;
        if (!supports.empty()) params.supports = supports;
        if (normalized) params.normalized_space = true;
        return params;
    }
};

struct SolverFlags {
    int sweeps = 1;
    int passes = 1;
    std::optional<std::uint64_t> shuffle;
    bool converge = false;
    double tol = stkg::SolverConfig{}.convergence_tol;
    int max_sweeps = stkg::SolverConfig{}.max_sweeps;

    void add(CLI::App* app) {
        app->add_option("--sweeps", sweeps, "Coordinate sweeps after each observation")->check(CLI::PositiveNumber);
        app->add_option("--passes", passes, "Passes over the stream")->check(CLI::PositiveNumber);
        app->add_option("--shuffle", shuffle, "Randomize arrival order with this seed");
        app->add_option("--tol", tol, "Convergence tolerance (relative fit change)");
        app->add_option("--max-sweeps", max_sweeps, "Sweep cap when converging")->check(CLI::PositiveNumber);
    }

    [[nodiscard]] stkg::FitOptions options() const {
        stkg::FitOptions f;
        f.solver.sweeps_per_sample = sweeps;
        f.solver.convergence_tol = tol;
        f.solver.max_sweeps = max_sweeps;
        f.passes = passes;
        f.shuffle_seed = shuffle;
        f.converge = converge;
        return f;
    }
};

void require_file(const std::string& path, const std::string& what) {
    if (!fs::is_regular_file(path)) throw stkg::ConfigError(what + " '" + path + "' does not exist");
}

void require_parent(const std::string& path) {
    const auto parent = fs::path(path).parent_path();
    if (!parent.empty() && !fs::is_directory(parent)) {
        throw stkg::ConfigError("output directory '" + parent.string() + "' does not exist");
    }
}

std::string sidecar_path(const std::string& model) { return model + ".basis"; }

// Basis keys plus the dataset ranges the affine map needs.
stkg::KeyValues model_sidecar(const stkg::BasisConfig& basis, const stkg::DatasetHeader& header) {
    auto kv = basis.to_keyvalues();
    for (int i = 0; i < header.d(); ++i) {
        const auto idx = std::to_string(i + 1);
        kv.set("data_s_lo_" + idx, stkg::format_double(header.spatial_ranges[static_cast<std::size_t>(i)].lo));
        kv.set("data_s_hi_" + idx, stkg::format_double(header.spatial_ranges[static_cast<std::size_t>(i)].hi));
    }
    kv.set("t_lo", stkg::format_double(header.time_range.lo));
    kv.set("t_hi", stkg::format_double(header.time_range.hi));
    return kv;
}

stkg::DomainMap load_domain(const std::string& model) {
    const auto kv = stkg::KeyValues::load(sidecar_path(model));
    const auto basis = stkg::BasisConfig::from_keyvalues(kv);
    stkg::DatasetHeader header;
    for (int i = 1; i <= basis.d(); ++i) {
        const auto idx = std::to_string(i);
        header.spatial_ranges.push_back({stkg::parse_double(kv.get("data_s_lo_" + idx), "data_s_lo_" + idx),
                                         stkg::parse_double(kv.get("data_s_hi_" + idx), "data_s_hi_" + idx)});
    }
    header.time_range = {stkg::parse_double(kv.get("t_lo"), "t_lo"), stkg::parse_double(kv.get("t_hi"), "t_hi")};
    return stkg::DomainMap(header, basis);
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw stkg::Error("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// "lo:step:hi", inclusive of hi within half a step.
std::vector<double> parse_range(const std::string& text, const std::string& what) {
    const auto parts = stkg::detail::split(text, ':');
    if (parts.size() != 3) throw stkg::ConfigError(what + ": expected lo:step:hi");
    const double lo = stkg::parse_double(parts[0], what);
    const double step = stkg::parse_double(parts[1], what);
    const double hi = stkg::parse_double(parts[2], what);
    if (!(step > 0.0) || hi < lo) throw stkg::ConfigError(what + ": need step > 0 and hi >= lo");
    std::vector<double> out;
    for (std::size_t k = 0;; ++k) {
        const double v = lo + step * static_cast<double>(k);
        if (v > hi + 0.5 * step) break;
        out.push_back(std::min(v, hi));
    }
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    stkg::atomic_write(path, [&](std::ostream& out) { out << text; });
}

// ---- simulate ------------------------------------------------------------

struct SimulateArgs {
    std::string preset;
    std::string process;
    std::optional<double> vs, lambda_s, sigma;
    std::optional<std::size_t> n_train;
    std::uint64_t seed = 1;
    std::string out_dir;
};

int run_simulate(const SimulateArgs& a) {
    if (a.preset.empty() == a.process.empty()) throw stkg::ConfigError("give exactly one of --preset, --process");
    auto preset = *stkg::find_preset(a.preset.empty() ? a.process : a.preset);
    if (preset.process) {
        if (auto* w = std::get_if<stkg::PlanarWaveSpec>(&*preset.process)) {
            if (a.vs) w->v_s = *a.vs;
            if (a.lambda_s) w->lambda_s = *a.lambda_s;
            if (a.sigma) w->sigma = *a.sigma;
        } else {
            auto& s = std::get<stkg::SeasonalFieldSpec>(*preset.process);
            if (a.vs || a.lambda_s) throw stkg::ConfigError("--vs and --lambda-s apply to the wave process only");
            if (a.sigma) s.sigma = *a.sigma;
        }
    } else if (a.vs || a.lambda_s || a.sigma) {
        throw stkg::ConfigError("preset '" + preset.name + "' has no process parameters");
    }
    if (a.n_train) preset.mask.train_count = *a.n_train;
    preset.mask.rng_seed = a.seed;
    if (!fs::is_directory(a.out_dir)) throw stkg::ConfigError("output directory '" + a.out_dir + "' does not exist");

    const auto field = stkg::generate(preset, a.seed);
    const auto split = stkg::apply_mask(field.data, preset.mask);
    const auto dir = fs::path(a.out_dir);
    stkg::write_csv(field.data, (dir / "full.csv").string());
    stkg::write_csv(split.train, (dir / "train.csv").string());
    if (!split.test.empty()) stkg::write_csv(split.test, (dir / "test.csv").string());
    // Noise-free field and split labels per full.csv row.
    stkg::atomic_write((dir / "truth.csv").string(), [&](std::ostream& out) {
        out << "row,y_true,label\n";
        for (std::size_t i = 0; i < field.truth.size(); ++i) {
            out << i << ',' << stkg::detail::format17(field.truth[i]) << ',' << split.label[i] << '\n';
        }
    });

    json cfg = stkg::preset_json(preset);
    cfg["seed"] = a.seed;
    json summary = {{"rows", field.data.size()}, {"train", split.train.size()}, {"test", split.test.size()},
                    {"config", cfg}};
    std::cout << summary.dump() << '\n';
    return 0;
}

// ---- fit -----------------------------------------------------------------

struct FitArgs {
    std::string train;
    std::string out;
    BasisFlags basis;
    SolverFlags solver;
};

int run_fit(const FitArgs& a) {
    require_file(a.train, "training file");
    require_parent(a.out);
    const auto params = a.basis.resolve();
    const auto opts = a.solver.options();
    opts.solver.validate();

    const auto data = stkg::read_csv(a.train);
    if (data.empty()) throw stkg::Error("training file '" + a.train + "' has no rows");
    const auto basis = stkg::basis_for(params, data.header);
    const stkg::DomainMap domain(data.header, basis);
    const auto result = stkg::fit_dataset(data, domain, opts);

    const auto bytes = stkg::snapshot(result.state);
    stkg::atomic_write(a.out, [&](std::ostream& out) {
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }, true);
    write_text(sidecar_path(a.out), model_sidecar(basis, data.header).str());

    json basis_json = {{"ns", params.ns}, {"nt", params.nt}, {"supports", params.supports},
                       {"normalized_space", params.normalized_space}, {"r_t", basis.r_t()}};
    json report = {{"n", result.state.n},
                   {"p", basis.p()},
                   {"elapsed_seconds", result.total_seconds},
                   {"objective", stkg::objective(result.state)},
                   {"config", {{"train", a.train}, {"out", a.out}, {"basis", basis_json},
                               {"fit", stkg::detail::fit_options_json(opts)}}}};
    if (result.convergence) {
        report["convergence"] = {{"sweeps", result.convergence->sweeps}, {"converged", result.convergence->converged}};
    }
    std::cout << report.dump() << '\n';
    return 0;
}

// ---- predict -------------------------------------------------------------

struct PredictArgs {
    std::string model;
    std::string points;
    std::vector<double> at;
    std::string s_grid;
    std::string t_grid;
    std::string out;
};

int run_predict(const PredictArgs& a) {
    require_file(a.model, "model");
    require_file(sidecar_path(a.model), "model basis file");
    require_parent(a.out);
    const int modes = !a.points.empty() + !a.at.empty() + !a.s_grid.empty();
    if (modes != 1) throw stkg::ConfigError("give exactly one of --points, --at, --s-grid");
    if (!a.points.empty()) require_file(a.points, "points file");
    if (a.points.empty() && a.t_grid.empty()) throw stkg::ConfigError("--at and --s-grid need --t-grid");

    const auto domain = load_domain(a.model);
    const auto state = stkg::restore(read_bytes(a.model));
    if (state.dim() != static_cast<Eigen::Index>(domain.basis().p() + 1)) {
        throw stkg::FormatError("model snapshot does not match its basis file");
    }

    std::vector<std::pair<std::vector<double>, double>> queries;
    if (!a.points.empty()) {
        for (const auto& row : stkg::read_csv(a.points).rows) queries.emplace_back(row.s, row.t);
    } else {
        const auto times = parse_range(a.t_grid, "--t-grid");
        std::vector<std::vector<double>> locations;
        if (!a.at.empty()) {
            locations.push_back(a.at);
        } else {
            if (domain.basis().d() != 1) throw stkg::ConfigError("--s-grid needs a one-dimensional model; use --points");
            for (double s : parse_range(a.s_grid, "--s-grid")) locations.push_back({s});
        }
        for (double t : times) {
            for (const auto& s : locations) queries.emplace_back(s, t);
        }
    }

    std::ostringstream out;
    for (int i = 1; i <= domain.basis().d(); ++i) out << 's' << i << ',';
    out << "t,y_pred\n";
    for (const auto& [s, t] : queries) {
        const double y = stkg::predict(state, stkg::alpha(domain.to_basis(s, t), domain.basis()));
        for (double v : s) out << stkg::detail::format17(v) << ',';
        out << stkg::detail::format17(t) << ',' << stkg::detail::format17(y) << '\n';
    }
    write_text(a.out, out.str());
    std::cout << json{{"predictions", queries.size()}, {"model", a.model}, {"out", a.out}}.dump() << '\n';
    return 0;
}

// ---- eval ----------------------------------------------------------------

struct EvalArgs {
    std::string preset;
    int replicates = 25;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::size_t bins = 0;
    bool stream_only = false;
    std::string out_dir;
    SolverFlags solver;
};

int run_eval(const EvalArgs& a) {
    if (a.replicates < 1) throw stkg::ConfigError("--replicates must be >= 1");
    const auto dir = fs::path(a.out_dir);
    if (!dir.parent_path().empty() && !fs::is_directory(dir.parent_path())) {
        throw stkg::ConfigError("parent of '" + a.out_dir + "' does not exist");
    }
    const auto preset = *stkg::find_preset(a.preset);
    stkg::EvalConfig cfg;
    cfg.replicates = a.replicates;
    cfg.base_seed = a.seed;
    cfg.threads = a.threads;
    cfg.histogram_bins = a.bins;
    cfg.fit = a.solver.options();
    cfg.fit.converge = !a.stream_only;
    const auto report = stkg::run_mc(preset, cfg);
    fs::create_directories(dir);
    stkg::write_report(report, a.out_dir);
    json summary = {{"out_dir", a.out_dir},
                    {"p", report.p},
                    {"n_train", report.n_train},
                    {"mse_random_missing", report.mse_random_missing},
                    {"mse_blocks", report.mse_blocks},
                    {"config", report.config}};
    std::cout << summary.dump() << '\n';
    return 0;
}

// ---- cov-map -------------------------------------------------------------

struct CovMapArgs {
    BasisFlags basis;
    std::vector<double> s_range;
    std::vector<double> t_range;
    double theta0 = 0.0;
    std::vector<int> harmonics;
    double theta_value = 1.0;
    std::vector<double> at;
    std::string s_grid;
    std::string t_grid;
    std::string out;
};

int run_cov_map(const CovMapArgs& a) {
    require_parent(a.out);
    const auto params = a.basis.resolve();
    stkg::DatasetHeader header;
    if (const auto p = a.basis.preset_or_none(); p && a.s_range.empty()) {
        header = stkg::preset_header(*p);
    } else {
        if (a.s_range.size() != 2 || a.t_range.size() != 2) {
            throw stkg::ConfigError("cov-map needs --preset or --s-range lo,hi and --t-range lo,hi");
        }
        header.spatial_ranges = {{a.s_range[0], a.s_range[1]}};
        header.time_range = {a.t_range[0], a.t_range[1]};
    }
    const auto basis = stkg::basis_for(params, header);
    if (basis.d() != 1) throw stkg::ConfigError("cov-map supports one spatial dimension");
    const stkg::DomainMap domain(header, basis);
    if (a.at.size() != 2) throw stkg::ConfigError("--at expects s,t");

    // Theta: theta_value on every spatial component of the chosen harmonics.
    stkg::CovarianceParams theta{a.theta0, stkg::Vector::Zero(static_cast<Eigen::Index>(basis.p()))};
    const auto block = static_cast<Eigen::Index>(basis.spatial_size());
    for (int k : a.harmonics) {
        if (k < 0 || k > basis.nt()) throw stkg::ConfigError("harmonic index out of range");
        theta.theta.segment(k * block, block).setConstant(a.theta_value);
    }
    theta.validate();

    const auto test = domain.to_basis(std::vector<double>{a.at[0]}, a.at[1]);
    std::vector<stkg::SpaceTimePoint> grid;
    std::vector<std::pair<double, double>> raw;
    for (double t : parse_range(a.t_grid, "--t-grid")) {
        for (double s : parse_range(a.s_grid, "--s-grid")) {
            grid.push_back(domain.to_basis(std::vector<double>{s}, t));
            raw.emplace_back(s, t);
        }
    }
    const auto cov = stkg::cov_map(test, grid, theta, basis);
    std::ostringstream out;
    out << "s,t,cov\n";
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out << stkg::detail::format17(raw[i].first) << ',' << stkg::detail::format17(raw[i].second) << ','
            << stkg::detail::format17(cov[static_cast<Eigen::Index>(i)]) << '\n';
    }
    write_text(a.out, out.str());
    std::cout << json{{"points", raw.size()}, {"p", basis.p()}, {"out", a.out},
                      {"config", {{"theta0", a.theta0}, {"harmonics", a.harmonics}, {"theta_value", a.theta_value},
                                  {"at", a.at}, {"s_grid", a.s_grid}, {"t_grid", a.t_grid}}}}
                     .dump()
              << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Streaming spatio-temporal kriging"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset and its train/test split");
    simulate->add_option("--preset", sim.preset, "Experiment preset")
        ->check(CLI::IsMember({"wave", "seasonal", "sst-shape", "cru-shape"}));
    simulate->add_option("--process", sim.process, "Process kind")->check(CLI::IsMember({"wave", "seasonal"}));
    simulate->add_option("--vs", sim.vs, "Wave speed");
    simulate->add_option("--lambda-s", sim.lambda_s, "Wavelength");
    simulate->add_option("--sigma", sim.sigma, "Noise standard deviation");
    simulate->add_option("--n-train", sim.n_train, "Training points");
    simulate->add_option("--seed", sim.seed, "Random seed");
    simulate->add_option("--out-dir", sim.out_dir, "Output directory")->required();

    FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit", "Stream a training CSV through the learner");
    fit_cmd->add_option("--train", fit.train, "Training CSV")->required();
    fit_cmd->add_option("--out", fit.out, "Snapshot path (basis written to <out>.basis)")->required();
    fit.basis.add(fit_cmd);
    fit.solver.add(fit_cmd);
    fit_cmd->add_flag("--converge", fit.solver.converge, "Sweep to convergence after streaming");

    PredictArgs pred;
    auto* predict = app.add_subcommand("predict", "Evaluate a fitted model");
    predict->add_option("--model", pred.model, "Snapshot path")->required();
    predict->add_option("--points", pred.points, "CSV of query points (dataset format; y ignored)");
    predict->add_option("--at", pred.at, "Fixed location s1[,s2,...]")->delimiter(',');
    predict->add_option("--s-grid", pred.s_grid, "Spatial grid lo:step:hi (d = 1)");
    predict->add_option("--t-grid", pred.t_grid, "Time grid lo:step:hi");
    predict->add_option("--out", pred.out, "Output CSV")->required();

    EvalArgs ev;
    auto* eval = app.add_subcommand("eval", "Monte-Carlo evaluation of a synthetic preset");
    eval->add_option("--preset", ev.preset, "Experiment preset")
        ->required()
        ->check(CLI::IsMember({"wave", "seasonal"}));
    eval->add_option("--replicates", ev.replicates, "Monte-Carlo replicates");
    eval->add_option("--seed", ev.seed, "Base seed; replicate r uses seed + r");
    eval->add_option("--threads", ev.threads, "Worker threads (0: all cores)");
    eval->add_option("--bins", ev.bins, "Histogram bins (0: Freedman-Diaconis)");
    eval->add_flag("--stream-only", ev.stream_only, "Skip the final sweeps to convergence");
    eval->add_option("--out-dir", ev.out_dir, "Report directory")->required();
    ev.solver.add(eval);

    CovMapArgs cm;
    auto* cov = app.add_subcommand("cov-map", "Covariance of one point against a space-time grid");
    cm.basis.add(cov);
    cov->add_option("--s-range", cm.s_range, "Spatial range lo,hi")->delimiter(',');
    cov->add_option("--t-range", cm.t_range, "Time range lo,hi")->delimiter(',');
    cov->add_option("--theta0", cm.theta0, "Nugget variance");
    cov->add_option("--harmonic", cm.harmonics, "Temporal harmonic(s) given weight")->delimiter(',')->required();
    cov->add_option("--theta-value", cm.theta_value, "Weight of every component in the chosen harmonics");
    cov->add_option("--at", cm.at, "Reference point s,t")->delimiter(',')->required();
    cov->add_option("--s-grid", cm.s_grid, "Spatial grid lo:step:hi")->required();
    cov->add_option("--t-grid", cm.t_grid, "Time grid lo:step:hi")->required();
    cov->add_option("--out", cm.out, "Output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        if (code == 0) return 0;
        std::cerr << app.help();
        return kExitConfig;
    }

    try {
        if (*simulate) return run_simulate(sim);
        if (*fit_cmd) return run_fit(fit);
        if (*predict) return run_predict(pred);
        if (*eval) return run_eval(ev);
        if (*cov) return run_cov_map(cm);
    } catch (const stkg::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitConfig;
}
