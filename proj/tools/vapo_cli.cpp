// vapo: train, sample, interpolate, eval and verify from the command line.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vapo/checkpoint.hpp"
#include "vapo/datasets.hpp"
#include "vapo/eval.hpp"
#include "vapo/ode_sampler.hpp"
#include "vapo/trainer.hpp"
#include "vapo/verify.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string crc_hex(const std::string& bytes) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08x", vapo::binary::crc32(bytes));
    return buf;
}

std::string file_crc(const fs::path& p) { return crc_hex(vapo::binary::read_file(p.string())); }

void write_text(const fs::path& p, const std::string& s) { vapo::binary::write_file(p.string(), s); }

json config_json(const vapo::TrainConfig& c) {
    json j;
    j["batch_size"] = c.batch_size;
    j["steps"] = c.steps;
    j["lr"] = c.lr;
    j["optimizer"] = vapo::to_string(c.optimizer);
    j["lambda"] = c.lambda;
    j["eps_sharp"] = c.eps_sharp;
    j["omega"] = c.omega;
    j["sigma"] = c.sigma;
    j["seed"] = c.seed;
    j["checkpoint_every"] = c.checkpoint_every;
    j["grad_clip"] = c.grad_clip ? json(*c.grad_clip) : json(nullptr);
    j["hidden"] = c.hidden;
    j["activation"] = vapo::to_string(c.activation);
    j["weight_decay"] = c.weight_decay;
    j["lr_schedule"] = vapo::to_string(c.lr_schedule);
    return j;
}

json standardization_json(const std::optional<vapo::Standardization>& s) {
    if (!s) return nullptr;
    return json{{"mean", s->mean}, {"scale", s->scale}};
}

std::optional<vapo::Standardization> standardization_from(const json& j) {
    if (j.is_null()) return std::nullopt;
    return vapo::Standardization{j.at("mean").get<vapo::Vec>(), j.at("scale").get<vapo::Vec>()};
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir.string());
    const fs::path probe = dir / ".vapo_write_probe";
    {
        std::ofstream f(probe);
        if (!f) throw std::runtime_error("output directory is not writable: " + dir.string());
    }
    fs::remove(probe, ec);
}

void ensure_parent(const fs::path& file) {
    if (file.has_parent_path()) ensure_dir(file.parent_path());
}

fs::path manifest_for(const fs::path& artifact) { return fs::path(artifact.string() + ".manifest.json"); }

/// Training context stored next to a checkpoint: the prior scale and the data
/// standardization are not part of the checkpoint format.
struct ModelContext {
    vapo::PotentialModel model;
    double omega = 1.0;
    std::optional<vapo::Standardization> standardization;
    json train_manifest;  // null when absent
};

ModelContext load_model(const std::string& ckpt) {
    ModelContext ctx{vapo::load_checkpoint(ckpt), 1.0, std::nullopt, nullptr};
    const fs::path m = fs::path(ckpt).parent_path() / "manifest.json";
    if (fs::exists(m)) {
        ctx.train_manifest = json::parse(vapo::binary::read_file(m.string()));
        ctx.omega = ctx.train_manifest.at("config").at("omega").get<double>();
        ctx.standardization = standardization_from(ctx.train_manifest.at("dataset").at("standardization"));
    }
    return ctx;
}

vapo::HomotopyParams prior_params(const ModelContext& ctx) {
    vapo::HomotopyParams p;
    p.omega = ctx.omega;
    p.dim = ctx.model.dim();
    return p;
}

json model_json(const ModelContext& ctx, const std::string& ckpt) {
    return json{{"checkpoint", fs::path(ckpt).filename().string()},
                {"checkpoint_crc32", file_crc(ckpt)},
                {"layer_sizes", ctx.model.layer_sizes()},
                {"activation", vapo::to_string(ctx.model.activation())},
                {"omega", ctx.omega},
                {"standardization", standardization_json(ctx.standardization)}};
}

void write_points(const std::vector<vapo::Vec>& pts, std::size_t dim, const fs::path& out) {
    if (out.extension() == ".csv") {
        vapo::write_csv(pts, dim, out.string());
    } else {
        vapo::Dataset ds;
        ds.dim = dim;
        ds.points = vapo::Matrix::from_rows(pts);
        vapo::save_matrix(ds, out.string());
    }
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    std::string data, toy, config, out;
    std::size_t toy_n = 20'000;
    std::uint64_t data_seed = 0;
    bool no_standardize = false;
    bool resume = false;
};

vapo::Dataset load_training_data(const TrainArgs& a) {
    vapo::Dataset ds = a.toy.empty() ? vapo::load_dataset(a.data) : vapo::make_toy(a.toy, a.toy_n, a.data_seed);
    return a.no_standardize ? ds : vapo::standardize(ds);
}

json dataset_json(const TrainArgs& a, const vapo::Dataset& ds) {
    json j;
    if (a.toy.empty()) {
        j["source"] = "file";
        j["path"] = a.data;
        j["crc32"] = file_crc(a.data);
    } else {
        j["source"] = "toy";
        j["name"] = a.toy;
        j["data_seed"] = a.data_seed;
    }
    j["n"] = ds.size();
    j["dim"] = ds.dim;
    j["standardization"] = standardization_json(ds.standardization);
    return j;
}

int cmd_train(const TrainArgs& a) {
    if (a.data.empty() == a.toy.empty()) throw UsageError("train: exactly one of --data or --toy is required");
    vapo::TrainConfig cfg;
    try {
        cfg = a.config.empty() ? vapo::TrainConfig{} : vapo::parse_train_config(vapo::binary::read_file(a.config));
    } catch (const vapo::DomainError& e) {
        throw UsageError(e.what());
    }
    if (!a.toy.empty() && a.toy != "ring8" && a.toy != "moons" && a.toy != "checkerboard") {
        throw UsageError("train: unknown toy '" + a.toy + "' (expected ring8|moons|checkerboard)");
    }

    const vapo::Dataset data = load_training_data(a);
    const fs::path out(a.out);
    const fs::path manifest_path = out / "manifest.json", state_path = out / "state.vaps",
                   log_path = out / "train_log.csv";
    const json dataset = dataset_json(a, data);

    vapo::TrainState state;
    if (a.resume) {
        if (!fs::exists(manifest_path) || !fs::exists(state_path)) {
            throw std::runtime_error("train: nothing to resume in " + out.string());
        }
        const json prev = json::parse(vapo::binary::read_file(manifest_path.string()));
        const auto prev_seed = prev.at("seed").get<std::uint64_t>();
        if (prev_seed != cfg.seed) {
            throw std::runtime_error("train: refusing to resume, manifest seed " + std::to_string(prev_seed) +
                                     " differs from config seed " + std::to_string(cfg.seed));
        }
        if (prev.at("dataset") != dataset) throw std::runtime_error("train: refusing to resume, dataset differs");
        state = vapo::decode_train_state(vapo::binary::read_file(state_path.string()));
        if (state.model.layer_sizes() != cfg.layer_sizes(data.dim) || state.model.activation() != cfg.activation) {
            throw std::runtime_error("train: refusing to resume, architecture differs");
        }
        if (state.step > cfg.steps) throw std::runtime_error("train: state is already past the configured steps");
    } else {
        ensure_dir(out);
        vapo::RngStream init_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
        state = vapo::start_training(vapo::init(cfg.layer_sizes(data.dim), cfg.activation, init_rng), data.size(),
                                     cfg.seed);
    }

    // Log rows past the restored step belong to an interrupted run.
    std::string log_text = vapo::log_csv_header() + "\n";
    if (a.resume && fs::exists(log_path)) {
        std::istringstream in(vapo::binary::read_file(log_path.string()));
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            if (!line.empty() && std::stoull(line.substr(0, line.find(','))) <= state.step) log_text += line + "\n";
        }
    }
    std::ofstream log(log_path, std::ios::binary | std::ios::trunc);
    if (!log) throw std::runtime_error("cannot write " + log_path.string());
    log << log_text;

    std::vector<std::string> checkpoints;
    auto write_manifest = [&](const vapo::TrainState& s) {
        json m;
        m["command"] = "train";
        m["seed"] = cfg.seed;
        m["config"] = config_json(cfg);
        m["dataset"] = dataset;
        m["model"] = {{"layer_sizes", s.model.layer_sizes()}, {"activation", vapo::to_string(s.model.activation())}};
        m["completed_steps"] = s.step;
        json arts = json::object();
        for (const auto& c : checkpoints) arts[c] = file_crc(out / c);
        arts["state.vaps"] = file_crc(state_path);
        m["artifacts"] = arts;
        m["nondeterministic"] = {{"train_log.csv", "wall_ms column"}};
        m["final_checkpoint"] = checkpoints.empty() ? json(nullptr) : json(checkpoints.back());
        write_text(manifest_path, m.dump(2) + "\n");
    };
    auto save = [&](const vapo::TrainState& s) {
        const std::string name = "step_" + std::to_string(s.step) + ".vapo";
        vapo::save_checkpoint(s.model, (out / name).string());
        if (checkpoints.empty() || checkpoints.back() != name) checkpoints.push_back(name);
        write_text(state_path, vapo::encode_train_state(s));
        write_manifest(s);
    };
    if (a.resume) {
        for (const auto& entry : fs::directory_iterator(out)) {
            const std::string n = entry.path().filename().string();
            if (n.rfind("step_", 0) == 0 && entry.path().extension() == ".vapo") {
                const auto k = std::stoull(n.substr(5));
                if (k <= state.step) checkpoints.push_back(n);
            }
        }
        std::sort(checkpoints.begin(), checkpoints.end(), [](const std::string& x, const std::string& y) {
            return std::stoull(x.substr(5)) < std::stoull(y.substr(5));
        });
    }
    if (state.step == 0) save(state);

    vapo::TrainHooks hooks;
    hooks.on_log = [&](const vapo::TrainLogRecord& r) {
        log << vapo::log_csv_row(r) << "\n";
        if (r.step % 1000 == 0) {
            std::fprintf(stderr, "step %zu  loss %.6g  grad_norm %.4g\n", r.step, r.loss.total, r.grad_norm);
        }
    };
    hooks.on_checkpoint = save;
    try {
        vapo::continue_training(state, data, cfg, hooks);
    } catch (const vapo::NumericalError&) {
        log.flush();
        save(state);  // last good parameters
        throw;
    }
    log.flush();
    write_manifest(state);
    std::fprintf(stderr, "trained %zu steps -> %s\n", state.step, (out / checkpoints.back()).string().c_str());
    return 0;
}

// ---------------------------------------------------------------- sample

struct SampleArgs {
    std::string ckpt, out;
    std::size_t n = 1000;
    double t_end = 1.625;
    std::uint64_t seed = 0;
};

int cmd_sample(const SampleArgs& a) {
    const fs::path out(a.out);
    if (a.n == 0 && out.extension() != ".csv") throw UsageError("sample: --n 0 is only supported for CSV output");
    vapo::OdeConfig ode;
    ode.t_end = a.t_end;
    try {
        ode.validate();
    } catch (const vapo::DomainError& e) {
        throw UsageError(e.what());
    }
    const ModelContext ctx = load_model(a.ckpt);
    ensure_parent(out);

    vapo::RngStream rng(a.seed);
    auto pts = vapo::sample(ctx.model, a.n, prior_params(ctx), ode, rng);
    if (ctx.standardization) vapo::destandardize(pts, *ctx.standardization);
    write_points(pts, ctx.model.dim(), out);

    json m;
    m["command"] = "sample";
    m["seed"] = a.seed;
    m["n"] = a.n;
    m["t_end"] = a.t_end;
    m["ode"] = {{"method", vapo::to_string(ode.method)}, {"rtol", ode.rtol}, {"atol", ode.atol},
                {"max_steps", ode.max_steps}};
    m["model"] = model_json(ctx, a.ckpt);
    m["artifacts"] = {{out.filename().string(), file_crc(out)}};
    write_text(manifest_for(out), m.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------- interpolate

struct InterpArgs {
    std::string ckpt, out;
    std::size_t pairs = 4, points = 8;
    double t_end = 1.625;
    std::uint64_t seed = 0;
};

int cmd_interpolate(const InterpArgs& a) {
    if (a.pairs == 0) throw UsageError("interpolate: --pairs must be >= 1");
    if (a.points < 2) throw UsageError("interpolate: --points must be >= 2");
    vapo::OdeConfig ode;
    ode.t_end = a.t_end;
    try {
        ode.validate();
    } catch (const vapo::DomainError& e) {
        throw UsageError(e.what());
    }
    const fs::path out(a.out);
    const ModelContext ctx = load_model(a.ckpt);
    ensure_parent(out);

    // Pair k joins latents 2k and 2k+1 of the prior stream `sample` draws from.
    vapo::RngStream rng(a.seed);
    const auto latents = vapo::draw_prior(2 * a.pairs, prior_params(ctx), rng);
    const std::size_t dim = ctx.model.dim();
    std::vector<vapo::Vec> rows;
    std::string csv = "pair,step";
    for (std::size_t d = 0; d < dim; ++d) csv += ",x" + std::to_string(d);
    csv += "\n";
    for (std::size_t k = 0; k < a.pairs; ++k) {
        auto path = vapo::interpolate(ctx.model, latents[2 * k], latents[2 * k + 1], a.points, ode);
        if (ctx.standardization) vapo::destandardize(path, *ctx.standardization);
        for (std::size_t j = 0; j < path.size(); ++j) {
            csv += std::to_string(k) + "," + std::to_string(j);
            for (double v : path[j]) {
                char buf[32];
                std::snprintf(buf, sizeof buf, ",%.9g", v);
                csv += buf;
            }
            csv += "\n";
            rows.push_back(std::move(path[j]));
        }
    }
    if (out.extension() == ".csv") write_text(out, csv);
    else write_points(rows, dim, out);

    json m;
    m["command"] = "interpolate";
    m["seed"] = a.seed;
    m["pairs"] = a.pairs;
    m["points"] = a.points;
    m["t_end"] = a.t_end;
    m["layout"] = "row = pair * points + step";
    m["model"] = model_json(ctx, a.ckpt);
    m["artifacts"] = {{out.filename().string(), file_crc(out)}};
    write_text(manifest_for(out), m.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    std::string ckpt, data, out;
    std::size_t n = 2000;
    std::size_t permutations = 200;
    std::size_t bins = 50;
    double t_end = 1.625;
    std::uint64_t seed = 0;
};

std::string histogram_csv(const vapo::Histogram& h) {
    std::string s = "bin_left,bin_right,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%zu\n", h.edges[i], h.edges[i + 1], h.counts[i]);
        s += buf;
    }
    return s;
}

int cmd_eval(const EvalArgs& a) {
    if (a.n < 2) throw UsageError("eval: --n must be >= 2");
    if (a.bins == 0) throw UsageError("eval: --bins must be >= 1");
    const ModelContext ctx = load_model(a.ckpt);
    const vapo::Dataset test = vapo::load_dataset(a.data);
    const std::size_t dim = ctx.model.dim();
    if (test.dim != dim) {
        throw vapo::DimensionError("eval: data has dimension " + std::to_string(test.dim) + " but the model expects " +
                                   std::to_string(dim));
    }
    const fs::path out(a.out);
    ensure_dir(out);

    vapo::OdeConfig ode;
    ode.t_end = a.t_end;
    vapo::RngStream rng(a.seed);
    auto samples = vapo::sample(ctx.model, a.n, prior_params(ctx), ode, rng);
    auto samples_model = samples;  // model coordinates
    if (ctx.standardization) vapo::destandardize(samples, *ctx.standardization);
    const auto test_rows = test.points.to_rows();
    auto test_model = test_rows;
    if (ctx.standardization) vapo::apply_standardization(test_model, *ctx.standardization);

    const std::vector<double> bws{0.25, 0.5, 1.0, 2.0};
    const std::vector<vapo::Vec> ref(test_rows.begin(),
                                     test_rows.begin() + static_cast<std::ptrdiff_t>(std::min(a.n, test_rows.size())));
    vapo::MetricReport rep;
    rep.n_samples = a.n;
    const auto perm = vapo::mmd_permutation_test(samples, ref, bws, a.permutations, 0.95, rng);
    rep.mmd_rbf_raw = perm.statistic;
    rep.mmd_rbf = std::max(0.0, perm.statistic);

    std::string toy;
    if (!ctx.train_manifest.is_null() && ctx.train_manifest.at("dataset").at("source") == "toy") {
        toy = ctx.train_manifest.at("dataset").at("name").get<std::string>();
    }
    // equal set sizes: the smoothed KLD is biased upward when they differ
    if (dim == 2) rep.grid_kld = vapo::grid_kld(samples, ref, vapo::GridSpec{});
    if (toy == "ring8") rep.mode_coverage = vapo::mode_coverage(samples, vapo::ring_centers(), 0.3);
    if (toy == "checkerboard") rep.mode_coverage = vapo::mode_coverage(samples, vapo::checkerboard_centers(), 0.5);

    // Energies on samples and held-out data, shared bin edges.
    const auto [h_samples, h_data] = vapo::paired_energy_histograms(ctx.model, samples_model, test_model, a.bins);
    write_text(out / "energy_hist_samples.csv", histogram_csv(h_samples));
    write_text(out / "energy_hist_data.csv", histogram_csv(h_data));

    // OOD: held-out data against uniform noise on [-4, 4]^D (data coordinates).
    std::vector<vapo::Vec> noise(test_rows.size(), vapo::Vec(dim));
    for (auto& p : noise)
        for (double& v : p) v = -4.0 + 8.0 * rng.uniform();
    if (ctx.standardization) vapo::apply_standardization(noise, *ctx.standardization);
    const double auroc = vapo::ood_auroc(ctx.model, test_model, noise);

    // Memorization audit against the training set when it can be rebuilt.
    std::optional<double> memorized;
    std::string nn_csv = "sample,neighbor,distance\n";
    if (!ctx.train_manifest.is_null()) {
        const json& ds = ctx.train_manifest.at("dataset");
        vapo::Dataset train = ds.at("source") == "toy"
                                  ? vapo::make_toy(toy, ds.at("n").get<std::size_t>(), ds.at("data_seed").get<std::uint64_t>())
                                  : vapo::load_dataset(ds.at("path").get<std::string>());
        const auto nn = vapo::nearest_neighbors(samples, train.points, 1);
        std::size_t close = 0;
        for (std::size_t i = 0; i < nn.size(); ++i) {
            if (nn[i].distances[0] < 1e-3) ++close;
            char buf[96];
            std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g\n", i, nn[i].indices[0], nn[i].distances[0]);
            nn_csv += buf;
        }
        memorized = static_cast<double>(close) / static_cast<double>(nn.size());
        write_text(out / "nn_audit.csv", nn_csv);
    }

    json r;
    r["n_samples"] = rep.n_samples;
    r["mmd_rbf_raw"] = rep.mmd_rbf_raw;
    r["mmd_rbf"] = rep.mmd_rbf;
    r["mmd_bandwidths"] = bws;
    r["mmd_null_q95"] = perm.threshold;
    r["mmd_p_value"] = perm.p_value;
    r["grid_kld"] = rep.grid_kld ? json(*rep.grid_kld) : json(nullptr);
    r["mode_coverage"] = rep.mode_coverage ? json(*rep.mode_coverage) : json(nullptr);
    r["energy_histogram_overlap"] = vapo::histogram_overlap(h_samples, h_data);
    r["ood_auroc_uniform_box4"] = auroc;
    r["memorized_fraction"] = memorized ? json(*memorized) : json(nullptr);
    r["metric_note"] = "FID is replaced by unbiased RBF MMD^2, 2-D grid KLD(data||samples) and mode coverage";
    if (!ctx.train_manifest.is_null()) {
        const json& c = ctx.train_manifest.at("config");
        r["lambda"] = c.at("lambda");
        r["eps_sharp"] = c.at("eps_sharp");
        r["omega"] = c.at("omega");
        r["sigma"] = c.at("sigma");
        r["train_config"] = c;
    } else {
        r["lambda"] = nullptr;
        r["eps_sharp"] = nullptr;
        r["omega"] = ctx.omega;
        r["sigma"] = nullptr;
    }
    r["t_end"] = a.t_end;
    r["seed"] = a.seed;
    r["model"] = model_json(ctx, a.ckpt);
    r["data"] = {{"file", fs::path(a.data).filename().string()}, {"n", test.size()}, {"crc32", file_crc(a.data)}};
    write_text(out / "report.json", r.dump(2) + "\n");

    json m;
    m["command"] = "eval";
    m["seed"] = a.seed;
    m["n"] = a.n;
    m["permutations"] = a.permutations;
    m["bins"] = a.bins;
    m["t_end"] = a.t_end;
    json arts = json::object();
    for (const char* f : {"report.json", "energy_hist_samples.csv", "energy_hist_data.csv", "nn_audit.csv"}) {
        if (fs::exists(out / f)) arts[f] = file_crc(out / f);
    }
    m["artifacts"] = arts;
    write_text(out / "manifest.json", m.dump(2) + "\n");
    std::cout << r.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------- verify

int cmd_verify(const std::string& suite) {
    if (suite != "homotopy" && suite != "gradients" && suite != "ode" && suite != "all") {
        throw UsageError("verify: unknown suite '" + suite + "'");
    }
    const auto report = vapo::verify::run_suite(suite);
    std::size_t failed = 0;
    for (const auto& c : report) {
        std::cout << c.line() << "\n";
        if (!c.passed) ++failed;
    }
    std::cout << report.size() - failed << "/" << report.size() << " checks passed\n";
    return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vapo: energy-based generative modelling with potential flows"};
    app.require_subcommand(1);

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "train a potential network");
    train->add_option("--data", ta.data, "training data (.csv or binary matrix)");
    train->add_option("--toy", ta.toy, "toy dataset: ring8|moons|checkerboard");
    train->add_option("--toy-n", ta.toy_n, "toy dataset size")->capture_default_str();
    train->add_option("--data-seed", ta.data_seed, "toy dataset seed")->capture_default_str();
    train->add_option("--config", ta.config, "key = value config file");
    train->add_option("--out", ta.out, "output directory")->required();
    train->add_flag("--no-standardize", ta.no_standardize, "train on raw coordinates");
    train->add_flag("--resume", ta.resume, "continue from the state in --out");

    SampleArgs sa;
    auto* samp = app.add_subcommand("sample", "draw samples by integrating the potential flow");
    samp->add_option("--ckpt", sa.ckpt, "checkpoint")->required();
    samp->add_option("--n", sa.n, "number of samples")->capture_default_str();
    samp->add_option("--t-end", sa.t_end, "terminal time")->capture_default_str();
    samp->add_option("--out", sa.out, "output (.csv or binary matrix)")->required();
    samp->add_option("--seed", sa.seed, "prior seed")->capture_default_str();

    InterpArgs ia;
    auto* interp = app.add_subcommand("interpolate", "spherical interpolation between prior draws");
    interp->add_option("--ckpt", ia.ckpt, "checkpoint")->required();
    interp->add_option("--pairs", ia.pairs, "number of pairs")->capture_default_str();
    interp->add_option("--points", ia.points, "points per pair")->capture_default_str();
    interp->add_option("--out", ia.out, "output (.csv or binary matrix)")->required();
    interp->add_option("--t-end", ia.t_end, "terminal time")->capture_default_str();
    interp->add_option("--seed", ia.seed, "prior seed")->capture_default_str();

    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "sample-quality metrics, energy histograms and audits");
    ev->add_option("--ckpt", ea.ckpt, "checkpoint")->required();
    ev->add_option("--data", ea.data, "held-out data")->required();
    ev->add_option("--out", ea.out, "output directory")->required();
    ev->add_option("--n", ea.n, "number of samples")->capture_default_str();
    ev->add_option("--permutations", ea.permutations, "MMD permutation count")->capture_default_str();
    ev->add_option("--bins", ea.bins, "energy histogram bins")->capture_default_str();
    ev->add_option("--t-end", ea.t_end, "terminal time")->capture_default_str();
    ev->add_option("--seed", ea.seed, "sampling seed")->capture_default_str();

    std::string suite = "all";
    auto* ver = app.add_subcommand("verify", "run the oracle suites");
    ver->add_option("--suite", suite, "homotopy|gradients|ode|all")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*train) return cmd_train(ta);
        if (*samp) return cmd_sample(sa);
        if (*interp) return cmd_interpolate(ia);
        if (*ev) return cmd_eval(ea);
        if (*ver) return cmd_verify(suite);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
