#pragma once

// Minibatch training of the potential network on the energy loss.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vapo/binary_io.hpp"
#include "vapo/checkpoint.hpp"
#include "vapo/datasets.hpp"
#include "vapo/homotopy.hpp"
#include "vapo/loss.hpp"
#include "vapo/optimizer.hpp"
#include "vapo/potential_net.hpp"
#include "vapo/rng.hpp"

namespace vapo {

enum class LrSchedule { constant, cosine };

inline std::string to_string(LrSchedule s) { return s == LrSchedule::cosine ? "cosine" : "constant"; }

inline LrSchedule lr_schedule_from_string(const std::string& s) {
    if (s == "constant") return LrSchedule::constant;
    if (s == "cosine") return LrSchedule::cosine;
    throw DomainError("unknown lr_schedule '" + s + "' (expected constant|cosine)");
}

struct TrainConfig {
    std::size_t batch_size = 256;
    std::size_t steps = 10'000;
    double lr = 1e-3;
    OptimizerKind optimizer = OptimizerKind::adam;
    double lambda = 1e-3;
    double eps_sharp = 1e-4;
    double omega = 1.0;
    double sigma = 0.01;
    std::uint64_t seed = 0;
    std::size_t checkpoint_every = 1000;
    std::optional<double> grad_clip;
    // Model and optimizer extras.
    std::vector<std::size_t> hidden{64, 64, 64};
    Activation activation = Activation::gelu;
    double weight_decay = 0.0;
    LrSchedule lr_schedule = LrSchedule::constant;

    HomotopyParams homotopy(std::size_t dim) const { return {omega, sigma, eps_sharp, dim}; }

    OptimizerSettings optimizer_settings() const { return {optimizer, lr, grad_clip, weight_decay}; }

    /// Learning rate for the update that completes step `step` (0-based).
    double lr_at(std::size_t step) const {
        if (lr_schedule == LrSchedule::constant) return lr;
        const double pi = 3.14159265358979323846;
        return 0.5 * lr * (1.0 + std::cos(pi * static_cast<double>(step) / static_cast<double>(steps)));
    }

    void validate() const {
        if (batch_size == 0) throw DomainError("batch_size must be > 0");
        if (!(lr > 0.0)) throw DomainError("lr must be > 0");
        if (!(lambda > 0.0)) throw DomainError("lambda must be > 0");
        if (checkpoint_every == 0) throw DomainError("checkpoint_every must be > 0");
        if (grad_clip && !(*grad_clip > 0.0)) throw DomainError("grad_clip must be > 0");
        if (!(weight_decay >= 0.0)) throw DomainError("weight_decay must be >= 0");
        if (hidden.empty()) throw DomainError("hidden must list at least one layer width");
        for (std::size_t h : hidden) {
            if (h == 0) throw DomainError("hidden layer widths must be > 0");
        }
        homotopy(1).validate();
    }

    std::vector<std::size_t> layer_sizes(std::size_t dim) const {
        std::vector<std::size_t> s{dim};
        s.insert(s.end(), hidden.begin(), hidden.end());
        s.push_back(1);
        return s;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        T out;
        if constexpr (std::is_floating_point_v<T>) {
            out = static_cast<T>(std::stod(v, &used));
        } else {
            if (!v.empty() && v[0] == '-') throw DomainError("");
            out = static_cast<T>(std::stoull(v, &used));
        }
        if (used != v.size()) throw DomainError("");
        return out;
    } catch (...) {
        throw DomainError("config: bad value '" + v + "' for key '" + key + "'");
    }
}

inline std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace detail

/// Parses `key = value` lines. Blank lines and lines starting with '#' are
/// ignored; unknown or repeated keys are errors.
inline TrainConfig parse_train_config(const std::string& text, TrainConfig cfg = {}) {
    std::istringstream in(text);
    std::string line;
    std::map<std::string, bool> seen;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw DomainError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(t.substr(0, eq));
        const std::string val = detail::trim(t.substr(eq + 1));
        if (seen[key]) throw DomainError("config: duplicate key '" + key + "'");
        seen[key] = true;
        using detail::parse_number;
        if (key == "batch_size") cfg.batch_size = parse_number<std::size_t>(key, val);
        else if (key == "steps") cfg.steps = parse_number<std::size_t>(key, val);
        else if (key == "lr") cfg.lr = parse_number<double>(key, val);
        else if (key == "optimizer") cfg.optimizer = optimizer_from_string(val);
        else if (key == "lambda") cfg.lambda = parse_number<double>(key, val);
        else if (key == "eps_sharp") cfg.eps_sharp = parse_number<double>(key, val);
        else if (key == "omega") cfg.omega = parse_number<double>(key, val);
        else if (key == "sigma") cfg.sigma = parse_number<double>(key, val);
        else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, val);
        else if (key == "checkpoint_every") cfg.checkpoint_every = parse_number<std::size_t>(key, val);
        else if (key == "grad_clip") {
            if (val == "none") cfg.grad_clip.reset();
            else cfg.grad_clip = parse_number<double>(key, val);
        } else if (key == "hidden") {
            cfg.hidden.clear();
            std::istringstream hs(val);
            std::string item;
            while (std::getline(hs, item, ',')) cfg.hidden.push_back(parse_number<std::size_t>(key, detail::trim(item)));
        } else if (key == "activation") cfg.activation = activation_from_string(val);
        else if (key == "weight_decay") cfg.weight_decay = parse_number<double>(key, val);
        else if (key == "lr_schedule") cfg.lr_schedule = lr_schedule_from_string(val);
        else throw DomainError("config: unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

/// Inverse of parse_train_config; every field is written.
inline std::string format_train_config(const TrainConfig& c) {
    using detail::format_double;
    std::ostringstream os;
    os << "batch_size = " << c.batch_size << "\n"
       << "steps = " << c.steps << "\n"
       << "lr = " << format_double(c.lr) << "\n"
       << "optimizer = " << to_string(c.optimizer) << "\n"
       << "lambda = " << format_double(c.lambda) << "\n"
       << "eps_sharp = " << format_double(c.eps_sharp) << "\n"
       << "omega = " << format_double(c.omega) << "\n"
       << "sigma = " << format_double(c.sigma) << "\n"
       << "seed = " << c.seed << "\n"
       << "checkpoint_every = " << c.checkpoint_every << "\n"
       << "grad_clip = " << (c.grad_clip ? format_double(*c.grad_clip) : "none") << "\n"
       << "hidden = ";
    for (std::size_t i = 0; i < c.hidden.size(); ++i) os << (i ? "," : "") << c.hidden[i];
    os << "\n"
       << "activation = " << to_string(c.activation) << "\n"
       << "weight_decay = " << format_double(c.weight_decay) << "\n"
       << "lr_schedule = " << to_string(c.lr_schedule) << "\n";
    return os.str();
}

struct TrainLogRecord {
    std::size_t step = 0;
    LossBreakdown loss;
    double grad_norm = 0.0;
    double wall_ms = 0.0;
};

inline std::string log_csv_header() { return "step,cov,gradsq,l2,total,grad_norm,wall_ms"; }

inline std::string log_csv_row(const TrainLogRecord& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.3f", r.step, r.loss.cov_term,
                  r.loss.gradsq_term, r.loss.l2_term, r.loss.total, r.grad_norm, r.wall_ms);
    return buf;
}

/// Everything needed to continue a run bit-exactly.
struct TrainState {
    PotentialModel model;
    OptimizerState opt;
    RngStream rng;
    std::vector<std::size_t> order;  ///< current epoch permutation
    std::size_t cursor = 0;          ///< next position in `order`
    std::size_t step = 0;            ///< completed steps

    friend bool operator==(const TrainState&, const TrainState&) = default;
};

inline TrainState start_training(PotentialModel model, std::size_t n_data, std::uint64_t seed) {
    TrainState s{std::move(model), {}, RngStream(seed), {}, 0, 0};
    s.order.resize(n_data);
    std::iota(s.order.begin(), s.order.end(), std::size_t{0});
    s.cursor = n_data;  // forces a shuffle on the first draw
    return s;
}

inline std::string encode_train_state(const TrainState& s) {
    std::string out = "VAPS";
    binary::put<std::uint32_t>(out, 1);
    binary::put<std::uint64_t>(out, s.step);
    binary::put<std::uint64_t>(out, s.cursor);
    binary::put<std::uint64_t>(out, s.order.size());
    for (std::size_t i : s.order) binary::put<std::uint64_t>(out, i);
    binary::put<std::uint64_t>(out, s.opt.t);
    binary::put<std::uint64_t>(out, s.opt.m.size());
    for (double v : s.opt.m) binary::put(out, v);
    binary::put<std::uint64_t>(out, s.opt.v.size());
    for (double v : s.opt.v) binary::put(out, v);
    std::ostringstream rs;
    rs << s.rng;
    binary::put<std::uint64_t>(out, rs.str().size());
    out += rs.str();
    const std::string ck = encode_checkpoint(s.model);
    binary::put<std::uint64_t>(out, ck.size());
    out += ck;
    binary::put<std::uint32_t>(out, binary::crc32(out));
    return out;
}

inline TrainState decode_train_state(const std::string& bytes) {
    if (bytes.size() < 8) throw FormatError("train state: truncated file");
    binary::Reader r(bytes, "train state");
    if (r.take(4) != "VAPS") throw FormatError("train state: bad magic");
    if (r.get<std::uint32_t>() != 1) throw FormatError("train state: unsupported version");
    TrainState s;
    s.step = r.get<std::uint64_t>();
    s.cursor = r.get<std::uint64_t>();
    auto count = [&] {
        const auto n = r.get<std::uint64_t>();
        if (n > r.remaining()) throw FormatError("train state: truncated file");
        return static_cast<std::size_t>(n);
    };
    s.order.resize(count());
    for (auto& i : s.order) i = r.get<std::uint64_t>();
    s.opt.t = r.get<std::uint64_t>();
    s.opt.m.resize(count());
    for (double& v : s.opt.m) v = r.get<double>();
    s.opt.v.resize(count());
    for (double& v : s.opt.v) v = r.get<double>();
    std::istringstream rs(r.take(count()));
    rs >> s.rng;
    if (!rs) throw FormatError("train state: bad RNG state");
    s.model = decode_checkpoint(r.take(count()));
    const std::uint32_t crc = binary::crc32(reinterpret_cast<const unsigned char*>(bytes.data()), r.pos());
    if (r.get<std::uint32_t>() != crc) throw FormatError("train state: CRC mismatch");
    return s;
}

struct TrainHooks {
    std::function<void(const TrainLogRecord&)> on_log;
    /// Called after steps that are multiples of checkpoint_every, and after the last step.
    std::function<void(const TrainState&)> on_checkpoint;
};

namespace detail {

inline std::vector<Vec> next_batch(TrainState& s, const Dataset& data, std::size_t batch_size) {
    std::vector<Vec> batch;
    batch.reserve(batch_size);
    while (batch.size() < batch_size) {
        if (s.cursor >= s.order.size()) {
            std::shuffle(s.order.begin(), s.order.end(), s.rng.engine());
            s.cursor = 0;
        }
        const auto row = data.points.row(s.order[s.cursor++]);
        batch.emplace_back(row.begin(), row.end());
    }
    return batch;
}

}  // namespace detail

/// Runs steps until s.step == cfg.steps. Throws NumericalError on a
/// non-finite loss; the state is left at the last good step.
inline std::vector<TrainLogRecord> continue_training(TrainState& s, const Dataset& data, const TrainConfig& cfg,
                                                     const TrainHooks& hooks = {}) {
    cfg.validate();
    detail::require_same_dim(data.dim, s.model.dim(), "train");
    if (data.size() == 0) throw DomainError("train: empty dataset");
    if (s.order.size() != data.size()) throw DomainError("train: state does not match dataset size");
    const HomotopyParams params = cfg.homotopy(data.dim);
    OptimizerSettings opt = cfg.optimizer_settings();

    std::vector<TrainLogRecord> log;
    while (s.step < cfg.steps) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto batch = detail::next_batch(s, data, cfg.batch_size);
        auto [loss, grad] = batch_loss(s.model, params, cfg.lambda, batch, s.rng);
        if (!std::isfinite(loss.total) || !detail::all_finite(grad)) {
            throw NumericalError("train: non-finite loss at step " + std::to_string(s.step + 1));
        }
        const double gnorm = std::sqrt(detail::squared_norm(grad));
        opt.lr = cfg.lr_at(s.step);
        optimizer_step(s.opt, s.model.theta(), grad, opt);
        ++s.step;
        const auto t1 = std::chrono::steady_clock::now();
        TrainLogRecord rec{s.step, loss, gnorm, std::chrono::duration<double, std::milli>(t1 - t0).count()};
        if (hooks.on_log) hooks.on_log(rec);
        log.push_back(rec);
        if (hooks.on_checkpoint && (s.step % cfg.checkpoint_every == 0 || s.step == cfg.steps)) {
            hooks.on_checkpoint(s);
        }
    }
    return log;
}

struct TrainResult {
    PotentialModel model;
    std::vector<TrainLogRecord> log;
};

/// Trains `model` from scratch; deterministic in cfg.seed.
inline TrainResult train(const Dataset& data, PotentialModel model, const TrainConfig& cfg,
                         const TrainHooks& hooks = {}) {
    TrainState s = start_training(std::move(model), data.size(), cfg.seed);
    auto log = continue_training(s, data, cfg, hooks);
    return {std::move(s.model), std::move(log)};
}

}  // namespace vapo
