// Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned here.
// Exit status is nonzero when any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "vapo/checkpoint.hpp"
#include "vapo/datasets.hpp"
#include "vapo/eval.hpp"
#include "vapo/ode_sampler.hpp"
#include "vapo/trainer.hpp"
#include "vapo/verify.hpp"

namespace fs = std::filesystem;
using namespace vapo;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances.
constexpr double kLogDensityTol = 1e-6;
constexpr double kHomotopySeconds = 10.0;
constexpr double kPdeRelTol = 1e-5;
constexpr double kMassTol = 1e-6;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradSeconds = 60.0;
constexpr double kRk4RatioLo = 12.0, kRk4RatioHi = 20.0;
constexpr double kGridKldMax = 0.3;
constexpr double kMmdQuantile = 0.95;
constexpr std::size_t kMmdPermutations = 200;
constexpr double kTrainMinutes = 15.0;
constexpr double kOverlapMin = 0.8;
constexpr double kMemorizedMax = 0.01;
constexpr double kMemorizeRadius = 1e-3;
constexpr double kAurocMin = 0.9;

// End-to-end ring run.
constexpr std::size_t kRingN = 20'000;
constexpr std::size_t kEvalN = 2'000;
constexpr double kCaptureRadius = 0.3;  // 3 mode standard deviations

TrainConfig ring_config() {
    TrainConfig c;
    c.batch_size = 256;
    c.steps = 30'000;
    c.lr = 1e-3;
    c.lr_schedule = LrSchedule::cosine;
    c.lambda = 1e-3;
    c.omega = 1.0;
    c.sigma = 0.1;
    c.eps_sharp = 0.1;
    c.hidden = {64, 64, 64};
    c.activation = Activation::tanh;
    c.seed = 0;
    return c;
}
// Inside the construction interval; longer flows over-contract the modes.
constexpr double kRingTEnd = 0.75;

int failures = 0;

void report(bool ok, const std::string& id, const std::string& detail) {
    std::printf("[%s] %s: %s\n", ok ? "PASS" : "FAIL", id.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, double a = 0, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double worst(const verify::Report& r, const std::string& prefix) {
    double w = 0.0;
    for (const auto& c : r)
        if (c.name.rfind(prefix, 0) == 0) w = std::max(w, c.measured);
    return w;
}

void criterion_homotopy() {
    auto t0 = Clock::now();
    const auto quad = verify::homotopy_quadrature();
    const double secs = seconds_since(t0);
    const double logd = worst(quad, "log_density"), mean = worst(quad, "mean"), var = worst(quad, "var");
    report(logd <= kLogDensityTol && mean <= kLogDensityTol && var <= kLogDensityTol && secs < kHomotopySeconds,
           "1 homotopy quadrature",
           fmt("max |dlogp| %.2e, |dmean| %.2e, rel dvar %.2e (limit %.0e)", logd, mean, var, kLogDensityTol) +
               fmt("; %.2f s (limit %.0f s)", secs, kHomotopySeconds));

    const auto pde = verify::homotopy_pde();
    const double rel = worst(pde, "pde_rhs"), mass = worst(pde, "pde_mass");
    report(rel <= kPdeRelTol && mass < kMassTol, "2 homotopy PDE",
           fmt("max rel err %.2e (limit %.0e); max |mass| %.2e (limit %.0e)", rel, kPdeRelTol, mass, kMassTol));
}

void criterion_gradients() {
    auto t0 = Clock::now();
    const auto g = verify::gradients(100, kGradRelTol);
    const double secs = seconds_since(t0);
    report(verify::all_passed(g) && secs < kGradSeconds, "3 gradients",
           fmt("input %.2e, theta %.2e, gradnormsq %.2e, batch_loss %.2e", g[0].measured, g[1].measured,
               g[2].measured, g[3].measured) +
               fmt(" (limit %.0e); %.1f s (limit %.0f s)", kGradRelTol, secs, kGradSeconds));
}

void criterion_ode() {
    const auto o = verify::ode();
    const bool ratio_ok = o[1].measured >= kRk4RatioLo && o[1].measured <= kRk4RatioHi;
    report(o[0].passed && ratio_ok && o[2].passed, "4 ode",
           fmt("closed-form rel err %.2e (limit %.0e); rk4 ratio %.2f in [12, 20]; max energy drop %.2e", o[0].measured,
               o[0].tolerance, o[1].measured, o[2].measured) +
               fmt(" (limit %.0e)", o[2].tolerance));
}

void criterion_time() {
    const auto t = verify::time_law(100'000);
    report(t[0].passed, "5 time law",
           fmt("KS %.3e below 1%% critical %.3e at eps=1e-4 (n=1e5)", t[0].measured, t[0].tolerance));
}

void criteria_ring() {
    const TrainConfig cfg = ring_config();
    const Dataset raw = make_ring(kRingN, 8, 2.0, 0.1, 0);
    const Dataset data = standardize(raw);
    const Standardization& st = *data.standardization;

    RngStream init_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    const auto t0 = Clock::now();
    TrainHooks hooks;
    hooks.on_log = [](const TrainLogRecord& r) {
        if (r.step % 5000 == 0) std::fprintf(stderr, "  ring step %zu loss %.5g\n", r.step, r.loss.total);
    };
    const TrainResult tr = train(data, init(cfg.layer_sizes(2), cfg.activation, init_rng), cfg, hooks);
    const double minutes = seconds_since(t0) / 60.0;
    const PotentialModel& model = tr.model;

    OdeConfig ode;
    ode.t_end = kRingTEnd;
    RngStream rng(1234);
    auto samples_std = sample(model, kEvalN, cfg.homotopy(2), ode, rng);
    auto samples = samples_std;
    destandardize(samples, st);
    const auto held = make_ring(kEvalN, 8, 2.0, 0.1, 1).points.to_rows();

    const double coverage = mode_coverage(samples, ring_centers(), kCaptureRadius);
    const double kld = grid_kld(samples, held, GridSpec{});
    const std::vector<double> bws{0.25, 0.5, 1.0, 2.0};
    const auto perm = mmd_permutation_test(samples, held, bws, kMmdPermutations, kMmdQuantile, rng);
    report(coverage == 1.0 && kld < kGridKldMax && perm.statistic < perm.threshold && minutes < kTrainMinutes &&
               cfg.steps <= 30'000,
           "6 ring generation",
           fmt("modes %.0f/8; grid KLD %.3f (limit %.1f); MMD^2 %.2e", coverage * 8, kld, kGridKldMax, perm.statistic) +
               fmt(" vs permutation null q95 %.2e (p=%.3f); train %.1f min (limit %.0f)", perm.threshold, perm.p_value,
                   minutes, kTrainMinutes));
    // Reference point: fresh draws from the data distribution under the same metrics.
    {
        RngStream r2(99);
        const auto fresh = make_ring(kEvalN, 8, 2.0, 0.1, 2).points.to_rows();
        const auto p2 = mmd_permutation_test(fresh, held, bws, kMmdPermutations, kMmdQuantile, r2);
        std::printf("       reference (exact ring draws): grid KLD %.3f, MMD^2 %.2e vs null q95 %.2e\n",
                    grid_kld(fresh, held, GridSpec{}), p2.statistic, p2.threshold);
    }

    // 7: energy histograms on train vs held-out, and the memorization audit.
    auto held_std = make_ring(kRingN, 8, 2.0, 0.1, 1).points.to_rows();
    apply_standardization(held_std, st);
    const auto [h_train, h_held] = paired_energy_histograms(model, data.points.to_rows(), held_std, 50);
    const double overlap = histogram_overlap(h_train, h_held);
    const auto nn = nearest_neighbors(samples, raw.points, 1);
    std::size_t close = 0;
    for (const auto& n : nn) close += n.distances[0] < kMemorizeRadius;
    const double memorized = static_cast<double>(close) / static_cast<double>(nn.size());
    report(overlap > kOverlapMin && memorized < kMemorizedMax, "7 energy histograms / memorization",
           fmt("train vs held-out overlap %.3f (limit > %.1f); samples within 1e-3 of a training point %.2f%% (limit < "
               "%.0f%%)",
               overlap, kOverlapMin, 100 * memorized, 100 * kMemorizedMax));
    {
        const auto nn_ref = nearest_neighbors(make_ring(kEvalN, 8, 2.0, 0.1, 3).points.to_rows(), raw.points, 1);
        std::size_t c2 = 0;
        for (const auto& n : nn_ref) c2 += n.distances[0] < kMemorizeRadius;
        std::printf("       reference (exact ring draws): %.2f%% within 1e-3 of a training point\n",
                    100.0 * c2 / nn_ref.size());
    }

    // 8: OOD separation from uniform noise on [-4, 4]^2.
    std::vector<Vec> in(held_std.begin(), held_std.begin() + kEvalN);
    RngStream nr(4321);
    std::vector<Vec> noise(kEvalN, Vec(2));
    for (auto& x : noise)
        for (double& v : x) v = -4.0 + 8.0 * nr.uniform();
    apply_standardization(noise, st);
    const double auc = ood_auroc(model, in, noise);
    report(auc > kAurocMin, "8 OOD AUROC", fmt("ring test vs uniform [-4,4]^2: %.3f (limit > %.1f)", auc, kAurocMin));
}

int run(const std::string& args) {
    const std::string cmd = std::string(VAPO_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void criterion_reproducibility() {
    const fs::path root = fs::temp_directory_path() / "vapo_acceptance_repro";
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path cfg = root / "cfg.txt";
    binary::write_file(cfg.string(),
                       "steps = 200\nbatch_size = 64\nhidden = 16,16\nsigma = 0.1\neps_sharp = 0.1\n"
                       "activation = tanh\ncheckpoint_every = 100\nlr_schedule = cosine\nseed = 11\n");
    binary::write_file((root / "held.csv").string(),
                       encode_csv(make_ring(400, 8, 2.0, 0.1, 5).points.to_rows(), 2));
    std::vector<std::string> compared;
    bool ok = true;
    std::string bad;
    for (const char* run_name : {"a", "b"}) {
        const fs::path d = root / run_name;
        const std::string ck = (d / "train" / "step_200.vapo").string();
        const int rc = run("train --toy ring8 --toy-n 2000 --config " + cfg.string() + " --out " + (d / "train").string()) |
                       run("sample --ckpt " + ck + " --n 200 --seed 3 --out " + (d / "s.csv").string()) |
                       run("sample --ckpt " + ck + " --n 200 --seed 3 --out " + (d / "s.vapd").string()) |
                       run("interpolate --ckpt " + ck + " --pairs 3 --points 6 --seed 4 --out " +
                           (d / "i.csv").string()) |
                       run("eval --ckpt " + ck + " --data " + (root / "held.csv").string() + " --n 200 " +
                           "--permutations 20 --out " + (d / "eval").string());
        if (rc != 0) {
            ok = false;
            bad = "command failed";
        }
    }
    // Every artifact except the wall-clock column of the training log.
    for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
        if (!e.is_regular_file()) continue;
        const fs::path rel = fs::relative(e.path(), root / "a");
        if (rel.filename() == "train_log.csv") continue;
        const fs::path other = root / "b" / rel;
        if (!fs::exists(other) || binary::read_file(e.path().string()) != binary::read_file(other.string())) {
            ok = false;
            bad = rel.string();
        }
        compared.push_back(rel.string());
    }
    report(ok && compared.size() >= 10, "9 reproducibility",
           fmt("%.0f artifacts byte-identical across two seeded CLI runs", static_cast<double>(compared.size())) +
               (bad.empty() ? "" : "; mismatch: " + bad));
}

}  // namespace

int main() {
    criterion_homotopy();
    criterion_gradients();
    criterion_ode();
    criterion_time();
    criteria_ring();
    criterion_reproducibility();
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
