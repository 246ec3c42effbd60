#pragma once

// Sample-quality metrics for low-dimensional data, energy histograms, the
// nearest-neighbour memorization audit and energy-based OOD scoring.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "vapo/common.hpp"
#include "vapo/parallel.hpp"
#include "vapo/potential_net.hpp"
#include "vapo/rng.hpp"

namespace vapo {

namespace detail {

inline double sqdist(ConstVecView a, ConstVecView b) {
    double s = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        const double r = a[d] - b[d];
        s += r * r;
    }
    return s;
}

inline double rbf_sum(double d2, std::span<const double> bandwidths) {
    double k = 0.0;
    for (double h : bandwidths) k += std::exp(-d2 / (2.0 * h * h));
    return k;
}

inline void check_point_sets(const std::vector<Vec>& a, const std::vector<Vec>& b, const char* what) {
    if (a.size() < 2 || b.size() < 2) throw DomainError(std::string(what) + ": need at least 2 points per set");
    const std::size_t d = a.front().size();
    for (const auto* set : {&a, &b})
        for (const Vec& p : *set) require_same_dim(p.size(), d, what);
}

}  // namespace detail

/// Unbiased MMD^2 with a sum of RBF kernels exp(-|x-y|^2 / (2 h^2)).
/// The result is bitwise symmetric in (a, b).
inline double mmd_rbf(const std::vector<Vec>& a, const std::vector<Vec>& b, std::span<const double> bandwidths) {
    detail::check_point_sets(a, b, "mmd_rbf");
    if (bandwidths.empty()) throw DomainError("mmd_rbf: no bandwidths");
    // Canonical argument order keeps the floating-point summation identical under swaps.
    const bool swap = b.size() < a.size() || (b.size() == a.size() && b < a);
    const auto& x = swap ? b : a;
    const auto& y = swap ? a : b;

    auto within = [&](const std::vector<Vec>& s) {
        double acc = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i)
            for (std::size_t j = i + 1; j < s.size(); ++j) acc += detail::rbf_sum(detail::sqdist(s[i], s[j]), bandwidths);
        const double n = static_cast<double>(s.size());
        return 2.0 * acc / (n * (n - 1.0));
    };
    double cross = 0.0;
    for (const Vec& p : x)
        for (const Vec& q : y) cross += detail::rbf_sum(detail::sqdist(p, q), bandwidths);
    cross /= static_cast<double>(x.size()) * static_cast<double>(y.size());
    return within(x) + within(y) - 2.0 * cross;
}

struct PermutationTest {
    double statistic = 0.0;      ///< observed MMD^2
    double threshold = 0.0;      ///< requested quantile of the permutation null
    double p_value = 0.0;
    std::vector<double> null_values;
};

/// Permutation null of the unbiased MMD^2 by relabelling the pooled sample.
inline PermutationTest mmd_permutation_test(const std::vector<Vec>& a, const std::vector<Vec>& b,
                                            std::span<const double> bandwidths, std::size_t permutations,
                                            double quantile, RngStream& rng) {
    detail::check_point_sets(a, b, "mmd_permutation_test");
    if (permutations == 0) throw DomainError("mmd_permutation_test: need permutations > 0");
    std::vector<const Vec*> pool;
    for (const Vec& p : a) pool.push_back(&p);
    for (const Vec& p : b) pool.push_back(&p);
    const std::size_t n = pool.size(), m = a.size();

    // Pooled kernel matrix, upper triangle stored densely.
    std::vector<double> K(n * n);
    parallel_chunks(std::min<std::size_t>(n, 64), [&](std::size_t c) {
        const std::size_t chunks = std::min<std::size_t>(n, 64);
        for (std::size_t i = c; i < n; i += chunks) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double k = detail::rbf_sum(detail::sqdist(*pool[i], *pool[j]), bandwidths);
                K[i * n + j] = k;
                K[j * n + i] = k;
            }
        }
    });
    auto stat = [&](const std::vector<char>& in_a) {
        double saa = 0.0, sbb = 0.0, sab = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = K.data() + i * n;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (in_a[i] && in_a[j]) saa += row[j];
                else if (!in_a[i] && !in_a[j]) sbb += row[j];
                else sab += row[j];
            }
        }
        const double ma = static_cast<double>(m), mb = static_cast<double>(n - m);
        return 2.0 * saa / (ma * (ma - 1.0)) + 2.0 * sbb / (mb * (mb - 1.0)) - 2.0 * sab / (ma * mb);
    };

    std::vector<char> labels(n, 0);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(m), 1);
    PermutationTest out;
    out.statistic = stat(labels);
    std::size_t exceed = 0;
    for (std::size_t p = 0; p < permutations; ++p) {
        std::shuffle(labels.begin(), labels.end(), rng.engine());
        out.null_values.push_back(stat(labels));
        if (out.null_values.back() >= out.statistic) ++exceed;
    }
    std::vector<double> sorted = out.null_values;
    std::sort(sorted.begin(), sorted.end());
    const auto idx = std::min<std::size_t>(sorted.size() - 1,
                                           static_cast<std::size_t>(std::ceil(quantile * sorted.size())) - 1);
    out.threshold = sorted[idx];
    out.p_value = static_cast<double>(exceed + 1) / static_cast<double>(permutations + 1);
    return out;
}

struct GridSpec {
    std::size_t bins = 50;
    double lo = -3.0;
    double hi = 3.0;
};

/// KL(data || samples) between 2-D histograms with add-one smoothing. Points
/// outside the range are counted in the nearest edge bin.
inline double grid_kld(const std::vector<Vec>& samples, const std::vector<Vec>& data, const GridSpec& grid) {
    if (samples.empty() || data.empty()) throw DomainError("grid_kld: empty input");
    if (grid.bins == 0 || !(grid.hi > grid.lo)) throw DomainError("grid_kld: bad grid");
    auto hist = [&](const std::vector<Vec>& pts) {
        std::vector<double> h(grid.bins * grid.bins, 1.0);
        const double w = (grid.hi - grid.lo) / static_cast<double>(grid.bins);
        auto cell = [&](double v) {
            const double c = std::floor((v - grid.lo) / w);
            return static_cast<std::size_t>(std::clamp(c, 0.0, static_cast<double>(grid.bins - 1)));
        };
        for (const Vec& p : pts) {
            if (p.size() != 2) throw DimensionError("grid_kld: points must be 2-D");
            h[cell(p[0]) * grid.bins + cell(p[1])] += 1.0;
        }
        const double total = static_cast<double>(pts.size() + h.size());
        for (double& v : h) v /= total;
        return h;
    };
    const auto p = hist(data);
    const auto q = hist(samples);
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) kl += p[i] * std::log(p[i] / q[i]);
    return std::max(0.0, kl);
}

/// Fraction of centers that capture at least 1% of the samples within `radius`.
inline double mode_coverage(const std::vector<Vec>& samples, const std::vector<Vec>& centers, double radius) {
    if (samples.empty() || centers.empty()) throw DomainError("mode_coverage: empty input");
    const double r2 = radius * radius;
    std::size_t covered = 0;
    for (const Vec& c : centers) {
        std::size_t hits = 0;
        for (const Vec& s : samples) {
            detail::require_same_dim(s.size(), c.size(), "mode_coverage");
            hits += detail::sqdist(s, c) <= r2;
        }
        covered += static_cast<double>(hits) >= 0.01 * static_cast<double>(samples.size());
    }
    return static_cast<double>(covered) / static_cast<double>(centers.size());
}

struct Histogram {
    std::vector<double> edges;  ///< bins + 1 ascending edges
    std::vector<std::size_t> counts;
};

/// Histogram over [lo, hi]; values outside fall in the edge bins.
inline Histogram histogram(std::span<const double> values, std::size_t bins, double lo, double hi) {
    if (bins == 0) throw DomainError("histogram: bins must be > 0");
    if (!(hi > lo)) throw DomainError("histogram: empty range");
    Histogram h;
    h.counts.assign(bins, 0);
    for (std::size_t i = 0; i <= bins; ++i) h.edges.push_back(lo + (hi - lo) * static_cast<double>(i) / bins);
    for (double v : values) {
        const double c = std::floor((v - lo) / (hi - lo) * static_cast<double>(bins));
        ++h.counts[static_cast<std::size_t>(std::clamp(c, 0.0, static_cast<double>(bins - 1)))];
    }
    return h;
}

/// Range [min, max] padded by 1% of its width (or of max(|min|, 1) when flat).
inline std::pair<double, double> padded_range(std::span<const double> values) {
    if (values.empty()) throw DomainError("padded_range: empty input");
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    const double width = *mx - *mn;
    const double pad = width > 0.0 ? 0.01 * width : 0.01 * std::max(std::abs(*mn), 1.0);
    return {*mn - pad, *mx + pad};
}

template <PotentialField F>
std::vector<double> energies(const F& field, const std::vector<Vec>& pts) {
    std::vector<double> e(pts.size());
    parallel_chunks(std::min<std::size_t>(pts.size(), 64), [&](std::size_t c) {
        const std::size_t chunks = std::min<std::size_t>(pts.size(), 64);
        const std::size_t lo = c * pts.size() / chunks, hi = (c + 1) * pts.size() / chunks;
        for (std::size_t i = lo; i < hi; ++i) e[i] = field.value(pts[i]);
    });
    return e;
}

template <PotentialField F>
Histogram energy_histogram(const F& field, const std::vector<Vec>& samples, std::size_t bins) {
    if (samples.empty()) throw DomainError("energy_histogram: empty samples");
    const auto e = energies(field, samples);
    const auto [lo, hi] = padded_range(e);
    return histogram(e, bins, lo, hi);
}

/// Intersection over union of two normalized histograms on shared edges.
inline double histogram_overlap(const Histogram& a, const Histogram& b) {
    if (a.edges != b.edges) throw DomainError("histogram_overlap: histograms must share edges");
    const double na = std::accumulate(a.counts.begin(), a.counts.end(), 0.0);
    const double nb = std::accumulate(b.counts.begin(), b.counts.end(), 0.0);
    if (na == 0.0 || nb == 0.0) throw DomainError("histogram_overlap: empty histogram");
    double inter = 0.0, uni = 0.0;
    for (std::size_t i = 0; i < a.counts.size(); ++i) {
        const double p = a.counts[i] / na, q = b.counts[i] / nb;
        inter += std::min(p, q);
        uni += std::max(p, q);
    }
    return inter / uni;
}

/// Energy histograms of two point sets on a common padded range.
template <PotentialField F>
std::pair<Histogram, Histogram> paired_energy_histograms(const F& field, const std::vector<Vec>& a,
                                                         const std::vector<Vec>& b, std::size_t bins) {
    if (a.empty() || b.empty()) throw DomainError("paired_energy_histograms: empty samples");
    const auto ea = energies(field, a);
    const auto eb = energies(field, b);
    std::vector<double> all = ea;
    all.insert(all.end(), eb.begin(), eb.end());
    const auto [lo, hi] = padded_range(all);
    return {histogram(ea, bins, lo, hi), histogram(eb, bins, lo, hi)};
}

/// AUROC of scores with `positive` as the positive class, via the
/// Mann-Whitney rank statistic (ties get mid-ranks).
inline double auroc(std::span<const double> positive, std::span<const double> negative) {
    if (positive.empty() || negative.empty()) throw DomainError("auroc: empty class");
    struct Item {
        double score;
        bool pos;
    };
    std::vector<Item> items;
    items.reserve(positive.size() + negative.size());
    for (double s : positive) items.push_back({s, true});
    for (double s : negative) items.push_back({s, false});
    std::sort(items.begin(), items.end(), [](const Item& x, const Item& y) { return x.score < y.score; });
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < items.size();) {
        std::size_t j = i;
        while (j < items.size() && items[j].score == items[i].score) ++j;
        const double mid = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k)
            if (items[k].pos) rank_sum += mid;
        i = j;
    }
    const double np = static_cast<double>(positive.size()), nn = static_cast<double>(negative.size());
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

/// OOD AUROC with energy Phi(x) as the in-distribution score.
template <PotentialField F>
double ood_auroc(const F& field, const std::vector<Vec>& in_samples, const std::vector<Vec>& out_samples) {
    if (in_samples.empty() || out_samples.empty()) throw DomainError("ood_auroc: empty class");
    return auroc(energies(field, in_samples), energies(field, out_samples));
}

struct Neighbors {
    std::vector<std::size_t> indices;
    std::vector<double> distances;  ///< ascending Euclidean distances
};

/// Exact k nearest rows of `data` for every query.
inline std::vector<Neighbors> nearest_neighbors(const std::vector<Vec>& queries, const Matrix& data, std::size_t k) {
    if (k == 0 || k > data.rows) throw DomainError("nearest_neighbors: k must lie in [1, N]");
    std::vector<Neighbors> out(queries.size());
    const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(queries.size(), 64));
    parallel_chunks(queries.empty() ? 0 : chunks, [&](std::size_t c) {
        std::vector<std::pair<double, std::size_t>> d(data.rows);
        const std::size_t lo = c * queries.size() / chunks, hi = (c + 1) * queries.size() / chunks;
        for (std::size_t q = lo; q < hi; ++q) {
            detail::require_same_dim(queries[q].size(), data.cols, "nearest_neighbors");
            for (std::size_t i = 0; i < data.rows; ++i) d[i] = {detail::sqdist(queries[q], data.row(i)), i};
            std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
            for (std::size_t r = 0; r < k; ++r) {
                out[q].indices.push_back(d[r].second);
                out[q].distances.push_back(std::sqrt(d[r].first));
            }
        }
    });
    return out;
}

struct MetricReport {
    double mmd_rbf_raw = 0.0;
    double mmd_rbf = 0.0;  ///< max(0, raw)
    std::optional<double> grid_kld;
    std::optional<double> mode_coverage;
    std::size_t n_samples = 0;
};

}  // namespace vapo
