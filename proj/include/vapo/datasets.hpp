#pragma once

// Synthetic point datasets and dataset files.
//
// Matrix file: "VAPD" | version u32 | N u64 | D u32 | row-major f64[N*D] |
// CRC32(f64 bytes) u32, little-endian. CSV files carry a header x0,...,x{D-1}.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>

#include "vapo/binary_io.hpp"
#include "vapo/common.hpp"
#include "vapo/rng.hpp"

namespace vapo {

struct Standardization {
    Vec mean;
    Vec scale;

    friend bool operator==(const Standardization&, const Standardization&) = default;
};

struct Dataset {
    std::size_t dim = 0;
    Matrix points;
    std::string name;
    std::optional<Standardization> standardization;

    std::size_t size() const { return points.rows; }
};

/// Wraps an N x D matrix of points; rejects empty or non-finite input.
inline Dataset make_dataset(Matrix pts, std::string name) {
    if (pts.rows == 0 || pts.cols == 0) throw DomainError("dataset: need at least one point and one dimension");
    if (!detail::all_finite(pts.data)) throw DomainError("dataset: non-finite values");
    Dataset d;
    d.dim = pts.cols;
    d.points = std::move(pts);
    d.name = std::move(name);
    return d;
}

namespace detail {

inline void require_points(std::size_t n, const char* what) {
    if (n < 1) throw DomainError(std::string(what) + ": n must be >= 1");
}

}  // namespace detail

/// Uniform mixture of `modes` isotropic Gaussians spaced evenly on a circle.
inline Dataset make_ring(std::size_t n, std::size_t modes = 8, double radius = 2.0, double mode_std = 0.1,
                         std::uint64_t seed = 0) {
    detail::require_points(n, "make_ring");
    if (modes < 1) throw DomainError("make_ring: modes must be >= 1");
    RngStream rng(seed);
    Matrix m(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        const auto k = std::min<std::size_t>(static_cast<std::size_t>(rng.uniform() * modes), modes - 1);
        const double ang = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(modes);
        m(i, 0) = radius * std::cos(ang) + mode_std * rng.normal();
        m(i, 1) = radius * std::sin(ang) + mode_std * rng.normal();
    }
    return make_dataset(std::move(m), "ring" + std::to_string(modes));
}

/// Centers of the make_ring mixture components.
inline std::vector<Vec> ring_centers(std::size_t modes = 8, double radius = 2.0) {
    std::vector<Vec> c;
    for (std::size_t k = 0; k < modes; ++k) {
        const double ang = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(modes);
        c.push_back({radius * std::cos(ang), radius * std::sin(ang)});
    }
    return c;
}

/// Two interleaving half circles with Gaussian jitter.
inline Dataset make_moons(std::size_t n, double noise_std = 0.05, std::uint64_t seed = 0) {
    detail::require_points(n, "make_moons");
    RngStream rng(seed);
    Matrix m(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        const bool upper = rng.uniform() < 0.5;
        const double th = std::numbers::pi * rng.uniform();
        if (upper) {
            m(i, 0) = std::cos(th);
            m(i, 1) = std::sin(th);
        } else {
            m(i, 0) = 1.0 - std::cos(th);
            m(i, 1) = 0.5 - std::sin(th);
        }
        m(i, 0) += noise_std * rng.normal();
        m(i, 1) += noise_std * rng.normal();
    }
    return make_dataset(std::move(m), "moons");
}

/// Uniform over the 8 "black" cells of a 4x4 board covering [-2, 2]^2.
inline Dataset make_checkerboard(std::size_t n, std::uint64_t seed = 0) {
    detail::require_points(n, "make_checkerboard");
    RngStream rng(seed);
    Matrix m(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        const auto cell = std::min<std::size_t>(static_cast<std::size_t>(rng.uniform() * 8), 7);
        const std::size_t row = cell / 2;
        const std::size_t col = 2 * (cell % 2) + (row % 2);
        m(i, 0) = -2.0 + static_cast<double>(col) + rng.uniform();
        m(i, 1) = -2.0 + static_cast<double>(row) + rng.uniform();
    }
    return make_dataset(std::move(m), "checkerboard");
}

/// Centers of the occupied make_checkerboard cells.
inline std::vector<Vec> checkerboard_centers() {
    std::vector<Vec> c;
    for (std::size_t row = 0; row < 4; ++row) {
        for (std::size_t col = row % 2; col < 4; col += 2) c.push_back({-1.5 + col, -1.5 + row});
    }
    return c;
}

inline Dataset make_toy(const std::string& name, std::size_t n, std::uint64_t seed) {
    if (name == "ring8") return make_ring(n, 8, 2.0, 0.1, seed);
    if (name == "moons") return make_moons(n, 0.05, seed);
    if (name == "checkerboard") return make_checkerboard(n, seed);
    throw DomainError("unknown toy dataset '" + name + "' (expected ring8, moons or checkerboard)");
}

/// Per-dimension zero mean, unit variance. The applied transform is recorded
/// (composed with any earlier one) so samples can be mapped back.
inline Dataset standardize(const Dataset& in) {
    const std::size_t n = in.size(), d = in.dim;
    if (n == 0) throw DomainError("standardize: empty dataset");
    Vec mean(d, 0.0), scale(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mean[j] += in.points(i, j);
    for (double& v : mean) v /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double r = in.points(i, j) - mean[j];
            scale[j] += r * r;
        }
    for (std::size_t j = 0; j < d; ++j) {
        scale[j] = std::sqrt(scale[j] / static_cast<double>(n));
        if (!(scale[j] > 0.0)) throw DomainError("standardize: zero-variance dimension " + std::to_string(j));
    }
    Dataset out = in;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out.points(i, j) = (in.points(i, j) - mean[j]) / scale[j];
    if (in.standardization) {
        const Standardization& prev = *in.standardization;
        for (std::size_t j = 0; j < d; ++j) {
            mean[j] = prev.mean[j] + prev.scale[j] * mean[j];
            scale[j] = prev.scale[j] * scale[j];
        }
    }
    out.standardization = Standardization{std::move(mean), std::move(scale)};
    return out;
}

/// Maps standardized points back to data coordinates.
inline void destandardize(std::vector<Vec>& pts, const Standardization& s) {
    for (Vec& p : pts) {
        detail::require_same_dim(p.size(), s.mean.size(), "destandardize");
        for (std::size_t j = 0; j < p.size(); ++j) p[j] = s.mean[j] + s.scale[j] * p[j];
    }
}

/// Maps data-coordinate points into the standardized frame.
inline void apply_standardization(std::vector<Vec>& pts, const Standardization& s) {
    for (Vec& p : pts) {
        detail::require_same_dim(p.size(), s.mean.size(), "apply_standardization");
        for (std::size_t j = 0; j < p.size(); ++j) p[j] = (p[j] - s.mean[j]) / s.scale[j];
    }
}

inline constexpr std::uint32_t kMatrixVersion = 1;

inline std::string encode_matrix(const Matrix& m) {
    if (m.rows == 0) throw DomainError("save_matrix: refusing to write an empty matrix");
    if (m.cols == 0) throw DomainError("save_matrix: zero dimension");
    if (!detail::all_finite(m.data)) throw DomainError("save_matrix: non-finite values");
    std::string out = "VAPD";
    binary::put<std::uint32_t>(out, kMatrixVersion);
    binary::put<std::uint64_t>(out, m.rows);
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols));
    std::string body;
    body.reserve(m.data.size() * 8);
    for (double v : m.data) binary::put(body, v);
    out += body;
    binary::put<std::uint32_t>(out, binary::crc32(body));
    return out;
}

inline Matrix decode_matrix(const std::string& bytes) {
    binary::Reader r(bytes, "matrix file");
    if (r.take(4) != "VAPD") throw FormatError("matrix file: bad magic");
    const auto version = r.get<std::uint32_t>();
    if (version != kMatrixVersion) throw FormatError("matrix file: unsupported version " + std::to_string(version));
    const auto n = r.get<std::uint64_t>();
    const auto d = r.get<std::uint32_t>();
    if (n == 0 || d == 0) throw FormatError("matrix file: empty matrix");
    if (n > (r.remaining() / 8) / d) throw FormatError("matrix file: truncated file");
    const std::size_t body_pos = r.pos();
    r.require(n * d * 8 + 4);
    Matrix m(n, d);
    for (double& v : m.data) {
        v = r.get<double>();
        if (!std::isfinite(v)) throw FormatError("matrix file: non-finite value");
    }
    const std::uint32_t crc =
        binary::crc32(reinterpret_cast<const unsigned char*>(bytes.data()) + body_pos, n * d * 8);
    if (r.get<std::uint32_t>() != crc) throw FormatError("matrix file: CRC mismatch");
    if (r.remaining() != 0) throw FormatError("matrix file: trailing bytes");
    return m;
}

inline void save_matrix(const Dataset& ds, const std::string& path) {
    binary::write_file(path, encode_matrix(ds.points));
}

inline Dataset load_matrix(const std::string& path) {
    return make_dataset(decode_matrix(binary::read_file(path)), path);
}

inline std::string csv_header(std::size_t dim) {
    std::string h;
    for (std::size_t j = 0; j < dim; ++j) h += (j ? ",x" : "x") + std::to_string(j);
    return h;
}

/// CSV with `digits` significant digits per value.
inline std::string encode_csv(const std::vector<Vec>& rows, std::size_t dim, int digits = 9) {
    std::string out = csv_header(dim) + "\n";
    char buf[64];
    for (const Vec& r : rows) {
        detail::require_same_dim(r.size(), dim, "write_csv");
        for (std::size_t j = 0; j < dim; ++j) {
            std::snprintf(buf, sizeof buf, "%.*g", digits, r[j]);
            if (j) out += ',';
            out += buf;
        }
        out += '\n';
    }
    return out;
}

inline void write_csv(const std::vector<Vec>& rows, std::size_t dim, const std::string& path, int digits = 9) {
    binary::write_file(path, encode_csv(rows, dim, digits));
}

inline Dataset load_csv(const std::string& path) {
    std::istringstream in(binary::read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw FormatError("csv: missing header");
    std::size_t dim = 1;
    for (char c : line) dim += c == ',';
    if (line != csv_header(dim)) throw FormatError("csv: expected header '" + csv_header(dim) + "'");
    std::vector<Vec> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Vec r;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                std::size_t used = 0;
                r.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw FormatError("");
            } catch (...) {
                throw FormatError("csv: bad number '" + cell + "'");
            }
            if (!std::isfinite(r.back())) throw FormatError("csv: non-finite value");
        }
        if (r.size() != dim) throw FormatError("csv: row has " + std::to_string(r.size()) + " columns");
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw FormatError("csv: no data rows");
    return make_dataset(Matrix::from_rows(rows), path);
}

/// Loads by extension: .csv as CSV, anything else as a matrix file.
inline Dataset load_dataset(const std::string& path) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) return load_csv(path);
    return load_matrix(path);
}

}  // namespace vapo
