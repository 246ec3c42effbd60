#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "vapo/datasets.hpp"

using namespace vapo;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "vapo_datasets_test";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST(MakeRing, StandardNormalWithOneCentredMode) {
    const Dataset d = make_ring(10'000, 1, 0.0, 1.0, 3);
    EXPECT_EQ(d.dim, 2u);
    for (std::size_t j = 0; j < 2; ++j) {
        double s = 0, s2 = 0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            s += d.points(i, j);
            s2 += d.points(i, j) * d.points(i, j);
        }
        const double mean = s / d.size();
        EXPECT_LT(std::abs(mean), 0.05);
        EXPECT_NEAR(s2 / d.size() - mean * mean, 1.0, 0.05);
    }
}

TEST(MakeRing, TailBound) {
    const Dataset d = make_ring(10'000, 8, 2.0, 0.1, 4);
    std::size_t outliers = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double r = std::hypot(d.points(i, 0), d.points(i, 1));
        if (std::abs(r - 2.0) > 0.6) ++outliers;
    }
    EXPECT_LE(outliers, 1u);
}

TEST(MakeRing, ReproducibleAndErrors) {
    EXPECT_EQ(make_ring(50, 8, 2.0, 0.1, 9).points, make_ring(50, 8, 2.0, 0.1, 9).points);
    EXPECT_NE(make_ring(50, 8, 2.0, 0.1, 9).points, make_ring(50, 8, 2.0, 0.1, 10).points);
    EXPECT_THROW(make_ring(10, 0), DomainError);
    EXPECT_THROW(make_ring(0), DomainError);
    EXPECT_EQ(ring_centers().size(), 8u);
}

TEST(MakeMoons, Bounds) {
    const double noise = 0.05;
    const Dataset d = make_moons(5000, noise, 1);
    for (std::size_t i = 0; i < d.size(); ++i) {
        EXPECT_GE(d.points(i, 0), -1.5 - 6 * noise);
        EXPECT_LE(d.points(i, 0), 2.5 + 6 * noise);
        EXPECT_GE(d.points(i, 1), -1.0 - 6 * noise);
        EXPECT_LE(d.points(i, 1), 1.5 + 6 * noise);
    }
    EXPECT_EQ(make_moons(1, noise, 1).size(), 1u);
    EXPECT_THROW(make_moons(0), DomainError);
}

TEST(MakeCheckerboard, CellCounts) {
    const std::size_t n = 16'000;
    const Dataset d = make_checkerboard(n, 2);
    const auto centers = checkerboard_centers();
    ASSERT_EQ(centers.size(), 8u);
    std::vector<std::size_t> counts(8, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t hit = 8;
        for (std::size_t c = 0; c < 8; ++c) {
            if (std::abs(d.points(i, 0) - centers[c][0]) <= 0.5 && std::abs(d.points(i, 1) - centers[c][1]) <= 0.5) {
                hit = c;
            }
        }
        ASSERT_LT(hit, 8u) << "point outside the black cells";
        ++counts[hit];
    }
    for (std::size_t c : counts) EXPECT_NEAR(static_cast<double>(c), n / 8.0, 4 * std::sqrt(double(n)));
    EXPECT_EQ(make_checkerboard(1, 3).size(), 1u);
}

TEST(MakeToy, Names) {
    EXPECT_EQ(make_toy("ring8", 10, 0).points, make_ring(10, 8, 2.0, 0.1, 0).points);
    EXPECT_EQ(make_toy("moons", 10, 0).points, make_moons(10, 0.05, 0).points);
    EXPECT_THROW(make_toy("spiral", 10, 0), DomainError);
}

TEST(Standardize, IdentityOnStandardData) {
    Dataset raw = make_ring(2000, 8, 2.0, 0.1, 5);
    const Dataset once = standardize(raw);
    for (std::size_t j = 0; j < 2; ++j) {
        double s = 0, s2 = 0;
        for (std::size_t i = 0; i < once.size(); ++i) {
            s += once.points(i, j);
            s2 += once.points(i, j) * once.points(i, j);
        }
        EXPECT_LT(std::abs(s / once.size()), 1e-12);
        EXPECT_NEAR(s2 / once.size(), 1.0, 1e-12);
    }
    const Dataset twice = standardize(once);
    for (std::size_t k = 0; k < once.points.data.size(); ++k) {
        EXPECT_NEAR(twice.points.data[k], once.points.data[k], 1e-12);
    }
}

TEST(Standardize, AffineInvariance) {
    const Dataset x = make_moons(500, 0.05, 6);
    Dataset y = x;
    for (std::size_t i = 0; i < y.size(); ++i) {
        y.points(i, 0) = 3.0 * y.points(i, 0) - 7.0;
        y.points(i, 1) = 0.25 * y.points(i, 1) + 2.0;
    }
    const Dataset sx = standardize(x), sy = standardize(y);
    for (std::size_t k = 0; k < sx.points.data.size(); ++k) EXPECT_NEAR(sx.points.data[k], sy.points.data[k], 1e-12);
}

TEST(Standardize, InverseRoundTrip) {
    const Dataset x = make_ring(300, 8, 2.0, 0.1, 7);
    const Dataset s = standardize(x);
    auto rows = s.points.to_rows();
    destandardize(rows, *s.standardization);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(rows[i][j], x.points(i, j), 1e-12);
    apply_standardization(rows, *s.standardization);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(rows[i][j], s.points(i, j), 1e-12);
}

TEST(Standardize, ConstantColumnRejected) {
    Matrix m(3, 2);
    m(0, 0) = 1;
    m(1, 0) = 2;
    m(2, 0) = 3;
    EXPECT_THROW(standardize(make_dataset(m, "c")), DomainError);
}

TEST(MatrixFile, RoundTripBitwise) {
    const Dataset d = make_ring(123, 8, 2.0, 0.1, 8);
    const fs::path p = temp_path("ring.vapd");
    save_matrix(d, p.string());
    const Dataset back = load_matrix(p.string());
    EXPECT_EQ(back.dim, 2u);
    EXPECT_EQ(back.points, d.points);
    EXPECT_EQ(encode_matrix(back.points), encode_matrix(d.points));
    EXPECT_EQ(load_dataset(p.string()).points, d.points);
}

TEST(MatrixFile, Errors) {
    const std::string bytes = encode_matrix(make_ring(10, 8, 2.0, 0.1, 9).points);
    EXPECT_EQ(bytes.substr(0, 4), "VAPD");
    try {
        decode_matrix(bytes.substr(0, bytes.size() - 12));
        FAIL() << "expected truncation error";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
    }
    EXPECT_THROW(decode_matrix("XXXX" + bytes.substr(4)), FormatError);
    std::string bad = bytes;
    bad[30] ^= 0x04;
    EXPECT_THROW(decode_matrix(bad), FormatError);
    EXPECT_THROW(encode_matrix(Matrix(0, 2)), DomainError);
    Matrix nan(1, 2);
    nan(0, 1) = NAN;
    EXPECT_THROW(encode_matrix(nan), DomainError);
}

TEST(Csv, RoundTrip) {
    const Dataset d = make_moons(40, 0.05, 10);
    const fs::path p = temp_path("moons.csv");
    write_csv(d.points.to_rows(), 2, p.string(), 17);
    const Dataset back = load_dataset(p.string());
    EXPECT_EQ(back.points, d.points);
    EXPECT_EQ(csv_header(3), "x0,x1,x2");
    EXPECT_EQ(encode_csv({}, 2), "x0,x1\n");
}

TEST(Csv, RejectsMalformed) {
    const fs::path p = temp_path("bad.csv");
    binary::write_file(p.string(), "x0,x1\n1,2\n3\n");
    EXPECT_THROW(load_csv(p.string()), FormatError);
    binary::write_file(p.string(), "x0,x1\n1,abc\n");
    EXPECT_THROW(load_csv(p.string()), FormatError);
    binary::write_file(p.string(), "x0,x1\n");
    EXPECT_THROW(load_csv(p.string()), FormatError);
}
