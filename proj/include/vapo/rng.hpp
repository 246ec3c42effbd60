#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <random>

namespace vapo {

/// Seeded random stream. All randomness in the library flows through one of
/// these so a run is a pure function of its seed. The full state (engine and
/// distribution caches) round-trips through the stream operators.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed = 0) : engine_(seed) {}

    double normal() { return normal_(engine_); }

    /// Uniform draw on [0, 1).
    double uniform() { return uniform_(engine_); }

    std::uint64_t next_u64() { return engine_(); }

    std::mt19937_64& engine() { return engine_; }

    friend std::ostream& operator<<(std::ostream& os, const RngStream& r) {
        return os << r.engine_ << ' ' << r.normal_ << ' ' << r.uniform_;
    }
    friend std::istream& operator>>(std::istream& is, RngStream& r) {
        return is >> r.engine_ >> r.normal_ >> r.uniform_;
    }
    friend bool operator==(const RngStream& a, const RngStream& b) {
        return a.engine_ == b.engine_ && a.normal_ == b.normal_ && a.uniform_ == b.uniform_;
    }

  private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace vapo
