#pragma once

// Model checkpoint file:
//   "VAPO" | version u32 | D u32 | layer count u32 | layer sizes u32[] |
//   activation id u32 | theta f64[] | CRC32(theta bytes) u32
// All integers and floats little-endian.

#include <cstdint>
#include <string>

#include "vapo/binary_io.hpp"
#include "vapo/potential_net.hpp"

namespace vapo {

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::string encode_checkpoint(const PotentialModel& m) {
    std::string out = "VAPO";
    binary::put<std::uint32_t>(out, kCheckpointVersion);
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.dim()));
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.layer_sizes().size()));
    for (std::size_t s : m.layer_sizes()) binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(s));
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.activation()));
    std::string body;
    body.reserve(m.num_params() * 8);
    for (double v : m.theta()) binary::put(body, v);
    out += body;
    binary::put<std::uint32_t>(out, binary::crc32(body));
    return out;
}

inline PotentialModel decode_checkpoint(const std::string& bytes) {
    binary::Reader r(bytes, "checkpoint");
    if (r.take(4) != "VAPO") throw FormatError("checkpoint: bad magic");
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    const auto dim = r.get<std::uint32_t>();
    const auto count = r.get<std::uint32_t>();
    if (count < 2 || count > 1024) throw FormatError("checkpoint: implausible layer count");
    std::vector<std::size_t> sizes(count);
    for (auto& s : sizes) s = r.get<std::uint32_t>();
    if (sizes.front() != dim) throw FormatError("checkpoint: dimension field disagrees with layer sizes");
    const auto act_id = r.get<std::uint32_t>();
    if (act_id > 1) throw FormatError("checkpoint: unknown activation id");

    PotentialModel m;
    try {
        m = PotentialModel(sizes, static_cast<Activation>(act_id));
    } catch (const DomainError& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
    const std::size_t body_pos = r.pos();
    r.require(m.num_params() * 8 + 4);
    for (double& v : m.theta()) v = r.get<double>();
    const std::uint32_t crc = binary::crc32(reinterpret_cast<const unsigned char*>(bytes.data()) + body_pos,
                                            m.num_params() * 8);
    if (r.get<std::uint32_t>() != crc) throw FormatError("checkpoint: CRC mismatch");
    if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes");
    return m;
}

inline void save_checkpoint(const PotentialModel& m, const std::string& path) {
    binary::write_file(path, encode_checkpoint(m));
}

inline PotentialModel load_checkpoint(const std::string& path) { return decode_checkpoint(binary::read_file(path)); }

}  // namespace vapo
