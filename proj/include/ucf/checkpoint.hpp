#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "ucf/common.hpp"
#include "ucf/optim.hpp"
#include "ucf/tensor.hpp"

// Model checkpoint container. Layout (all integers little-endian):
//   magic "DTRD" | version u32 | param count u32
//   per param: name length u16, name bytes, rank u8, dims u32 each,
//              values f64 (row-major)
// Values round-trip bit-exactly.

namespace ucf {

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::vector<std::uint8_t> serialize_checkpoint(const std::vector<NamedParam>& params) {
    std::vector<std::uint8_t> out;
    out.push_back('D');
    out.push_back('T');
    out.push_back('R');
    out.push_back('D');
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const NamedParam& p : params) {
        if (p.name.size() > 0xFFFF) throw ContractError("checkpoint: parameter name too long");
        put_u16(out, static_cast<std::uint16_t>(p.name.size()));
        out.insert(out.end(), p.name.begin(), p.name.end());
        const Shape& s = p.value.shape();
        if (s.size() > 0xFF) throw ContractError("checkpoint: rank too large");
        out.push_back(static_cast<std::uint8_t>(s.size()));
        for (std::size_t d : s) put_u32(out, static_cast<std::uint32_t>(d));
        for (double v : p.value.data()) put_f64(out, v);
    }
    return out;
}

inline std::vector<NamedParam> deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    if (r.u8() != 'D' || r.u8() != 'T' || r.u8() != 'R' || r.u8() != 'D')
        throw ContractError("checkpoint: bad magic");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw ContractError("checkpoint: unsupported version " + std::to_string(version));
    const std::uint32_t count = r.u32();
    std::vector<NamedParam> params;
    params.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t name_len = r.u16();
        std::string name = r.str(name_len);
        const std::uint8_t rank = r.u8();
        Shape shape(rank);
        std::size_t numel = 1;
        for (std::uint8_t d = 0; d < rank; ++d) {
            shape[d] = r.u32();
            numel *= shape[d];
        }
        std::vector<double> data(numel);
        for (std::size_t j = 0; j < numel; ++j) data[j] = r.f64();
        params.push_back({std::move(name), Tensor::from_data(std::move(shape), std::move(data))});
    }
    if (r.remaining() != 0) throw ContractError("checkpoint: trailing bytes");
    return params;
}

inline void save_checkpoint(const std::string& path, const std::vector<NamedParam>& params) {
    std::vector<std::uint8_t> bytes = serialize_checkpoint(params);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ContractError("checkpoint: cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw ContractError("checkpoint: write failed for '" + path + "'");
}

inline std::vector<NamedParam> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ContractError("checkpoint: cannot open '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

// Copies loaded values into existing parameters; every name must match
// one-to-one with identical shapes.
inline void restore_params(std::vector<NamedParam>& dst, const std::vector<NamedParam>& src) {
    if (dst.size() != src.size())
        throw ContractError("checkpoint: parameter count mismatch, model has " +
                            std::to_string(dst.size()) + ", file has " +
                            std::to_string(src.size()));
    for (std::size_t i = 0; i < dst.size(); ++i) {
        // Saved in model order, so positional lookup with a name check.
        if (dst[i].name != src[i].name)
            throw ContractError("checkpoint: parameter name mismatch at index " +
                                std::to_string(i) + ": model '" + dst[i].name + "', file '" +
                                src[i].name + "'");
        if (dst[i].value.shape() != src[i].value.shape())
            throw ContractError("checkpoint: shape mismatch for parameter '" + dst[i].name + "'");
        dst[i].value.raw() = src[i].value.data();
    }
}

}  // namespace ucf
