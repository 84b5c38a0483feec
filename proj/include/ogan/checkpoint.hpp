#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "errors.hpp"
#include "image.hpp"
#include "tensor.hpp"

// Binary checkpoint layout, little-endian throughout:
//
//   "OGCK"  u32 version  u64 epoch
//   u32 config length, config text (UTF-8)
//   u32 tensor count, then per tensor:
//     u16 name length, name, u8 rank, rank x u32 extents, u8 dtype (0 = f32), raw f32 values
//
// Model parameters come first, optimizer moments follow as ordinary records.

namespace ogan {

inline constexpr char kCheckpointMagic[4] = {'O', 'G', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 0;

struct TensorRecord {
    std::string name;
    Shape shape;
    std::vector<float> values;

    friend bool operator==(const TensorRecord&, const TensorRecord&) = default;
};

struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    std::uint64_t epoch = 0;
    std::string config_text;
    std::vector<TensorRecord> tensors;

    const TensorRecord* find(const std::string& name) const {
        for (const auto& t : tensors)
            if (t.name == name) return &t;
        return nullptr;
    }

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// Size in bytes of the serialized checkpoint.
inline std::size_t checkpoint_size(const Checkpoint& c) {
    std::size_t n = 4 + 4 + 8 + 4 + c.config_text.size() + 4;
    for (const auto& t : c.tensors) n += 2 + t.name.size() + 1 + 4 * t.shape.rank() + 1 + 4 * t.values.size();
    return n;
}

namespace detail {

class ByteWriter {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    template <typename U>
    void uint(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class ByteReader {
public:
    ByteReader(const std::vector<std::uint8_t>& in, std::string origin) : in_(in), origin_(std::move(origin)) {}

    void need(std::size_t n, const char* what) const {
        if (in_.size() - pos_ < n)
            throw FormatError(FormatError::Kind::truncated, origin_ + ": truncated checkpoint while reading " + what);
    }
    template <typename U>
    U uint(const char* what) {
        need(sizeof(U), what);
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(in_[pos_ + i]) << (8 * i));
        pos_ += sizeof(U);
        return v;
    }
    float f32() { return std::bit_cast<float>(uint<std::uint32_t>("tensor values")); }
    std::string text(std::size_t n, const char* what) {
        need(n, what);
        std::string s(in_.begin() + static_cast<std::ptrdiff_t>(pos_), in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return s;
    }
    bool done() const noexcept { return pos_ == in_.size(); }
    const std::string& origin() const noexcept { return origin_; }

private:
    const std::vector<std::uint8_t>& in_;
    std::string origin_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
    detail::ByteWriter w;
    w.bytes(kCheckpointMagic, 4);
    w.uint<std::uint32_t>(c.version);
    w.uint<std::uint64_t>(c.epoch);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.config_text.size()));
    w.bytes(c.config_text.data(), c.config_text.size());
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.tensors.size()));
    for (const auto& t : c.tensors) {
        if (t.name.size() > 0xffff) throw ArgumentError("checkpoint: tensor name too long");
        if (t.values.size() != t.shape.numel())
            throw ShapeError("checkpoint: tensor '" + t.name + "' value count does not match " + t.shape.str());
        w.uint<std::uint16_t>(static_cast<std::uint16_t>(t.name.size()));
        w.bytes(t.name.data(), t.name.size());
        w.uint<std::uint8_t>(static_cast<std::uint8_t>(t.shape.rank()));
        for (auto d : t.shape.dims()) w.uint<std::uint32_t>(static_cast<std::uint32_t>(d));
        w.uint<std::uint8_t>(kDtypeF32);
        for (float v : t.values) w.f32(v);
    }
    return w.take();
}

inline Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& origin = "checkpoint") {
    detail::ByteReader r(bytes, origin);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
        throw FormatError(FormatError::Kind::bad_magic, origin + ": not a checkpoint (bad magic, expected OGCK)");
    r.text(4, "magic");
    Checkpoint c;
    c.version = r.uint<std::uint32_t>("version");
    if (c.version != kCheckpointVersion)
        throw FormatError(FormatError::Kind::bad_version, origin + ": unsupported checkpoint version " +
                                                              std::to_string(c.version) + " (expected " +
                                                              std::to_string(kCheckpointVersion) + ")");
    c.epoch = r.uint<std::uint64_t>("epoch");
    c.config_text = r.text(r.uint<std::uint32_t>("config length"), "config text");
    const auto count = r.uint<std::uint32_t>("tensor count");
    for (std::uint32_t i = 0; i < count; ++i) {
        TensorRecord t;
        t.name = r.text(r.uint<std::uint16_t>("name length"), "tensor name");
        const auto rank = r.uint<std::uint8_t>("rank");
        std::vector<std::size_t> dims;
        std::uint64_t numel = 1;
        for (std::uint8_t k = 0; k < rank; ++k) {
            const auto d = r.uint<std::uint32_t>("extent");
            if (d == 0) throw FormatError(FormatError::Kind::bad_record, origin + ": zero extent in '" + t.name + "'");
            numel *= d;
            if (numel > (std::uint64_t{1} << 32))
                throw FormatError(FormatError::Kind::extent_overflow, origin + ": tensor '" + t.name + "' too large");
            dims.push_back(d);
        }
        t.shape = Shape(std::move(dims));
        const auto dtype = r.uint<std::uint8_t>("dtype");
        if (dtype != kDtypeF32)
            throw FormatError(FormatError::Kind::bad_record,
                              origin + ": tensor '" + t.name + "' has unknown dtype " + std::to_string(dtype));
        r.need(4 * numel, "tensor values");
        t.values.resize(numel);
        for (auto& v : t.values) v = r.f32();
        c.tensors.push_back(std::move(t));
    }
    if (!r.done()) throw FormatError(FormatError::Kind::bad_record, origin + ": trailing bytes after last tensor");
    return c;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
    write_file_bytes(path, encode_checkpoint(c));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(read_file_bytes(path), path.string());
}

}  // namespace ogan
