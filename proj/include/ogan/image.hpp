#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"
#include "tensor.hpp"

namespace ogan {

/// 8-bit raster, channel-interleaved rows (HWC). 3 channels for RGB, 1 for masks.
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(std::size_t w, std::size_t h, std::size_t c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c), pixels(w * h * c, fill) {}

    std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c = 0) { return pixels[(y * width + x) * channels + c]; }
    std::uint8_t at(std::size_t x, std::size_t y, std::size_t c = 0) const {
        return pixels[(y * width + x) * channels + c];
    }

    std::size_t area() const noexcept { return width * height; }

    bool same_extent(const Image& o) const noexcept { return width == o.width && height == o.height; }

    friend bool operator==(const Image&, const Image&) = default;
};

namespace detail {

class PnmHeaderReader {
public:
    PnmHeaderReader(const std::vector<std::uint8_t>& bytes, const std::string& origin)
        : bytes_(bytes), origin_(origin) {}

    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            const char c = static_cast<char>(bytes_[pos_]);
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    std::uint64_t number(const char* field) {
        skip_space_and_comments();
        if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_]))
            throw FormatError(FormatError::Kind::malformed_header,
                              origin_ + ": malformed header, expected " + field);
        std::uint64_t v = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            v = v * 10 + (bytes_[pos_++] - '0');
            if (v > (std::uint64_t{1} << 32))
                throw FormatError(FormatError::Kind::extent_overflow, origin_ + ": " + field + " out of range");
        }
        return v;
    }

    std::size_t pos() const noexcept { return pos_; }
    void advance() { ++pos_; }

private:
    const std::vector<std::uint8_t>& bytes_;
    const std::string& origin_;
    std::size_t pos_ = 2;
};

// Reject rasters above 2^28 samples; nothing legitimate here comes close.
inline constexpr std::uint64_t kMaxSamples = std::uint64_t{1} << 28;

}  // namespace detail

/// Decodes binary PPM (P6) or PGM (P5) with maxval 255.
inline Image decode_pnm(const std::vector<std::uint8_t>& bytes, const std::string& origin = "image") {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '6' && bytes[1] != '5'))
        throw FormatError(FormatError::Kind::malformed_header, origin + ": malformed header, expected P6 or P5 magic");
    const std::size_t channels = bytes[1] == '6' ? 3 : 1;
    detail::PnmHeaderReader r(bytes, origin);
    const auto width = r.number("width");
    const auto height = r.number("height");
    const auto maxval = r.number("maxval");
    if (width == 0 || height == 0)
        throw FormatError(FormatError::Kind::malformed_header, origin + ": malformed header, zero extent");
    if (width * height * channels > detail::kMaxSamples)
        throw FormatError(FormatError::Kind::extent_overflow,
                          origin + ": extent " + std::to_string(width) + "x" + std::to_string(height) + " too large");
    if (maxval != 255)
        throw FormatError(FormatError::Kind::unsupported_depth,
                          origin + ": unsupported depth, maxval " + std::to_string(maxval) + " (only 255)");
    if (r.pos() >= bytes.size() || !std::isspace(bytes[r.pos()]))
        throw FormatError(FormatError::Kind::malformed_header, origin + ": malformed header, no separator before payload");
    r.advance();

    Image img(width, height, channels);
    const std::size_t need = img.pixels.size();
    const std::size_t have = bytes.size() - r.pos();
    if (have < need)
        throw FormatError(FormatError::Kind::truncated, origin + ": truncated payload, " + std::to_string(have) +
                                                            " of " + std::to_string(need) + " bytes");
    std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos()), need, img.pixels.begin());
    return img;
}

inline std::vector<std::uint8_t> encode_pnm(const Image& img) {
    if (img.channels != 1 && img.channels != 3)
        throw ArgumentError("only 1- or 3-channel images can be written, got " + std::to_string(img.channels));
    const std::string header = std::string(img.channels == 3 ? "P6" : "P5") + "\n" + std::to_string(img.width) + " " +
                               std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
    return out;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

inline Image load_image(const std::filesystem::path& path) { return decode_pnm(read_file_bytes(path), path.string()); }

inline void save_image(const std::filesystem::path& path, const Image& img) { write_file_bytes(path, encode_pnm(img)); }

/// [0, 255] -> [-1, 1] as a [1, C, H, W] tensor.
template <typename T>
Tensor<T> image_to_tensor(const Image& img) {
    std::vector<T> v(img.pixels.size());
    const std::size_t plane = img.area();
    for (std::size_t c = 0; c < img.channels; ++c)
        for (std::size_t i = 0; i < plane; ++i)
            v[c * plane + i] = static_cast<T>(img.pixels[i * img.channels + c]) / T(127.5) - T(1);
    return Tensor<T>::from(Shape{1, img.channels, img.height, img.width}, std::move(v));
}

/// Mask image (nonzero = occluded) -> {0, 1} tensor [1, 1, H, W].
template <typename T>
Tensor<T> mask_to_tensor(const Image& mask) {
    std::vector<T> v(mask.area());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = mask.pixels[i * mask.channels] ? T(1) : T(0);
    return Tensor<T>::from(Shape{1, 1, mask.height, mask.width}, std::move(v));
}

/// Sample `index` of an NCHW tensor in [-1, 1] -> 8-bit image.
template <typename T>
Image tensor_to_image(const Tensor<T>& t, std::size_t index = 0) {
    if (t.shape().rank() != 4) throw ShapeError("tensor_to_image expects NCHW, got " + t.shape().str());
    const std::size_t c = t.dim(1), h = t.dim(2), w = t.dim(3);
    Image img(w, h, c);
    const std::size_t plane = w * h;
    auto d = t.data().subspan(index * c * plane, c * plane);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < plane; ++i) {
            const double v = std::clamp(static_cast<double>(d[ch * plane + i]), -1.0, 1.0);
            img.pixels[i * c + ch] = static_cast<std::uint8_t>(std::floor((v + 1.0) * 127.5 + 0.5));
        }
    return img;
}

/// Horizontal strip of equally sized images.
inline Image hstack(const std::vector<Image>& parts) {
    if (parts.empty()) throw ArgumentError("hstack of nothing");
    Image out(0, parts[0].height, parts[0].channels);
    for (const auto& p : parts) {
        if (p.height != out.height || p.channels != out.channels) throw ShapeError("hstack: mismatched images");
        out.width += p.width;
    }
    out.pixels.assign(out.width * out.height * out.channels, 0);
    std::size_t x0 = 0;
    for (const auto& p : parts) {
        for (std::size_t y = 0; y < p.height; ++y)
            std::copy_n(p.pixels.begin() + static_cast<std::ptrdiff_t>(y * p.width * p.channels), p.width * p.channels,
                        out.pixels.begin() + static_cast<std::ptrdiff_t>((y * out.width + x0) * out.channels));
        x0 += p.width;
    }
    return out;
}

}  // namespace ogan
