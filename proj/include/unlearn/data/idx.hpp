#pragma once

// IDX (MNIST / Fashion-MNIST) reader and writer. Headers are big-endian:
//   images: u32 0x00000803, u32 N, u32 rows, u32 cols, then N*rows*cols bytes
//   labels: u32 0x00000801, u32 N, then N bytes

#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "unlearn/data/dataset.hpp"
#include "unlearn/io.hpp"

namespace unlearn::data {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

namespace detail {
inline std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t at, const std::string& what) {
    if (bytes.size() < at + 4) throw FormatError(what + ": truncated header");
    return (std::uint32_t{bytes[at]} << 24) | (std::uint32_t{bytes[at + 1]} << 16) |
           (std::uint32_t{bytes[at + 2]} << 8) | std::uint32_t{bytes[at + 3]};
}
inline void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}
inline std::string hex32(std::uint32_t v) {
    char buf[11];
    std::snprintf(buf, sizeof buf, "0x%08X", v);
    return buf;
}
inline std::vector<std::uint8_t> read_existing(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw std::runtime_error("file not found: " + path.string());
    return read_file_bytes(path);
}
} // namespace detail

/// Parses in-memory IDX image and label files. All-or-nothing.
inline Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                         std::string name = "idx", std::size_t num_classes = 10,
                         std::vector<std::string> class_names = {}) {
    const auto img_magic = detail::read_be32(images, 0, name + " images");
    if (img_magic != kIdxImagesMagic)
        throw FormatError(name + " images: bad magic " + detail::hex32(img_magic) + ", expected 0x00000803");
    const auto lbl_magic = detail::read_be32(labels, 0, name + " labels");
    if (lbl_magic != kIdxLabelsMagic)
        throw FormatError(name + " labels: bad magic " + detail::hex32(lbl_magic) + ", expected 0x00000801");
    const std::size_t n = detail::read_be32(images, 4, name + " images");
    const std::size_t rows = detail::read_be32(images, 8, name + " images");
    const std::size_t cols = detail::read_be32(images, 12, name + " images");
    const std::size_t n_labels = detail::read_be32(labels, 4, name + " labels");
    if (n != n_labels)
        throw FormatError(name + ": image count " + std::to_string(n) + " does not match label count " +
                          std::to_string(n_labels));
    if (rows == 0 || cols == 0) throw FormatError(name + " images: zero image dimension");
    const std::size_t per = rows * cols;
    if (images.size() != 16 + n * per)
        throw FormatError(name + " images: payload is " + std::to_string(images.size() - 16) + " bytes, expected " +
                          std::to_string(n * per));
    if (labels.size() != 8 + n)
        throw FormatError(name + " labels: payload is " + std::to_string(labels.size() - 8) + " bytes, expected " +
                          std::to_string(n));

    std::vector<double> px(n * per);
    for (std::size_t k = 0; k < px.size(); ++k) px[k] = images[16 + k] / 255.0;
    std::vector<int> ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        ys[i] = labels[8 + i];
        if (static_cast<std::size_t>(ys[i]) >= num_classes)
            throw FormatError(name + " labels: label " + std::to_string(ys[i]) + " at index " + std::to_string(i) +
                              " >= num_classes " + std::to_string(num_classes));
    }
    return Dataset(std::move(name), ImageShape{1, rows, cols}, num_classes, std::move(px), std::move(ys),
                   std::move(class_names));
}

inline Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                        std::string name = "idx", std::size_t num_classes = 10,
                        std::vector<std::string> class_names = {}) {
    const auto images = detail::read_existing(images_path);
    const auto labels = detail::read_existing(labels_path);
    return parse_idx(images, labels, std::move(name), num_classes, std::move(class_names));
}

/// Quantizes pixels to round(v * 255). Single-channel datasets only.
inline std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>> encode_idx(const Dataset& ds) {
    const ImageShape s = ds.image_shape();
    if (s.channels != 1) throw FormatError("encode_idx: IDX images are single-channel");
    std::vector<std::uint8_t> images, labels;
    detail::write_be32(images, kIdxImagesMagic);
    detail::write_be32(images, static_cast<std::uint32_t>(ds.size()));
    detail::write_be32(images, static_cast<std::uint32_t>(s.height));
    detail::write_be32(images, static_cast<std::uint32_t>(s.width));
    for (double v : ds.all_pixels()) images.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
    detail::write_be32(labels, kIdxLabelsMagic);
    detail::write_be32(labels, static_cast<std::uint32_t>(ds.size()));
    for (int y : ds.labels()) {
        if (y > 255) throw FormatError("encode_idx: label " + std::to_string(y) + " does not fit a byte");
        labels.push_back(static_cast<std::uint8_t>(y));
    }
    return {std::move(images), std::move(labels)};
}

inline void write_idx(const Dataset& ds, const std::filesystem::path& images_path,
                      const std::filesystem::path& labels_path) {
    auto [images, labels] = encode_idx(ds);
    write_file_bytes(images_path, images);
    write_file_bytes(labels_path, labels);
}

} // namespace unlearn::data
