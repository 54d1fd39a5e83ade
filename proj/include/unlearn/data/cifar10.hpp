#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "unlearn/data/dataset.hpp"
#include "unlearn/data/idx.hpp"
#include "unlearn/io.hpp"

namespace unlearn::data {

// One record: 1 label byte, then 1024 R, 1024 G, 1024 B bytes (row-major 32x32 planes).
inline constexpr std::size_t kCifarImageBytes = 3 * 32 * 32;
inline constexpr std::size_t kCifarRecordBytes = 1 + kCifarImageBytes;

inline const std::vector<std::string>& cifar10_class_names() {
    static const std::vector<std::string> names{"plane", "car",  "bird", "cat",  "deer",
                                                "dog",   "frog", "horse", "ship", "truck"};
    return names;
}

namespace detail {
inline void append_cifar_records(std::span<const std::uint8_t> bytes, const std::string& what,
                                 std::vector<double>& px, std::vector<int>& ys) {
    if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0)
        throw FormatError(what + ": size " + std::to_string(bytes.size()) + " is not a positive multiple of " +
                          std::to_string(kCifarRecordBytes));
    const std::size_t n = bytes.size() / kCifarRecordBytes;
    for (std::size_t i = 0; i < n; ++i) {
        const auto* rec = bytes.data() + i * kCifarRecordBytes;
        if (rec[0] > 9)
            throw FormatError(what + ": record " + std::to_string(i) + " has label byte " + std::to_string(rec[0]));
        ys.push_back(rec[0]);
        for (std::size_t k = 1; k < kCifarRecordBytes; ++k) px.push_back(rec[k] / 255.0);
    }
}
} // namespace detail

inline Dataset parse_cifar10(const std::vector<std::vector<std::uint8_t>>& files, std::string name = "cifar10") {
    std::vector<double> px;
    std::vector<int> ys;
    for (std::size_t f = 0; f < files.size(); ++f)
        detail::append_cifar_records(files[f], name + " file " + std::to_string(f), px, ys);
    return Dataset(std::move(name), ImageShape{3, 32, 32}, 10, std::move(px), std::move(ys), cifar10_class_names());
}

/// Concatenates the records of every batch file, in the given order.
inline Dataset load_cifar10(const std::vector<std::filesystem::path>& batch_paths, std::string name = "cifar10") {
    if (batch_paths.empty()) throw FormatError("load_cifar10: no batch files given");
    std::vector<double> px;
    std::vector<int> ys;
    for (const auto& path : batch_paths) {
        const auto bytes = detail::read_existing(path);
        detail::append_cifar_records(bytes, path.string(), px, ys);
    }
    return Dataset(std::move(name), ImageShape{3, 32, 32}, 10, std::move(px), std::move(ys), cifar10_class_names());
}

} // namespace unlearn::data
