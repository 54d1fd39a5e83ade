#pragma once

// Checkpoint layout (all integers and floats little-endian):
//
//   "UNLF"                      4-byte magic
//   u32 version                 currently 1
//   u32 channels, height, width input image shape
//   u32 num_classes
//   u32 layer_count
//   layer_count records:        u32 byte length of the rest of the record, then
//                               u8 kind (0 Conv2d, 1 ReLU, 2 MaxPool2d, 3 Flatten, 4 Linear)
//                               followed by u32 fields:
//                                 Conv2d    out_channels, kernel, stride, padding
//                                 MaxPool2d size
//                                 Linear    out_features
//   u32 tensor_count            parameter tensors in layer order, weight then bias
//   tensor_count arrays:        u64 element count, then that many f64 values

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "unlearn/io.hpp"
#include "unlearn/nn/network.hpp"
#include "unlearn/nn/rng.hpp"

namespace unlearn {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::array<char, 4> kCheckpointMagic{'U', 'N', 'L', 'F'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(std::span<const char> s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
    std::vector<std::uint8_t> take() { return std::move(bytes_); }
    std::size_t size() const { return bytes_.size(); }

private:
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint8_t u8(const std::string& field) { return take(1, field)[0]; }
    std::uint32_t u32(const std::string& field) {
        auto b = take(4, field);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
        return v;
    }
    std::uint64_t u64(const std::string& field) {
        auto b = take(8, field);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
        return v;
    }
    double f64(const std::string& field) { return std::bit_cast<double>(u64(field)); }
    std::span<const std::uint8_t> take(std::size_t n, const std::string& field) {
        if (bytes_.size() - pos_ < n)
            throw CheckpointError("checkpoint: truncated while reading " + field + " at offset " +
                                  std::to_string(pos_));
        auto out = bytes_.subspan(pos_, n);
        pos_ += n;
        return out;
    }
    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

inline std::uint32_t to_u32(std::size_t v, const char* what) {
    if (v > UINT32_MAX) throw CheckpointError(std::string("checkpoint: ") + what + " exceeds u32");
    return static_cast<std::uint32_t>(v);
}

} // namespace detail

inline std::vector<std::uint8_t> checkpoint_bytes(const Network& net) {
    if (!net.initialized()) throw CheckpointError("checkpoint: network is not initialized");
    detail::ByteWriter w;
    w.raw(kCheckpointMagic);
    w.u32(kCheckpointVersion);
    const ImageShape in = net.input_shape();
    w.u32(detail::to_u32(in.channels, "channels"));
    w.u32(detail::to_u32(in.height, "height"));
    w.u32(detail::to_u32(in.width, "width"));
    w.u32(detail::to_u32(net.num_classes(), "num_classes"));
    w.u32(detail::to_u32(net.layers().size(), "layer_count"));
    for (const LayerSpec& layer : net.layers()) {
        std::vector<std::uint32_t> fields;
        if (const auto* c = std::get_if<Conv2d>(&layer)) {
            fields = {detail::to_u32(c->out_channels, "out_channels"), detail::to_u32(c->kernel, "kernel"),
                      detail::to_u32(c->stride, "stride"), detail::to_u32(c->padding, "padding")};
        } else if (const auto* p = std::get_if<MaxPool2d>(&layer)) {
            fields = {detail::to_u32(p->size, "pool size")};
        } else if (const auto* l = std::get_if<Linear>(&layer)) {
            fields = {detail::to_u32(l->out_features, "out_features")};
        }
        w.u32(static_cast<std::uint32_t>(1 + 4 * fields.size()));
        w.u8(static_cast<std::uint8_t>(layer.index()));
        for (auto f : fields) w.u32(f);
    }
    const auto params = net.parameters();
    w.u32(detail::to_u32(params.size(), "tensor_count"));
    for (const Tensor* p : params) {
        w.u64(p->size());
        for (double v : p->values) w.f64(v);
    }
    return w.take();
}

/// All-or-nothing parse; throws CheckpointError naming the offending field.
inline Network parse_checkpoint(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes);
    auto magic = r.take(4, "magic");
    if (!std::equal(magic.begin(), magic.end(), kCheckpointMagic.begin()))
        throw CheckpointError("checkpoint: bad magic (expected \"UNLF\")");
    const auto version = r.u32("version");
    if (version != kCheckpointVersion)
        throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
    ImageShape in;
    in.channels = r.u32("channels");
    in.height = r.u32("height");
    in.width = r.u32("width");
    const std::size_t num_classes = r.u32("num_classes");
    const std::uint32_t layer_count = r.u32("layer_count");
    if (layer_count > 1024) throw CheckpointError("checkpoint: implausible layer_count " + std::to_string(layer_count));
    std::vector<LayerSpec> layers;
    for (std::uint32_t i = 0; i < layer_count; ++i) {
        const std::string where = "layer " + std::to_string(i);
        const std::uint32_t len = r.u32(where + " record length");
        const std::size_t start = r.position();
        const auto kind = r.u8(where + " kind");
        switch (kind) {
        case 0: {
            Conv2d c;
            c.out_channels = r.u32(where + " out_channels");
            c.kernel = r.u32(where + " kernel");
            c.stride = r.u32(where + " stride");
            c.padding = r.u32(where + " padding");
            layers.emplace_back(c);
            break;
        }
        case 1: layers.emplace_back(ReLU{}); break;
        case 2: layers.emplace_back(MaxPool2d{r.u32(where + " pool size")}); break;
        case 3: layers.emplace_back(Flatten{}); break;
        case 4: layers.emplace_back(Linear{r.u32(where + " out_features")}); break;
        default: throw CheckpointError("checkpoint: " + where + " has unknown kind " + std::to_string(kind));
        }
        if (r.position() - start != len)
            throw CheckpointError("checkpoint: " + where + " record length " + std::to_string(len) +
                                  " does not match its kind");
    }
    Network net = [&] {
        try {
            return Network(std::move(layers), in, num_classes);
        } catch (const std::exception& e) {
            throw CheckpointError(std::string("checkpoint: invalid architecture: ") + e.what());
        }
    }();
    net.allocate_zero();
    auto params = net.parameters();
    const std::uint32_t tensor_count = r.u32("tensor_count");
    if (tensor_count != params.size())
        throw CheckpointError("checkpoint: tensor_count " + std::to_string(tensor_count) + " but architecture has " +
                              std::to_string(params.size()));
    for (std::size_t k = 0; k < params.size(); ++k) {
        const std::string where = "tensor " + std::to_string(k);
        const std::uint64_t n = r.u64(where + " element count");
        if (n != params[k]->size())
            throw CheckpointError("checkpoint: " + where + " element count " + std::to_string(n) + " but expected " +
                                  std::to_string(params[k]->size()));
        for (auto& v : params[k]->values) v = r.f64(where + " values");
    }
    if (r.remaining() != 0)
        throw CheckpointError("checkpoint: " + std::to_string(r.remaining()) + " trailing bytes");
    return net;
}

inline std::uint64_t checkpoint_hash(const Network& net) {
    const auto bytes = checkpoint_bytes(net);
    return fnv1a64({reinterpret_cast<const char*>(bytes.data()), bytes.size()});
}

inline void save_checkpoint(const Network& net, const std::filesystem::path& path) {
    write_file_bytes(path, checkpoint_bytes(net));
}

inline Network load_checkpoint(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return parse_checkpoint(bytes);
    } catch (const CheckpointError& e) {
        throw CheckpointError(path.string() + ": " + e.what());
    }
}

/// Loads and additionally requires the architecture of `expected`.
inline Network load_checkpoint(const std::filesystem::path& path, const Network& expected) {
    Network net = load_checkpoint(path);
    if (net.layers() != expected.layers() || net.input_shape() != expected.input_shape() ||
        net.num_classes() != expected.num_classes())
        throw CheckpointError(path.string() + ": checkpoint architecture does not match the expected network");
    return net;
}

} // namespace unlearn
