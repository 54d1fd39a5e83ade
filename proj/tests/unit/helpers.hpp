#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "unlearn/nn/network.hpp"
#include "unlearn/nn/rng.hpp"

namespace unlearn::test {

inline std::filesystem::path fixtures() { return UNLEARN_FIXTURES; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        std::string name = tag;
        if (info) name += std::string("_") + info->test_suite_name() + "_" + info->name();
        path_ = std::filesystem::temp_directory_path() / ("unlearn_" + name);
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Scaled-down classifier: 2 + 3 conv channels on a 1x4x4 input (about 100 parameters).
inline Network tiny_net(RngSeed seed, std::size_t num_classes = 3, ImageShape input = {1, 4, 4}) {
    Network net = build_model(input, num_classes, ModelConfig{2, 3, 3, 1, 2});
    init_random(net, seed);
    // Non-zero biases so their gradients are exercised too.
    Rng rng = make_rng(derive_seed(seed, "bias"));
    for (Tensor* p : net.parameters())
        if (p->rank() == 1)
            for (double& v : p->values) v = uniform(rng, -0.1, 0.1);
    return net;
}

inline Tensor random_tensor(Shape shape, RngSeed seed, double lo = 0.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    Rng rng = make_rng(seed);
    for (double& v : t.values) v = uniform(rng, lo, hi);
    return t;
}

} // namespace unlearn::test
