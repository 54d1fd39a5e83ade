#pragma once

#include <algorithm>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "unlearn/data/dataset.hpp"
#include "unlearn/nn/rng.hpp"

namespace unlearn::data {

/// One binary template per class (pixels 0.2 / 0.8). Any two templates
/// differ in at least 25% of their pixels; deterministic given the seed.
inline std::vector<std::vector<double>> synth_templates(std::size_t num_classes, std::size_t image_side,
                                                        RngSeed seed) {
    const std::size_t npx = image_side * image_side;
    Rng rng = make_rng(derive_seed(seed, "synth-templates"));
    std::vector<std::vector<double>> templates;
    while (templates.size() < num_classes) {
        std::vector<double> t(npx);
        for (double& v : t) v = (rng() >> 63) ? 0.8 : 0.2;
        const bool distinct = std::all_of(templates.begin(), templates.end(), [&](const auto& other) {
            std::size_t diff = 0;
            for (std::size_t k = 0; k < npx; ++k) diff += other[k] != t[k];
            return 4 * diff >= npx;
        });
        if (distinct) templates.push_back(std::move(t));
    }
    return templates;
}

/// Class template + N(0, 0.1^2) noise, clipped to [0,1]. Samples are
/// interleaved by class (label of sample i is i % num_classes). `split`
/// selects an independent noise stream over the same templates, so split 0
/// and split 1 serve as train and test sets.
inline Dataset synth_blobs(std::size_t num_classes, std::size_t per_class, std::size_t image_side, RngSeed seed,
                           std::size_t split = 0) {
    if (num_classes == 0 || per_class == 0 || image_side == 0)
        throw std::invalid_argument("synth_blobs: sizes must be positive");
    const auto templates = synth_templates(num_classes, image_side, seed);
    const std::size_t npx = image_side * image_side;
    Rng rng = make_rng(derive_seed(seed, "synth-noise-" + std::to_string(split)));
    const std::size_t n = num_classes * per_class;
    std::vector<double> px;
    px.reserve(n * npx);
    std::vector<int> ys;
    ys.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = i % num_classes;
        ys.push_back(static_cast<int>(k));
        for (std::size_t p = 0; p < npx; ++p) px.push_back(std::clamp(templates[k][p] + 0.1 * normal01(rng), 0.0, 1.0));
    }
    std::vector<std::string> names;
    for (std::size_t k = 0; k < num_classes; ++k) names.push_back("class_" + std::to_string(k));
    return Dataset("synth_blobs", ImageShape{1, image_side, image_side}, num_classes, std::move(px), std::move(ys),
                   std::move(names));
}

} // namespace unlearn::data
