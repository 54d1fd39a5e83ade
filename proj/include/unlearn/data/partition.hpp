#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "unlearn/data/dataset.hpp"
#include "unlearn/nn/rng.hpp"

namespace unlearn::data {

/// Which samples are requested to be forgotten.
struct ForgetSpec {
    enum class Mode { by_class, by_fraction };
    Mode mode = Mode::by_class;
    std::set<int> classes;    // by_class
    double fraction = 0.1;    // by_fraction
    RngSeed seed{0};          // by_fraction

    static ForgetSpec by_class(std::set<int> classes) { return {Mode::by_class, std::move(classes), 0.0, {}}; }
    static ForgetSpec by_fraction(double fraction, RngSeed seed) { return {Mode::by_fraction, {}, fraction, seed}; }
};

/// D_f and D_r, each carrying the original index of every sample.
struct ForgetPartition {
    Dataset forget;
    Dataset remain;
    std::vector<std::size_t> forget_indices;
    std::vector<std::size_t> remain_indices;
};

inline void validate(const ForgetSpec& spec, const Dataset& ds) {
    if (spec.mode == ForgetSpec::Mode::by_class) {
        if (spec.classes.empty()) throw std::invalid_argument("forget spec: class list is empty");
        for (int c : spec.classes)
            if (c < 0 || static_cast<std::size_t>(c) >= ds.num_classes())
                throw std::invalid_argument("forget spec: class " + std::to_string(c) + " outside [0," +
                                            std::to_string(ds.num_classes()) + ")");
    } else if (!(spec.fraction > 0.0 && spec.fraction < 1.0)) {
        throw std::invalid_argument("forget spec: fraction must be in (0,1), got " + std::to_string(spec.fraction));
    }
}

/// Order-preserving split into D_f and D_r; rejects splits leaving either side empty.
inline ForgetPartition partition_forget(const Dataset& ds, const ForgetSpec& spec) {
    validate(spec, ds);
    std::vector<char> in_forget(ds.size(), 0);
    if (spec.mode == ForgetSpec::Mode::by_class) {
        for (std::size_t i = 0; i < ds.size(); ++i) in_forget[i] = spec.classes.count(ds.labels()[i]) ? 1 : 0;
    } else {
        const auto k = static_cast<std::size_t>(std::llround(spec.fraction * static_cast<double>(ds.size())));
        std::vector<std::size_t> order(ds.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng = make_rng(spec.seed);
        shuffle(order, rng);
        for (std::size_t j = 0; j < std::min(k, order.size()); ++j) in_forget[order[j]] = 1;
    }
    ForgetPartition part;
    for (std::size_t i = 0; i < ds.size(); ++i) (in_forget[i] ? part.forget_indices : part.remain_indices).push_back(i);
    if (part.forget_indices.empty()) throw std::invalid_argument("partition_forget: forget set D_f is empty");
    if (part.remain_indices.empty()) throw std::invalid_argument("partition_forget: remaining set D_r is empty");
    part.forget = ds.subset(part.forget_indices, ds.name() + "/forget");
    part.remain = ds.subset(part.remain_indices, ds.name() + "/remain");
    return part;
}

/// Index batches for one epoch. Every sample appears exactly once; the last
/// batch may be short. The shuffle order depends only on (seed, epoch).
inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, bool shuffle_order,
                                                           RngSeed seed, std::size_t epoch) {
    if (batch_size == 0) throw std::invalid_argument("batch_iter: batch_size must be >= 1");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (shuffle_order) {
        Rng rng = make_rng(derive_seed(seed, "epoch-" + std::to_string(epoch)));
        shuffle(order, rng);
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size)
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
    return batches;
}

/// Calls fn(const Batch&) for each batch of one epoch.
template <typename Fn>
void batch_iter(const Dataset& ds, std::size_t batch_size, bool shuffle_order, RngSeed seed, std::size_t epoch,
                Fn&& fn) {
    for (const auto& idx : epoch_batches(ds.size(), batch_size, shuffle_order, seed, epoch)) fn(ds.gather(idx));
}

} // namespace unlearn::data
