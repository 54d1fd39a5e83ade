#pragma once

// End-to-end run: partition -> original -> erase -> reconstruct -> retrain.
//
// Sub-seeds, all master XOR fnv1a64(name):
//   "init"        M_d initialization        "original"    M_d batch order
//   "teacher"     M_s initialization        "erase"       erase batch order
//   "reconstruct" reconstruct batch order   "retrain"     M_r batch order
//   "retrain-init" M_r initialization       "partition"   by-fraction sampling
//   "synth"       synthetic data

#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "unlearn/config.hpp"
#include "unlearn/data/cifar10.hpp"
#include "unlearn/data/idx.hpp"
#include "unlearn/data/partition.hpp"
#include "unlearn/data/synth.hpp"
#include "unlearn/eval/compare.hpp"
#include "unlearn/eval/evaluate.hpp"
#include "unlearn/method/stage.hpp"
#include "unlearn/method/unlearn.hpp"
#include "unlearn/nn/checkpoint.hpp"

namespace unlearn {

struct TrainTestData {
    data::Dataset train;
    data::Dataset test;
};

namespace detail {

inline data::Dataset limit(const data::Dataset& ds, std::size_t n) { return n == 0 ? ds : ds.head(n); }

inline std::filesystem::path require_root(const DatasetConfig& d) {
    const auto root = resolve_data_root(d);
    if (root.empty())
        throw std::runtime_error("dataset \"" + d.kind + "\": set dataset.root or UNLEARN_DATA_DIR");
    return root;
}

inline const std::vector<std::string>& fashion_mnist_class_names() {
    static const std::vector<std::string> names{"t-shirt", "trouser", "pullover", "dress", "coat",
                                                "sandal",  "shirt",   "sneaker",  "bag",   "ankle boot"};
    return names;
}

} // namespace detail

/// Loads the train and test splits named by the config.
///
/// IDX datasets expect train-images-idx3-ubyte, train-labels-idx1-ubyte,
/// t10k-images-idx3-ubyte and t10k-labels-idx1-ubyte under the root; CIFAR-10
/// expects data_batch_1.bin .. data_batch_5.bin and test_batch.bin.
inline TrainTestData load_datasets(const DatasetConfig& d, RngSeed master) {
    TrainTestData out;
    if (d.kind == "synth") {
        const RngSeed s = derive_seed(master, "synth");
        out.train = data::synth_blobs(d.synth_classes, d.synth_train_per_class, d.synth_image_side, s, 0);
        out.test = data::synth_blobs(d.synth_classes, d.synth_test_per_class, d.synth_image_side, s, 1);
    } else if (d.kind == "mnist" || d.kind == "fashion_mnist") {
        const auto root = detail::require_root(d);
        const auto names = d.kind == "mnist" ? std::vector<std::string>{} : detail::fashion_mnist_class_names();
        out.train = data::load_idx(root / "train-images-idx3-ubyte", root / "train-labels-idx1-ubyte",
                                   d.kind + "-train", 10, names);
        out.test = data::load_idx(root / "t10k-images-idx3-ubyte", root / "t10k-labels-idx1-ubyte",
                                  d.kind + "-test", 10, names);
    } else if (d.kind == "cifar10") {
        const auto root = detail::require_root(d);
        std::vector<std::filesystem::path> batches;
        for (int i = 1; i <= 5; ++i) batches.push_back(root / ("data_batch_" + std::to_string(i) + ".bin"));
        out.train = data::load_cifar10(batches, "cifar10-train");
        out.test = data::load_cifar10({root / "test_batch.bin"}, "cifar10-test");
    } else {
        throw ConfigError("unknown dataset kind \"" + d.kind + "\"");
    }
    out.train = detail::limit(out.train, d.train_limit);
    out.test = detail::limit(out.test, d.test_limit);
    return out;
}

/// The forgotten classes that evaluation reports separately. For a
/// by-fraction spec no class is wholly forgotten, so the set is empty.
inline std::set<int> forgotten_classes(const data::ForgetSpec& spec) {
    return spec.mode == data::ForgetSpec::Mode::by_class ? spec.classes : std::set<int>{};
}

/// Untrained network for the dataset, initialized from the "init" sub-seed.
inline Network initial_model(const ExperimentConfig& cfg, const data::Dataset& train) {
    Network net = build_model(train.image_shape(), train.num_classes(), cfg.model);
    init_random(net, derive_seed(cfg.seed, "init"));
    return net;
}

struct PipelineResult {
    Network original;  // M_d
    Network teacher;   // M_s
    Network scratch;   // M_u after erasure
    Network unlearned; // M_u after reconstruction
    Network retrained; // M_r
    StageTrace original_trace, erase_trace, reconstruct_trace, retrain_trace;
    eval::EvalReport original_report, scratch_report, retrained_report, unlearned_report;
    eval::ComparisonSummary comparison;
    std::size_t forget_size = 0;
    std::size_t remain_size = 0;
};

/// Runs every stage with per-epoch evaluation on `data.test`.
inline PipelineResult unlearn_pipeline(const TrainTestData& data, const ExperimentConfig& cfg) {
    const auto part = data::partition_forget(data.train, cfg.forget);
    const auto forgotten = forgotten_classes(cfg.forget);
    const auto evaluator = test_set_evaluator(data.test, forgotten);

    auto original = train_original(data.train, initial_model(cfg, data.train), cfg.train, evaluator);
    auto erased = knowledge_erase(original.model, part.forget, cfg.unlearn, evaluator);
    auto rebuilt = reconstruct(clone_params(erased.student), original.model, part.remain, cfg.unlearn, evaluator);
    auto retrained = retrain_baseline(part.remain, original.model, retrain_config(cfg),
                                      derive_seed(cfg.seed, "retrain-init"), evaluator);

    PipelineResult r{std::move(original.model),
                     std::move(erased.teacher),
                     std::move(erased.student),
                     std::move(rebuilt.model),
                     std::move(retrained.model),
                     std::move(original.trace),
                     std::move(erased.trace),
                     std::move(rebuilt.trace),
                     std::move(retrained.trace),
                     {},
                     {},
                     {},
                     {},
                     {},
                     part.forget.size(),
                     part.remain.size()};
    r.original_report = eval::evaluate(r.original, data.test, forgotten, "original");
    r.scratch_report = eval::evaluate(r.scratch, data.test, forgotten, "scratch");
    r.retrained_report = eval::evaluate(r.retrained, data.test, forgotten, "retrained");
    r.unlearned_report = eval::evaluate(r.unlearned, data.test, forgotten, "ours");
    r.comparison = eval::compare_methods(r.reconstruct_trace.recovery("ours"), r.retrain_trace.recovery("retrain"));
    return r;
}

} // namespace unlearn
