#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "unlearn/data/dataset.hpp"
#include "unlearn/data/partition.hpp"
#include "unlearn/eval/compare.hpp"
#include "unlearn/eval/evaluate.hpp"
#include "unlearn/nn/losses.hpp"
#include "unlearn/nn/network.hpp"
#include "unlearn/nn/optimizer.hpp"

namespace unlearn {

struct TrainConfig {
    std::size_t epochs = 1;
    std::size_t batch_size = 64;
    double learning_rate = 1e-2;
    double momentum = 0.9;
    RngSeed seed{0}; // batch order

    /// `allow_zero_epochs` admits the no-update identity used by erasure.
    void validate(const std::string& who, bool allow_zero_epochs = false) const {
        if (epochs == 0 && !allow_zero_epochs) throw std::invalid_argument(who + ": epochs must be >= 1");
        if (batch_size == 0) throw std::invalid_argument(who + ": batch_size must be >= 1");
        if (!(learning_rate > 0.0)) throw std::invalid_argument(who + ": learning_rate must be > 0");
        if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument(who + ": momentum must be in [0,1)");
    }
};

struct UnlearnConfig {
    double tau_erase = 2.0;
    double tau_reconstruct = 2.0;
    double alpha = 1.0;
    bool kl_tau2_scaling = false;
    TrainConfig erase{1, 32, 2e-3, 0.9, {}};
    TrainConfig reconstruct{1, 64, 1e-3, 0.9, {}};
    RngSeed teacher_seed{0};

    void validate() const {
        if (!(tau_erase > 0.0)) throw std::invalid_argument("unlearn config: tau_erase must be > 0");
        if (!(tau_reconstruct > 0.0)) throw std::invalid_argument("unlearn config: tau_reconstruct must be > 0");
        if (!(alpha >= 0.0)) throw std::invalid_argument("unlearn config: alpha must be >= 0");
        erase.validate("erase", true);
        reconstruct.validate("reconstruct", true);
    }
};

/// Per-epoch losses are batch means averaged over the epoch; `seconds` is
/// wall time since the stage started.
struct EpochRecord {
    std::string stage;
    std::size_t epoch = 0;
    double kl = 0.0;
    double ce = 0.0;
    double total = 0.0;
    double seconds = 0.0;
    std::optional<eval::EvalReport> snapshot;
};

struct StageTrace {
    std::string stage;
    std::vector<EpochRecord> records;

    /// Epochs that carry an evaluation snapshot, as a recovery series.
    eval::RecoveryTrace recovery(const std::string& method) const {
        eval::RecoveryTrace t{method, {}};
        for (const auto& r : records)
            if (r.snapshot)
                t.points.push_back({r.epoch, r.snapshot->remaining_avg, r.snapshot->forgotten_avg, r.seconds});
        return t;
    }
};

/// Called after every epoch; returns the snapshot stored in the trace.
using EpochEvaluator = std::function<eval::EvalReport(const Network&, const std::string& stage, std::size_t epoch)>;

/// Evaluates on a fixed test split with the given forgotten classes.
inline EpochEvaluator test_set_evaluator(const data::Dataset& test, std::set<int> forgotten) {
    return [&test, forgotten = std::move(forgotten)](const Network& net, const std::string& stage, std::size_t epoch) {
        return eval::evaluate(net, test, forgotten, stage + "@" + std::to_string(epoch));
    };
}

struct StageResult {
    Network model;
    StageTrace trace;
};

namespace detail {

class StageClock {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Accumulates batch losses into an epoch mean.
struct EpochLosses {
    double kl = 0.0, ce = 0.0, total = 0.0;
    std::size_t batches = 0;
    void add(double kl_value, double ce_value, double total_value) {
        kl += kl_value;
        ce += ce_value;
        total += total_value;
        ++batches;
    }
    EpochRecord record(const std::string& stage, std::size_t epoch, double seconds) const {
        const double n = batches ? static_cast<double>(batches) : 1.0;
        return {stage, epoch, kl / n, ce / n, total / n, seconds, std::nullopt};
    }
};

inline void finish_epoch(StageTrace& trace, const EpochLosses& losses, std::size_t epoch, const StageClock& clock,
                         const Network& model, const EpochEvaluator& evaluator) {
    EpochRecord rec = losses.record(trace.stage, epoch, clock.seconds());
    if (!std::isfinite(rec.total))
        throw NonFiniteError(trace.stage + ": non-finite loss in epoch " + std::to_string(epoch));
    if (evaluator) rec.snapshot = evaluator(model, trace.stage, epoch);
    trace.records.push_back(std::move(rec));
}

/// Wraps numeric failures with the stage, epoch and batch that caused them.
template <typename Fn>
void guarded_step(const std::string& stage, std::size_t epoch, std::size_t batch, Fn&& fn) {
    try {
        fn();
    } catch (const NonFiniteError& e) {
        throw NonFiniteError(stage + ": epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) + ": " +
                             e.what());
    }
}

} // namespace detail

/// Plain cross-entropy SGD over `ds`, starting from `model`.
inline StageResult train_cross_entropy(const std::string& stage, const data::Dataset& ds, Network model,
                                       const TrainConfig& cfg, const EpochEvaluator& evaluator = {}) {
    cfg.validate(stage);
    if (ds.empty()) throw std::invalid_argument(stage + ": training set is empty");
    if (!model.initialized()) throw std::invalid_argument(stage + ": model is not initialized");
    if (model.input_shape() != ds.image_shape() || model.num_classes() != ds.num_classes())
        throw std::invalid_argument(stage + ": model architecture does not match dataset " + ds.name());
    StageTrace trace{stage, {}};
    OptimizerState opt(cfg.learning_rate, cfg.momentum);
    detail::StageClock clock;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        detail::EpochLosses losses;
        std::size_t b = 0;
        data::batch_iter(ds, cfg.batch_size, true, cfg.seed, epoch, [&](const data::Batch& batch) {
            detail::guarded_step(stage, epoch, b++, [&] {
                const Tensor logits = model.forward(batch.images, Mode::train);
                const LossResult ce = cross_entropy(logits, batch.labels);
                model.backward(ce.grad_logits);
                sgd_step(model, opt);
                losses.add(0.0, ce.value, ce.value);
            });
        });
        detail::finish_epoch(trace, losses, epoch, clock, model, evaluator);
    }
    return {std::move(model), std::move(trace)};
}

/// M_d: cross-entropy training on the full dataset D from an initialized model.
inline StageResult train_original(const data::Dataset& full, Network model, const TrainConfig& cfg,
                                  const EpochEvaluator& evaluator = {}) {
    return train_cross_entropy("original", full, std::move(model), cfg, evaluator);
}

/// M_r: fresh random initialization (init_seed), then cross-entropy on D_r only.
inline StageResult retrain_baseline(const data::Dataset& remain, const Network& architecture, const TrainConfig& cfg,
                                    RngSeed init_seed, const EpochEvaluator& evaluator = {}) {
    if (remain.empty()) throw std::invalid_argument("retrain: remaining set D_r is empty");
    Network fresh(architecture.layers(), architecture.input_shape(), architecture.num_classes());
    init_random(fresh, init_seed);
    return train_cross_entropy("retrain", remain, std::move(fresh), cfg, evaluator);
}

} // namespace unlearn
