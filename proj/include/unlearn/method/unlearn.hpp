#pragma once

// Two-stage unlearning with a stochastic teacher.
//
// Knowledge erasure: the student M_u starts as a copy of the trained model
// M_d and is distilled, on the forget set D_f only, toward a randomly
// initialized and never trained network M_s of the same architecture:
//
//     p = softmax(M_s(x) / tau_erase)          (constant)
//     q = softmax(M_u(x) / tau_erase)
//     L_KL = mean_batch sum_j p_j log(p_j / q_j)
//
// Model reconstruction: M_u is fine-tuned on the remaining set D_r with the
// original model M_d as teacher:
//
//     L = CE(M_u(x), y) + alpha * KL(softmax(M_d(x)/tau) || softmax(M_u(x)/tau))
//
// Only M_u is updated in either stage.

#include <cstddef>
#include <stdexcept>
#include <string>

#include "unlearn/method/stage.hpp"
#include "unlearn/nn/checkpoint.hpp"

namespace unlearn {

struct ErasureResult {
    Network student;  // the "scratch" model
    Network teacher;  // M_s, frozen
    StageTrace trace;
};

/// Random-init, frozen network with the architecture of `like`.
inline Network make_stochastic_teacher(const Network& like, RngSeed seed) {
    Network teacher(like.layers(), like.input_shape(), like.num_classes());
    teacher.freeze();
    init_random(teacher, seed);
    return teacher;
}

inline ErasureResult knowledge_erase(const Network& original, const data::Dataset& forget, const UnlearnConfig& cfg,
                                     const EpochEvaluator& evaluator = {}) {
    cfg.validate();
    if (forget.empty()) throw std::invalid_argument("erase: forget set D_f is empty");
    if (original.input_shape() != forget.image_shape() || original.num_classes() != forget.num_classes())
        throw std::invalid_argument("erase: model architecture does not match forget set " + forget.name());

    ErasureResult out{clone_params(original), make_stochastic_teacher(original, cfg.teacher_seed), {"erase", {}}};
    const TrainConfig& tc = cfg.erase;
    OptimizerState opt(tc.learning_rate, tc.momentum);
    detail::StageClock clock;
    for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
        detail::EpochLosses losses;
        std::size_t b = 0;
        data::batch_iter(forget, tc.batch_size, true, tc.seed, epoch, [&](const data::Batch& batch) {
            detail::guarded_step("erase", epoch, b++, [&] {
                const ProbDist p = softmax_with_temperature(out.teacher.query(batch.images), cfg.tau_erase);
                const Tensor logits = out.student.forward(batch.images, Mode::train);
                const LossResult kl = kl_to_teacher(p, logits, cfg.tau_erase, cfg.kl_tau2_scaling);
                out.student.backward(kl.grad_logits);
                sgd_step(out.student, opt);
                losses.add(kl.value, 0.0, kl.value);
            });
        });
        detail::finish_epoch(out.trace, losses, epoch, clock, out.student, evaluator);
    }
    return out;
}

/// With alpha == 0 the teacher is never queried and the update reduces to
/// cross-entropy fine-tuning.
inline StageResult reconstruct(Network student, const Network& original, const data::Dataset& remain,
                               const UnlearnConfig& cfg, const EpochEvaluator& evaluator = {}) {
    cfg.validate();
    if (remain.empty()) throw std::invalid_argument("reconstruct: remaining set D_r is empty");
    if (!student.initialized()) throw std::invalid_argument("reconstruct: student is not initialized");
    if (student.layers() != original.layers() || student.input_shape() != original.input_shape() ||
        student.num_classes() != original.num_classes())
        throw std::invalid_argument("reconstruct: student and teacher architectures differ");
    if (student.input_shape() != remain.image_shape() || student.num_classes() != remain.num_classes())
        throw std::invalid_argument("reconstruct: model architecture does not match remaining set " + remain.name());

    StageTrace trace{"reconstruct", {}};
    const TrainConfig& tc = cfg.reconstruct;
    OptimizerState opt(tc.learning_rate, tc.momentum);
    detail::StageClock clock;
    for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
        detail::EpochLosses losses;
        std::size_t b = 0;
        data::batch_iter(remain, tc.batch_size, true, tc.seed, epoch, [&](const data::Batch& batch) {
            detail::guarded_step("reconstruct", epoch, b++, [&] {
                const Tensor logits = student.forward(batch.images, Mode::train);
                const LossResult ce = cross_entropy(logits, batch.labels);
                if (cfg.alpha == 0.0) {
                    student.backward(ce.grad_logits);
                    sgd_step(student, opt);
                    losses.add(0.0, ce.value, ce.value);
                    return;
                }
                const ProbDist p = softmax_with_temperature(original.query(batch.images), cfg.tau_reconstruct);
                const LossResult kl = kl_to_teacher(p, logits, cfg.tau_reconstruct, cfg.kl_tau2_scaling);
                const LossResult total = total_loss(ce, kl, cfg.alpha);
                student.backward(total.grad_logits);
                sgd_step(student, opt);
                losses.add(kl.value, ce.value, total.value);
            });
        });
        detail::finish_epoch(trace, losses, epoch, clock, student, evaluator);
    }
    return {std::move(student), std::move(trace)};
}

} // namespace unlearn
