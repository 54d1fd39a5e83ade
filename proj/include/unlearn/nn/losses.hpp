#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "unlearn/nn/tensor.hpp"

namespace unlearn {

/// Row-stochastic matrix [B, n]; every entry > 0 and rows sum to 1.
struct ProbDist {
    std::size_t batch = 0;
    std::size_t classes = 0;
    std::vector<double> probs;

    std::span<const double> row(std::size_t b) const { return {probs.data() + b * classes, classes}; }
};

/// Loss value together with its gradient w.r.t. the student's logits.
struct LossResult {
    double value = 0.0;
    Tensor grad_logits;
};

namespace detail {
inline void check_logits(const Tensor& logits, const char* who) {
    if (logits.rank() != 2 || logits.dim(0) == 0 || logits.dim(1) == 0)
        throw ShapeError(std::string(who) + ": expected non-empty logits [B,n], got " + shape_string(logits.shape));
}
} // namespace detail

/// softmax(z / tau) per row, max-subtracted.
inline ProbDist softmax_with_temperature(const Tensor& logits, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("softmax_with_temperature: tau must be > 0");
    detail::check_logits(logits, "softmax_with_temperature");
    ProbDist out{logits.dim(0), logits.dim(1), std::vector<double>(logits.size())};
    for (std::size_t b = 0; b < out.batch; ++b) {
        const auto z = logits.row(b);
        const double zmax = *std::max_element(z.begin(), z.end());
        double denom = 0.0;
        double* p = out.probs.data() + b * out.classes;
        for (std::size_t j = 0; j < out.classes; ++j) {
            p[j] = std::exp((z[j] - zmax) / tau);
            denom += p[j];
        }
        for (std::size_t j = 0; j < out.classes; ++j) p[j] /= denom;
    }
    return out;
}

/// Batch mean of sum_j p_j log(p_j / q_j), with 0 log 0 = 0.
inline double kl_divergence(const ProbDist& p, const ProbDist& q) {
    if (p.batch != q.batch || p.classes != q.classes)
        throw ShapeError("kl_divergence: shape mismatch [" + std::to_string(p.batch) + "," +
                         std::to_string(p.classes) + "] vs [" + std::to_string(q.batch) + "," +
                         std::to_string(q.classes) + "]");
    if (p.batch == 0) throw ShapeError("kl_divergence: empty batch");
    double total = 0.0;
    for (std::size_t k = 0; k < p.probs.size(); ++k) {
        const double pk = p.probs[k];
        if (pk > 0.0) total += pk * (std::log(pk) - std::log(q.probs[k]));
    }
    const double kl = total / static_cast<double>(p.batch);
    if (!std::isfinite(kl)) throw NonFiniteError("kl_divergence: non-finite result");
    return kl;
}

/// KL(teacher || softmax(student_logits / tau)) with the teacher held constant.
///
/// d/dz_j = (q_j - p_j) / (tau * B). With `tau2_scaling` both the value and
/// the gradient are multiplied by tau^2.
inline LossResult kl_to_teacher(const ProbDist& teacher, const Tensor& student_logits, double tau,
                                bool tau2_scaling = false) {
    const ProbDist q = softmax_with_temperature(student_logits, tau);
    if (teacher.batch != q.batch || teacher.classes != q.classes)
        throw ShapeError("kl_to_teacher: teacher [" + std::to_string(teacher.batch) + "," +
                         std::to_string(teacher.classes) + "] vs student logits " + shape_string(student_logits.shape));
    // Value via log-softmax, accumulated in extended precision.
    long double total = 0.0L;
    for (std::size_t b = 0; b < q.batch; ++b) {
        const auto z = student_logits.row(b);
        const long double zmax = *std::max_element(z.begin(), z.end());
        long double denom = 0.0L;
        for (double v : z) denom += std::exp((v - zmax) / tau);
        const long double lse = std::log(denom);
        for (std::size_t j = 0; j < q.classes; ++j) {
            const long double pk = teacher.probs[b * q.classes + j];
            if (pk > 0.0L) total += pk * (std::log(pk) - ((z[j] - zmax) / tau - lse));
        }
    }
    const double kl = static_cast<double>(total / static_cast<long double>(q.batch));
    if (!std::isfinite(kl)) throw NonFiniteError("kl_to_teacher: non-finite result");
    const double scale = tau2_scaling ? tau * tau : 1.0;
    LossResult out{scale * kl, Tensor(student_logits.shape)};
    const double g = scale / (tau * static_cast<double>(q.batch));
    for (std::size_t k = 0; k < q.probs.size(); ++k) out.grad_logits[k] = g * (q.probs[k] - teacher.probs[k]);
    return out;
}

/// Batch mean of -log softmax(z)[label], evaluated as logsumexp(z) - z[label].
inline LossResult cross_entropy(const Tensor& logits, std::span<const int> labels) {
    detail::check_logits(logits, "cross_entropy");
    const std::size_t B = logits.dim(0), n = logits.dim(1);
    if (labels.size() != B)
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                         std::to_string(B));
    LossResult out{0.0, Tensor(logits.shape)};
    const double inv_b = 1.0 / static_cast<double>(B);
    for (std::size_t b = 0; b < B; ++b) {
        const int y = labels[b];
        if (y < 0 || static_cast<std::size_t>(y) >= n)
            throw std::out_of_range("cross_entropy: label " + std::to_string(y) + " outside [0," +
                                    std::to_string(n) + ")");
        const auto z = logits.row(b);
        const double zmax = *std::max_element(z.begin(), z.end());
        double denom = 0.0;
        for (double v : z) denom += std::exp(v - zmax);
        const double log_denom = std::log(denom);
        out.value += (zmax + log_denom - z[static_cast<std::size_t>(y)]) * inv_b;
        for (std::size_t j = 0; j < n; ++j) {
            const double q = std::exp(z[j] - zmax - log_denom);
            out.grad_logits[b * n + j] = (q - (static_cast<std::size_t>(y) == j ? 1.0 : 0.0)) * inv_b;
        }
    }
    if (!std::isfinite(out.value)) throw NonFiniteError("cross_entropy: non-finite result");
    return out;
}

inline double total_loss(double ce, double kl, double alpha) { return ce + alpha * kl; }

/// L = CE + alpha * KL, gradients combined linearly. With alpha == 0 the
/// result is the CE result itself.
inline LossResult total_loss(const LossResult& ce, const LossResult& kl, double alpha) {
    if (alpha == 0.0) return ce;
    if (ce.grad_logits.shape != kl.grad_logits.shape) throw ShapeError("total_loss: gradient shape mismatch");
    LossResult out{total_loss(ce.value, kl.value, alpha), Tensor(ce.grad_logits.shape)};
    for (std::size_t k = 0; k < out.grad_logits.size(); ++k)
        out.grad_logits[k] = ce.grad_logits[k] + alpha * kl.grad_logits[k];
    return out;
}

} // namespace unlearn
