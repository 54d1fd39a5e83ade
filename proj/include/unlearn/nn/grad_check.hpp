#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "unlearn/nn/losses.hpp"
#include "unlearn/nn/network.hpp"

namespace unlearn {

/// Which objective grad_check differentiates.
struct LossSelector {
    enum class Kind { cross_entropy, kl_to_teacher, combined };
    Kind kind = Kind::cross_entropy;
    std::vector<int> labels;   // cross_entropy / combined
    ProbDist teacher;          // kl_to_teacher / combined
    double tau = 1.0;
    double alpha = 1.0;        // combined
    bool tau2_scaling = false;

    LossResult evaluate(const Tensor& logits) const {
        switch (kind) {
        case Kind::cross_entropy:
            return cross_entropy(logits, labels);
        case Kind::kl_to_teacher:
            return kl_to_teacher(teacher, logits, tau, tau2_scaling);
        case Kind::combined:
            return total_loss(cross_entropy(logits, labels), kl_to_teacher(teacher, logits, tau, tau2_scaling), alpha);
        }
        return {};
    }
};

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_parameter = 0; // index into Network::parameters()
    std::size_t worst_element = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t checked = 0;
};

/// Central differences (step h) against backprop; relative error uses
/// max(|a|, |b|, 1e-8) as denominator. Leaves parameters unchanged.
inline GradCheckResult grad_check(Network& net, const Tensor& batch, const LossSelector& loss, double h = 1e-5) {
    net.zero_grad();
    const Tensor logits = net.forward(batch, Mode::train);
    net.backward(loss.evaluate(logits).grad_logits);

    GradCheckResult result;
    auto params = net.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        const std::vector<double> analytic = *p.grad;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double saved = p.values[i];
            p.values[i] = saved + h;
            const double up = loss.evaluate(net.forward(batch)).value;
            p.values[i] = saved - h;
            const double down = loss.evaluate(net.forward(batch)).value;
            p.values[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
            const double rel = std::abs(analytic[i] - numeric) / denom;
            ++result.checked;
            if (rel > result.max_relative_error) {
                result.max_relative_error = rel;
                result.worst_parameter = k;
                result.worst_element = i;
                result.analytic = analytic[i];
                result.numeric = numeric;
            }
        }
    }
    net.zero_grad();
    return result;
}

} // namespace unlearn
