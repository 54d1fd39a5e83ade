#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "unlearn/nn/network.hpp"

namespace unlearn {

/// SGD with momentum: v <- momentum * v + g; p <- p - lr * v.
class OptimizerState {
public:
    OptimizerState(double learning_rate, double momentum) : learning_rate_(learning_rate), momentum_(momentum) {
        if (!(learning_rate > 0.0)) throw std::invalid_argument("optimizer: learning_rate must be > 0");
        if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("optimizer: momentum must be in [0,1)");
    }

    double learning_rate() const { return learning_rate_; }
    double momentum() const { return momentum_; }
    const std::vector<std::vector<double>>& velocity() const { return velocity_; }

    void step(Network& net) {
        auto params = net.parameters();
        if (velocity_.empty()) {
            for (const Tensor* p : params) velocity_.emplace_back(p->size(), 0.0);
        } else if (velocity_.size() != params.size()) {
            throw std::logic_error("sgd_step: optimizer state belongs to a different network");
        }
        for (std::size_t k = 0; k < params.size(); ++k) {
            Tensor& p = *params[k];
            if (!p.grad) throw std::logic_error("sgd_step: parameter " + std::to_string(k) + " has no gradient");
            auto& v = velocity_[k];
            if (v.size() != p.size()) throw std::logic_error("sgd_step: velocity shape mismatch");
            auto& g = *p.grad;
            for (std::size_t i = 0; i < p.size(); ++i) {
                v[i] = momentum_ * v[i] + g[i];
                p.values[i] -= learning_rate_ * v[i];
                g[i] = 0.0;
            }
        }
    }

private:
    double learning_rate_;
    double momentum_;
    std::vector<std::vector<double>> velocity_;
};

inline void sgd_step(Network& net, OptimizerState& state) { state.step(net); }

} // namespace unlearn
