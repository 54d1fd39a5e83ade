#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "unlearn/nn/rng.hpp"
#include "unlearn/nn/tensor.hpp"

namespace unlearn {

struct Conv2d {
    std::size_t out_channels = 1;
    std::size_t kernel = 3;
    std::size_t stride = 1;
    std::size_t padding = 0;
    friend bool operator==(const Conv2d&, const Conv2d&) = default;
};
struct ReLU {
    friend bool operator==(const ReLU&, const ReLU&) = default;
};
struct MaxPool2d {
    std::size_t size = 2;
    friend bool operator==(const MaxPool2d&, const MaxPool2d&) = default;
};
struct Flatten {
    friend bool operator==(const Flatten&, const Flatten&) = default;
};
struct Linear {
    std::size_t out_features = 1;
    friend bool operator==(const Linear&, const Linear&) = default;
};

using LayerSpec = std::variant<Conv2d, ReLU, MaxPool2d, Flatten, Linear>;

inline std::string layer_name(const LayerSpec& spec) {
    static constexpr const char* names[] = {"Conv2d", "ReLU", "MaxPool2d", "Flatten", "Linear"};
    return names[spec.index()];
}

/// (channels, height, width) of a single sample.
struct ImageShape {
    std::size_t channels = 1;
    std::size_t height = 1;
    std::size_t width = 1;
    friend bool operator==(const ImageShape&, const ImageShape&) = default;
    Shape as_shape() const { return {channels, height, width}; }
};

/// Channel/kernel choices for the two-conv + one-linear classifier.
struct ModelConfig {
    std::size_t conv1_channels = 8;
    std::size_t conv2_channels = 16;
    std::size_t kernel = 3;
    std::size_t padding = 1;
    std::size_t pool = 2;
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class Mode { eval, train };

namespace detail {
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MMatrix = Eigen::Map<Matrix>;
using CMatrix = Eigen::Map<const Matrix>;
using MVector = Eigen::Map<Eigen::VectorXd>;
using CVector = Eigen::Map<const Eigen::VectorXd>;
} // namespace detail

/// Fixed layer sequence with per-layer parameters and a backprop cache.
///
/// Parameters stay empty until `init_random`, `clone_params` or a checkpoint
/// load fills them. A frozen network (teacher) owns no gradient buffers and
/// refuses training-mode forwards.
class Network {
    using Matrix = detail::Matrix;
    using MMatrix = detail::MMatrix;
    using CMatrix = detail::CMatrix;
    using MVector = detail::MVector;
    using CVector = detail::CVector;

public:
    Network(std::vector<LayerSpec> layers, ImageShape input, std::size_t num_classes)
        : layers_(std::move(layers)), input_(input), num_classes_(num_classes) {
        if (num_classes_ == 0) throw std::invalid_argument("network: num_classes must be positive");
        if (layers_.empty()) throw std::invalid_argument("network: empty layer list");
        Shape cur = input_.as_shape();
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            in_shapes_.push_back(cur);
            cur = output_shape(i, cur);
            out_shapes_.push_back(cur);
        }
        if (shape_size(cur) != num_classes_)
            throw ShapeError("network: final output has " + std::to_string(shape_size(cur)) +
                             " values, expected num_classes=" + std::to_string(num_classes_));
        params_.resize(layers_.size());
    }

    const std::vector<LayerSpec>& layers() const { return layers_; }
    ImageShape input_shape() const { return input_; }
    std::size_t num_classes() const { return num_classes_; }
    const Shape& layer_input_shape(std::size_t i) const { return in_shapes_.at(i); }
    const Shape& layer_output_shape(std::size_t i) const { return out_shapes_.at(i); }

    bool initialized() const { return initialized_; }
    bool frozen() const { return frozen_; }
    std::size_t forward_calls() const { return forward_calls_; }

    /// Parameter tensors of layer i: {weight, bias} for Conv2d/Linear, empty otherwise.
    std::vector<Tensor>& layer_params(std::size_t i) { return params_.at(i); }
    const std::vector<Tensor>& layer_params(std::size_t i) const { return params_.at(i); }

    std::vector<Tensor*> parameters() {
        std::vector<Tensor*> out;
        for (auto& layer : params_)
            for (auto& p : layer) out.push_back(&p);
        return out;
    }
    std::vector<const Tensor*> parameters() const {
        std::vector<const Tensor*> out;
        for (const auto& layer : params_)
            for (const auto& p : layer) out.push_back(&p);
        return out;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const Tensor* p : parameters()) n += p->size();
        return n;
    }

    /// Shapes of every parameter tensor in layer order (weight then bias).
    std::vector<Shape> parameter_shapes() const {
        std::vector<Shape> out;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const Shape& in = in_shapes_[i];
            if (const auto* c = std::get_if<Conv2d>(&layers_[i])) {
                out.push_back({c->out_channels, in[0], c->kernel, c->kernel});
                out.push_back({c->out_channels});
            } else if (const auto* l = std::get_if<Linear>(&layers_[i])) {
                out.push_back({l->out_features, in[0]});
                out.push_back({l->out_features});
            }
        }
        return out;
    }

    /// Allocates zeroed parameters (and gradients unless frozen).
    void allocate_zero() {
        std::size_t k = 0;
        const auto shapes = parameter_shapes();
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            params_[i].clear();
            if (std::holds_alternative<Conv2d>(layers_[i]) || std::holds_alternative<Linear>(layers_[i])) {
                params_[i].emplace_back(shapes[k++]);
                params_[i].emplace_back(shapes[k++]);
                if (!frozen_)
                    for (auto& p : params_[i]) p.enable_grad();
            }
        }
        initialized_ = true;
        cache_valid_ = false;
    }

    void freeze() {
        frozen_ = true;
        for (auto& layer : params_)
            for (auto& p : layer) p.grad.reset();
        clear_cache();
    }

    void zero_grad() {
        for (auto& layer : params_)
            for (auto& p : layer) p.zero_grad();
    }

    void clear_cache() {
        cache_.clear();
        cache_valid_ = false;
    }

    void reset_forward_calls() { forward_calls_ = 0; }

    /// batch: [B, C, H, W]; returns logits [B, num_classes]. Training mode
    /// caches activations for `backward`. Counted in forward_calls().
    Tensor forward(const Tensor& batch, Mode mode = Mode::eval) {
        if (mode == Mode::train && frozen_) throw std::logic_error("forward: frozen network cannot train");
        check_batch(batch);
        ++forward_calls_;
        if (mode == Mode::eval) {
            cache_valid_ = false;
            return run_layers(batch, nullptr);
        }
        cache_.assign(layers_.size(), LayerCache{});
        Tensor out = run_layers(batch, &cache_);
        cache_valid_ = true;
        cached_batch_ = batch.dim(0);
        return out;
    }

    /// Inference as a teacher: no cache, but counted in forward_calls().
    Tensor query(const Tensor& batch) const {
        check_batch(batch);
        ++forward_calls_;
        return run_layers(batch, nullptr);
    }

    /// Inference without any side effect; safe to call concurrently.
    Tensor infer(const Tensor& batch) const {
        check_batch(batch);
        return run_layers(batch, nullptr);
    }

    /// Accumulates parameter gradients from d(loss)/d(logits) of the last training forward.
    void backward(const Tensor& grad_logits) {
        if (!cache_valid_) throw std::logic_error("backward: no cached training forward pass");
        if (grad_logits.size() != cached_batch_ * num_classes_)
            throw ShapeError("backward: gradient shape " + shape_string(grad_logits.shape) +
                             " does not match cached batch");
        Tensor grad = grad_logits;
        for (std::size_t idx = layers_.size(); idx-- > 0;) {
            Shape in_shape{cached_batch_};
            in_shape.insert(in_shape.end(), in_shapes_[idx].begin(), in_shapes_[idx].end());
            Tensor grad_in(in_shape);
            const bool need_input_grad = idx > 0;
            std::visit([&](const auto& spec) { backward_layer(spec, idx, grad, grad_in, need_input_grad); },
                       layers_[idx]);
            grad = std::move(grad_in);
        }
        clear_cache();
    }

private:
    struct LayerCache {
        Tensor input;                    // ReLU / Linear
        Tensor columns;                  // Conv2d: im2col patches [B, C*K*K, Ho*Wo]
        std::vector<std::size_t> argmax; // MaxPool2d: flat input index per output
    };

    void check_batch(const Tensor& batch) const {
        if (!initialized_) throw std::logic_error("forward: network parameters are not initialized");
        const Shape expected = input_.as_shape();
        if (batch.rank() != 4 || batch.dim(0) == 0 ||
            !std::equal(expected.begin(), expected.end(), batch.shape.begin() + 1))
            throw ShapeError("forward: batch shape " + shape_string(batch.shape) + " does not match input [B," +
                             shape_string(expected).substr(1));
    }

    Tensor run_layers(const Tensor& batch, std::vector<LayerCache>* caches) const {
        const std::size_t B = batch.dim(0);
        Tensor cur = batch;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            Shape out_shape{B};
            out_shape.insert(out_shape.end(), out_shapes_[i].begin(), out_shapes_[i].end());
            Tensor next(out_shape);
            LayerCache* cache = caches ? &(*caches)[i] : nullptr;
            std::visit([&](const auto& spec) { forward_layer(spec, i, cur, next, cache); }, layers_[i]);
            require_finite(next, "layer " + std::to_string(i) + " (" + layer_name(layers_[i]) + ")");
            if (cache && (std::holds_alternative<ReLU>(layers_[i]) || std::holds_alternative<Linear>(layers_[i])))
                cache->input = std::move(cur);
            cur = std::move(next);
        }
        cur.shape = {B, num_classes_};
        return cur;
    }

    Shape output_shape(std::size_t i, const Shape& in) const {
        const auto where = "layer " + std::to_string(i) + " (" + layer_name(layers_[i]) + ")";
        return std::visit(
            [&](const auto& spec) -> Shape {
                using T = std::decay_t<decltype(spec)>;
                if constexpr (std::is_same_v<T, Conv2d>) {
                    if (in.size() != 3) throw ShapeError(where + ": expects a [C,H,W] input");
                    if (spec.kernel == 0 || spec.stride == 0 || spec.out_channels == 0)
                        throw ShapeError(where + ": kernel, stride and out_channels must be positive");
                    if (in[1] + 2 * spec.padding < spec.kernel || in[2] + 2 * spec.padding < spec.kernel)
                        throw ShapeError(where + ": kernel larger than padded input " + shape_string(in));
                    return {spec.out_channels, (in[1] + 2 * spec.padding - spec.kernel) / spec.stride + 1,
                            (in[2] + 2 * spec.padding - spec.kernel) / spec.stride + 1};
                } else if constexpr (std::is_same_v<T, MaxPool2d>) {
                    if (in.size() != 3) throw ShapeError(where + ": expects a [C,H,W] input");
                    if (spec.size == 0 || in[1] < spec.size || in[2] < spec.size)
                        throw ShapeError(where + ": pool size does not fit input " + shape_string(in));
                    return {in[0], in[1] / spec.size, in[2] / spec.size};
                } else if constexpr (std::is_same_v<T, Flatten>) {
                    return {shape_size(in)};
                } else if constexpr (std::is_same_v<T, Linear>) {
                    if (in.size() != 1) throw ShapeError(where + ": expects a flat input; insert Flatten first");
                    if (spec.out_features == 0) throw ShapeError(where + ": out_features must be positive");
                    return {spec.out_features};
                } else {
                    return in;
                }
            },
            layers_[i]);
    }

    struct ConvGeometry {
        std::size_t C, H, W, O, Ho, Wo, K, S, P;
        std::size_t patch() const { return C * K * K; }
        std::size_t pixels() const { return Ho * Wo; }
    };

    ConvGeometry conv_geometry(const Conv2d& spec, std::size_t i) const {
        return {in_shapes_[i][0],  in_shapes_[i][1],  in_shapes_[i][2], out_shapes_[i][0], out_shapes_[i][1],
                out_shapes_[i][2], spec.kernel,       spec.stride,      spec.padding};
    }

    // col[(c*K + ky)*K + kx][oy*Wo + ox] = x[c][oy*S + ky - P][ox*S + kx - P], zero outside.
    static void im2col(const ConvGeometry& g, const double* x, double* col) {
        for (std::size_t c = 0; c < g.C; ++c)
            for (std::size_t ky = 0; ky < g.K; ++ky)
                for (std::size_t kx = 0; kx < g.K; ++kx) {
                    double* row = col + ((c * g.K + ky) * g.K + kx) * g.pixels();
                    for (std::size_t oy = 0; oy < g.Ho; ++oy) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.S + ky) -
                                                  static_cast<std::ptrdiff_t>(g.P);
                        double* dst = row + oy * g.Wo;
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.H)) {
                            std::fill(dst, dst + g.Wo, 0.0);
                            continue;
                        }
                        const double* src = x + (c * g.H + static_cast<std::size_t>(iy)) * g.W;
                        for (std::size_t ox = 0; ox < g.Wo; ++ox) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.S + kx) -
                                                      static_cast<std::ptrdiff_t>(g.P);
                            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.W))
                                          ? 0.0
                                          : src[static_cast<std::size_t>(ix)];
                        }
                    }
                }
    }

    // Adjoint of im2col: scatters-and-adds col back into dx.
    static void col2im(const ConvGeometry& g, const double* col, double* dx) {
        for (std::size_t c = 0; c < g.C; ++c)
            for (std::size_t ky = 0; ky < g.K; ++ky)
                for (std::size_t kx = 0; kx < g.K; ++kx) {
                    const double* row = col + ((c * g.K + ky) * g.K + kx) * g.pixels();
                    for (std::size_t oy = 0; oy < g.Ho; ++oy) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.S + ky) -
                                                  static_cast<std::ptrdiff_t>(g.P);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.H)) continue;
                        double* dst = dx + (c * g.H + static_cast<std::size_t>(iy)) * g.W;
                        for (std::size_t ox = 0; ox < g.Wo; ++ox) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.S + kx) -
                                                      static_cast<std::ptrdiff_t>(g.P);
                            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.W))
                                dst[static_cast<std::size_t>(ix)] += row[oy * g.Wo + ox];
                        }
                    }
                }
    }

    void forward_layer(const Conv2d& spec, std::size_t i, const Tensor& x, Tensor& y, LayerCache* cache) const {
        const ConvGeometry g = conv_geometry(spec, i);
        const std::size_t B = x.dim(0), per_col = g.patch() * g.pixels();
        const CMatrix w(params_[i][0].values.data(), static_cast<Eigen::Index>(g.O),
                        static_cast<Eigen::Index>(g.patch()));
        const CVector bias(params_[i][1].values.data(), static_cast<Eigen::Index>(g.O));
        std::vector<double> scratch(cache ? 0 : per_col);
        if (cache) cache->columns = Tensor({B, g.patch(), g.pixels()});
        for (std::size_t b = 0; b < B; ++b) {
            double* col = cache ? cache->columns.values.data() + b * per_col : scratch.data();
            im2col(g, x.values.data() + b * g.C * g.H * g.W, col);
            const CMatrix cols(col, static_cast<Eigen::Index>(g.patch()), static_cast<Eigen::Index>(g.pixels()));
            MMatrix out(y.values.data() + b * g.O * g.pixels(), static_cast<Eigen::Index>(g.O),
                        static_cast<Eigen::Index>(g.pixels()));
            out.noalias() = w * cols;
            out.colwise() += bias;
        }
    }

    void forward_layer(const ReLU&, std::size_t, const Tensor& x, Tensor& y, LayerCache*) const {
        for (std::size_t k = 0; k < x.size(); ++k) y[k] = x[k] > 0.0 ? x[k] : 0.0;
    }

    void forward_layer(const MaxPool2d& spec, std::size_t i, const Tensor& x, Tensor& y, LayerCache* cache) const {
        const std::size_t B = x.dim(0);
        const std::size_t C = in_shapes_[i][0], H = in_shapes_[i][1], W = in_shapes_[i][2];
        const std::size_t Ho = out_shapes_[i][1], Wo = out_shapes_[i][2], S = spec.size;
        if (cache) cache->argmax.resize(y.size());
        for (std::size_t bc = 0; bc < B * C; ++bc)
            for (std::size_t oy = 0; oy < Ho; ++oy)
                for (std::size_t ox = 0; ox < Wo; ++ox) {
                    std::size_t best = (bc * H + oy * S) * W + ox * S;
                    for (std::size_t dy = 0; dy < S; ++dy)
                        for (std::size_t dx = 0; dx < S; ++dx) {
                            const std::size_t at = (bc * H + oy * S + dy) * W + ox * S + dx;
                            if (x[at] > x[best]) best = at; // ties keep the first element
                        }
                    const std::size_t out = (bc * Ho + oy) * Wo + ox;
                    y[out] = x[best];
                    if (cache) cache->argmax[out] = best;
                }
    }

    void forward_layer(const Flatten&, std::size_t, const Tensor& x, Tensor& y, LayerCache*) const {
        y.values = x.values;
    }

    void forward_layer(const Linear& spec, std::size_t i, const Tensor& x, Tensor& y, LayerCache*) const {
        const auto B = static_cast<Eigen::Index>(x.dim(0)), In = static_cast<Eigen::Index>(in_shapes_[i][0]),
                   Out = static_cast<Eigen::Index>(spec.out_features);
        const CMatrix w(params_[i][0].values.data(), Out, In);
        const CVector bias(params_[i][1].values.data(), Out);
        const CMatrix xs(x.values.data(), B, In);
        MMatrix ys(y.values.data(), B, Out);
        ys.noalias() = xs * w.transpose();
        ys.rowwise() += bias.transpose();
    }

    void backward_layer(const Conv2d& spec, std::size_t i, const Tensor& dy, Tensor& dx, bool need_input_grad) {
        const ConvGeometry g = conv_geometry(spec, i);
        const std::size_t B = cached_batch_, per_col = g.patch() * g.pixels();
        const auto O = static_cast<Eigen::Index>(g.O), patch = static_cast<Eigen::Index>(g.patch()),
                   pixels = static_cast<Eigen::Index>(g.pixels());
        const CMatrix w(params_[i][0].values.data(), O, patch);
        MMatrix dw(params_[i][0].grad->data(), O, patch);
        MVector db(params_[i][1].grad->data(), O);
        Matrix dcol(patch, pixels);
        for (std::size_t b = 0; b < B; ++b) {
            const CMatrix cols(cache_[i].columns.values.data() + b * per_col, patch, pixels);
            const CMatrix grad(dy.values.data() + b * g.O * g.pixels(), O, pixels);
            dw.noalias() += grad * cols.transpose();
            db += grad.rowwise().sum();
            if (need_input_grad) {
                dcol.noalias() = w.transpose() * grad;
                col2im(g, dcol.data(), dx.values.data() + b * g.C * g.H * g.W);
            }
        }
    }

    void backward_layer(const ReLU&, std::size_t i, const Tensor& dy, Tensor& dx, bool) {
        const Tensor& x = cache_[i].input;
        for (std::size_t k = 0; k < x.size(); ++k) dx[k] = x[k] > 0.0 ? dy[k] : 0.0;
    }

    void backward_layer(const MaxPool2d&, std::size_t i, const Tensor& dy, Tensor& dx, bool) {
        const auto& argmax = cache_[i].argmax;
        for (std::size_t k = 0; k < dy.size(); ++k) dx[argmax[k]] += dy[k];
    }

    void backward_layer(const Flatten&, std::size_t, const Tensor& dy, Tensor& dx, bool) { dx.values = dy.values; }

    void backward_layer(const Linear& spec, std::size_t i, const Tensor& dy, Tensor& dx, bool need_input_grad) {
        const auto B = static_cast<Eigen::Index>(cached_batch_), In = static_cast<Eigen::Index>(in_shapes_[i][0]),
                   Out = static_cast<Eigen::Index>(spec.out_features);
        const CMatrix xs(cache_[i].input.values.data(), B, In);
        const CMatrix grad(dy.values.data(), B, Out);
        const CMatrix w(params_[i][0].values.data(), Out, In);
        MMatrix dw(params_[i][0].grad->data(), Out, In);
        MVector db(params_[i][1].grad->data(), Out);
        dw.noalias() += grad.transpose() * xs;
        db += grad.colwise().sum().transpose();
        if (need_input_grad) MMatrix(dx.values.data(), B, In).noalias() = grad * w;
    }

    std::vector<LayerSpec> layers_;
    ImageShape input_;
    std::size_t num_classes_;
    std::vector<Shape> in_shapes_;
    std::vector<Shape> out_shapes_;
    std::vector<std::vector<Tensor>> params_;
    std::vector<LayerCache> cache_;
    std::size_t cached_batch_ = 0;
    mutable std::size_t forward_calls_ = 0;
    bool cache_valid_ = false;
    bool initialized_ = false;
    bool frozen_ = false;
};

/// Conv(k)->ReLU->MaxPool->Conv(k)->ReLU->MaxPool->Flatten->Linear(num_classes).
inline Network build_model(ImageShape input, std::size_t num_classes, const ModelConfig& cfg = {}) {
    if (num_classes < 2) throw std::invalid_argument("build_model: num_classes must be >= 2");
    return Network({Conv2d{cfg.conv1_channels, cfg.kernel, 1, cfg.padding}, ReLU{}, MaxPool2d{cfg.pool},
                    Conv2d{cfg.conv2_channels, cfg.kernel, 1, cfg.padding}, ReLU{}, MaxPool2d{cfg.pool}, Flatten{},
                    Linear{num_classes}},
                   input, num_classes);
}

/// The fixed 8/16-channel classifier for MNIST-like (1x28x28) and CIFAR-like (3x32x32) inputs.
inline Network build_reference_model(ImageShape input, std::size_t num_classes) {
    if (input.channels != 1 && input.channels != 3)
        throw std::invalid_argument("build_reference_model: channels must be 1 or 3, got " +
                                    std::to_string(input.channels));
    if (input.height != input.width || (input.height != 28 && input.height != 32))
        throw std::invalid_argument("build_reference_model: input must be 28x28 or 32x32, got " +
                                    std::to_string(input.height) + "x" + std::to_string(input.width));
    if (num_classes < 2)
        throw std::invalid_argument("build_reference_model: num_classes must be >= 2, got " + std::to_string(num_classes));
    return build_model(input, num_classes, ModelConfig{});
}

/// Weights ~ U(-b, b) with b = sqrt(1 / fan_in); biases zero. Draw order is
/// layer order, weight elements row-major.
inline void init_random(Network& net, RngSeed seed) {
    net.allocate_zero();
    Rng rng = make_rng(seed);
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        auto& params = net.layer_params(i);
        if (params.empty()) continue;
        Tensor& w = params[0];
        const std::size_t fan_in = w.size() / w.dim(0);
        const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
        for (double& v : w.values) v = uniform(rng, -bound, bound);
    }
}

/// Deep copy of an initialized network as a fresh trainable student.
inline Network clone_params(const Network& src) {
    if (!src.initialized()) throw std::logic_error("clone_params: source network is not initialized");
    Network copy = src;
    copy.clear_cache();
    copy.reset_forward_calls();
    if (copy.frozen()) {
        Network fresh(src.layers(), src.input_shape(), src.num_classes());
        fresh.allocate_zero();
        auto dst = fresh.parameters();
        auto from = src.parameters();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k]->values = from[k]->values;
        return fresh;
    }
    copy.zero_grad();
    return copy;
}

} // namespace unlearn
