#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "unlearn/data/dataset.hpp"
#include "unlearn/nn/network.hpp"

namespace unlearn::eval {

inline constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

/// Per-class test accuracy plus the remaining / forgotten class means.
///
/// Classes without test samples carry NaN accuracy, are listed in
/// `missing_classes` and are excluded from every average.
struct EvalReport {
    std::string model_id;
    std::vector<std::string> class_names;
    std::vector<double> per_class_accuracy;
    std::vector<std::size_t> num_test_samples;
    std::vector<std::size_t> num_correct;
    std::set<int> forgotten_classes;
    std::vector<int> missing_classes;
    double remaining_avg = kUndefined;
    double forgotten_avg = kUndefined;
    double overall_accuracy = kUndefined;
    double random_baseline = kUndefined;

    std::size_t num_classes() const { return per_class_accuracy.size(); }
    std::size_t total_samples() const {
        std::size_t n = 0;
        for (auto c : num_test_samples) n += c;
        return n;
    }
};

/// Index of the largest entry; ties go to the lowest index.
inline int argmax(std::span<const double> row) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
        if (row[j] > row[best]) best = j;
    return static_cast<int>(best);
}

namespace detail {
inline double mean_defined(const std::vector<double>& acc, const std::set<int>& classes, bool members) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < acc.size(); ++k) {
        if (classes.count(static_cast<int>(k)) != static_cast<std::size_t>(members) || std::isnan(acc[k])) continue;
        sum += acc[k];
        ++n;
    }
    return n ? sum / static_cast<double>(n) : kUndefined;
}
} // namespace detail

/// Builds a report from predicted and true labels.
inline EvalReport evaluate_predictions(std::span<const int> predictions, std::span<const int> labels,
                                       std::size_t num_classes, const std::set<int>& forgotten_classes,
                                       std::string model_id = "model", std::vector<std::string> class_names = {}) {
    if (predictions.size() != labels.size()) throw std::invalid_argument("evaluate: prediction/label count mismatch");
    if (labels.empty()) throw std::invalid_argument("evaluate: empty test set");
    EvalReport r;
    r.model_id = std::move(model_id);
    r.class_names = std::move(class_names);
    if (r.class_names.empty())
        for (std::size_t k = 0; k < num_classes; ++k) r.class_names.push_back(std::to_string(k));
    r.forgotten_classes = forgotten_classes;
    r.num_test_samples.assign(num_classes, 0);
    r.num_correct.assign(num_classes, 0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto y = static_cast<std::size_t>(labels[i]);
        if (y >= num_classes) throw std::invalid_argument("evaluate: label outside class range");
        ++r.num_test_samples[y];
        if (predictions[i] == labels[i]) {
            ++r.num_correct[y];
            ++correct;
        }
    }
    r.per_class_accuracy.resize(num_classes);
    for (std::size_t k = 0; k < num_classes; ++k) {
        if (r.num_test_samples[k] == 0) {
            r.per_class_accuracy[k] = kUndefined;
            r.missing_classes.push_back(static_cast<int>(k));
        } else {
            r.per_class_accuracy[k] =
                static_cast<double>(r.num_correct[k]) / static_cast<double>(r.num_test_samples[k]);
        }
    }
    r.remaining_avg = detail::mean_defined(r.per_class_accuracy, forgotten_classes, false);
    r.forgotten_avg = detail::mean_defined(r.per_class_accuracy, forgotten_classes, true);
    r.overall_accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
    r.random_baseline = 1.0 / static_cast<double>(num_classes);
    return r;
}

/// Argmax predictions of `model` over `test`, batch by batch.
inline std::vector<int> predict(const Network& model, const data::Dataset& test, std::size_t batch_size = 250) {
    std::vector<int> preds;
    preds.reserve(test.size());
    const ImageShape s = test.image_shape();
    const std::size_t per = test.sample_size();
    for (std::size_t start = 0; start < test.size(); start += batch_size) {
        const std::size_t n = std::min(batch_size, test.size() - start);
        Tensor batch({n, s.channels, s.height, s.width});
        const auto px = test.all_pixels().subspan(start * per, n * per);
        std::copy(px.begin(), px.end(), batch.values.begin());
        const Tensor logits = model.infer(batch);
        for (std::size_t b = 0; b < n; ++b) preds.push_back(argmax(logits.row(b)));
    }
    return preds;
}

/// Pure: reads the model and test set only.
inline EvalReport evaluate(const Network& model, const data::Dataset& test, const std::set<int>& forgotten_classes,
                           std::string model_id = "model") {
    if (test.empty()) throw std::invalid_argument("evaluate: empty test set");
    if (model.num_classes() != test.num_classes())
        throw std::invalid_argument("evaluate: model has " + std::to_string(model.num_classes()) +
                                    " classes, test set has " + std::to_string(test.num_classes()));
    const auto preds = predict(model, test);
    return evaluate_predictions(preds, test.labels(), test.num_classes(), forgotten_classes, std::move(model_id),
                                test.class_names());
}

} // namespace unlearn::eval
