#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace unlearn::eval {

struct RecoveryPoint {
    std::size_t epoch = 0;
    double remaining_avg = 0.0;
    double forgotten_avg = 0.0;
    double wall_seconds = 0.0;
};

/// Accuracy-vs-epoch series of one method; epochs strictly increasing.
struct RecoveryTrace {
    std::string method;
    std::vector<RecoveryPoint> points;

    void validate() const {
        for (std::size_t i = 1; i < points.size(); ++i)
            if (points[i].epoch <= points[i - 1].epoch)
                throw std::invalid_argument("recovery trace " + method + ": epochs must be strictly increasing");
    }
};

struct MethodSummary {
    std::string method;
    std::optional<std::size_t> epochs_to_threshold; // nullopt: never reached
    double final_remaining_avg = 0.0;
    double final_forgotten_avg = 0.0;
    double total_seconds = 0.0;
};

struct ComparisonSummary {
    double threshold = 0.0;
    MethodSummary ours;
    MethodSummary retrain;
    /// retrain epochs / ours epochs, when both reached the threshold.
    std::optional<double> epoch_speedup;
};

/// First epoch whose remaining_avg >= threshold.
inline std::optional<std::size_t> epochs_to_threshold(const RecoveryTrace& trace, double threshold) {
    for (const auto& p : trace.points)
        if (p.remaining_avg >= threshold) return p.epoch;
    return std::nullopt;
}

inline MethodSummary summarize(const RecoveryTrace& trace, double threshold) {
    if (trace.points.empty()) throw std::invalid_argument("compare_methods: trace " + trace.method + " is empty");
    trace.validate();
    MethodSummary s;
    s.method = trace.method;
    s.epochs_to_threshold = epochs_to_threshold(trace, threshold);
    s.final_remaining_avg = trace.points.back().remaining_avg;
    s.final_forgotten_avg = trace.points.back().forgotten_avg;
    s.total_seconds = trace.points.back().wall_seconds;
    return s;
}

inline ComparisonSummary compare_methods(const RecoveryTrace& ours, const RecoveryTrace& retrain, double threshold) {
    ComparisonSummary c;
    c.threshold = threshold;
    c.ours = summarize(ours, threshold);
    c.retrain = summarize(retrain, threshold);
    if (c.ours.epochs_to_threshold && c.retrain.epochs_to_threshold)
        c.epoch_speedup =
            static_cast<double>(*c.retrain.epochs_to_threshold) / static_cast<double>(*c.ours.epochs_to_threshold);
    return c;
}

/// Threshold defaults to the retrain baseline's final remaining accuracy.
inline ComparisonSummary compare_methods(const RecoveryTrace& ours, const RecoveryTrace& retrain) {
    if (retrain.points.empty()) throw std::invalid_argument("compare_methods: retrain trace is empty");
    return compare_methods(ours, retrain, retrain.points.back().remaining_avg);
}

} // namespace unlearn::eval
