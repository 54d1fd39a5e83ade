#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "unlearn/eval/compare.hpp"
#include "unlearn/eval/evaluate.hpp"
#include "unlearn/io.hpp"

namespace unlearn::eval {

using nlohmann::json;

enum class ReportFormat { csv, json };

/// RFC 4180: quote fields containing a comma, quote, CR or LF; double inner quotes.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

/// 0.8011 -> "80.11%"; undefined -> "n/a".
inline std::string format_percent(double fraction) {
    if (std::isnan(fraction)) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", fraction * 100.0);
    return buf;
}

namespace detail {
inline json number_or_null(double v) { return std::isnan(v) ? json(nullptr) : json(v); }
inline double number_or_nan(const json& j) { return j.is_null() ? kUndefined : j.get<double>(); }
} // namespace detail

inline json to_json(const EvalReport& r) {
    json acc = json::array();
    for (double a : r.per_class_accuracy) acc.push_back(detail::number_or_null(a));
    return json{{"model_id", r.model_id},
                {"class_names", r.class_names},
                {"per_class_accuracy", acc},
                {"num_test_samples", r.num_test_samples},
                {"num_correct", r.num_correct},
                {"forgotten_classes", r.forgotten_classes},
                {"missing_classes", r.missing_classes},
                {"remaining_avg", detail::number_or_null(r.remaining_avg)},
                {"forgotten_avg", detail::number_or_null(r.forgotten_avg)},
                {"overall_accuracy", detail::number_or_null(r.overall_accuracy)},
                {"random_baseline", detail::number_or_null(r.random_baseline)}};
}

inline EvalReport report_from_json(const json& j) {
    EvalReport r;
    r.model_id = j.at("model_id").get<std::string>();
    r.class_names = j.at("class_names").get<std::vector<std::string>>();
    for (const auto& a : j.at("per_class_accuracy")) r.per_class_accuracy.push_back(detail::number_or_nan(a));
    r.num_test_samples = j.at("num_test_samples").get<std::vector<std::size_t>>();
    r.num_correct = j.at("num_correct").get<std::vector<std::size_t>>();
    r.forgotten_classes = j.at("forgotten_classes").get<std::set<int>>();
    r.missing_classes = j.at("missing_classes").get<std::vector<int>>();
    r.remaining_avg = detail::number_or_nan(j.at("remaining_avg"));
    r.forgotten_avg = detail::number_or_nan(j.at("forgotten_avg"));
    r.overall_accuracy = detail::number_or_nan(j.at("overall_accuracy"));
    r.random_baseline = detail::number_or_nan(j.at("random_baseline"));
    return r;
}

inline json to_json(const RecoveryTrace& t) {
    json pts = json::array();
    for (const auto& p : t.points)
        pts.push_back({{"epoch", p.epoch},
                       {"remaining_avg", detail::number_or_null(p.remaining_avg)},
                       {"forgotten_avg", detail::number_or_null(p.forgotten_avg)},
                       {"seconds", p.wall_seconds}});
    return {{"method", t.method}, {"points", pts}};
}

inline RecoveryTrace trace_from_json(const json& j) {
    RecoveryTrace t{j.at("method").get<std::string>(), {}};
    for (const auto& p : j.at("points"))
        t.points.push_back({p.at("epoch").get<std::size_t>(), detail::number_or_nan(p.at("remaining_avg")),
                            detail::number_or_nan(p.at("forgotten_avg")), p.at("seconds").get<double>()});
    return t;
}

inline json to_json(const MethodSummary& s) {
    return {{"method", s.method},
            {"epochs_to_threshold", s.epochs_to_threshold ? json(*s.epochs_to_threshold) : json("not reached")},
            {"final_remaining_avg", detail::number_or_null(s.final_remaining_avg)},
            {"final_forgotten_avg", detail::number_or_null(s.final_forgotten_avg)},
            {"total_seconds", s.total_seconds}};
}

inline json to_json(const ComparisonSummary& c) {
    return {{"threshold", c.threshold},
            {"ours", to_json(c.ours)},
            {"retrain", to_json(c.retrain)},
            {"epoch_speedup", c.epoch_speedup ? json(*c.epoch_speedup) : json(nullptr)}};
}

/// One row per class, then "remaining" and "forgotten"; one column per report.
inline std::string report_table_csv(const std::vector<EvalReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("emit_report: no reports");
    const auto& names = reports.front().class_names;
    for (const auto& r : reports)
        if (r.per_class_accuracy.size() != names.size())
            throw std::invalid_argument("emit_report: reports disagree on the number of classes");
    std::string out = "class_name";
    for (const auto& r : reports) out += "," + csv_field(r.model_id);
    out += "\n";
    for (std::size_t k = 0; k < names.size(); ++k) {
        out += csv_field(names[k]);
        for (const auto& r : reports) out += "," + format_percent(r.per_class_accuracy[k]);
        out += "\n";
    }
    out += "remaining";
    for (const auto& r : reports) out += "," + format_percent(r.remaining_avg);
    out += "\nforgotten";
    for (const auto& r : reports) out += "," + format_percent(r.forgotten_avg);
    out += "\n";
    return out;
}

/// Columns: method, epoch, remaining_avg, forgotten_avg, seconds.
inline std::string traces_csv(const std::vector<RecoveryTrace>& traces) {
    std::string out = "method,epoch,remaining_avg,forgotten_avg,seconds\n";
    char buf[128];
    for (const auto& t : traces)
        for (const auto& p : t.points) {
            std::snprintf(buf, sizeof buf, ",%zu,%.17g,%.17g,%.6f\n", p.epoch, p.remaining_avg, p.forgotten_avg,
                          p.wall_seconds);
            out += csv_field(t.method) + buf;
        }
    return out;
}

/// Table JSON: the CSV rows as objects plus the full reports and traces.
inline json report_json(const std::vector<EvalReport>& reports, const std::vector<RecoveryTrace>& traces) {
    if (reports.empty()) throw std::invalid_argument("emit_report: no reports");
    json rows = json::array();
    const auto& names = reports.front().class_names;
    for (std::size_t k = 0; k < names.size(); ++k) {
        json row{{"class_name", names[k]}};
        for (const auto& r : reports) row[r.model_id] = detail::number_or_null(r.per_class_accuracy.at(k));
        rows.push_back(row);
    }
    json remaining{{"class_name", "remaining"}}, forgotten{{"class_name", "forgotten"}};
    json columns = json::array();
    json full = json::array();
    for (const auto& r : reports) {
        columns.push_back(r.model_id);
        remaining[r.model_id] = detail::number_or_null(r.remaining_avg);
        forgotten[r.model_id] = detail::number_or_null(r.forgotten_avg);
        full.push_back(to_json(r));
    }
    json tr = json::array();
    for (const auto& t : traces) tr.push_back(to_json(t));
    return {{"columns", columns}, {"rows", rows}, {"remaining", remaining}, {"forgotten", forgotten},
            {"reports", full},    {"traces", tr}};
}

inline std::vector<EvalReport> reports_from_json(const json& j) {
    std::vector<EvalReport> out;
    for (const auto& r : j.at("reports")) out.push_back(report_from_json(r));
    return out;
}

/// Writes the table to `path`. For CSV, traces (if any) go to
/// "<stem>.trace.csv" next to it; for JSON they are embedded. Returns the
/// written paths.
inline std::vector<std::filesystem::path> emit_report(const std::vector<EvalReport>& reports,
                                                      const std::vector<RecoveryTrace>& traces,
                                                      const std::filesystem::path& path, ReportFormat format) {
    std::vector<std::filesystem::path> written;
    try {
        if (format == ReportFormat::json) {
            write_file_text(path, report_json(reports, traces).dump(2) + "\n");
            written.push_back(path);
        } else {
            write_file_text(path, report_table_csv(reports));
            written.push_back(path);
            if (!traces.empty()) {
                auto trace_path = path.parent_path() / (path.stem().string() + ".trace.csv");
                write_file_text(trace_path, traces_csv(traces));
                written.push_back(trace_path);
            }
        }
    } catch (const std::filesystem::filesystem_error& e) {
        throw std::runtime_error("emit_report: cannot write " + path.string() + ": " + e.what());
    }
    return written;
}

} // namespace unlearn::eval
