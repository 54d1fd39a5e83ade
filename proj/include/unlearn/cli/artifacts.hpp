#pragma once

// Artifact files and the run manifest.
//
// Every file a command writes is listed in <out_dir>/manifest.json with its
// SHA-256. Trace and comparison files carry wall-clock seconds; their hash is
// taken over the same document with the timing fields zeroed
// ("hash_excludes": "seconds"), so two runs of one config yield identical
// manifests.

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "unlearn/eval/report.hpp"
#include "unlearn/io.hpp"
#include "unlearn/method/stage.hpp"
#include "unlearn/nn/checkpoint.hpp"

namespace unlearn::cli {

using nlohmann::json;

inline std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    std::string hex;
    char buf[3];
    for (unsigned i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        hex += buf;
    }
    return hex;
}

inline std::string sha256_hex(const std::string& text) {
    return sha256_hex({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

/// Columns: stage, epoch, kl, ce, total, seconds, remaining_avg, forgotten_avg, overall_accuracy.
inline std::string stage_trace_csv(const StageTrace& trace, bool with_seconds = true) {
    std::string out = "stage,epoch,kl,ce,total,seconds,remaining_avg,forgotten_avg,overall_accuracy\n";
    char buf[256];
    for (const auto& r : trace.records) {
        const double nan = eval::kUndefined;
        const double rem = r.snapshot ? r.snapshot->remaining_avg : nan;
        const double forg = r.snapshot ? r.snapshot->forgotten_avg : nan;
        const double all = r.snapshot ? r.snapshot->overall_accuracy : nan;
        std::snprintf(buf, sizeof buf, ",%zu,%.17g,%.17g,%.17g,%.6f,%.17g,%.17g,%.17g\n", r.epoch, r.kl, r.ce,
                      r.total, with_seconds ? r.seconds : 0.0, rem, forg, all);
        out += eval::csv_field(r.stage) + buf;
    }
    return out;
}

inline eval::RecoveryTrace without_seconds(eval::RecoveryTrace t) {
    for (auto& p : t.points) p.wall_seconds = 0.0;
    return t;
}

inline eval::ComparisonSummary without_seconds(eval::ComparisonSummary c) {
    c.ours.total_seconds = 0.0;
    c.retrain.total_seconds = 0.0;
    return c;
}

/// Writes files under one output directory and records them for the manifest.
class ArtifactWriter {
public:
    explicit ArtifactWriter(std::filesystem::path out_dir) : out_dir_(std::move(out_dir)) {}

    const std::filesystem::path& out_dir() const { return out_dir_; }
    std::filesystem::path path(const std::string& name) const { return out_dir_ / name; }

    void bytes(const std::string& name, std::span<const std::uint8_t> content) {
        write_file_bytes(path(name), content);
        entries_.push_back({{"path", name}, {"sha256", sha256_hex(content)}});
    }

    void text(const std::string& name, const std::string& content) {
        write_file_text(path(name), content);
        entries_.push_back({{"path", name}, {"sha256", sha256_hex(content)}});
    }

    /// `content` as written; `stable` is the same document with timing zeroed.
    void timed_text(const std::string& name, const std::string& content, const std::string& stable) {
        write_file_text(path(name), content);
        entries_.push_back({{"path", name}, {"sha256", sha256_hex(stable)}, {"hash_excludes", "seconds"}});
    }

    void checkpoint(const std::string& name, const Network& net) { bytes(name, checkpoint_bytes(net)); }

    void trace(const std::string& name, const StageTrace& t) {
        timed_text(name, stage_trace_csv(t, true), stage_trace_csv(t, false));
    }

    void eval_report(const std::string& name, const eval::EvalReport& r) {
        text(name, eval::to_json(r).dump(2) + "\n");
    }

    const json& entries() const { return entries_; }

    /// manifest.json: command, status, resolved config and artifact list.
    void write_manifest(const std::string& command, const json& config, bool complete,
                        const std::string& error = {}) const {
        json m{{"command", command},
               {"status", complete ? "complete" : "incomplete"},
               {"config", config},
               {"artifacts", entries_}};
        if (!error.empty()) m["error"] = error;
        write_file_text(out_dir_ / "manifest.json", m.dump(2) + "\n");
    }

private:
    std::filesystem::path out_dir_;
    json entries_ = json::array();
};

} // namespace unlearn::cli
