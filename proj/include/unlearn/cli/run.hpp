#pragma once

#include <exception>
#include <filesystem>
#include <iostream>
#include <ostream>
#include <string>
#include <vector>

#include "unlearn/cli/args.hpp"
#include "unlearn/cli/artifacts.hpp"
#include "unlearn/eval/report.hpp"
#include "unlearn/method/pipeline.hpp"

namespace unlearn::cli {

namespace detail {

inline std::filesystem::path input_path(const std::optional<std::filesystem::path>& given,
                                        const std::filesystem::path& out_dir, const std::string& fallback) {
    return given ? *given : out_dir / fallback;
}

inline Network load_model(const std::filesystem::path& path, const data::Dataset& like) {
    if (!std::filesystem::exists(path)) throw std::runtime_error("checkpoint not found: " + path.string());
    Network net = load_checkpoint(path);
    if (net.input_shape() != like.image_shape() || net.num_classes() != like.num_classes())
        throw std::runtime_error("checkpoint " + path.string() + " does not match dataset " + like.name());
    return net;
}

inline void print_report(std::ostream& out, const eval::EvalReport& r) {
    out << r.model_id << ": remaining " << eval::format_percent(r.remaining_avg) << ", forgotten "
        << eval::format_percent(r.forgotten_avg) << ", overall " << eval::format_percent(r.overall_accuracy) << "\n";
}

inline void write_report_table(ArtifactWriter& w, const std::vector<eval::EvalReport>& reports,
                               const std::vector<eval::RecoveryTrace>& traces) {
    w.text("report.csv", eval::report_table_csv(reports));
    if (!traces.empty()) {
        std::vector<eval::RecoveryTrace> stable;
        for (const auto& t : traces) stable.push_back(without_seconds(t));
        w.timed_text("recovery.csv", eval::traces_csv(traces), eval::traces_csv(stable));
        w.timed_text("report.json", eval::report_json(reports, traces).dump(2) + "\n",
                     eval::report_json(reports, stable).dump(2) + "\n");
    } else {
        w.text("report.json", eval::report_json(reports, {}).dump(2) + "\n");
    }
}

inline void run_pipeline(const Command& cmd, const TrainTestData& data, ArtifactWriter& w, std::ostream& out) {
    const auto r = unlearn_pipeline(data, cmd.experiment);
    w.checkpoint("original.ckpt", r.original);
    w.checkpoint("teacher.ckpt", r.teacher);
    w.checkpoint("scratch.ckpt", r.scratch);
    w.checkpoint("unlearned.ckpt", r.unlearned);
    w.checkpoint("retrained.ckpt", r.retrained);
    w.trace("original.trace.csv", r.original_trace);
    w.trace("erase.trace.csv", r.erase_trace);
    w.trace("reconstruct.trace.csv", r.reconstruct_trace);
    w.trace("retrain.trace.csv", r.retrain_trace);
    const std::vector<eval::EvalReport> reports{r.original_report, r.scratch_report, r.retrained_report,
                                                r.unlearned_report};
    write_report_table(w, reports, {r.reconstruct_trace.recovery("ours"), r.retrain_trace.recovery("retrain")});
    w.timed_text("comparison.json", eval::to_json(r.comparison).dump(2) + "\n",
                 eval::to_json(without_seconds(r.comparison)).dump(2) + "\n");
    out << "D_f: " << r.forget_size << " samples, D_r: " << r.remain_size << " samples\n";
    for (const auto& rep : reports) print_report(out, rep);
    const auto epochs = [](const eval::MethodSummary& s) {
        return s.epochs_to_threshold ? std::to_string(*s.epochs_to_threshold) : std::string("not reached");
    };
    out << "epochs to reach " << eval::format_percent(r.comparison.threshold)
        << " remaining: ours " << epochs(r.comparison.ours) << ", retrain " << epochs(r.comparison.retrain) << "\n";
}

inline void run_stage(const Command& cmd, ArtifactWriter& w, std::ostream& out) {
    const ExperimentConfig& cfg = cmd.experiment;
    const TrainTestData data = load_datasets(cfg.dataset, cfg.seed);
    const auto forgotten = forgotten_classes(cfg.forget);
    const auto evaluator = test_set_evaluator(data.test, forgotten);
    const auto& dir = w.out_dir();

    if (cmd.name == "pipeline") {
        run_pipeline(cmd, data, w, out);
    } else if (cmd.name == "train") {
        auto r = train_original(data.train, initial_model(cfg, data.train), cfg.train, evaluator);
        w.checkpoint("original.ckpt", r.model);
        w.trace("original.trace.csv", r.trace);
        const auto rep = eval::evaluate(r.model, data.test, forgotten, "original");
        w.eval_report("original.eval.json", rep);
        print_report(out, rep);
    } else if (cmd.name == "erase") {
        const auto part = data::partition_forget(data.train, cfg.forget);
        const Network md = load_model(input_path(cmd.model_path, dir, "original.ckpt"), data.train);
        auto r = knowledge_erase(md, part.forget, cfg.unlearn, evaluator);
        w.checkpoint("teacher.ckpt", r.teacher);
        w.checkpoint("scratch.ckpt", r.student);
        w.trace("erase.trace.csv", r.trace);
        const auto rep = eval::evaluate(r.student, data.test, forgotten, "scratch");
        w.eval_report("scratch.eval.json", rep);
        print_report(out, rep);
    } else if (cmd.name == "reconstruct") {
        const auto part = data::partition_forget(data.train, cfg.forget);
        Network mu = load_model(input_path(cmd.model_path, dir, "scratch.ckpt"), data.train);
        const Network md = load_model(input_path(cmd.teacher_path, dir, "original.ckpt"), data.train);
        auto r = reconstruct(std::move(mu), md, part.remain, cfg.unlearn, evaluator);
        w.checkpoint("unlearned.ckpt", r.model);
        w.trace("reconstruct.trace.csv", r.trace);
        const auto rep = eval::evaluate(r.model, data.test, forgotten, "ours");
        w.eval_report("ours.eval.json", rep);
        print_report(out, rep);
    } else if (cmd.name == "retrain") {
        const auto part = data::partition_forget(data.train, cfg.forget);
        auto r = retrain_baseline(part.remain, initial_model(cfg, data.train), retrain_config(cfg),
                                  derive_seed(cfg.seed, "retrain-init"), evaluator);
        w.checkpoint("retrained.ckpt", r.model);
        w.trace("retrain.trace.csv", r.trace);
        const auto rep = eval::evaluate(r.model, data.test, forgotten, "retrained");
        w.eval_report("retrained.eval.json", rep);
        print_report(out, rep);
    } else if (cmd.name == "eval") {
        const auto path = input_path(cmd.model_path, dir, "unlearned.ckpt");
        const Network net = load_model(path, data.test);
        const std::string id = path.stem().string();
        const auto rep = eval::evaluate(net, data.test, forgotten, id);
        w.eval_report(id + ".eval.json", rep);
        w.text(id + ".eval.csv", eval::report_table_csv({rep}));
        print_report(out, rep);
    } else if (cmd.name == "report") {
        std::vector<eval::EvalReport> reports;
        const std::vector<std::pair<std::string, std::string>> columns{
            {"original", "original.ckpt"}, {"scratch", "scratch.ckpt"},
            {"retrained", "retrained.ckpt"}, {"ours", "unlearned.ckpt"}};
        for (const auto& [id, file] : columns)
            reports.push_back(eval::evaluate(load_model(dir / file, data.test), data.test, forgotten, id));
        write_report_table(w, reports, {});
        for (const auto& rep : reports) print_report(out, rep);
    } else {
        throw UsageError("unknown subcommand " + cmd.name);
    }
}

} // namespace detail

/// Executes a parsed command. Returns 0 on success and 1 on a runtime
/// failure; after a failure the manifest is marked "incomplete".
inline int run(const Command& cmd, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    ArtifactWriter w(cmd.out_dir());
    try {
        detail::run_stage(cmd, w, out);
        w.write_manifest(cmd.name, cmd.config, true);
        out << "wrote " << (w.out_dir() / "manifest.json").string() << "\n";
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << cmd.name << ": " << e.what() << "\n";
        try {
            w.write_manifest(cmd.name, cmd.config, false, e.what());
        } catch (const std::exception&) {
        }
        return kExitFailure;
    }
}

/// parse_args + run, mapping every outcome to an exit code.
inline int main_entry(const std::vector<std::string>& argv, std::ostream& out = std::cout,
                      std::ostream& err = std::cerr) {
    Command cmd;
    try {
        cmd = parse_args(argv);
    } catch (const HelpRequested& h) {
        out << h.text;
        return kExitOk;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return run(cmd, out, err);
}

} // namespace unlearn::cli
