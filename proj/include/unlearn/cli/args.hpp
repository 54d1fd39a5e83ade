#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "unlearn/config.hpp"

namespace unlearn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"train", "erase", "reconstruct", "retrain",
                                                "pipeline", "eval", "report"};
    return names;
}

inline std::string describe(const std::string& name) {
    if (name == "train") return "Train the original model M_d on the full training set";
    if (name == "erase") return "Distill the forget set against a stochastic teacher";
    if (name == "reconstruct") return "Distill the remaining set against M_d";
    if (name == "retrain") return "Train the baseline M_r from scratch on the remaining set";
    if (name == "pipeline") return "Run all stages and write the comparison report";
    if (name == "eval") return "Evaluate one checkpoint on the test set";
    if (name == "report") return "Evaluate every stage checkpoint in the output directory";
    return "";
}

/// Bad command line or configuration; maps to exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// `--help` was requested; carries the help text.
struct HelpRequested {
    std::string text;
};

struct Command {
    std::string name;
    std::filesystem::path config_path;
    std::vector<std::string> overrides; // "dotted.key=value", applied in order
    std::optional<std::filesystem::path> model_path;
    std::optional<std::filesystem::path> teacher_path;
    nlohmann::json config;      // file + overrides, fully resolved
    ExperimentConfig experiment; // typed view of `config`

    std::filesystem::path out_dir() const { return experiment.out_dir; }
};

/// Parses argv and resolves the config file plus overrides.
/// Throws UsageError or HelpRequested.
inline Command parse_args(const std::vector<std::string>& argv) {
    CLI::App app{"Class unlearning with a stochastic teacher", "unlearn"};
    app.require_subcommand(1, 1);
    Command cmd;
    std::string out_dir;
    std::string model, teacher;
    for (const auto& name : subcommands()) {
        CLI::App* sub = app.add_subcommand(name, describe(name));
        sub->add_option("--config", cmd.config_path, "Experiment config (JSON)")->required();
        sub->add_option("--set", cmd.overrides, "Override a config value, e.g. unlearn.alpha=0.5")
            ->take_all();
        sub->add_option("--out-dir", out_dir, "Shorthand for --set out_dir=PATH");
        if (name == "erase" || name == "reconstruct" || name == "eval")
            sub->add_option("--model", model, "Input checkpoint");
        if (name == "reconstruct") sub->add_option("--teacher", teacher, "Checkpoint of the original model M_d");
    }
    std::vector<std::string> args(argv.rbegin(), argv.rend());
    if (!args.empty()) args.pop_back(); // program name
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        throw HelpRequested{app.help()};
    } catch (const CLI::ParseError& e) {
        throw UsageError(std::string(e.what()) + "\n" + app.help());
    }
    for (const auto* sub : app.get_subcommands()) cmd.name = sub->get_name();
    if (!model.empty()) cmd.model_path = model;
    if (!teacher.empty()) cmd.teacher_path = teacher;
    if (!out_dir.empty()) cmd.overrides.push_back("out_dir=" + out_dir);

    try {
        cmd.config = load_config_json(cmd.config_path);
        for (const auto& o : cmd.overrides) apply_override(cmd.config, o);
        cmd.experiment = experiment_from_json(cmd.config);
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }
    return cmd;
}

inline Command parse_args(int argc, const char* const* argv) {
    return parse_args(std::vector<std::string>(argv, argv + argc));
}

} // namespace unlearn::cli
