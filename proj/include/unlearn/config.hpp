#pragma once

// Experiment configuration: a JSON document validated against a schema of
// defaults. Every key of a user document must exist in the defaults and
// carry a value of the same kind; `--set a.b=v` overrides are typed by the
// default at that path.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "unlearn/data/partition.hpp"
#include "unlearn/io.hpp"
#include "unlearn/method/stage.hpp"
#include "unlearn/nn/network.hpp"

namespace unlearn {

using nlohmann::json;

/// Invalid configuration document, key or override (a usage error).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DatasetConfig {
    /// "synth", "mnist", "fashion_mnist" (IDX files) or "cifar10" (binary batches).
    std::string kind = "synth";
    /// Directory holding the dataset files; empty means $UNLEARN_DATA_DIR.
    std::string root;
    std::size_t train_limit = 0; // 0 = all samples
    std::size_t test_limit = 0;
    std::size_t synth_classes = 10;
    std::size_t synth_train_per_class = 200;
    std::size_t synth_test_per_class = 50;
    std::size_t synth_image_side = 28;
};

struct ExperimentConfig {
    DatasetConfig dataset;
    ModelConfig model;
    data::ForgetSpec forget = data::ForgetSpec::by_class({3});
    TrainConfig train{3, 64, 5e-2, 0.9, {}};
    std::size_t retrain_epochs = 10;
    double retrain_learning_rate = 1e-2;
    UnlearnConfig unlearn;
    RngSeed seed{0};
    std::string out_dir = "runs/default";
};

/// The schema: every accepted key with its default value.
inline json default_config_json() {
    const ExperimentConfig d;
    const auto stage = [](const TrainConfig& t) {
        return json{{"epochs", t.epochs},
                    {"batch_size", t.batch_size},
                    {"learning_rate", t.learning_rate},
                    {"momentum", t.momentum}};
    };
    return json{
        {"dataset",
         {{"kind", d.dataset.kind},
          {"root", d.dataset.root},
          {"train_limit", d.dataset.train_limit},
          {"test_limit", d.dataset.test_limit},
          {"synth",
           {{"classes", d.dataset.synth_classes},
            {"train_per_class", d.dataset.synth_train_per_class},
            {"test_per_class", d.dataset.synth_test_per_class},
            {"image_side", d.dataset.synth_image_side}}}}},
        {"model",
         {{"conv1_channels", d.model.conv1_channels},
          {"conv2_channels", d.model.conv2_channels},
          {"kernel", d.model.kernel},
          {"padding", d.model.padding},
          {"pool", d.model.pool}}},
        {"forget", {{"mode", "class"}, {"classes", d.forget.classes}, {"fraction", 0.1}}},
        {"train",
         {{"epochs", d.train.epochs},
          {"batch_size", d.train.batch_size},
          {"learning_rate", d.train.learning_rate},
          {"momentum", d.train.momentum},
          {"retrain_epochs", d.retrain_epochs},
          {"retrain_learning_rate", d.retrain_learning_rate}}},
        {"unlearn",
         {{"tau_erase", d.unlearn.tau_erase},
          {"tau_reconstruct", d.unlearn.tau_reconstruct},
          {"alpha", d.unlearn.alpha},
          {"kl_tau2_scaling", d.unlearn.kl_tau2_scaling},
          {"erase", stage(d.unlearn.erase)},
          {"reconstruct", stage(d.unlearn.reconstruct)}}},
        {"seed", d.seed.value},
        {"out_dir", d.out_dir}};
}

namespace detail {

inline std::string kind_name(const json& v) {
    if (v.is_boolean()) return "a boolean";
    if (v.is_number_unsigned()) return "a non-negative integer";
    if (v.is_number_integer()) return "an integer";
    if (v.is_number()) return "a number";
    if (v.is_string()) return "a string";
    if (v.is_array()) return "an array";
    if (v.is_object()) return "an object";
    return "null";
}

/// Whether `v` may replace the default `def` (integers are accepted for floats).
inline bool same_kind(const json& def, const json& v) {
    if (def.is_boolean()) return v.is_boolean();
    if (def.is_number_unsigned()) return v.is_number_unsigned();
    if (def.is_number_float()) return v.is_number();
    if (def.is_string()) return v.is_string();
    if (def.is_array()) return v.is_array();
    if (def.is_object()) return v.is_object();
    return false;
}

inline void merge_checked(json& base, const json& user, const std::string& prefix) {
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!base.contains(it.key())) throw ConfigError("unknown config key \"" + key + "\"");
        json& def = base[it.key()];
        if (!same_kind(def, it.value()))
            throw ConfigError("config key \"" + key + "\": expected " + kind_name(def) + ", got " +
                              kind_name(it.value()));
        if (def.is_object())
            merge_checked(def, it.value(), key);
        else
            def = it.value();
    }
}

inline json parse_override_value(const json& def, const std::string& key, const std::string& text) {
    const auto fail = [&] {
        return ConfigError("override \"" + key + "\": expected " + kind_name(def) + ", got \"" + text + "\"");
    };
    if (def.is_string()) return text;
    if (def.is_object()) throw ConfigError("override \"" + key + "\": cannot assign to a section");
    if (def.is_array()) {
        // "2,7" or "[2,7]"
        const std::string body = !text.empty() && text.front() == '[' ? text : "[" + text + "]";
        json v = json::parse(body, nullptr, false);
        if (v.is_discarded() || !v.is_array()) throw fail();
        return v;
    }
    json v = json::parse(text, nullptr, false);
    if (v.is_discarded() || !same_kind(def, v)) throw fail();
    return v;
}

template <typename T>
T get_checked(const json& j, const std::string& key) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key \"" + key + "\": invalid value " + j.dump());
    }
}

inline TrainConfig stage_from_json(const json& j, RngSeed seed) {
    return {j.at("epochs").get<std::size_t>(), j.at("batch_size").get<std::size_t>(),
            j.at("learning_rate").get<double>(), j.at("momentum").get<double>(), seed};
}

} // namespace detail

/// Defaults overlaid with `user`; unknown keys and kind mismatches are rejected.
inline json merge_config(const json& user) {
    if (!user.is_object()) throw ConfigError("config document must be a JSON object");
    json cfg = default_config_json();
    detail::merge_checked(cfg, user, "");
    return cfg;
}

/// Applies one "dotted.key=value" override to a resolved config.
inline void apply_override(json& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override \"" + assignment + "\": expected key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json* node = &cfg;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown config key \"" + key + "\"");
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    *node = detail::parse_override_value(*node, key, text);
}

inline json load_config_json(const std::filesystem::path& path) {
    std::string text;
    try {
        const auto bytes = read_file_bytes(path);
        text.assign(bytes.begin(), bytes.end());
    } catch (const std::runtime_error&) {
        throw ConfigError("cannot read config file " + path.string());
    }
    json user = json::parse(text, nullptr, false);
    if (user.is_discarded()) throw ConfigError("config file " + path.string() + " is not valid JSON");
    return merge_config(user);
}

/// Typed view of a resolved config; checks value ranges.
inline ExperimentConfig experiment_from_json(const json& j) {
    ExperimentConfig c;
    const json& ds = j.at("dataset");
    c.dataset.kind = ds.at("kind").get<std::string>();
    static const std::set<std::string> kinds{"synth", "mnist", "fashion_mnist", "cifar10"};
    if (!kinds.count(c.dataset.kind))
        throw ConfigError("config key \"dataset.kind\": unknown dataset \"" + c.dataset.kind +
                          "\" (expected synth, mnist, fashion_mnist or cifar10)");
    c.dataset.root = ds.at("root").get<std::string>();
    c.dataset.train_limit = ds.at("train_limit").get<std::size_t>();
    c.dataset.test_limit = ds.at("test_limit").get<std::size_t>();
    const json& sy = ds.at("synth");
    c.dataset.synth_classes = sy.at("classes").get<std::size_t>();
    c.dataset.synth_train_per_class = sy.at("train_per_class").get<std::size_t>();
    c.dataset.synth_test_per_class = sy.at("test_per_class").get<std::size_t>();
    c.dataset.synth_image_side = sy.at("image_side").get<std::size_t>();

    const json& m = j.at("model");
    c.model = {m.at("conv1_channels").get<std::size_t>(), m.at("conv2_channels").get<std::size_t>(),
               m.at("kernel").get<std::size_t>(), m.at("padding").get<std::size_t>(), m.at("pool").get<std::size_t>()};

    c.seed = RngSeed{j.at("seed").get<std::uint64_t>()};
    c.out_dir = j.at("out_dir").get<std::string>();

    const json& f = j.at("forget");
    const auto mode = f.at("mode").get<std::string>();
    if (mode == "class") {
        c.forget = data::ForgetSpec::by_class(detail::get_checked<std::set<int>>(f.at("classes"), "forget.classes"));
    } else if (mode == "fraction") {
        c.forget = data::ForgetSpec::by_fraction(f.at("fraction").get<double>(), derive_seed(c.seed, "partition"));
    } else {
        throw ConfigError("config key \"forget.mode\": expected \"class\" or \"fraction\", got \"" + mode + "\"");
    }

    const json& t = j.at("train");
    c.train = detail::stage_from_json(t, derive_seed(c.seed, "original"));
    c.retrain_epochs = t.at("retrain_epochs").get<std::size_t>();
    c.retrain_learning_rate = t.at("retrain_learning_rate").get<double>();

    const json& u = j.at("unlearn");
    c.unlearn.tau_erase = u.at("tau_erase").get<double>();
    c.unlearn.tau_reconstruct = u.at("tau_reconstruct").get<double>();
    c.unlearn.alpha = u.at("alpha").get<double>();
    c.unlearn.kl_tau2_scaling = u.at("kl_tau2_scaling").get<bool>();
    c.unlearn.erase = detail::stage_from_json(u.at("erase"), derive_seed(c.seed, "erase"));
    c.unlearn.reconstruct = detail::stage_from_json(u.at("reconstruct"), derive_seed(c.seed, "reconstruct"));
    c.unlearn.teacher_seed = derive_seed(c.seed, "teacher");

    try {
        c.train.validate("train");
        c.unlearn.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
    if (c.retrain_epochs == 0) throw ConfigError("invalid config: train.retrain_epochs must be >= 1");
    if (!(c.retrain_learning_rate > 0.0))
        throw ConfigError("invalid config: train.retrain_learning_rate must be > 0");
    return c;
}

/// Training settings of the retrain baseline: the original's, with its own epochs, learning rate and seed.
inline TrainConfig retrain_config(const ExperimentConfig& c) {
    TrainConfig t = c.train;
    t.epochs = c.retrain_epochs;
    t.learning_rate = c.retrain_learning_rate;
    t.seed = derive_seed(c.seed, "retrain");
    return t;
}

/// Dataset root: the configured one, else $UNLEARN_DATA_DIR, else empty.
inline std::filesystem::path resolve_data_root(const DatasetConfig& d) {
    if (!d.root.empty()) return d.root;
    if (const char* env = std::getenv("UNLEARN_DATA_DIR")) return env;
    return {};
}

} // namespace unlearn
