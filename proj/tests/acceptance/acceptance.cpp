// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "unlearn/cli/run.hpp"
#include "unlearn/data/cifar10.hpp"
#include "unlearn/data/idx.hpp"
#include "unlearn/data/synth.hpp"
#include "unlearn/eval/report.hpp"
#include "unlearn/io.hpp"
#include "unlearn/method/pipeline.hpp"
#include "unlearn/nn/grad_check.hpp"

using namespace unlearn;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Check {
    bool ok = true;
    std::vector<std::string> notes;

    void expect(bool cond, const std::string& what) {
        ok = ok && cond;
        notes.push_back((cond ? "ok   " : "FAIL ") + what);
    }
};

std::string pts(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * fraction);
    return buf;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

int failures = 0;

void report(int id, const std::string& title, const Check& c) {
    std::cout << (c.ok ? "PASS" : "FAIL") << " criterion " << id << ": " << title << "\n";
    for (const auto& n : c.notes) std::cout << "    " << n << "\n";
    std::cout.flush();
    if (!c.ok) ++failures;
}

void guarded(int id, const std::string& title, const std::function<void(Check&)>& body) {
    Check c;
    try {
        body(c);
    } catch (const std::exception& e) {
        c.expect(false, std::string("exception: ") + e.what());
    }
    report(id, title, c);
}

// Criterion 1.

Network small_net(RngSeed seed) {
    Network net = build_model({1, 4, 4}, 3, ModelConfig{2, 3, 3, 1, 2});
    init_random(net, seed);
    Rng rng = make_rng(derive_seed(seed, "bias"));
    for (Tensor* p : net.parameters())
        if (p->rank() == 1)
            for (double& v : p->values) v = 0.2 * (2.0 * uniform01(rng) - 1.0);
    return net;
}

Tensor uniform_tensor(Shape shape, RngSeed seed, double lo, double hi) {
    Tensor t(std::move(shape));
    Rng rng = make_rng(seed);
    for (double& v : t.values) v = lo + (hi - lo) * uniform01(rng);
    return t;
}

void numerical_core(Check& c) {
    const auto t0 = Clock::now();
    double worst = 0.0;
    for (std::uint64_t s = 1; s <= 20; ++s) {
        const RngSeed seed{s};
        Network net = small_net(seed);
        const Tensor batch = uniform_tensor({4, 1, 4, 4}, derive_seed(seed, "batch"), 0.0, 1.0);
        Rng rng = make_rng(derive_seed(seed, "labels"));
        std::vector<int> labels;
        for (int b = 0; b < 4; ++b) labels.push_back(static_cast<int>(uniform_index(rng, 3)));
        const Network teacher = small_net(derive_seed(seed, "teacher"));
        const ProbDist p = softmax_with_temperature(teacher.infer(batch), 2.0);
        const LossSelector sels[] = {{LossSelector::Kind::cross_entropy, labels, {}, 1.0, 1.0, false},
                                     {LossSelector::Kind::kl_to_teacher, {}, p, 2.0, 1.0, false},
                                     {LossSelector::Kind::combined, labels, p, 2.0, 0.5, false}};
        for (const auto& sel : sels) worst = std::max(worst, grad_check(net, batch, sel).max_relative_error);
    }
    c.expect(worst < 1e-4, "grad_check max relative error " + num(worst) + " < 1e-4 (CE, KL, combined; 20 seeds)");

    double row_err = 0.0;
    Rng rng = make_rng({2024});
    for (int trial = 0; trial < 2000; ++trial) {
        const double scale = std::pow(10.0, 4.0 * uniform01(rng) - 1.0);
        Tensor logits({3, 10});
        for (double& v : logits.values) v = scale * (2.0 * uniform01(rng) - 1.0);
        const double tau = 0.1 + 10.0 * uniform01(rng);
        const ProbDist q = softmax_with_temperature(logits, tau);
        for (std::size_t b = 0; b < q.batch; ++b) {
            double sum = 0.0;
            for (double v : q.row(b)) sum += v;
            row_err = std::max(row_err, std::abs(sum - 1.0));
        }
    }
    c.expect(row_err <= 1e-9, "softmax row-sum error " + num(row_err) + " <= 1e-9 (2000 random batches)");

    double min_kl = 1.0;
    for (int trial = 0; trial < 10000; ++trial) {
        ProbDist p{1, 10, {}}, q{1, 10, {}};
        for (auto* d : {&p, &q}) {
            double sum = 0.0;
            for (int j = 0; j < 10; ++j) {
                const double v = uniform01(rng) < 0.1 ? 0.0 : uniform01(rng) + 1e-12;
                d->probs.push_back(v);
                sum += v;
            }
            if (sum == 0.0) d->probs.assign(10, 1.0), sum = 10.0;
            for (double& v : d->probs) v /= sum;
        }
        for (std::size_t j = 0; j < 10; ++j)
            if (q.probs[j] == 0.0) q.probs[j] = 1e-300; // KL(p||q) must be finite
        min_kl = std::min(min_kl, kl_divergence(p, q));
    }
    c.expect(min_kl >= 0.0, "min KL over 10k random pairs " + num(min_kl) + " >= 0");
    const double t = seconds_since(t0);
    c.expect(t < 30.0, "runtime " + num(t) + " s < 30 s");
}

// Criterion 2.

std::vector<std::string> synth_args(const fs::path& out) {
    return {"unlearn", "pipeline", "--config", (fs::path(UNLEARN_CONFIGS) / "synth.json").string(),
            "--set", "train.retrain_epochs=3", "--out-dir", out.string()};
}

std::vector<std::uint8_t> bytes_of(const fs::path& p) { return read_file_bytes(p); }

void determinism(Check& c) {
    const fs::path dir = fs::temp_directory_path() / "unlearn_acceptance_determinism";
    fs::remove_all(dir);
    const auto t0 = Clock::now();
    std::ostringstream out, err;
    const char* files[] = {"manifest.json", "original.ckpt", "teacher.ckpt", "scratch.ckpt",
                           "unlearned.ckpt", "retrained.ckpt"};
    int code = cli::main_entry(synth_args(dir), out, err);
    c.expect(code == 0, "first pipeline run exit code " + std::to_string(code) + " " + err.str());
    std::vector<std::vector<std::uint8_t>> first;
    for (const char* f : files) first.push_back(bytes_of(dir / f));
    code = cli::main_entry(synth_args(dir), out, err);
    c.expect(code == 0, "second pipeline run exit code " + std::to_string(code));
    for (std::size_t k = 0; k < std::size(files); ++k)
        c.expect(bytes_of(dir / files[k]) == first[k], std::string(files[k]) + " bitwise identical");
    c.notes.push_back("info runtime " + num(seconds_since(t0)) + " s for two runs");
    fs::remove_all(dir);
}

// Criteria 3 to 7 share these stage runs.

struct UnlearnRun {
    eval::EvalReport original, erased, rebuilt_1, retrained;
    StageTrace reconstruct_trace, retrain_trace;
    std::size_t forget_reads_by_retrain = 0;
    double seconds = 0.0;
};

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ExperimentConfig load_config(const std::string& name, const std::vector<std::string>& overrides) {
    auto j = load_config_json(fs::path(UNLEARN_CONFIGS) / name);
    for (const auto& o : overrides) apply_override(j, o);
    return experiment_from_json(j);
}

/// The pipeline's stage sequence with access-log checks between stages.
UnlearnRun run_stages(const TrainTestData& data, const ExperimentConfig& cfg, bool with_retrain) {
    const auto t0 = Clock::now();
    UnlearnRun r;
    const auto part = data::partition_forget(data.train, cfg.forget);
    const auto forgotten = forgotten_classes(cfg.forget);
    const auto ev = test_set_evaluator(data.test, forgotten);
    const auto md = train_original(data.train, initial_model(cfg, data.train), cfg.train).model;
    r.original = eval::evaluate(md, data.test, forgotten, "original");
    const auto erased = knowledge_erase(md, part.forget, cfg.unlearn);
    r.erased = eval::evaluate(erased.student, data.test, forgotten, "scratch");
    auto rebuilt = reconstruct(clone_params(erased.student), md, part.remain, cfg.unlearn, ev);
    r.rebuilt_1 = *rebuilt.trace.records.front().snapshot;
    r.reconstruct_trace = std::move(rebuilt.trace);
    if (with_retrain) {
        const auto forget_reads = part.forget.access_count();
        auto rt = retrain_baseline(part.remain, md, retrain_config(cfg), derive_seed(cfg.seed, "retrain-init"), ev);
        r.forget_reads_by_retrain = part.forget.access_count() - forget_reads;
        r.retrained = eval::evaluate(rt.model, data.test, forgotten, "retrained");
        r.retrain_trace = std::move(rt.trace);
    }
    r.seconds = seconds_since(t0);
    return r;
}

void synthetic(Check& c) {
    const auto t0 = Clock::now();
    std::vector<double> orig, erase_forg, rem_gap, rebuilt_forg;
    for (std::uint64_t s = 1; s <= 5; ++s) {
        const auto cfg = load_config("synth.json", {"seed=" + std::to_string(s)});
        const auto data = load_datasets(cfg.dataset, cfg.seed);
        const auto r = run_stages(data, cfg, false);
        orig.push_back(r.original.overall_accuracy);
        erase_forg.push_back(r.erased.forgotten_avg);
        rem_gap.push_back(std::abs(r.rebuilt_1.remaining_avg - r.original.remaining_avg));
        rebuilt_forg.push_back(r.rebuilt_1.forgotten_avg);
        c.notes.push_back("info seed " + std::to_string(s) + ": original " + pts(r.original.overall_accuracy) +
                          ", erased forgotten " + pts(r.erased.forgotten_avg) + ", reconstructed remaining " +
                          pts(r.rebuilt_1.remaining_avg) + " forgotten " + pts(r.rebuilt_1.forgotten_avg));
    }
    c.expect(median(orig) > 0.90, "median original test accuracy " + pts(median(orig)) + " > 90%");
    c.expect(median(erase_forg) < 0.20, "median forgotten after 1 erase epoch " + pts(median(erase_forg)) + " < 20%");
    c.expect(median(rem_gap) <= 0.03,
             "median |remaining - original remaining| after 1 reconstruct epoch " + pts(median(rem_gap)) + " <= 3 pts");
    c.expect(median(rebuilt_forg) <= 0.15,
             "median forgotten after 1 reconstruct epoch " + pts(median(rebuilt_forg)) + " <= 15%");
    const double t = seconds_since(t0);
    c.expect(t < 60.0, "runtime " + num(t) + " s < 60 s (5 seeds)");
}

void mnist_thresholds(Check& c, const UnlearnRun& r) {
    const double forg_drop = r.original.forgotten_avg - r.erased.forgotten_avg;
    const double rem_drop = r.original.remaining_avg - r.erased.remaining_avg;
    c.notes.push_back("info original remaining " + pts(r.original.remaining_avg) + ", forgotten " +
                      pts(r.original.forgotten_avg));
    c.expect(forg_drop > 0.30, "(a) erase drops forgotten by " + pts(forg_drop) + " > 30 pts (to " +
                                   pts(r.erased.forgotten_avg) + ")");
    c.expect(rem_drop < 0.10, "(a) erase drops remaining by " + pts(rem_drop) + " < 10 pts");
    const double retrain_final = r.retrain_trace.records.back().snapshot->remaining_avg;
    const double gap = std::abs(r.rebuilt_1.remaining_avg - retrain_final);
    c.expect(gap <= 0.015, "(b) remaining after 1 reconstruct epoch " + pts(r.rebuilt_1.remaining_avg) +
                               " vs 10-epoch retrain " + pts(retrain_final) + ": gap " + pts(gap) + " <= 1.5 pts");
    c.expect(r.rebuilt_1.forgotten_avg <= 0.15,
             "(c) forgotten after 1 reconstruct epoch " + pts(r.rebuilt_1.forgotten_avg) + " <= 15%");
    c.expect(r.seconds < 600.0, "runtime " + num(r.seconds) + " s < 600 s");
}

} // namespace

// Exits 0 once every criterion has been evaluated; --strict exits 1 on any FAIL.
int main(int argc, char** argv) {
    const bool strict = argc > 1 && std::string(argv[1]) == "--strict";
    std::cout << "acceptance: 8 criteria\n";
    guarded(1, "numerical core", numerical_core);
    guarded(2, "pipeline determinism", determinism);
    guarded(3, "synthetic end-to-end", synthetic);

    const fs::path mnist = fs::path(UNLEARN_FIXTURES) / "mnist_subset";
    const std::vector<std::string> mnist_overrides{"dataset.root=" + mnist.string(), "unlearn.reconstruct.epochs=2"};
    UnlearnRun one{}, two{};
    bool have_one = false;

    guarded(4, "MNIST subset, forget {3}", [&](Check& c) {
        const auto cfg = load_config("mnist_subset.json", mnist_overrides);
        const auto data = load_datasets(cfg.dataset, cfg.seed);
        c.expect(data.train.size() == 6000 && data.test.size() == 1000, "6000 train / 1000 test samples");
        one = run_stages(data, cfg, true);
        have_one = true;
        mnist_thresholds(c, one);
    });
    guarded(5, "MNIST subset, forget {2,7}", [&](Check& c) {
        auto overrides = mnist_overrides;
        overrides.push_back("forget.classes=2,7");
        const auto cfg = load_config("mnist_subset.json", overrides);
        const auto data = load_datasets(cfg.dataset, cfg.seed);
        two = run_stages(data, cfg, true);
        mnist_thresholds(c, two);
    });
    guarded(6, "retrain baseline sanity", [&](Check& c) {
        c.expect(have_one, "forget {3} run available");
        c.expect(one.retrained.forgotten_avg < 0.02,
                 "retrained forgotten accuracy " + pts(one.retrained.forgotten_avg) + " < 2%");
        c.expect(one.forget_reads_by_retrain == 0,
                 "samples of D_f read by retrain: " + std::to_string(one.forget_reads_by_retrain));
    });
    guarded(7, "recovery speed", [&](Check& c) {
        c.expect(have_one, "forget {3} run available");
        const auto cmp = eval::compare_methods(one.reconstruct_trace.recovery("ours"), one.retrain_trace.recovery("retrain"));
        const auto show = [](const std::optional<std::size_t>& e) { return e ? std::to_string(*e) : std::string("never"); };
        c.notes.push_back("info threshold (retrain final remaining) " + pts(cmp.threshold));
        c.expect(cmp.ours.epochs_to_threshold && *cmp.ours.epochs_to_threshold <= 2,
                 "ours reaches threshold in " + show(cmp.ours.epochs_to_threshold) + " epochs <= 2");
        c.expect(cmp.retrain.epochs_to_threshold && *cmp.retrain.epochs_to_threshold >= 5,
                 "retrain reaches threshold in " + show(cmp.retrain.epochs_to_threshold) + " epochs >= 5");
    });
    guarded(8, "format fidelity", [&](Check& c) {
        const fs::path idx = fs::path(UNLEARN_FIXTURES) / "formats" / "idx";
        const fs::path cifar = fs::path(UNLEARN_FIXTURES) / "formats" / "cifar";
        const auto ds = data::load_idx(idx / "three-images-idx3-ubyte", idx / "three-labels-idx1-ubyte");
        bool pixels_ok = ds.size() == 3 && ds.labels() == std::vector<int>{7, 0, 9};
        for (std::size_t i = 0; pixels_ok && i < 3; ++i)
            for (std::size_t k = 0; k < 784; ++k)
                pixels_ok = pixels_ok && ds.pixels(i)[k] == static_cast<double>((k + 37 * i) % 256) / 255.0;
        c.expect(pixels_ok, "IDX fixture decodes to its known pixels and labels");
        bool idx_rejects = false;
        try {
            data::load_idx(idx / "truncated-images-idx3-ubyte", idx / "three-labels-idx1-ubyte");
        } catch (const data::FormatError&) {
            idx_rejects = true;
        }
        c.expect(idx_rejects, "truncated IDX file rejected");

        const auto cf = data::load_cifar10({cifar / "two-records.bin"});
        bool cifar_ok = cf.size() == 2 && cf.labels() == std::vector<int>{3, 9} && cf.pixels(0)[0] == 1.0 &&
                        cf.pixels(0)[1] == 10.0 / 255 && cf.pixels(0)[1024] == 20.0 / 255 &&
                        cf.pixels(0)[2048] == 30.0 / 255;
        for (std::size_t k = 0; cifar_ok && k < 3072; ++k)
            cifar_ok = cf.pixels(1)[k] == static_cast<double>(k % 256) / 255.0;
        c.expect(cifar_ok, "CIFAR-10 fixture decodes to its known planes and labels");
        bool cifar_rejects = false;
        try {
            data::load_cifar10({cifar / "missing-label.bin"});
        } catch (const data::FormatError&) {
            cifar_rejects = true;
        }
        c.expect(cifar_rejects, "short CIFAR-10 record rejected");

        std::vector<eval::EvalReport> reports;
        if (have_one) reports = {one.original, one.erased, one.retrained, one.rebuilt_1};
        const auto synth = data::synth_blobs(10, 5, 8, {4});
        Network net = build_model({1, 8, 8}, 10);
        init_random(net, {5});
        reports.push_back(eval::evaluate(net, synth, {3}, "synth"));
        const auto j = eval::report_json(reports, {});
        const auto back = eval::reports_from_json(nlohmann::json::parse(j.dump()));
        c.expect(eval::report_json(back, {}) == j, "report JSON round-trips losslessly");
        c.expect(eval::report_table_csv(back) == eval::report_table_csv(reports), "report CSV identical after round trip");
    });

    std::cout << (failures == 0 ? "acceptance: all criteria passed\n"
                                : "acceptance: " + std::to_string(failures) + " criteria failed\n");
    return strict && failures > 0 ? 1 : 0;
}
