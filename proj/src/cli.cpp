#include "lp/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lp/am.hpp"
#include "lp/checkpoint.hpp"
#include "lp/fid.hpp"
#include "lp/networks.hpp"
#include "lp/render.hpp"
#include "lp/sha256.hpp"
#include "lp/synth.hpp"
#include "lp/threads.hpp"
#include "lp/train.hpp"

namespace fs = std::filesystem;

namespace lp {

namespace {

// Structural problems with the invocation or config file. Everything else
// surfaces as a domain error with exit code 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

nlohmann::json load_config(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("config file " + path + " cannot be opened");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("config file " + path + ": " + e.what());
    }
    if (!j.is_object()) throw UsageError("config file " + path + " must hold a JSON object");
    return j;
}

void check_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& item : obj.items())
        if (!ok.count(item.key()))
            throw UsageError("unknown config key '" + item.key() + "' for " + where);
}

template <typename T>
T cfg_get(const nlohmann::json& obj, const char* key, const T& def) {
    if (!obj.contains(key)) return def;
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw UsageError(std::string("config key '") + key + "' has the wrong type");
    }
}

template <typename T>
T pick(const nlohmann::json& obj, const char* key, const CLI::Option* opt, const T& flag_value,
       const T& def) {
    if (opt != nullptr && opt->count() > 0) return flag_value;
    return cfg_get(obj, key, def);
}

std::string require_value(const std::string& value, const char* what) {
    if (value.empty()) throw UsageError(std::string("missing required ") + what);
    return value;
}

ResponseKind parse_kind(std::string name) {
    for (char& c : name)
        if (c == '-') c = '_';
    try {
        return response_kind_from_name(name);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

nlohmann::json response_to_json(const ResponseSpec& spec) {
    return {{"kind", response_kind_name(spec.kind)},
            {"layer", spec.layer},
            {"index", spec.index},
            {"negate", spec.negate}};
}

void write_json_file(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("short write to " + path.string());
}

void write_run_manifest(const std::string& out_dir, const std::string& subcommand,
                        const nlohmann::json& config, const nlohmann::json& fingerprints,
                        int threads, double wall_seconds) {
    nlohmann::json j{{"subcommand", subcommand},
                     {"config", config},
                     {"fingerprints", fingerprints},
                     {"threads", threads},
                     {"wall_clock_seconds", wall_seconds}};
    write_json_file(fs::path(out_dir) / "run_manifest.json", j);
}

// Shared flag state; every subcommand reuses the same option names so run
// manifests stay uniform.
struct Common {
    std::string config_path;
    std::string out_dir = ".";
    std::string profile;
    std::uint64_t seed = 0;
    CLI::Option* profile_opt = nullptr;
    CLI::Option* seed_opt = nullptr;

    void attach(CLI::App* sub, bool with_profile = true, bool with_seed = true) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--out-dir", out_dir, "output directory");
        if (with_profile)
            profile_opt = sub->add_option("--profile", profile, "network size: paper or tiny");
        if (with_seed) seed_opt = sub->add_option("--seed", seed, "rng seed");
    }

    std::string resolve_profile(const nlohmann::json& cfg) const {
        std::string name = pick<std::string>(cfg, "profile", profile_opt, profile, "tiny");
        try {
            profile_multiplier(name);
        } catch (const std::exception& e) {
            throw UsageError(e.what());
        }
        return name;
    }
};

struct ResponseFlags {
    std::string kind;
    std::string layer;
    std::int64_t index = 0;
    bool negate = false;
    CLI::Option* kind_opt = nullptr;
    CLI::Option* layer_opt = nullptr;
    CLI::Option* index_opt = nullptr;
    CLI::Option* negate_opt = nullptr;

    void attach(CLI::App* sub) {
        kind_opt = sub->add_option("--response", kind,
                                   "read-out: final_logit, neuron or layer_mean");
        layer_opt = sub->add_option("--layer", layer, "layer name for neuron/layer_mean");
        index_opt = sub->add_option("--index", index, "flat neuron index");
        negate_opt = sub->add_flag("--negate", negate, "minimise instead of maximise");
    }

    ResponseSpec resolve(const nlohmann::json& cfg) const {
        nlohmann::json r = cfg_get<nlohmann::json>(cfg, "response", nlohmann::json::object());
        if (!r.is_object()) throw UsageError("config key 'response' must be an object");
        check_keys(r, {"kind", "layer", "index", "negate"}, "response");
        ResponseSpec spec;
        spec.kind = parse_kind(pick<std::string>(r, "kind", kind_opt, kind, "final_logit"));
        spec.layer = pick<std::string>(r, "layer", layer_opt, layer, "");
        spec.index = pick<std::int64_t>(r, "index", index_opt, index, 0);
        spec.negate = pick<bool>(r, "negate", negate_opt, negate, false);
        return spec;
    }
};

double elapsed_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void run_synth_corpus(const Common& common, int threads) {
    nlohmann::json cfg = load_config(common.config_path);
    check_keys(cfg, {"seed", "train_per_label", "val_per_label", "test_per_label", "duration_s"},
               "synth-corpus");
    CorpusCounts counts;
    counts.train_per_label = cfg_get(cfg, "train_per_label", counts.train_per_label);
    counts.val_per_label = cfg_get(cfg, "val_per_label", counts.val_per_label);
    counts.test_per_label = cfg_get(cfg, "test_per_label", counts.test_per_label);
    std::uint64_t seed = pick<std::uint64_t>(cfg, "seed", common.seed_opt, common.seed, 1);
    double duration = cfg_get(cfg, "duration_s", 2.0);

    auto t0 = std::chrono::steady_clock::now();
    build_corpus(common.out_dir, counts, seed, duration);

    nlohmann::json echo{{"seed", seed},
                        {"train_per_label", counts.train_per_label},
                        {"val_per_label", counts.val_per_label},
                        {"test_per_label", counts.test_per_label},
                        {"duration_s", duration}};
    write_run_manifest(common.out_dir, "synth-corpus", echo, nlohmann::json::object(), threads,
                       elapsed_since(t0));
    std::cout << "corpus written to " << common.out_dir << "\n";
}

void run_train_classifier(const Common& common, const std::string& manifest_flag,
                          const CLI::Option* manifest_opt, int threads) {
    nlohmann::json cfg = load_config(common.config_path);
    check_keys(cfg,
               {"manifest", "profile", "iterations", "batch_size", "learning_rate", "beta1",
                "beta2", "epsilon", "eval_interval", "seed"},
               "train-classifier");
    std::string manifest = require_value(
        pick<std::string>(cfg, "manifest", manifest_opt, manifest_flag, ""), "corpus manifest");
    std::string profile = common.resolve_profile(cfg);

    ClassifierTrainConfig tc;
    tc.iterations = cfg_get(cfg, "iterations", tc.iterations);
    tc.batch_size = cfg_get(cfg, "batch_size", tc.batch_size);
    tc.learning_rate = cfg_get(cfg, "learning_rate", tc.learning_rate);
    tc.beta1 = cfg_get(cfg, "beta1", tc.beta1);
    tc.beta2 = cfg_get(cfg, "beta2", tc.beta2);
    tc.epsilon = cfg_get(cfg, "epsilon", tc.epsilon);
    tc.eval_interval = cfg_get(cfg, "eval_interval", tc.eval_interval);
    tc.seed = pick<std::uint64_t>(cfg, "seed", common.seed_opt, common.seed, tc.seed);

    auto t0 = std::chrono::steady_clock::now();
    LoadedCorpus corpus = load_corpus(manifest);
    NetworkSpec spec = build_classifier(profile_multiplier(profile));
    ClassifierTrainResult result = train_classifier(corpus, spec, tc);

    fs::create_directories(common.out_dir);
    fs::path ckpt = fs::path(common.out_dir) / "classifier.nprm";
    save_checkpoint(ckpt.string(), spec, result.best_params);
    write_classifier_report((fs::path(common.out_dir) / "classifier_report.json").string(), tc,
                            result, "classifier.nprm");

    nlohmann::json echo{{"manifest", manifest},
                        {"profile", profile},
                        {"iterations", tc.iterations},
                        {"batch_size", tc.batch_size},
                        {"learning_rate", tc.learning_rate},
                        {"beta1", tc.beta1},
                        {"beta2", tc.beta2},
                        {"epsilon", tc.epsilon},
                        {"eval_interval", tc.eval_interval},
                        {"seed", tc.seed}};
    nlohmann::json prints{{"classifier", hex_digest(spec_fingerprint(spec))}};
    write_run_manifest(common.out_dir, "train-classifier", echo, prints, threads,
                       elapsed_since(t0));
    std::cout << "best validation accuracy " << result.best_val_accuracy << " at iteration "
              << result.best_iteration << "\n";
}

void run_eval_classifier(const Common& common, const std::string& manifest_flag,
                         const CLI::Option* manifest_opt, const std::string& ckpt_flag,
                         const CLI::Option* ckpt_opt, const std::string& split_flag,
                         const CLI::Option* split_opt, int threads) {
    nlohmann::json cfg = load_config(common.config_path);
    check_keys(cfg, {"manifest", "checkpoint", "profile", "split"}, "eval-classifier");
    std::string manifest = require_value(
        pick<std::string>(cfg, "manifest", manifest_opt, manifest_flag, ""), "corpus manifest");
    std::string ckpt = require_value(
        pick<std::string>(cfg, "checkpoint", ckpt_opt, ckpt_flag, ""), "checkpoint path");
    std::string split = pick<std::string>(cfg, "split", split_opt, split_flag, "val");
    std::string profile = common.resolve_profile(cfg);

    auto t0 = std::chrono::steady_clock::now();
    LoadedCorpus corpus = load_corpus(manifest);
    const std::vector<std::size_t>* indices = nullptr;
    if (split == "train")
        indices = &corpus.train_idx;
    else if (split == "val")
        indices = &corpus.val_idx;
    else if (split == "test")
        indices = &corpus.test_idx;
    else
        throw UsageError("split must be train, val or test, got '" + split + "'");

    NetworkSpec spec = build_classifier(profile_multiplier(profile));
    std::vector<Tensor> params = load_params(ckpt, spec);
    double accuracy = classifier_accuracy(corpus, *indices, spec, params);

    fs::create_directories(common.out_dir);
    nlohmann::json report{{"split", split},
                          {"clips", indices->size()},
                          {"accuracy", accuracy},
                          {"checkpoint", ckpt}};
    write_json_file(fs::path(common.out_dir) / "eval_report.json", report);

    nlohmann::json echo{{"manifest", manifest},
                        {"checkpoint", ckpt},
                        {"profile", profile},
                        {"split", split}};
    nlohmann::json prints{{"classifier", hex_digest(spec_fingerprint(spec))}};
    write_run_manifest(common.out_dir, "eval-classifier", echo, prints, threads,
                       elapsed_since(t0));
    std::cout << split << " accuracy " << accuracy << " over " << indices->size() << " clips\n";
}

void run_train_gan(const Common& common, const std::string& manifest_flag,
                   const CLI::Option* manifest_opt, int threads) {
    nlohmann::json cfg = load_config(common.config_path);
    check_keys(cfg,
               {"manifest", "profile", "iterations", "batch_size", "learning_rate", "beta1",
                "beta2", "epsilon", "gp_weight", "critic_steps_per_generator_step",
                "record_interval", "seed"},
               "train-gan");
    std::string manifest = require_value(
        pick<std::string>(cfg, "manifest", manifest_opt, manifest_flag, ""), "corpus manifest");
    std::string profile = common.resolve_profile(cfg);

    GanTrainConfig gc;
    gc.iterations = cfg_get(cfg, "iterations", gc.iterations);
    gc.batch_size = cfg_get(cfg, "batch_size", gc.batch_size);
    gc.learning_rate = cfg_get(cfg, "learning_rate", gc.learning_rate);
    gc.beta1 = cfg_get(cfg, "beta1", gc.beta1);
    gc.beta2 = cfg_get(cfg, "beta2", gc.beta2);
    gc.epsilon = cfg_get(cfg, "epsilon", gc.epsilon);
    gc.gp_weight = cfg_get(cfg, "gp_weight", gc.gp_weight);
    gc.critic_steps_per_generator_step =
        cfg_get(cfg, "critic_steps_per_generator_step", gc.critic_steps_per_generator_step);
    gc.record_interval = cfg_get(cfg, "record_interval", gc.record_interval);
    gc.seed = pick<std::uint64_t>(cfg, "seed", common.seed_opt, common.seed, gc.seed);

    auto t0 = std::chrono::steady_clock::now();
    LoadedCorpus corpus = load_corpus(manifest);
    double mult = profile_multiplier(profile);
    NetworkSpec gen = build_generator(mult);
    NetworkSpec disc = build_discriminator(mult);
    GanTrainResult result = train_gan(corpus, gen, disc, gc);

    fs::create_directories(common.out_dir);
    save_checkpoint((fs::path(common.out_dir) / "generator.nprm").string(), gen,
                    result.generator_params);
    save_checkpoint((fs::path(common.out_dir) / "discriminator.nprm").string(), disc,
                    result.discriminator_params);
    write_gan_report((fs::path(common.out_dir) / "gan_report.json").string(), gc, result,
                     "generator.nprm", "discriminator.nprm");

    nlohmann::json echo{{"manifest", manifest},
                        {"profile", profile},
                        {"iterations", gc.iterations},
                        {"batch_size", gc.batch_size},
                        {"learning_rate", gc.learning_rate},
                        {"beta1", gc.beta1},
                        {"beta2", gc.beta2},
                        {"epsilon", gc.epsilon},
                        {"gp_weight", gc.gp_weight},
                        {"critic_steps_per_generator_step", gc.critic_steps_per_generator_step},
                        {"record_interval", gc.record_interval},
                        {"seed", gc.seed}};
    nlohmann::json prints{{"generator", hex_digest(spec_fingerprint(gen))},
                          {"discriminator", hex_digest(spec_fingerprint(disc))}};
    write_run_manifest(common.out_dir, "train-gan", echo, prints, threads, elapsed_since(t0));
    std::cout << "gan trained for " << gc.iterations << " critic iterations\n";
}

struct AmFlags {
    double learning_rate = 0.0;
    double prior_weight = 0.0;
    int steps = 0;
    int set_size = 0;
    CLI::Option* lr_opt = nullptr;
    CLI::Option* pw_opt = nullptr;
    CLI::Option* steps_opt = nullptr;
    CLI::Option* set_opt = nullptr;

    void attach(CLI::App* sub) {
        lr_opt = sub->add_option("--learning-rate", learning_rate, "ascent step size");
        pw_opt = sub->add_option("--prior-weight", prior_weight, "weight of the latent log-prior");
        steps_opt = sub->add_option("--steps", steps, "optimisation steps");
        set_opt = sub->add_option("--set-size", set_size, "number of explanations");
    }

    AMConfig resolve(const nlohmann::json& cfg, const Common& common,
                     const ResponseFlags& response) const {
        AMConfig am;
        am.learning_rate = pick(cfg, "learning_rate", lr_opt, learning_rate, am.learning_rate);
        am.prior_weight = pick(cfg, "prior_weight", pw_opt, prior_weight, am.prior_weight);
        am.steps = pick(cfg, "steps", steps_opt, steps, am.steps);
        am.set_size = pick(cfg, "set_size", set_opt, set_size, am.set_size);
        am.seed = pick<std::uint64_t>(cfg, "seed", common.seed_opt, common.seed, am.seed);
        am.response = response.resolve(cfg);
        return am;
    }
};

nlohmann::json am_config_echo(const AMConfig& am) {
    return {{"learning_rate", am.learning_rate}, {"prior_weight", am.prior_weight},
            {"steps", am.steps},                 {"set_size", am.set_size},
            {"seed", am.seed},                   {"response", response_to_json(am.response)}};
}

void run_explain(const Common& common, const AmFlags& amf, const ResponseFlags& rf,
                 const std::string& gen_flag, const CLI::Option* gen_opt,
                 const std::string& cls_flag, const CLI::Option* cls_opt, int threads) {
    nlohmann::json cfg = load_config(common.config_path);
    check_keys(cfg,
               {"generator", "classifier", "profile", "learning_rate", "prior_weight", "steps",
                "set_size", "seed", "response"},
               "explain");
    std::string gen_path = require_value(
        pick<std::string>(cfg, "generator", gen_opt, gen_flag, ""), "generator checkpoint");
    std::string cls_path = require_value(
        pick<std::string>(cfg, "classifier", cls_opt, cls_flag, ""), "classifier checkpoint");
    std::string profile = common.resolve_profile(cfg);
    AMConfig am = amf.resolve(cfg, common, rf);

    auto t0 = std::chrono::steady_clock::now();
    double mult = profile_multiplier(profile);
    NetworkSpec gen = build_generator(mult);
    NetworkSpec cls = build_classifier(mult);
    std::vector<Tensor> gen_params = load_params(gen_path, gen);
    std::vector<Tensor> cls_params = load_params(cls_path, cls);

    ExplanationSet set = generate_explanations(am, gen, gen_params, cls, cls_params);
    write_explanation_set(common.out_dir, set);

    nlohmann::json echo = am_config_echo(am);
    echo["generator"] = gen_path;
    echo["classifier"] = cls_path;
    echo["profile"] = profile;
    nlohmann::json prints{{"generator", set.generator_fingerprint},
                          {"classifier", set.classifier_fingerprint}};
    write_run_manifest(common.out_dir, "explain", echo, prints, threads, elapsed_since(t0));
    std::cout << "wrote " << set.items.size() << " explanations to " << common.out_dir << "\n";
}

void run_harvest(const Common& common, const ResponseFlags& rf, const std::string& manifest_flag,
                 const CLI::Option* manifest_opt, const std::string& cls_flag,
                 const CLI::Option* cls_opt, int n_flag, const CLI::Option* n_opt, int threads) {
    nlohmann::json cfg = load_config(common.config_path);
    check_keys(cfg, {"manifest", "classifier", "profile", "n", "response"}, "harvest");
    std::string manifest = require_value(
        pick<std::string>(cfg, "manifest", manifest_opt, manifest_flag, ""), "corpus manifest");
    std::string cls_path = require_value(
        pick<std::string>(cfg, "classifier", cls_opt, cls_flag, ""), "classifier checkpoint");
    std::string profile = common.resolve_profile(cfg);
    int n = pick(cfg, "n", n_opt, n_flag, 50);
    ResponseSpec response = rf.resolve(cfg);

    auto t0 = std::chrono::steady_clock::now();
    LoadedCorpus corpus = load_corpus(manifest);
    NetworkSpec cls = build_classifier(profile_multiplier(profile));
    std::vector<Tensor> cls_params = load_params(cls_path, cls);
    std::vector<double> responses = top_n_responses(corpus, cls, cls_params, response, n);
    ResponseMoments moments = response_moments(responses);

    fs::create_directories(common.out_dir);
    nlohmann::json report{{"responses", responses},
                          {"moments",
                           {{"mu", moments.mean}, {"var", moments.variance},
                            {"n", moments.count}}}};
    write_json_file(fs::path(common.out_dir) / "harvest.json", report);

    nlohmann::json echo{{"manifest", manifest},
                        {"classifier", cls_path},
                        {"profile", profile},
                        {"n", n},
                        {"response", response_to_json(response)}};
    nlohmann::json prints{{"classifier", hex_digest(spec_fingerprint(cls))}};
    write_run_manifest(common.out_dir, "harvest", echo, prints, threads, elapsed_since(t0));
    std::cout << "top " << n << " responses harvested, mean " << moments.mean << "\n";
}

void run_grid_search(const Common& common, const ResponseFlags& rf,
                     const std::string& manifest_flag, const CLI::Option* manifest_opt,
                     const std::string& gen_flag, const CLI::Option* gen_opt,
                     const std::string& cls_flag, const CLI::Option* cls_opt, int set_flag,
                     const CLI::Option* set_opt, int threads) {
    nlohmann::json cfg = load_config(common.config_path);
    check_keys(cfg,
               {"manifest", "generator", "classifier", "profile", "set_size", "seed", "response",
                "learning_rates", "prior_weights", "step_counts"},
               "grid-search");
    std::string manifest = require_value(
        pick<std::string>(cfg, "manifest", manifest_opt, manifest_flag, ""), "corpus manifest");
    std::string gen_path = require_value(
        pick<std::string>(cfg, "generator", gen_opt, gen_flag, ""), "generator checkpoint");
    std::string cls_path = require_value(
        pick<std::string>(cfg, "classifier", cls_opt, cls_flag, ""), "classifier checkpoint");
    std::string profile = common.resolve_profile(cfg);

    AMConfig base;
    base.set_size = pick(cfg, "set_size", set_opt, set_flag, 50);
    base.seed = pick<std::uint64_t>(cfg, "seed", common.seed_opt, common.seed, 1);
    base.response = rf.resolve(cfg);

    std::vector<double> rates =
        cfg_get<std::vector<double>>(cfg, "learning_rates", {0.1, 0.01, 0.001});
    std::vector<double> weights =
        cfg_get<std::vector<double>>(cfg, "prior_weights", {0.1, 0.01, 0.001});
    std::vector<int> step_counts = cfg_get<std::vector<int>>(cfg, "step_counts", {100, 500, 1000});
    if (rates.empty() || weights.empty() || step_counts.empty())
        throw UsageError("grid axes must be non-empty");

    std::vector<AMConfig> grid;
    for (double lr : rates)
        for (double w : weights)
            for (int nt : step_counts) {
                AMConfig c = base;
                c.learning_rate = lr;
                c.prior_weight = w;
                c.steps = nt;
                grid.push_back(c);
            }

    auto t0 = std::chrono::steady_clock::now();
    LoadedCorpus corpus = load_corpus(manifest);
    double mult = profile_multiplier(profile);
    NetworkSpec gen = build_generator(mult);
    NetworkSpec cls = build_classifier(mult);
    std::vector<Tensor> gen_params = load_params(gen_path, gen);
    std::vector<Tensor> cls_params = load_params(cls_path, cls);

    GridSearchReport report = grid_search(grid, corpus, gen, gen_params, cls, cls_params);
    fs::create_directories(common.out_dir);
    write_grid_report_json((fs::path(common.out_dir) / "grid_report.json").string(), report);
    write_grid_report_csv((fs::path(common.out_dir) / "grid_report.csv").string(), report);

    nlohmann::json echo{{"manifest", manifest},
                        {"generator", gen_path},
                        {"classifier", cls_path},
                        {"profile", profile},
                        {"set_size", base.set_size},
                        {"seed", base.seed},
                        {"response", response_to_json(base.response)},
                        {"learning_rates", rates},
                        {"prior_weights", weights},
                        {"step_counts", step_counts}};
    nlohmann::json prints{{"generator", hex_digest(spec_fingerprint(gen))},
                          {"classifier", hex_digest(spec_fingerprint(cls))}};
    write_run_manifest(common.out_dir, "grid-search", echo, prints, threads, elapsed_since(t0));
    const GridResult& best = report.ranked.front();
    std::cout << report.ranked.size() << " grid points, best fid " << best.fid
              << " at l_r=" << best.config.learning_rate
              << " lambda=" << best.config.prior_weight << " N_t=" << best.config.steps << "\n";
}

void run_render(const std::string& config_path, const std::string& input_flag,
                const CLI::Option* input_opt, const std::string& output_flag,
                const CLI::Option* output_opt) {
    nlohmann::json cfg = load_config(config_path);
    check_keys(cfg, {"input", "output"}, "render");
    std::string input = require_value(pick<std::string>(cfg, "input", input_opt, input_flag, ""),
                                      "input spectrogram");
    std::string output = require_value(
        pick<std::string>(cfg, "output", output_opt, output_flag, ""), "output image path");
    render_spectrogram(input, output);
    std::cout << "rendered " << input << " to " << output << "\n";
}

}  // namespace

int run_cli(int argc, char** argv) {
    try {
        int threads = configure_threads();

        CLI::App app{"activation-maximisation toolkit for a singing-voice classifier"};
        app.require_subcommand(1);

        auto* synth = app.add_subcommand("synth-corpus", "generate the synthetic audio corpus");
        Common synth_common;
        synth_common.attach(synth, false, true);
        synth->callback([&] { run_synth_corpus(synth_common, threads); });

        auto* trainc = app.add_subcommand("train-classifier", "train the vocal detector");
        Common trainc_common;
        trainc_common.attach(trainc);
        std::string trainc_manifest;
        CLI::Option* trainc_manifest_opt =
            trainc->add_option("--manifest", trainc_manifest, "corpus manifest path");
        trainc->callback(
            [&] { run_train_classifier(trainc_common, trainc_manifest, trainc_manifest_opt,
                                       threads); });

        auto* evalc = app.add_subcommand("eval-classifier", "score a checkpoint on a corpus split");
        Common evalc_common;
        evalc_common.attach(evalc, true, false);
        std::string evalc_manifest, evalc_ckpt, evalc_split;
        CLI::Option* evalc_manifest_opt =
            evalc->add_option("--manifest", evalc_manifest, "corpus manifest path");
        CLI::Option* evalc_ckpt_opt =
            evalc->add_option("--checkpoint", evalc_ckpt, "classifier checkpoint");
        CLI::Option* evalc_split_opt =
            evalc->add_option("--split", evalc_split, "train, val or test");
        evalc->callback([&] {
            run_eval_classifier(evalc_common, evalc_manifest, evalc_manifest_opt, evalc_ckpt,
                                evalc_ckpt_opt, evalc_split, evalc_split_opt, threads);
        });

        auto* traing = app.add_subcommand("train-gan", "train the spectrogram generator");
        Common traing_common;
        traing_common.attach(traing);
        std::string traing_manifest;
        CLI::Option* traing_manifest_opt =
            traing->add_option("--manifest", traing_manifest, "corpus manifest path");
        traing->callback(
            [&] { run_train_gan(traing_common, traing_manifest, traing_manifest_opt, threads); });

        auto* explain = app.add_subcommand("explain", "optimise latent explanations");
        Common explain_common;
        explain_common.attach(explain);
        AmFlags explain_am;
        explain_am.attach(explain);
        ResponseFlags explain_rf;
        explain_rf.attach(explain);
        std::string explain_gen, explain_cls;
        CLI::Option* explain_gen_opt =
            explain->add_option("--generator", explain_gen, "generator checkpoint");
        CLI::Option* explain_cls_opt =
            explain->add_option("--classifier", explain_cls, "classifier checkpoint");
        explain->callback([&] {
            run_explain(explain_common, explain_am, explain_rf, explain_gen, explain_gen_opt,
                        explain_cls, explain_cls_opt, threads);
        });

        auto* harvest = app.add_subcommand("harvest", "collect top real-clip responses");
        Common harvest_common;
        harvest_common.attach(harvest, true, false);
        ResponseFlags harvest_rf;
        harvest_rf.attach(harvest);
        std::string harvest_manifest, harvest_cls;
        int harvest_n = 0;
        CLI::Option* harvest_manifest_opt =
            harvest->add_option("--manifest", harvest_manifest, "corpus manifest path");
        CLI::Option* harvest_cls_opt =
            harvest->add_option("--classifier", harvest_cls, "classifier checkpoint");
        CLI::Option* harvest_n_opt = harvest->add_option("--n", harvest_n, "harvest size");
        harvest->callback([&] {
            run_harvest(harvest_common, harvest_rf, harvest_manifest, harvest_manifest_opt,
                        harvest_cls, harvest_cls_opt, harvest_n, harvest_n_opt, threads);
        });

        auto* grid = app.add_subcommand("grid-search", "rank hyper-parameters by scalar fid");
        Common grid_common;
        grid_common.attach(grid);
        ResponseFlags grid_rf;
        grid_rf.attach(grid);
        std::string grid_manifest, grid_gen, grid_cls;
        int grid_set = 0;
        CLI::Option* grid_manifest_opt =
            grid->add_option("--manifest", grid_manifest, "corpus manifest path");
        CLI::Option* grid_gen_opt = grid->add_option("--generator", grid_gen, "generator checkpoint");
        CLI::Option* grid_cls_opt =
            grid->add_option("--classifier", grid_cls, "classifier checkpoint");
        CLI::Option* grid_set_opt = grid->add_option("--set-size", grid_set, "explanations per cell");
        grid->callback([&] {
            run_grid_search(grid_common, grid_rf, grid_manifest, grid_manifest_opt, grid_gen,
                            grid_gen_opt, grid_cls, grid_cls_opt, grid_set, grid_set_opt, threads);
        });

        auto* render = app.add_subcommand("render", "turn an MSPC spectrogram into a PGM image");
        std::string render_config, render_input, render_output;
        render->add_option("--config", render_config, "JSON config file");
        CLI::Option* render_input_opt = render->add_option("--input", render_input, "MSPC path");
        CLI::Option* render_output_opt =
            render->add_option("--output", render_output, "PGM path");
        render->callback([&] {
            run_render(render_config, render_input, render_input_opt, render_output,
                       render_output_opt);
        });

        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            int rc = app.exit(e);
            return rc == 0 ? 0 : 2;
        }
        return 0;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace lp
