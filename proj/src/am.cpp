#include "lp/am.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "lp/adam.hpp"
#include "lp/mspc.hpp"
#include "lp/rng.hpp"
#include "lp/sha256.hpp"

namespace lp {

namespace {

constexpr double kLn2Pi = 1.8378770664093453;

std::size_t find_layer(const std::vector<std::string>& names, const std::string& layer) {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == layer) return i;
    throw std::invalid_argument("response: unknown layer '" + layer + "'");
}

void validate_step_config(const AMConfig& cfg, const char* op) {
    if (cfg.learning_rate <= 0.0)
        throw std::invalid_argument(std::string(op) + ": learning rate must be positive");
    if (cfg.prior_weight < 0.0)
        throw std::invalid_argument(std::string(op) + ": prior weight must be non-negative");
    if (cfg.steps < 0) throw std::invalid_argument(std::string(op) + ": negative step count");
}

}  // namespace

double evaluate_response(const ActivationRecord& record, const ResponseSpec& spec) {
    double value = 0.0;
    switch (spec.kind) {
        case ResponseKind::FinalLogit:
            value = record.logit;
            break;
        case ResponseKind::Neuron: {
            std::size_t li = find_layer(record.layer_names, spec.layer);
            const Tensor& t = record.layer_values[li];
            if (spec.index < 0 || spec.index >= std::int64_t(t.data.size()))
                throw std::invalid_argument("response: index " + std::to_string(spec.index) +
                                            " out of range for layer '" + spec.layer + "'");
            value = t.data[std::size_t(spec.index)];
            break;
        }
        case ResponseKind::LayerMean: {
            std::size_t li = find_layer(record.layer_names, spec.layer);
            const Tensor& t = record.layer_values[li];
            double sum = 0.0;
            for (double v : t.data) sum += v;
            value = sum / double(t.data.size());
            break;
        }
    }
    return spec.negate ? -value : value;
}

NodeId append_response(Graph& g, const NetworkInstance& net, const ResponseSpec& spec) {
    NodeId node = -1;
    switch (spec.kind) {
        case ResponseKind::FinalLogit:
            node = net.output;
            break;
        case ResponseKind::Neuron: {
            std::size_t li = find_layer(net.layer_names, spec.layer);
            NodeId layer = net.layer_outputs[li];
            std::int64_t numel = shape_numel(g.node(layer).shape);
            if (spec.index < 0 || spec.index >= numel)
                throw std::invalid_argument("response: index " + std::to_string(spec.index) +
                                            " out of range for layer '" + spec.layer + "'");
            node = g.pick(layer, spec.index);
            break;
        }
        case ResponseKind::LayerMean:
            node = g.mean(net.layer_outputs[find_layer(net.layer_names, spec.layer)]);
            break;
    }
    return spec.negate ? g.scalar_mul(node, -1.0) : node;
}

std::string response_kind_name(ResponseKind kind) {
    switch (kind) {
        case ResponseKind::FinalLogit: return "final_logit";
        case ResponseKind::Neuron: return "neuron";
        case ResponseKind::LayerMean: return "layer_mean";
    }
    throw std::logic_error("response: bad kind");
}

ResponseKind response_kind_from_name(const std::string& name) {
    if (name == "final_logit") return ResponseKind::FinalLogit;
    if (name == "neuron") return ResponseKind::Neuron;
    if (name == "layer_mean") return ResponseKind::LayerMean;
    throw std::invalid_argument("response: unknown kind '" + name + "'");
}

double log_prior(const std::vector<double>& z) {
    double sq = 0.0;
    for (double v : z) sq += v * v;
    return -0.5 * double(z.size()) * kLn2Pi - 0.5 * sq;
}

Explanation optimise_latent(const std::vector<double>& z0, const AMConfig& cfg,
                            const NetworkSpec& gen_spec, const std::vector<Tensor>& gen_params,
                            const NetworkSpec& cls_spec, const std::vector<Tensor>& cls_params) {
    validate_step_config(cfg, "optimise_latent");
    if (int(z0.size()) != gen_spec.latent_dim)
        throw std::invalid_argument("optimise_latent: z has dim " + std::to_string(z0.size()) +
                                    ", generator wants " + std::to_string(gen_spec.latent_dim));

    Graph g;
    NodeId z = g.leaf({gen_spec.latent_dim}, "z");
    NetworkInstance gen = append_network(g, gen_spec, z);
    NodeId x = g.crop(gen.output, {0, kCropLead, 0},
                      {1, kClipFrames, g.node(gen.output).shape[2]});
    NetworkInstance cls = append_network(g, cls_spec, x);
    NodeId resp = append_response(g, cls, cfg.response);
    NodeId prior = g.scalar_add(g.scalar_mul(g.sum(g.square(z)), -0.5),
                                -0.5 * double(gen_spec.latent_dim) * kLn2Pi);
    NodeId objective = g.add(resp, g.scalar_mul(prior, cfg.prior_weight));
    NodeId loss = g.scalar_mul(objective, -1.0);
    std::vector<NodeId> wrt{z};
    NodeId gz = add_gradients(g, loss, wrt)[0];
    if (gz < 0) throw std::logic_error("optimise_latent: objective does not depend on z");

    Tensor zt{{gen_spec.latent_dim}, z0};
    std::vector<Binding> binds;
    for (std::size_t i = 0; i < gen_params.size(); ++i)
        binds.emplace_back(gen.params[i], &gen_params[i]);
    for (std::size_t i = 0; i < cls_params.size(); ++i)
        binds.emplace_back(cls.params[i], &cls_params[i]);
    binds.emplace_back(z, &zt);

    Evaluator ev(g);
    AdamState adam = make_adam(cfg.learning_rate, 0.99, 0.999, 1e-8);
    std::vector<Tensor*> opt_params{&zt};

    Explanation out;
    out.z_init = z0;
    out.trace.reserve(std::size_t(cfg.steps) + 1);
    std::vector<NodeId> step_wanted{objective, resp, cls.output, gz};
    std::vector<NodeId> final_wanted{objective, resp, cls.output};
    for (int step = 0; step <= cfg.steps; ++step) {
        bool last = step == cfg.steps;
        ev.run(binds, last ? final_wanted : step_wanted);
        double j = ev.value(objective).scalar_value();
        double r = ev.value(resp).scalar_value();
        if (!std::isfinite(j) || !std::isfinite(r))
            throw std::runtime_error("optimise_latent: objective not finite at step " +
                                     std::to_string(step));
        out.trace.push_back({j, r});
        if (last) {
            out.final_logit = ev.value(cls.output).scalar_value();
            break;
        }
        std::vector<const Tensor*> grads{&ev.value(gz)};
        adam_step(opt_params, grads, adam);
    }
    out.z_final = zt.data;
    out.final_response = out.trace.back().response;
    out.x_final = generator_forward(gen_spec, gen_params, out.z_final);
    return out;
}

ExplanationSet generate_explanations(const AMConfig& cfg, const NetworkSpec& gen_spec,
                                     const std::vector<Tensor>& gen_params,
                                     const NetworkSpec& cls_spec,
                                     const std::vector<Tensor>& cls_params) {
    validate_step_config(cfg, "generate_explanations");
    if (cfg.steps < 1) throw std::invalid_argument("generate_explanations: needs at least 1 step");
    if (cfg.set_size < 2)
        throw std::invalid_argument("generate_explanations: set size must be at least 2");

    const int n = gen_spec.latent_dim;
    std::vector<std::vector<double>> inits(std::size_t(cfg.set_size));
    for (int i = 0; i < cfg.set_size; ++i) {
        Rng rng(Rng::derive(cfg.seed, std::uint64_t(i)));
        inits[std::size_t(i)].resize(std::size_t(n));
        for (double& v : inits[std::size_t(i)]) v = rng.normal();
    }

    ExplanationSet set;
    set.config = cfg;
    set.generator_fingerprint = hex_digest(spec_fingerprint(gen_spec));
    set.classifier_fingerprint = hex_digest(spec_fingerprint(cls_spec));
    set.items.resize(std::size_t(cfg.set_size));

    // Items are independent; failures are collected and the lowest-index one
    // is rethrown so the error does not depend on scheduling.
    std::vector<std::string> errors(std::size_t(cfg.set_size));
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < cfg.set_size; ++i) {
        try {
            set.items[std::size_t(i)] =
                optimise_latent(inits[std::size_t(i)], cfg, gen_spec, gen_params, cls_spec,
                                cls_params);
        } catch (const std::exception& e) {
            errors[std::size_t(i)] = e.what();
        }
    }
    for (int i = 0; i < cfg.set_size; ++i)
        if (!errors[std::size_t(i)].empty())
            throw std::runtime_error("generate_explanations: item " + std::to_string(i) + ": " +
                                     errors[std::size_t(i)]);
    return set;
}

DirectAMResult direct_am(const MelSpectrogram& x0, const AMConfig& cfg,
                         const NetworkSpec& cls_spec, const std::vector<Tensor>& cls_params) {
    validate_step_config(cfg, "direct_am");
    Tensor xt = mel_to_tensor(x0);
    if (xt.dims != cls_spec.input_shape)
        throw std::invalid_argument("direct_am: input is " + shape_str(xt.dims) +
                                    ", classifier wants " + shape_str(cls_spec.input_shape));

    Graph g;
    NodeId x = g.leaf(cls_spec.input_shape, "x");
    NetworkInstance cls = append_network(g, cls_spec, x);
    NodeId resp = append_response(g, cls, cfg.response);
    NodeId loss = g.scalar_mul(resp, -1.0);
    std::vector<NodeId> wrt{x};
    NodeId gx = add_gradients(g, loss, wrt)[0];
    if (gx < 0) throw std::logic_error("direct_am: response does not depend on the input");

    std::vector<Binding> binds;
    for (std::size_t i = 0; i < cls_params.size(); ++i)
        binds.emplace_back(cls.params[i], &cls_params[i]);
    binds.emplace_back(x, &xt);

    Evaluator ev(g);
    AdamState adam = make_adam(cfg.learning_rate, 0.99, 0.999, 1e-8);
    std::vector<Tensor*> opt_params{&xt};
    const double floor = std::log(kLogFloor);

    DirectAMResult out;
    out.trace.reserve(std::size_t(cfg.steps) + 1);
    std::vector<NodeId> step_wanted{resp, cls.output, gx};
    std::vector<NodeId> final_wanted{resp, cls.output};
    for (int step = 0; step <= cfg.steps; ++step) {
        bool last = step == cfg.steps;
        ev.run(binds, last ? final_wanted : step_wanted);
        double r = ev.value(resp).scalar_value();
        if (!std::isfinite(r))
            throw std::runtime_error("direct_am: objective not finite at step " +
                                     std::to_string(step));
        out.trace.push_back({r, r});
        if (last) {
            out.final_logit = ev.value(cls.output).scalar_value();
            break;
        }
        std::vector<const Tensor*> grads{&ev.value(gx)};
        adam_step(opt_params, grads, adam);
        for (double& v : xt.data)
            if (v < floor) v = floor;
    }
    out.x_final = mel_from_tensor(xt);
    return out;
}

namespace {

void write_raw_f32(const std::string& path, const std::vector<double>& values) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("explanations: cannot open " + path + " for writing");
    for (double v : values) {
        float f = float(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        unsigned char b[4] = {static_cast<unsigned char>(bits & 0xff),
                              static_cast<unsigned char>((bits >> 8) & 0xff),
                              static_cast<unsigned char>((bits >> 16) & 0xff),
                              static_cast<unsigned char>((bits >> 24) & 0xff)};
        out.write(reinterpret_cast<const char*>(b), 4);
    }
    if (!out) throw std::runtime_error("explanations: short write to " + path);
}

}  // namespace

void write_explanation_set(const std::string& dir, const ExplanationSet& set) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path base(dir);

    nlohmann::json items = nlohmann::json::array();
    for (std::size_t i = 0; i < set.items.size(); ++i) {
        const Explanation& e = set.items[i];
        char xname[32], zname[32];
        std::snprintf(xname, sizeof xname, "x_%04zu.mspc", i);
        std::snprintf(zname, sizeof zname, "z_%04zu.f32", i);
        write_mspc((base / xname).string(), e.x_final);
        write_raw_f32((base / zname).string(), e.z_final);
        double norm_sq = 0.0;
        for (double v : e.z_final) norm_sq += v * v;
        items.push_back({{"index", i},
                         {"final_response", e.final_response},
                         {"final_logit", e.final_logit},
                         {"z_norm", std::sqrt(norm_sq)},
                         {"spectrogram", xname},
                         {"latent", zname}});
    }

    const AMConfig& cfg = set.config;
    nlohmann::json j{
        {"config",
         {{"learning_rate", cfg.learning_rate},
          {"prior_weight", cfg.prior_weight},
          {"steps", cfg.steps},
          {"set_size", cfg.set_size},
          {"seed", cfg.seed},
          {"response",
           {{"kind", response_kind_name(cfg.response.kind)},
            {"layer", cfg.response.layer},
            {"index", cfg.response.index},
            {"negate", cfg.response.negate}}}}},
        {"generator_fingerprint", set.generator_fingerprint},
        {"classifier_fingerprint", set.classifier_fingerprint},
        {"items", items}};

    std::ofstream out(base / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("explanations: cannot open manifest for writing in " + dir);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("explanations: short write to manifest in " + dir);
}

}  // namespace lp
