#include "lp/networks.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "lp/rng.hpp"
#include "lp/sha256.hpp"

namespace lp {
namespace {

int scaled(int units, double mult) {
    double v = units * mult;
    int out = int(v + 0.5);
    if (out < 1) out = 1;
    return out;
}

void check_multiplier(double mult) {
    if (mult != 1.0 && mult != 0.25)
        throw std::invalid_argument("networks: unsupported width multiplier " + std::to_string(mult) +
                                    " (want 1 or 0.25)");
}

LayerSpec conv(std::string name, int filters, int kh, int kw, int sh, int sw, Pad pad,
               Activation act, double act_param) {
    LayerSpec l;
    l.name = std::move(name);
    l.kind = LayerKind::Conv;
    l.filters = filters;
    l.kh = kh;
    l.kw = kw;
    l.sh = sh;
    l.sw = sw;
    l.pad = pad;
    l.act = act;
    l.act_param = act_param;
    return l;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

const char* kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Conv: return "conv";
        case LayerKind::ConvTranspose: return "convt";
        case LayerKind::MaxPool: return "maxpool";
        case LayerKind::Dense: return "dense";
        case LayerKind::Reshape: return "reshape";
    }
    return "?";
}

const char* act_name(Activation a) {
    switch (a) {
        case Activation::None: return "none";
        case Activation::LeakyRelu: return "lrelu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::ClampBelow: return "clamp";
    }
    return "?";
}

}  // namespace

double profile_multiplier(const std::string& profile) {
    if (profile == "paper") return 1.0;
    if (profile == "tiny") return 0.25;
    throw std::invalid_argument("networks: unknown profile '" + profile + "' (want paper or tiny)");
}

NetworkSpec build_classifier(double mult) {
    check_multiplier(mult);
    NetworkSpec spec;
    spec.name = "classifier";
    spec.input_shape = {1, kClipFrames, kMelBands};
    spec.width_multiplier = mult;
    spec.sigmoid_output = true;

    spec.layers.push_back(conv("conv1", scaled(64, mult), 3, 3, 1, 1, Pad::Valid, Activation::LeakyRelu, 0.01));
    spec.layers.push_back(conv("conv2", scaled(32, mult), 3, 3, 1, 1, Pad::Valid, Activation::LeakyRelu, 0.01));
    LayerSpec pool1;
    pool1.name = "pool1";
    pool1.kind = LayerKind::MaxPool;
    pool1.kh = pool1.kw = 3;
    pool1.sh = pool1.sw = 3;
    pool1.bias = false;
    spec.layers.push_back(pool1);
    spec.layers.push_back(conv("conv3", scaled(128, mult), 3, 3, 1, 1, Pad::Valid, Activation::LeakyRelu, 0.01));
    spec.layers.push_back(conv("conv4", scaled(64, mult), 3, 3, 1, 1, Pad::Valid, Activation::LeakyRelu, 0.01));
    LayerSpec pool2 = pool1;
    pool2.name = "pool2";
    spec.layers.push_back(pool2);

    LayerSpec fc1;
    fc1.name = "fc1";
    fc1.kind = LayerKind::Dense;
    fc1.filters = scaled(256, mult);
    fc1.act = Activation::LeakyRelu;
    fc1.act_param = 0.01;
    spec.layers.push_back(fc1);
    LayerSpec fc2 = fc1;
    fc2.name = "fc2";
    fc2.filters = scaled(64, mult);
    spec.layers.push_back(fc2);
    LayerSpec logit;
    logit.name = "logit";
    logit.kind = LayerKind::Dense;
    logit.filters = 1;
    spec.layers.push_back(logit);
    return spec;
}

NetworkSpec build_generator(double mult) {
    check_multiplier(mult);
    NetworkSpec spec;
    spec.name = "generator";
    spec.width_multiplier = mult;
    spec.latent_dim = scaled(128, mult);
    spec.input_shape = {spec.latent_dim};

    int seed_ch = scaled(128, mult);
    LayerSpec fc;
    fc.name = "fc";
    fc.kind = LayerKind::Dense;
    fc.filters = seed_ch * 8 * 5;
    fc.act = Activation::LeakyRelu;
    fc.act_param = 0.2;
    spec.layers.push_back(fc);

    LayerSpec rs;
    rs.name = "seed";
    rs.kind = LayerKind::Reshape;
    rs.reshape_to = {seed_ch, 8, 5};
    rs.bias = false;
    spec.layers.push_back(rs);

    const int filters[4] = {scaled(64, mult), scaled(32, mult), scaled(16, mult), scaled(8, mult)};
    const int kws[4] = {10, 20, 20, 20};
    for (int i = 0; i < 4; ++i) {
        LayerSpec l;
        l.name = "convt" + std::to_string(i + 1);
        l.kind = LayerKind::ConvTranspose;
        l.filters = filters[i];
        l.kh = 5;
        l.kw = kws[i];
        l.sh = l.sw = 2;
        l.pad = Pad::Same;
        l.act = Activation::LeakyRelu;
        l.act_param = 0.2;
        spec.layers.push_back(l);
    }

    spec.layers.push_back(conv("out", 1, 5, 5, 1, 1, Pad::Same, Activation::ClampBelow, std::log(kLogFloor)));
    return spec;
}

NetworkSpec build_discriminator(double mult) {
    check_multiplier(mult);
    NetworkSpec spec;
    spec.name = "discriminator";
    spec.input_shape = {1, kGanFrames, kMelBands};
    spec.width_multiplier = mult;

    const int filters[4] = {scaled(32, mult), scaled(64, mult), scaled(128, mult), scaled(256, mult)};
    const int kws[4] = {80, 40, 20, 10};
    for (int i = 0; i < 4; ++i)
        spec.layers.push_back(conv("conv" + std::to_string(i + 1), filters[i], 5, kws[i], 2, 2, Pad::Same,
                                   Activation::LeakyRelu, 0.2));

    LayerSpec score;
    score.name = "score";
    score.kind = LayerKind::Dense;
    score.filters = 1;
    score.bias = false;
    spec.layers.push_back(score);
    return spec;
}

std::string spec_canonical(const NetworkSpec& spec) {
    std::string out;
    out += "network " + spec.name + "\n";
    out += "input " + shape_str(spec.input_shape) + "\n";
    out += "multiplier " + fmt_double(spec.width_multiplier) + "\n";
    out += "latent " + std::to_string(spec.latent_dim) + "\n";
    out += "sigmoid " + std::to_string(int(spec.sigmoid_output)) + "\n";
    for (const LayerSpec& l : spec.layers) {
        out += "layer " + l.name + " kind " + kind_name(l.kind) + " filters " + std::to_string(l.filters) +
               " kernel " + std::to_string(l.kh) + "x" + std::to_string(l.kw) + " stride " +
               std::to_string(l.sh) + "x" + std::to_string(l.sw) + " pad " +
               (l.pad == Pad::Same ? "same" : "valid") + " act " + act_name(l.act) + " " +
               fmt_double(l.act_param) + " bias " + std::to_string(int(l.bias)) + " reshape " +
               shape_str(l.reshape_to) + "\n";
    }
    return out;
}

std::array<std::uint8_t, 32> spec_fingerprint(const NetworkSpec& spec) {
    return sha256(spec_canonical(spec));
}

NetworkInstance append_network(Graph& g, const NetworkSpec& spec, NodeId input,
                               const std::vector<NodeId>* shared_params) {
    if (g.node(input).shape != spec.input_shape)
        throw std::invalid_argument("networks: " + spec.name + " expects input " +
                                    shape_str(spec.input_shape) + ", got " + shape_str(g.node(input).shape));

    NetworkInstance inst;
    inst.input = input;
    std::size_t reuse = 0;
    auto take_param = [&](const std::string& pname, const Shape& shape) -> NodeId {
        NodeId id;
        if (shared_params != nullptr) {
            if (reuse >= shared_params->size())
                throw std::invalid_argument("networks: " + spec.name + ": shared parameter list too short");
            id = (*shared_params)[reuse++];
            if (g.node(id).shape != shape)
                throw std::invalid_argument("networks: " + spec.name + ": shared parameter " + pname +
                                            " has shape " + shape_str(g.node(id).shape) + ", want " +
                                            shape_str(shape));
        } else {
            id = g.leaf(shape, spec.name + "." + pname);
        }
        inst.params.push_back(id);
        inst.param_names.push_back(pname);
        return id;
    };

    NodeId cur = input;
    for (const LayerSpec& l : spec.layers) {
        const Shape in_shape = g.node(cur).shape;
        switch (l.kind) {
            case LayerKind::Conv: {
                if (in_shape.size() != 3)
                    throw std::invalid_argument("networks: " + spec.name + "." + l.name +
                                                ": conv needs [c,h,w] input, got " + shape_str(in_shape));
                NodeId w = take_param(l.name + ".w", {l.filters, in_shape[0], l.kh, l.kw});
                cur = g.conv2d(cur, w, l.pad, l.sh, l.sw);
                if (l.bias) cur = g.add_bias(cur, take_param(l.name + ".b", {l.filters}));
                break;
            }
            case LayerKind::ConvTranspose: {
                if (in_shape.size() != 3)
                    throw std::invalid_argument("networks: " + spec.name + "." + l.name +
                                                ": convt needs [c,h,w] input, got " + shape_str(in_shape));
                if (l.pad != Pad::Same)
                    throw std::invalid_argument("networks: " + spec.name + "." + l.name +
                                                ": only same padding is supported for convt");
                int oh = in_shape[1] * l.sh;
                int ow = in_shape[2] * l.sw;
                int ph = Graph::same_pads(oh, l.kh, l.sh).first;
                int pw = Graph::same_pads(ow, l.kw, l.sw).first;
                NodeId w = take_param(l.name + ".w", {in_shape[0], l.filters, l.kh, l.kw});
                cur = g.conv_transpose2d(cur, w, l.sh, l.sw, ph, pw, oh, ow);
                if (l.bias) cur = g.add_bias(cur, take_param(l.name + ".b", {l.filters}));
                break;
            }
            case LayerKind::MaxPool:
                cur = g.maxpool2d(cur, l.kh, l.kw, l.sh, l.sw);
                break;
            case LayerKind::Dense: {
                if (in_shape.size() != 1) cur = g.reshape(cur, {shape_numel(in_shape)});
                int k = g.node(cur).shape[0];
                NodeId w = take_param(l.name + ".w", {l.filters, k});
                cur = g.dense(w, cur);
                if (l.bias) cur = g.add_bias(cur, take_param(l.name + ".b", {l.filters}));
                break;
            }
            case LayerKind::Reshape:
                cur = g.reshape(cur, l.reshape_to);
                break;
        }
        switch (l.act) {
            case Activation::None: break;
            case Activation::LeakyRelu: cur = g.leaky_relu(cur, l.act_param); break;
            case Activation::Sigmoid: cur = g.sigmoid(cur); break;
            case Activation::ClampBelow: cur = g.clamp_below(cur, l.act_param); break;
        }
        if (l.kind != LayerKind::Reshape) {
            inst.layer_outputs.push_back(cur);
            inst.layer_names.push_back(l.name);
        }
    }
    inst.output = cur;
    if (spec.sigmoid_output) inst.prob = g.sigmoid(cur);
    return inst;
}

std::vector<Tensor> init_params(const NetworkSpec& spec, std::uint64_t seed) {
    Graph g;
    NetworkInstance inst = append_network(g, spec, g.leaf(spec.input_shape));

    // fan_in per weight: conv is [co,ci,kh,kw], convt is [ci,co,kh,kw], dense
    // is [units,k]. Walk the layers to know which is which.
    std::vector<Tensor> out;
    out.reserve(inst.params.size());
    Rng rng(seed);
    std::size_t slot = 0;
    for (const LayerSpec& l : spec.layers) {
        bool has_w = l.kind == LayerKind::Conv || l.kind == LayerKind::ConvTranspose || l.kind == LayerKind::Dense;
        if (!has_w) continue;
        const Shape& ws = g.node(inst.params[slot]).shape;
        double fan_in = 0;
        if (l.kind == LayerKind::Conv) fan_in = double(ws[1]) * ws[2] * ws[3];
        else if (l.kind == LayerKind::ConvTranspose) fan_in = double(ws[0]) * ws[2] * ws[3];
        else fan_in = double(ws[1]);
        double stddev = std::sqrt(2.0 / fan_in);
        Tensor w = Tensor::zeros(ws);
        for (auto& v : w.data) v = rng.normal() * stddev;
        out.push_back(std::move(w));
        ++slot;
        if (l.bias) {
            out.push_back(Tensor::zeros(g.node(inst.params[slot]).shape));
            ++slot;
        }
    }
    if (slot != inst.params.size())
        throw std::logic_error("networks: init_params slot walk out of sync");
    return out;
}

std::vector<std::string> param_names(const NetworkSpec& spec) {
    Graph g;
    return append_network(g, spec, g.leaf(spec.input_shape)).param_names;
}

std::vector<Shape> param_shapes(const NetworkSpec& spec) {
    Graph g;
    NetworkInstance inst = append_network(g, spec, g.leaf(spec.input_shape));
    std::vector<Shape> out;
    out.reserve(inst.params.size());
    for (NodeId id : inst.params) out.push_back(g.node(id).shape);
    return out;
}

namespace {

std::vector<Binding> bind_params(const NetworkInstance& inst, const std::vector<Tensor>& params,
                                 const std::string& who) {
    if (params.size() != inst.params.size())
        throw std::invalid_argument("networks: " + who + " got " + std::to_string(params.size()) +
                                    " parameter tensors, want " + std::to_string(inst.params.size()));
    std::vector<Binding> binds;
    binds.reserve(params.size() + 1);
    for (std::size_t i = 0; i < params.size(); ++i) binds.emplace_back(inst.params[i], &params[i]);
    return binds;
}

}  // namespace

ActivationRecord classifier_forward(const NetworkSpec& spec, const std::vector<Tensor>& params,
                                    const MelSpectrogram& x) {
    Graph g;
    NodeId in = g.leaf(spec.input_shape, "x");
    NetworkInstance inst = append_network(g, spec, in);
    if (inst.prob < 0)
        throw std::invalid_argument("networks: classifier_forward needs a sigmoid-output spec");

    Tensor xt = mel_to_tensor(x);
    std::vector<Binding> binds = bind_params(inst, params, "classifier_forward");
    binds.emplace_back(in, &xt);

    std::vector<NodeId> wanted = inst.layer_outputs;
    wanted.push_back(inst.prob);

    Evaluator ev(g);
    ev.run(binds, wanted);

    ActivationRecord rec;
    rec.layer_names = inst.layer_names;
    rec.layer_values.reserve(inst.layer_outputs.size());
    for (NodeId id : inst.layer_outputs) {
        rec.layer_values.push_back(ev.value(id));
        rec.total_neurons += shape_numel(ev.value(id).dims);
    }
    rec.logit = ev.value(inst.output).data[0];
    rec.probability = ev.value(inst.prob).data[0];
    return rec;
}

Tensor generator_forward_raw(const NetworkSpec& spec, const std::vector<Tensor>& params,
                             const std::vector<double>& z) {
    if (int(z.size()) != spec.latent_dim)
        throw std::invalid_argument("networks: generator_forward got z of size " +
                                    std::to_string(z.size()) + ", want " + std::to_string(spec.latent_dim));
    Graph g;
    NodeId in = g.leaf(spec.input_shape, "z");
    NetworkInstance inst = append_network(g, spec, in);

    Tensor zt = Tensor::zeros(spec.input_shape);
    zt.data.assign(z.begin(), z.end());
    std::vector<Binding> binds = bind_params(inst, params, "generator_forward");
    binds.emplace_back(in, &zt);

    std::vector<NodeId> wanted{inst.output};
    Evaluator ev(g);
    ev.run(binds, wanted);
    return ev.value(inst.output);
}

MelSpectrogram generator_forward(const NetworkSpec& spec, const std::vector<Tensor>& params,
                                 const std::vector<double>& z) {
    Tensor raw = generator_forward_raw(spec, params, z);
    return crop_mel(mel_from_tensor(raw), kCropLead, kClipFrames);
}

}  // namespace lp
