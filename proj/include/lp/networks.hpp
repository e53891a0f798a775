#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lp/frontend.hpp"
#include "lp/graph.hpp"
#include "lp/tensor.hpp"

namespace lp {

constexpr int kClipFrames = 115;
constexpr int kGanFrames = 128;
/// The generator renders 128 frames; the classifier sees the middle 115
/// (drop 7 leading and 6 trailing frames).
constexpr int kCropLead = 7;

enum class LayerKind { Conv, ConvTranspose, MaxPool, Dense, Reshape };
enum class Activation { None, LeakyRelu, Sigmoid, ClampBelow };

struct LayerSpec {
    std::string name;
    LayerKind kind = LayerKind::Conv;
    int filters = 0;  // conv output channels or dense units
    int kh = 0, kw = 0;
    int sh = 1, sw = 1;
    Pad pad = Pad::Valid;
    Activation act = Activation::None;
    double act_param = 0.0;
    bool bias = true;
    Shape reshape_to;
};

struct NetworkSpec {
    std::string name;
    Shape input_shape;
    double width_multiplier = 1.0;
    int latent_dim = 0;        // generator input size, 0 otherwise
    bool sigmoid_output = false;
    std::vector<LayerSpec> layers;
};

/// Width multipliers supported by the two size profiles.
double profile_multiplier(const std::string& profile);

NetworkSpec build_classifier(double width_multiplier);
NetworkSpec build_generator(double width_multiplier);
NetworkSpec build_discriminator(double width_multiplier);

std::string spec_canonical(const NetworkSpec& spec);
std::array<std::uint8_t, 32> spec_fingerprint(const NetworkSpec& spec);

/// One instantiation of a network inside a graph. Parameter leaves can be
/// shared across instantiations by passing a previous instance's ids.
struct NetworkInstance {
    NodeId input = -1;
    NodeId output = -1;  // final layer output (logit, score, or raw image)
    NodeId prob = -1;    // sigmoid of the output when the spec asks for it
    std::vector<NodeId> params;
    std::vector<std::string> param_names;
    std::vector<NodeId> layer_outputs;
    std::vector<std::string> layer_names;
};

NetworkInstance append_network(Graph& g, const NetworkSpec& spec, NodeId input,
                               const std::vector<NodeId>* shared_params = nullptr);

/// Parameter tensors in instantiation order, He-normal weights, zero biases.
std::vector<Tensor> init_params(const NetworkSpec& spec, std::uint64_t seed);

std::vector<std::string> param_names(const NetworkSpec& spec);
std::vector<Shape> param_shapes(const NetworkSpec& spec);

/// Post-activation values of every recorded layer for one input.
struct ActivationRecord {
    std::vector<std::string> layer_names;
    std::vector<Tensor> layer_values;
    std::int64_t total_neurons = 0;
    double logit = 0.0;
    double probability = 0.0;
};

ActivationRecord classifier_forward(const NetworkSpec& spec, const std::vector<Tensor>& params,
                                    const MelSpectrogram& x);

Tensor generator_forward_raw(const NetworkSpec& spec, const std::vector<Tensor>& params,
                             const std::vector<double>& z);
MelSpectrogram generator_forward(const NetworkSpec& spec, const std::vector<Tensor>& params,
                                 const std::vector<double>& z);

}  // namespace lp
