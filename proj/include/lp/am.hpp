#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lp/frontend.hpp"
#include "lp/graph.hpp"
#include "lp/networks.hpp"
#include "lp/tensor.hpp"

namespace lp {

// Scalar read-out of the classifier. FinalLogit is the pre-sigmoid output
// (the probability saturates and starves the gradient, so it is never used
// as an objective). Neuron picks one activation by flat index inside a named
// layer, LayerMean averages a whole layer. negate turns maximisation into
// minimisation.
enum class ResponseKind { FinalLogit, Neuron, LayerMean };

struct ResponseSpec {
    ResponseKind kind = ResponseKind::FinalLogit;
    std::string layer;
    std::int64_t index = 0;
    bool negate = false;
};

double evaluate_response(const ActivationRecord& record, const ResponseSpec& spec);

// Appends the response read-out to a graph holding an already built
// classifier instance and returns the scalar node.
NodeId append_response(Graph& g, const NetworkInstance& net, const ResponseSpec& spec);

std::string response_kind_name(ResponseKind kind);
ResponseKind response_kind_from_name(const std::string& name);

struct AMConfig {
    double learning_rate = 0.01;
    double prior_weight = 0.0;  // lambda weighting the latent log-density
    int steps = 100;
    int set_size = 50;
    std::uint64_t seed = 1;
    ResponseSpec response;
};

// Standard normal log-density of the latent vector, -(n/2)ln(2pi) - |z|^2/2.
double log_prior(const std::vector<double>& z);

struct TracePoint {
    double objective = 0.0;
    double response = 0.0;
};

struct Explanation {
    std::vector<double> z_init;
    std::vector<double> z_final;
    MelSpectrogram x_final;
    std::vector<TracePoint> trace;  // steps + 1 entries, first is the start point
    double final_response = 0.0;
    double final_logit = 0.0;
};

struct ExplanationSet {
    AMConfig config;
    std::string generator_fingerprint;
    std::string classifier_fingerprint;
    std::vector<Explanation> items;
};

Explanation optimise_latent(const std::vector<double>& z0, const AMConfig& cfg,
                            const NetworkSpec& gen_spec, const std::vector<Tensor>& gen_params,
                            const NetworkSpec& cls_spec, const std::vector<Tensor>& cls_params);

ExplanationSet generate_explanations(const AMConfig& cfg, const NetworkSpec& gen_spec,
                                     const std::vector<Tensor>& gen_params,
                                     const NetworkSpec& cls_spec,
                                     const std::vector<Tensor>& cls_params);

struct DirectAMResult {
    MelSpectrogram x_final;
    std::vector<TracePoint> trace;
    double final_logit = 0.0;
};

// Ascent directly on the spectrogram pixels, clamped to the log-Mel floor
// after every step. The adversarial baseline the latent approach improves on.
DirectAMResult direct_am(const MelSpectrogram& x0, const AMConfig& cfg, const NetworkSpec& cls_spec,
                         const std::vector<Tensor>& cls_params);

// Writes manifest.json plus one MSPC spectrogram and one raw little-endian
// float32 latent file per item into dir.
void write_explanation_set(const std::string& dir, const ExplanationSet& set);

}  // namespace lp
