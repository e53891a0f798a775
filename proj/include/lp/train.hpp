#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lp/graph.hpp"
#include "lp/networks.hpp"
#include "lp/synth.hpp"
#include "lp/tensor.hpp"

namespace lp {

/// Binary cross-entropy between a probability node and a {0,1} label node,
/// both shape [1]. Each log argument is clamped to at least 1e-7.
NodeId append_bce(Graph& g, NodeId prob, NodeId label);

struct ClassifierTrainConfig {
    int iterations = 2000;
    int batch_size = 16;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int eval_interval = 100;
    std::uint64_t seed = 1;
};

struct ClassifierTrainResult {
    std::vector<Tensor> best_params;
    std::vector<Tensor> final_params;
    std::vector<double> interval_loss;
    std::vector<double> val_accuracy;
    int best_iteration = 0;
    double best_val_accuracy = 0.0;
};

ClassifierTrainResult train_classifier(const LoadedCorpus& corpus, const NetworkSpec& spec,
                                       const ClassifierTrainConfig& cfg);

/// Accuracy of a 0.5-probability threshold over one corpus split.
double classifier_accuracy(const LoadedCorpus& corpus, const std::vector<std::size_t>& indices,
                           const NetworkSpec& spec, const std::vector<Tensor>& params);

struct GanTrainConfig {
    int iterations = 5000;  // counted in critic updates
    int batch_size = 16;
    double learning_rate = 1e-4;
    double beta1 = 0.0;
    double beta2 = 0.9;
    double epsilon = 1e-8;
    double gp_weight = 10.0;
    int critic_steps_per_generator_step = 5;
    int record_interval = 100;
    std::uint64_t seed = 1;
};

struct GanTrainResult {
    std::vector<Tensor> generator_params;
    std::vector<Tensor> discriminator_params;
    std::vector<double> critic_loss;
    std::vector<double> generator_loss;
};

GanTrainResult train_gan(const LoadedCorpus& corpus, const NetworkSpec& gen_spec,
                         const NetworkSpec& disc_spec, const GanTrainConfig& cfg);

/// Mean penalty (||grad_x D(x_hat)|| - 1)^2 over a batch of random
/// interpolates between real and fake points, one uniform u per pair.
double gradient_penalty(const NetworkSpec& disc_spec, const std::vector<Tensor>& params,
                        const std::vector<Tensor>& real_batch, const std::vector<Tensor>& fake_batch,
                        std::uint64_t seed);

/// Penalty at a single probe point.
double gradient_penalty_at(const NetworkSpec& disc_spec, const std::vector<Tensor>& params,
                           const Tensor& x_hat);

void write_classifier_report(const std::string& path, const ClassifierTrainConfig& cfg,
                             const ClassifierTrainResult& result, const std::string& checkpoint_path);
void write_gan_report(const std::string& path, const GanTrainConfig& cfg, const GanTrainResult& result,
                      const std::string& generator_checkpoint,
                      const std::string& discriminator_checkpoint);

}  // namespace lp
