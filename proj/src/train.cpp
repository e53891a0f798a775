#include "lp/train.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "lp/adam.hpp"
#include "lp/rng.hpp"

namespace lp {
namespace {

void accumulate(std::vector<Tensor>& acc, const Evaluator& ev, const std::vector<NodeId>& grad_ids) {
    for (std::size_t i = 0; i < grad_ids.size(); ++i) {
        const Tensor& g = ev.value(grad_ids[i]);
        if (acc[i].data.empty()) acc[i] = g;
        else
            for (std::size_t k = 0; k < g.data.size(); ++k) acc[i].data[k] += g.data[k];
    }
}

void scale_all(std::vector<Tensor>& acc, double s) {
    for (Tensor& t : acc)
        for (double& v : t.data) v *= s;
}

std::vector<NodeId> require_grads(Graph& g, NodeId loss, const std::vector<NodeId>& wrt,
                                  const std::string& who) {
    std::vector<NodeId> ids = add_gradients(g, loss, wrt);
    for (NodeId id : ids)
        if (id < 0) throw std::logic_error(who + ": a parameter has no gradient path to the loss");
    return ids;
}

/// Critic graph with the three inputs, shared parameters and the gradient
/// penalty wired in. gp_weight scales the penalty node inside the loss.
struct CriticGraph {
    Graph g;
    NodeId x_real = -1, x_fake = -1, x_hat = -1;
    NetworkInstance disc;
    NodeId penalty = -1;
    NodeId loss = -1;
};

CriticGraph build_critic_graph(const NetworkSpec& disc_spec, double gp_weight) {
    CriticGraph cg;
    cg.x_real = cg.g.leaf(disc_spec.input_shape, "x_real");
    cg.x_fake = cg.g.leaf(disc_spec.input_shape, "x_fake");
    cg.x_hat = cg.g.leaf(disc_spec.input_shape, "x_hat");
    cg.disc = append_network(cg.g, disc_spec, cg.x_real);
    NetworkInstance df = append_network(cg.g, disc_spec, cg.x_fake, &cg.disc.params);
    NetworkInstance dh = append_network(cg.g, disc_spec, cg.x_hat, &cg.disc.params);

    std::vector<NodeId> wrt{cg.x_hat};
    NodeId gx = add_gradients(cg.g, dh.output, wrt)[0];
    NodeId norm = cg.g.sqrt_(cg.g.sum(cg.g.square(gx)));
    cg.penalty = cg.g.square(cg.g.scalar_add(norm, -1.0));
    cg.loss = cg.g.add(cg.g.sub(df.output, cg.disc.output), cg.g.scalar_mul(cg.penalty, gp_weight));
    return cg;
}

}  // namespace

NodeId append_bce(Graph& g, NodeId prob, NodeId label) {
    NodeId p = g.clamp_below(prob, 1e-7);
    NodeId q = g.clamp_below(g.scalar_add(g.scalar_mul(prob, -1.0), 1.0), 1e-7);
    NodeId one_minus_y = g.scalar_add(g.scalar_mul(label, -1.0), 1.0);
    NodeId ll = g.add(g.mul(label, g.log_(p)), g.mul(one_minus_y, g.log_(q)));
    return g.scalar_mul(ll, -1.0);
}

ClassifierTrainResult train_classifier(const LoadedCorpus& corpus, const NetworkSpec& spec,
                                       const ClassifierTrainConfig& cfg) {
    if (cfg.batch_size < 2 || cfg.batch_size % 2 != 0)
        throw std::invalid_argument("train_classifier: batch size must be even and at least 2");
    if (cfg.iterations < 1 || cfg.eval_interval < 1)
        throw std::invalid_argument("train_classifier: iterations and eval interval must be positive");
    if (corpus.train_vocal.empty() || corpus.train_nonvocal.empty())
        throw std::invalid_argument("train_classifier: corpus needs train clips of both labels");

    Graph g;
    NodeId x = g.leaf(spec.input_shape, "x");
    NodeId y = g.leaf({1}, "y");
    NetworkInstance inst = append_network(g, spec, x);
    if (inst.prob < 0) throw std::invalid_argument("train_classifier: spec must end in a sigmoid output");
    NodeId loss = append_bce(g, inst.prob, y);
    std::vector<NodeId> grad_ids = require_grads(g, loss, inst.params, "train_classifier");

    std::vector<Tensor> params = init_params(spec, Rng::derive(cfg.seed, 0));
    AdamState adam = make_adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    Rng rng(Rng::derive(cfg.seed, 1));
    Evaluator ev(g);

    std::vector<NodeId> wanted = grad_ids;
    wanted.push_back(loss);

    ClassifierTrainResult result;
    result.best_val_accuracy = -1.0;
    const int crop_range = kGanFrames - kClipFrames + 1;
    double window_loss = 0.0;
    int window_count = 0;

    for (int it = 0; it < cfg.iterations; ++it) {
        std::vector<Tensor> acc(params.size());
        double batch_loss = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            int label = b < cfg.batch_size / 2 ? 1 : 0;
            const auto& pool = label == 1 ? corpus.train_vocal : corpus.train_nonvocal;
            std::size_t pick = std::size_t(rng.uniform01() * double(pool.size()));
            if (pick >= pool.size()) pick = pool.size() - 1;
            int start = int(rng.uniform01() * double(crop_range));
            if (start >= crop_range) start = crop_range - 1;

            Tensor xt = mel_to_tensor(crop_mel(corpus.clips[pool[pick]].clip128, start, kClipFrames));
            Tensor yt = Tensor::scalar(double(label));
            std::vector<Binding> binds;
            binds.reserve(params.size() + 2);
            for (std::size_t i = 0; i < params.size(); ++i) binds.emplace_back(inst.params[i], &params[i]);
            binds.emplace_back(x, &xt);
            binds.emplace_back(y, &yt);
            ev.run(binds, wanted);
            accumulate(acc, ev, grad_ids);
            batch_loss += ev.value(loss).data[0];
        }
        scale_all(acc, 1.0 / cfg.batch_size);
        batch_loss /= cfg.batch_size;
        if (!std::isfinite(batch_loss))
            throw std::runtime_error("train_classifier: loss is not finite at iteration " +
                                     std::to_string(it + 1));
        adam_step(params, acc, adam);

        window_loss += batch_loss;
        ++window_count;
        if ((it + 1) % cfg.eval_interval == 0 || it + 1 == cfg.iterations) {
            result.interval_loss.push_back(window_loss / window_count);
            window_loss = 0.0;
            window_count = 0;
            double acc_val = corpus.val_idx.empty()
                                 ? 0.0
                                 : classifier_accuracy(corpus, corpus.val_idx, spec, params);
            result.val_accuracy.push_back(acc_val);
            if (acc_val > result.best_val_accuracy) {
                result.best_val_accuracy = acc_val;
                result.best_iteration = it + 1;
                result.best_params = params;
            }
        }
    }
    result.final_params = params;
    if (result.best_params.empty()) {
        result.best_params = params;
        result.best_iteration = cfg.iterations;
    }
    return result;
}

double classifier_accuracy(const LoadedCorpus& corpus, const std::vector<std::size_t>& indices,
                           const NetworkSpec& spec, const std::vector<Tensor>& params) {
    if (indices.empty()) throw std::invalid_argument("classifier_accuracy: empty index list");
    Graph g;
    NodeId x = g.leaf(spec.input_shape, "x");
    NetworkInstance inst = append_network(g, spec, x);
    Evaluator ev(g);
    std::vector<NodeId> wanted{inst.prob};

    int correct = 0;
    for (std::size_t idx : indices) {
        Tensor xt = mel_to_tensor(corpus.clips[idx].clip115);
        std::vector<Binding> binds;
        binds.reserve(params.size() + 1);
        for (std::size_t i = 0; i < params.size(); ++i) binds.emplace_back(inst.params[i], &params[i]);
        binds.emplace_back(x, &xt);
        ev.run(binds, wanted);
        int predicted = ev.value(inst.prob).data[0] >= 0.5 ? 1 : 0;
        if (predicted == corpus.clips[idx].label) ++correct;
    }
    return double(correct) / double(indices.size());
}

GanTrainResult train_gan(const LoadedCorpus& corpus, const NetworkSpec& gen_spec,
                         const NetworkSpec& disc_spec, const GanTrainConfig& cfg) {
    if (cfg.batch_size < 1 || cfg.iterations < 1)
        throw std::invalid_argument("train_gan: batch size and iterations must be positive");
    if (cfg.critic_steps_per_generator_step < 1)
        throw std::invalid_argument("train_gan: critic step ratio must be positive");
    if (corpus.train_idx.empty()) throw std::invalid_argument("train_gan: corpus has no train clips");

    CriticGraph cg = build_critic_graph(disc_spec, cfg.gp_weight);
    std::vector<NodeId> disc_grads = require_grads(cg.g, cg.loss, cg.disc.params, "train_gan");
    std::vector<NodeId> critic_wanted = disc_grads;
    critic_wanted.push_back(cg.loss);
    Evaluator cev(cg.g);

    Graph gg;
    NodeId z = gg.leaf(gen_spec.input_shape, "z");
    NetworkInstance gen = append_network(gg, gen_spec, z);
    NetworkInstance disc_on_fake = append_network(gg, disc_spec, gen.output);
    NodeId gen_loss = gg.scalar_mul(disc_on_fake.output, -1.0);
    std::vector<NodeId> gen_grads = require_grads(gg, gen_loss, gen.params, "train_gan");
    std::vector<NodeId> gen_wanted = gen_grads;
    gen_wanted.push_back(gen_loss);
    std::vector<NodeId> fake_wanted{gen.output};
    Evaluator gev(gg);

    std::vector<Tensor> gen_params = init_params(gen_spec, Rng::derive(cfg.seed, 0));
    std::vector<Tensor> disc_params = init_params(disc_spec, Rng::derive(cfg.seed, 1));
    AdamState adam_g = make_adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    AdamState adam_d = make_adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    Rng rng(Rng::derive(cfg.seed, 2));

    GanTrainResult result;
    double window_loss = 0.0;
    int window_count = 0;
    std::vector<double> zbuf(std::size_t(gen_spec.latent_dim));
    Tensor zt = Tensor::zeros(gen_spec.input_shape);

    auto make_fake = [&](Tensor& out) {
        for (auto& v : zbuf) v = rng.normal();
        zt.data.assign(zbuf.begin(), zbuf.end());
        std::vector<Binding> binds;
        binds.reserve(gen_params.size() + 1);
        for (std::size_t i = 0; i < gen_params.size(); ++i) binds.emplace_back(gen.params[i], &gen_params[i]);
        binds.emplace_back(z, &zt);
        gev.run(binds, fake_wanted);
        out = gev.value(gen.output);
    };

    for (int it = 0; it < cfg.iterations; ++it) {
        std::vector<Tensor> acc(disc_params.size());
        double batch_loss = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            std::size_t pick = std::size_t(rng.uniform01() * double(corpus.train_idx.size()));
            if (pick >= corpus.train_idx.size()) pick = corpus.train_idx.size() - 1;
            Tensor real = mel_to_tensor(corpus.clips[corpus.train_idx[pick]].clip128);

            Tensor fake;
            make_fake(fake);
            double u = rng.uniform01();
            Tensor xhat = Tensor::zeros(real.dims);
            for (std::size_t k = 0; k < xhat.data.size(); ++k)
                xhat.data[k] = u * real.data[k] + (1.0 - u) * fake.data[k];

            std::vector<Binding> binds;
            binds.reserve(disc_params.size() + 3);
            for (std::size_t i = 0; i < disc_params.size(); ++i)
                binds.emplace_back(cg.disc.params[i], &disc_params[i]);
            binds.emplace_back(cg.x_real, &real);
            binds.emplace_back(cg.x_fake, &fake);
            binds.emplace_back(cg.x_hat, &xhat);
            cev.run(binds, critic_wanted);
            accumulate(acc, cev, disc_grads);
            batch_loss += cev.value(cg.loss).data[0];
        }
        scale_all(acc, 1.0 / cfg.batch_size);
        batch_loss /= cfg.batch_size;
        if (!std::isfinite(batch_loss))
            throw std::runtime_error("train_gan: critic loss is not finite at iteration " +
                                     std::to_string(it + 1) + "; training diverged");
        adam_step(disc_params, acc, adam_d);
        window_loss += batch_loss;
        ++window_count;

        if ((it + 1) % cfg.critic_steps_per_generator_step == 0) {
            std::vector<Tensor> gacc(gen_params.size());
            double gen_batch_loss = 0.0;
            for (int b = 0; b < cfg.batch_size; ++b) {
                for (auto& v : zbuf) v = rng.normal();
                zt.data.assign(zbuf.begin(), zbuf.end());
                std::vector<Binding> binds;
                binds.reserve(gen_params.size() + disc_params.size() + 1);
                for (std::size_t i = 0; i < gen_params.size(); ++i)
                    binds.emplace_back(gen.params[i], &gen_params[i]);
                for (std::size_t i = 0; i < disc_params.size(); ++i)
                    binds.emplace_back(disc_on_fake.params[i], &disc_params[i]);
                binds.emplace_back(z, &zt);
                gev.run(binds, gen_wanted);
                accumulate(gacc, gev, gen_grads);
                gen_batch_loss += gev.value(gen_loss).data[0];
            }
            scale_all(gacc, 1.0 / cfg.batch_size);
            gen_batch_loss /= cfg.batch_size;
            if (!std::isfinite(gen_batch_loss))
                throw std::runtime_error("train_gan: generator loss is not finite at iteration " +
                                         std::to_string(it + 1) + "; training diverged");
            adam_step(gen_params, gacc, adam_g);
            result.generator_loss.push_back(gen_batch_loss);
        }

        if ((it + 1) % cfg.record_interval == 0 || it + 1 == cfg.iterations) {
            result.critic_loss.push_back(window_loss / window_count);
            window_loss = 0.0;
            window_count = 0;
        }
    }

    result.generator_params = std::move(gen_params);
    result.discriminator_params = std::move(disc_params);
    return result;
}

double gradient_penalty_at(const NetworkSpec& disc_spec, const std::vector<Tensor>& params,
                           const Tensor& x_hat) {
    Graph g;
    NodeId xh = g.leaf(disc_spec.input_shape, "x_hat");
    NetworkInstance inst = append_network(g, disc_spec, xh);
    std::vector<NodeId> wrt{xh};
    NodeId gx = add_gradients(g, inst.output, wrt)[0];
    NodeId norm = g.sqrt_(g.sum(g.square(gx)));
    NodeId pen = g.square(g.scalar_add(norm, -1.0));

    if (params.size() != inst.params.size())
        throw std::invalid_argument("gradient_penalty: got " + std::to_string(params.size()) +
                                    " parameter tensors, want " + std::to_string(inst.params.size()));
    std::vector<Binding> binds;
    binds.reserve(params.size() + 1);
    for (std::size_t i = 0; i < params.size(); ++i) binds.emplace_back(inst.params[i], &params[i]);
    binds.emplace_back(xh, &x_hat);
    std::vector<NodeId> wanted{pen};
    Evaluator ev(g);
    ev.run(binds, wanted);
    return ev.value(pen).data[0];
}

double gradient_penalty(const NetworkSpec& disc_spec, const std::vector<Tensor>& params,
                        const std::vector<Tensor>& real_batch, const std::vector<Tensor>& fake_batch,
                        std::uint64_t seed) {
    if (real_batch.size() != fake_batch.size() || real_batch.empty())
        throw std::invalid_argument("gradient_penalty: real and fake batches must be non-empty and equal");
    Rng rng(seed);
    double total = 0.0;
    for (std::size_t i = 0; i < real_batch.size(); ++i) {
        if (real_batch[i].dims != fake_batch[i].dims)
            throw std::invalid_argument("gradient_penalty: batch shapes disagree at pair " +
                                        std::to_string(i));
        double u = rng.uniform01();
        Tensor xhat = Tensor::zeros(real_batch[i].dims);
        for (std::size_t k = 0; k < xhat.data.size(); ++k)
            xhat.data[k] = u * real_batch[i].data[k] + (1.0 - u) * fake_batch[i].data[k];
        total += gradient_penalty_at(disc_spec, params, xhat);
    }
    return total / double(real_batch.size());
}

namespace {

nlohmann::json losses_json(const std::vector<double>& v) { return nlohmann::json(v); }

}  // namespace

void write_classifier_report(const std::string& path, const ClassifierTrainConfig& cfg,
                             const ClassifierTrainResult& result, const std::string& checkpoint_path) {
    nlohmann::json j;
    j["kind"] = "classifier";
    j["config"]["iterations"] = cfg.iterations;
    j["config"]["batch_size"] = cfg.batch_size;
    j["config"]["learning_rate"] = cfg.learning_rate;
    j["config"]["beta1"] = cfg.beta1;
    j["config"]["beta2"] = cfg.beta2;
    j["config"]["epsilon"] = cfg.epsilon;
    j["config"]["eval_interval"] = cfg.eval_interval;
    j["config"]["seed"] = cfg.seed;
    j["interval_loss"] = losses_json(result.interval_loss);
    j["val_accuracy"] = losses_json(result.val_accuracy);
    j["best_iteration"] = result.best_iteration;
    j["best_val_accuracy"] = result.best_val_accuracy;
    j["checkpoint"] = checkpoint_path;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("train_classifier: cannot write report " + path);
    out << j.dump(2) << "\n";
}

void write_gan_report(const std::string& path, const GanTrainConfig& cfg, const GanTrainResult& result,
                      const std::string& generator_checkpoint,
                      const std::string& discriminator_checkpoint) {
    nlohmann::json j;
    j["kind"] = "gan";
    j["config"]["iterations"] = cfg.iterations;
    j["config"]["batch_size"] = cfg.batch_size;
    j["config"]["learning_rate"] = cfg.learning_rate;
    j["config"]["beta1"] = cfg.beta1;
    j["config"]["beta2"] = cfg.beta2;
    j["config"]["epsilon"] = cfg.epsilon;
    j["config"]["gp_weight"] = cfg.gp_weight;
    j["config"]["critic_steps_per_generator_step"] = cfg.critic_steps_per_generator_step;
    j["config"]["record_interval"] = cfg.record_interval;
    j["config"]["seed"] = cfg.seed;
    j["critic_loss"] = losses_json(result.critic_loss);
    j["generator_loss"] = losses_json(result.generator_loss);
    j["generator_checkpoint"] = generator_checkpoint;
    j["discriminator_checkpoint"] = discriminator_checkpoint;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("train_gan: cannot write report " + path);
    out << j.dump(2) << "\n";
}

}  // namespace lp
