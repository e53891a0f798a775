#include "lp/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace lp {

AdamState make_adam(double learning_rate, double beta1, double beta2, double epsilon) {
    AdamState st;
    st.learning_rate = learning_rate;
    st.beta1 = beta1;
    st.beta2 = beta2;
    st.epsilon = epsilon;
    return st;
}

void adam_step(std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads, AdamState& state) {
    if (params.size() != grads.size()) {
        throw std::invalid_argument("adam: " + std::to_string(params.size()) + " params vs " +
                                    std::to_string(grads.size()) + " grads");
    }
    if (state.first_moment.empty()) {
        state.first_moment.reserve(params.size());
        state.second_moment.reserve(params.size());
        for (const Tensor* p : params) {
            state.first_moment.push_back(Tensor::zeros(p->dims));
            state.second_moment.push_back(Tensor::zeros(p->dims));
        }
    }
    if (state.first_moment.size() != params.size()) {
        throw std::invalid_argument("adam: state tracks " + std::to_string(state.first_moment.size()) +
                                    " params, got " + std::to_string(params.size()));
    }

    state.step_count += 1;
    const double b1 = state.beta1, b2 = state.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
    const double eps_hat = state.epsilon * std::sqrt(c2);
    const double lr = state.learning_rate;

    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        Tensor& m = state.first_moment[i];
        Tensor& v = state.second_moment[i];
        if (g.dims != p.dims || m.dims != p.dims) {
            throw std::invalid_argument("adam: parameter " + std::to_string(i) + " dims " + shape_str(p.dims) +
                                        " do not match gradient " + shape_str(g.dims));
        }
        double* pd = p.data.data();
        const double* gd = g.data.data();
        double* md = m.data.data();
        double* vd = v.data.data();
        const std::size_t n = p.data.size();
        for (std::size_t k = 0; k < n; ++k) {
            md[k] = b1 * md[k] + (1.0 - b1) * gd[k];
            vd[k] = b2 * vd[k] + (1.0 - b2) * gd[k] * gd[k];
            const double mhat = md[k] / c1;
            const double vhat = vd[k] / c2;
            pd[k] -= lr * mhat / (std::sqrt(vhat) + eps_hat);
        }
    }
}

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state) {
    std::vector<Tensor*> p;
    std::vector<const Tensor*> g;
    p.reserve(params.size());
    g.reserve(grads.size());
    for (Tensor& t : params) p.push_back(&t);
    for (const Tensor& t : grads) g.push_back(&t);
    adam_step(p, g, state);
}

}  // namespace lp
