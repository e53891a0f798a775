#pragma once

#include <cstdint>
#include <vector>

#include "lp/tensor.hpp"

namespace lp {

/// Adam optimiser state for one parameter set. Moments are allocated on the
/// first step. Updates take the descent direction; callers maximising an
/// objective negate their gradients.
struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step_count = 0;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
};

AdamState make_adam(double learning_rate, double beta1, double beta2, double epsilon);

/// In-place update: p -= lr * m_hat / (sqrt(v_hat) + eps * sqrt(1 - beta2^t)).
void adam_step(std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads, AdamState& state);

/// Convenience overload for locally owned tensors.
void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state);

}  // namespace lp
