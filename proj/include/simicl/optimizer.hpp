#pragma once

#include <cstdint>

#include "simicl/vit.hpp"

namespace simicl {

struct AdamSettings {
    float learning_rate = 5e-4f;
    float weight_decay = 0.05f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

// First/second moment accumulators mirroring the parameter tensors.
template <class T>
struct OptimizerState {
    ModelParams<T> m;
    ModelParams<T> v;
    int64_t step = 0;
};

template <class T>
OptimizerState<T> make_optimizer_state(const ModelConfig& config) {
    return OptimizerState<T>{zero_params<T>(config), zero_params<T>(config), 0};
}

// Decoupled AdamW: p <- p*(1 - lr*wd) - lr * m_hat / (sqrt(v_hat) + eps).
// Weight decay touches projection weights only; norms, biases, the mask token
// and the positional table are never decayed.
template <class T>
void adamw_step(ModelParams<T>& params, ModelParams<T>& grads, OptimizerState<T>& state,
                const AdamSettings& settings);

} // namespace simicl
