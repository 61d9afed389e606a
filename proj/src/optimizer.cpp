#include "simicl/optimizer.hpp"

#include <cmath>

#include "simicl/error.hpp"

namespace simicl {

template <class T>
void adamw_step(ModelParams<T>& params, ModelParams<T>& grads, OptimizerState<T>& state,
                const AdamSettings& settings) {
    auto param_refs = collect_tensors(params);
    auto grad_refs = collect_tensors(grads);
    auto m_refs = collect_tensors(state.m);
    auto v_refs = collect_tensors(state.v);
    if (param_refs.size() != grad_refs.size() || param_refs.size() != m_refs.size()) {
        throw Error(ErrorCode::ConfigMismatch, "optimizer state does not mirror the parameter set");
    }

    state.step += 1;
    const T lr = static_cast<T>(settings.learning_rate);
    const T beta1 = static_cast<T>(settings.beta1);
    const T beta2 = static_cast<T>(settings.beta2);
    const T eps = static_cast<T>(settings.eps);
    const T bc1 = T(1) - static_cast<T>(std::pow(static_cast<double>(settings.beta1),
                                                 static_cast<double>(state.step)));
    const T bc2 = T(1) - static_cast<T>(std::pow(static_cast<double>(settings.beta2),
                                                 static_cast<double>(state.step)));
    const T decay_scale = T(1) - lr * static_cast<T>(settings.weight_decay);

    for (size_t i = 0; i < param_refs.size(); ++i) {
        if (param_refs[i].size != grad_refs[i].size) {
            throw Error(ErrorCode::ConfigMismatch, "gradient shape mismatch at " + param_refs[i].name);
        }
        Eigen::Map<Vec<T>> p(param_refs[i].data, static_cast<Eigen::Index>(param_refs[i].size));
        Eigen::Map<const Vec<T>> g(grad_refs[i].data, static_cast<Eigen::Index>(grad_refs[i].size));
        Eigen::Map<Vec<T>> m(m_refs[i].data, static_cast<Eigen::Index>(m_refs[i].size));
        Eigen::Map<Vec<T>> v(v_refs[i].data, static_cast<Eigen::Index>(v_refs[i].size));

        m.array() = beta1 * m.array() + (T(1) - beta1) * g.array();
        v.array() = beta2 * v.array() + (T(1) - beta2) * g.array().square();
        if (param_refs[i].weight_decay && settings.weight_decay != 0.0f) {
            p *= decay_scale;
        }
        p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
    }
}

template void adamw_step(ModelParams<float>&, ModelParams<float>&, OptimizerState<float>&,
                         const AdamSettings&);
template void adamw_step(ModelParams<double>&, ModelParams<double>&, OptimizerState<double>&,
                         const AdamSettings&);

} // namespace simicl
