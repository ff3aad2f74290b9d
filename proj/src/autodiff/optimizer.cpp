#include "tsrisk/optimizer.hpp"

#include "tsrisk/errors.hpp"

#include <cmath>

namespace tsrisk {

AdamState make_adam_state(const ParameterStore& params, AdamConfig config)
{
    AdamState state;
    state.config = config;
    state.first_moment = params.zeros_like();
    state.second_moment = params.zeros_like();
    return state;
}

void adam_step(ParameterStore& params, const ParameterStore& grads, AdamState& state)
{
    const AdamConfig& c = state.config;
    const std::uint64_t t = state.step + 1;
    const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
    const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));

    for (auto& [name, value] : params) {
        if (!grads.contains(name) || !state.first_moment.contains(name) || !state.second_moment.contains(name)) {
            throw ShapeError("adam_step: no gradient or moment for '" + name + "'");
        }
        const Tensor& g = grads.at(name);
        Tensor& m = state.first_moment.at(name);
        Tensor& v = state.second_moment.at(name);
        if (g.shape() != value.shape() || m.shape() != value.shape() || v.shape() != value.shape()) {
            throw ShapeError("adam_step: shape mismatch for '" + name + "'");
        }
        for (std::size_t i = 0; i < value.size(); ++i) {
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            value[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
        }
    }
    state.step = t;
}

} // namespace tsrisk
