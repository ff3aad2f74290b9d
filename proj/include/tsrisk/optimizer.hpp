#pragma once

#include "tsrisk/parameter_store.hpp"

#include <cstdint>

namespace tsrisk {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adaptive-moment optimiser state: one first/second moment array per
/// parameter, plus the number of steps taken so far.
struct AdamState {
    AdamConfig config;
    ParameterStore first_moment;
    ParameterStore second_moment;
    std::uint64_t step = 0;
};

AdamState make_adam_state(const ParameterStore& params, AdamConfig config = {});

/// One bias-corrected update of every parameter in `params` using the
/// matching entry of `grads`.
void adam_step(ParameterStore& params, const ParameterStore& grads, AdamState& state);

} // namespace tsrisk
