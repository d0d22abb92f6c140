#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lfae/errors.hpp"
#include "lfae/model.hpp"

namespace lfae {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First and second moment accumulators, one vector per parameter block.
template <class T>
struct AdamState {
    std::vector<std::vector<T>> first_moment;
    std::vector<std::vector<T>> second_moment;
    std::uint64_t step = 0;
};

/// One bias-corrected Adam update:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2,
///   theta <- theta - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps).
template <class T>
void adam_step(std::span<const ParamView<T>> params, std::span<const ParamView<T>> grads, AdamState<T>& state,
               double lr, const AdamConfig& cfg = {})
{
    if (params.size() != grads.size()) {
        throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameter blocks but " +
                         std::to_string(grads.size()) + " gradient blocks");
    }
    if (state.first_moment.empty() && state.step == 0) {
        for (const auto& p : params) {
            state.first_moment.emplace_back(p.values.size(), T(0));
            state.second_moment.emplace_back(p.values.size(), T(0));
        }
    }
    if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
        throw ShapeError("adam_step: optimizer state does not match parameter list");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(cfg.beta1, t);
    const double correction2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        std::span<T> theta = params[k].values;
        std::span<T> g = grads[k].values;
        std::vector<T>& m = state.first_moment[k];
        std::vector<T>& v = state.second_moment[k];
        if (g.size() != theta.size() || m.size() != theta.size() || v.size() != theta.size()) {
            throw ShapeError("adam_step: block '" + params[k].name + "' has mismatched sizes");
        }
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double gi = static_cast<double>(g[i]);
            const double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * gi;
            const double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * gi * gi;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            const double update = lr * (mi / correction1) / (std::sqrt(vi / correction2) + cfg.epsilon);
            theta[i] = static_cast<T>(static_cast<double>(theta[i]) - update);
        }
    }
}

} // namespace lfae
