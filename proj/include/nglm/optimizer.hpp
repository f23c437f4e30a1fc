#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace nglm::optimizer {

/// AdaDelta accumulators for one flat parameter block.
struct AdaDeltaState {
    double rho = 0.95;
    double epsilon = 1e-6;
    std::vector<double> acc_grad_sq;    // E[g²]
    std::vector<double> acc_update_sq;  // E[Δ²]

    AdaDeltaState() = default;
    AdaDeltaState(std::size_t n, double rho_ = 0.95, double epsilon_ = 1e-6)
        : rho(rho_), epsilon(epsilon_), acc_grad_sq(n, 0.0), acc_update_sq(n, 0.0) {
        if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("adadelta: rho out of range");
        if (!(epsilon > 0.0)) throw std::invalid_argument("adadelta: epsilon must be positive");
    }
};

/// Per scalar: Eg² ← ρEg² + (1−ρ)g²; Δ = −(√(EΔ²+ε)/√(Eg²+ε))·g;
/// EΔ² ← ρEΔ² + (1−ρ)Δ²; param += Δ.
inline void adadelta_step(AdaDeltaState& state, double* params, const double* grads,
                          std::size_t n) {
    if (state.acc_grad_sq.size() != n) throw std::invalid_argument("adadelta: shape mismatch");
    const double rho = state.rho;
    const double eps = state.epsilon;
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grads[i];
        double& eg2 = state.acc_grad_sq[i];
        double& ed2 = state.acc_update_sq[i];
        eg2 = rho * eg2 + (1.0 - rho) * g * g;
        const double delta = -std::sqrt(ed2 + eps) / std::sqrt(eg2 + eps) * g;
        ed2 = rho * ed2 + (1.0 - rho) * delta * delta;
        params[i] += delta;
    }
}

inline void adadelta_step(AdaDeltaState& state, std::vector<double>& params,
                          const std::vector<double>& grads) {
    if (params.size() != grads.size()) throw std::invalid_argument("adadelta: shape mismatch");
    adadelta_step(state, params.data(), grads.data(), params.size());
}

}  // namespace nglm::optimizer
