#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "pin/error.hpp"

namespace pin {

/// Adam optimizer state over one flat parameter vector.
struct AdamState {
    std::vector<double> m; ///< first-moment estimates
    std::vector<double> v; ///< second-moment estimates
    long step = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    AdamState() = default;
    AdamState(std::size_t n, double lr)
        : m(n, 0.0), v(n, 0.0), learning_rate(lr) {
        detail::require(lr > 0.0, "AdamState: learning rate must be positive");
    }
};

/// One Adam update with bias correction. `params` and `grads` must match the
/// state's moment shape.
inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& st) {
    if (params.size() != grads.size() || params.size() != st.m.size() || st.m.size() != st.v.size())
        throw ContractError("adam_step: parameter/gradient/state shape mismatch");
    st.step += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * g;
        st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * g * g;
        const double mhat = st.m[i] / bc1;
        const double vhat = st.v[i] / bc2;
        params[i] -= st.learning_rate * mhat / (std::sqrt(vhat) + st.epsilon);
    }
}

/// Reduce-on-plateau learning-rate schedule. After `patience` consecutive
/// epochs without the validation loss improving by more than `threshold`,
/// the learning rate is multiplied by `factor`; it never increases.
struct LrSchedule {
    double factor = 0.9;
    int patience = 5;
    double threshold = 1e-6;
    double best = std::numeric_limits<double>::infinity();
    int since_improvement = 0;

    /// Feed one epoch's validation loss; returns the (possibly reduced) lr.
    double on_epoch(double val_loss, double lr) {
        if (val_loss < best - threshold) {
            best = val_loss;
            since_improvement = 0;
        } else if (++since_improvement >= patience) {
            since_improvement = 0;
            lr *= factor;
        }
        return lr;
    }
};

/// Early stopping on validation loss, same improvement threshold convention.
struct EarlyStopping {
    int patience = 15;
    double threshold = 1e-6;
    double best = std::numeric_limits<double>::infinity();
    int since_improvement = 0;

    bool should_stop(double val_loss) {
        if (val_loss < best - threshold) {
            best = val_loss;
            since_improvement = 0;
            return false;
        }
        return ++since_improvement >= patience;
    }
};

/// Central finite differences (L(p+e) - L(p-e)) / 2e per coordinate. This is
/// the gradient oracle the analytic backward pass is checked against.
inline std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& loss,
    std::span<const double> params,
    double epsilon = 1e-5) {
    detail::require(epsilon > 0.0, "finite_difference_gradient: epsilon must be positive");
    std::vector<double> p(params.begin(), params.end());
    std::vector<double> grad(p.size(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double saved = p[i];
        p[i] = saved + epsilon;
        const double up = loss(p);
        p[i] = saved - epsilon;
        const double down = loss(p);
        p[i] = saved;
        grad[i] = (up - down) / (2.0 * epsilon);
    }
    return grad;
}

} // namespace pin
