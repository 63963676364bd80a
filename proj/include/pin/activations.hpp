#pragma once

#include <algorithm>
#include <cmath>

#include "pin/error.hpp"

namespace pin {

/// Centered hard sigmoid: max(0, min(1, (1+x)/2)). The continuous stand-in
/// for a binary tree split; saturates at |x| >= 1.
inline double hard_sigmoid(double x) {
    if (!std::isfinite(x)) throw DomainError("hard_sigmoid: non-finite input");
    return std::max(0.0, std::min(1.0, 0.5 * (1.0 + x)));
}

/// Derivative of the centered hard sigmoid: 1/2 on the open linear region,
/// 0 when saturated. Kinks |x| = 1 take the saturated-side value 0, so
/// saturated units stay frozen under gradient descent.
inline double hard_sigmoid_derivative(double x) {
    if (!std::isfinite(x)) throw DomainError("hard_sigmoid_derivative: non-finite input");
    return std::fabs(x) < 1.0 ? 0.5 : 0.0;
}

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

/// relu'(0) = 0 (subgradient convention matching relu's closed lower branch).
inline double relu_derivative(double x) { return x > 0.0 ? 1.0 : 0.0; }

} // namespace pin
