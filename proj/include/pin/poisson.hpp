#pragma once

#include <cmath>
#include <span>

#include "pin/error.hpp"

namespace pin {

/// One row's Poisson deviance contribution 2v (f - Y - Y log(f/Y)); the Y = 0
/// limit reads 2vf. Requires f > 0, Y >= 0, v > 0.
inline double poisson_deviance_term(double f, double y, double v) {
    if (!(f > 0.0)) throw DomainError("poisson deviance: non-positive prediction");
    if (y < 0.0) throw DomainError("poisson deviance: negative response");
    if (!(v > 0.0)) throw DomainError("poisson deviance: non-positive exposure");
    if (y == 0.0) return 2.0 * v * f;
    return 2.0 * v * (f - y - y * std::log(f / y));
}

/// Average Poisson deviance over aligned prediction/response/exposure arrays.
inline double poisson_deviance(std::span<const double> predictions, std::span<const double> y,
                               std::span<const double> v) {
    detail::require(predictions.size() == y.size() && y.size() == v.size(),
                    "poisson_deviance: array length mismatch");
    detail::require(!predictions.empty(), "poisson_deviance: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        acc += poisson_deviance_term(predictions[i], y[i], v[i]);
    return acc / static_cast<double>(predictions.size());
}

} // namespace pin
