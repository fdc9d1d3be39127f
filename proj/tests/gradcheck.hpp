#pragma once

// Test-only finite-difference oracle: central differences with probe 1e-4,
// compared against analytic gradients via relative error
// |a - n| / max(1, |a|, |n|). Independent of the backward implementations.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "pointfuse/tensor.hpp"

namespace gradcheck {

inline double rel_error(double analytic, double numeric) {
    return std::abs(analytic - numeric)
           / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

// scalar projection <coeffs, t> turns any tensor output into a loss
inline double project(const pointfuse::nn::Tensor& t, const std::vector<double>& coeffs) {
    double sum = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) sum += coeffs[i] * t[i];
    return sum;
}

// Max relative error between `analytic` and the central difference of
// `loss_fn` over every coordinate of `storage`.
inline double max_rel_error(const std::function<double()>& loss_fn, std::vector<double>& storage,
                            const std::vector<double>& analytic, double eps = 1e-4) {
    double worst = 0.0;
    for (std::size_t i = 0; i < storage.size(); ++i) {
        const double saved = storage[i];
        storage[i] = saved + eps;
        const double up = loss_fn();
        storage[i] = saved - eps;
        const double down = loss_fn();
        storage[i] = saved;
        const double numeric = (up - down) / (2.0 * eps);
        worst = std::max(worst, rel_error(analytic[i], numeric));
    }
    return worst;
}

} // namespace gradcheck
