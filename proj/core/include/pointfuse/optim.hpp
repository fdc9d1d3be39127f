#pragma once

#include <cstdint>
#include <vector>

#include "pointfuse/tensor.hpp"

namespace pointfuse::nn {

struct AdamConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Bias-corrected Adam over a fixed parameter list.
class Adam {
public:
    Adam(std::vector<Param*> params, AdamConfig cfg = {});

    void step(); // applies params' accumulated grads, then increments the counter
    void zero_grad();
    std::int64_t steps() const { return step_; }

private:
    std::vector<Param*> params_;
    AdamConfig cfg_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    std::int64_t step_ = 0;
};

} // namespace pointfuse::nn
