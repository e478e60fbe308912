#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "reco/numerics/tensor.hpp"

namespace reco::num {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias correction. Moment accumulators are keyed by parameter name
// and created lazily at the parameter's shape.
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    // One update over a set of named parameters. Throws NumericError if any
    // gradient entry is NaN/Inf, leaving parameters untouched.
    void step(const std::vector<std::pair<std::string, Tensor*>>& params,
              const std::unordered_map<std::string, Tensor>& grads);

    std::size_t step_count() const { return step_; }
    const AdamConfig& config() const { return cfg_; }

private:
    struct Moments {
        std::vector<double> m, v;
    };
    AdamConfig cfg_;
    std::size_t step_ = 0;
    std::unordered_map<std::string, Moments> moments_;
};

}  // namespace reco::num
