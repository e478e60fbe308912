#include "reco/numerics/adam.hpp"

#include <cmath>

#include "reco/common/error.hpp"

namespace reco::num {

void Adam::step(const std::vector<std::pair<std::string, Tensor*>>& params,
                const std::unordered_map<std::string, Tensor>& grads) {
    // Validate before mutating anything.
    for (const auto& [name, p] : params) {
        auto it = grads.find(name);
        if (it == grads.end()) continue;
        const Tensor& g = it->second;
        if (!g.same_shape(*p)) {
            throw ShapeError("adam: gradient shape " + g.shape_str() + " != parameter " + name + " " +
                             p->shape_str());
        }
        for (double v : g.data) {
            if (!std::isfinite(v)) {
                throw NumericError("adam: non-finite gradient in parameter " + name);
            }
        }
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (const auto& [name, p] : params) {
        auto it = grads.find(name);
        if (it == grads.end()) continue;
        const Tensor& g = it->second;
        Moments& mo = moments_[name];
        if (mo.m.empty()) {
            mo.m.assign(p->size(), 0.0);
            mo.v.assign(p->size(), 0.0);
        }
        for (std::size_t i = 0; i < p->size(); ++i) {
            mo.m[i] = cfg_.beta1 * mo.m[i] + (1.0 - cfg_.beta1) * g.data[i];
            mo.v[i] = cfg_.beta2 * mo.v[i] + (1.0 - cfg_.beta2) * g.data[i] * g.data[i];
            const double mhat = mo.m[i] / bc1;
            const double vhat = mo.v[i] / bc2;
            p->data[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

}  // namespace reco::num
