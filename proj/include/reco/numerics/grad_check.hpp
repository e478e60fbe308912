#pragma once

#include <functional>
#include <string>
#include <vector>

#include "reco/numerics/tape.hpp"

namespace reco::num {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t worst_leaf = 0;
    std::size_t worst_coord = 0;
    bool pass = false;

    std::string str() const;
};

// Builder receives a fresh tape plus one leaf per point tensor and returns the
// scalar loss node. Central differences with step h are compared against the
// tape gradient; relative error per coordinate is |a-n| / max(1, |a|, |n|).
using ScalarFn = std::function<NodeId(Tape&, const std::vector<NodeId>&)>;

GradCheckReport grad_check(const ScalarFn& f, const std::vector<Tensor>& point, double h, double tolerance);

}  // namespace reco::num
