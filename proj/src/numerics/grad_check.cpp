#include "reco/numerics/grad_check.hpp"

#include <cmath>

#include "reco/common/error.hpp"

namespace reco::num {

std::string GradCheckReport::str() const {
    return std::string(pass ? "pass" : "FAIL") + " max_rel_error=" + std::to_string(max_rel_error) +
           " at leaf " + std::to_string(worst_leaf) + " coord " + std::to_string(worst_coord);
}

namespace {

double eval_scalar(const ScalarFn& f, const std::vector<Tensor>& point) {
    Tape tape;
    std::vector<NodeId> leaves;
    leaves.reserve(point.size());
    for (const Tensor& p : point) leaves.push_back(tape.leaf(p));
    const NodeId loss = f(tape, leaves);
    const Tensor& v = tape.value(loss);
    if (!v.is_scalar()) throw ShapeError("grad_check: function output must be scalar, got " + v.shape_str());
    if (!std::isfinite(v.at(0))) throw NumericError("grad_check: function not finite at point");
    return v.at(0);
}

}  // namespace

GradCheckReport grad_check(const ScalarFn& f, const std::vector<Tensor>& point, double h, double tolerance) {
    // Analytic pass.
    Tape tape;
    std::vector<NodeId> leaves;
    for (Tensor p : point) {
        p.requires_grad = true;
        leaves.push_back(tape.leaf(std::move(p)));
    }
    const NodeId loss = f(tape, leaves);
    if (!std::isfinite(tape.value(loss).at(0))) throw NumericError("grad_check: function not finite at point");
    tape.backward(loss);

    GradCheckReport report;
    std::vector<Tensor> probe = point;
    for (std::size_t li = 0; li < point.size(); ++li) {
        const Tensor analytic = tape.grad(leaves[li]);
        for (std::size_t c = 0; c < point[li].size(); ++c) {
            const double orig = probe[li].data[c];
            probe[li].data[c] = orig + h;
            const double up = eval_scalar(f, probe);
            probe[li].data[c] = orig - h;
            const double dn = eval_scalar(f, probe);
            probe[li].data[c] = orig;
            const double numeric = (up - dn) / (2.0 * h);
            const double a = analytic.data[c];
            const double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_leaf = li;
                report.worst_coord = c;
            }
        }
    }
    report.pass = report.max_rel_error < tolerance;
    return report;
}

}  // namespace reco::num
