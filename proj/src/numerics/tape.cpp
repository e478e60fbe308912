#include "reco/numerics/tape.hpp"

#include <algorithm>
#include <cmath>

namespace reco::num {

const char* op_name(OpKind k) {
    switch (k) {
        case OpKind::leaf: return "leaf";
        case OpKind::reshape: return "reshape";
        case OpKind::transpose: return "transpose";
        case OpKind::slice_cols: return "slice_cols";
        case OpKind::gather_rows: return "gather_rows";
        case OpKind::concat: return "concat";
        case OpKind::matmul: return "matmul";
        case OpKind::add: return "add";
        case OpKind::add_rowvec: return "add_rowvec";
        case OpKind::mul_rowvec: return "mul_rowvec";
        case OpKind::multiply: return "multiply";
        case OpKind::scale: return "scale";
        case OpKind::mean_axis: return "mean_axis";
        case OpKind::sum_all: return "sum_all";
        case OpKind::softmax: return "softmax";
        case OpKind::log_softmax: return "log_softmax";
        case OpKind::layer_norm: return "layer_norm";
        case OpKind::embedding_lookup: return "embedding_lookup";
        case OpKind::relu: return "relu";
        case OpKind::gelu: return "gelu";
        case OpKind::sigmoid: return "sigmoid";
        case OpKind::log_elem: return "log";
        case OpKind::pick_per_row: return "pick_per_row";
        case OpKind::dropout: return "dropout";
    }
    return "?";
}

namespace {

[[noreturn]] void shape_fail(OpKind k, const std::string& detail) {
    throw ShapeError(std::string(op_name(k)) + ": " + detail);
}

void require_rank2(OpKind k, const Tensor& t, const char* which) {
    if (t.rank() != 2) shape_fail(k, std::string(which) + " must be rank 2, got " + t.shape_str());
}

}  // namespace

NodeId Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

NodeId Tape::leaf(Tensor t) {
    Node n;
    n.kind = OpKind::leaf;
    n.needs_grad = t.requires_grad;
    n.value = std::move(t);
    return push(std::move(n));
}

NodeId Tape::constant(Tensor t) {
    t.requires_grad = false;
    return leaf(std::move(t));
}

Tensor Tape::grad(NodeId id) const {
    const Node& n = nodes_[id];
    if (n.grad.empty()) return Tensor::zeros(n.value.shape);
    return Tensor(n.value.shape, n.grad);
}

void Tape::accumulate(NodeId id, std::size_t flat, double g) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
    n.grad[flat] += g;
}

void Tape::backward(NodeId loss) {
    if (consumed_) throw NumericError("backward: tape already consumed");
    if (loss >= nodes_.size()) throw ShapeError("backward: unknown node id");
    if (!nodes_[loss].value.is_scalar()) {
        throw ShapeError("backward: loss must be scalar, got " + nodes_[loss].value.shape_str());
    }
    consumed_ = true;
    nodes_[loss].grad.assign(1, 1.0);
    for (std::size_t i = loss + 1; i-- > 0;) {
        if (!nodes_[i].grad.empty() && nodes_[i].kind != OpKind::leaf) backward_node(i);
    }
}

// ---- forward helpers --------------------------------------------------------

namespace {

struct Slice {
    // View of a 1-D or 2-D tensor as a list of contiguous slices along the
    // reduction/normalization axis. For axis=1 (rows) slices are stride-1.
    std::size_t count, len, outer_stride, inner_stride;
};

Slice slices_along(const Tensor& t, int axis, OpKind k) {
    if (t.rank() == 1) {
        if (axis != 0) shape_fail(k, "axis " + std::to_string(axis) + " invalid for rank-1 " + t.shape_str());
        return {1, t.shape[0], 0, 1};
    }
    if (t.rank() == 2) {
        if (axis == 1) return {t.shape[0], t.shape[1], t.shape[1], 1};
        if (axis == 0) return {t.shape[1], t.shape[0], 1, t.shape[1]};
        shape_fail(k, "axis " + std::to_string(axis) + " invalid for rank-2 " + t.shape_str());
    }
    shape_fail(k, "rank " + std::to_string(t.rank()) + " unsupported");
}

}  // namespace

// ---- primitives -------------------------------------------------------------

NodeId reshape(Tape& t, NodeId x, std::vector<std::size_t> shape) {
    const Tensor& xv = t.value(x);
    if (Tensor::numel(shape) != xv.size()) {
        shape_fail(OpKind::reshape, "cannot view " + xv.shape_str() + " as " +
                                        Tensor(shape, std::vector<double>(Tensor::numel(shape))).shape_str());
    }
    Tape::Node n;
    n.kind = OpKind::reshape;
    n.inputs = {x};
    n.value = Tensor(std::move(shape), xv.data);
    return t.push(std::move(n));
}

NodeId transpose(Tape& t, NodeId x) {
    const Tensor& xv = t.value(x);
    require_rank2(OpKind::transpose, xv, "input");
    const std::size_t m = xv.shape[0], k = xv.shape[1];
    Tensor out = Tensor::zeros({k, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < k; ++j) out.at(j, i) = xv.at(i, j);
    Tape::Node n;
    n.kind = OpKind::transpose;
    n.inputs = {x};
    n.value = std::move(out);
    return t.push(std::move(n));
}

NodeId slice_cols(Tape& t, NodeId x, std::size_t c0, std::size_t c1) {
    const Tensor& xv = t.value(x);
    require_rank2(OpKind::slice_cols, xv, "input");
    if (c0 >= c1 || c1 > xv.shape[1]) {
        shape_fail(OpKind::slice_cols, "range [" + std::to_string(c0) + "," + std::to_string(c1) +
                                           ") invalid for " + xv.shape_str());
    }
    const std::size_t m = xv.shape[0], w = c1 - c0;
    Tensor out = Tensor::zeros({m, w});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) out.at(i, j) = xv.at(i, c0 + j);
    Tape::Node n;
    n.kind = OpKind::slice_cols;
    n.inputs = {x};
    n.idx = {c0, c1};
    n.value = std::move(out);
    return t.push(std::move(n));
}

NodeId gather_rows(Tape& t, NodeId x, std::vector<std::size_t> rows) {
    const Tensor& xv = t.value(x);
    require_rank2(OpKind::gather_rows, xv, "input");
    const std::size_t m = xv.shape[0], w = xv.shape[1];
    for (std::size_t r : rows) {
        if (r >= m) shape_fail(OpKind::gather_rows, "row " + std::to_string(r) + " out of range for " + xv.shape_str());
    }
    Tensor out = Tensor::zeros({rows.size(), w});
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < w; ++j) out.at(i, j) = xv.at(rows[i], j);
    Tape::Node n;
    n.kind = OpKind::gather_rows;
    n.inputs = {x};
    n.idx = std::move(rows);
    n.value = std::move(out);
    return t.push(std::move(n));
}

NodeId concat(Tape& t, const std::vector<NodeId>& xs, int axis) {
    if (xs.empty()) shape_fail(OpKind::concat, "no inputs");
    const Tensor& first = t.value(xs[0]);
    if (first.rank() == 1) {
        if (axis != 0) shape_fail(OpKind::concat, "axis must be 0 for rank-1 inputs");
        std::vector<double> data;
        for (NodeId id : xs) {
            const Tensor& v = t.value(id);
            if (v.rank() != 1) shape_fail(OpKind::concat, "mixed ranks " + first.shape_str() + " vs " + v.shape_str());
            data.insert(data.end(), v.data.begin(), v.data.end());
        }
        Tape::Node n;
        n.kind = OpKind::concat;
        n.inputs = xs;
        n.axis = 0;
        n.value = Tensor::vector(std::move(data));
        return t.push(std::move(n));
    }
    require_rank2(OpKind::concat, first, "input");
    if (axis == 0) {
        const std::size_t w = first.shape[1];
        std::vector<double> data;
        std::size_t m = 0;
        for (NodeId id : xs) {
            const Tensor& v = t.value(id);
            if (v.rank() != 2 || v.shape[1] != w) {
                shape_fail(OpKind::concat, "axis-0 width mismatch " + first.shape_str() + " vs " + v.shape_str());
            }
            data.insert(data.end(), v.data.begin(), v.data.end());
            m += v.shape[0];
        }
        Tape::Node n;
        n.kind = OpKind::concat;
        n.inputs = xs;
        n.axis = 0;
        n.value = Tensor({m, w}, std::move(data));
        return t.push(std::move(n));
    }
    if (axis != 1) shape_fail(OpKind::concat, "axis " + std::to_string(axis) + " unsupported");
    const std::size_t m = first.shape[0];
    std::size_t w = 0;
    for (NodeId id : xs) {
        const Tensor& v = t.value(id);
        if (v.rank() != 2 || v.shape[0] != m) {
            shape_fail(OpKind::concat, "axis-1 height mismatch " + first.shape_str() + " vs " + v.shape_str());
        }
        w += v.shape[1];
    }
    Tensor out = Tensor::zeros({m, w});
    std::size_t off = 0;
    for (NodeId id : xs) {
        const Tensor& v = t.value(id);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < v.shape[1]; ++j) out.at(i, off + j) = v.at(i, j);
        off += v.shape[1];
    }
    Tape::Node n;
    n.kind = OpKind::concat;
    n.inputs = xs;
    n.axis = 1;
    n.value = std::move(out);
    return t.push(std::move(n));
}

NodeId matmul(Tape& t, NodeId a, NodeId b) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    require_rank2(OpKind::matmul, av, "lhs");
    require_rank2(OpKind::matmul, bv, "rhs");
    if (av.shape[1] != bv.shape[0]) {
        shape_fail(OpKind::matmul, "inner dimensions mismatch " + av.shape_str() + " x " + bv.shape_str());
    }
    const std::size_t m = av.shape[0], k = av.shape[1], n2 = bv.shape[1];
    Tensor out = Tensor::zeros({m, n2});
    const double* A = av.data.data();
    const double* B = bv.data.data();
    double* C = out.data.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = A[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = B + p * n2;
            double* crow = C + i * n2;
            for (std::size_t j = 0; j < n2; ++j) crow[j] += aip * brow[j];
        }
    }
    Tape::Node n;
    n.kind = OpKind::matmul;
    n.inputs = {a, b};
    n.value = std::move(out);
    return t.push(std::move(n));
}

NodeId add(Tape& t, NodeId a, NodeId b) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (!av.same_shape(bv)) shape_fail(OpKind::add, "shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += bv.data[i];
    Tape::Node n;
    n.kind = OpKind::add;
    n.inputs = {a, b};
    n.value = std::move(out);
    return t.push(std::move(n));
}

NodeId add_rowvec(Tape& t, NodeId x, NodeId v) {
    const Tensor& xv = t.value(x);
    const Tensor& vv = t.value(v);
    require_rank2(OpKind::add_rowvec, xv, "input");
    if (vv.rank() != 1 || vv.shape[0] != xv.shape[1]) {
        shape_fail(OpKind::add_rowvec, "vector " + vv.shape_str() + " does not match columns of " + xv.shape_str());
    }
    Tensor out = xv;
    for (std::size_t i = 0; i < xv.shape[0]; ++i)
        for (std::size_t j = 0; j < xv.shape[1]; ++j) out.at(i, j) += vv.at(j);
    Tape::Node n;
    n.kind = OpKind::add_rowvec;
    n.inputs = {x, v};
    n.value = std::move(out);
    return t.push(std::move(n));
}

NodeId mul_rowvec(Tape& t, NodeId x, NodeId v) {
    const Tensor& xv = t.value(x);
    const Tensor& vv = t.value(v);
    require_rank2(OpKind::mul_rowvec, xv, "input");
    if (vv.rank() != 1 || vv.shape[0] != xv.shape[1]) {
        shape_fail(OpKind::mul_rowvec, "vector " + vv.shape_str() + " does not match columns of " + xv.shape_str());
    }
    Tensor out = xv;
    for (std::size_t i = 0; i < xv.shape[0]; ++i)
        for (std::size_t j = 0; j < xv.shape[1]; ++j) out.at(i, j) *= vv.at(j);
    Tape::Node n;
    n.kind = OpKind::mul_rowvec;
    n.inputs = {x, v};
    n.value = std::move(out);
    return t.push(std::move(n));
}

NodeId multiply(Tape& t, NodeId a, NodeId b) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (!av.same_shape(bv)) shape_fail(OpKind::multiply, "shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= bv.data[i];
    Tape::Node n;
    n.kind = OpKind::multiply;
    n.inputs = {a, b};
    n.value = std::move(out);
    return t.push(std::move(n));
}

NodeId scale(Tape& t, NodeId x, double c) {
    Tensor out = t.value(x);
    for (double& v : out.data) v *= c;
    Tape::Node n;
    n.kind = OpKind::scale;
    n.inputs = {x};
    n.c0 = c;
    n.value = std::move(out);
    return t.push(std::move(n));
}

NodeId mean_axis(Tape& t, NodeId x, int axis) {
    const Tensor& xv = t.value(x);
    const Slice s = slices_along(xv, axis, OpKind::mean_axis);
    // Reducing axis `axis` keeps the other one: for [m,n], axis 0 -> [n], axis 1 -> [m].
    Tensor out = Tensor::zeros({s.count});
    for (std::size_t i = 0; i < s.count; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < s.len; ++j) acc += xv.data[i * s.outer_stride + j * s.inner_stride];
        out.data[i] = acc / static_cast<double>(s.len);
    }
    Tape::Node n;
    n.kind = OpKind::mean_axis;
    n.inputs = {x};
    n.axis = axis;
    n.value = std::move(out);
    return t.push(std::move(n));
}

NodeId sum_all(Tape& t, NodeId x) {
    const Tensor& xv = t.value(x);
    double acc = 0.0;
    for (double v : xv.data) acc += v;
    Tape::Node n;
    n.kind = OpKind::sum_all;
    n.inputs = {x};
    n.value = Tensor::scalar(acc);
    return t.push(std::move(n));
}

namespace {

void softmax_slice(const double* in, double* out, std::size_t len, std::size_t stride) {
    double mx = in[0];
    for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, in[j * stride]);
    double z = 0.0;
    for (std::size_t j = 0; j < len; ++j) {
        const double e = std::exp(in[j * stride] - mx);
        out[j * stride] = e;
        z += e;
    }
    for (std::size_t j = 0; j < len; ++j) out[j * stride] /= z;
}

}  // namespace

NodeId softmax(Tape& t, NodeId x, int axis) {
    const Tensor& xv = t.value(x);
    const Slice s = slices_along(xv, axis, OpKind::softmax);
    Tensor out = Tensor::zeros(xv.shape);
    for (std::size_t i = 0; i < s.count; ++i) {
        softmax_slice(xv.data.data() + i * s.outer_stride, out.data.data() + i * s.outer_stride, s.len,
                      s.inner_stride);
    }
    Tape::Node n;
    n.kind = OpKind::softmax;
    n.inputs = {x};
    n.axis = axis;
    n.value = std::move(out);
    return t.push(std::move(n));
}

NodeId log_softmax(Tape& t, NodeId x, int axis) {
    const Tensor& xv = t.value(x);
    const Slice s = slices_along(xv, axis, OpKind::log_softmax);
    Tensor out = Tensor::zeros(xv.shape);
    std::vector<double> probs(xv.size());
    for (std::size_t i = 0; i < s.count; ++i) {
        const double* in = xv.data.data() + i * s.outer_stride;
        double* o = out.data.data() + i * s.outer_stride;
        double* pr = probs.data() + i * s.outer_stride;
        double mx = in[0];
        for (std::size_t j = 1; j < s.len; ++j) mx = std::max(mx, in[j * s.inner_stride]);
        double z = 0.0;
        for (std::size_t j = 0; j < s.len; ++j) z += std::exp(in[j * s.inner_stride] - mx);
        const double lz = std::log(z) + mx;
        for (std::size_t j = 0; j < s.len; ++j) {
            o[j * s.inner_stride] = in[j * s.inner_stride] - lz;
            pr[j * s.inner_stride] = std::exp(o[j * s.inner_stride]);
        }
    }
    Tape::Node n;
    n.kind = OpKind::log_softmax;
    n.inputs = {x};
    n.axis = axis;
    n.saved = std::move(probs);
    n.value = std::move(out);
    return t.push(std::move(n));
}

NodeId layer_norm(Tape& t, NodeId x, double eps) {
    const Tensor& xv = t.value(x);
    const std::size_t rows = xv.rank() == 2 ? xv.shape[0] : 1;
    const std::size_t w = xv.rank() == 2 ? xv.shape[1] : xv.shape[0];
    if (w == 0) shape_fail(OpKind::layer_norm, "empty rows in " + xv.shape_str());
    Tensor out = Tensor::zeros(xv.shape);
    std::vector<double> inv_std(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        const double* in = xv.data.data() + i * w;
        double* o = out.data.data() + i * w;
        double mean = 0.0;
        for (std::size_t j = 0; j < w; ++j) mean += in[j];
        mean /= static_cast<double>(w);
        double var = 0.0;
        for (std::size_t j = 0; j < w; ++j) var += (in[j] - mean) * (in[j] - mean);
        var /= static_cast<double>(w);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[i] = is;
        for (std::size_t j = 0; j < w; ++j) o[j] = (in[j] - mean) * is;
    }
    Tape::Node n;
    n.kind = OpKind::layer_norm;
    n.inputs = {x};
    n.c0 = eps;
    n.saved = std::move(inv_std);
    n.value = std::move(out);
    return t.push(std::move(n));
}

NodeId embedding_lookup(Tape& t, NodeId table, const std::vector<std::size_t>& indices) {
    const Tensor& tv = t.value(table);
    require_rank2(OpKind::embedding_lookup, tv, "table");
    const std::size_t vocab = tv.shape[0], d = tv.shape[1];
    for (std::size_t ix : indices) {
        if (ix >= vocab) {
            shape_fail(OpKind::embedding_lookup,
                       "index " + std::to_string(ix) + " out of range for table " + tv.shape_str());
        }
    }
    Tensor out = Tensor::zeros({indices.size(), d});
    for (std::size_t i = 0; i < indices.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) out.at(i, j) = tv.at(indices[i], j);
    Tape::Node n;
    n.kind = OpKind::embedding_lookup;
    n.inputs = {table};
    n.idx = indices;
    n.value = std::move(out);
    return t.push(std::move(n));
}

NodeId relu(Tape& t, NodeId x) {
    Tensor out = t.value(x);
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    Tape::Node n;
    n.kind = OpKind::relu;
    n.inputs = {x};
    n.value = std::move(out);
    return t.push(std::move(n));
}

NodeId gelu(Tape& t, NodeId x) {
    Tensor out = t.value(x);
    for (double& v : out.data) v = 0.5 * v * (1.0 + std::erf(v * 0.70710678118654752440));
    Tape::Node n;
    n.kind = OpKind::gelu;
    n.inputs = {x};
    n.value = std::move(out);
    return t.push(std::move(n));
}

NodeId sigmoid(Tape& t, NodeId x) {
    Tensor out = t.value(x);
    for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    Tape::Node n;
    n.kind = OpKind::sigmoid;
    n.inputs = {x};
    n.value = std::move(out);
    return t.push(std::move(n));
}

NodeId log_elem(Tape& t, NodeId x) {
    Tensor out = t.value(x);
    for (double& v : out.data) v = std::log(v);
    Tape::Node n;
    n.kind = OpKind::log_elem;
    n.inputs = {x};
    n.value = std::move(out);
    return t.push(std::move(n));
}

NodeId pick_per_row(Tape& t, NodeId x, const std::vector<std::size_t>& ids) {
    const Tensor& xv = t.value(x);
    require_rank2(OpKind::pick_per_row, xv, "input");
    if (ids.size() != xv.shape[0]) {
        shape_fail(OpKind::pick_per_row,
                   "need one index per row of " + xv.shape_str() + ", got " + std::to_string(ids.size()));
    }
    Tensor out = Tensor::zeros({ids.size()});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= xv.shape[1]) {
            shape_fail(OpKind::pick_per_row, "column " + std::to_string(ids[i]) + " out of range for " + xv.shape_str());
        }
        out.at(i) = xv.at(i, ids[i]);
    }
    Tape::Node n;
    n.kind = OpKind::pick_per_row;
    n.inputs = {x};
    n.idx = ids;
    n.value = std::move(out);
    return t.push(std::move(n));
}

NodeId dropout(Tape& t, NodeId x, double p, bool train, Rng& rng) {
    if (p < 0.0 || p >= 1.0) shape_fail(OpKind::dropout, "p must be in [0,1), got " + std::to_string(p));
    const Tensor& xv = t.value(x);
    std::vector<double> mask(xv.size(), 1.0);
    if (train && p > 0.0) {
        const double keep_scale = 1.0 / (1.0 - p);
        for (double& m : mask) m = rng.uniform() < p ? 0.0 : keep_scale;
    }
    Tensor out = xv;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= mask[i];
    Tape::Node n;
    n.kind = OpKind::dropout;
    n.inputs = {x};
    n.c0 = p;
    n.saved = std::move(mask);
    n.value = std::move(out);
    return t.push(std::move(n));
}

// ---- compositions -----------------------------------------------------------

NodeId linear(Tape& t, NodeId x, NodeId w, NodeId b) {
    NodeId y = matmul(t, x, w);
    if (b != kNoBias) y = add_rowvec(t, y, b);
    return y;
}

NodeId stack_rows(Tape& t, const std::vector<NodeId>& rows) {
    std::vector<NodeId> as_rows;
    as_rows.reserve(rows.size());
    for (NodeId r : rows) {
        const Tensor& v = t.value(r);
        if (v.rank() != 1) shape_fail(OpKind::concat, "stack_rows expects rank-1 inputs, got " + v.shape_str());
        as_rows.push_back(reshape(t, r, {1, v.shape[0]}));
    }
    return concat(t, as_rows, 0);
}

NodeId scaled_dot_product_attention(Tape& t, NodeId q, NodeId k, NodeId v, bool causal) {
    // Copy dims up front: recording ops may reallocate the node store.
    const std::vector<std::size_t> qs = t.value(q).shape, ks = t.value(k).shape, vs = t.value(v).shape;
    if (qs.size() != 2) shape_fail(OpKind::matmul, "attention q must be rank 2");
    if (ks.size() != 2 || ks[1] != qs[1]) {
        shape_fail(OpKind::matmul, "attention q/k width mismatch " + t.value(q).shape_str() + " vs " +
                                       t.value(k).shape_str());
    }
    if (vs.size() != 2 || vs[0] != ks[0]) {
        shape_fail(OpKind::matmul, "attention k/v length mismatch " + t.value(k).shape_str() + " vs " +
                                       t.value(v).shape_str());
    }
    NodeId scores = scale(t, matmul(t, q, transpose(t, k)), 1.0 / std::sqrt(static_cast<double>(qs[1])));
    if (causal) {
        const std::size_t L = qs[0], S = ks[0];
        Tensor mask = Tensor::zeros({L, S});
        for (std::size_t i = 0; i < L; ++i)
            for (std::size_t j = 0; j < S; ++j)
                if (j > i) mask.at(i, j) = -1e9;
        scores = add(t, scores, t.constant(std::move(mask)));
    }
    return matmul(t, softmax(t, scores, 1), v);
}

// ---- backward ---------------------------------------------------------------

void Tape::backward_node(NodeId id) {
    Node& n = nodes_[id];
    const std::vector<double>& g = n.grad;
    switch (n.kind) {
        case OpKind::leaf:
            return;
        case OpKind::reshape: {
            for (std::size_t i = 0; i < g.size(); ++i) accumulate(n.inputs[0], i, g[i]);
            return;
        }
        case OpKind::transpose: {
            const Tensor& out = n.value;  // [k,m], input was [m,k]
            const std::size_t k = out.shape[0], m = out.shape[1];
            for (std::size_t j = 0; j < k; ++j)
                for (std::size_t i = 0; i < m; ++i) accumulate(n.inputs[0], i * k + j, g[j * m + i]);
            return;
        }
        case OpKind::slice_cols: {
            const Tensor& in = nodes_[n.inputs[0]].value;
            const std::size_t c0 = n.idx[0], w = n.idx[1] - n.idx[0];
            for (std::size_t i = 0; i < n.value.shape[0]; ++i)
                for (std::size_t j = 0; j < w; ++j)
                    accumulate(n.inputs[0], i * in.shape[1] + c0 + j, g[i * w + j]);
            return;
        }
        case OpKind::gather_rows: {
            const Tensor& in = nodes_[n.inputs[0]].value;
            const std::size_t w = in.shape[1];
            for (std::size_t i = 0; i < n.idx.size(); ++i)
                for (std::size_t j = 0; j < w; ++j) accumulate(n.inputs[0], n.idx[i] * w + j, g[i * w + j]);
            return;
        }
        case OpKind::concat: {
            if (n.axis == 0 || n.value.rank() == 1) {
                std::size_t off = 0;
                for (NodeId in : n.inputs) {
                    const std::size_t sz = nodes_[in].value.size();
                    for (std::size_t i = 0; i < sz; ++i) accumulate(in, i, g[off + i]);
                    off += sz;
                }
            } else {
                const std::size_t m = n.value.shape[0], w = n.value.shape[1];
                std::size_t off = 0;
                for (NodeId in : n.inputs) {
                    const std::size_t wi = nodes_[in].value.shape[1];
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < wi; ++j) accumulate(in, i * wi + j, g[i * w + off + j]);
                    off += wi;
                }
            }
            return;
        }
        case OpKind::matmul: {
            const Tensor& av = nodes_[n.inputs[0]].value;
            const Tensor& bv = nodes_[n.inputs[1]].value;
            const std::size_t m = av.shape[0], k = av.shape[1], n2 = bv.shape[1];
            // dA = dC Bᵀ ; dB = Aᵀ dC
            Node& na = nodes_[n.inputs[0]];
            if (na.grad.empty()) na.grad.assign(na.value.size(), 0.0);
            Node& nb = nodes_[n.inputs[1]];
            if (nb.grad.empty()) nb.grad.assign(nb.value.size(), 0.0);
            for (std::size_t i = 0; i < m; ++i) {
                const double* grow = g.data() + i * n2;
                for (std::size_t p = 0; p < k; ++p) {
                    const double* brow = bv.data.data() + p * n2;
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n2; ++j) acc += grow[j] * brow[j];
                    na.grad[i * k + p] += acc;
                }
            }
            for (std::size_t i = 0; i < m; ++i) {
                const double* grow = g.data() + i * n2;
                const double* arow = av.data.data() + i * k;
                for (std::size_t p = 0; p < k; ++p) {
                    const double aip = arow[p];
                    if (aip == 0.0) continue;
                    double* brow = nb.grad.data() + p * n2;
                    for (std::size_t j = 0; j < n2; ++j) brow[j] += aip * grow[j];
                }
            }
            return;
        }
        case OpKind::add: {
            for (std::size_t i = 0; i < g.size(); ++i) {
                accumulate(n.inputs[0], i, g[i]);
                accumulate(n.inputs[1], i, g[i]);
            }
            return;
        }
        case OpKind::add_rowvec: {
            const std::size_t m = n.value.shape[0], w = n.value.shape[1];
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < w; ++j) {
                    accumulate(n.inputs[0], i * w + j, g[i * w + j]);
                    accumulate(n.inputs[1], j, g[i * w + j]);
                }
            return;
        }
        case OpKind::mul_rowvec: {
            const Tensor& xv = nodes_[n.inputs[0]].value;
            const Tensor& vv = nodes_[n.inputs[1]].value;
            const std::size_t m = xv.shape[0], w = xv.shape[1];
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < w; ++j) {
                    accumulate(n.inputs[0], i * w + j, g[i * w + j] * vv.at(j));
                    accumulate(n.inputs[1], j, g[i * w + j] * xv.at(i, j));
                }
            return;
        }
        case OpKind::multiply: {
            const Tensor& av = nodes_[n.inputs[0]].value;
            const Tensor& bv = nodes_[n.inputs[1]].value;
            for (std::size_t i = 0; i < g.size(); ++i) {
                accumulate(n.inputs[0], i, g[i] * bv.data[i]);
                accumulate(n.inputs[1], i, g[i] * av.data[i]);
            }
            return;
        }
        case OpKind::scale: {
            for (std::size_t i = 0; i < g.size(); ++i) accumulate(n.inputs[0], i, g[i] * n.c0);
            return;
        }
        case OpKind::mean_axis: {
            const Tensor& in = nodes_[n.inputs[0]].value;
            const Slice s = slices_along(in, n.axis, OpKind::mean_axis);
            const double inv = 1.0 / static_cast<double>(s.len);
            for (std::size_t i = 0; i < s.count; ++i)
                for (std::size_t j = 0; j < s.len; ++j)
                    accumulate(n.inputs[0], i * s.outer_stride + j * s.inner_stride, g[i] * inv);
            return;
        }
        case OpKind::sum_all: {
            const Tensor& in = nodes_[n.inputs[0]].value;
            for (std::size_t i = 0; i < in.size(); ++i) accumulate(n.inputs[0], i, g[0]);
            return;
        }
        case OpKind::softmax: {
            const Tensor& y = n.value;
            const Slice s = slices_along(y, n.axis, OpKind::softmax);
            for (std::size_t i = 0; i < s.count; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < s.len; ++j) {
                    const std::size_t f = i * s.outer_stride + j * s.inner_stride;
                    dot += g[f] * y.data[f];
                }
                for (std::size_t j = 0; j < s.len; ++j) {
                    const std::size_t f = i * s.outer_stride + j * s.inner_stride;
                    accumulate(n.inputs[0], f, y.data[f] * (g[f] - dot));
                }
            }
            return;
        }
        case OpKind::log_softmax: {
            const Slice s = slices_along(n.value, n.axis, OpKind::log_softmax);
            for (std::size_t i = 0; i < s.count; ++i) {
                double gsum = 0.0;
                for (std::size_t j = 0; j < s.len; ++j) gsum += g[i * s.outer_stride + j * s.inner_stride];
                for (std::size_t j = 0; j < s.len; ++j) {
                    const std::size_t f = i * s.outer_stride + j * s.inner_stride;
                    accumulate(n.inputs[0], f, g[f] - n.saved[f] * gsum);
                }
            }
            return;
        }
        case OpKind::layer_norm: {
            const Tensor& y = n.value;
            const std::size_t rows = y.rank() == 2 ? y.shape[0] : 1;
            const std::size_t w = y.rank() == 2 ? y.shape[1] : y.shape[0];
            const double invw = 1.0 / static_cast<double>(w);
            for (std::size_t i = 0; i < rows; ++i) {
                const double* go = g.data() + i * w;
                const double* yo = y.data.data() + i * w;
                double gmean = 0.0, gydot = 0.0;
                for (std::size_t j = 0; j < w; ++j) {
                    gmean += go[j];
                    gydot += go[j] * yo[j];
                }
                gmean *= invw;
                gydot *= invw;
                const double is = n.saved[i];
                for (std::size_t j = 0; j < w; ++j)
                    accumulate(n.inputs[0], i * w + j, is * (go[j] - gmean - yo[j] * gydot));
            }
            return;
        }
        case OpKind::embedding_lookup: {
            const Tensor& table = nodes_[n.inputs[0]].value;
            const std::size_t d = table.shape[1];
            for (std::size_t i = 0; i < n.idx.size(); ++i)
                for (std::size_t j = 0; j < d; ++j) accumulate(n.inputs[0], n.idx[i] * d + j, g[i * d + j]);
            return;
        }
        case OpKind::relu: {
            const Tensor& in = nodes_[n.inputs[0]].value;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (in.data[i] > 0.0) accumulate(n.inputs[0], i, g[i]);
            return;
        }
        case OpKind::gelu: {
            const Tensor& in = nodes_[n.inputs[0]].value;
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double x = in.data[i];
                const double cdf = 0.5 * (1.0 + std::erf(x * 0.70710678118654752440));
                const double pdf = std::exp(-0.5 * x * x) * 0.39894228040143267794;
                accumulate(n.inputs[0], i, g[i] * (cdf + x * pdf));
            }
            return;
        }
        case OpKind::sigmoid: {
            const Tensor& y = n.value;
            for (std::size_t i = 0; i < g.size(); ++i)
                accumulate(n.inputs[0], i, g[i] * y.data[i] * (1.0 - y.data[i]));
            return;
        }
        case OpKind::log_elem: {
            const Tensor& in = nodes_[n.inputs[0]].value;
            for (std::size_t i = 0; i < g.size(); ++i) accumulate(n.inputs[0], i, g[i] / in.data[i]);
            return;
        }
        case OpKind::pick_per_row: {
            const Tensor& in = nodes_[n.inputs[0]].value;
            const std::size_t w = in.shape[1];
            for (std::size_t i = 0; i < n.idx.size(); ++i) accumulate(n.inputs[0], i * w + n.idx[i], g[i]);
            return;
        }
        case OpKind::dropout: {
            for (std::size_t i = 0; i < g.size(); ++i) accumulate(n.inputs[0], i, g[i] * n.saved[i]);
            return;
        }
    }
}

}  // namespace reco::num
