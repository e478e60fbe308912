#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "reco/common/rng.hpp"
#include "reco/numerics/tensor.hpp"

namespace reco::num {

using NodeId = std::size_t;

enum class OpKind {
    leaf,
    reshape,
    transpose,
    slice_cols,
    gather_rows,
    concat,
    matmul,
    add,
    add_rowvec,
    mul_rowvec,
    multiply,
    scale,
    mean_axis,
    sum_all,
    softmax,
    log_softmax,
    layer_norm,
    embedding_lookup,
    relu,
    gelu,
    sigmoid,
    log_elem,
    pick_per_row,
    dropout,
};

const char* op_name(OpKind k);

// Record of one primitive application: inputs, output value and whatever the
// backward rule needs. Values are immutable once recorded; a tape is written
// by a single thread and independent tapes share no state.
class Tape {
public:
    NodeId leaf(Tensor t);
    // Leaf that never receives a gradient (masks, one-hots, constants).
    NodeId constant(Tensor t);

    const Tensor& value(NodeId id) const { return nodes_[id].value; }
    // Gradient of the last backward() target w.r.t. node `id`, as a tensor of
    // the node's shape.
    Tensor grad(NodeId id) const;
    bool has_grad(NodeId id) const { return !nodes_[id].grad.empty(); }

    // Reverse-mode sweep from a scalar loss. A tape can be consumed once.
    void backward(NodeId loss);

    std::size_t node_count() const { return nodes_.size(); }
    bool consumed() const { return consumed_; }

    struct Node {
        OpKind kind{OpKind::leaf};
        std::vector<NodeId> inputs;
        Tensor value;
        std::vector<double> grad;       // same numel as value once backward ran
        std::vector<std::size_t> idx;   // lookup/gather/pick indices, slice bounds
        std::vector<double> saved;      // dropout mask, log_softmax probs, layer_norm inv_std
        double c0 = 0.0;                // scale factor, eps, dropout p
        int axis = -1;
        bool needs_grad = false;        // false only for constants
    };

    NodeId push(Node n);

private:
    void accumulate(NodeId id, std::size_t flat, double g);
    void backward_node(NodeId id);

    std::vector<Node> nodes_;
    bool consumed_ = false;
};

// ---- primitives -----------------------------------------------------------
// Every function validates shapes and throws ShapeError naming the op and the
// offending dimensions. Outputs are recorded on the tape.

NodeId reshape(Tape& t, NodeId x, std::vector<std::size_t> shape);
NodeId transpose(Tape& t, NodeId x);
NodeId slice_cols(Tape& t, NodeId x, std::size_t c0, std::size_t c1);
NodeId gather_rows(Tape& t, NodeId x, std::vector<std::size_t> rows);
NodeId concat(Tape& t, const std::vector<NodeId>& xs, int axis);
NodeId matmul(Tape& t, NodeId a, NodeId b);
NodeId add(Tape& t, NodeId a, NodeId b);
NodeId add_rowvec(Tape& t, NodeId x, NodeId v);
NodeId mul_rowvec(Tape& t, NodeId x, NodeId v);
NodeId multiply(Tape& t, NodeId a, NodeId b);
NodeId scale(Tape& t, NodeId x, double c);
NodeId mean_axis(Tape& t, NodeId x, int axis);
NodeId sum_all(Tape& t, NodeId x);
NodeId softmax(Tape& t, NodeId x, int axis);
NodeId log_softmax(Tape& t, NodeId x, int axis);
NodeId layer_norm(Tape& t, NodeId x, double eps = 1e-5);
NodeId embedding_lookup(Tape& t, NodeId table, const std::vector<std::size_t>& indices);
NodeId relu(Tape& t, NodeId x);
NodeId gelu(Tape& t, NodeId x);
NodeId sigmoid(Tape& t, NodeId x);
NodeId log_elem(Tape& t, NodeId x);
NodeId pick_per_row(Tape& t, NodeId x, const std::vector<std::size_t>& ids);
NodeId dropout(Tape& t, NodeId x, double p, bool train, Rng& rng);

// ---- compositions ----------------------------------------------------------

// y = x W + b. b may be kNoBias.
inline constexpr NodeId kNoBias = static_cast<NodeId>(-1);
NodeId linear(Tape& t, NodeId x, NodeId w, NodeId b = kNoBias);

// Stacks rank-1 vectors of equal length into a matrix, one per row.
NodeId stack_rows(Tape& t, const std::vector<NodeId>& rows);

// softmax(q kᵀ / sqrt(d) + mask) v with optional causal mask (additive -1e9
// above the diagonal). q,k,v are [L,d] / [S,d] / [S,dv].
NodeId scaled_dot_product_attention(Tape& t, NodeId q, NodeId k, NodeId v, bool causal);

}  // namespace reco::num
