#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ablab/params.hpp"
#include "ablab/tensor.hpp"

namespace ablab {

class Tape;

// Handle to a value recorded on a Tape.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape& tape() const { return *tape_; }
    std::size_t id() const { return id_; }
    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

// Reverse-mode recorder. Every op appends a node holding its value and a
// closure that pushes the node's gradient into its inputs. Nodes that do not
// depend on a gradient-requiring leaf carry no closure and are skipped.
class Tape {
public:
    using Backward = std::function<void(Tape&, std::size_t)>;

    Tape() = default;
    // Trainable parameters become gradient-requiring leaves.
    explicit Tape(ParamSet& params) : source_(&params), sink_(&params) {}
    // Read-only binding: every parameter leaf is a constant.
    explicit Tape(const ParamSet& params) : source_(&params) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    Var leaf(Tensor value, bool requires_grad = true);
    // Parameter leaf; requires a gradient only when the name is trainable.
    // Repeated calls with the same name return the same node.
    Var param(const std::string& name);

    Var record(Tensor value, bool requires_grad, Backward backward);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
    // Gradient accumulated at a node by the last backward(); zeros if untouched.
    Tensor grad(Var v) const;

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. Gradients of
    // trainable parameter leaves are added into the bound ParamSet.
    void backward(Var loss);

    // Used by op closures.
    Tensor& grad_buffer(std::size_t id);
    const Tensor& node_grad(std::size_t id) const { return nodes_[id].grad; }
    bool wants_grad(std::size_t id) const { return nodes_[id].requires_grad; }

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        bool has_grad = false;
        Backward backward;
        const std::string* param_name = nullptr;
    };

    std::vector<Node> nodes_;
    const ParamSet* source_ = nullptr;
    ParamSet* sink_ = nullptr;
    std::unordered_map<std::string, std::size_t> param_nodes_;
};

// y = x·W + b for x[n×i], W[i×o], b[o].
Var affine(Var x, Var w, Var b);
// a[n×k]·b[k×m]
Var matmul(Var a, Var b);
// a[n×k]·bᵀ for b[m×k]
Var matmul_nt(Var a, Var b);
Var tanh(Var x);
// Softmax over the last axis (each row of a matrix, or the whole vector).
Var softmax(Var x);
Var concat_cols(Var a, Var b);
// Rows `ids` of table[V×e], stacked as [L×e].
Var gather_rows(Var table, std::span<const std::size_t> ids);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double c);
// Σ a², as a [1] tensor.
Var sum_squares(Var a);
// (1/n) Σ_i w_i · (1/d) Σ_j (pred_ij − target_ij)², as a [1] tensor.
Var weighted_mse(Var pred, Var target, std::span<const double> row_weights);
// Same value, no gradient flows back through it.
Var stop_gradient(Var a);

}  // namespace ablab
