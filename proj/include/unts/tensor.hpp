#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "unts/error.hpp"
#include "unts/rng.hpp"

namespace unts {

// Dense row-major tensor of doubles. Rank 0 (scalar), 1 and 2 are the only
// ranks the operator set produces; conv filter banks use rank 3.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> values;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, double fill = 0.0);

    static Tensor scalar(double x);
    static Tensor vec(std::vector<double> v);
    static Tensor mat(int rows, int cols, std::vector<double> v);
    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor randn(std::vector<int> s, Rng& rng, double stddev);

    int numel() const { return static_cast<int>(values.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    double& at(int i) { return values[static_cast<std::size_t>(i)]; }
    double at(int i) const { return values[static_cast<std::size_t>(i)]; }
    double& at(int r, int c) { return values[static_cast<std::size_t>(r) * shape[1] + c]; }
    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * shape[1] + c]; }
};

class Node;
using Value = std::shared_ptr<Node>;

// One node of the computation graph. Leaves (parameters, inputs, constants)
// have no forward/backward functions; interior nodes recompute their value
// from their inputs and scatter gradient back to them.
class Node {
public:
    Tensor val;
    std::vector<double> grad; // allocated on demand, same numel as val
    bool requires_grad = false;
    const char* op = "leaf";
    std::string name;
    std::vector<Value> inputs;
    std::function<void()> forward_fn;
    std::function<void()> backward_fn;
    std::vector<int> iaux;      // op scratch: argmax rows, gathered ids, ...
    bool reached = false;       // backward-pass reachability mark

    void ensure_grad() {
        if (grad.size() != val.values.size()) grad.assign(val.values.size(), 0.0);
    }
    void zero_grad() {
        if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
    }
    bool has_grad() const { return !grad.empty(); }
};

// Persistent trainable leaf, lives outside any graph.
Value make_parameter(Tensor t, std::string name, bool requires_grad = true);

// Records operation nodes in creation order (a topological order by
// construction). Values are computed eagerly as nodes are built; forward()
// recomputes the whole tape, which is what the finite-difference checks
// perturb against. backward() sweeps the tape in reverse and accumulates
// into every reachable requires_grad leaf.
class Graph {
public:
    Value leaf(Tensor t, std::string name = "");
    Value constant(Tensor t) { return leaf(std::move(t)); }
    Value scalar(double x) { return leaf(Tensor::scalar(x)); }
    // Value copy of v with the gradient path cut.
    Value detach(const Value& v);

    Value add(const Value& a, const Value& b);
    Value sub(const Value& a, const Value& b);
    Value mul(const Value& a, const Value& b);
    // mul_c * x + add_c, elementwise with scalar constants
    Value affine(const Value& x, double mul_c, double add_c);
    Value matmul(const Value& a, const Value& b);    // [m,k]x[k,n] -> [m,n]
    Value matvec(const Value& a, const Value& x);    // [m,k]x[k]   -> [m]
    Value vecmat(const Value& x, const Value& a);    // [m]x[m,k]   -> [k]
    Value sigmoid(const Value& x);
    Value tanh(const Value& x);
    Value log(const Value& x);
    Value clamp_min(const Value& x, double lo);
    // axis -1 means the last axis; defined for rank 1 and 2
    Value softmax(const Value& x, int axis = -1);
    Value concat(const std::vector<Value>& xs);      // rank-1 inputs
    Value stack_rows(const std::vector<Value>& xs);  // n rank-1 [k] -> [n,k]
    Value slice(const Value& x, int start, int len); // rank-1
    Value pick(const Value& x, int index) { return slice(x, index, 1); }
    // Row lookup by token id. backprop=false treats the table as constant
    // regardless of its requires_grad flag (static embedding path).
    Value gather_row(const Value& table, int id, bool backprop = true);
    Value gather_rows(const Value& table, const std::vector<int>& ids, bool backprop = true);
    // x [m,k], w [f,s,k], b [f] -> [m-s+1, f], valid convolution over axis 0
    Value conv1d(const Value& x, const Value& w, const Value& b);
    Value maxpool_time(const Value& x); // [m,f] -> [f]
    Value mean(const Value& x);
    Value sum(const Value& x);

    // Recomputes every tape node in order and returns the root's value.
    const Tensor& forward(const Value& root);
    // Root must be scalar. Accumulates additively into leaf grads.
    void backward(const Value& root);

    std::size_t size() const { return tape_.size(); }

private:
    Value push(const char* op, Tensor val, std::vector<Value> inputs);
    std::vector<Value> tape_;
};

// Average of scalar values; empty input is a contract violation.
Value average(Graph& g, const std::vector<Value>& scalars);

} // namespace unts
