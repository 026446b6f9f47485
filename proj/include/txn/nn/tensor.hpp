#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <vector>

namespace txn::nn {

// Dense 64-bit float tensor with a same-shape gradient accumulator.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;
    std::vector<double> g;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);

    std::size_t size() const { return v.size(); }
    int rows() const { return shape.empty() ? 1 : shape[0]; }
    int cols() const { return shape.size() < 2 ? 1 : shape[1]; }
    void zero_grad() { std::fill(g.begin(), g.end(), 0.0); }
};

// Records intermediate tensors and a tape of backward closures for one
// forward pass. Parameter tensors live outside the graph; their gradients
// are accumulated by the tape.
class Graph {
public:
    Tensor* make(std::vector<int> shape);
    void record(std::function<void()> backward_op) { tape_.push_back(std::move(backward_op)); }

    // Seeds loss->g with 1 and runs the tape in reverse.
    void backward(Tensor* loss);
    void reset();

    std::size_t num_ops() const { return tape_.size(); }

private:
    std::deque<Tensor> arena_;
    std::vector<std::function<void()>> tape_;
};

// ---- differentiable ops --------------------------------------------------
// All ops allocate their output in the graph and append a backward closure.
// Shapes are (rows, cols) row-major; vectors are (n).

Tensor* constant(Graph& g, std::vector<int> shape, const std::vector<double>& values);

// table (V,d), idx (n) -> (n,d); backward scatter-adds into table->g
Tensor* gather_rows(Graph& g, Tensor* table, const std::vector<int>& idx);

// horizontal concat of (n,ci) blocks -> (n, sum ci)
Tensor* concat_cols(Graph& g, const std::vector<Tensor*>& parts);

// vector concat (a)+(b) -> (a+b)
Tensor* concat_vec(Graph& g, Tensor* a, Tensor* b);

// (len) slice of a vector
Tensor* slice_vec(Graph& g, Tensor* x, int start, int len);

// row t of (N,C) as a (C) vector
Tensor* row_vec(Graph& g, Tensor* x, int t);

Tensor* add(Graph& g, Tensor* a, Tensor* b);      // elementwise, same shape
Tensor* mul(Graph& g, Tensor* a, Tensor* b);      // elementwise, same shape
Tensor* relu(Graph& g, Tensor* x);
Tensor* sigmoid(Graph& g, Tensor* x);
Tensor* tanh_op(Graph& g, Tensor* x);
Tensor* scalar_mul(Graph& g, Tensor* x, double c);

// W (m,n) @ x (n) + b (m) -> (m); b may be null
Tensor* linear(Graph& g, Tensor* W, Tensor* x, Tensor* b);

// X (N,Cin), W (Cout,K,Cin), b (Cout) -> (N,Cout); zero padding, stride 1
Tensor* conv1d_same(Graph& g, Tensor* X, Tensor* W, Tensor* b, int kernel);

// (N,C) -> (ceil(N/width), C), max over each window
Tensor* maxpool1d(Graph& g, Tensor* X, int width);

// (N,C) -> (C), mean over rows
Tensor* mean_rows(Graph& g, Tensor* X);

// logits (k), class label -> scalar -log softmax(logits)[label]
Tensor* softmax_cross_entropy(Graph& g, Tensor* logits, int label);

// pred (1), target -> scalar (pred-target)^2
Tensor* mse_loss(Graph& g, Tensor* pred, double target);

// max(0, ||a-p||^2 - ||a-n||^2 + margin)
Tensor* triplet_loss(Graph& g, Tensor* anchor, Tensor* positive, Tensor* negative, double margin);

// mean of scalar tensors -> scalar
Tensor* mean_scalars(Graph& g, const std::vector<Tensor*>& xs);

// forward-only softmax over a plain vector
std::vector<double> softmax(const std::vector<double>& logits);

} // namespace txn::nn
