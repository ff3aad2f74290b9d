#pragma once

// Define-then-run reverse-mode differentiation over 2-D tensors.
//
// A Graph is built once (inputs, parameters, constants, ops), then evaluated
// any number of times with forward() and differentiated with backward().
// Nodes are stored in construction order, which is a topological order, so
// forward walks the node list front to back and backward walks it in reverse,
// visiting each ancestor of the seed exactly once.

#include "tsrisk/tensor.hpp"

#include <compare>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tsrisk::ad {

struct NodeId {
    std::uint32_t index = std::numeric_limits<std::uint32_t>::max();

    bool valid() const { return index != std::numeric_limits<std::uint32_t>::max(); }
    auto operator<=>(const NodeId&) const = default;
};

enum class Op : std::uint8_t {
    input,
    parameter,
    constant,
    matmul,
    matmul_nt,
    linear,
    add,
    sub,
    mul,
    add_row_bias,
    scale,
    tanh,
    sigmoid,
    relu,
    masked_softmax,
    concat_cols,
    conv1d,
    conv1d_transpose,
    mean_rows,
    sum,
    mean,
    reshape,
    layer_norm,
    mse,
    bce_with_logits,
};

const char* op_name(Op op);

enum class Init : std::uint8_t { glorot_uniform, zeros, ones };

struct ParameterInfo {
    std::string name;
    Shape shape;
    Init init = Init::glorot_uniform;
    std::size_t fan_in = 0;
    std::size_t fan_out = 0;
    NodeId node;
};

class Graph {
public:
    NodeId input(std::string name, std::size_t rows, std::size_t cols);
    // fan_in/fan_out default to rows/cols when zero.
    NodeId parameter(std::string name, std::size_t rows, std::size_t cols, Init init = Init::glorot_uniform,
                     std::size_t fan_in = 0, std::size_t fan_out = 0);
    NodeId constant(Tensor value);

    NodeId matmul(NodeId a, NodeId b);
    // a * b^T
    NodeId matmul_nt(NodeId a, NodeId b);
    // x * w + bias, bias broadcast over rows
    NodeId linear(NodeId x, NodeId weight, NodeId bias);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId add_row_bias(NodeId a, NodeId bias);
    NodeId scale(NodeId a, double factor);
    NodeId tanh(NodeId a);
    NodeId sigmoid(NodeId a);
    NodeId relu(NodeId a);
    // Row-wise softmax(factor * scores + additive_mask). The mask is a fixed
    // tensor of the same shape holding 0 for open and a large negative value
    // for blocked entries.
    NodeId masked_softmax(NodeId scores, Tensor additive_mask, double factor = 1.0);
    NodeId concat_cols(std::span<const NodeId> parts);
    // Stride-1 'same' convolution over rows (time). x is T x Cin, weight is
    // (kernel*Cin) x Cout with row index k*Cin + c, bias is 1 x Cout.
    NodeId conv1d(NodeId x, NodeId weight, NodeId bias, std::size_t kernel);
    NodeId conv1d_transpose(NodeId x, NodeId weight, NodeId bias, std::size_t kernel);
    // Column means, n x m -> 1 x m.
    NodeId mean_rows(NodeId a);
    NodeId sum(NodeId a);
    NodeId mean(NodeId a);
    NodeId reshape(NodeId a, std::size_t rows, std::size_t cols);
    NodeId layer_norm(NodeId x, NodeId gamma, NodeId beta, double eps = 1e-5);
    // mean((a - b)^2) as a 1 x 1 node
    NodeId mse(NodeId a, NodeId b);
    NodeId bce_with_logits(NodeId logits, NodeId targets);

    void set_input(std::string_view name, const Tensor& value);
    void set_parameter(std::string_view name, const Tensor& value);

    void forward();
    void forward(const std::map<std::string, Tensor>& inputs);

    // Seeds the output gradient with ones.
    void backward(NodeId output);
    void backward(NodeId output, const Tensor& seed);

    const Tensor& value(NodeId id) const;
    const Tensor& grad(NodeId id) const;
    // Writable access to a leaf (parameter, constant or input); invalidates
    // the last forward pass.
    Tensor& leaf_value(NodeId id);

    const Shape& shape(NodeId id) const;
    Op op(NodeId id) const;
    std::string_view name(NodeId id) const;
    NodeId find(std::string_view name) const;

    const std::vector<ParameterInfo>& parameters() const { return parameters_; }
    std::size_t node_count() const { return nodes_.size(); }
    bool evaluated() const { return evaluated_; }

private:
    struct Node {
        Op op = Op::constant;
        std::string name;
        std::vector<NodeId> parents;
        Tensor value;
        Tensor grad;
        Tensor aux;
        Tensor aux2;
        double factor = 1.0;
        std::size_t kernel = 0;
        bool bound = false;
    };

    NodeId push(Node node);
    Node& at(NodeId id);
    const Node& at(NodeId id) const;
    NodeId unary(Op op, NodeId a);
    NodeId binary_same_shape(Op op, NodeId a, NodeId b);
    NodeId conv(Op op, NodeId x, NodeId weight, NodeId bias, std::size_t kernel);
    NodeId leaf(Op op, std::string name, Tensor value);

    void evaluate(Node& node);
    void propagate(Node& node);

    std::vector<Node> nodes_;
    std::vector<ParameterInfo> parameters_;
    std::unordered_map<std::string, NodeId> names_;
    std::vector<std::uint8_t> reach_;
    bool evaluated_ = false;
};

/// Central-difference estimate (f(p+eps) - f(p-eps)) / (2 eps) of d output /
/// d param for every entry of `param`. `output` must be 1 x 1. Leaves the
/// graph evaluated at the original parameter values.
Tensor finite_difference_gradient(Graph& graph, NodeId output, NodeId param, double eps);

} // namespace tsrisk::ad
