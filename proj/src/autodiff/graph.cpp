#include "tsrisk/graph.hpp"

#include "tsrisk/errors.hpp"

#include <algorithm>
#include <cmath>

namespace tsrisk::ad {

namespace {

std::string dims(const Shape& s)
{
    return shape_string(s);
}

[[noreturn]] void shape_fail(Op op, const std::string& detail)
{
    throw ShapeError(std::string(op_name(op)) + ": " + detail);
}

void require_matrix(Op op, const Tensor& t)
{
    if (t.rank() != 2) {
        shape_fail(op, "expected a 2-D tensor, got " + dims(t.shape()));
    }
}

double sigmoid_of(double z)
{
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// c[n x m] (+)= a[n x k] * b[k x m]
void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m)
{
    for (std::size_t i = 0; i < n; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * m;
        std::size_t j = 0;
        for (; j + 4 <= m; j += 4) {
            double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                const double av = ai[p];
                const double* bp = b + p * m + j;
                acc0 += av * bp[0];
                acc1 += av * bp[1];
                acc2 += av * bp[2];
                acc3 += av * bp[3];
            }
            ci[j] += acc0;
            ci[j + 1] += acc1;
            ci[j + 2] += acc2;
            ci[j + 3] += acc3;
        }
        for (; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                acc += ai[p] * b[p * m + j];
            }
            ci[j] += acc;
        }
    }
}

// c[n x m] (+)= a[n x k] * b[m x k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m)
{
    for (std::size_t i = 0; i < n; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * m;
        std::size_t j = 0;
        for (; j + 4 <= m; j += 4) {
            const double* b0 = b + j * k;
            const double* b1 = b0 + k;
            const double* b2 = b1 + k;
            const double* b3 = b2 + k;
            double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                const double av = ai[p];
                acc0 += av * b0[p];
                acc1 += av * b1[p];
                acc2 += av * b2[p];
                acc3 += av * b3[p];
            }
            ci[j] += acc0;
            ci[j + 1] += acc1;
            ci[j + 2] += acc2;
            ci[j + 3] += acc3;
        }
        for (; j < m; ++j) {
            const double* bj = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                acc += ai[p] * bj[p];
            }
            ci[j] += acc;
        }
    }
}

// c[k x m] (+)= a[n x k]^T * b[n x m]
void gemm_tn(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m)
{
    for (std::size_t p = 0; p < k; ++p) {
        double* cp = c + p * m;
        std::size_t j = 0;
        for (; j + 4 <= m; j += 4) {
            double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double av = a[i * k + p];
                const double* bi = b + i * m + j;
                acc0 += av * bi[0];
                acc1 += av * bi[1];
                acc2 += av * bi[2];
                acc3 += av * bi[3];
            }
            cp[j] += acc0;
            cp[j + 1] += acc1;
            cp[j + 2] += acc2;
            cp[j + 3] += acc3;
        }
        for (; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += a[i * k + p] * b[i * m + j];
            }
            cp[j] += acc;
        }
    }
}

void check_finite(const Tensor& t, Op op, std::uint32_t index)
{
    for (double v : t.values()) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string("non-finite value produced by ") + op_name(op) + " (node " +
                               std::to_string(index) + ")");
        }
    }
}

} // namespace

const char* op_name(Op op)
{
    switch (op) {
    case Op::input: return "input";
    case Op::parameter: return "parameter";
    case Op::constant: return "constant";
    case Op::matmul: return "matmul";
    case Op::matmul_nt: return "matmul_nt";
    case Op::linear: return "linear";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::add_row_bias: return "add_row_bias";
    case Op::scale: return "scale";
    case Op::tanh: return "tanh";
    case Op::sigmoid: return "sigmoid";
    case Op::relu: return "relu";
    case Op::masked_softmax: return "masked_softmax";
    case Op::concat_cols: return "concat_cols";
    case Op::conv1d: return "conv1d";
    case Op::conv1d_transpose: return "conv1d_transpose";
    case Op::mean_rows: return "mean_rows";
    case Op::sum: return "sum";
    case Op::mean: return "mean";
    case Op::reshape: return "reshape";
    case Op::layer_norm: return "layer_norm";
    case Op::mse: return "mse";
    case Op::bce_with_logits: return "bce_with_logits";
    }
    return "unknown";
}

NodeId Graph::push(Node node)
{
    node.grad = Tensor(node.value.shape());
    nodes_.push_back(std::move(node));
    evaluated_ = false;
    return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Graph::Node& Graph::at(NodeId id)
{
    if (!id.valid() || id.index >= nodes_.size()) {
        throw UsageError("graph: invalid node id");
    }
    return nodes_[id.index];
}

const Graph::Node& Graph::at(NodeId id) const
{
    if (!id.valid() || id.index >= nodes_.size()) {
        throw UsageError("graph: invalid node id");
    }
    return nodes_[id.index];
}

NodeId Graph::leaf(Op op, std::string name, Tensor value)
{
    if (!name.empty() && names_.contains(name)) {
        throw UsageError("graph: duplicate name '" + name + "'");
    }
    Node node;
    node.op = op;
    node.name = name;
    node.value = std::move(value);
    node.bound = op != Op::input;
    const NodeId id = push(std::move(node));
    if (!name.empty()) {
        names_.emplace(std::move(name), id);
    }
    return id;
}

NodeId Graph::input(std::string name, std::size_t rows, std::size_t cols)
{
    if (name.empty()) {
        throw UsageError("graph: inputs must be named");
    }
    return leaf(Op::input, std::move(name), Tensor({rows, cols}));
}

NodeId Graph::parameter(std::string name, std::size_t rows, std::size_t cols, Init init, std::size_t fan_in,
                        std::size_t fan_out)
{
    if (name.empty()) {
        throw UsageError("graph: parameters must be named");
    }
    ParameterInfo info{name, {rows, cols}, init, fan_in ? fan_in : rows, fan_out ? fan_out : cols, {}};
    info.node = leaf(Op::parameter, std::move(name), Tensor({rows, cols}));
    parameters_.push_back(std::move(info));
    return parameters_.back().node;
}

NodeId Graph::constant(Tensor value)
{
    require_matrix(Op::constant, value);
    return leaf(Op::constant, {}, std::move(value));
}

NodeId Graph::matmul(NodeId a, NodeId b)
{
    const Shape& sa = shape(a);
    const Shape& sb = shape(b);
    if (sa[1] != sb[0]) {
        shape_fail(Op::matmul, dims(sa) + " * " + dims(sb));
    }
    Node node;
    node.op = Op::matmul;
    node.parents = {a, b};
    node.value = Tensor({sa[0], sb[1]});
    return push(std::move(node));
}

NodeId Graph::matmul_nt(NodeId a, NodeId b)
{
    const Shape& sa = shape(a);
    const Shape& sb = shape(b);
    if (sa[1] != sb[1]) {
        shape_fail(Op::matmul_nt, dims(sa) + " * " + dims(sb) + "^T");
    }
    Node node;
    node.op = Op::matmul_nt;
    node.parents = {a, b};
    node.value = Tensor({sa[0], sb[0]});
    return push(std::move(node));
}

NodeId Graph::linear(NodeId x, NodeId weight, NodeId bias)
{
    const Shape& sx = shape(x);
    const Shape& sw = shape(weight);
    const Shape& sb = shape(bias);
    if (sx[1] != sw[0] || sb[0] != 1 || sb[1] != sw[1]) {
        shape_fail(Op::linear, dims(sx) + " * " + dims(sw) + " + " + dims(sb));
    }
    Node node;
    node.op = Op::linear;
    node.parents = {x, weight, bias};
    node.value = Tensor({sx[0], sw[1]});
    return push(std::move(node));
}

NodeId Graph::binary_same_shape(Op op, NodeId a, NodeId b)
{
    if (shape(a) != shape(b)) {
        shape_fail(op, dims(shape(a)) + " vs " + dims(shape(b)));
    }
    Node node;
    node.op = op;
    node.parents = {a, b};
    node.value = Tensor(shape(a));
    return push(std::move(node));
}

NodeId Graph::add(NodeId a, NodeId b)
{
    return binary_same_shape(Op::add, a, b);
}

NodeId Graph::sub(NodeId a, NodeId b)
{
    return binary_same_shape(Op::sub, a, b);
}

NodeId Graph::mul(NodeId a, NodeId b)
{
    return binary_same_shape(Op::mul, a, b);
}

NodeId Graph::add_row_bias(NodeId a, NodeId bias)
{
    const Shape& sa = shape(a);
    const Shape& sb = shape(bias);
    if (sb[0] != 1 || sb[1] != sa[1]) {
        shape_fail(Op::add_row_bias, dims(sa) + " + " + dims(sb));
    }
    Node node;
    node.op = Op::add_row_bias;
    node.parents = {a, bias};
    node.value = Tensor(sa);
    return push(std::move(node));
}

NodeId Graph::scale(NodeId a, double factor)
{
    const NodeId id = unary(Op::scale, a);
    nodes_[id.index].factor = factor;
    return id;
}

NodeId Graph::unary(Op op, NodeId a)
{
    Node node;
    node.op = op;
    node.parents = {a};
    node.value = Tensor(shape(a));
    return push(std::move(node));
}

NodeId Graph::tanh(NodeId a)
{
    return unary(Op::tanh, a);
}

NodeId Graph::sigmoid(NodeId a)
{
    return unary(Op::sigmoid, a);
}

NodeId Graph::relu(NodeId a)
{
    return unary(Op::relu, a);
}

NodeId Graph::masked_softmax(NodeId scores, Tensor additive_mask, double factor)
{
    if (additive_mask.shape() != shape(scores)) {
        shape_fail(Op::masked_softmax, "mask " + dims(additive_mask.shape()) + " vs scores " + dims(shape(scores)));
    }
    const NodeId id = unary(Op::masked_softmax, scores);
    nodes_[id.index].aux = std::move(additive_mask);
    nodes_[id.index].factor = factor;
    return id;
}

NodeId Graph::concat_cols(std::span<const NodeId> parts)
{
    if (parts.empty()) {
        shape_fail(Op::concat_cols, "no inputs");
    }
    const std::size_t rows = shape(parts[0])[0];
    std::size_t cols = 0;
    for (NodeId p : parts) {
        if (shape(p)[0] != rows) {
            shape_fail(Op::concat_cols, "row count " + std::to_string(shape(p)[0]) + " vs " + std::to_string(rows));
        }
        cols += shape(p)[1];
    }
    Node node;
    node.op = Op::concat_cols;
    node.parents.assign(parts.begin(), parts.end());
    node.value = Tensor({rows, cols});
    return push(std::move(node));
}

NodeId Graph::conv(Op op, NodeId x, NodeId weight, NodeId bias, std::size_t kernel)
{
    const Shape& sx = shape(x);
    const Shape& sw = shape(weight);
    const Shape& sb = shape(bias);
    if (kernel == 0 || kernel % 2 == 0) {
        shape_fail(op, "kernel size must be odd, got " + std::to_string(kernel));
    }
    if (sw[0] != kernel * sx[1] || sb[0] != 1 || sb[1] != sw[1]) {
        shape_fail(op, "x " + dims(sx) + ", weight " + dims(sw) + ", bias " + dims(sb) + ", kernel " +
                           std::to_string(kernel));
    }
    Node node;
    node.op = op;
    node.parents = {x, weight, bias};
    node.kernel = kernel;
    node.value = Tensor({sx[0], sw[1]});
    return push(std::move(node));
}

NodeId Graph::conv1d(NodeId x, NodeId weight, NodeId bias, std::size_t kernel)
{
    return conv(Op::conv1d, x, weight, bias, kernel);
}

NodeId Graph::conv1d_transpose(NodeId x, NodeId weight, NodeId bias, std::size_t kernel)
{
    return conv(Op::conv1d_transpose, x, weight, bias, kernel);
}

NodeId Graph::mean_rows(NodeId a)
{
    Node node;
    node.op = Op::mean_rows;
    node.parents = {a};
    node.value = Tensor({1, shape(a)[1]});
    return push(std::move(node));
}

NodeId Graph::sum(NodeId a)
{
    Node node;
    node.op = Op::sum;
    node.parents = {a};
    node.value = Tensor({1, 1});
    return push(std::move(node));
}

NodeId Graph::mean(NodeId a)
{
    Node node;
    node.op = Op::mean;
    node.parents = {a};
    node.value = Tensor({1, 1});
    return push(std::move(node));
}

NodeId Graph::reshape(NodeId a, std::size_t rows, std::size_t cols)
{
    if (rows * cols != shape_size(shape(a))) {
        shape_fail(Op::reshape, dims(shape(a)) + " -> [" + std::to_string(rows) + "x" + std::to_string(cols) + "]");
    }
    Node node;
    node.op = Op::reshape;
    node.parents = {a};
    node.value = Tensor({rows, cols});
    return push(std::move(node));
}

NodeId Graph::layer_norm(NodeId x, NodeId gamma, NodeId beta, double eps)
{
    const Shape& sx = shape(x);
    const Shape want{1, sx[1]};
    if (shape(gamma) != want || shape(beta) != want) {
        shape_fail(Op::layer_norm, "x " + dims(sx) + ", gamma " + dims(shape(gamma)) + ", beta " + dims(shape(beta)));
    }
    Node node;
    node.op = Op::layer_norm;
    node.parents = {x, gamma, beta};
    node.factor = eps;
    node.value = Tensor(sx);
    node.aux = Tensor(sx);
    node.aux2 = Tensor({sx[0], 1});
    return push(std::move(node));
}

NodeId Graph::mse(NodeId a, NodeId b)
{
    if (shape(a) != shape(b)) {
        shape_fail(Op::mse, dims(shape(a)) + " vs " + dims(shape(b)));
    }
    Node node;
    node.op = Op::mse;
    node.parents = {a, b};
    node.value = Tensor({1, 1});
    return push(std::move(node));
}

NodeId Graph::bce_with_logits(NodeId logits, NodeId targets)
{
    if (shape(logits) != shape(targets)) {
        shape_fail(Op::bce_with_logits, dims(shape(logits)) + " vs " + dims(shape(targets)));
    }
    Node node;
    node.op = Op::bce_with_logits;
    node.parents = {logits, targets};
    node.value = Tensor({1, 1});
    return push(std::move(node));
}

void Graph::set_input(std::string_view name, const Tensor& value)
{
    const NodeId id = find(name);
    if (!id.valid() || nodes_[id.index].op != Op::input) {
        throw UsageError("graph: no input named '" + std::string(name) + "'");
    }
    Node& node = nodes_[id.index];
    if (shape_size(value.shape()) != node.value.size() || value.rows() != node.value.rows()) {
        throw ShapeError("input '" + node.name + "': expected " + dims(node.value.shape()) + ", got " +
                         dims(value.shape()));
    }
    std::copy(value.values().begin(), value.values().end(), node.value.values().begin());
    node.bound = true;
    evaluated_ = false;
}

void Graph::set_parameter(std::string_view name, const Tensor& value)
{
    const NodeId id = find(name);
    if (!id.valid() || nodes_[id.index].op != Op::parameter) {
        throw UsageError("graph: no parameter named '" + std::string(name) + "'");
    }
    Node& node = nodes_[id.index];
    if (value.shape() != node.value.shape()) {
        throw ShapeError("parameter '" + node.name + "': expected " + dims(node.value.shape()) + ", got " +
                         dims(value.shape()));
    }
    std::copy(value.values().begin(), value.values().end(), node.value.values().begin());
    evaluated_ = false;
}

const Tensor& Graph::value(NodeId id) const
{
    return at(id).value;
}

const Tensor& Graph::grad(NodeId id) const
{
    return at(id).grad;
}

Tensor& Graph::leaf_value(NodeId id)
{
    Node& node = at(id);
    if (node.op != Op::parameter && node.op != Op::constant && node.op != Op::input) {
        throw UsageError(std::string("graph: leaf_value on ") + op_name(node.op) + " node");
    }
    evaluated_ = false;
    if (node.op == Op::input) {
        node.bound = true;
    }
    return node.value;
}

const Shape& Graph::shape(NodeId id) const
{
    return at(id).value.shape();
}

Op Graph::op(NodeId id) const
{
    return at(id).op;
}

std::string_view Graph::name(NodeId id) const
{
    return at(id).name;
}

NodeId Graph::find(std::string_view name) const
{
    const auto it = names_.find(std::string(name));
    return it == names_.end() ? NodeId{} : it->second;
}

void Graph::forward(const std::map<std::string, Tensor>& inputs)
{
    for (const auto& [name, value] : inputs) {
        set_input(name, value);
    }
    forward();
}

void Graph::forward()
{
    for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
        Node& node = nodes_[i];
        if (node.op == Op::input && !node.bound) {
            throw UsageError("graph: input '" + node.name + "' is not bound");
        }
        evaluate(node);
        if (node.op > Op::constant) {
            check_finite(node.value, node.op, i);
        }
    }
    evaluated_ = true;
}

void Graph::evaluate(Node& node)
{
    auto in = [&](std::size_t k) -> const Tensor& { return nodes_[node.parents[k].index].value; };
    Tensor& out = node.value;
    double* y = out.values().data();
    const std::size_t count = out.size();

    switch (node.op) {
    case Op::input:
    case Op::parameter:
    case Op::constant:
        return;
    case Op::matmul: {
        const Tensor& a = in(0);
        out.fill(0.0);
        gemm_nn(a.values().data(), in(1).values().data(), y, a.rows(), a.cols(), out.cols());
        return;
    }
    case Op::matmul_nt: {
        const Tensor& a = in(0);
        out.fill(0.0);
        gemm_nt(a.values().data(), in(1).values().data(), y, a.rows(), a.cols(), out.cols());
        return;
    }
    case Op::linear: {
        const Tensor& x = in(0);
        const double* b = in(2).values().data();
        const std::size_t m = out.cols();
        for (std::size_t i = 0; i < out.rows(); ++i) {
            std::copy_n(b, m, y + i * m);
        }
        gemm_nn(x.values().data(), in(1).values().data(), y, x.rows(), x.cols(), m);
        return;
    }
    case Op::add: {
        const double* a = in(0).values().data();
        const double* b = in(1).values().data();
        for (std::size_t i = 0; i < count; ++i) {
            y[i] = a[i] + b[i];
        }
        return;
    }
    case Op::sub: {
        const double* a = in(0).values().data();
        const double* b = in(1).values().data();
        for (std::size_t i = 0; i < count; ++i) {
            y[i] = a[i] - b[i];
        }
        return;
    }
    case Op::mul: {
        const double* a = in(0).values().data();
        const double* b = in(1).values().data();
        for (std::size_t i = 0; i < count; ++i) {
            y[i] = a[i] * b[i];
        }
        return;
    }
    case Op::add_row_bias: {
        const double* a = in(0).values().data();
        const double* b = in(1).values().data();
        const std::size_t m = out.cols();
        for (std::size_t i = 0; i < count; ++i) {
            y[i] = a[i] + b[i % m];
        }
        return;
    }
    case Op::scale: {
        const double* a = in(0).values().data();
        for (std::size_t i = 0; i < count; ++i) {
            y[i] = node.factor * a[i];
        }
        return;
    }
    case Op::tanh: {
        const double* a = in(0).values().data();
        for (std::size_t i = 0; i < count; ++i) {
            y[i] = std::tanh(a[i]);
        }
        return;
    }
    case Op::sigmoid: {
        const double* a = in(0).values().data();
        for (std::size_t i = 0; i < count; ++i) {
            y[i] = sigmoid_of(a[i]);
        }
        return;
    }
    case Op::relu: {
        const double* a = in(0).values().data();
        for (std::size_t i = 0; i < count; ++i) {
            y[i] = a[i] > 0.0 ? a[i] : 0.0;
        }
        return;
    }
    case Op::masked_softmax: {
        const double* s = in(0).values().data();
        const double* mask = node.aux.values().data();
        const std::size_t m = out.cols();
        for (std::size_t r = 0; r < out.rows(); ++r) {
            const std::size_t base = r * m;
            double top = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < m; ++j) {
                y[base + j] = node.factor * s[base + j] + mask[base + j];
                top = std::max(top, y[base + j]);
            }
            double total = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                // exp underflows to exactly 0 well before -746
                const double d = y[base + j] - top;
                y[base + j] = d < -746.0 ? 0.0 : std::exp(d);
                total += y[base + j];
            }
            for (std::size_t j = 0; j < m; ++j) {
                y[base + j] /= total;
            }
        }
        return;
    }
    case Op::concat_cols: {
        const std::size_t m = out.cols();
        std::size_t offset = 0;
        for (std::size_t k = 0; k < node.parents.size(); ++k) {
            const Tensor& part = in(k);
            const std::size_t w = part.cols();
            for (std::size_t r = 0; r < out.rows(); ++r) {
                std::copy_n(part.values().data() + r * w, w, y + r * m + offset);
            }
            offset += w;
        }
        return;
    }
    case Op::conv1d:
    case Op::conv1d_transpose: {
        const Tensor& xt = in(0);
        const double* x = xt.values().data();
        const double* w = in(1).values().data();
        const double* b = in(2).values().data();
        const std::size_t steps = xt.rows();
        const std::size_t cin = xt.cols();
        const std::size_t cout = out.cols();
        const auto pad = static_cast<std::ptrdiff_t>(node.kernel / 2);
        const bool transposed = node.op == Op::conv1d_transpose;
        for (std::size_t t = 0; t < steps; ++t) {
            double* yt = y + t * cout;
            std::copy_n(b, cout, yt);
            for (std::size_t k = 0; k < node.kernel; ++k) {
                const auto offset = static_cast<std::ptrdiff_t>(k) - pad;
                const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + (transposed ? -offset : offset);
                if (src < 0 || src >= static_cast<std::ptrdiff_t>(steps)) {
                    continue;
                }
                const double* xs = x + static_cast<std::size_t>(src) * cin;
                for (std::size_t c = 0; c < cin; ++c) {
                    const double xv = xs[c];
                    const double* wr = w + (k * cin + c) * cout;
                    for (std::size_t o = 0; o < cout; ++o) {
                        yt[o] += xv * wr[o];
                    }
                }
            }
        }
        return;
    }
    case Op::mean_rows: {
        const Tensor& a = in(0);
        const std::size_t m = a.cols();
        out.fill(0.0);
        for (std::size_t r = 0; r < a.rows(); ++r) {
            const double* ar = a.values().data() + r * m;
            for (std::size_t j = 0; j < m; ++j) {
                y[j] += ar[j];
            }
        }
        const double inv = 1.0 / static_cast<double>(a.rows());
        for (std::size_t j = 0; j < m; ++j) {
            y[j] *= inv;
        }
        return;
    }
    case Op::sum:
    case Op::mean: {
        double total = 0.0;
        for (double v : in(0).values()) {
            total += v;
        }
        y[0] = node.op == Op::mean ? total / static_cast<double>(in(0).size()) : total;
        return;
    }
    case Op::reshape:
        std::copy(in(0).values().begin(), in(0).values().end(), y);
        return;
    case Op::layer_norm: {
        const Tensor& xt = in(0);
        const double* x = xt.values().data();
        const double* gamma = in(1).values().data();
        const double* beta = in(2).values().data();
        double* xhat = node.aux.values().data();
        double* inv_std = node.aux2.values().data();
        const std::size_t m = xt.cols();
        for (std::size_t r = 0; r < xt.rows(); ++r) {
            const double* xr = x + r * m;
            double mu = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                mu += xr[j];
            }
            mu /= static_cast<double>(m);
            double var = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                var += (xr[j] - mu) * (xr[j] - mu);
            }
            var /= static_cast<double>(m);
            inv_std[r] = 1.0 / std::sqrt(var + node.factor);
            for (std::size_t j = 0; j < m; ++j) {
                xhat[r * m + j] = (xr[j] - mu) * inv_std[r];
                y[r * m + j] = gamma[j] * xhat[r * m + j] + beta[j];
            }
        }
        return;
    }
    case Op::mse: {
        const Tensor& a = in(0);
        const double* av = a.values().data();
        const double* bv = in(1).values().data();
        double total = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = av[i] - bv[i];
            total += d * d;
        }
        y[0] = total / static_cast<double>(a.size());
        return;
    }
    case Op::bce_with_logits: {
        const Tensor& z = in(0);
        const double* zv = z.values().data();
        const double* tv = in(1).values().data();
        double total = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            total += std::max(zv[i], 0.0) - zv[i] * tv[i] + std::log1p(std::exp(-std::abs(zv[i])));
        }
        y[0] = total / static_cast<double>(z.size());
        return;
    }
    }
}

void Graph::backward(NodeId output)
{
    backward(output, Tensor(shape(output), 1.0));
}

void Graph::backward(NodeId output, const Tensor& seed)
{
    if (!evaluated_) {
        throw UsageError("graph: backward called before forward");
    }
    Node& out = at(output);
    if (seed.size() != out.value.size()) {
        throw ShapeError("backward: seed " + dims(seed.shape()) + " vs output " + dims(out.value.shape()));
    }

    reach_.assign(nodes_.size(), 0);
    reach_[output.index] = 1;
    for (std::uint32_t i = output.index + 1; i-- > 0;) {
        if (!reach_[i]) {
            continue;
        }
        for (NodeId p : nodes_[i].parents) {
            reach_[p.index] = 1;
        }
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        nodes_[i].grad.fill(0.0);
    }
    std::copy(seed.values().begin(), seed.values().end(), out.grad.values().begin());

    for (std::uint32_t i = output.index + 1; i-- > 0;) {
        if (reach_[i]) {
            propagate(nodes_[i]);
        }
    }
}

void Graph::propagate(Node& node)
{
    auto val = [&](std::size_t k) -> const Tensor& { return nodes_[node.parents[k].index].value; };
    auto gin = [&](std::size_t k) -> double* { return nodes_[node.parents[k].index].grad.values().data(); };
    const double* g = node.grad.values().data();
    const double* y = node.value.values().data();
    const std::size_t count = node.value.size();

    switch (node.op) {
    case Op::input:
    case Op::parameter:
    case Op::constant:
        return;
    case Op::matmul: {
        // y = a b: ga += g b^T, gb += a^T g
        const Tensor& a = val(0);
        const Tensor& b = val(1);
        const std::size_t n = a.rows();
        const std::size_t k = a.cols();
        const std::size_t m = b.cols();
        gemm_nt(g, b.values().data(), gin(0), n, m, k);
        gemm_tn(a.values().data(), g, gin(1), n, k, m);
        return;
    }
    case Op::matmul_nt: {
        // y = a b^T: ga += g b, gb += g^T a
        const Tensor& a = val(0);
        const Tensor& b = val(1);
        const std::size_t n = a.rows();
        const std::size_t k = a.cols();
        const std::size_t m = b.rows();
        gemm_nn(g, b.values().data(), gin(0), n, m, k);
        gemm_tn(g, a.values().data(), gin(1), n, m, k);
        return;
    }
    case Op::linear: {
        const Tensor& x = val(0);
        const Tensor& w = val(1);
        const std::size_t n = x.rows();
        const std::size_t k = x.cols();
        const std::size_t m = w.cols();
        gemm_nt(g, w.values().data(), gin(0), n, m, k);
        gemm_tn(x.values().data(), g, gin(1), n, k, m);
        double* gb = gin(2);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                gb[j] += g[i * m + j];
            }
        }
        return;
    }
    case Op::add: {
        double* ga = gin(0);
        double* gb = gin(1);
        for (std::size_t i = 0; i < count; ++i) {
            ga[i] += g[i];
        }
        for (std::size_t i = 0; i < count; ++i) {
            gb[i] += g[i];
        }
        return;
    }
    case Op::sub: {
        double* ga = gin(0);
        double* gb = gin(1);
        for (std::size_t i = 0; i < count; ++i) {
            ga[i] += g[i];
        }
        for (std::size_t i = 0; i < count; ++i) {
            gb[i] -= g[i];
        }
        return;
    }
    case Op::mul: {
        const double* a = val(0).values().data();
        const double* b = val(1).values().data();
        double* ga = gin(0);
        for (std::size_t i = 0; i < count; ++i) {
            ga[i] += g[i] * b[i];
        }
        double* gb = gin(1);
        for (std::size_t i = 0; i < count; ++i) {
            gb[i] += g[i] * a[i];
        }
        return;
    }
    case Op::add_row_bias: {
        double* ga = gin(0);
        double* gb = gin(1);
        const std::size_t m = node.value.cols();
        for (std::size_t i = 0; i < count; ++i) {
            ga[i] += g[i];
            gb[i % m] += g[i];
        }
        return;
    }
    case Op::scale: {
        double* ga = gin(0);
        for (std::size_t i = 0; i < count; ++i) {
            ga[i] += node.factor * g[i];
        }
        return;
    }
    case Op::tanh: {
        double* ga = gin(0);
        for (std::size_t i = 0; i < count; ++i) {
            ga[i] += g[i] * (1.0 - y[i] * y[i]);
        }
        return;
    }
    case Op::sigmoid: {
        double* ga = gin(0);
        for (std::size_t i = 0; i < count; ++i) {
            ga[i] += g[i] * y[i] * (1.0 - y[i]);
        }
        return;
    }
    case Op::relu: {
        const double* a = val(0).values().data();
        double* ga = gin(0);
        for (std::size_t i = 0; i < count; ++i) {
            if (a[i] > 0.0) {
                ga[i] += g[i];
            }
        }
        return;
    }
    case Op::masked_softmax: {
        double* ga = gin(0);
        const std::size_t m = node.value.cols();
        for (std::size_t r = 0; r < node.value.rows(); ++r) {
            const std::size_t base = r * m;
            double dot = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                dot += g[base + j] * y[base + j];
            }
            for (std::size_t j = 0; j < m; ++j) {
                ga[base + j] += node.factor * y[base + j] * (g[base + j] - dot);
            }
        }
        return;
    }
    case Op::concat_cols: {
        const std::size_t m = node.value.cols();
        std::size_t offset = 0;
        for (std::size_t k = 0; k < node.parents.size(); ++k) {
            const std::size_t w = val(k).cols();
            double* gp = gin(k);
            for (std::size_t r = 0; r < node.value.rows(); ++r) {
                for (std::size_t j = 0; j < w; ++j) {
                    gp[r * w + j] += g[r * m + offset + j];
                }
            }
            offset += w;
        }
        return;
    }
    case Op::conv1d:
    case Op::conv1d_transpose: {
        const Tensor& xt = val(0);
        const double* x = xt.values().data();
        const double* w = val(1).values().data();
        double* gx = gin(0);
        double* gw = gin(1);
        double* gb = gin(2);
        const std::size_t steps = xt.rows();
        const std::size_t cin = xt.cols();
        const std::size_t cout = node.value.cols();
        const auto pad = static_cast<std::ptrdiff_t>(node.kernel / 2);
        const bool transposed = node.op == Op::conv1d_transpose;
        for (std::size_t t = 0; t < steps; ++t) {
            const double* gt = g + t * cout;
            for (std::size_t o = 0; o < cout; ++o) {
                gb[o] += gt[o];
            }
            for (std::size_t k = 0; k < node.kernel; ++k) {
                const auto offset = static_cast<std::ptrdiff_t>(k) - pad;
                const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + (transposed ? -offset : offset);
                if (src < 0 || src >= static_cast<std::ptrdiff_t>(steps)) {
                    continue;
                }
                const double* xs = x + static_cast<std::size_t>(src) * cin;
                double* gxs = gx + static_cast<std::size_t>(src) * cin;
                for (std::size_t c = 0; c < cin; ++c) {
                    const double* wr = w + (k * cin + c) * cout;
                    double* gwr = gw + (k * cin + c) * cout;
                    double acc = 0.0;
                    const double xv = xs[c];
                    for (std::size_t o = 0; o < cout; ++o) {
                        acc += gt[o] * wr[o];
                        gwr[o] += xv * gt[o];
                    }
                    gxs[c] += acc;
                }
            }
        }
        return;
    }
    case Op::mean_rows: {
        const Tensor& a = val(0);
        double* ga = gin(0);
        const std::size_t m = a.cols();
        const double inv = 1.0 / static_cast<double>(a.rows());
        for (std::size_t r = 0; r < a.rows(); ++r) {
            for (std::size_t j = 0; j < m; ++j) {
                ga[r * m + j] += g[j] * inv;
            }
        }
        return;
    }
    case Op::sum:
    case Op::mean: {
        const std::size_t n = val(0).size();
        const double d = node.op == Op::mean ? g[0] / static_cast<double>(n) : g[0];
        double* ga = gin(0);
        for (std::size_t i = 0; i < n; ++i) {
            ga[i] += d;
        }
        return;
    }
    case Op::reshape: {
        double* ga = gin(0);
        for (std::size_t i = 0; i < count; ++i) {
            ga[i] += g[i];
        }
        return;
    }
    case Op::layer_norm: {
        const double* gamma = val(1).values().data();
        const double* xhat = node.aux.values().data();
        const double* inv_std = node.aux2.values().data();
        double* gx = gin(0);
        double* ggamma = gin(1);
        double* gbeta = gin(2);
        const std::size_t m = node.value.cols();
        const auto md = static_cast<double>(m);
        for (std::size_t r = 0; r < node.value.rows(); ++r) {
            const std::size_t base = r * m;
            double sum_gh = 0.0;
            double sum_gh_xhat = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                const double gh = g[base + j] * gamma[j];
                sum_gh += gh;
                sum_gh_xhat += gh * xhat[base + j];
                ggamma[j] += g[base + j] * xhat[base + j];
                gbeta[j] += g[base + j];
            }
            for (std::size_t j = 0; j < m; ++j) {
                const double gh = g[base + j] * gamma[j];
                gx[base + j] += inv_std[r] * (gh - sum_gh / md - xhat[base + j] * sum_gh_xhat / md);
            }
        }
        return;
    }
    case Op::mse: {
        const Tensor& a = val(0);
        const double* av = a.values().data();
        const double* bv = val(1).values().data();
        double* ga = gin(0);
        double* gb = gin(1);
        const double k = 2.0 * g[0] / static_cast<double>(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = k * (av[i] - bv[i]);
            ga[i] += d;
            gb[i] -= d;
        }
        return;
    }
    case Op::bce_with_logits: {
        const Tensor& z = val(0);
        const double* zv = z.values().data();
        const double* tv = val(1).values().data();
        double* gz = gin(0);
        double* gt = gin(1);
        const double k = g[0] / static_cast<double>(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) {
            gz[i] += k * (sigmoid_of(zv[i]) - tv[i]);
            gt[i] -= k * zv[i];
        }
        return;
    }
    }
}

Tensor finite_difference_gradient(Graph& graph, NodeId output, NodeId param, double eps)
{
    if (!(eps > 0.0)) {
        throw UsageError("finite_difference_gradient: eps must be positive");
    }
    if (shape_size(graph.shape(output)) != 1) {
        throw ShapeError("finite_difference_gradient: output is not scalar, shape " +
                         shape_string(graph.shape(output)));
    }
    Tensor& p = graph.leaf_value(param);
    Tensor result(p.shape());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double original = p[i];
        p[i] = original + eps;
        graph.forward();
        const double up = graph.value(output)[0];
        p[i] = original - eps;
        graph.forward();
        const double down = graph.value(output)[0];
        p[i] = original;
        result[i] = (up - down) / (2.0 * eps);
    }
    graph.forward();
    return result;
}

} // namespace tsrisk::ad
