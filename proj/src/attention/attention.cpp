#include "tsrisk/attention.hpp"

#include "tsrisk/errors.hpp"

#include <algorithm>
#include <cmath>

namespace tsrisk::attention {

WindowBounds local_window_bounds(std::size_t position, std::size_t seq_len, std::size_t window)
{
    if (window == 0) {
        throw UsageError("local window size must be >= 1");
    }
    if (position >= seq_len) {
        throw UsageError("position " + std::to_string(position) + " out of range for length " +
                         std::to_string(seq_len));
    }
    const std::size_t half = window / 2;
    return {position > half ? position - half : 0, std::min(seq_len, position + half + 1)};
}

AttentionMask::AttentionMask(std::size_t seq_len, bool fill) : n_(seq_len), cells_(seq_len * seq_len, fill ? 1 : 0) {}

std::size_t AttentionMask::allowed_in_row(std::size_t query) const
{
    return static_cast<std::size_t>(std::count(cells_.begin() + static_cast<std::ptrdiff_t>(query * n_),
                                               cells_.begin() + static_cast<std::ptrdiff_t>((query + 1) * n_), 1));
}

void AttentionMask::validate() const
{
    for (std::size_t i = 0; i < n_; ++i) {
        if (allowed_in_row(i) == 0) {
            throw UsageError("attention mask row " + std::to_string(i) + " blocks every key");
        }
    }
}

Tensor AttentionMask::additive() const
{
    Tensor out({n_, n_});
    for (std::size_t i = 0; i < cells_.size(); ++i) {
        out[i] = cells_[i] ? 0.0 : kBlockedScore;
    }
    return out;
}

AttentionMask build_local_mask(std::size_t seq_len, std::size_t window)
{
    if (seq_len == 0) {
        throw UsageError("sequence length must be >= 1");
    }
    AttentionMask mask(seq_len);
    for (std::size_t i = 0; i < seq_len; ++i) {
        const WindowBounds b = local_window_bounds(i, seq_len, window);
        for (std::size_t j = b.start; j < b.end; ++j) {
            mask.set(i, j, true);
        }
    }
    return mask;
}

AttentionMask build_causal_mask(std::size_t seq_len)
{
    if (seq_len == 0) {
        throw UsageError("sequence length must be >= 1");
    }
    AttentionMask mask(seq_len);
    for (std::size_t i = 0; i < seq_len; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            mask.set(i, j, true);
        }
    }
    return mask;
}

AttentionMask build_full_mask(std::size_t seq_len)
{
    if (seq_len == 0) {
        throw UsageError("sequence length must be >= 1");
    }
    return AttentionMask(seq_len, true);
}

ad::NodeId attend(ad::Graph& graph, ad::NodeId queries, ad::NodeId keys, ad::NodeId values, const AttentionMask& mask)
{
    const std::size_t seq = graph.shape(queries)[0];
    if (graph.shape(keys)[0] != graph.shape(values)[0]) {
        throw ShapeError("attention: keys have " + std::to_string(graph.shape(keys)[0]) + " rows, values " +
                         std::to_string(graph.shape(values)[0]));
    }
    if (mask.size() != seq || graph.shape(keys)[0] != seq) {
        throw ShapeError("attention: mask of size " + std::to_string(mask.size()) + " for " + std::to_string(seq) +
                         " queries and " + std::to_string(graph.shape(keys)[0]) + " keys");
    }
    mask.validate();
    const double d_k = static_cast<double>(graph.shape(keys)[1]);
    const ad::NodeId scores = graph.matmul_nt(queries, keys);
    const ad::NodeId weights = graph.masked_softmax(scores, mask.additive(), 1.0 / std::sqrt(d_k));
    return graph.matmul(weights, values);
}

std::string head_parameter(const std::string& prefix, std::size_t head, const char* which)
{
    return prefix + ".head" + std::to_string(head) + "." + which;
}

ad::NodeId multi_head_attention(ad::Graph& graph, ad::NodeId x, const std::string& prefix, std::size_t heads,
                                std::size_t head_dim, const AttentionMask& mask)
{
    if (heads == 0 || head_dim == 0) {
        throw UsageError("attention: heads and head_dim must be >= 1");
    }
    const std::size_t width = graph.shape(x)[1];
    std::vector<ad::NodeId> outputs;
    outputs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        auto projection = [&](const char* w, const char* b) {
            const ad::NodeId weight = graph.parameter(head_parameter(prefix, h, w), width, head_dim);
            const ad::NodeId bias = graph.parameter(head_parameter(prefix, h, b), 1, head_dim, ad::Init::zeros);
            return graph.linear(x, weight, bias);
        };
        const ad::NodeId q = projection("query.weight", "query.bias");
        const ad::NodeId k = projection("key.weight", "key.bias");
        const ad::NodeId v = projection("value.weight", "value.bias");
        outputs.push_back(attend(graph, q, k, v, mask));
    }
    const ad::NodeId joined = heads == 1 ? outputs.front() : graph.concat_cols(outputs);
    const ad::NodeId wo = graph.parameter(prefix + ".output.weight", heads * head_dim, width);
    const ad::NodeId bo = graph.parameter(prefix + ".output.bias", 1, width, ad::Init::zeros);
    return graph.linear(joined, wo, bo);
}

void AttentionParams::validate() const
{
    if (heads == 0 || head_dim == 0) {
        throw UsageError("attention params: heads and head_dim must be >= 1");
    }
    const auto check = [&](const std::vector<Tensor>& ts, std::size_t rows, std::size_t cols, const char* what) {
        if (ts.size() != heads) {
            throw ShapeError(std::string("attention params: expected ") + std::to_string(heads) + " " + what);
        }
        for (const Tensor& t : ts) {
            if (t.shape() != Shape{rows, cols}) {
                throw ShapeError(std::string("attention params: ") + what + " has shape " + shape_string(t.shape()));
            }
        }
    };
    const std::size_t w = output_weight.cols();
    if (output_weight.rows() != heads * head_dim || output_bias.shape() != Shape{1, w}) {
        throw ShapeError("attention params: output projection must be " + std::to_string(heads * head_dim) + " x width");
    }
    check(query_weight, w, head_dim, "query weights");
    check(key_weight, w, head_dim, "key weights");
    check(value_weight, w, head_dim, "value weights");
    check(query_bias, 1, head_dim, "query biases");
    check(key_bias, 1, head_dim, "key biases");
    check(value_bias, 1, head_dim, "value biases");
}

Tensor scaled_dot_product_attention(const Tensor& queries, const Tensor& keys, const Tensor& values,
                                    const AttentionMask& mask)
{
    ad::Graph g;
    const ad::NodeId q = g.input("q", queries.rows(), queries.cols());
    const ad::NodeId k = g.input("k", keys.rows(), keys.cols());
    const ad::NodeId v = g.input("v", values.rows(), values.cols());
    const ad::NodeId out = attend(g, q, k, v, mask);
    g.forward({{"q", queries}, {"k", keys}, {"v", values}});
    return g.value(out);
}

Tensor multi_head_attention(const Tensor& x, const AttentionParams& params, const AttentionMask& mask)
{
    params.validate();
    if (x.cols() != params.width()) {
        throw ShapeError("multi_head_attention: input width " + std::to_string(x.cols()) + ", parameters expect " +
                         std::to_string(params.width()));
    }
    ad::Graph g;
    const ad::NodeId in = g.input("x", x.rows(), x.cols());
    const ad::NodeId out = multi_head_attention(g, in, "mha", params.heads, params.head_dim, mask);
    for (std::size_t h = 0; h < params.heads; ++h) {
        g.set_parameter(head_parameter("mha", h, "query.weight"), params.query_weight[h]);
        g.set_parameter(head_parameter("mha", h, "key.weight"), params.key_weight[h]);
        g.set_parameter(head_parameter("mha", h, "value.weight"), params.value_weight[h]);
        g.set_parameter(head_parameter("mha", h, "query.bias"), params.query_bias[h]);
        g.set_parameter(head_parameter("mha", h, "key.bias"), params.key_bias[h]);
        g.set_parameter(head_parameter("mha", h, "value.bias"), params.value_bias[h]);
    }
    g.set_parameter("mha.output.weight", params.output_weight);
    g.set_parameter("mha.output.bias", params.output_bias);
    g.forward({{"x", x}});
    return g.value(out);
}

} // namespace tsrisk::attention
