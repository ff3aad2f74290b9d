#pragma once

#include "tsrisk/graph.hpp"
#include "tsrisk/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace tsrisk::attention {

/// Additive score offset for blocked positions. exp() of it underflows to
/// exactly zero, so blocked keys contribute nothing to the softmax.
inline constexpr double kBlockedScore = -1e9;

/// Half-open index range [start, end).
struct WindowBounds {
    std::size_t start = 0;
    std::size_t end = 0;
    bool operator==(const WindowBounds&) const = default;
};

/// Window of size `window` centred on `position`, clipped to the sequence:
/// start = max(0, i - floor(w/2)), end = min(seq_len, i + floor(w/2) + 1).
WindowBounds local_window_bounds(std::size_t position, std::size_t seq_len, std::size_t window);

/// seq_len x seq_len boolean matrix, true = attend.
class AttentionMask {
public:
    AttentionMask() = default;
    explicit AttentionMask(std::size_t seq_len, bool fill = false);

    std::size_t size() const { return n_; }
    bool allows(std::size_t query, std::size_t key) const { return cells_[query * n_ + key] != 0; }
    void set(std::size_t query, std::size_t key, bool allowed) { cells_[query * n_ + key] = allowed ? 1 : 0; }
    std::size_t allowed_in_row(std::size_t query) const;

    /// Throws UsageError if some row blocks every key.
    void validate() const;
    /// 0 where allowed, kBlockedScore where blocked.
    Tensor additive() const;

    bool operator==(const AttentionMask&) const = default;

private:
    std::size_t n_ = 0;
    std::vector<std::uint8_t> cells_;
};

AttentionMask build_local_mask(std::size_t seq_len, std::size_t window);
AttentionMask build_causal_mask(std::size_t seq_len);
AttentionMask build_full_mask(std::size_t seq_len);

/// softmax(Q K^T / sqrt(d_k) + mask) V as graph nodes.
ad::NodeId attend(ad::Graph& graph, ad::NodeId queries, ad::NodeId keys, ad::NodeId values, const AttentionMask& mask);

/// Registers per-head query/key/value projections (width x head_dim, with
/// biases) and an output projection (heads*head_dim x width) under `prefix`,
/// and returns the seq x width output node.
ad::NodeId multi_head_attention(ad::Graph& graph, ad::NodeId x, const std::string& prefix, std::size_t heads,
                                std::size_t head_dim, const AttentionMask& mask);

/// Weights for the eager multi-head helper below.
struct AttentionParams {
    std::size_t heads = 1;
    std::size_t head_dim = 1;
    std::vector<Tensor> query_weight, key_weight, value_weight;  // width x head_dim each
    std::vector<Tensor> query_bias, key_bias, value_bias;        // 1 x head_dim each
    Tensor output_weight;                                        // heads*head_dim x width
    Tensor output_bias;                                          // 1 x width

    std::size_t width() const { return output_weight.cols(); }
    void validate() const;
};

/// Eager evaluation of a single attention call.
Tensor scaled_dot_product_attention(const Tensor& queries, const Tensor& keys, const Tensor& values,
                                    const AttentionMask& mask);
Tensor multi_head_attention(const Tensor& x, const AttentionParams& params, const AttentionMask& mask);

/// Parameter names used by multi_head_attention for head h.
std::string head_parameter(const std::string& prefix, std::size_t head, const char* which);

} // namespace tsrisk::attention
