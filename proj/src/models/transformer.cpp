#include "tsrisk/models.hpp"

#include "tsrisk/errors.hpp"

#include <cmath>

namespace tsrisk {

namespace {

// attention + residual (+ norm), then feed-forward + residual (+ norm)
ad::NodeId transformer_block(ad::Graph& g, ad::NodeId x, const TransformerSpec& spec, const std::string& prefix,
                             const attention::AttentionMask& mask)
{
    const std::size_t width = spec.width();
    if (g.shape(x)[1] != width) {
        throw ShapeError("transformer block '" + prefix + "': input width " + std::to_string(g.shape(x)[1]) +
                         ", expected " + std::to_string(width));
    }
    auto norm = [&](ad::NodeId h, const char* which) {
        if (!spec.use_layer_norm) {
            return h;
        }
        const ad::NodeId gamma = g.parameter(prefix + "." + which + ".gamma", 1, width, ad::Init::ones);
        const ad::NodeId beta = g.parameter(prefix + "." + which + ".beta", 1, width, ad::Init::zeros);
        return g.layer_norm(h, gamma, beta);
    };

    const ad::NodeId attended = attention::multi_head_attention(g, x, prefix + ".attn", spec.heads, spec.head_dim, mask);
    ad::NodeId h = norm(g.add(x, attended), "norm1");

    const ad::NodeId w1 = g.parameter(prefix + ".ffn.inner.weight", width, spec.ffn_dim);
    const ad::NodeId b1 = g.parameter(prefix + ".ffn.inner.bias", 1, spec.ffn_dim, ad::Init::zeros);
    const ad::NodeId w2 = g.parameter(prefix + ".ffn.outer.weight", spec.ffn_dim, width);
    const ad::NodeId b2 = g.parameter(prefix + ".ffn.outer.bias", 1, width, ad::Init::zeros);
    const ad::NodeId ff = g.linear(g.relu(g.linear(h, w1, b1)), w2, b2);
    return norm(g.add(h, ff), "norm2");
}

} // namespace

attention::AttentionMask encoder_mask(const TransformerSpec& spec)
{
    return spec.window ? attention::build_local_mask(spec.seq_len, *spec.window)
                       : attention::build_full_mask(spec.seq_len);
}

Tensor sinusoidal_positions(std::size_t seq_len, std::size_t width)
{
    Tensor pe({seq_len, width});
    for (std::size_t t = 0; t < seq_len; ++t) {
        for (std::size_t i = 0; i < width; ++i) {
            const double rate = std::pow(10000.0, static_cast<double>(2 * (i / 2)) / static_cast<double>(width));
            const double angle = static_cast<double>(t) / rate;
            pe.at(t, i) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

ad::NodeId build_encoder_block(ad::Graph& graph, ad::NodeId x, const TransformerSpec& spec, const std::string& prefix,
                               const attention::AttentionMask& mask)
{
    return transformer_block(graph, x, spec, prefix, mask);
}

ad::NodeId build_decoder_block(ad::Graph& graph, ad::NodeId x, const TransformerSpec& spec, const std::string& prefix,
                               const attention::AttentionMask& mask)
{
    return transformer_block(graph, x, spec, prefix, mask);
}

ad::NodeId build_transformer_encoder(ad::Graph& g, ad::NodeId series, const TransformerSpec& spec)
{
    spec.validate();
    if (g.shape(series) != Shape{spec.seq_len, 1}) {
        throw ShapeError("transformer encoder: input " + shape_string(g.shape(series)) + ", expected [" +
                         std::to_string(spec.seq_len) + "x1]");
    }
    const std::size_t width = spec.width();
    const ad::NodeId w_in = g.parameter("encoder.input.weight", 1, width);
    const ad::NodeId b_in = g.parameter("encoder.input.bias", 1, width, ad::Init::zeros);
    ad::NodeId h = g.linear(series, w_in, b_in);
    if (spec.positional_encoding) {
        h = g.add(h, g.constant(sinusoidal_positions(spec.seq_len, width)));
    }
    const attention::AttentionMask mask = encoder_mask(spec);
    for (std::size_t b = 0; b < spec.encoder_blocks; ++b) {
        h = build_encoder_block(g, h, spec, "encoder.block" + std::to_string(b), mask);
    }
    const ad::NodeId pooled = g.mean_rows(h);
    const ad::NodeId w_lat = g.parameter("encoder.latent.weight", width, spec.latent_dim);
    const ad::NodeId b_lat = g.parameter("encoder.latent.bias", 1, spec.latent_dim, ad::Init::zeros);
    return g.linear(pooled, w_lat, b_lat);
}

ad::NodeId build_transformer_decoder(ad::Graph& g, ad::NodeId latent, const TransformerSpec& spec)
{
    spec.validate();
    if (g.shape(latent) != Shape{1, spec.latent_dim}) {
        throw ShapeError("transformer decoder: latent " + shape_string(g.shape(latent)) + ", expected [1x" +
                         std::to_string(spec.latent_dim) + "]");
    }
    const std::size_t width = spec.width();
    const std::size_t flat = spec.seq_len * width;
    const ad::NodeId w_in = g.parameter("decoder.input.weight", spec.latent_dim, flat);
    const ad::NodeId b_in = g.parameter("decoder.input.bias", 1, flat, ad::Init::zeros);
    ad::NodeId h = g.reshape(g.linear(latent, w_in, b_in), spec.seq_len, width);
    if (spec.positional_encoding) {
        h = g.add(h, g.constant(sinusoidal_positions(spec.seq_len, width)));
    }
    const attention::AttentionMask mask = attention::build_causal_mask(spec.seq_len);
    for (std::size_t b = 0; b < spec.decoder_blocks; ++b) {
        h = build_decoder_block(g, h, spec, "decoder.block" + std::to_string(b), mask);
    }
    const ad::NodeId w_out = g.parameter("decoder.output.weight", width, 1);
    const ad::NodeId b_out = g.parameter("decoder.output.bias", 1, 1, ad::Init::zeros);
    return g.linear(h, w_out, b_out);
}

ModelGraph build_transformer_decode_graph(const TransformerSpec& spec)
{
    ModelGraph mg;
    mg.input = mg.graph.input("latent", 1, spec.latent_dim);
    mg.latent = mg.input;
    mg.output = build_transformer_decoder(mg.graph, mg.input, spec);
    return mg;
}

} // namespace tsrisk
