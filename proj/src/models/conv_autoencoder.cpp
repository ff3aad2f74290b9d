#include "tsrisk/models.hpp"

#include "tsrisk/errors.hpp"

namespace tsrisk {

namespace {

ad::NodeId conv_layer(ad::Graph& g, ad::NodeId x, const std::string& name, std::size_t out_channels,
                      std::size_t kernel, bool transposed)
{
    const std::size_t in_channels = g.shape(x)[1];
    const ad::NodeId w = g.parameter(name + ".weight", kernel * in_channels, out_channels, ad::Init::glorot_uniform,
                                     kernel * in_channels, kernel * out_channels);
    const ad::NodeId b = g.parameter(name + ".bias", 1, out_channels, ad::Init::zeros);
    return transposed ? g.conv1d_transpose(x, w, b, kernel) : g.conv1d(x, w, b, kernel);
}

} // namespace

// Encoder: stride-1 'same' convolutions with ReLU. Decoder: transposed
// convolutions over the reversed filter list with ReLU, then a linear
// single-filter convolution back to one feature.
ad::NodeId build_conv_autoencoder(ad::Graph& g, ad::NodeId series, const ConvSpec& spec)
{
    spec.validate();
    if (g.shape(series) != Shape{spec.seq_len, 1}) {
        throw ShapeError("conv autoencoder: input " + shape_string(g.shape(series)) + ", expected [" +
                         std::to_string(spec.seq_len) + "x1]");
    }
    ad::NodeId h = series;
    for (std::size_t i = 0; i < spec.encoder_filters.size(); ++i) {
        h = g.relu(conv_layer(g, h, "encoder.conv" + std::to_string(i), spec.encoder_filters[i], spec.kernel, false));
    }
    for (std::size_t i = 0; i < spec.decoder_filters.size(); ++i) {
        h = g.relu(conv_layer(g, h, "decoder.deconv" + std::to_string(i), spec.decoder_filters[i], spec.kernel, true));
    }
    return conv_layer(g, h, "decoder.output", 1, spec.kernel, false);
}

} // namespace tsrisk
