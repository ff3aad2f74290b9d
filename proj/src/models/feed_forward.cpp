#include "tsrisk/models.hpp"

#include "tsrisk/errors.hpp"

namespace tsrisk {

ad::NodeId build_ffnn_logit(ad::Graph& g, ad::NodeId series, const FeedForwardSpec& spec)
{
    spec.validate();
    if (g.shape(series) != Shape{1, spec.seq_len}) {
        throw ShapeError("feed-forward network: input " + shape_string(g.shape(series)) + ", expected [1x" +
                         std::to_string(spec.seq_len) + "]");
    }
    ad::NodeId h = series;
    for (std::size_t i = 0; i < spec.hidden.size(); ++i) {
        const std::string name = "hidden" + std::to_string(i);
        const ad::NodeId w = g.parameter(name + ".weight", g.shape(h)[1], spec.hidden[i]);
        const ad::NodeId b = g.parameter(name + ".bias", 1, spec.hidden[i], ad::Init::zeros);
        h = g.tanh(g.linear(h, w, b));
    }
    const ad::NodeId w = g.parameter("output.weight", g.shape(h)[1], 1);
    const ad::NodeId b = g.parameter("output.bias", 1, 1, ad::Init::zeros);
    return g.linear(h, w, b);
}

} // namespace tsrisk
