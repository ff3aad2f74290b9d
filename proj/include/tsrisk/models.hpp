#pragma once

#include "tsrisk/attention.hpp"
#include "tsrisk/graph.hpp"
#include "tsrisk/model_spec.hpp"
#include "tsrisk/parameter_store.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace tsrisk {

/// One per-sample computation graph for a model family.
///
/// Autoencoders: `input` is seq_len x 1, `output` the reconstruction of the
/// same shape, `loss` the MSE between them; `latent` is set for the
/// transformer. Feed-forward classifier: `input` is 1 x seq_len, `target`
/// 1 x 1, `output` the logit, `probability` its sigmoid and `loss` the
/// binary cross-entropy.
struct ModelGraph {
    ad::Graph graph;
    ad::NodeId input;
    ad::NodeId target;
    ad::NodeId latent;
    ad::NodeId output;
    ad::NodeId probability;
    ad::NodeId loss;
};

ModelGraph build_model_graph(const ModelSpec& spec);

/// Transformer pieces, exposed for tests and for decode().
ad::NodeId build_transformer_encoder(ad::Graph& graph, ad::NodeId series, const TransformerSpec& spec);
ad::NodeId build_transformer_decoder(ad::Graph& graph, ad::NodeId latent, const TransformerSpec& spec);
ad::NodeId build_encoder_block(ad::Graph& graph, ad::NodeId x, const TransformerSpec& spec, const std::string& prefix,
                               const attention::AttentionMask& mask);
ad::NodeId build_decoder_block(ad::Graph& graph, ad::NodeId x, const TransformerSpec& spec, const std::string& prefix,
                               const attention::AttentionMask& mask);
/// Graph with input "latent" (1 x latent_dim) and the reconstruction as output.
ModelGraph build_transformer_decode_graph(const TransformerSpec& spec);
/// Local mask of the configured window, or all-true for full attention.
attention::AttentionMask encoder_mask(const TransformerSpec& spec);
Tensor sinusoidal_positions(std::size_t seq_len, std::size_t width);

ad::NodeId build_conv_autoencoder(ad::Graph& graph, ad::NodeId series, const ConvSpec& spec);
ad::NodeId build_ffnn_logit(ad::Graph& graph, ad::NodeId series, const FeedForwardSpec& spec);

/// Fresh parameters: Glorot-uniform weights, zero biases, unit gains.
ParameterStore init_parameters(const ModelSpec& spec, std::uint64_t seed);

/// Runs body(lane) for every lane in [0, lanes). How samples are assigned
/// to lanes is fixed by the caller, so results never depend on how many
/// hardware threads execute the lanes.
void for_each_lane(std::size_t lanes, const std::function<void(std::size_t)>& body);

/// A model family instance: spec plus weights. Immutable during inference.
class Model {
public:
    /// Throws DataError listing missing/extra/reshaped parameters when
    /// `params` does not fit `spec`.
    Model(ModelSpec spec, ParameterStore params);
    static Model initialize(const ModelSpec& spec, std::uint64_t seed);

    const ModelSpec& spec() const { return spec_; }
    const ParameterStore& parameters() const { return params_; }
    ParameterStore& parameters() { return params_; }

    /// Inputs are B x seq_len x 1 (or B x seq_len). Outputs: B x latent_dim.
    Tensor encode(const Tensor& batch) const;
    /// B x latent_dim -> B x seq_len x 1.
    Tensor decode(const Tensor& latents) const;
    /// Autoencoder reconstruction, B x seq_len x 1.
    Tensor reconstruct(const Tensor& batch) const;
    /// Per-sample MSE between input and reconstruction.
    std::vector<double> reconstruction_errors(const Tensor& batch) const;
    /// Feed-forward positive-class probabilities.
    std::vector<double> scores(const Tensor& batch) const;
    /// Reconstruction errors for autoencoders, probabilities for the
    /// classifier: larger means riskier either way.
    std::vector<double> risk_scores(const Tensor& batch) const;

    std::size_t lanes = 4;

private:
    void check_batch(const Tensor& batch) const;

    ModelSpec spec_;
    ParameterStore params_;
};

/// Mean of squared differences over all entries of one sample.
double reconstruction_error(std::span<const double> x, std::span<const double> reconstruction);
/// Mean per-sample reconstruction error over `dataset`, summed in row order.
double average_reconstruction_error(const Model& model, const Tensor& dataset);
Tensor conv_forward(const Model& model, const Tensor& batch);
std::vector<double> ffnn_score(const Model& model, const Tensor& batch);

struct Checkpoint {
    ModelSpec spec;
    ParameterStore parameters;
};

void save_checkpoint(const std::filesystem::path& path, const ModelSpec& spec, const ParameterStore& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);
/// Loads and checks the stored parameters against `expected`.
ParameterStore load_checkpoint_for(const std::filesystem::path& path, const ModelSpec& expected);

} // namespace tsrisk
