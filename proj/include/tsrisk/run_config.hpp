#pragma once
// The document every CLI command reads: one optional section per module.
//
//   {
//     "seed": 42,
//     "synth":    { ...SynthConfig keys... },
//     "pipeline": { ...PipelineConfig keys... },
//     "model":    { "name": "tr-la", "window": 5, "use_layer_norm": false, ... },
//     "train":    { ...TrainConfig keys... },
//     "cluster":  { "fraction": 0.15, "consistency_base": "first", "threshold": null },
//     "representativeness": { "threshold": 0.0005, "subset": 600 }
//   }
//
// Unknown keys anywhere are rejected. The top-level seed drives every
// random decision; sections may not carry their own.

#include "tsrisk/model_spec.hpp"
#include "tsrisk/preprocess.hpp"
#include "tsrisk/riskcluster.hpp"
#include "tsrisk/synthdata.hpp"
#include "tsrisk/training.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace tsrisk {

struct ModelOverrides {
    std::optional<std::optional<std::size_t>> window; // outer: given; inner nullopt: full
    std::optional<bool> use_layer_norm;
    std::optional<bool> positional_encoding;
    std::optional<std::size_t> encoder_blocks;
    std::optional<std::size_t> decoder_blocks;
    std::optional<std::size_t> heads;
    std::optional<std::size_t> head_dim;
    std::optional<std::size_t> ffn_dim;
    std::optional<std::size_t> latent_dim;
    std::optional<std::vector<std::size_t>> conv_filters;
    std::optional<std::size_t> conv_kernel;
    std::optional<std::vector<std::size_t>> hidden;
};

struct RunConfig {
    std::uint64_t seed = 42;
    SynthConfig synth;
    PipelineConfig pipeline;
    std::string model = "tr-la";
    ModelOverrides overrides;
    TrainConfig train;
    double cluster_fraction = 0.15;
    ConsistencyBase consistency_base = ConsistencyBase::first;
    std::optional<double> cluster_threshold;
    std::optional<double> representativeness_threshold;
    SubsetSize representativeness_subset{600};

    /// Copies the seed into the sections and checks every value.
    void resolve();
};

/// Strict parse; throws UsageError naming the offending key.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

/// Command-line style override, e.g. ("window", "full") or ("epochs", "30").
/// Keys: seed, model, window, fraction, epochs, batch-size, subset, strict,
/// threshold, represent-subset, lanes, classifier-fraction.
void apply_override(RunConfig& config, const std::string& key, const std::string& value);

/// Named model with the configured overrides, for series of `seq_len`.
ModelSpec resolve_model_spec(const RunConfig& config, std::size_t seq_len);

} // namespace tsrisk
