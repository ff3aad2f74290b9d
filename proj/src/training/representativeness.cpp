#include "tsrisk/training.hpp"

#include "tsrisk/errors.hpp"

namespace tsrisk {

Representativeness representativeness_delta(const ModelSpec& spec, const NormalizedDataset& dataset,
                                            std::span<const std::size_t> subset_rows, const TrainConfig& config,
                                            double threshold)
{
    if (!spec.is_autoencoder()) {
        throw UsageError("representativeness needs an autoencoder model");
    }
    TrainConfig whole = config;
    whole.subset = {};
    const std::vector<std::size_t> all_rows = sample_training_subset(dataset, whole);
    for (std::size_t r : subset_rows) {
        if (r >= dataset.size()) {
            throw UsageError("subset row " + std::to_string(r) + " out of range");
        }
        if (config.exclude_labeled && dataset.labeled[r]) {
            throw UsageError("subset row " + std::to_string(r) + " is labeled");
        }
    }
    const std::size_t epochs = config.epochs.value_or(default_autoencoder_epochs({}));

    Model on_whole = Model::initialize(spec, init_seed(config.seed));
    on_whole.lanes = config.lanes;
    train_autoencoder(on_whole, dataset.series, all_rows, epochs, config);

    Model on_subset = Model::initialize(spec, init_seed(config.seed));
    on_subset.lanes = config.lanes;
    train_autoencoder(on_subset, dataset.series, subset_rows, epochs, config);

    Representativeness r;
    r.re_full = average_reconstruction_error(on_whole, dataset.series);
    r.re_subset = average_reconstruction_error(on_subset, dataset.series);
    r.delta = r.re_full - r.re_subset;
    r.representative = r.delta < threshold;
    return r;
}

} // namespace tsrisk
