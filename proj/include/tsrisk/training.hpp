#pragma once
// Mini-batch training for every model family, plus the representativeness
// check between a training subset and the whole dataset.

#include "tsrisk/models.hpp"
#include "tsrisk/optimizer.hpp"
#include "tsrisk/preprocess.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tsrisk {

/// Training-set size: the whole eligible population or an explicit count.
struct SubsetSize {
    std::optional<std::size_t> count; // nullopt = full

    /// "full", "100k", "10k" or a positive integer.
    static SubsetSize parse(const std::string& text);
    std::string to_string() const;
};

/// Epochs used when none are configured: 20 for the full set, 30 for
/// subsets above 10,000 series, 80 for smaller ones.
std::size_t default_autoencoder_epochs(const SubsetSize& subset);
inline constexpr std::size_t kDefaultClassifierEpochs = 80;

struct TrainConfig {
    std::optional<std::size_t> epochs;
    std::size_t batch_size = 10000;
    std::uint64_t seed = 42;
    SubsetSize subset;
    bool exclude_labeled = true;
    AdamConfig adam;
    /// Gradient accumulation lanes; part of the arithmetic, so results
    /// change with it but never with the number of threads.
    std::size_t lanes = 4;
    /// Classifier only: share of labeled series used as positives, and the
    /// training-set size as a multiple of the labeled count.
    double classifier_fraction = 1.0;
    std::size_t classifier_ratio = 10;

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
/// Strict: unknown keys raise UsageError. Missing keys keep `base` values.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct EpochRecord {
    std::size_t epoch = 0; // 1-based
    double mean_loss = 0.0;
    double seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::size_t steps = 0;

    std::vector<double> losses() const;
};

nlohmann::json to_json(const TrainHistory& history);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Ascending row indices of a uniform sample without replacement from the
/// eligible rows (labeled rows excluded when configured).
std::vector<std::size_t> sample_training_subset(const NormalizedDataset& dataset, const TrainConfig& config);

/// Minimises the mean per-sample MSE over `rows` of `data` (N x seq_len).
/// Each epoch visits the rows in a seeded permutation; the last short
/// batch is kept. NumericError names the epoch and batch of a non-finite
/// loss.
TrainHistory train_autoencoder(Model& model, const Tensor& data, std::span<const std::size_t> rows,
                               std::size_t epochs, const TrainConfig& config, const EpochCallback& on_epoch = {});

struct ClassifierSet {
    std::vector<std::size_t> rows;
    std::vector<double> targets;
    std::size_t positives = 0;
};

/// floor(fraction * labeled) labeled rows as positives, then unlabeled rows
/// as negatives up to ratio * labeled rows in total.
ClassifierSet classifier_training_set(const NormalizedDataset& dataset, double fraction, std::size_t ratio,
                                      std::uint64_t seed);

/// Binary cross-entropy training of the feed-forward classifier.
TrainHistory train_ffnn(Model& model, const NormalizedDataset& dataset, const TrainConfig& config,
                        const EpochCallback& on_epoch = {});

/// Runs the autoencoder family trainer over a fresh model seeded from
/// config.seed; the entry point used by the CLI.
struct TrainResult {
    Model model;
    TrainHistory history;
    std::vector<std::size_t> rows;
    std::size_t epochs = 0;
};

TrainResult train(const ModelSpec& spec, const NormalizedDataset& dataset, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

struct Representativeness {
    double re_full = 0.0;   // model trained on the whole set, evaluated on it
    double re_subset = 0.0; // model trained on the subset, evaluated on the whole set
    double delta = 0.0;     // re_full - re_subset
    bool representative = false;
};

/// Trains one model on the eligible rows of `dataset` and one on
/// `subset_rows`, with the same seed and epoch count, and compares their
/// average reconstruction errors over every row of `dataset`.
Representativeness representativeness_delta(const ModelSpec& spec, const NormalizedDataset& dataset,
                                            std::span<const std::size_t> subset_rows, const TrainConfig& config,
                                            double threshold);

/// Seeds derived from TrainConfig::seed for each random decision.
std::uint64_t init_seed(std::uint64_t seed);

} // namespace tsrisk
