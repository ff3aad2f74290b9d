#include "tsrisk/training.hpp"

#include "tsrisk/errors.hpp"
#include "tsrisk/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace tsrisk {

namespace {

enum Stream : std::uint64_t { init_stream = 1, subset_stream = 2, shuffle_stream = 3, classifier_stream = 4 };

std::vector<std::size_t> eligible_rows(const NormalizedDataset& dataset, bool exclude_labeled)
{
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (!exclude_labeled || dataset.labeled[i] == 0) {
            rows.push_back(i);
        }
    }
    return rows;
}

std::vector<std::size_t> sample_sorted(const std::vector<std::size_t>& population, std::size_t k, Rng& rng)
{
    std::vector<std::size_t> picked;
    picked.reserve(k);
    for (std::size_t i : rng.sample(population.size(), k)) {
        picked.push_back(population[i]);
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

// Shared mini-batch loop. `targets`, when given, is indexed like `rows`.
TrainHistory fit(Model& model, const Tensor& data, std::span<const std::size_t> rows,
                 const std::vector<double>* targets, std::size_t epochs, const TrainConfig& config,
                 const EpochCallback& on_epoch)
{
    config.validate();
    if (epochs == 0) {
        throw UsageError("epochs must be >= 1");
    }
    const ModelSpec& spec = model.spec();
    const std::size_t seq_len = spec.seq_len();
    if (data.rank() < 2 || data.cols() != seq_len) {
        throw ShapeError("training data " + shape_string(data.shape()) + " does not match model seq_len " +
                         std::to_string(seq_len));
    }
    if (rows.empty()) {
        throw DataError("empty training set");
    }
    for (std::size_t r : rows) {
        if (r >= data.rows()) {
            throw UsageError("training row " + std::to_string(r) + " out of range");
        }
    }
    const bool classifier = spec.family == ModelFamily::ffnn;
    if (classifier != (targets != nullptr)) {
        throw UsageError("targets are required for the classifier and only for it");
    }

    const std::size_t lanes = config.lanes;
    std::vector<ModelGraph> graphs;
    graphs.reserve(lanes);
    for (std::size_t l = 0; l < lanes; ++l) {
        graphs.push_back(build_model_graph(spec));
    }
    ParameterStore& params = model.parameters();
    std::vector<ParameterStore> lane_grads(lanes, params.zeros_like());
    std::vector<double> lane_loss(lanes, 0.0);
    ParameterStore grads = params.zeros_like();
    AdamState adam = make_adam_state(params, config.adam);
    Rng shuffle(derive_seed(config.seed, shuffle_stream));

    TrainHistory history;
    const std::size_t n = rows.size();
    for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        const std::vector<std::size_t> order = shuffle.permutation(n);
        double epoch_loss = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < n; start += config.batch_size, ++batch_index) {
            const std::size_t batch = std::min(config.batch_size, n - start);
            try {
                for_each_lane(lanes, [&](std::size_t lane) {
                    ModelGraph& mg = graphs[lane];
                    bind_parameters(mg.graph, params);
                    lane_grads[lane].fill(0.0);
                    lane_loss[lane] = 0.0;
                    for (std::size_t p = lane; p < batch; p += lanes) {
                        const std::size_t pos = order[start + p];
                        const auto src = data.row(rows[pos]);
                        Tensor& input = mg.graph.leaf_value(mg.input);
                        std::copy(src.begin(), src.end(), input.values().begin());
                        if (classifier) {
                            mg.graph.leaf_value(mg.target)[0] = (*targets)[pos];
                        }
                        mg.graph.forward();
                        lane_loss[lane] += mg.graph.value(mg.loss)[0];
                        mg.graph.backward(mg.loss);
                        accumulate_gradients(mg.graph, lane_grads[lane]);
                    }
                });
            } catch (const NumericError& e) {
                throw NumericError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index + 1) +
                                   ": " + e.what());
            }

            double batch_loss = 0.0;
            grads.fill(0.0);
            const double inv = 1.0 / static_cast<double>(batch);
            for (std::size_t l = 0; l < lanes; ++l) {
                batch_loss += lane_loss[l];
                grads.add_scaled(lane_grads[l], inv);
            }
            if (!std::isfinite(batch_loss)) {
                throw NumericError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index + 1) +
                                   ": non-finite loss");
            }
            adam_step(params, grads, adam);
            ++history.steps;
            epoch_loss += batch_loss;
        }
        const std::chrono::duration<double> took = std::chrono::steady_clock::now() - started;
        history.epochs.push_back({epoch, epoch_loss / static_cast<double>(n), took.count()});
        if (on_epoch) {
            on_epoch(history.epochs.back());
        }
    }
    return history;
}

} // namespace

std::uint64_t init_seed(std::uint64_t seed)
{
    return derive_seed(seed, init_stream);
}

SubsetSize SubsetSize::parse(const std::string& text)
{
    if (text == "full") {
        return {};
    }
    if (text == "100k") {
        return {100000};
    }
    if (text == "10k") {
        return {10000};
    }
    std::size_t pos = 0;
    unsigned long long value = 0;
    try {
        value = std::stoull(text, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != text.size() || value == 0 || text.front() == '-') {
        throw UsageError("subset must be full, 100k, 10k or a positive count, got '" + text + "'");
    }
    return {static_cast<std::size_t>(value)};
}

std::string SubsetSize::to_string() const
{
    return count ? std::to_string(*count) : "full";
}

std::size_t default_autoencoder_epochs(const SubsetSize& subset)
{
    if (!subset.count) {
        return 20;
    }
    return *subset.count > 10000 ? 30 : 80;
}

void TrainConfig::validate() const
{
    if (epochs && *epochs == 0) {
        throw UsageError("epochs must be >= 1");
    }
    if (batch_size == 0) {
        throw UsageError("batch_size must be >= 1");
    }
    if (lanes == 0) {
        throw UsageError("lanes must be >= 1");
    }
    if (subset.count && *subset.count == 0) {
        throw UsageError("subset must be >= 1");
    }
    if (!(adam.learning_rate > 0.0) || !(adam.epsilon > 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
        !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
        throw UsageError("optimizer settings out of range");
    }
    if (!(classifier_fraction > 0.0 && classifier_fraction <= 1.0)) {
        throw UsageError("classifier fraction must lie in (0, 1]");
    }
    if (classifier_ratio == 0) {
        throw UsageError("classifier ratio must be >= 1");
    }
}

nlohmann::json to_json(const TrainConfig& c)
{
    return {
        {"epochs", c.epochs ? nlohmann::json(*c.epochs) : nlohmann::json(nullptr)},
        {"batch_size", c.batch_size},
        {"seed", c.seed},
        {"subset", c.subset.to_string()},
        {"exclude_labeled", c.exclude_labeled},
        {"learning_rate", c.adam.learning_rate},
        {"beta1", c.adam.beta1},
        {"beta2", c.adam.beta2},
        {"epsilon", c.adam.epsilon},
        {"lanes", c.lanes},
        {"classifier_fraction", c.classifier_fraction},
        {"classifier_ratio", c.classifier_ratio},
    };
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c)
{
    if (!j.is_object()) {
        throw UsageError("train config: expected an object");
    }
    try {
        for (const auto& item : j.items()) {
            const std::string& key = item.key();
            const nlohmann::json& v = item.value();
            if (key == "epochs") {
                c.epochs = v.is_null() ? std::nullopt : std::optional<std::size_t>(v.get<std::size_t>());
            } else if (key == "batch_size") {
                c.batch_size = v.get<std::size_t>();
            } else if (key == "seed") {
                c.seed = v.get<std::uint64_t>();
            } else if (key == "subset") {
                c.subset = SubsetSize::parse(v.is_string() ? v.get<std::string>() : std::to_string(v.get<std::size_t>()));
            } else if (key == "exclude_labeled") {
                c.exclude_labeled = v.get<bool>();
            } else if (key == "learning_rate") {
                c.adam.learning_rate = v.get<double>();
            } else if (key == "beta1") {
                c.adam.beta1 = v.get<double>();
            } else if (key == "beta2") {
                c.adam.beta2 = v.get<double>();
            } else if (key == "epsilon") {
                c.adam.epsilon = v.get<double>();
            } else if (key == "lanes") {
                c.lanes = v.get<std::size_t>();
            } else if (key == "classifier_fraction") {
                c.classifier_fraction = v.get<double>();
            } else if (key == "classifier_ratio") {
                c.classifier_ratio = v.get<std::size_t>();
            } else {
                throw UsageError("train config: unknown key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

std::vector<double> TrainHistory::losses() const
{
    std::vector<double> out;
    for (const EpochRecord& e : epochs) {
        out.push_back(e.mean_loss);
    }
    return out;
}

nlohmann::json to_json(const TrainHistory& h)
{
    nlohmann::json epochs = nlohmann::json::array();
    for (const EpochRecord& e : h.epochs) {
        epochs.push_back({{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"seconds", e.seconds}});
    }
    return {{"epochs", epochs}, {"steps", h.steps}};
}

std::vector<std::size_t> sample_training_subset(const NormalizedDataset& dataset, const TrainConfig& config)
{
    const std::vector<std::size_t> eligible = eligible_rows(dataset, config.exclude_labeled);
    if (!config.subset.count) {
        return eligible;
    }
    const std::size_t k = *config.subset.count;
    if (k > eligible.size()) {
        throw DataError("requested training subset of " + std::to_string(k) + " exceeds the eligible population of " +
                        std::to_string(eligible.size()));
    }
    Rng rng(derive_seed(config.seed, subset_stream));
    return sample_sorted(eligible, k, rng);
}

TrainHistory train_autoencoder(Model& model, const Tensor& data, std::span<const std::size_t> rows,
                               std::size_t epochs, const TrainConfig& config, const EpochCallback& on_epoch)
{
    if (!model.spec().is_autoencoder()) {
        throw UsageError("train_autoencoder: model '" + model.spec().name + "' is not an autoencoder");
    }
    return fit(model, data, rows, nullptr, epochs, config, on_epoch);
}

ClassifierSet classifier_training_set(const NormalizedDataset& dataset, double fraction, std::size_t ratio,
                                      std::uint64_t seed)
{
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw UsageError("classifier fraction must lie in (0, 1]");
    }
    std::vector<std::size_t> labeled;
    std::vector<std::size_t> unlabeled;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        (dataset.labeled[i] ? labeled : unlabeled).push_back(i);
    }
    if (labeled.empty()) {
        throw DataError("classifier training needs labeled series");
    }
    const auto positives =
        static_cast<std::size_t>(std::floor(fraction * static_cast<double>(labeled.size()) + 1e-9));
    const std::size_t total = ratio * labeled.size();
    if (positives == 0) {
        throw DataError("classifier fraction leaves no positive examples");
    }
    const std::size_t negatives = total - positives;
    if (negatives > unlabeled.size()) {
        throw DataError("classifier training needs " + std::to_string(negatives) + " unlabeled series, only " +
                        std::to_string(unlabeled.size()) + " available");
    }
    Rng rng(derive_seed(seed, classifier_stream));
    const std::vector<std::size_t> pos = sample_sorted(labeled, positives, rng);
    const std::vector<std::size_t> neg = sample_sorted(unlabeled, negatives, rng);

    ClassifierSet set;
    set.positives = positives;
    std::size_t a = 0;
    std::size_t b = 0;
    while (a < pos.size() || b < neg.size()) {
        if (b == neg.size() || (a < pos.size() && pos[a] < neg[b])) {
            set.rows.push_back(pos[a++]);
            set.targets.push_back(1.0);
        } else {
            set.rows.push_back(neg[b++]);
            set.targets.push_back(0.0);
        }
    }
    return set;
}

TrainHistory train_ffnn(Model& model, const NormalizedDataset& dataset, const TrainConfig& config,
                        const EpochCallback& on_epoch)
{
    if (model.spec().family != ModelFamily::ffnn) {
        throw UsageError("train_ffnn: model '" + model.spec().name + "' is not the feed-forward classifier");
    }
    const ClassifierSet set =
        classifier_training_set(dataset, config.classifier_fraction, config.classifier_ratio, config.seed);
    return fit(model, dataset.series, set.rows, &set.targets, config.epochs.value_or(kDefaultClassifierEpochs), config,
               on_epoch);
}

TrainResult train(const ModelSpec& spec, const NormalizedDataset& dataset, const TrainConfig& config,
                  const EpochCallback& on_epoch)
{
    config.validate();
    if (spec.seq_len() != dataset.seq_len()) {
        throw DataError("model seq_len " + std::to_string(spec.seq_len()) + " does not match dataset seq_len " +
                        std::to_string(dataset.seq_len()));
    }
    TrainResult result{Model::initialize(spec, init_seed(config.seed)), {}, {}, 0};
    result.model.lanes = config.lanes;
    if (spec.family == ModelFamily::ffnn) {
        const ClassifierSet set =
            classifier_training_set(dataset, config.classifier_fraction, config.classifier_ratio, config.seed);
        result.rows = set.rows;
        result.epochs = config.epochs.value_or(kDefaultClassifierEpochs);
        result.history = fit(result.model, dataset.series, set.rows, &set.targets, result.epochs, config, on_epoch);
    } else {
        result.rows = sample_training_subset(dataset, config);
        result.epochs = config.epochs.value_or(default_autoencoder_epochs(config.subset));
        result.history = fit(result.model, dataset.series, result.rows, nullptr, result.epochs, config, on_epoch);
    }
    return result;
}

} // namespace tsrisk
