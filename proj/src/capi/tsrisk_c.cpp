#include "tsrisk/tsrisk.h"

#include "tsrisk/commands.hpp"
#include "tsrisk/errors.hpp"
#include "tsrisk/models.hpp"
#include "tsrisk/preprocess.hpp"
#include "tsrisk/run_config.hpp"

#include <algorithm>
#include <cstring>
#include <mutex>
#include <new>
#include <string>

struct tsrisk_config {
    tsrisk::RunConfig value;
};

struct tsrisk_dataset {
    tsrisk::NormalizedDataset value;
};

struct tsrisk_model {
    tsrisk::Model value;
};

namespace {

thread_local std::string last_error;

std::mutex logger_mutex;
tsrisk_log_fn logger_fn = nullptr;
void* logger_user = nullptr;

void emit(const std::string& message)
{
    std::lock_guard lock(logger_mutex);
    if (logger_fn) {
        logger_fn(message.c_str(), logger_user);
    }
}

template <typename Body>
tsrisk_status guarded(Body&& body)
{
    last_error.clear();
    try {
        body();
        return TSRISK_OK;
    } catch (const tsrisk::UsageError& e) {
        last_error = e.what();
        return TSRISK_ERR_USAGE;
    } catch (const tsrisk::NumericError& e) {
        last_error = e.what();
        return TSRISK_ERR_NUMERIC;
    } catch (const tsrisk::Error& e) {
        last_error = e.what();
        return TSRISK_ERR_DATA;
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return TSRISK_ERR_INTERNAL;
    } catch (const std::exception& e) {
        last_error = e.what();
        return TSRISK_ERR_INTERNAL;
    } catch (...) {
        last_error = "unknown failure";
        return TSRISK_ERR_INTERNAL;
    }
}

void require(const void* p, const char* what)
{
    if (p == nullptr) {
        throw tsrisk::UsageError(std::string(what) + " must not be NULL");
    }
}

std::vector<std::filesystem::path> paths(const char* const* items, size_t n, const char* what)
{
    if (n > 0) {
        require(items, what);
    }
    std::vector<std::filesystem::path> out;
    for (size_t i = 0; i < n; ++i) {
        require(items[i], what);
        out.emplace_back(items[i]);
    }
    return out;
}

} // namespace

extern "C" {

const char* tsrisk_version(void)
{
    return "0.1.0";
}

const char* tsrisk_last_error(void)
{
    return last_error.c_str();
}

tsrisk_status tsrisk_config_load(const char* path, tsrisk_config** out)
{
    return guarded([&] {
        require(out, "out");
        *out = nullptr;
        tsrisk::RunConfig c;
        if (path) {
            c = tsrisk::load_run_config(path);
        } else {
            c.resolve();
        }
        *out = new tsrisk_config{std::move(c)};
    });
}

tsrisk_status tsrisk_config_parse(const char* json_text, tsrisk_config** out)
{
    return guarded([&] {
        require(json_text, "json_text");
        require(out, "out");
        *out = nullptr;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(json_text);
        } catch (const nlohmann::json::parse_error& e) {
            throw tsrisk::UsageError(std::string("config: not valid JSON: ") + e.what());
        }
        *out = new tsrisk_config{tsrisk::run_config_from_json(j)};
    });
}

tsrisk_status tsrisk_config_set(tsrisk_config* config, const char* key, const char* value)
{
    return guarded([&] {
        require(config, "config");
        require(key, "key");
        require(value, "value");
        tsrisk::RunConfig copy = config->value;
        tsrisk::apply_override(copy, key, value);
        config->value = std::move(copy);
    });
}

tsrisk_status tsrisk_config_to_json(const tsrisk_config* config, char** out)
{
    return guarded([&] {
        require(config, "config");
        require(out, "out");
        const std::string text = tsrisk::to_json(config->value).dump(2);
        char* buf = new char[text.size() + 1];
        std::memcpy(buf, text.c_str(), text.size() + 1);
        *out = buf;
    });
}

void tsrisk_config_free(tsrisk_config* config)
{
    delete config;
}

void tsrisk_string_free(char* text)
{
    delete[] text;
}

void tsrisk_set_logger(tsrisk_log_fn fn, void* user)
{
    std::lock_guard lock(logger_mutex);
    logger_fn = fn;
    logger_user = user;
}

tsrisk_status tsrisk_synth(const tsrisk_config* config, const char* out_dir)
{
    return guarded([&] {
        require(config, "config");
        require(out_dir, "out_dir");
        tsrisk::commands::synth(config->value, out_dir, emit);
    });
}

tsrisk_status tsrisk_preprocess(const tsrisk_config* config, const char* readings, const char* labels,
                                const char* out_dir)
{
    return guarded([&] {
        require(config, "config");
        require(readings, "readings");
        require(out_dir, "out_dir");
        std::optional<std::filesystem::path> label_path;
        if (labels) {
            label_path = labels;
        }
        tsrisk::commands::preprocess(config->value, readings, label_path, out_dir, emit);
    });
}

tsrisk_status tsrisk_train(const tsrisk_config* config, const char* dataset, const char* out_dir)
{
    return guarded([&] {
        require(config, "config");
        require(dataset, "dataset");
        require(out_dir, "out_dir");
        tsrisk::commands::train(config->value, dataset, out_dir, emit);
    });
}

tsrisk_status tsrisk_infer(const tsrisk_config* config, const char* dataset, const char* checkpoint,
                           const char* out_dir)
{
    return guarded([&] {
        require(config, "config");
        require(dataset, "dataset");
        require(checkpoint, "checkpoint");
        require(out_dir, "out_dir");
        tsrisk::commands::infer(config->value, dataset, checkpoint, out_dir, emit);
    });
}

tsrisk_status tsrisk_recluster(const tsrisk_config* config, const char* report, const char* out_dir)
{
    return guarded([&] {
        require(config, "config");
        require(report, "report");
        require(out_dir, "out_dir");
        tsrisk::commands::recluster(config->value, report, out_dir, emit);
    });
}

tsrisk_status tsrisk_evaluate(const tsrisk_config* config, const char* const* reports, size_t n_reports,
                              const char* labels, const char* out_dir)
{
    return guarded([&] {
        require(config, "config");
        require(labels, "labels");
        require(out_dir, "out_dir");
        tsrisk::commands::evaluate(config->value, paths(reports, n_reports, "reports"), labels, out_dir, emit);
    });
}

tsrisk_status tsrisk_representativeness(const tsrisk_config* config, const char* dataset, const char* out_dir)
{
    return guarded([&] {
        require(config, "config");
        require(dataset, "dataset");
        require(out_dir, "out_dir");
        tsrisk::commands::representativeness(config->value, dataset, out_dir, emit);
    });
}

tsrisk_status tsrisk_plot(const tsrisk_config* config, const char* const* manifests, size_t n_manifests,
                          const char* report, const char* labels, const char* out_dir)
{
    return guarded([&] {
        require(config, "config");
        require(out_dir, "out_dir");
        std::optional<std::filesystem::path> report_path;
        std::optional<std::filesystem::path> label_path;
        if (report) {
            report_path = report;
        }
        if (labels) {
            label_path = labels;
        }
        tsrisk::commands::plot(config->value, paths(manifests, n_manifests, "manifests"), report_path, label_path,
                               out_dir, emit);
    });
}

tsrisk_status tsrisk_dataset_load(const char* path, tsrisk_dataset** out)
{
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = nullptr;
        *out = new tsrisk_dataset{tsrisk::load_dataset(path)};
    });
}

size_t tsrisk_dataset_rows(const tsrisk_dataset* dataset)
{
    return dataset ? dataset->value.size() : 0;
}

size_t tsrisk_dataset_seq_len(const tsrisk_dataset* dataset)
{
    return dataset ? dataset->value.seq_len() : 0;
}

tsrisk_status tsrisk_dataset_row(const tsrisk_dataset* dataset, size_t index, double* values, size_t capacity)
{
    return guarded([&] {
        require(dataset, "dataset");
        require(values, "values");
        const tsrisk::NormalizedDataset& ds = dataset->value;
        if (index >= ds.size()) {
            throw tsrisk::UsageError("row " + std::to_string(index) + " out of range");
        }
        if (capacity < ds.seq_len()) {
            throw tsrisk::UsageError("buffer holds " + std::to_string(capacity) + " values, need " +
                                     std::to_string(ds.seq_len()));
        }
        const auto row = ds.series.row(index);
        std::copy(row.begin(), row.end(), values);
    });
}

const char* tsrisk_dataset_account(const tsrisk_dataset* dataset, size_t index)
{
    if (!dataset || index >= dataset->value.size()) {
        return nullptr;
    }
    return dataset->value.accounts[index].c_str();
}

int tsrisk_dataset_is_labeled(const tsrisk_dataset* dataset, size_t index)
{
    if (!dataset || index >= dataset->value.size()) {
        return 0;
    }
    return dataset->value.labeled[index] ? 1 : 0;
}

void tsrisk_dataset_free(tsrisk_dataset* dataset)
{
    delete dataset;
}

tsrisk_status tsrisk_model_load(const char* path, tsrisk_model** out)
{
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = nullptr;
        *out = new tsrisk_model{tsrisk::load_model(path)};
    });
}

const char* tsrisk_model_name(const tsrisk_model* model)
{
    return model ? model->value.spec().name.c_str() : nullptr;
}

size_t tsrisk_model_seq_len(const tsrisk_model* model)
{
    return model ? model->value.spec().seq_len() : 0;
}

tsrisk_status tsrisk_model_risk_scores(const tsrisk_model* model, const tsrisk_dataset* dataset, double* scores,
                                       size_t capacity)
{
    return guarded([&] {
        require(model, "model");
        require(dataset, "dataset");
        require(scores, "scores");
        const tsrisk::NormalizedDataset& ds = dataset->value;
        if (capacity < ds.size()) {
            throw tsrisk::UsageError("score buffer holds " + std::to_string(capacity) + " values, need " +
                                     std::to_string(ds.size()));
        }
        if (model->value.spec().seq_len() != ds.seq_len()) {
            throw tsrisk::DataError("model expects series of length " +
                                    std::to_string(model->value.spec().seq_len()) + ", dataset has " +
                                    std::to_string(ds.seq_len()));
        }
        const std::vector<double> s = model->value.risk_scores(ds.series);
        std::copy(s.begin(), s.end(), scores);
    });
}

void tsrisk_model_free(tsrisk_model* model)
{
    delete model;
}

} // extern "C"
