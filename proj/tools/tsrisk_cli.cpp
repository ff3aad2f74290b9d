// tsrisk: synth -> preprocess -> train -> infer -> evaluate, plus cluster,
// represent and report. Talks to the library through the C interface only.

#include "tsrisk/tsrisk.h"

#include <CLI11.hpp>

#include <cstdio>
#include <functional>
#include <list>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace {

struct ConfigDeleter {
    void operator()(tsrisk_config* c) const { tsrisk_config_free(c); }
};
using ConfigPtr = std::unique_ptr<tsrisk_config, ConfigDeleter>;

int fail(tsrisk_status status)
{
    std::fprintf(stderr, "tsrisk: error: %s\n", tsrisk_last_error());
    return static_cast<int>(status);
}

void log_line(const char* message, void*)
{
    std::fprintf(stderr, "%s\n", message);
}

std::vector<const char*> c_strings(const std::vector<std::string>& items)
{
    std::vector<const char*> out;
    for (const std::string& s : items) {
        out.push_back(s.c_str());
    }
    return out;
}

const char* opt(const std::optional<std::string>& s)
{
    return s ? s->c_str() : nullptr;
}

// Flags shared by every subcommand, applied on top of --config in a fixed order.
struct Common {
    std::optional<std::string> config;
    std::optional<std::string> out;
    // A list, so the slots handed to CLI11 never move.
    std::list<std::pair<std::string, std::optional<std::string>>> overrides;
    bool strict = false;

    std::optional<std::string>& slot(const std::string& key)
    {
        overrides.emplace_back(key, std::nullopt);
        return overrides.back().second;
    }
};

void add_common(CLI::App* cmd, Common& c)
{
    cmd->add_option("--config", c.config, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--out", c.out, "Output directory (created if missing)")->required();
    cmd->add_option("--seed", c.slot("seed"), "Seed for every random decision");
}

int with_config(Common& c, const std::function<tsrisk_status(const tsrisk_config*)>& run)
{
    tsrisk_config* raw = nullptr;
    if (const tsrisk_status s = tsrisk_config_load(opt(c.config), &raw); s != TSRISK_OK) {
        return fail(s);
    }
    ConfigPtr config(raw);
    for (const auto& [key, value] : c.overrides) {
        if (value) {
            if (const tsrisk_status s = tsrisk_config_set(config.get(), key.c_str(), value->c_str()); s != TSRISK_OK) {
                return fail(s);
            }
        }
    }
    if (c.strict) {
        if (const tsrisk_status s = tsrisk_config_set(config.get(), "strict", "true"); s != TSRISK_OK) {
            return fail(s);
        }
    }
    if (const tsrisk_status s = run(config.get()); s != TSRISK_OK) {
        return fail(s);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Risk estimation on sparse, irregularly sampled consumption series"};
    app.require_subcommand(1);
    app.set_version_flag("--version", tsrisk_version());

    Common synth_c, pre_c, train_c, infer_c, cluster_c, eval_c, rep_c, report_c;
    std::string readings, dataset, checkpoint, report_in;
    std::optional<std::string> labels, report_opt, labels_opt;
    std::string eval_labels;
    std::vector<std::string> reports, manifests;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic readings/labels pair");
    add_common(synth, synth_c);

    auto* pre = app.add_subcommand("preprocess", "Turn raw readings into a normalized dataset");
    add_common(pre, pre_c);
    pre->add_option("--readings", readings, "Readings CSV")->required()->check(CLI::ExistingFile);
    pre->add_option("--labels", labels, "Labeled account ids, one per line")->check(CLI::ExistingFile);
    pre->add_flag("--strict", pre_c.strict, "Fail on the first malformed record");

    auto* train = app.add_subcommand("train", "Train a model on a normalized dataset");
    add_common(train, train_c);
    train->add_option("--dataset", dataset, "Normalized dataset")->required()->check(CLI::ExistingFile);
    train->add_option("--model", train_c.slot("model"), "tr-la, tr-fu, conv or ff-nn");
    train->add_option("--window", train_c.slot("window"), "Local attention window, or 'full'");
    train->add_option("--epochs", train_c.slot("epochs"), "Epochs (default depends on --subset)");
    train->add_option("--batch-size", train_c.slot("batch-size"), "Mini-batch size");
    train->add_option("--subset", train_c.slot("subset"), "full, 100k, 10k or a count");
    train->add_option("--fraction", train_c.slot("classifier-fraction"), "Classifier: share of labels used");
    train->add_option("--lanes", train_c.slot("lanes"), "Gradient accumulation lanes");

    auto* infer = app.add_subcommand("infer", "Score a dataset and form risk clusters");
    add_common(infer, infer_c);
    infer->add_option("--dataset", dataset, "Normalized dataset")->required()->check(CLI::ExistingFile);
    infer->add_option("--checkpoint", checkpoint, "Trained model")->required()->check(CLI::ExistingFile);
    infer->add_option("--fraction", infer_c.slot("fraction"), "Cluster size as a share of the dataset");

    auto* cluster = app.add_subcommand("cluster", "Re-form clusters of an existing risk report");
    add_common(cluster, cluster_c);
    cluster->add_option("--report", report_in, "Risk report CSV")->required()->check(CLI::ExistingFile);
    cluster->add_option("--fraction", cluster_c.slot("fraction"), "Cluster size as a share of the dataset");

    auto* eval = app.add_subcommand("evaluate", "Recall, precision and consistency of risk reports");
    add_common(eval, eval_c);
    eval->add_option("--report", reports, "Risk report CSV (repeat for consistency)")->required()->check(
        CLI::ExistingFile);
    eval->add_option("--labels", eval_labels, "Labeled account ids")->required()->check(CLI::ExistingFile);

    auto* rep = app.add_subcommand("represent", "Check whether a training subset represents the whole set");
    add_common(rep, rep_c);
    rep->add_option("--dataset", dataset, "Normalized dataset")->required()->check(CLI::ExistingFile);
    rep->add_option("--model", rep_c.slot("model"), "tr-la, tr-fu or conv");
    rep->add_option("--window", rep_c.slot("window"), "Local attention window, or 'full'");
    rep->add_option("--epochs", rep_c.slot("epochs"), "Epochs for both trainings");
    rep->add_option("--batch-size", rep_c.slot("batch-size"), "Mini-batch size");
    rep->add_option("--subset", rep_c.slot("represent-subset"), "Subset size: a count, 10k or 100k");
    rep->add_option("--threshold", rep_c.slot("threshold"), "Threshold t on the error difference");

    auto* report = app.add_subcommand("report", "Render loss curves and per-cluster label counts as SVG");
    add_common(report, report_c);
    report->add_option("--manifest", manifests, "train_manifest.json (repeatable)")->check(CLI::ExistingFile);
    report->add_option("--report", report_opt, "Risk report CSV")->check(CLI::ExistingFile);
    report->add_option("--labels", labels_opt, "Labeled account ids")->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return TSRISK_ERR_USAGE;
    }

    tsrisk_set_logger(log_line, nullptr);

    if (synth->parsed()) {
        return with_config(synth_c, [&](const tsrisk_config* c) { return tsrisk_synth(c, synth_c.out->c_str()); });
    }
    if (pre->parsed()) {
        return with_config(pre_c, [&](const tsrisk_config* c) {
            return tsrisk_preprocess(c, readings.c_str(), opt(labels), pre_c.out->c_str());
        });
    }
    if (train->parsed()) {
        return with_config(train_c,
                           [&](const tsrisk_config* c) { return tsrisk_train(c, dataset.c_str(), train_c.out->c_str()); });
    }
    if (infer->parsed()) {
        return with_config(infer_c, [&](const tsrisk_config* c) {
            return tsrisk_infer(c, dataset.c_str(), checkpoint.c_str(), infer_c.out->c_str());
        });
    }
    if (cluster->parsed()) {
        return with_config(cluster_c, [&](const tsrisk_config* c) {
            return tsrisk_recluster(c, report_in.c_str(), cluster_c.out->c_str());
        });
    }
    if (eval->parsed()) {
        return with_config(eval_c, [&](const tsrisk_config* c) {
            const std::vector<const char*> r = c_strings(reports);
            return tsrisk_evaluate(c, r.data(), r.size(), eval_labels.c_str(), eval_c.out->c_str());
        });
    }
    if (rep->parsed()) {
        return with_config(rep_c, [&](const tsrisk_config* c) {
            return tsrisk_representativeness(c, dataset.c_str(), rep_c.out->c_str());
        });
    }
    if (report->parsed()) {
        return with_config(report_c, [&](const tsrisk_config* c) {
            const std::vector<const char*> m = c_strings(manifests);
            return tsrisk_plot(c, m.data(), m.size(), opt(report_opt), opt(labels_opt), report_c.out->c_str());
        });
    }
    return TSRISK_ERR_USAGE;
}
