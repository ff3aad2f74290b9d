#include "tsrisk/commands.hpp"

#include "tsrisk/container.hpp"
#include "tsrisk/errors.hpp"
#include "tsrisk/fingerprint.hpp"
#include "tsrisk/models.hpp"
#include "tsrisk/plot.hpp"

#include <map>
#include <set>
#include <sstream>

namespace tsrisk::commands {

namespace {

void say(const Logger& log, const std::string& message)
{
    if (log) {
        log(message);
    }
}

void prepare_out(const fs::path& out)
{
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out)) {
        throw DataError("cannot create output directory " + out.string() + ": " + ec.message());
    }
}

void write_json(const fs::path& path, const nlohmann::json& j)
{
    io::write_file_atomic(path, j.dump(2) + "\n");
}

void write_config(const fs::path& out, const char* command, const RunConfig& config)
{
    write_json(out / (std::string("config.") + command + ".json"), to_json(config));
}

std::string file_fingerprint(const fs::path& path)
{
    return io::fingerprint_file(path);
}

ClusterAssignment make_clusters(const RunConfig& config, const ErrorRanking& ranking)
{
    return config.cluster_threshold ? threshold_clusters(ranking, *config.cluster_threshold)
                                    : fixed_size_clusters(ranking, config.cluster_fraction);
}

nlohmann::json cluster_summary(const RunConfig& config, const ClusterAssignment& clusters)
{
    nlohmann::json j = {{"sizes", clusters.sizes}, {"clusters", clusters.cluster_count()}};
    if (config.cluster_threshold) {
        j["threshold"] = *config.cluster_threshold;
    } else {
        j["fraction"] = config.cluster_fraction;
    }
    return j;
}

} // namespace

void synth(const RunConfig& config, const fs::path& out, const Logger& log)
{
    const SynthData data = generate(config.synth);
    std::ostringstream readings;
    write_readings(readings, data.readings);
    std::string labels;
    for (const std::string& id : data.labels) {
        labels += id + "\n";
    }

    std::map<std::string, std::size_t> profiles;
    std::map<std::string, std::size_t> cadences;
    for (const SynthAccount& a : data.accounts) {
        ++profiles[profile_name(a.profile)];
        ++cadences[cadence_name(a.cadence)];
    }

    prepare_out(out);
    io::write_file_atomic(out / "readings.csv", readings.str());
    io::write_file_atomic(out / "labels.txt", labels);
    write_json(out / "synth_manifest.json", {
                                                {"synth", to_json(config.synth)},
                                                {"accounts", data.accounts.size()},
                                                {"readings", data.readings.size()},
                                                {"labels", data.labels.size()},
                                                {"profiles", profiles},
                                                {"cadences", cadences},
                                                {"readings_fingerprint", io::fingerprint(readings.str())},
                                                {"labels_fingerprint", io::fingerprint(labels)},
                                            });
    write_config(out, "synth", config);
    say(log, "generated " + std::to_string(data.readings.size()) + " readings for " +
                 std::to_string(data.accounts.size()) + " accounts, " + std::to_string(data.labels.size()) +
                 " labeled");
}

void preprocess(const RunConfig& config, const fs::path& readings, const std::optional<fs::path>& labels,
                const fs::path& out, const Logger& log)
{
    const ReadingsFile file = read_readings_file(readings, config.pipeline.strict);
    for (std::size_t i = 0; i < file.issues.size() && i < 10; ++i) {
        say(log, "warning: " + readings.string() + " line " + std::to_string(file.issues[i].line) + ": " +
                     file.issues[i].message + " (skipped)");
    }
    if (file.issues.size() > 10) {
        say(log, "warning: " + std::to_string(file.issues.size() - 10) + " more malformed records skipped");
    }
    const std::vector<std::string> label_ids = labels ? read_labels_file(*labels) : std::vector<std::string>{};

    NormalizedDataset ds = run_pipeline(file.readings, label_ids, config.pipeline);
    ds.provenance.malformed_records = file.issues.size();
    if (ds.provenance.dropped_outliers > 0) {
        say(log, "warning: dropped " + std::to_string(ds.provenance.dropped_outliers) + " readings above the cap");
    }

    prepare_out(out);
    const fs::path dataset_path = out / "dataset.tsr";
    save_dataset(dataset_path, ds);
    write_json(out / "provenance.json", {
                                            {"provenance", to_json(ds.provenance)},
                                            {"pipeline", to_json(ds.config)},
                                            {"config_fingerprint", ds.config_fingerprint},
                                            {"dataset_fingerprint", file_fingerprint(dataset_path)},
                                            {"readings_fingerprint", file_fingerprint(readings)},
                                        });
    write_config(out, "preprocess", config);
    say(log, std::to_string(ds.size()) + " series of length " + std::to_string(ds.seq_len()) + " (" +
                 std::to_string(ds.labeled_count()) + " labeled)");
}

void train(const RunConfig& config, const fs::path& dataset, const fs::path& out, const Logger& log)
{
    const NormalizedDataset ds = load_dataset(dataset);
    const ModelSpec spec = resolve_model_spec(config, ds.seq_len());
    const auto on_epoch = [&](const EpochRecord& e) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "epoch %zu loss %.6e (%.1f s)", e.epoch, e.mean_loss, e.seconds);
        say(log, buf);
    };
    const TrainResult result = tsrisk::train(spec, ds, config.train, on_epoch);

    prepare_out(out);
    const fs::path checkpoint = out / "model.ckpt";
    save_checkpoint(checkpoint, spec, result.model.parameters());
    nlohmann::json train_json = to_json(config.train);
    train_json["epochs"] = result.epochs;
    write_json(out / "train_manifest.json", {
                                                {"model", to_json(spec)},
                                                {"train", train_json},
                                                {"seed", config.seed},
                                                {"dataset_fingerprint", file_fingerprint(dataset)},
                                                {"training_rows", result.rows.size()},
                                                {"history", to_json(result.history)},
                                                {"checkpoint_fingerprint", file_fingerprint(checkpoint)},
                                            });
    write_config(out, "train", config);
}

void infer(const RunConfig& config, const fs::path& dataset, const fs::path& checkpoint, const fs::path& out,
           const Logger& log)
{
    const NormalizedDataset ds = load_dataset(dataset);
    Model model = load_model(checkpoint);
    if (model.spec().seq_len() != ds.seq_len()) {
        throw DataError("checkpoint expects series of length " + std::to_string(model.spec().seq_len()) +
                        ", dataset has " + std::to_string(ds.seq_len()));
    }
    model.lanes = config.train.lanes;
    const std::vector<double> scores = model.risk_scores(ds.series);
    std::vector<std::pair<std::string, double>> errors;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        errors.emplace_back(ds.accounts[i], scores[i]);
    }
    const ErrorRanking ranking = rank_by_error(errors);
    const ClusterAssignment clusters = make_clusters(config, ranking);

    prepare_out(out);
    save_report(out / "report.csv", make_report(ranking, clusters));
    nlohmann::json summary = cluster_summary(config, clusters);
    summary["model"] = model.spec().name;
    summary["dataset_fingerprint"] = file_fingerprint(dataset);
    summary["checkpoint_fingerprint"] = file_fingerprint(checkpoint);
    write_json(out / "clusters.json", summary);
    write_config(out, "infer", config);
    say(log, "ranked " + std::to_string(ranking.size()) + " accounts into " +
                 std::to_string(clusters.cluster_count()) + " clusters");
}

void recluster(const RunConfig& config, const fs::path& report, const fs::path& out, const Logger& log)
{
    const RiskReport input = load_report(report);
    std::vector<std::pair<std::string, double>> errors;
    for (const ReportRow& r : input.rows) {
        errors.emplace_back(r.account_id, r.reconstruction_error);
    }
    const ErrorRanking ranking = rank_by_error(errors);
    const ClusterAssignment clusters = make_clusters(config, ranking);
    prepare_out(out);
    save_report(out / "report.csv", make_report(ranking, clusters));
    write_json(out / "clusters.json", cluster_summary(config, clusters));
    write_config(out, "cluster", config);
    say(log, std::to_string(clusters.cluster_count()) + " clusters");
}

void evaluate(const RunConfig& config, const std::vector<fs::path>& reports, const fs::path& labels,
              const fs::path& out, const Logger& log)
{
    if (reports.empty()) {
        throw UsageError("evaluate: at least one report is required");
    }
    std::vector<RiskReport> loaded;
    for (const fs::path& p : reports) {
        loaded.push_back(load_report(p));
    }
    nlohmann::json metrics = evaluate_reports(loaded, read_labels_file(labels), config.consistency_base);
    nlohmann::json names = nlohmann::json::array();
    for (const fs::path& p : reports) {
        names.push_back(p.string());
    }
    metrics["report_files"] = names;
    prepare_out(out);
    write_json(out / "metrics.json", metrics);
    write_config(out, "evaluate", config);
    say(log, "evaluated " + std::to_string(reports.size()) + " report(s)");
}

void representativeness(const RunConfig& config, const fs::path& dataset, const fs::path& out, const Logger& log)
{
    if (!config.representativeness_threshold) {
        throw UsageError("representativeness needs a threshold (--threshold or representativeness.threshold)");
    }
    const NormalizedDataset ds = load_dataset(dataset);
    const ModelSpec spec = resolve_model_spec(config, ds.seq_len());
    TrainConfig sub = config.train;
    sub.subset = config.representativeness_subset;
    const std::vector<std::size_t> rows = sample_training_subset(ds, sub);
    const Representativeness r =
        representativeness_delta(spec, ds, rows, config.train, *config.representativeness_threshold);
    prepare_out(out);
    write_json(out / "representativeness.json", {
                                                    {"model", to_json(spec)},
                                                    {"subset_rows", rows.size()},
                                                    {"re_full", r.re_full},
                                                    {"re_subset", r.re_subset},
                                                    {"delta", r.delta},
                                                    {"threshold", *config.representativeness_threshold},
                                                    {"representative", r.representative},
                                                });
    write_config(out, "representativeness", config);
    say(log, std::string("delta ") + std::to_string(r.delta) + (r.representative ? " (representative)" : ""));
}

void plot(const RunConfig& config, const std::vector<fs::path>& manifests, const std::optional<fs::path>& report,
          const std::optional<fs::path>& labels, const fs::path& out, const Logger& log)
{
    if (manifests.empty() && !report) {
        throw UsageError("report: give training manifests and/or a risk report");
    }
    if (report.has_value() != labels.has_value()) {
        throw UsageError("report: a risk report needs the labels file, and vice versa");
    }
    std::vector<plot::Series> curves;
    for (const fs::path& m : manifests) {
        try {
            const nlohmann::json j = nlohmann::json::parse(io::read_file(m));
            plot::Series s{m.parent_path().filename().string() + " " + j.at("model").at("name").get<std::string>(), {}};
            for (const auto& e : j.at("history").at("epochs")) {
                s.y.push_back(e.at("mean_loss").get<double>());
            }
            curves.push_back(std::move(s));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(m.string() + ": not a training manifest: " + e.what());
        }
    }
    std::vector<plot::Bar> bars;
    if (report) {
        const RiskReport r = load_report(*report);
        const std::vector<std::string> ids = read_labels_file(*labels);
        const std::set<std::string> labeled(ids.begin(), ids.end());
        const ClusterAssignment a = r.assignment();
        for (std::size_t k = 1; k <= a.cluster_count(); ++k) {
            double hits = 0;
            for (const std::string& id : a.members(k)) {
                hits += labeled.contains(id) ? 1 : 0;
            }
            bars.push_back({"C" + std::to_string(k), hits});
        }
    }
    prepare_out(out);
    if (!curves.empty()) {
        io::write_file_atomic(out / "loss_curves.svg", plot::line_chart("Training loss", "epoch", "mean MSE", curves));
    }
    if (!bars.empty()) {
        io::write_file_atomic(out / "cluster_labels.svg",
                              plot::bar_chart("Labeled accounts per risk cluster", "labeled accounts", bars));
    }
    write_config(out, "report", config);
    say(log, "wrote plots to " + out.string());
}

} // namespace tsrisk::commands
