#pragma once
// The command layer behind the CLI. Each command validates its inputs,
// creates the output directory if needed, and writes every file atomically;
// the resolved configuration is written as config.<command>.json.

#include "tsrisk/run_config.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace tsrisk::commands {

namespace fs = std::filesystem;

/// Informational messages (warnings, per-epoch progress).
using Logger = std::function<void(const std::string&)>;

/// readings.csv, labels.txt, synth_manifest.json
void synth(const RunConfig& config, const fs::path& out, const Logger& log = {});

/// dataset.tsr, provenance.json
void preprocess(const RunConfig& config, const fs::path& readings, const std::optional<fs::path>& labels,
                const fs::path& out, const Logger& log = {});

/// model.ckpt, train_manifest.json
void train(const RunConfig& config, const fs::path& dataset, const fs::path& out, const Logger& log = {});

/// report.csv, clusters.json
void infer(const RunConfig& config, const fs::path& dataset, const fs::path& checkpoint, const fs::path& out,
           const Logger& log = {});

/// Re-slices an existing report with the configured fraction: report.csv, clusters.json
void recluster(const RunConfig& config, const fs::path& report, const fs::path& out, const Logger& log = {});

/// metrics.json
void evaluate(const RunConfig& config, const std::vector<fs::path>& reports, const fs::path& labels,
              const fs::path& out, const Logger& log = {});

/// representativeness.json
void representativeness(const RunConfig& config, const fs::path& dataset, const fs::path& out,
                        const Logger& log = {});

/// loss_curves.svg from training manifests; cluster_labels.svg from a
/// report plus labels.
void plot(const RunConfig& config, const std::vector<fs::path>& manifests, const std::optional<fs::path>& report,
          const std::optional<fs::path>& labels, const fs::path& out, const Logger& log = {});

} // namespace tsrisk::commands
