#pragma once
// Raw irregular readings -> fixed-length normalized series.

#include "tsrisk/tensor.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tsrisk {

/// Marks a month with no measurement in a ConsumptionMatrix.
inline constexpr double kMissing = -1.0;
inline constexpr std::uint32_t kDatasetFormatVersion = 1;

struct YearMonth {
    int year = 0;
    int month = 0; // 1..12

    auto operator<=>(const YearMonth&) const = default;
};

/// "YYYY-MM"; nullopt when malformed.
std::optional<YearMonth> parse_year_month(std::string_view text);
std::string format_year_month(YearMonth ym);

/// Inclusive range of calendar months.
struct Horizon {
    YearMonth first{2018, 1};
    YearMonth last{2022, 12};

    std::size_t months() const;
    std::optional<std::size_t> index_of(YearMonth ym) const;
    YearMonth month_at(std::size_t index) const;
};

enum class Source : std::uint8_t { manual, telemeter_lv, telemeter_mv };
const char* source_name(Source s);
std::optional<Source> parse_source(std::string_view text);

struct RawReading {
    std::string account_id;
    YearMonth date;
    double value_kwh = 0.0;
    Source source = Source::manual;
};

struct ParseIssue {
    std::size_t line = 0;
    std::string message;
};

struct ReadingsFile {
    std::vector<RawReading> readings;
    std::vector<ParseIssue> issues;
};

/// Header `account_id,date,value_kwh,source`. Malformed records are skipped
/// and listed in `issues`, or raise DataError with the line number when
/// `strict` is set.
ReadingsFile parse_readings(std::istream& in, bool strict);
ReadingsFile read_readings_file(const std::filesystem::path& path, bool strict);
void write_readings(std::ostream& out, std::span<const RawReading> readings);

/// One account id per line; blank lines ignored.
std::vector<std::string> parse_labels(std::istream& in);
std::vector<std::string> read_labels_file(const std::filesystem::path& path);

/// Rows are accounts in ascending id order, columns the months of the
/// horizon. Missing months hold kMissing.
struct ConsumptionMatrix {
    Horizon horizon;
    std::vector<std::string> accounts;
    Tensor values;
    std::size_t dropped_outliers = 0;
    std::size_t outside_horizon = 0;
};

/// Readings above `outlier_cap` are dropped, as are readings outside the
/// horizon (both counted); same-month readings of one account are summed.
/// Every account seen in `records` gets a row, even if all its readings
/// were dropped.
ConsumptionMatrix ingest_readings(std::span<const RawReading> records, const Horizon& horizon, double outlier_cap);

/// Spreads each measurement evenly over the months since the previous one.
/// The first interval starts at `start` (a column index). The series runs
/// from `start` to the last measurement; a row without measurements gives
/// an empty series.
std::vector<double> interval_average(std::span<const double> row, std::size_t start = 0);

/// x / sum(x). DataError on an empty or zero-sum series.
std::vector<double> row_normalize(std::span<const double> series);

struct CleanResult {
    std::vector<std::size_t> kept; // indices into the input, ascending
    std::size_t removed_zero = 0;
    std::size_t removed_short = 0;
};

/// Drops all-zero series and series shorter than `min_len`.
CleanResult clean_filter(const std::vector<std::vector<double>>& series, std::size_t min_len = 7);

/// Keeps the most recent `target_len` steps, or appends zeros.
std::vector<double> pad_prune(std::span<const double> series, std::size_t target_len = 58);

struct MinMaxScaler {
    std::vector<double> min;
    std::vector<double> max;

    static MinMaxScaler fit(const Tensor& data);
    /// (x - min) / (max - min) per column; constant columns give 0.
    Tensor transform(const Tensor& data) const;
};

struct PipelineConfig {
    Horizon horizon;
    double outlier_cap = 1e6;
    std::size_t min_len = 7;
    std::size_t target_len = 58;
    bool strict = false;

    void validate() const;
};

nlohmann::json to_json(const PipelineConfig& config);
/// Strict: unknown keys raise UsageError. Missing keys keep defaults.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

/// Account counts after each stage.
/// input_accounts == output_series + removed_empty + removed_zero + removed_short.
struct ProvenanceReport {
    std::size_t input_records = 0;
    std::size_t malformed_records = 0;
    std::size_t dropped_outliers = 0;
    std::size_t outside_horizon = 0;
    std::size_t input_accounts = 0;
    std::size_t removed_empty = 0;
    std::size_t removed_zero = 0;
    std::size_t removed_short = 0;
    std::size_t truncated = 0;
    std::size_t padded = 0;
    std::size_t output_series = 0;
    std::size_t labels_given = 0;
    std::size_t labels_unknown = 0;
    std::size_t labeled_removed = 0;
    std::size_t labeled_output = 0;
};

nlohmann::json to_json(const ProvenanceReport& report);
ProvenanceReport provenance_from_json(const nlohmann::json& j);

struct NormalizedDataset {
    std::vector<std::string> accounts;
    std::vector<std::uint8_t> labeled;
    Tensor series; // N x target_len
    MinMaxScaler scaler;
    PipelineConfig config;
    std::string config_fingerprint;
    ProvenanceReport provenance;

    std::size_t size() const { return accounts.size(); }
    std::size_t seq_len() const { return series.cols(); }
    std::size_t labeled_count() const;
};

NormalizedDataset run_pipeline(std::span<const RawReading> records, const std::vector<std::string>& labels,
                               const PipelineConfig& config);

/// Rows `indices` in the given order; scaler and config carried over.
NormalizedDataset subset(const NormalizedDataset& dataset, std::span<const std::size_t> indices);

void save_dataset(const std::filesystem::path& path, const NormalizedDataset& dataset);
NormalizedDataset load_dataset(const std::filesystem::path& path);

} // namespace tsrisk
