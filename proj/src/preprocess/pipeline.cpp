#include "tsrisk/preprocess.hpp"

#include "tsrisk/errors.hpp"
#include "tsrisk/fingerprint.hpp"

#include <cmath>
#include <set>

namespace tsrisk {

namespace {

YearMonth year_month_from_json(const nlohmann::json& j, const char* key)
{
    const auto ym = parse_year_month(j.get<std::string>());
    if (!ym) {
        throw UsageError(std::string("pipeline config: ") + key + " must be YYYY-MM");
    }
    return *ym;
}

} // namespace

void PipelineConfig::validate() const
{
    if (horizon.months() == 0) {
        throw UsageError("pipeline config: horizon end precedes its start");
    }
    if (!(outlier_cap > 0.0) || !std::isfinite(outlier_cap)) {
        throw UsageError("pipeline config: outlier_cap must be a positive number");
    }
    if (min_len < 1 || target_len < 1) {
        throw UsageError("pipeline config: min_len and target_len must be >= 1");
    }
}

nlohmann::json to_json(const PipelineConfig& c)
{
    return {
        {"horizon_start", format_year_month(c.horizon.first)},
        {"horizon_end", format_year_month(c.horizon.last)},
        {"outlier_cap", c.outlier_cap},
        {"min_len", c.min_len},
        {"target_len", c.target_len},
        {"strict", c.strict},
    };
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j)
{
    if (!j.is_object()) {
        throw UsageError("pipeline config: expected an object");
    }
    PipelineConfig c;
    try {
        for (const auto& item : j.items()) {
            const std::string& key = item.key();
            const nlohmann::json& v = item.value();
            if (key == "horizon_start") {
                c.horizon.first = year_month_from_json(v, "horizon_start");
            } else if (key == "horizon_end") {
                c.horizon.last = year_month_from_json(v, "horizon_end");
            } else if (key == "outlier_cap") {
                c.outlier_cap = v.get<double>();
            } else if (key == "min_len") {
                c.min_len = v.get<std::size_t>();
            } else if (key == "target_len") {
                c.target_len = v.get<std::size_t>();
            } else if (key == "strict") {
                c.strict = v.get<bool>();
            } else {
                throw UsageError("pipeline config: unknown key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("pipeline config: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json to_json(const ProvenanceReport& r)
{
    return {
        {"input_records", r.input_records},
        {"malformed_records", r.malformed_records},
        {"dropped_outliers", r.dropped_outliers},
        {"outside_horizon", r.outside_horizon},
        {"input_accounts", r.input_accounts},
        {"removed_empty", r.removed_empty},
        {"removed_zero", r.removed_zero},
        {"removed_short", r.removed_short},
        {"truncated", r.truncated},
        {"padded", r.padded},
        {"output_series", r.output_series},
        {"labels_given", r.labels_given},
        {"labels_unknown", r.labels_unknown},
        {"labeled_removed", r.labeled_removed},
        {"labeled_output", r.labeled_output},
    };
}

ProvenanceReport provenance_from_json(const nlohmann::json& j)
{
    ProvenanceReport r;
    auto get = [&](const char* key, std::size_t& field) { field = j.at(key).get<std::size_t>(); };
    get("input_records", r.input_records);
    get("malformed_records", r.malformed_records);
    get("dropped_outliers", r.dropped_outliers);
    get("outside_horizon", r.outside_horizon);
    get("input_accounts", r.input_accounts);
    get("removed_empty", r.removed_empty);
    get("removed_zero", r.removed_zero);
    get("removed_short", r.removed_short);
    get("truncated", r.truncated);
    get("padded", r.padded);
    get("output_series", r.output_series);
    get("labels_given", r.labels_given);
    get("labels_unknown", r.labels_unknown);
    get("labeled_removed", r.labeled_removed);
    get("labeled_output", r.labeled_output);
    return r;
}

NormalizedDataset run_pipeline(std::span<const RawReading> records, const std::vector<std::string>& labels,
                               const PipelineConfig& config)
{
    config.validate();
    ProvenanceReport prov;
    prov.input_records = records.size();

    // step 1: account x month matrix, outliers removed
    const ConsumptionMatrix matrix = ingest_readings(records, config.horizon, config.outlier_cap);
    prov.dropped_outliers = matrix.dropped_outliers;
    prov.outside_horizon = matrix.outside_horizon;
    prov.input_accounts = matrix.accounts.size();

    // step 2: label join
    const std::set<std::string> label_set(labels.begin(), labels.end());
    prov.labels_given = label_set.size();
    std::size_t labels_known = 0;
    for (const std::string& id : matrix.accounts) {
        labels_known += label_set.contains(id) ? 1 : 0;
    }
    prov.labels_unknown = label_set.size() - labels_known;

    // steps 3-4: interval averages, then proportions
    std::vector<std::vector<double>> normalized;
    std::vector<std::size_t> origin;
    for (std::size_t i = 0; i < matrix.accounts.size(); ++i) {
        const std::vector<double> averaged = interval_average(matrix.values.row(i));
        if (averaged.empty()) {
            ++prov.removed_empty;
            continue;
        }
        double total = 0.0;
        for (double v : averaged) {
            total += v;
        }
        if (total == 0.0) {
            ++prov.removed_zero;
            continue;
        }
        normalized.push_back(row_normalize(averaged));
        origin.push_back(i);
    }

    // step 5: cleaning
    const CleanResult cleaned = clean_filter(normalized, config.min_len);
    prov.removed_zero += cleaned.removed_zero;
    prov.removed_short += cleaned.removed_short;
    if (cleaned.kept.empty()) {
        throw DataError("no series survived cleaning");
    }

    // step 6: uniform length
    NormalizedDataset ds;
    Tensor raw({cleaned.kept.size(), config.target_len});
    for (std::size_t r = 0; r < cleaned.kept.size(); ++r) {
        const std::vector<double>& s = normalized[cleaned.kept[r]];
        prov.truncated += s.size() > config.target_len ? 1 : 0;
        prov.padded += s.size() < config.target_len ? 1 : 0;
        const std::vector<double> fixed = pad_prune(s, config.target_len);
        std::copy(fixed.begin(), fixed.end(), raw.row(r).begin());
        const std::string& id = matrix.accounts[origin[cleaned.kept[r]]];
        ds.accounts.push_back(id);
        ds.labeled.push_back(label_set.contains(id) ? 1 : 0);
        prov.labeled_output += ds.labeled.back();
    }
    prov.labeled_removed = labels_known - prov.labeled_output;
    prov.output_series = ds.accounts.size();

    // step 7: min-max scaling
    ds.scaler = MinMaxScaler::fit(raw);
    ds.series = ds.scaler.transform(raw);
    ds.config = config;
    ds.config_fingerprint = io::fingerprint_json(to_json(config));
    ds.provenance = prov;
    return ds;
}

} // namespace tsrisk
