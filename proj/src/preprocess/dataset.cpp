#include "tsrisk/preprocess.hpp"

#include "tsrisk/container.hpp"
#include "tsrisk/errors.hpp"

namespace tsrisk {

namespace {

constexpr const char* kDatasetKind = "dataset";

Tensor column(std::span<const double> values)
{
    return Tensor({values.size(), 1}, std::vector<double>(values.begin(), values.end()));
}

} // namespace

std::size_t NormalizedDataset::labeled_count() const
{
    std::size_t n = 0;
    for (std::uint8_t f : labeled) {
        n += f;
    }
    return n;
}

NormalizedDataset subset(const NormalizedDataset& dataset, std::span<const std::size_t> indices)
{
    NormalizedDataset out;
    out.scaler = dataset.scaler;
    out.config = dataset.config;
    out.config_fingerprint = dataset.config_fingerprint;
    out.provenance = dataset.provenance;
    for (std::size_t i : indices) {
        if (i >= dataset.size()) {
            throw UsageError("subset: row " + std::to_string(i) + " out of range");
        }
        out.accounts.push_back(dataset.accounts[i]);
        out.labeled.push_back(dataset.labeled[i]);
    }
    out.series = select_rows(dataset.series, indices);
    return out;
}

void save_dataset(const std::filesystem::path& path, const NormalizedDataset& ds)
{
    io::Container c;
    c.kind = kDatasetKind;
    c.format_version = kDatasetFormatVersion;
    c.metadata = {
        {"accounts", ds.accounts},
        {"pipeline", to_json(ds.config)},
        {"config_fingerprint", ds.config_fingerprint},
        {"provenance", to_json(ds.provenance)},
    };
    std::vector<double> flags(ds.labeled.begin(), ds.labeled.end());
    c.tensors.emplace_back("series", ds.series);
    c.tensors.emplace_back("labeled", column(flags));
    c.tensors.emplace_back("scaler.min", Tensor::row_vector(ds.scaler.min));
    c.tensors.emplace_back("scaler.max", Tensor::row_vector(ds.scaler.max));
    io::write_container(path, c);
}

NormalizedDataset load_dataset(const std::filesystem::path& path)
{
    const io::Container c = io::read_container(path, kDatasetKind);
    if (c.format_version != kDatasetFormatVersion) {
        throw FormatError(path.string() + ": unsupported dataset format_version " + std::to_string(c.format_version));
    }
    NormalizedDataset ds;
    try {
        ds.accounts = c.metadata.at("accounts").get<std::vector<std::string>>();
        ds.config = pipeline_config_from_json(c.metadata.at("pipeline"));
        ds.config_fingerprint = c.metadata.at("config_fingerprint").get<std::string>();
        ds.provenance = provenance_from_json(c.metadata.at("provenance"));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": bad dataset metadata: " + e.what());
    } catch (const UsageError& e) {
        throw FormatError(path.string() + ": bad dataset metadata: " + e.what());
    }
    ds.series = c.tensor("series");
    const Tensor& flags = c.tensor("labeled");
    const Tensor& lo = c.tensor("scaler.min");
    const Tensor& hi = c.tensor("scaler.max");
    const std::size_t n = ds.accounts.size();
    if (ds.series.rank() != 2 || ds.series.rows() != n || flags.size() != n || lo.size() != ds.series.cols() ||
        hi.size() != ds.series.cols()) {
        throw FormatError(path.string() + ": dataset tensors disagree with the account index");
    }
    for (double f : flags.values()) {
        if (f != 0.0 && f != 1.0) {
            throw FormatError(path.string() + ": label flags must be 0 or 1");
        }
        ds.labeled.push_back(f == 1.0 ? 1 : 0);
    }
    ds.scaler.min.assign(lo.values().begin(), lo.values().end());
    ds.scaler.max.assign(hi.values().begin(), hi.values().end());
    return ds;
}

} // namespace tsrisk
