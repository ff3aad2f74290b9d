#include "tsrisk/preprocess.hpp"

#include "tsrisk/errors.hpp"

#include <algorithm>

namespace tsrisk {

std::vector<double> interval_average(std::span<const double> row, std::size_t start)
{
    std::vector<double> series;
    std::size_t from = start; // first month of the current interval
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (row[j] < 0.0) {
            continue;
        }
        if (j < start) {
            throw UsageError("interval_average: measurement at column " + std::to_string(j) +
                             " precedes the series start " + std::to_string(start));
        }
        const std::size_t length = j - from + 1;
        const double share = row[j] / static_cast<double>(length);
        series.insert(series.end(), length, share);
        from = j + 1;
    }
    return series;
}

std::vector<double> row_normalize(std::span<const double> series)
{
    if (series.empty()) {
        throw DataError("row_normalize: empty series");
    }
    double total = 0.0;
    for (double v : series) {
        total += v;
    }
    if (total == 0.0) {
        throw DataError("row_normalize: series sums to zero");
    }
    std::vector<double> out(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        out[i] = series[i] / total;
    }
    return out;
}

CleanResult clean_filter(const std::vector<std::vector<double>>& series, std::size_t min_len)
{
    CleanResult result;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        if (std::all_of(s.begin(), s.end(), [](double v) { return v == 0.0; })) {
            ++result.removed_zero;
        } else if (s.size() < min_len) {
            ++result.removed_short;
        } else {
            result.kept.push_back(i);
        }
    }
    return result;
}

std::vector<double> pad_prune(std::span<const double> series, std::size_t target_len)
{
    if (series.size() >= target_len) {
        return {series.end() - static_cast<std::ptrdiff_t>(target_len), series.end()};
    }
    std::vector<double> out(series.begin(), series.end());
    out.resize(target_len, 0.0);
    return out;
}

MinMaxScaler MinMaxScaler::fit(const Tensor& data)
{
    if (data.rank() != 2 || data.rows() == 0 || data.cols() == 0) {
        throw DataError("min-max fit: need a non-empty 2-D dataset, got " + shape_string(data.shape()));
    }
    MinMaxScaler s;
    const auto first = data.row(0);
    s.min.assign(first.begin(), first.end());
    s.max.assign(first.begin(), first.end());
    for (std::size_t r = 1; r < data.rows(); ++r) {
        const auto row = data.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) {
            s.min[c] = std::min(s.min[c], row[c]);
            s.max[c] = std::max(s.max[c], row[c]);
        }
    }
    return s;
}

Tensor MinMaxScaler::transform(const Tensor& data) const
{
    if (data.rank() != 2 || data.cols() != min.size()) {
        throw ShapeError("min-max transform: dataset " + shape_string(data.shape()) + ", scaler fitted on " +
                         std::to_string(min.size()) + " columns");
    }
    Tensor out(data.shape());
    for (std::size_t r = 0; r < data.rows(); ++r) {
        for (std::size_t c = 0; c < min.size(); ++c) {
            const double range = max[c] - min[c];
            out.at(r, c) = range == 0.0 ? 0.0 : (data.at(r, c) - min[c]) / range;
        }
    }
    return out;
}

} // namespace tsrisk
