#include "tsrisk/preprocess.hpp"

#include "tsrisk/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

namespace tsrisk {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) {
        s.remove_suffix(1);
    }
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    return s;
}

std::vector<std::string_view> split(std::string_view line, char sep)
{
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t next = line.find(sep, pos);
        out.push_back(trim(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos)));
        if (next == std::string_view::npos) {
            return out;
        }
        pos = next + 1;
    }
}

std::optional<double> parse_double(std::string_view text)
{
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        return std::nullopt;
    }
    return v;
}

std::ifstream open_input(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    return in;
}

} // namespace

std::optional<YearMonth> parse_year_month(std::string_view text)
{
    if (text.size() != 7 || text[4] != '-') {
        return std::nullopt;
    }
    int y = 0;
    int m = 0;
    const auto ry = std::from_chars(text.data(), text.data() + 4, y);
    const auto rm = std::from_chars(text.data() + 5, text.data() + 7, m);
    if (ry.ec != std::errc() || ry.ptr != text.data() + 4 || rm.ec != std::errc() || rm.ptr != text.data() + 7) {
        return std::nullopt;
    }
    if (m < 1 || m > 12) {
        return std::nullopt;
    }
    return YearMonth{y, m};
}

std::string format_year_month(YearMonth ym)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d", ym.year, ym.month);
    return buf;
}

std::size_t Horizon::months() const
{
    const long n = (last.year - first.year) * 12L + (last.month - first.month) + 1;
    return n > 0 ? static_cast<std::size_t>(n) : 0;
}

std::optional<std::size_t> Horizon::index_of(YearMonth ym) const
{
    const long i = (ym.year - first.year) * 12L + (ym.month - first.month);
    if (i < 0 || static_cast<std::size_t>(i) >= months()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(i);
}

YearMonth Horizon::month_at(std::size_t index) const
{
    const long m0 = first.month - 1 + static_cast<long>(index);
    return {first.year + static_cast<int>(m0 / 12), static_cast<int>(m0 % 12) + 1};
}

const char* source_name(Source s)
{
    switch (s) {
    case Source::manual: return "manual";
    case Source::telemeter_lv: return "telemeter_lv";
    case Source::telemeter_mv: return "telemeter_mv";
    }
    return "?";
}

std::optional<Source> parse_source(std::string_view text)
{
    if (text == "manual") {
        return Source::manual;
    }
    if (text == "telemeter_lv") {
        return Source::telemeter_lv;
    }
    if (text == "telemeter_mv") {
        return Source::telemeter_mv;
    }
    return std::nullopt;
}

ReadingsFile parse_readings(std::istream& in, bool strict)
{
    ReadingsFile file;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;

    auto issue = [&](std::string message) {
        if (strict) {
            throw DataError("readings line " + std::to_string(line_no) + ": " + message);
        }
        file.issues.push_back({line_no, std::move(message)});
    };

    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view text = trim(line);
        if (text.empty()) {
            continue;
        }
        if (!header_seen) {
            header_seen = true;
            const auto cols = split(text, ',');
            if (cols.size() != 4 || cols[0] != "account_id" || cols[1] != "date" || cols[2] != "value_kwh" ||
                cols[3] != "source") {
                throw DataError("readings line " + std::to_string(line_no) +
                                ": expected header 'account_id,date,value_kwh,source'");
            }
            continue;
        }
        const auto cols = split(text, ',');
        if (cols.size() != 4) {
            issue("expected 4 fields, got " + std::to_string(cols.size()));
            continue;
        }
        if (cols[0].empty()) {
            issue("empty account_id");
            continue;
        }
        const auto date = parse_year_month(cols[1]);
        if (!date) {
            issue("bad date '" + std::string(cols[1]) + "' (expected YYYY-MM)");
            continue;
        }
        const auto value = parse_double(cols[2]);
        if (!value || !std::isfinite(*value) || *value < 0.0) {
            issue("bad value_kwh '" + std::string(cols[2]) + "'");
            continue;
        }
        const auto source = parse_source(cols[3]);
        if (!source) {
            issue("unknown source '" + std::string(cols[3]) + "'");
            continue;
        }
        file.readings.push_back({std::string(cols[0]), *date, *value, *source});
    }
    return file;
}

ReadingsFile read_readings_file(const std::filesystem::path& path, bool strict)
{
    std::ifstream in = open_input(path);
    return parse_readings(in, strict);
}

void write_readings(std::ostream& out, std::span<const RawReading> readings)
{
    out << "account_id,date,value_kwh,source\n";
    char buf[64];
    for (const RawReading& r : readings) {
        const auto end = std::to_chars(buf, buf + sizeof buf, r.value_kwh).ptr;
        out << r.account_id << ',' << format_year_month(r.date) << ',' << std::string_view(buf, end - buf) << ','
            << source_name(r.source) << '\n';
    }
}

std::vector<std::string> parse_labels(std::istream& in)
{
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        const std::string_view id = trim(line);
        if (!id.empty()) {
            ids.emplace_back(id);
        }
    }
    return ids;
}

std::vector<std::string> read_labels_file(const std::filesystem::path& path)
{
    std::ifstream in = open_input(path);
    return parse_labels(in);
}

ConsumptionMatrix ingest_readings(std::span<const RawReading> records, const Horizon& horizon, double outlier_cap)
{
    if (!(outlier_cap > 0.0)) {
        throw UsageError("outlier_cap must be > 0");
    }
    const std::size_t months = horizon.months();
    if (months == 0) {
        throw UsageError("empty horizon");
    }

    ConsumptionMatrix m;
    m.horizon = horizon;
    std::map<std::string, std::vector<double>> rows;
    for (const RawReading& r : records) {
        std::vector<double>& row = rows.try_emplace(r.account_id, months, kMissing).first->second;
        if (r.value_kwh > outlier_cap) {
            ++m.dropped_outliers;
            continue;
        }
        const auto col = horizon.index_of(r.date);
        if (!col) {
            ++m.outside_horizon;
            continue;
        }
        double& cell = row[*col];
        cell = cell < 0.0 ? r.value_kwh : cell + r.value_kwh;
    }

    m.values = Tensor({rows.size(), months});
    std::size_t i = 0;
    for (auto& [id, row] : rows) {
        m.accounts.push_back(id);
        std::copy(row.begin(), row.end(), m.values.row(i).begin());
        ++i;
    }
    return m;
}

} // namespace tsrisk
