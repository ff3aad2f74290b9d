#include "tsrisk/riskcluster.hpp"

#include "tsrisk/container.hpp"
#include "tsrisk/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace tsrisk {

namespace {

template <typename T>
bool parse_number(const std::string& text, T& value)
{
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    return ec == std::errc() && ptr == text.data() + text.size();
}

} // namespace

ClusterAssignment RiskReport::assignment() const
{
    ClusterAssignment a;
    for (const ReportRow& r : rows) {
        if (r.cluster == 0) {
            throw DataError("report row for '" + r.account_id + "' has cluster 0");
        }
        if (a.sizes.size() < r.cluster) {
            a.sizes.resize(r.cluster, 0);
        }
        ++a.sizes[r.cluster - 1];
        if (!a.cluster.emplace(r.account_id, r.cluster).second) {
            throw DataError("report lists account '" + r.account_id + "' twice");
        }
    }
    return a;
}

RiskReport make_report(const ErrorRanking& ranking, const ClusterAssignment& clusters)
{
    RiskReport report;
    report.rows.reserve(ranking.size());
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        const auto it = clusters.cluster.find(ranking[i].account_id);
        if (it == clusters.cluster.end()) {
            throw DataError("account '" + ranking[i].account_id + "' has no cluster");
        }
        report.rows.push_back({ranking[i].account_id, ranking[i].error, i + 1, it->second});
    }
    return report;
}

void write_report(std::ostream& out, const RiskReport& report)
{
    out << "account_id,reconstruction_error,rank,cluster\n";
    char buf[64];
    for (const ReportRow& r : report.rows) {
        const auto end = std::to_chars(buf, buf + sizeof buf, r.reconstruction_error).ptr;
        out << r.account_id << ',' << std::string_view(buf, end - buf) << ',' << r.rank << ',' << r.cluster << '\n';
    }
}

void save_report(const std::filesystem::path& path, const RiskReport& report)
{
    std::ostringstream out;
    write_report(out, report);
    io::write_file_atomic(path, out.str());
}

RiskReport load_report(const std::filesystem::path& path)
{
    std::istringstream in(io::read_file(path));
    std::string line;
    std::size_t line_no = 0;
    RiskReport report;
    auto fail = [&](const std::string& what) {
        throw DataError(path.string() + " line " + std::to_string(line_no) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line_no == 1) {
            if (line != "account_id,reconstruction_error,rank,cluster") {
                fail("expected header 'account_id,reconstruction_error,rank,cluster'");
            }
            continue;
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) {
            f.push_back(cell);
        }
        ReportRow row;
        if (f.size() != 4 || f[0].empty()) {
            fail("expected 4 fields");
        }
        row.account_id = f[0];
        if (!parse_number(f[1], row.reconstruction_error) || !parse_number(f[2], row.rank) ||
            !parse_number(f[3], row.cluster)) {
            fail("malformed number");
        }
        report.rows.push_back(std::move(row));
    }
    if (line_no == 0) {
        throw DataError(path.string() + ": empty report");
    }
    return report;
}

nlohmann::json evaluate_reports(std::span<const RiskReport> reports, const std::vector<std::string>& labels,
                                ConsistencyBase base)
{
    if (reports.empty()) {
        throw UsageError("evaluate: no reports given");
    }
    std::vector<ClusterAssignment> assignments;
    for (const RiskReport& r : reports) {
        assignments.push_back(r.assignment());
    }
    const ClusterAssignment& first = assignments.front();
    for (const ClusterAssignment& a : assignments) {
        if (a.cluster.size() != first.cluster.size() ||
            !std::equal(a.cluster.begin(), a.cluster.end(), first.cluster.begin(),
                        [](const auto& x, const auto& y) { return x.first == y.first; })) {
            throw DataError("evaluate: reports cover different account sets");
        }
    }

    std::set<std::string> labeled;
    for (const std::string& id : labels) {
        if (first.cluster.contains(id)) {
            labeled.insert(id);
        }
    }
    if (labeled.empty()) {
        throw DataError("evaluate: none of the labeled accounts appears in the reports");
    }

    nlohmann::json out;
    out["labels"] = {{"given", labels.size()}, {"matched", labeled.size()}};
    out["reports"] = nlohmann::json::array();
    for (const ClusterAssignment& a : assignments) {
        nlohmann::json clusters = nlohmann::json::array();
        for (std::size_t k = 1; k <= a.cluster_count(); ++k) {
            const std::vector<std::string> members = a.members(k);
            std::size_t tp = 0;
            for (const std::string& id : members) {
                tp += labeled.contains(id) ? 1 : 0;
            }
            clusters.push_back({
                {"cluster", k},
                {"size", members.size()},
                {"labeled", tp},
                {"recall", recall(members, labeled)},
                {"precision", members.empty() ? 0.0 : precision(members, labeled)},
            });
        }
        out["reports"].push_back({{"accounts", a.cluster.size()}, {"clusters", clusters}});
    }
    if (assignments.size() >= 2) {
        const ConsistencyResult c = consistency(assignments, base);
        out["consistency"] = {
            {"base", base == ConsistencyBase::first ? "first" : "union"},
            {"per_cluster_percent", c.per_cluster},
            {"average_percent", c.average},
        };
    }
    return out;
}

} // namespace tsrisk
