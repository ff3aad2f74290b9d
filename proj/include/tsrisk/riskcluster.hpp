#pragma once
// Ranking by reconstruction error, fixed-size risk clusters and their metrics.

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tsrisk {

struct RankedError {
    std::string account_id;
    double error = 0.0;
};

/// Descending error, ties broken by ascending account id.
using ErrorRanking = std::vector<RankedError>;

/// DataError on NaN or infinite errors and on duplicate ids.
ErrorRanking rank_by_error(std::span<const std::pair<std::string, double>> errors);
ErrorRanking rank_by_error(const std::map<std::string, double>& errors);

/// Cluster k (1-based) holds the accounts ranked in its slice.
struct ClusterAssignment {
    std::map<std::string, std::size_t> cluster;
    std::vector<std::size_t> sizes;

    std::size_t cluster_count() const { return sizes.size(); }
    std::vector<std::string> members(std::size_t k) const;
};

/// floor(fraction * n) per full cluster, as many full clusters as fit
/// without the remainder exceeding one more, then the remainder (if any).
std::vector<std::size_t> cluster_sizes(std::size_t n, double fraction);
ClusterAssignment fixed_size_clusters(const ErrorRanking& ranking, double fraction = 0.15);
/// Two clusters: error >= threshold (1) and the rest (2).
ClusterAssignment threshold_clusters(const ErrorRanking& ranking, double threshold);

/// |members ∩ labeled| / |labeled|
double recall(std::span<const std::string> members, const std::set<std::string>& labeled);
/// |members ∩ labeled| / |members|
double precision(std::span<const std::string> members, const std::set<std::string>& labeled);

enum class ConsistencyBase { first, union_of_all };

struct ConsistencyResult {
    std::vector<double> per_cluster; // percentages, cluster 1 first
    double average = 0.0;
};

/// Share of cluster k's accounts that land in cluster k under every
/// configuration, as a percentage of cluster k's size in the first
/// configuration (or of the union of its memberships).
ConsistencyResult consistency(std::span<const ClusterAssignment> assignments,
                              ConsistencyBase base = ConsistencyBase::first);

struct ReportRow {
    std::string account_id;
    double reconstruction_error = 0.0;
    std::size_t rank = 0; // 1-based
    std::size_t cluster = 0;
};

struct RiskReport {
    std::vector<ReportRow> rows; // rank order

    ClusterAssignment assignment() const;
};

RiskReport make_report(const ErrorRanking& ranking, const ClusterAssignment& clusters);
/// `account_id,reconstruction_error,rank,cluster`
void write_report(std::ostream& out, const RiskReport& report);
void save_report(const std::filesystem::path& path, const RiskReport& report);
RiskReport load_report(const std::filesystem::path& path);

/// Per-cluster size, labeled hits, recall and precision, plus the
/// consistency table when more than one report is given.
nlohmann::json evaluate_reports(std::span<const RiskReport> reports, const std::vector<std::string>& labels,
                                ConsistencyBase base = ConsistencyBase::first);

} // namespace tsrisk
