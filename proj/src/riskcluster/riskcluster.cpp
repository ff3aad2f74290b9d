#include "tsrisk/riskcluster.hpp"

#include "tsrisk/errors.hpp"

#include <algorithm>
#include <cmath>

namespace tsrisk {

ErrorRanking rank_by_error(std::span<const std::pair<std::string, double>> errors)
{
    ErrorRanking ranking;
    ranking.reserve(errors.size());
    for (const auto& [id, e] : errors) {
        if (!std::isfinite(e)) {
            throw DataError("rank_by_error: non-finite error for account '" + id + "'");
        }
        ranking.push_back({id, e});
    }
    std::sort(ranking.begin(), ranking.end(), [](const RankedError& a, const RankedError& b) {
        if (a.error != b.error) {
            return a.error > b.error;
        }
        return a.account_id < b.account_id;
    });
    std::set<std::string> seen;
    for (const RankedError& r : ranking) {
        if (!seen.insert(r.account_id).second) {
            throw DataError("rank_by_error: duplicate account '" + r.account_id + "'");
        }
    }
    return ranking;
}

ErrorRanking rank_by_error(const std::map<std::string, double>& errors)
{
    const std::vector<std::pair<std::string, double>> flat(errors.begin(), errors.end());
    return rank_by_error(flat);
}

std::vector<std::string> ClusterAssignment::members(std::size_t k) const
{
    std::vector<std::string> out;
    for (const auto& [id, c] : cluster) {
        if (c == k) {
            out.push_back(id);
        }
    }
    return out;
}

std::vector<std::size_t> cluster_sizes(std::size_t n, double fraction)
{
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw UsageError("cluster fraction must lie in (0, 1)");
    }
    if (n == 0) {
        throw DataError("cannot cluster an empty ranking");
    }
    const auto size = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
    if (size == 0) {
        throw DataError("cluster fraction " + std::to_string(fraction) + " gives empty clusters for " +
                        std::to_string(n) + " accounts");
    }
    // 1/fraction slots, the last one being the remainder; the tolerance keeps
    // exact reciprocals such as 0.5 or 0.25 from gaining a slot to rounding.
    const auto full = static_cast<std::size_t>(std::ceil(1.0 / fraction - 1e-12)) - 1;
    std::vector<std::size_t> sizes(full, size);
    const std::size_t used = full * size;
    if (used > n) {
        throw DataError("cluster sizes exceed the population");
    }
    if (n > used) {
        sizes.push_back(n - used);
    }
    return sizes;
}

ClusterAssignment fixed_size_clusters(const ErrorRanking& ranking, double fraction)
{
    ClusterAssignment out;
    out.sizes = cluster_sizes(ranking.size(), fraction);
    std::size_t pos = 0;
    for (std::size_t k = 0; k < out.sizes.size(); ++k) {
        for (std::size_t i = 0; i < out.sizes[k]; ++i, ++pos) {
            out.cluster[ranking[pos].account_id] = k + 1;
        }
    }
    return out;
}

ClusterAssignment threshold_clusters(const ErrorRanking& ranking, double threshold)
{
    if (ranking.empty()) {
        throw DataError("cannot cluster an empty ranking");
    }
    ClusterAssignment out;
    out.sizes = {0, 0};
    for (const RankedError& r : ranking) {
        const std::size_t k = r.error >= threshold ? 1 : 2;
        out.cluster[r.account_id] = k;
        ++out.sizes[k - 1];
    }
    return out;
}

namespace {

std::size_t hits(std::span<const std::string> members, const std::set<std::string>& labeled)
{
    std::size_t tp = 0;
    for (const std::string& id : members) {
        tp += labeled.contains(id) ? 1 : 0;
    }
    return tp;
}

} // namespace

double recall(std::span<const std::string> members, const std::set<std::string>& labeled)
{
    if (labeled.empty()) {
        throw DataError("recall: empty labeled set");
    }
    return static_cast<double>(hits(members, labeled)) / static_cast<double>(labeled.size());
}

double precision(std::span<const std::string> members, const std::set<std::string>& labeled)
{
    if (members.empty()) {
        throw DataError("precision: empty cluster");
    }
    return static_cast<double>(hits(members, labeled)) / static_cast<double>(members.size());
}

ConsistencyResult consistency(std::span<const ClusterAssignment> assignments, ConsistencyBase base)
{
    if (assignments.size() < 2) {
        throw UsageError("consistency needs at least two assignments");
    }
    const ClusterAssignment& first = assignments[0];
    for (const ClusterAssignment& a : assignments.subspan(1)) {
        if (a.sizes != first.sizes) {
            throw DataError("consistency: assignments use different cluster schemes");
        }
        if (a.cluster.size() != first.cluster.size() ||
            !std::equal(a.cluster.begin(), a.cluster.end(), first.cluster.begin(),
                        [](const auto& x, const auto& y) { return x.first == y.first; })) {
            throw DataError("consistency: assignments cover different account sets");
        }
    }

    const std::size_t clusters = first.sizes.size();
    std::vector<std::size_t> agreed(clusters, 0);
    std::vector<std::size_t> in_any(clusters, 0);
    std::vector<std::size_t> ks(assignments.size());
    for (const auto& [id, k0] : first.cluster) {
        bool same = true;
        for (std::size_t a = 0; a < assignments.size(); ++a) {
            ks[a] = assignments[a].cluster.at(id);
            same = same && ks[a] == k0;
        }
        if (same) {
            ++agreed[k0 - 1];
        }
        std::sort(ks.begin(), ks.end());
        for (std::size_t a = 0; a < ks.size(); ++a) {
            if (a == 0 || ks[a] != ks[a - 1]) {
                ++in_any[ks[a] - 1];
            }
        }
    }

    ConsistencyResult result;
    double total = 0.0;
    for (std::size_t k = 0; k < clusters; ++k) {
        const std::size_t denom = base == ConsistencyBase::first ? first.sizes[k] : in_any[k];
        const double pct = denom == 0 ? 0.0 : 100.0 * static_cast<double>(agreed[k]) / static_cast<double>(denom);
        result.per_cluster.push_back(pct);
        total += pct;
    }
    result.average = clusters == 0 ? 0.0 : total / static_cast<double>(clusters);
    return result;
}

} // namespace tsrisk
