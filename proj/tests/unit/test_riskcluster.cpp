#include "support.hpp"

#include "tsrisk/errors.hpp"
#include "tsrisk/riskcluster.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

using namespace tsrisk;

namespace {

std::vector<std::string> ids(const ErrorRanking& r)
{
    std::vector<std::string> out;
    for (const RankedError& e : r) {
        out.push_back(e.account_id);
    }
    return out;
}

std::map<std::string, double> random_errors(Rng& rng, std::size_t n, bool with_ties)
{
    std::map<std::string, double> out;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = with_ties ? 0.01 * static_cast<double>(rng.below(20)) : rng.uniform(0.0, 0.2);
        out["acct" + std::to_string(1000 + i)] = e;
    }
    return out;
}

ClusterAssignment two_way(const std::map<std::string, std::size_t>& cluster)
{
    ClusterAssignment a;
    a.cluster = cluster;
    a.sizes.assign(2, 0);
    for (const auto& [id, k] : cluster) {
        ++a.sizes[k - 1];
    }
    return a;
}

} // namespace

TEST(RankByError, Descending)
{
    EXPECT_EQ(ids(rank_by_error(std::map<std::string, double>{{"a", 0.1}, {"b", 0.3}})),
              (std::vector<std::string>{"b", "a"}));
}

TEST(RankByError, TiesBrokenById)
{
    const std::vector<std::pair<std::string, double>> e{{"b", 0.2}, {"a", 0.2}};
    EXPECT_EQ(ids(rank_by_error(e)), (std::vector<std::string>{"a", "b"}));
}

TEST(RankByError, Singleton)
{
    const ErrorRanking r = rank_by_error(std::map<std::string, double>{{"x", 4.0}});
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].account_id, "x");
    EXPECT_EQ(r[0].error, 4.0);
}

TEST(RankByError, RejectsNonFiniteAndDuplicates)
{
    const std::vector<std::pair<std::string, double>> nan{{"a", std::numeric_limits<double>::quiet_NaN()}};
    EXPECT_THROW(rank_by_error(nan), DataError);
    const std::vector<std::pair<std::string, double>> inf{{"a", std::numeric_limits<double>::infinity()}};
    EXPECT_THROW(rank_by_error(inf), DataError);
    const std::vector<std::pair<std::string, double>> dup{{"a", 0.1}, {"a", 0.2}};
    EXPECT_THROW(rank_by_error(dup), DataError);
}

TEST(RankByError, InputOrderIrrelevant)
{
    Rng rng(1);
    const std::map<std::string, double> m = random_errors(rng, 200, true);
    std::vector<std::pair<std::string, double>> v(m.begin(), m.end());
    const std::vector<std::string> base = ids(rank_by_error(v));
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<std::pair<std::string, double>> shuffled;
        for (std::size_t i : rng.permutation(v.size())) {
            shuffled.push_back(v[i]);
        }
        EXPECT_EQ(ids(rank_by_error(shuffled)), base);
    }
}

TEST(ClusterSizes, OneHundred)
{
    EXPECT_EQ(cluster_sizes(100, 0.15), (std::vector<std::size_t>{15, 15, 15, 15, 15, 15, 10}));
}

TEST(ClusterSizes, CaseStudyScale)
{
    const std::vector<std::size_t> s = cluster_sizes(347546, 0.15);
    ASSERT_EQ(s.size(), 7u);
    for (std::size_t k = 0; k < 6; ++k) {
        EXPECT_EQ(s[k], 52131u);
    }
    EXPECT_EQ(s[6], 34760u);
    EXPECT_NEAR(static_cast<double>(s[6]) / 347546.0, 0.100, 5e-4);
}

TEST(ClusterSizes, SevenAccounts)
{
    EXPECT_EQ(cluster_sizes(7, 0.15), std::vector<std::size_t>(7, 1));
}

TEST(ClusterSizes, HalfGivesTwoClusters)
{
    EXPECT_EQ(cluster_sizes(10, 0.5), (std::vector<std::size_t>{5, 5}));
    EXPECT_EQ(cluster_sizes(11, 0.5), (std::vector<std::size_t>{5, 6}));
}

TEST(ClusterSizes, RejectsBadArguments)
{
    EXPECT_THROW(cluster_sizes(0, 0.15), DataError);
    EXPECT_THROW(cluster_sizes(10, 0.0), UsageError);
    EXPECT_THROW(cluster_sizes(10, 1.0), UsageError);
}

TEST(ClusterSizes, PartitionProperty)
{
    Rng rng(2);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t n = 1 + rng.below(5000);
        const double f = rng.uniform(0.01, 0.99);
        if (std::floor(f * static_cast<double>(n)) < 1.0) {
            EXPECT_THROW(cluster_sizes(n, f), DataError);
            continue;
        }
        const std::vector<std::size_t> s = cluster_sizes(n, f);
        EXPECT_EQ(std::accumulate(s.begin(), s.end(), std::size_t{0}), n) << n << " " << f;
        for (std::size_t size : s) {
            EXPECT_GE(size, 1u);
        }
        const auto full = static_cast<std::size_t>(std::floor(f * static_cast<double>(n)));
        for (std::size_t k = 0; k + 1 < s.size(); ++k) {
            EXPECT_EQ(s[k], full);
        }
    }
}

TEST(FixedSizeClusters, ConsecutiveSlices)
{
    Rng rng(3);
    const ErrorRanking r = rank_by_error(random_errors(rng, 100, false));
    const ClusterAssignment a = fixed_size_clusters(r);
    EXPECT_EQ(a.sizes, cluster_sizes(100, 0.15));
    for (std::size_t i = 0; i < r.size(); ++i) {
        EXPECT_EQ(a.cluster.at(r[i].account_id), std::min<std::size_t>(i / 15, 6) + 1);
    }
    EXPECT_EQ(a.members(7).size(), 10u);
    EXPECT_THROW(fixed_size_clusters(ErrorRanking{}), DataError);
}

TEST(FixedSizeClusters, MonotoneTransformLeavesClustersUnchanged)
{
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const std::map<std::string, double> e = random_errors(rng, 300, trial % 2 == 0);
        std::map<std::string, double> warped;
        for (const auto& [id, v] : e) {
            warped[id] = std::exp(3.0 * v) + std::sqrt(v) * 7.0 - 2.0;
        }
        const ErrorRanking r1 = rank_by_error(e);
        const ErrorRanking r2 = rank_by_error(warped);
        EXPECT_EQ(ids(r1), ids(r2));
        EXPECT_EQ(fixed_size_clusters(r1).cluster, fixed_size_clusters(r2).cluster);
    }
}

TEST(ThresholdClusters, SplitsAtThreshold)
{
    const ErrorRanking r = rank_by_error(std::map<std::string, double>{{"a", 0.1}, {"b", 0.5}, {"c", 0.3}});
    const ClusterAssignment a = threshold_clusters(r, 0.3);
    EXPECT_EQ(a.sizes, (std::vector<std::size_t>{2, 1}));
    EXPECT_EQ(a.cluster.at("a"), 2u);
    EXPECT_EQ(a.cluster.at("c"), 1u);
}

TEST(RecallPrecision, TableValues)
{
    std::set<std::string> labeled;
    for (int i = 0; i < 891; ++i) {
        labeled.insert("L" + std::to_string(i));
    }
    std::vector<std::string> cluster;
    for (int i = 0; i < 450; ++i) {
        cluster.push_back("L" + std::to_string(i));
    }
    for (int i = 0; cluster.size() < 52131; ++i) {
        cluster.push_back("U" + std::to_string(i));
    }
    // 450 / 891 = 0.50505..., reported to four places.
    EXPECT_NEAR(recall(cluster, labeled), 0.5050, 1e-4);
    EXPECT_NEAR(precision(cluster, labeled), 0.00863, 5e-6);

    std::vector<std::string> all_labeled(labeled.begin(), labeled.end());
    for (int i = 0; all_labeled.size() < 52131; ++i) {
        all_labeled.push_back("U" + std::to_string(i));
    }
    EXPECT_EQ(recall(all_labeled, labeled), 1.0);
    EXPECT_NEAR(precision(all_labeled, labeled), 0.01709, 1e-5);
}

TEST(RecallPrecision, TrivialCases)
{
    const std::set<std::string> labeled{"a", "b"};
    const std::vector<std::string> none{"x", "y"};
    EXPECT_EQ(recall(none, labeled), 0.0);
    EXPECT_EQ(precision(none, labeled), 0.0);
    EXPECT_THROW(recall(none, {}), DataError);
    EXPECT_THROW(precision(std::vector<std::string>{}, labeled), DataError);
}

TEST(RecallPrecision, Properties)
{
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const ErrorRanking r = rank_by_error(random_errors(rng, 200 + rng.below(300), false));
        std::set<std::string> labeled;
        for (const RankedError& e : r) {
            if (rng.bernoulli(0.05)) {
                labeled.insert(e.account_id);
            }
        }
        if (labeled.empty()) {
            labeled.insert(r.front().account_id);
        }
        const ClusterAssignment a = fixed_size_clusters(r, rng.uniform(0.05, 0.5));
        double total = 0.0;
        for (std::size_t k = 1; k <= a.cluster_count(); ++k) {
            const std::vector<std::string> m = a.members(k);
            total += recall(m, labeled);
            EXPECT_LE(precision(m, labeled),
                      static_cast<double>(labeled.size()) / static_cast<double>(m.size()) + 1e-15);
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
        std::vector<std::string> everyone = ids(r);
        EXPECT_EQ(recall(everyone, labeled), 1.0);
    }
}

TEST(Consistency, IdenticalAssignmentsAreFullyConsistent)
{
    Rng rng(6);
    const ClusterAssignment a = fixed_size_clusters(rank_by_error(random_errors(rng, 100, false)));
    const std::vector<ClusterAssignment> same{a, a, a};
    const ConsistencyResult c = consistency(same);
    ASSERT_EQ(c.per_cluster.size(), 7u);
    for (double p : c.per_cluster) {
        EXPECT_EQ(p, 100.0);
    }
    EXPECT_EQ(c.average, 100.0);
}

TEST(Consistency, FourAccountExample)
{
    const ClusterAssignment a = two_way({{"a", 1}, {"b", 1}, {"c", 2}, {"d", 2}});
    ClusterAssignment b = two_way({{"a", 1}, {"b", 2}, {"c", 2}, {"d", 2}});
    // The scheme is two clusters of two; the test only moves b.
    b.sizes = a.sizes;
    const std::vector<ClusterAssignment> pair{a, b};
    const ConsistencyResult c = consistency(pair);
    EXPECT_EQ(c.per_cluster, (std::vector<double>{50.0, 100.0}));
    EXPECT_EQ(c.average, 75.0);
}

TEST(Consistency, DisjointFirstClusters)
{
    const ClusterAssignment a = two_way({{"a", 1}, {"b", 2}});
    const ClusterAssignment b = two_way({{"a", 2}, {"b", 1}});
    const std::vector<ClusterAssignment> pair{a, b};
    EXPECT_EQ(consistency(pair).per_cluster[0], 0.0);
}

TEST(Consistency, SymmetricUnderReordering)
{
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const std::map<std::string, double> base = random_errors(rng, 150, false);
        std::vector<ClusterAssignment> configs;
        for (int c = 0; c < 3; ++c) {
            std::map<std::string, double> noisy;
            for (const auto& [id, e] : base) {
                noisy[id] = e + rng.uniform(-0.03, 0.03);
            }
            configs.push_back(fixed_size_clusters(rank_by_error(noisy)));
        }
        const ConsistencyResult ref = consistency(configs);
        for (std::size_t i : {1u, 2u}) {
            std::swap(configs[0], configs[i]);
            const ConsistencyResult c = consistency(configs);
            ASSERT_EQ(c.per_cluster.size(), ref.per_cluster.size());
            for (std::size_t k = 0; k < c.per_cluster.size(); ++k) {
                EXPECT_NEAR(c.per_cluster[k], ref.per_cluster[k], 1e-12);
            }
            EXPECT_NEAR(c.average, ref.average, 1e-12);
        }
        for (double p : ref.per_cluster) {
            EXPECT_GE(p, 0.0);
            EXPECT_LE(p, 100.0);
        }
    }
}

TEST(Consistency, UnionBase)
{
    const ClusterAssignment a = two_way({{"a", 1}, {"b", 1}, {"c", 2}, {"d", 2}});
    const ClusterAssignment b = two_way({{"a", 1}, {"c", 1}, {"b", 2}, {"d", 2}});
    const std::vector<ClusterAssignment> pair{a, b};
    const ConsistencyResult c = consistency(pair, ConsistencyBase::union_of_all);
    EXPECT_NEAR(c.per_cluster[0], 100.0 / 3.0, 1e-12);
    EXPECT_NEAR(c.per_cluster[1], 100.0 / 3.0, 1e-12);
}

TEST(Consistency, RejectsMismatchedInputs)
{
    const ClusterAssignment a = two_way({{"a", 1}, {"b", 2}});
    const ClusterAssignment b = two_way({{"a", 1}, {"c", 2}});
    const std::vector<ClusterAssignment> accounts{a, b};
    EXPECT_THROW(consistency(accounts), DataError);
    const std::vector<ClusterAssignment> single{a};
    EXPECT_THROW(consistency(single), UsageError);
}

TEST(Report, RoundTripAndAssignment)
{
    testkit::ScratchDir dir("report");
    Rng rng(8);
    const ErrorRanking r = rank_by_error(random_errors(rng, 60, true));
    const ClusterAssignment a = fixed_size_clusters(r);
    const RiskReport report = make_report(r, a);
    ASSERT_EQ(report.rows.size(), 60u);
    EXPECT_EQ(report.rows[0].rank, 1u);
    EXPECT_EQ(report.rows[59].rank, 60u);
    save_report(dir / "r.csv", report);
    const RiskReport back = load_report(dir / "r.csv");
    ASSERT_EQ(back.rows.size(), report.rows.size());
    for (std::size_t i = 0; i < back.rows.size(); ++i) {
        EXPECT_EQ(back.rows[i].account_id, report.rows[i].account_id);
        EXPECT_EQ(back.rows[i].reconstruction_error, report.rows[i].reconstruction_error);
        EXPECT_EQ(back.rows[i].rank, report.rows[i].rank);
        EXPECT_EQ(back.rows[i].cluster, report.rows[i].cluster);
    }
    EXPECT_EQ(back.assignment().cluster, a.cluster);
    EXPECT_EQ(back.assignment().sizes, a.sizes);

    std::ostringstream out;
    write_report(out, report);
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "account_id,reconstruction_error,rank,cluster");
}

TEST(Report, EvaluateSummarizesClusters)
{
    const ErrorRanking r = rank_by_error(std::map<std::string, double>{{"a", 0.9}, {"b", 0.8}, {"c", 0.1}, {"d", 0.2}});
    const ClusterAssignment a = fixed_size_clusters(r, 0.5);
    const std::vector<RiskReport> reports{make_report(r, a), make_report(r, a)};
    const nlohmann::json j = evaluate_reports(reports, {"a", "c"});
    ASSERT_TRUE(j.contains("reports"));
    const nlohmann::json& first = j["reports"][0]["clusters"][0];
    EXPECT_EQ(first["size"], 2);
    EXPECT_EQ(first["labeled"], 1);
    EXPECT_EQ(first["recall"], 0.5);
    EXPECT_EQ(first["precision"], 0.5);
    EXPECT_EQ(j["consistency"]["average_percent"], 100.0);
}
