#include "tsrisk/errors.hpp"
#include "tsrisk/synthdata.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

using namespace tsrisk;

namespace {

SynthConfig small(std::size_t accounts, double anomalies, std::uint64_t seed = 7)
{
    SynthConfig c;
    c.accounts = accounts;
    c.anomaly_fraction = anomalies;
    c.seed = seed;
    return c;
}

} // namespace

TEST(Synth, NoAnomaliesNoLabels)
{
    const SynthData d = generate(small(300, 0.0));
    EXPECT_TRUE(d.labels.empty());
    EXPECT_TRUE(std::none_of(d.accounts.begin(), d.accounts.end(), [](const SynthAccount& a) { return a.anomalous; }));
}

TEST(Synth, SameSeedSameStream)
{
    const SynthData a = generate(small(400, 0.02, 11));
    const SynthData b = generate(small(400, 0.02, 11));
    ASSERT_EQ(a.readings.size(), b.readings.size());
    for (std::size_t i = 0; i < a.readings.size(); ++i) {
        EXPECT_EQ(a.readings[i].account_id, b.readings[i].account_id);
        EXPECT_EQ(a.readings[i].date, b.readings[i].date);
        EXPECT_EQ(a.readings[i].value_kwh, b.readings[i].value_kwh);
        EXPECT_EQ(a.readings[i].source, b.readings[i].source);
    }
    EXPECT_EQ(a.labels, b.labels);
}

TEST(Synth, DifferentSeedDifferentStream)
{
    const SynthData a = generate(small(100, 0.02, 1));
    const SynthData b = generate(small(100, 0.02, 2));
    bool differs = a.readings.size() != b.readings.size();
    for (std::size_t i = 0; !differs && i < a.readings.size(); ++i) {
        differs = a.readings[i].value_kwh != b.readings[i].value_kwh;
    }
    EXPECT_TRUE(differs);
}

TEST(Synth, OnePercentOfTwoThousand)
{
    const SynthData d = generate(small(2000, 0.01));
    EXPECT_EQ(d.labels.size(), 20u);
    EXPECT_EQ(d.accounts.size(), 2000u);
}

TEST(Synth, FloorOfFraction)
{
    EXPECT_EQ(generate(small(150, 0.01)).labels.size(), 1u);
    EXPECT_EQ(generate(small(99, 0.01)).labels.size(), 0u);
}

TEST(Synth, ReadingsValidAndLabelsKnown)
{
    const SynthConfig c = small(1500, 0.03, 5);
    const SynthData d = generate(c);
    std::set<std::string> ids;
    for (const SynthAccount& a : d.accounts) {
        ids.insert(a.id);
    }
    for (const RawReading& r : d.readings) {
        EXPECT_GE(r.value_kwh, 0.0);
        EXPECT_TRUE(c.horizon.index_of(r.date).has_value());
        EXPECT_TRUE(ids.contains(r.account_id));
    }
    EXPECT_TRUE(std::is_sorted(d.labels.begin(), d.labels.end()));
    for (const std::string& l : d.labels) {
        EXPECT_TRUE(ids.contains(l));
    }
    for (std::size_t i = 1; i < d.readings.size(); ++i) {
        const RawReading& p = d.readings[i - 1];
        const RawReading& q = d.readings[i];
        EXPECT_TRUE(p.account_id < q.account_id || (p.account_id == q.account_id && p.date <= q.date));
    }
}

TEST(Synth, MixOfCadencesAndProfiles)
{
    const SynthData d = generate(small(2000, 0.01));
    std::set<Cadence> cadences;
    std::set<Profile> profiles;
    for (const SynthAccount& a : d.accounts) {
        cadences.insert(a.cadence);
        profiles.insert(a.profile);
    }
    EXPECT_EQ(cadences.size(), 3u);
    EXPECT_EQ(profiles.size(), 3u);
}

TEST(Synth, InvalidConfigRejected)
{
    SynthConfig c = small(10, 0.0);
    c.profile_weights = {0.5, 0.2, 0.2};
    EXPECT_THROW(c.validate(), UsageError);
    c = small(10, 1.0);
    EXPECT_THROW(c.validate(), UsageError);
    c = small(10, -0.1);
    EXPECT_THROW(c.validate(), UsageError);
    c = small(0, 0.0);
    EXPECT_THROW(c.validate(), UsageError);
}

TEST(Synth, ConfigJsonStrict)
{
    const SynthConfig c = small(123, 0.05, 9);
    nlohmann::json j = to_json(c);
    EXPECT_EQ(to_json(synth_config_from_json(j)), j);
    j["households"] = 3;
    EXPECT_THROW(synth_config_from_json(j), UsageError);
}

TEST(Synth, SurvivesPipeline)
{
    const SynthData d = generate(small(500, 0.02));
    const NormalizedDataset ds = run_pipeline(d.readings, d.labels, PipelineConfig{});
    EXPECT_GT(ds.size(), 350u);
    EXPECT_EQ(ds.seq_len(), 58u);
    EXPECT_EQ(ds.provenance.labels_unknown, 0u);
}
