#include "support.hpp"

#include "tsrisk/errors.hpp"
#include "tsrisk/preprocess.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

using namespace tsrisk;

namespace {

RawReading reading(std::string id, int year, int month, double value, Source source = Source::manual)
{
    return RawReading{std::move(id), YearMonth{year, month}, value, source};
}

Horizon year_2018()
{
    return Horizon{{2018, 1}, {2018, 12}};
}

PipelineConfig golden_config()
{
    PipelineConfig c;
    c.horizon = year_2018();
    c.outlier_cap = 1e6;
    c.min_len = 7;
    c.target_len = 10;
    return c;
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        out.push_back(cell);
    }
    return out;
}

// Random readings for `accounts` accounts over the default horizon.
std::vector<RawReading> random_readings(Rng& rng, std::size_t accounts)
{
    std::vector<RawReading> out;
    const Horizon h;
    for (std::size_t a = 0; a < accounts; ++a) {
        const std::string id = "R" + std::to_string(100000 + a);
        const double density = rng.uniform(0.05, 1.0);
        const double scale = std::pow(10.0, rng.uniform(0.0, 4.0));
        const bool all_zero = rng.bernoulli(0.03);
        // Some accounts stop reporting within the first half year.
        const std::size_t months = rng.bernoulli(0.05) ? 6 : h.months();
        for (std::size_t m = 0; m < months; ++m) {
            if (!rng.bernoulli(density)) {
                continue;
            }
            const YearMonth ym = h.month_at(m);
            out.push_back(reading(id, ym.year, ym.month, all_zero ? 0.0 : scale * rng.uniform(), Source::telemeter_lv));
        }
    }
    return out;
}

} // namespace

TEST(YearMonthTest, ParseAndFormat)
{
    EXPECT_EQ(parse_year_month("2019-07"), (YearMonth{2019, 7}));
    EXPECT_EQ(format_year_month({2019, 7}), "2019-07");
    EXPECT_FALSE(parse_year_month("2019-13"));
    EXPECT_FALSE(parse_year_month("2019-7"));
    EXPECT_FALSE(parse_year_month("19-07"));
    EXPECT_FALSE(parse_year_month("2019-07-01"));
}

TEST(HorizonTest, DefaultSpansSixtyMonths)
{
    const Horizon h;
    EXPECT_EQ(h.months(), 60u);
    EXPECT_EQ(h.index_of({2018, 1}), 0u);
    EXPECT_EQ(h.index_of({2022, 12}), 59u);
    EXPECT_FALSE(h.index_of({2017, 12}));
    EXPECT_FALSE(h.index_of({2023, 1}));
    EXPECT_EQ(h.month_at(13), (YearMonth{2019, 2}));
}

TEST(Ingest, SingleReadingWithSentinels)
{
    const std::vector<RawReading> r{reading("A", 2018, 3, 300.0)};
    const ConsumptionMatrix m = ingest_readings(r, year_2018(), 1e6);
    ASSERT_EQ(m.accounts, std::vector<std::string>{"A"});
    for (std::size_t j = 0; j < 12; ++j) {
        EXPECT_EQ(m.values.at(0, j), j == 2 ? 300.0 : kMissing);
    }
}

TEST(Ingest, OutlierDroppedAndCounted)
{
    const std::vector<RawReading> r{reading("A", 2018, 3, 1e12), reading("A", 2018, 4, 5.0)};
    const ConsumptionMatrix m = ingest_readings(r, year_2018(), 1e6);
    EXPECT_EQ(m.dropped_outliers, 1u);
    EXPECT_EQ(m.values.at(0, 2), kMissing);
    EXPECT_EQ(m.values.at(0, 3), 5.0);
}

TEST(Ingest, SameMonthReadingsSummed)
{
    const std::vector<RawReading> r{reading("A", 2018, 5, 10.0), reading("A", 2018, 5, 2.5, Source::telemeter_mv)};
    EXPECT_EQ(ingest_readings(r, year_2018(), 1e6).values.at(0, 4), 12.5);
}

TEST(Ingest, OutsideHorizonCountedAndAccountsSorted)
{
    const std::vector<RawReading> r{reading("B", 2019, 1, 1.0), reading("A", 2018, 1, 1.0),
                                    reading("C", 2017, 12, 1.0)};
    const ConsumptionMatrix m = ingest_readings(r, year_2018(), 1e6);
    EXPECT_EQ(m.outside_horizon, 2u);
    EXPECT_EQ(m.accounts, (std::vector<std::string>{"A", "B", "C"}));
    for (std::size_t j = 0; j < 12; ++j) {
        EXPECT_EQ(m.values.at(1, j), kMissing);
    }
}

TEST(IntervalAverage, FirstIntervalFromSeriesStart)
{
    const std::vector<double> row{kMissing, kMissing, 300.0, kMissing};
    EXPECT_EQ(interval_average(row), (std::vector<double>{100.0, 100.0, 100.0}));
}

TEST(IntervalAverage, SecondIntervalSpansTwoMonths)
{
    const std::vector<double> row{60.0, kMissing, 100.0};
    EXPECT_EQ(interval_average(row), (std::vector<double>{60.0, 50.0, 50.0}));
}

TEST(IntervalAverage, SingleZeroMeasurement)
{
    const std::vector<double> row{0.0, kMissing, kMissing};
    EXPECT_EQ(interval_average(row), (std::vector<double>{0.0}));
}

TEST(IntervalAverage, EmptyRowGivesEmptySeries)
{
    const std::vector<double> row(5, kMissing);
    EXPECT_TRUE(interval_average(row).empty());
}

TEST(IntervalAverage, ExplicitStart)
{
    const std::vector<double> row{kMissing, kMissing, 300.0, kMissing, 20.0};
    EXPECT_EQ(interval_average(row, 1), (std::vector<double>{150.0, 150.0, 10.0, 10.0}));
}

TEST(IntervalAverage, PreservesTotalConsumption)
{
    Rng rng(1);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> row(1 + rng.below(60), kMissing);
        double total = 0.0;
        for (double& v : row) {
            if (rng.bernoulli(0.4)) {
                v = rng.uniform(0.0, 500.0);
                total += v;
            }
        }
        const std::vector<double> s = interval_average(row);
        EXPECT_NEAR(std::accumulate(s.begin(), s.end(), 0.0), total, 1e-9 * std::max(1.0, total));
    }
}

TEST(RowNormalize, Examples)
{
    const std::vector<double> a{2.0, 3.0, 5.0};
    const std::vector<double> na = row_normalize(a);
    EXPECT_DOUBLE_EQ(na[0], 0.2);
    EXPECT_DOUBLE_EQ(na[1], 0.3);
    EXPECT_DOUBLE_EQ(na[2], 0.5);
    const std::vector<double> b{10.0};
    EXPECT_EQ(row_normalize(b), std::vector<double>{1.0});
}

TEST(RowNormalize, ZeroSumAndEmptyRejected)
{
    const std::vector<double> zeros(3, 0.0);
    EXPECT_THROW(row_normalize(zeros), DataError);
    EXPECT_THROW(row_normalize(std::vector<double>{}), DataError);
}

TEST(RowNormalize, SumsToOneOnRandomSeries)
{
    Rng rng(2);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> s(1 + rng.below(80));
        const double scale = std::pow(10.0, rng.uniform(-3.0, 6.0));
        for (double& v : s) {
            v = rng.bernoulli(0.2) ? 0.0 : scale * rng.uniform();
        }
        s[rng.below(s.size())] = scale;
        const std::vector<double> n = row_normalize(s);
        EXPECT_NEAR(std::accumulate(n.begin(), n.end(), 0.0), 1.0, 1e-9);
        for (double v : n) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(CleanFilter, Examples)
{
    const std::vector<std::vector<double>> s{
        std::vector<double>(6, 1.0),
        std::vector<double>(7, 1.0),
        std::vector<double>(20, 0.0),
        std::vector<double>(30, 2.0),
    };
    const CleanResult r = clean_filter(s);
    EXPECT_EQ(r.kept, (std::vector<std::size_t>{1, 3}));
    EXPECT_EQ(r.removed_short, 1u);
    EXPECT_EQ(r.removed_zero, 1u);
}

TEST(CleanFilter, CustomMinimum)
{
    const std::vector<std::vector<double>> s{{1.0, 2.0}, {1.0, 2.0, 3.0}};
    EXPECT_EQ(clean_filter(s, 3).kept, std::vector<std::size_t>{1});
}

TEST(PadPrune, Examples)
{
    std::vector<double> s58(58);
    std::iota(s58.begin(), s58.end(), 1.0);
    EXPECT_EQ(pad_prune(s58), s58);

    const std::vector<double> s7{1, 2, 3, 4, 5, 6, 7};
    const std::vector<double> p7 = pad_prune(s7);
    ASSERT_EQ(p7.size(), 58u);
    for (std::size_t i = 0; i < 58; ++i) {
        EXPECT_EQ(p7[i], i < 7 ? s7[i] : 0.0);
    }

    std::vector<double> s60(60);
    std::iota(s60.begin(), s60.end(), 1.0);
    const std::vector<double> p60 = pad_prune(s60);
    EXPECT_EQ(p60, std::vector<double>(s60.begin() + 2, s60.end()));
}

TEST(MinMax, Examples)
{
    const Tensor col = Tensor::from_rows({{2.0}, {4.0}, {6.0}});
    const Tensor t = MinMaxScaler::fit(col).transform(col);
    EXPECT_EQ(t.at(0, 0), 0.0);
    EXPECT_EQ(t.at(1, 0), 0.5);
    EXPECT_EQ(t.at(2, 0), 1.0);

    const Tensor flat = Tensor::from_rows({{3.0}, {3.0}});
    const Tensor f = MinMaxScaler::fit(flat).transform(flat);
    EXPECT_EQ(f.at(0, 0), 0.0);
    EXPECT_EQ(f.at(1, 0), 0.0);
}

TEST(MinMax, ColumnMismatchRejected)
{
    const MinMaxScaler s = MinMaxScaler::fit(Tensor::from_rows({{1.0, 2.0}}));
    EXPECT_THROW(s.transform(Tensor::from_rows({{1.0, 2.0, 3.0}})), ShapeError);
    EXPECT_THROW(MinMaxScaler::fit(Tensor({0, 3})), DataError);
}

TEST(MinMax, FittedSetLiesInUnitInterval)
{
    Rng rng(3);
    const Tensor data = testkit::random_tensor(rng, 40, 7, -50.0, 80.0);
    const MinMaxScaler s = MinMaxScaler::fit(data);
    for (std::size_t j = 0; j < 7; ++j) {
        EXPECT_LE(s.min[j], s.max[j]);
    }
    for (double v : s.transform(data).values()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(ReadingsFileTest, ParsesAndReportsMalformedLines)
{
    std::istringstream in("account_id,date,value_kwh,source\n"
                          "A,2018-01,10.5,manual\n"
                          "B,2018-13,1,manual\n"
                          "C,2018-02,-4,telemeter_lv\n"
                          "D,2018-02,3,carrier_pigeon\n"
                          "E,2018-03,7,telemeter_mv\n");
    const ReadingsFile f = parse_readings(in, false);
    ASSERT_EQ(f.readings.size(), 2u);
    EXPECT_EQ(f.readings[1].source, Source::telemeter_mv);
    ASSERT_EQ(f.issues.size(), 3u);
    EXPECT_EQ(f.issues[0].line, 3u);
    EXPECT_EQ(f.issues[2].line, 5u);
}

TEST(ReadingsFileTest, StrictModeFailsWithLineNumber)
{
    std::istringstream in("account_id,date,value_kwh,source\nA,2018-01,10,manual\nA,2018-02,abc,manual\n");
    try {
        parse_readings(in, true);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("3"), std::string::npos) << e.what();
    }
}

TEST(ReadingsFileTest, BadHeaderRejected)
{
    std::istringstream in("id,month,kwh\nA,2018-01,1\n");
    EXPECT_THROW(parse_readings(in, false), DataError);
}

TEST(ReadingsFileTest, WriteParseRoundTrip)
{
    Rng rng(4);
    const std::vector<RawReading> original = random_readings(rng, 30);
    std::stringstream buffer;
    write_readings(buffer, original);
    const ReadingsFile back = parse_readings(buffer, true);
    ASSERT_EQ(back.readings.size(), original.size());
    for (std::size_t i = 0; i < original.size(); ++i) {
        EXPECT_EQ(back.readings[i].account_id, original[i].account_id);
        EXPECT_EQ(back.readings[i].date, original[i].date);
        EXPECT_EQ(back.readings[i].value_kwh, original[i].value_kwh);
        EXPECT_EQ(back.readings[i].source, original[i].source);
    }
}

TEST(LabelsFileTest, BlankLinesIgnored)
{
    std::istringstream in("A1\n\nB2\r\n  \nC3");
    EXPECT_EQ(parse_labels(in), (std::vector<std::string>{"A1", "B2", "C3"}));
}

TEST(GoldenPipeline, BitExact)
{
    const ReadingsFile f = read_readings_file(testkit::fixture("golden/readings.csv"), true);
    const std::vector<std::string> labels = read_labels_file(testkit::fixture("golden/labels.txt"));
    const NormalizedDataset ds = run_pipeline(f.readings, labels, golden_config());

    std::ifstream expected(testkit::fixture("golden/expected.csv"));
    std::string line;
    std::getline(expected, line);
    std::size_t row = 0;
    while (std::getline(expected, line)) {
        const std::vector<std::string> cells = split(line);
        ASSERT_LT(row, ds.size());
        EXPECT_EQ(ds.accounts[row], cells[0]);
        EXPECT_EQ(ds.labeled[row], cells[1] == "1" ? 1 : 0) << cells[0];
        ASSERT_EQ(cells.size(), 2 + ds.seq_len());
        for (std::size_t j = 0; j < ds.seq_len(); ++j) {
            const double want = std::strtod(cells[2 + j].c_str(), nullptr);
            EXPECT_EQ(ds.series.at(row, j), want) << cells[0] << " t" << j;
        }
        ++row;
    }
    EXPECT_EQ(row, ds.size());

    std::ifstream prov(testkit::fixture("golden/expected_provenance.json"));
    EXPECT_EQ(to_json(ds.provenance), nlohmann::json::parse(prov));
}

TEST(Pipeline, AllShortSeriesIsEmptyOutputError)
{
    const std::vector<RawReading> r{reading("A", 2018, 3, 5.0), reading("B", 2018, 2, 8.0)};
    try {
        run_pipeline(r, {}, golden_config());
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("no series survived cleaning"), std::string::npos) << e.what();
    }
}

TEST(Pipeline, LabelsFlaggedOnlyWhenSurviving)
{
    std::vector<RawReading> r;
    for (int m = 1; m <= 12; ++m) {
        r.push_back(reading("KEEP", 2018, m, 10.0 + m));
        r.push_back(reading("ALSO", 2018, m, 3.0));
    }
    r.push_back(reading("SHORT", 2018, 2, 4.0));
    const NormalizedDataset ds = run_pipeline(r, {"KEEP", "SHORT", "GHOST"}, golden_config());
    EXPECT_EQ(ds.accounts, (std::vector<std::string>{"ALSO", "KEEP"}));
    EXPECT_EQ(ds.labeled, (std::vector<std::uint8_t>{0, 1}));
    EXPECT_EQ(ds.provenance.labels_given, 3u);
    EXPECT_EQ(ds.provenance.labels_unknown, 1u);
    EXPECT_EQ(ds.provenance.labeled_removed, 1u);
    EXPECT_EQ(ds.provenance.labeled_output, 1u);
    EXPECT_EQ(ds.labeled_count(), 1u);
}

TEST(Pipeline, PropertiesOnRandomAccounts)
{
    Rng rng(5);
    const std::vector<RawReading> r = random_readings(rng, 1000);
    const PipelineConfig config;
    const NormalizedDataset ds = run_pipeline(r, {}, config);
    EXPECT_EQ(ds.seq_len(), 58u);
    EXPECT_EQ(ds.series.rows(), ds.size());
    for (double v : ds.series.values()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    const ProvenanceReport& p = ds.provenance;
    std::set<std::string> ids;
    for (const RawReading& x : r) {
        ids.insert(x.account_id);
    }
    EXPECT_EQ(p.input_accounts, ids.size());
    EXPECT_EQ(p.input_accounts, p.output_series + p.removed_empty + p.removed_zero + p.removed_short);
    EXPECT_GT(p.removed_zero, 0u);
    EXPECT_GT(p.removed_short, 0u);
    EXPECT_GT(p.truncated, 0u);
    EXPECT_GT(p.padded, 0u);
    EXPECT_EQ(p.input_records, r.size());

    const NormalizedDataset again = run_pipeline(r, {}, config);
    EXPECT_TRUE(bitwise_equal(ds.series, again.series));
    EXPECT_EQ(ds.accounts, again.accounts);
    EXPECT_EQ(ds.config_fingerprint, again.config_fingerprint);
}

TEST(Pipeline, InputOrderDoesNotMatterWithoutDuplicates)
{
    Rng rng(6);
    const std::vector<RawReading> r = random_readings(rng, 200);
    std::vector<RawReading> shuffled;
    for (std::size_t i : rng.permutation(r.size())) {
        shuffled.push_back(r[i]);
    }
    EXPECT_TRUE(bitwise_equal(run_pipeline(r, {}, PipelineConfig{}).series,
                              run_pipeline(shuffled, {}, PipelineConfig{}).series));
}

TEST(Pipeline, InvalidConfigRejected)
{
    PipelineConfig c;
    c.outlier_cap = 0.0;
    EXPECT_THROW(c.validate(), UsageError);
    c = PipelineConfig{};
    c.horizon = Horizon{{2019, 1}, {2018, 1}};
    EXPECT_THROW(c.validate(), UsageError);
    c = PipelineConfig{};
    c.target_len = 0;
    EXPECT_THROW(c.validate(), UsageError);
}

TEST(Pipeline, ConfigJsonIsStrict)
{
    nlohmann::json j = to_json(golden_config());
    EXPECT_EQ(to_json(pipeline_config_from_json(j)), j);
    j["smoothing"] = true;
    EXPECT_THROW(pipeline_config_from_json(j), UsageError);
}

TEST(DatasetFile, RoundTripAndSubset)
{
    testkit::ScratchDir dir("dataset");
    Rng rng(7);
    const NormalizedDataset ds = run_pipeline(random_readings(rng, 100), {"R100003", "R100010"}, PipelineConfig{});
    save_dataset(dir / "d.bin", ds);
    const NormalizedDataset back = load_dataset(dir / "d.bin");
    EXPECT_EQ(back.accounts, ds.accounts);
    EXPECT_EQ(back.labeled, ds.labeled);
    EXPECT_TRUE(bitwise_equal(back.series, ds.series));
    EXPECT_EQ(back.scaler.min, ds.scaler.min);
    EXPECT_EQ(back.scaler.max, ds.scaler.max);
    EXPECT_EQ(back.config_fingerprint, ds.config_fingerprint);
    EXPECT_EQ(to_json(back.provenance), to_json(ds.provenance));

    const std::vector<std::size_t> pick{3, 0, 5};
    const NormalizedDataset sub = subset(ds, pick);
    ASSERT_EQ(sub.size(), 3u);
    EXPECT_EQ(sub.accounts[0], ds.accounts[3]);
    for (std::size_t j = 0; j < ds.seq_len(); ++j) {
        EXPECT_EQ(sub.series.at(1, j), ds.series.at(0, j));
    }
    EXPECT_EQ(sub.scaler.min, ds.scaler.min);
}
