#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "mobfc/eda.hpp"

using namespace mobfc;
using namespace mobfc::eda;

TEST(Histogram, UnitHourBins) {
    std::vector<double> v{0, 0, 1, 23};
    auto h = histogram(v, integer_bins(0, 23));
    ASSERT_EQ(h.counts.size(), 24u);
    EXPECT_EQ(h.counts[0], 2u);
    EXPECT_EQ(h.counts[1], 1u);
    EXPECT_EQ(h.counts[23], 1u);
    EXPECT_EQ(h.total, 4u);
}

TEST(Histogram, SingleValueAndClosedLastBin) {
    std::vector<double> one{5.0};
    auto h = histogram(one, uniform_bins(0, 10, 5));
    EXPECT_EQ(std::count_if(h.counts.begin(), h.counts.end(), [](auto c) { return c > 0; }), 1);
    EXPECT_EQ(h.counts[2], 1u);

    std::vector<double> edge{10.0};
    EXPECT_EQ(histogram(edge, uniform_bins(0, 10, 5)).counts[4], 1u);
}

TEST(Histogram, Errors) {
    std::vector<double> none;
    EXPECT_THROW(histogram(none, integer_bins(0, 3)), std::invalid_argument);
    std::vector<double> v{1.0};
    EXPECT_THROW(histogram(v, {0.0, 0.0, 1.0}), std::invalid_argument);
    std::vector<double> outside{-1.0};
    EXPECT_THROW(histogram(outside, integer_bins(0, 3)), std::domain_error);
}

// 100 pickups: three in each of the other 23 hours, the remaining 31 at hour 19.
TEST(Histogram, ConstructedModeAtHour19) {
    std::vector<double> v;
    for (int h = 0; h < 24; ++h)
        if (h != 19) for (int i = 0; i < 3; ++i) v.push_back(h);
    while (v.size() < 100) v.push_back(19);
    ASSERT_EQ(v.size(), 100u);
    auto h = histogram(v, integer_bins(0, 23));
    EXPECT_EQ(mode_bin(h), 19u);
    EXPECT_EQ(h.counts[19], 31u);
}

TEST(Histogram, TotalAlwaysMatchesInputLength) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 24);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(1 + rng() % 500);
        for (auto& x : v) x = u(rng);
        auto h = histogram(v, integer_bins(0, 23));
        std::size_t s = 0;
        for (auto c : h.counts) s += c;
        ASSERT_EQ(s, v.size());
        ASSERT_EQ(h.total, v.size());
    }
}

TEST(Pearson, SelfAndNegation) {
    std::vector<double> x{1, 5, 2, 8, 3.5};
    std::vector<double> neg;
    for (double v : x) neg.push_back(-v);
    EXPECT_EQ(pearson_correlation(x, x), 1.0);
    EXPECT_EQ(pearson_correlation(x, neg), -1.0);
}

TEST(Pearson, HandComputedOracle) {
    // means 2.5 and 3.75; Sxy = 3.5, Sxx = 5, Syy = 4.75
    std::vector<double> x{1, 2, 3, 4}, y{2, 4, 5, 4};
    EXPECT_NEAR(pearson_correlation(x, y), 3.5 / std::sqrt(5.0 * 4.75), 1e-15);
    EXPECT_NEAR(pearson_correlation(x, y), 0.7181848464596079, 1e-12);
}

TEST(Pearson, Errors) {
    std::vector<double> x{1, 2, 3}, c{2, 2, 2}, shorter{1, 2};
    EXPECT_THROW(pearson_correlation(x, c), UndefinedCorrelation);
    EXPECT_THROW(pearson_correlation(x, shorter), std::invalid_argument);
    std::vector<double> one{1};
    EXPECT_THROW(pearson_correlation(one, one), std::invalid_argument);
}

TEST(CorrelationMatrix, IdenticalColumns) {
    auto m = correlation_matrix({{"a", {1, 2, 4, 7}}, {"b", {1, 2, 4, 7}}});
    EXPECT_EQ(*m.values[0][1], 1.0);
    EXPECT_EQ(*m.values[1][0], 1.0);
}

TEST(CorrelationMatrix, IndependentSamplesNearZero) {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> n01;
    std::vector<NamedColumn> cols{{"a", {}}, {"b", {}}, {"c", {}}};
    for (auto& c : cols)
        for (int i = 0; i < 10000; ++i) c.values.push_back(n01(rng));
    auto m = correlation_matrix(cols);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            if (i != j) EXPECT_LT(std::abs(*m.values[i][j]), 0.1);
}

TEST(CorrelationMatrix, MatchesElementwisePearsonAndIsSymmetric) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-5, 5);
    std::vector<NamedColumn> cols{{"day", {}}, {"hour", {}}, {"duration", {}}, {"distance", {}}};
    for (int i = 0; i < 200; ++i) {
        const double base = u(rng);
        cols[0].values.push_back(u(rng));
        cols[1].values.push_back(base + u(rng));
        cols[2].values.push_back(2 * base + 0.1 * u(rng));
        cols[3].values.push_back(-base);
    }
    auto m = correlation_matrix(cols);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(*m.values[i][i], 1.0);
        for (std::size_t j = 0; j < 4; ++j) {
            EXPECT_EQ(m.values[i][j], m.values[j][i]);
            if (i != j) EXPECT_EQ(*m.values[i][j], pearson_correlation(cols[i].values, cols[j].values));
        }
    }
}

TEST(CorrelationMatrix, ZeroVarianceCellFlagged) {
    auto m = correlation_matrix({{"a", {1, 2, 3}}, {"flat", {4, 4, 4}}});
    EXPECT_FALSE(m.values[0][1].has_value());
    EXPECT_EQ(*m.values[1][1], 1.0);
}

TEST(DemandByKey, OneOrderPerWeekday) {
    std::vector<FoodOrderRecord> orders;
    for (int d = 0; d < 7; ++d) orders.push_back({1, 1, 1, 1, 1, d, 12, 1});
    auto k = demand_by_key(orders, DemandKey::day_of_week);
    ASSERT_EQ(k.counts.size(), 7u);
    for (auto c : k.counts) EXPECT_EQ(c, 1u);
}

TEST(DemandByKey, WeekendHeavyFixturePeaksFridayOrSaturday) {
    std::vector<FoodOrderRecord> orders;
    const int per_day[7] = {10, 9, 11, 12, 25, 27, 14};
    for (int d = 0; d < 7; ++d)
        for (int i = 0; i < per_day[d]; ++i) orders.push_back({i, i, 1, 1, 1, d, 19, 1});
    auto k = demand_by_key(orders, DemandKey::day_of_week);
    EXPECT_TRUE(k.argmax() == 4 || k.argmax() == 5);
    EXPECT_STREQ(kDayNames[k.argmax()], "Saturday");
    EXPECT_EQ(k.total(), orders.size());
}

TEST(DemandByKey, EmptyInputIsZeroFilled) {
    std::vector<FeatureRow> none;
    auto k = demand_by_key(none, DemandKey::day_of_month);
    EXPECT_EQ(k.counts.size(), 31u);
    EXPECT_EQ(k.first_value, 1);
    EXPECT_EQ(k.total(), 0u);
}

TEST(TopN, OrderingAndTiebreak) {
    std::map<std::int64_t, std::size_t> m{{1, 3}, {2, 5}, {3, 1}};
    EXPECT_EQ(top_n(m, 2), (Ranking{{2, 5}, {1, 3}}));
    EXPECT_EQ(top_n(m, 10), (Ranking{{2, 5}, {1, 3}, {3, 1}}));
    std::map<std::int64_t, std::size_t> tie{{7, 2}, {4, 2}};
    EXPECT_EQ(top_n(tie, 1), (Ranking{{4, 2}}));
}

TEST(TopN, PropertySortedWithIdTiebreak) {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        std::unordered_map<std::int64_t, std::size_t> m;
        const int n = 1 + static_cast<int>(rng() % 60);
        for (int i = 0; i < n; ++i) m[static_cast<std::int64_t>(rng() % 200)] = rng() % 6;
        const std::size_t want = 1 + rng() % 15;
        auto r = top_n(m, want);
        ASSERT_EQ(r.size(), std::min(want, m.size()));
        for (std::size_t i = 1; i < r.size(); ++i) {
            ASSERT_TRUE(r[i - 1].second > r[i].second ||
                        (r[i - 1].second == r[i].second && r[i - 1].first < r[i].first));
        }
        // nothing left out outranks the last kept entry
        if (!r.empty())
            for (const auto& [id, c] : m) {
                if (std::find(r.begin(), r.end(), std::pair{id, c}) != r.end()) continue;
                ASSERT_TRUE(c < r.back().second || (c == r.back().second && id > r.back().first));
            }
    }
}

namespace {

FeatureRow row(int dow, int hod, double minutes) {
    FeatureRow f;
    f.pickup_dow = dow;
    f.pickup_hour = hod;
    f.trip_duration_min = minutes;
    return f;
}

}  // namespace

TEST(GroupedDurationStats, SingletonGroups) {
    auto stats = grouped_duration_stats({row(0, 1, 12.5), row(3, 1, 7.0)}, DemandKey::day_of_week);
    ASSERT_EQ(stats.size(), 2u);
    for (const auto& s : stats) {
        EXPECT_EQ(s.mean, s.median);
        EXPECT_EQ(s.count, 1u);
    }
}

TEST(GroupedDurationStats, ThreeValueGroup) {
    auto stats = grouped_duration_stats({row(2, 0, 10), row(2, 0, 30), row(2, 0, 20)},
                                        DemandKey::day_of_week);
    ASSERT_EQ(stats.size(), 1u);
    EXPECT_EQ(stats[0].mean, 20.0);
    EXPECT_EQ(stats[0].median, 20.0);
    EXPECT_EQ(stats[0].p25, 10.0);
    EXPECT_EQ(stats[0].p75, 20.0);
}

TEST(GroupedDurationStats, EveningTripsLonger) {
    std::vector<FeatureRow> rows;
    for (int h = 0; h < 24; ++h)
        for (int i = 0; i < 5; ++i) rows.push_back(row(0, h, 8.0 + h * 0.8 + i));
    rows.push_back(row(0, 3, 500.0));  // pathological, excluded by the 180-minute cap
    auto stats = grouped_duration_stats(rows, DemandKey::hour_of_day);
    double evening = 0, night = 0;
    int ne = 0, nn = 0;
    for (const auto& s : stats) {
        EXPECT_LE(s.p25, s.median);
        EXPECT_LE(s.median, s.p75);
        if (s.group_key >= 18) {
            evening += s.mean;
            ++ne;
        } else if (s.group_key < 6) {
            night += s.mean;
            ++nn;
        }
    }
    EXPECT_GT(evening / ne, night / nn);
    EXPECT_EQ(stats[3].count, 5u);
}

TEST(GroupedDurationStats, EmptyInputRejected) {
    EXPECT_THROW(grouped_duration_stats({}, DemandKey::hour_of_day), std::invalid_argument);
}
