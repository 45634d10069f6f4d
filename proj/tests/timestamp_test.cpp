#include <gtest/gtest.h>

#include "mobfc/timestamp.hpp"

using mobfc::Timestamp;
using mobfc::parse_timestamp;

TEST(Timestamp, ParsesDefaultFormat) {
    auto t = parse_timestamp("2013-01-15 23:45:07");
    ASSERT_TRUE(t);
    EXPECT_EQ(t->year(), 2013);
    EXPECT_EQ(t->month(), 1u);
    EXPECT_EQ(t->day(), 15u);
    EXPECT_EQ(t->hour(), 23);
    EXPECT_EQ(t->minute(), 45);
    EXPECT_EQ(t->second(), 7);
    EXPECT_EQ(t->to_string(), "2013-01-15 23:45:07");
}

TEST(Timestamp, RejectsMalformedAndInvalidDates) {
    EXPECT_FALSE(parse_timestamp(""));
    EXPECT_FALSE(parse_timestamp("2013-01-15"));
    EXPECT_FALSE(parse_timestamp("2013-01-15 24:00:00"));
    EXPECT_FALSE(parse_timestamp("2013-02-30 00:00:00"));
    EXPECT_FALSE(parse_timestamp("2013-01-15 10:00:00x"));
    EXPECT_FALSE(parse_timestamp("2013/01/15 10:00:00"));
}

TEST(Timestamp, CustomFormat) {
    auto t = parse_timestamp("01/31/2013 07:05", "%m/%d/%Y %H:%M");
    ASSERT_TRUE(t);
    EXPECT_EQ(t->to_string(), "2013-01-31 07:05:00");
}

TEST(Timestamp, DayOfWeekMondayZero) {
    // 2013-01-14 was a Monday, 2013-01-20 a Sunday.
    EXPECT_EQ(Timestamp::from_civil(2013, 1, 14).day_of_week(), 0);
    EXPECT_EQ(Timestamp::from_civil(2013, 1, 15).day_of_week(), 1);
    EXPECT_EQ(Timestamp::from_civil(2013, 1, 20).day_of_week(), 6);
    EXPECT_EQ(Timestamp::from_civil(2000, 2, 29).day_of_week(), 1);  // Tuesday
    EXPECT_EQ(Timestamp::from_civil(1970, 1, 1).day_of_week(), 3);   // Thursday
}

TEST(Timestamp, Arithmetic) {
    auto a = Timestamp::from_civil(2013, 1, 31, 23, 50, 0);
    auto b = Timestamp::from_civil(2013, 2, 1, 0, 20, 0);
    EXPECT_EQ((b - a).count(), 1800);
    EXPECT_EQ(b.floor_day().to_string(), "2013-02-01 00:00:00");
    EXPECT_EQ(a.floor_hour().to_string(), "2013-01-31 23:00:00");
}
