#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "railpad/error.hpp"
#include "railpad/optimize.hpp"
#include "railpad/stats.hpp"
#include "railpad/temperature.hpp"
#include "railpad/text.hpp"
#include "railpad/time.hpp"

using namespace railpad;
namespace fs = std::filesystem;

TEST(Time, Iso8601RoundTrip) {
  const Timestamp t = parse_iso8601("2018-03-14T15:09:26Z");
  EXPECT_EQ(format_iso8601(t), "2018-03-14T15:09:26Z");
  EXPECT_EQ(parse_iso8601("2018-03-14T15:09:26"), t);
  EXPECT_THROW(parse_iso8601("2018-13-01T00:00:00Z"), DataError);
  EXPECT_THROW(parse_iso8601("yesterday"), DataError);
}

TEST(Time, MonthArithmetic) {
  const Timestamp t = parse_iso8601("2017-11-20T08:00:00Z");
  EXPECT_EQ(month_label(t), "2017-11");
  EXPECT_EQ(format_iso8601(month_start(t)), "2017-11-01T00:00:00Z");
  EXPECT_EQ(month_label(add_months(month_start(t), 2)), "2018-01");
  EXPECT_EQ(month_label(add_months(month_start(t), -11)), "2016-12");
  EXPECT_EQ(months_between(t, parse_iso8601("2019-02-01T00:00:00Z")), 15);
}

TEST(Text, DoubleRoundTripIsBitExact) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
    EXPECT_EQ(text::parse_double(text::format_double(x)), x);
  }
  EXPECT_TRUE(std::isnan(text::parse_double(text::format_double(std::nan("")))));
  EXPECT_THROW(text::parse_double("1.5x"), DataError);
  EXPECT_THROW(text::parse_double(""), DataError);
  EXPECT_EQ(text::parse_int(" 42 "), 42);
}

TEST(Text, SplitAndTrim) {
  const auto f = text::split("a,,b", ',');
  ASSERT_EQ(f.size(), 3u);
  EXPECT_EQ(f[1], "");
  EXPECT_EQ(text::trim("  x y \r\n"), "x y");
}

TEST(Stats, Basics) {
  const std::vector<double> x = {3, 1, 4, 1, 5};
  EXPECT_DOUBLE_EQ(stats::mean(x), 2.8);
  EXPECT_DOUBLE_EQ(stats::median(x), 3.0);
  EXPECT_DOUBLE_EQ(stats::mad(x), 2.0);  // |x - 3| = 0,2,1,2,2
  EXPECT_DOUBLE_EQ(stats::variance(std::vector<double>{-1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(stats::percentile(std::vector<double>{0, 10}, 0.25), 2.5);
}

TEST(Optimize, NelderMeadRosenbrock) {
  auto f = [](std::span<const double> x) {
    return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
  };
  const auto r = optimize::nelder_mead(f, {-1.2, 1.0}, {0.5, 0.5});
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x[0], 1.0, 1e-4);
  EXPECT_NEAR(r.x[1], 1.0, 1e-4);
}

TEST(Optimize, InfiniteValuesActAsConstraint) {
  auto f = [](std::span<const double> x) { return x[0] < 1.0 ? INFINITY : (x[0] - 0.5) * (x[0] - 0.5); };
  const auto r = optimize::nelder_mead(f, {2.0}, {0.3});
  EXPECT_GE(r.x[0], 1.0);
  EXPECT_NEAR(r.x[0], 1.0, 1e-6);
}

TEST(Temperature, NearestAndCoverage) {
  std::vector<TemperatureSample> s;
  const Timestamp t0 = parse_iso8601("2018-01-01T00:00:00Z");
  for (int h = 0; h < 5; ++h) s.push_back({t0 + std::chrono::hours(h), static_cast<double>(h)});
  const TemperatureSeries series(s);
  EXPECT_EQ(series.nearest(t0 + std::chrono::minutes(89)).value(), 1.0);
  EXPECT_EQ(series.nearest(t0 + std::chrono::minutes(91)).value(), 2.0);
  EXPECT_FALSE(series.nearest(t0 - std::chrono::hours(2)).has_value());
  EXPECT_FALSE(series.covers(t0 + std::chrono::hours(6)));
  std::swap(s[0], s[1]);
  EXPECT_THROW(TemperatureSeries{s}, InvalidArgument);
}

TEST(Temperature, CsvRoundTrip) {
  std::vector<TemperatureSample> s;
  const Timestamp t0 = parse_iso8601("2018-01-01T00:00:00Z");
  for (int h = 0; h < 48; ++h) s.push_back({t0 + std::chrono::hours(h), 0.1 * h - 3.3});
  const fs::path p = fs::temp_directory_path() / "railpad_temp_rt.csv";
  write_temperature_csv(p, TemperatureSeries(s));
  const auto back = read_temperature_csv(p);
  ASSERT_EQ(back.size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(back.samples()[i].time, s[i].time);
    EXPECT_EQ(back.samples()[i].temp_c, s[i].temp_c);
  }
  fs::remove(p);
}
