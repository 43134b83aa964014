#include "cpmmg/series.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <sstream>

#include "cpmmg/error.hpp"
#include "cpmmg/rng.hpp"

namespace cpmmg {

namespace {

// IEEE Reliability Test System (1979) load model, percentages.
constexpr std::array<double, 52> kWeeklyPeak = {
    86.2, 90.0, 87.8, 83.4, 88.0, 84.1, 83.2, 80.6, 74.0, 73.7, 71.5, 72.7, 70.4,
    75.0, 72.1, 80.0, 75.4, 83.7, 87.0, 88.0, 85.6, 81.1, 90.0, 88.7, 89.6, 86.1,
    75.5, 81.6, 80.1, 88.0, 72.2, 77.6, 80.0, 72.9, 72.6, 70.5, 78.0, 69.5, 72.4,
    72.4, 74.3, 74.4, 80.0, 88.1, 88.5, 90.9, 94.0, 89.0, 94.2, 97.0, 100.0, 95.2};

// Monday .. Sunday
constexpr std::array<double, 7> kDailyPeak = {93.0, 100.0, 98.0, 96.0, 94.0, 77.0, 75.0};

using HourRow = std::array<double, 24>;
constexpr HourRow kWinterWeekday = {67, 63, 60, 59, 59, 60, 74, 86, 95, 96, 96, 95,
                                    95, 95, 93, 94, 99, 100, 100, 96, 91, 83, 73, 63};
constexpr HourRow kWinterWeekend = {78, 72, 68, 66, 64, 65, 66, 70, 80, 88, 90, 91,
                                    90, 88, 87, 87, 91, 100, 99, 97, 94, 92, 87, 81};
constexpr HourRow kSummerWeekday = {64, 60, 58, 56, 56, 58, 64, 76, 87, 95, 99, 100,
                                    99, 100, 100, 97, 96, 96, 93, 92, 92, 93, 87, 72};
constexpr HourRow kSummerWeekend = {74, 70, 66, 65, 64, 62, 62, 66, 81, 86, 91, 93,
                                    93, 92, 91, 91, 92, 94, 95, 95, 100, 93, 88, 80};
constexpr HourRow kSpringFallWeekday = {63, 62, 60, 58, 59, 65, 72, 85, 95, 99, 100, 99,
                                        93, 92, 90, 88, 90, 92, 96, 98, 96, 90, 80, 70};
constexpr HourRow kSpringFallWeekend = {75, 73, 69, 66, 65, 65, 68, 74, 83, 89, 92, 94,
                                        91, 90, 90, 86, 85, 88, 92, 100, 97, 95, 90, 85};

const HourRow& hourly_row(std::size_t week, bool weekend) {
  // weeks are 0-based here: winter 1-8 & 44-52, summer 18-30, else spring/fall
  const std::size_t w = week + 1;
  if (w <= 8 || w >= 44) return weekend ? kWinterWeekend : kWinterWeekday;
  if (w >= 18 && w <= 30) return weekend ? kSummerWeekend : kSummerWeekday;
  return weekend ? kSpringFallWeekend : kSpringFallWeekday;
}

void check_factor(double value, std::size_t hour, const char* what) {
  if (!(value >= 0.0 && value <= 1.0)) {
    std::ostringstream msg;
    msg << "series: " << what << " at hour " << hour << " is " << value << ", outside [0, 1]";
    throw ValidationError(msg.str());
  }
}

}  // namespace

double ExogenousSeries::mean_price() const {
  if (price.empty()) return 0.0;
  return std::accumulate(price.begin(), price.end(), 0.0) / static_cast<double>(price.size());
}

double rts_load_fraction(std::size_t hour_of_year) {
  const std::size_t day = hour_of_year / kHoursPerDay;
  const std::size_t week = std::min<std::size_t>(day / 7, 51);
  const std::size_t weekday = day % 7;
  const std::size_t hour = hour_of_year % kHoursPerDay;
  const bool weekend = weekday >= 5;
  return kWeeklyPeak[week] / 100.0 * kDailyPeak[weekday] / 100.0 * hourly_row(week, weekend)[hour] / 100.0;
}

ExogenousSeries build_series(const SeriesSpec& spec, std::size_t horizon_years, std::uint64_t rng_seed) {
  if (spec.source == SeriesSpec::Source::csv) {
    return read_series_csv(spec.resolved_csv.empty() ? std::filesystem::path(spec.csv_path) : spec.resolved_csv,
                           spec.clamp);
  }
  if (horizon_years == 0) throw ValidationError("series: horizon must be at least one year");

  const auto& p = spec.synthetic;
  const std::size_t hours = horizon_years * kHoursPerYear;
  ExogenousSeries out;
  out.wind_cf.resize(hours);
  out.pv_cf.resize(hours);
  out.load_frac.resize(hours);
  out.price.resize(hours);

  Rng wind_rng(substream_seed(rng_seed, "wind"));
  Rng pv_rng(substream_seed(rng_seed, "pv"));
  Rng price_rng(substream_seed(rng_seed, "price"));
  constexpr double two_pi = 2.0 * std::numbers::pi;

  for (std::size_t t = 0; t < hours; ++t) {
    const std::size_t hour_of_year = t % kHoursPerYear;
    const double year_phase = static_cast<double>(hour_of_year) / static_cast<double>(kHoursPerYear);
    const double hour = static_cast<double>(t % kHoursPerDay);

    // wind: stronger in winter and at night
    double wind = p.wind_mean + p.wind_seasonal * std::cos(two_pi * year_phase) +
                  p.wind_diurnal * std::cos(two_pi * hour / 24.0) + wind_rng.uniform(-p.wind_noise, p.wind_noise);
    // pv: half-sine between 06:00 and 18:00, scaled by season
    double daylight = std::sin(std::numbers::pi * (hour - 6.0) / 12.0);
    double pv = 0.0;
    const double noise = pv_rng.uniform(-p.pv_noise, p.pv_noise);
    if (daylight > 0.0) {
      const double season = 1.0 - p.pv_seasonal * std::cos(two_pi * year_phase);
      pv = p.pv_peak * season * daylight * (1.0 + noise);
    }
    const double price = p.price_mean - p.price_daily * std::cos(two_pi * (hour - 2.0) / 24.0) +
                         price_rng.uniform(-p.price_noise, p.price_noise);

    if (spec.clamp) {
      wind = std::clamp(wind, 0.0, 1.0);
      pv = std::clamp(pv, 0.0, 1.0);
    } else {
      check_factor(wind, t, "wind_cf");
      check_factor(pv, t, "pv_cf");
    }
    out.wind_cf[t] = wind;
    out.pv_cf[t] = pv;
    out.load_frac[t] = rts_load_fraction(hour_of_year);
    out.price[t] = std::max(price, 0.0);
  }
  return out;
}

ExogenousSeries build_series(const SeriesSpec& spec) { return build_series(spec, spec.years, spec.seed); }

ExogenousSeries read_series_csv(const std::filesystem::path& path, bool clamp) {
  std::ifstream in(path);
  if (!in) throw ValidationError("series: cannot open CSV '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("series: empty CSV '" + path.string() + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "hour,wind_cf,pv_cf,load_frac,price") {
    throw ValidationError("series: " + path.string() + ":1: expected header 'hour,wind_cf,pv_cf,load_frac,price'");
  }

  ExogenousSeries out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<double, 5> cols{};
    std::istringstream row(line);
    std::string cell;
    std::size_t c = 0;
    for (; c < cols.size() && std::getline(row, cell, ','); ++c) {
      try {
        std::size_t used = 0;
        cols[c] = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ValidationError("series: " + path.string() + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    if (c != cols.size() || std::getline(row, cell, ',')) {
      throw ValidationError("series: " + path.string() + ":" + std::to_string(line_no) + ": expected 5 columns");
    }
    if (static_cast<std::size_t>(cols[0]) != out.price.size()) {
      throw ValidationError("series: " + path.string() + ":" + std::to_string(line_no) + ": hour column out of sequence");
    }
    const std::size_t t = out.price.size();
    for (int k : {1, 2, 3}) {
      if (clamp) {
        cols[k] = std::clamp(cols[k], 0.0, 1.0);
      } else {
        check_factor(cols[k], t, k == 1 ? "wind_cf" : (k == 2 ? "pv_cf" : "load_frac"));
      }
    }
    out.wind_cf.push_back(cols[1]);
    out.pv_cf.push_back(cols[2]);
    out.load_frac.push_back(cols[3]);
    out.price.push_back(cols[4]);
  }
  if (out.price.empty() || out.price.size() % kHoursPerDay != 0) {
    throw ValidationError("series: " + path.string() + " has " + std::to_string(out.price.size()) +
                          " rows; length must be a positive multiple of 24");
  }
  return out;
}

void write_series_csv(const ExogenousSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("series: cannot write '" + path.string() + "'");
  out << "hour,wind_cf,pv_cf,load_frac,price\n" << std::setprecision(17);
  for (std::size_t t = 0; t < series.hours(); ++t) {
    out << t << ',' << series.wind_cf[t] << ',' << series.pv_cf[t] << ',' << series.load_frac[t] << ','
        << series.price[t] << '\n';
  }
}

}  // namespace cpmmg
