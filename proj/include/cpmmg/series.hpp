#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cpmmg {

inline constexpr std::size_t kHoursPerDay = 24;
inline constexpr std::size_t kHoursPerYear = 8760;

/// Shape parameters of the seeded synthetic generator.
struct SyntheticSeriesParams {
  double wind_mean = 0.35;
  double wind_seasonal = 0.10;  // amplitude, peak in winter
  double wind_diurnal = 0.05;   // amplitude, peak at night
  double wind_noise = 0.15;     // half-width of the uniform noise band
  double pv_peak = 0.85;        // clear-sky noon factor at midsummer
  double pv_seasonal = 0.25;
  double pv_noise = 0.15;       // relative, multiplicative
  double price_mean = 0.045;
  double price_daily = 0.015;
  double price_noise = 0.005;

  bool operator==(const SyntheticSeriesParams&) const = default;
};

struct SeriesSpec {
  enum class Source : std::uint8_t { synthetic, csv };

  Source source = Source::synthetic;
  std::string csv_path;  // as written in the case file
  std::filesystem::path resolved_csv;
  std::size_t years = 1;  // length of the generated cycle
  std::uint64_t seed = 2021;
  bool clamp = true;
  SyntheticSeriesParams synthetic;

  bool operator==(const SeriesSpec& other) const {
    return source == other.source && csv_path == other.csv_path && years == other.years &&
           seed == other.seed && clamp == other.clamp && synthetic == other.synthetic;
  }
};

/// Hourly exogenous data. Indexing wraps, so a one-year cycle can drive a
/// multi-year study.
struct ExogenousSeries {
  std::vector<double> wind_cf;
  std::vector<double> pv_cf;
  std::vector<double> load_frac;
  std::vector<double> price;
  double delta_t = 1.0;

  std::size_t hours() const { return price.size(); }
  std::size_t days() const { return hours() / kHoursPerDay; }
  std::size_t wrap(std::size_t hour) const { return hour % hours(); }
  double mean_price() const;
};

/// IEEE-RTS hourly demand as a fraction of the annual peak. Weeks start on
/// Monday; hour 8760 onward wraps into the last week.
double rts_load_fraction(std::size_t hour_of_year);

ExogenousSeries build_series(const SeriesSpec& spec, std::size_t horizon_years, std::uint64_t rng_seed);
ExogenousSeries build_series(const SeriesSpec& spec);

/// Reads `hour,wind_cf,pv_cf,load_frac,price` rows.
ExogenousSeries read_series_csv(const std::filesystem::path& path, bool clamp);
void write_series_csv(const ExogenousSeries& series, const std::filesystem::path& path);

}  // namespace cpmmg
