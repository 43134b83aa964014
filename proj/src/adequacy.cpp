#include "cpmmg/adequacy.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "cpmmg/error.hpp"

namespace cpmmg {

std::string_view to_string(LedgerMode mode) {
  switch (mode) {
    case LedgerMode::jo: return "JO";
    case LedgerMode::sd: return "SD";
    case LedgerMode::io: return "IO";
    case LedgerMode::gc: return "GC";
  }
  return "?";
}

LedgerMode ledger_mode(OperationMode mode) {
  switch (mode) {
    case OperationMode::no: return LedgerMode::gc;
    case OperationMode::jo: return LedgerMode::jo;
    case OperationMode::io: return LedgerMode::io;
    case OperationMode::sd: return LedgerMode::sd;
  }
  return LedgerMode::gc;
}

YearRecord YearRecord::empty(const CaseModel& model, std::size_t year) {
  YearRecord r;
  r.year = year;
  for (const auto& mg : model.microgrids) {
    const std::size_t R = mg.catalog.size();
    r.eens.emplace_back(R, std::array<double, kLedgerModes>{});
    r.ibgc.emplace_back(R, 0.0);
    r.sber.emplace_back(R, 0.0);
  }
  return r;
}

double YearRecord::total() const {
  double s = 0.0;
  for (const auto& mg : eens)
    for (const auto& seg : mg)
      for (double v : seg) s += v;
  return s;
}

void AdequacyLedger::add(YearRecord record) {
  const std::size_t y = record.year;
  if (!years_.emplace(y, std::move(record)).second) throw SimulationError("duplicate ledger year " + std::to_string(y));
}

void AdequacyLedger::merge(const AdequacyLedger& other) {
  for (const auto& [y, rec] : other.years_) add(rec);
}

void record_shedding(const PartSchedule& schedule, OperationMode mode, double delta_t, YearRecord& record) {
  const std::size_t col = static_cast<std::size_t>(ledger_mode(mode));
  auto& rows = record.eens.at(schedule.microgrid);
  for (std::size_t r = 0; r < schedule.shed.size(); ++r) {
    double e = 0.0;
    for (double x : schedule.shed[r]) {
      assert(x > -1e-6 && "negative shedding");
      e += std::max(0.0, x);
    }
    rows[r][col] += e * delta_t;
  }
}

IbgcSberIncrement run_ibgc_sber(const std::vector<JoParticipant>& participants, double lambda_thr) {
  IbgcSberIncrement out;
  for (const auto& p : participants) {
    out.ibgc.emplace_back(p.shed.size(), 0.0);
    out.sber.emplace_back(p.shed.size(), 0.0);
  }
  double expensive = 0.0;
  for (std::size_t i = 0; i < participants.size(); ++i) {
    const auto& p = participants[i];
    if (!(p.sell > 0.0)) continue;
    double shed = 0.0;
    for (std::size_t r = 0; r < p.shed.size(); ++r) {
      shed += p.shed[r];
      if (p.cost[r] >= lambda_thr) expensive += p.shed[r];
    }
    if (!(shed > 0.0)) continue;
    double d1 = p.sell;
    for (std::size_t r = p.shed.size(); r-- > 0;) {
      const double x = std::min(p.shed[r], d1);
      out.ibgc[i][r] = x;
      d1 -= x;
    }
  }
  if (!(expensive > 0.0)) return out;
  for (std::size_t i = 0; i < participants.size(); ++i) {
    const auto& p = participants[i];
    if (!(p.buy > 0.0)) continue;
    double d2 = p.buy;
    for (std::size_t k = 0; k < p.shed.size(); ++k) {
      const double x = std::min(p.demand[k] - p.shed[k], d2);
      out.sber[i][k] = x;
      d2 -= x;
    }
  }
  return out;
}

double AdequacyReport::microgrid_total(std::size_t mg) const {
  double s = 0.0;
  for (const auto& seg : eens.at(mg))
    for (double v : seg) s += v;
  return s;
}

double AdequacyReport::mode_total(LedgerMode mode) const {
  double s = 0.0;
  for (const auto& mg : eens)
    for (const auto& seg : mg) s += seg[static_cast<std::size_t>(mode)];
  return s;
}

std::optional<double> coefficient_of_variation(const std::vector<double>& totals) {
  const std::size_t n = totals.size();
  if (n < 2) return std::nullopt;
  double mean = 0.0;
  for (double v : totals) mean += v;
  mean /= static_cast<double>(n);
  if (mean <= 0.0) return std::nullopt;
  double ss = 0.0;
  for (double v : totals) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  return sd / (mean * std::sqrt(static_cast<double>(n)));
}

AdequacyReport summarize(const AdequacyLedger& ledger, const CaseModel& model) {
  AdequacyReport rep;
  rep.years = ledger.size();
  const YearRecord zero = YearRecord::empty(model, 0);
  rep.eens = zero.eens;
  rep.ibgc = zero.ibgc;
  rep.sber = zero.sber;
  for (const auto& mg : model.microgrids) rep.segment_costs.push_back(mg.catalog.costs);
  for (const auto& [y, rec] : ledger.years()) {
    for (std::size_t m = 0; m < rep.eens.size(); ++m) {
      for (std::size_t r = 0; r < rep.eens[m].size(); ++r) {
        for (std::size_t k = 0; k < kLedgerModes; ++k) rep.eens[m][r][k] += rec.eens[m][r][k];
        rep.ibgc[m][r] += rec.ibgc[m][r];
        rep.sber[m][r] += rec.sber[m][r];
      }
    }
    rep.yearly_totals.push_back(rec.total());
  }
  if (rep.years > 0) {
    const double n = static_cast<double>(rep.years);
    for (std::size_t m = 0; m < rep.eens.size(); ++m) {
      for (std::size_t r = 0; r < rep.eens[m].size(); ++r) {
        for (double& v : rep.eens[m][r]) v /= n;
        rep.ibgc[m][r] /= n;
        rep.sber[m][r] /= n;
      }
    }
  }
  for (std::size_t m = 0; m < rep.eens.size(); ++m) rep.eens_total += rep.microgrid_total(m);
  rep.cov = coefficient_of_variation(rep.yearly_totals);
  return rep;
}

std::vector<HistogramBin> histogram(const std::vector<double>& totals, double bin_width) {
  if (!(bin_width > 0.0)) throw ValidationError("histogram bin width must be positive");
  if (totals.empty()) throw ValidationError("histogram needs at least one year");
  const double hi = *std::max_element(totals.begin(), totals.end());
  const auto bins = static_cast<std::size_t>(std::floor(std::max(0.0, hi) / bin_width)) + 1;
  std::vector<HistogramBin> out(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].lower = static_cast<double>(b) * bin_width;
    out[b].upper = static_cast<double>(b + 1) * bin_width;
  }
  for (double v : totals) {
    auto b = static_cast<std::size_t>(std::floor(std::max(0.0, v) / bin_width));
    out[std::min(b, bins - 1)].count++;
  }
  return out;
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p);
  if (!f) throw SimulationError("cannot write " + p.string());
  f << std::setprecision(12);
  return f;
}

}  // namespace

void emit_reports(const AdequacyReport& report, const RunMetadata& meta, const std::filesystem::path& out_dir,
                  std::size_t histogram_bins) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw SimulationError("cannot create " + out_dir.string() + ": " + ec.message());

  {
    auto f = open_out(out_dir / "eens_by_mode.csv");
    f << "mg,segment,cost,mode,eens_mwh_per_year\n";
    for (std::size_t m = 0; m < report.eens.size(); ++m)
      for (std::size_t r = 0; r < report.eens[m].size(); ++r)
        for (std::size_t k = 0; k < kLedgerModes; ++k)
          f << m + 1 << ',' << r + 1 << ',' << report.segment_costs[m][r] << ','
            << to_string(static_cast<LedgerMode>(k)) << ',' << report.eens[m][r][k] << '\n';
  }
  {
    auto f = open_out(out_dir / "ibgc_sber.csv");
    f << "mg,segment,cost,ibgc_mwh_per_year,sber_mwh_per_year\n";
    for (std::size_t m = 0; m < report.ibgc.size(); ++m)
      for (std::size_t r = 0; r < report.ibgc[m].size(); ++r)
        f << m + 1 << ',' << r + 1 << ',' << report.segment_costs[m][r] << ',' << report.ibgc[m][r] << ','
          << report.sber[m][r] << '\n';
  }
  {
    auto f = open_out(out_dir / "convergence.csv");
    f << "years,year_total,running_mean,cov\n";
    double sum = 0.0;
    std::vector<double> prefix;
    for (std::size_t i = 0; i < report.yearly_totals.size(); ++i) {
      sum += report.yearly_totals[i];
      prefix.push_back(report.yearly_totals[i]);
      f << i + 1 << ',' << report.yearly_totals[i] << ',' << sum / static_cast<double>(i + 1) << ',';
      if (const auto c = coefficient_of_variation(prefix)) f << *c;
      f << '\n';
    }
  }
  {
    auto f = open_out(out_dir / "histogram.csv");
    f << "lower,upper,count\n";
    if (!report.yearly_totals.empty()) {
      const double hi = *std::max_element(report.yearly_totals.begin(), report.yearly_totals.end());
      const double width = hi > 0.0 ? hi / static_cast<double>(std::max<std::size_t>(histogram_bins, 1)) * (1 + 1e-9) : 1.0;
      for (const auto& b : histogram(report.yearly_totals, width))
        f << b.lower << ',' << b.upper << ',' << b.count << '\n';
    }
  }
  {
    nlohmann::ordered_json j;
    j["seed"] = meta.seed;
    j["years"] = meta.years;
    j["config_hash"] = meta.config_hash;
    j["flags"] = meta.flags;
    j["parameters"] = meta.parameters;
    j["eens_total_mwh_per_year"] = report.eens_total;
    j["cov"] = report.cov ? nlohmann::ordered_json(*report.cov) : nlohmann::ordered_json(nullptr);
    for (std::size_t k = 0; k < kLedgerModes; ++k)
      j["eens_by_mode"][std::string(to_string(static_cast<LedgerMode>(k)))] =
          report.mode_total(static_cast<LedgerMode>(k));
    for (std::size_t m = 0; m < report.eens.size(); ++m) j["eens_by_microgrid"].push_back(report.microgrid_total(m));
    auto f = open_out(out_dir / "summary.json");
    f << j.dump(2) << '\n';
  }
}

}  // namespace cpmmg
