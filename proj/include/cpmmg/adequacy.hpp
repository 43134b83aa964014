#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cpmmg/casemodel.hpp"
#include "cpmmg/dispatch.hpp"
#include "cpmmg/zoning.hpp"

namespace cpmmg {

/// Ledger columns; GC is grid-connected (NO) operation.
enum class LedgerMode : std::uint8_t { jo, sd, io, gc };
inline constexpr std::size_t kLedgerModes = 4;

std::string_view to_string(LedgerMode mode);
LedgerMode ledger_mode(OperationMode mode);

/// Everything one sample year contributes, in MWh.
struct YearRecord {
  std::size_t year = 0;
  std::vector<std::vector<std::array<double, kLedgerModes>>> eens;  // [mg][segment][mode]
  std::vector<std::vector<double>> ibgc;                             // [mg][segment]
  std::vector<std::vector<double>> sber;

  static YearRecord empty(const CaseModel& model, std::size_t year);
  double total() const;
  bool operator==(const YearRecord&) const = default;
};

/// Year records keyed by year index; merging is order independent.
class AdequacyLedger {
 public:
  void add(YearRecord record);
  void merge(const AdequacyLedger& other);
  const std::map<std::size_t, YearRecord>& years() const { return years_; }
  std::size_t size() const { return years_.size(); }

 private:
  std::map<std::size_t, YearRecord> years_;
};

/// Adds the schedule's shedding (energy) to the record under the mode's column.
void record_shedding(const PartSchedule& schedule, OperationMode mode, double delta_t, YearRecord& record);

/// One microgrid part's JO-hour results, segments in ascending cost.
struct JoParticipant {
  std::size_t microgrid = 0;
  double buy = 0.0;
  double sell = 0.0;
  std::vector<double> shed;
  std::vector<double> demand;
  std::vector<double> cost;
};

struct IbgcSberIncrement {
  std::vector<std::vector<double>> ibgc;  // [participant][segment], MW
  std::vector<std::vector<double>> sber;
};

/// IbGC/SbER attribution for one hour of joint operation.
IbgcSberIncrement run_ibgc_sber(const std::vector<JoParticipant>& participants, double lambda_thr);

struct AdequacyReport {
  std::size_t years = 0;
  std::vector<std::vector<double>> segment_costs;                    // [mg][segment]
  std::vector<std::vector<std::array<double, kLedgerModes>>> eens;  // annual means
  std::vector<std::vector<double>> ibgc, sber;
  std::vector<double> yearly_totals;  // ordered by year index
  double eens_total = 0.0;
  std::optional<double> cov;  // absent for a single year or zero mean

  double microgrid_total(std::size_t mg) const;
  double mode_total(LedgerMode mode) const;
};

AdequacyReport summarize(const AdequacyLedger& ledger, const CaseModel& model);

/// std / (mean * sqrt(N)); empty for N < 2 or zero mean.
std::optional<double> coefficient_of_variation(const std::vector<double>& totals);

struct HistogramBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
};

/// Fixed-width bins from 0 to past the largest total.
std::vector<HistogramBin> histogram(const std::vector<double>& totals, double bin_width);

/// Run metadata echoed into summary.json.
struct RunMetadata {
  std::uint64_t seed = 0;
  std::size_t years = 0;
  std::map<std::string, bool> flags;
  std::map<std::string, double> parameters;
  std::string config_hash;
  double wall_seconds = 0.0;
};

/// Writes eens_by_mode.csv, ibgc_sber.csv, convergence.csv, histogram.csv
/// and summary.json.
void emit_reports(const AdequacyReport& report, const RunMetadata& meta, const std::filesystem::path& out_dir,
                  std::size_t histogram_bins = 20);

}  // namespace cpmmg
