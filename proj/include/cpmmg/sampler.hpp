#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cpmmg/casemodel.hpp"
#include "cpmmg/rng.hpp"

namespace cpmmg {

/// Exponential sojourn time in hours for a rate per year; +inf for rate 0.
double draw_interval(double rate_per_year, Rng& rng);

struct StateInterval {
  double start = 0.0;  // hours from the start of the year
  double end = 0.0;
  bool up = true;

  bool operator==(const StateInterval&) const = default;
};

/// One year of alternating up/down history. The last interval ends at
/// 8760; `residual` is how long its state continues into the next year.
struct StateTimeline {
  ComponentIndex component = kNoComponent;
  std::vector<StateInterval> intervals;
  double residual = 0.0;

  bool up_at(double time) const;
  bool operator==(const StateTimeline&) const = default;
};

/// Sampler state carried from year to year: one generator per component
/// plus the state and remaining sojourn at the year boundary.
class SamplerState {
 public:
  SamplerState(const CaseModel& model, std::uint64_t master_seed);

  std::size_t size() const { return rngs_.size(); }

 private:
  friend std::vector<StateTimeline> build_timelines(const CaseModel&, std::size_t, SamplerState&);

  std::vector<Rng> rngs_;
  std::vector<bool> up_;
  std::vector<double> remaining_;  // < 0: not yet drawn
};

/// Samples one year for every component in index (= id) order.
std::vector<StateTimeline> build_timelines(const CaseModel& model, std::size_t year, SamplerState& state);

struct FailedComponent {
  ComponentIndex component = kNoComponent;
  double repair_end = 0.0;  // hours from the start of the year, may exceed 8760

  bool operator==(const FailedComponent&) const = default;
};

/// Maximal run of hours with a constant, nonempty failed set. An hour h
/// counts as failed when the component is down at h + 0.5.
struct ContingencyWindow {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  std::vector<FailedComponent> failed;  // ascending component

  std::size_t hours() const { return end - start; }
  bool contains(ComponentIndex c) const;
  bool operator==(const ContingencyWindow&) const = default;
};

std::vector<ContingencyWindow> contingency_windows(const std::vector<StateTimeline>& timelines);

}  // namespace cpmmg
