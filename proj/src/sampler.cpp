#include "cpmmg/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cpmmg/series.hpp"

namespace cpmmg {

namespace {

constexpr double kYear = static_cast<double>(kHoursPerYear);

/// First whole hour whose midpoint is at or after `time`.
std::size_t hour_boundary(double time) {
  const double h = std::ceil(time - 0.5);
  if (h <= 0.0) return 0;
  if (h >= kYear) return kHoursPerYear;
  return static_cast<std::size_t>(h);
}

}  // namespace

double draw_interval(double rate_per_year, Rng& rng) {
  if (rate_per_year <= 0.0) return std::numeric_limits<double>::infinity();
  return -std::log(rng.uniform_open()) / rate_per_year * kYear;
}

bool StateTimeline::up_at(double time) const {
  for (const auto& iv : intervals) {
    if (time >= iv.start && time < iv.end) return iv.up;
  }
  return intervals.empty() ? true : intervals.back().up;
}

SamplerState::SamplerState(const CaseModel& model, std::uint64_t master_seed)
    : up_(model.components.size(), true), remaining_(model.components.size(), -1.0) {
  rngs_.reserve(model.components.size());
  for (const auto& c : model.components) rngs_.emplace_back(substream_seed(master_seed, c.id));
}

std::vector<StateTimeline> build_timelines(const CaseModel& model, std::size_t /*year*/, SamplerState& state) {
  std::vector<StateTimeline> out(model.components.size());
  for (std::size_t c = 0; c < model.components.size(); ++c) {
    const auto& spec = model.components[c];
    Rng& rng = state.rngs_[c];
    StateTimeline& tl = out[c];
    tl.component = static_cast<ComponentIndex>(c);
    bool up = state.up_[c];
    double left = state.remaining_[c];
    if (left < 0.0) left = draw_interval(up ? spec.failure_rate : spec.repair_rate, rng);
    double t = 0.0;
    for (;;) {
      const double end = t + left;
      if (end >= kYear) {
        tl.intervals.push_back({t, kYear, up});
        tl.residual = end - kYear;
        break;
      }
      tl.intervals.push_back({t, end, up});
      t = end;
      up = !up;
      left = draw_interval(up ? spec.failure_rate : spec.repair_rate, rng);
    }
    state.up_[c] = up;
    state.remaining_[c] = tl.residual;
  }
  return out;
}

bool ContingencyWindow::contains(ComponentIndex c) const {
  return std::any_of(failed.begin(), failed.end(), [&](const FailedComponent& f) { return f.component == c; });
}

std::vector<ContingencyWindow> contingency_windows(const std::vector<StateTimeline>& timelines) {
  struct Event {
    std::size_t hour;
    bool down;  // true: component goes down at `hour`
    ComponentIndex component;
    double repair_end;
  };
  std::vector<Event> events;
  for (const auto& tl : timelines) {
    for (std::size_t k = 0; k < tl.intervals.size(); ++k) {
      const auto& iv = tl.intervals[k];
      if (iv.up) continue;
      const std::size_t h0 = hour_boundary(iv.start);
      const std::size_t h1 = hour_boundary(iv.end);
      if (h1 <= h0) continue;
      const double repair_end = k + 1 == tl.intervals.size() ? iv.end + tl.residual : iv.end;
      events.push_back({h0, true, tl.component, repair_end});
      events.push_back({h1, false, tl.component, repair_end});
    }
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.hour != b.hour) return a.hour < b.hour;
    if (a.down != b.down) return !a.down;  // repairs before new failures
    return a.component < b.component;
  });

  std::vector<ContingencyWindow> out;
  std::vector<FailedComponent> failed;
  std::size_t cursor = 0;
  std::size_t i = 0;
  while (i < events.size()) {
    const std::size_t hour = events[i].hour;
    if (!failed.empty() && hour > cursor) out.push_back({cursor, hour, failed});
    for (; i < events.size() && events[i].hour == hour; ++i) {
      const auto& e = events[i];
      if (e.down) {
        failed.push_back({e.component, e.repair_end});
      } else {
        std::erase_if(failed, [&](const FailedComponent& f) { return f.component == e.component; });
      }
    }
    std::sort(failed.begin(), failed.end(),
              [](const FailedComponent& a, const FailedComponent& b) { return a.component < b.component; });
    cursor = hour;
  }
  return out;
}

}  // namespace cpmmg
