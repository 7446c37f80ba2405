#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dpa {

// Non-fatal conditions raised while computing one training step. They are
// surfaced as flags on the metrics row rather than as exceptions.
enum class EventKind : std::uint8_t {
  kZeroNormBatchMean,    // memory-bank update skipped
  kWeightFallback,       // CDF weight denominator vanished, 0.5/0.5 used
  kEmptyGlobalNegative,  // no global negatives, GDPA term is zero
  kEmptyInstancePositive,
  kPccUndefined,         // fewer than two private samples or a zero profile
  kNonFiniteGradient,    // optimizer step skipped
};

const char* event_name(EventKind kind);

struct Event {
  EventKind kind;
  std::string detail;
};

class EventLog {
 public:
  void record(EventKind kind, std::string detail = {}) {
    events_.push_back({kind, std::move(detail)});
  }
  bool has(EventKind kind) const;
  std::size_t count(EventKind kind) const;
  const std::vector<Event>& events() const { return events_; }
  bool empty() const { return events_.empty(); }
  void clear() { events_.clear(); }

  // '|'-joined event names, deduplicated, in first-seen order.
  std::string flags() const;

 private:
  std::vector<Event> events_;
};

inline void record(EventLog* log, EventKind kind, std::string detail = {}) {
  if (log != nullptr) log->record(kind, std::move(detail));
}

}  // namespace dpa
