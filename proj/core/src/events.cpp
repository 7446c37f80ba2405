#include "dpa/events.hpp"

#include <algorithm>

namespace dpa {

const char* event_name(EventKind kind) {
  switch (kind) {
    case EventKind::kZeroNormBatchMean: return "zero_norm_batch_mean";
    case EventKind::kWeightFallback: return "weight_fallback";
    case EventKind::kEmptyGlobalNegative: return "empty_global_negative";
    case EventKind::kEmptyInstancePositive: return "empty_instance_positive";
    case EventKind::kPccUndefined: return "pcc_undefined";
    case EventKind::kNonFiniteGradient: return "non_finite_gradient";
  }
  return "unknown";
}

bool EventLog::has(EventKind kind) const { return count(kind) > 0; }

std::size_t EventLog::count(EventKind kind) const {
  return static_cast<std::size_t>(std::count_if(
      events_.begin(), events_.end(), [kind](const Event& e) { return e.kind == kind; }));
}

std::string EventLog::flags() const {
  std::vector<EventKind> seen;
  std::string out;
  for (const auto& e : events_) {
    if (std::find(seen.begin(), seen.end(), e.kind) != seen.end()) continue;
    seen.push_back(e.kind);
    if (!out.empty()) out += '|';
    out += event_name(e.kind);
  }
  return out;
}

}  // namespace dpa
