#include "cxr/metrics/counts.hpp"

namespace cxr::metrics {

PrecisionRecall score(const ConfusionCounts& c) {
  if (c.tp + c.fp + c.fn == 0) return {1.0, 1.0, 1.0};
  PrecisionRecall s;
  const auto tp = static_cast<double>(c.tp);
  s.precision = (c.tp + c.fp) ? tp / static_cast<double>(c.tp + c.fp) : 0.0;
  s.recall = (c.tp + c.fn) ? tp / static_cast<double>(c.tp + c.fn) : 0.0;
  s.f1 = (s.precision + s.recall) > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

}  // namespace cxr::metrics
