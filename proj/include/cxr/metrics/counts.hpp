#pragma once

#include <cstddef>

namespace cxr::metrics {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  void add(bool predicted, bool gold) {
    if (predicted && gold) ++tp;
    else if (predicted) ++fp;
    else if (gold) ++fn;
    else ++tn;
  }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp; fp += o.fp; fn += o.fn; tn += o.tn;
    return *this;
  }
};

struct PrecisionRecall {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

// A group with no gold and no predicted positives scores 1/1/1 (nothing to
// find, nothing wrongly flagged); otherwise empty denominators score 0.
PrecisionRecall score(const ConfusionCounts& c);

}  // namespace cxr::metrics
