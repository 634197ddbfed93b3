#pragma once

#include <cstddef>

#include "tfae/image.hpp"

namespace tfae {

struct MetricReport {
  double dice = 1.0;
  double jaccard = 1.0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
};

/// Overlap scores of `pred` against `truth`; both empty scores 1.
inline MetricReport score(const BinaryMask& pred, const BinaryMask& truth) {
  require_same_shape(pred.grid(), truth.grid(), "score");
  MetricReport m;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred.grid().values()[i] != 0;
    const bool t = truth.grid().values()[i] != 0;
    if (p && t) ++m.true_positives;
    if (p && !t) ++m.false_positives;
    if (!p && t) ++m.false_negatives;
  }
  const auto tp = static_cast<double>(m.true_positives);
  const double pred_n = tp + static_cast<double>(m.false_positives);
  const double truth_n = tp + static_cast<double>(m.false_negatives);
  if (pred_n + truth_n > 0.0) {
    m.dice = 2.0 * tp / (pred_n + truth_n);
    m.jaccard = tp / (pred_n + truth_n - tp);
  }
  return m;
}

}  // namespace tfae
