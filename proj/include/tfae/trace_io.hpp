#pragma once

// JSON-lines serialization of iteration traces and JSON metric reports.

#include <cmath>
#include <ostream>

#include "json.hpp"
#include "tfae/metrics.hpp"
#include "tfae/segmenter.hpp"

namespace tfae {

/// One object per iteration: iter, active_count, alpha, beta, M,
/// mean_coherence, lambda (null when no denoising ran), max_p_row,
/// max_p_col; the last record also carries `reason`.
inline void write_trace_jsonl(std::ostream& out, const IterationTrace& trace) {
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const IterationRecord& r = trace.records[i];
    nlohmann::ordered_json j;
    j["iter"] = r.iter;
    j["active_count"] = r.active_count;
    j["alpha"] = r.params.alpha;
    j["beta"] = r.params.beta;
    j["M"] = r.params.M;
    j["mean_coherence"] = r.params.mean_coherence;
    j["lambda"] = std::isnan(r.lambda) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(r.lambda);
    j["max_p_row"] = r.params.max_p.row;
    j["max_p_col"] = r.params.max_p.col;
    if (i + 1 == trace.records.size()) j["reason"] = std::string(to_string(trace.reason));
    out << j.dump() << '\n';
  }
  if (trace.records.empty()) {
    nlohmann::ordered_json j;
    j["iter"] = 0;
    j["active_count"] = 0;
    j["reason"] = std::string(to_string(trace.reason));
    out << j.dump() << '\n';
  }
}

inline nlohmann::ordered_json to_json(const MetricReport& m) {
  nlohmann::ordered_json j;
  j["dice"] = m.dice;
  j["jaccard"] = m.jaccard;
  j["true_positives"] = m.true_positives;
  j["false_positives"] = m.false_positives;
  j["false_negatives"] = m.false_negatives;
  return j;
}

}  // namespace tfae
