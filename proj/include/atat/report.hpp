#pragma once

#include <map>
#include <string>
#include <vector>

#include "atat/metrics.hpp"
#include "atat/pipeline.hpp"

namespace atat {

struct SegmentMetrics {
  double snr_db = 0.0;
  std::string segment_id;
  double cc = 0.0;
  double trrmse = 0.0;
  double srrmse = 0.0;
  double masked_fraction = 0.0;
  int gate_class = -1;
  int true_class = -1;
};

struct MetricBundle {
  double mean = 0.0, ci_low = 0.0, ci_high = 0.0;
};

struct AggregateRow {
  double snr_db = 0.0;
  int n = 0;
  MetricBundle cc, trrmse, srrmse;
  double mean_masked_fraction = 0.0;
  double gate_accuracy = 0.0;
};

struct ParamCount {
  std::string model;
  long trainable = 0;
  long total = 0;
};

struct MetricsReport {
  std::vector<SegmentMetrics> per_segment;
  std::vector<AggregateRow> aggregates;
  std::vector<ParamCount> param_counts;
  // wall-clock goes to timing.csv only; the byte-compared report files stay
  // hardware-independent
  std::map<std::string, double> wall_clock;
  std::string config_json;
  uint64_t seed = 0;
};

std::vector<ParamCount> count_parameters(ModelSet& models);

// Full pipeline over the test split: gate -> AE -> mask -> tokens ->
// generator -> splice -> denormalize, then CC / tRRMSE / sRRMSE per segment.
MetricsReport run_benchmark(ModelSet& models, const Dataset& ds, const RunConfig& cfg,
                            bool use_transformer = true);

// metrics.csv, details.csv, summary.json, timing.csv, comparison.csv and the
// SVG plots, all under dir.
void emit_report(const MetricsReport& rep, const std::string& dir);

}  // namespace atat
