#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "metrics.hpp"
#include "model.hpp"
#include "train.hpp"

namespace aepnet {

/// One evaluated (case, mask) pair: mask quality, error-map prediction
/// metrics, and the quality signals inferred from the prediction.
struct EvalRecord {
  int case_id = 0;
  int mask_index = 0;
  double severity = 0.0;
  double seg_dsc = 0.0, seg_acc = 0.0;  // mask vs gt
  double dsc = 0.0, acc = 0.0;          // predicted vs real error map
  std::optional<double> prec, recl;     // missing on empty denominators
  double pacc = 0.0;                    // accuracy inferred from the prediction
  double rer = 0.0;                     // real error-voxel fraction
  double cer = 0.0;                     // error-rate head output; 0 without the head
};

/// Means over one population of records; prec/recl average the defined
/// entries only and stay missing when none are defined.
struct BinRow {
  double lo = 0.0, hi = 0.0;  // members satisfy lo < seg_dsc <= hi
  int count = 0;
  double seg_dsc = 0.0, seg_acc = 0.0, dsc = 0.0, acc = 0.0, pacc = 0.0, rer = 0.0;
  std::optional<double> prec, recl;
};

struct CorrelationSummary {
  std::optional<double> pcc_a;  // pearson(pAcc, Seg.Acc); missing when degenerate
  std::optional<double> pcc_d;  // pearson(pAcc, Seg.DSC)
  double mae = 0.0;             // mean |pAcc - Seg.Acc|
};

struct MetricsReport {
  std::vector<EvalRecord> records;
  std::vector<double> edges;
  std::vector<BinRow> bins;  // bins[i] covers (edges[i], edges[i+1]]
  BinRow underflow;          // seg_dsc <= edges.front()
  BinRow overflow;           // seg_dsc > edges.back()
  BinRow overall;
  CorrelationSummary corr;
};

/// 0.5, 0.6, 0.7, 0.8, 0.9, 0.95 — five quality bins.
std::vector<double> default_bin_edges();

/// Group records into half-open (lo, hi] bins on Seg.DSC and average every
/// metric per bin, overall, and for the out-of-range rows. Underflow + bins +
/// overflow partition the records. Edges must be strictly increasing.
MetricsReport binned_report(const std::vector<EvalRecord>& records,
                            const std::vector<double>& edges = default_bin_edges());

/// Forward every (case, mask) of `split` through the model on whole volumes
/// (extents must be divisible by 2^depth) and score the predictions.
/// Records follow manifest order; reruns are bit-identical.
std::vector<EvalRecord> evaluate_split(const AepNetConfig& config, const ParamTensors& params,
                                       const std::string& data_dir, const std::string& split);

/// File sinks for a report; empty members are skipped. records_csv columns
/// (frozen): case,mask,severity,seg_dsc,seg_acc,dsc,acc,prec,recl,pacc,rer,cer
/// with missing prec/recl left empty. Scatter files pair pacc with seg_acc
/// and seg_dsc respectively.
struct ExportPaths {
  std::string records_csv;
  std::string summary_txt;
  std::string scatter_acc_csv;
  std::string scatter_dsc_csv;
};

void export_report(const MetricsReport& report, const ExportPaths& paths);

/// Center depth slice as a binary 8-bit PGM, mapping [lo, hi] to 0..255
/// (values clamped). Volume must be rank 3 and lo < hi.
void write_mid_slice_pgm(const Tensor& vol, double lo, double hi, const std::string& path);

struct AblationRow {
  std::string variant;  // full | no_ceu | plain
  std::uint64_t seed = 0;
  std::size_t param_count = 0;
  double dsc = 0.0, acc = 0.0;  // test-split means of the error-map metrics
  std::optional<double> prec, recl;
};

struct AblationResult {
  std::vector<AblationRow> rows;     // one per (variant, seed)
  std::vector<AblationRow> summary;  // one per variant: medians over seeds
  bool budget_ok = true;             // parameter counts within 10% of each other
  double budget_spread = 0.0;        // (max - min) / min over variant param counts
  bool ordering_ok = true;           // median DSC: plain <= no_ceu <= full
  std::string note;                  // ordering and effect sizes, human-readable
};

/// Train and evaluate {plain, no_ceu, full} under the same protocol for each
/// seed. The plain variant's width is auto-tuned to match the full model's
/// parameter count (group count shrinks to a divisor when needed). A budget
/// or ordering violation is reported in the result, never thrown.
AblationResult ablation_run(const TrainConfig& base, const std::string& data_dir,
                            const std::string& out_dir,
                            const std::vector<std::uint64_t>& seeds);

/// CSV of per-(variant, seed) rows plus a text summary with medians,
/// parameter budget, and the ordering note.
void export_ablation(const AblationResult& result, const std::string& csv_path,
                     const std::string& txt_path);

}  // namespace aepnet
