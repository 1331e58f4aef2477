#include "report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "checkpoint.hpp"
#include "dataset.hpp"
#include "losses.hpp"
#include "phantom.hpp"

namespace aepnet {

namespace {

namespace fs = std::filesystem;

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string f6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string f6(const std::optional<double>& v) { return v ? f6(*v) : "-"; }

// streaming means over records, missing-aware for prec/recl
struct RowAccum {
  BinRow row;
  double prec_sum = 0.0, recl_sum = 0.0;
  int prec_n = 0, recl_n = 0;

  void add(const EvalRecord& r) {
    ++row.count;
    row.seg_dsc += r.seg_dsc;
    row.seg_acc += r.seg_acc;
    row.dsc += r.dsc;
    row.acc += r.acc;
    row.pacc += r.pacc;
    row.rer += r.rer;
    if (r.prec) prec_sum += *r.prec, ++prec_n;
    if (r.recl) recl_sum += *r.recl, ++recl_n;
  }
  BinRow finish() const {
    BinRow out = row;
    if (out.count > 0) {
      out.seg_dsc /= out.count;
      out.seg_acc /= out.count;
      out.dsc /= out.count;
      out.acc /= out.count;
      out.pacc /= out.count;
      out.rer /= out.count;
    }
    if (prec_n > 0) out.prec = prec_sum / prec_n;
    if (recl_n > 0) out.recl = recl_sum / recl_n;
    return out;
  }
};

std::ofstream open_sink(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("report: cannot write " + path);
  return out;
}

std::string row_label(const BinRow& r, const MetricsReport& rep) {
  if (&r == &rep.underflow) return "(<=" + f6(rep.edges.front()) + ")";
  if (&r == &rep.overflow) return "(>" + f6(rep.edges.back()) + ")";
  if (&r == &rep.overall) return "overall";
  return "(" + f6(r.lo) + "," + f6(r.hi) + "]";
}

void summary_row(std::ofstream& out, const std::string& label, const BinRow& r) {
  out << "row " << label << ": count=" << r.count << " Seg.DSC=" << f6(r.seg_dsc)
      << " Seg.Acc=" << f6(r.seg_acc) << " DSC=" << f6(r.dsc) << " Acc=" << f6(r.acc)
      << " Prec=" << f6(r.prec) << " Recl=" << f6(r.recl) << " pAcc=" << f6(r.pacc)
      << " rER=" << f6(r.rer) << "\n";
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::optional<double> median_defined(const std::vector<std::optional<double>>& vs) {
  std::vector<double> defined;
  for (const auto& v : vs)
    if (v) defined.push_back(*v);
  if (defined.empty()) return std::nullopt;
  return median_of(std::move(defined));
}

/// Widen the plain u-net until its parameter count best matches `target`.
AepNetConfig tune_plain(const AepNetConfig& full_cfg, std::size_t target) {
  AepNetConfig best;
  std::size_t best_diff = static_cast<std::size_t>(-1);
  for (int b = 1; b <= 48; ++b) {
    AepNetConfig cand = full_cfg;
    cand.arch = Arch::plain;
    cand.base_channels = b;
    cand.gn_groups = std::gcd(full_cfg.gn_groups, b);
    const std::size_t n = build(cand, 0).param_count();
    const std::size_t diff = n > target ? n - target : target - n;
    if (diff < best_diff) {
      best_diff = diff;
      best = cand;
    }
    if (n > target + target / 2) break;  // counts grow with width; past any optimum
  }
  return best;
}

}  // namespace

std::vector<double> default_bin_edges() { return {0.5, 0.6, 0.7, 0.8, 0.9, 0.95}; }

MetricsReport binned_report(const std::vector<EvalRecord>& records,
                            const std::vector<double>& edges) {
  if (edges.size() < 2) throw std::invalid_argument("binned_report: need at least two edges");
  for (std::size_t i = 0; i + 1 < edges.size(); ++i)
    if (!(edges[i] < edges[i + 1]))
      throw std::invalid_argument("binned_report: edges must be strictly increasing");

  MetricsReport rep;
  rep.records = records;
  rep.edges = edges;
  const std::size_t nbins = edges.size() - 1;
  std::vector<RowAccum> bins(nbins);
  for (std::size_t i = 0; i < nbins; ++i) {
    bins[i].row.lo = edges[i];
    bins[i].row.hi = edges[i + 1];
  }
  RowAccum under, over, all;
  under.row.hi = edges.front();
  over.row.lo = edges.back();

  for (const EvalRecord& r : records) {
    all.add(r);
    if (r.seg_dsc <= edges.front()) {
      under.add(r);
    } else if (r.seg_dsc > edges.back()) {
      over.add(r);
    } else {
      std::size_t i = 0;
      while (!(r.seg_dsc <= edges[i + 1])) ++i;
      bins[i].add(r);
    }
  }
  for (const RowAccum& a : bins) rep.bins.push_back(a.finish());
  rep.underflow = under.finish();
  rep.overflow = over.finish();
  rep.overall = all.finish();

  if (records.size() >= 2) {
    std::vector<double> pa, sa, sd;
    for (const EvalRecord& r : records) {
      pa.push_back(r.pacc);
      sa.push_back(r.seg_acc);
      sd.push_back(r.seg_dsc);
    }
    try {
      rep.corr.pcc_a = pearson(pa, sa);
    } catch (const std::invalid_argument&) {
    }
    try {
      rep.corr.pcc_d = pearson(pa, sd);
    } catch (const std::invalid_argument&) {
    }
    rep.corr.mae = mae(pa, sa);
  }
  return rep;
}

std::vector<EvalRecord> evaluate_split(const AepNetConfig& config, const ParamTensors& params,
                                       const std::string& data_dir, const std::string& split) {
  const Manifest manifest = load_manifest(data_dir);
  if (manifest.num_classes != config.num_classes)
    throw std::invalid_argument("evaluate: dataset has " + std::to_string(manifest.num_classes) +
                                " classes but the model expects " +
                                std::to_string(config.num_classes));
  std::vector<EvalRecord> records;
  for (const CaseEntry& c : manifest.cases) {
    if (c.split != split) continue;
    for (int j = 0; j < static_cast<int>(c.masks.size()); ++j) {
      CaseSample s = load_sample(data_dir, c, j);
      s.image = preprocess(s.image);
      const Shape& d = s.image.shape;
      const ForwardResult fr = forward(config, params, Tensor(Shape{1, d[0], d[1], d[2]}, s.image.data),
                                       one_hot(s.mask, config.num_classes));
      const ErrorMapMetrics m = error_map_metrics(fr.error_prob, s.error_map);
      EvalRecord r;
      r.case_id = c.id;
      r.mask_index = j;
      r.severity = c.masks[j].severity;
      r.seg_dsc = c.masks[j].seg_dsc;
      r.seg_acc = c.masks[j].seg_acc;
      r.dsc = m.dsc;
      r.acc = m.acc;
      r.prec = m.prec;
      r.recl = m.recl;
      r.pacc = predicted_accuracy(binarize_error_prob(fr.error_prob));
      r.rer = real_error_rate(s.error_map);
      r.cer = fr.cer.numel() > 0 ? fr.cer.scalar_value() : 0.0;
      records.push_back(r);
    }
  }
  if (records.empty())
    throw std::invalid_argument("evaluate: no cases in split '" + split + "'");
  return records;
}

void export_report(const MetricsReport& report, const ExportPaths& paths) {
  if (!paths.records_csv.empty()) {
    std::ofstream out = open_sink(paths.records_csv);
    out << "case,mask,severity,seg_dsc,seg_acc,dsc,acc,prec,recl,pacc,rer,cer\n";
    for (const EvalRecord& r : report.records) {
      out << r.case_id << "," << r.mask_index << "," << g17(r.severity) << "," << g17(r.seg_dsc)
          << "," << g17(r.seg_acc) << "," << g17(r.dsc) << "," << g17(r.acc) << ","
          << (r.prec ? g17(*r.prec) : "") << "," << (r.recl ? g17(*r.recl) : "") << ","
          << g17(r.pacc) << "," << g17(r.rer) << "," << g17(r.cer) << "\n";
    }
    if (!out.flush()) throw std::runtime_error("report: write failed for " + paths.records_csv);
  }
  if (!paths.scatter_acc_csv.empty()) {
    std::ofstream out = open_sink(paths.scatter_acc_csv);
    out << "pacc,seg_acc\n";
    for (const EvalRecord& r : report.records)
      out << g17(r.pacc) << "," << g17(r.seg_acc) << "\n";
  }
  if (!paths.scatter_dsc_csv.empty()) {
    std::ofstream out = open_sink(paths.scatter_dsc_csv);
    out << "pacc,seg_dsc\n";
    for (const EvalRecord& r : report.records)
      out << g17(r.pacc) << "," << g17(r.seg_dsc) << "\n";
  }
  if (!paths.summary_txt.empty()) {
    std::ofstream out = open_sink(paths.summary_txt);
    out << "records: " << report.records.size() << "\n";
    out << "correlation: PCC_a=" << f6(report.corr.pcc_a) << " PCC_d=" << f6(report.corr.pcc_d)
        << " MAE=" << f6(report.corr.mae) << "\n";
    for (const BinRow& b : report.bins) summary_row(out, row_label(b, report), b);
    summary_row(out, row_label(report.underflow, report), report.underflow);
    summary_row(out, row_label(report.overflow, report), report.overflow);
    summary_row(out, row_label(report.overall, report), report.overall);
    if (!out.flush()) throw std::runtime_error("report: write failed for " + paths.summary_txt);
  }
}

void write_mid_slice_pgm(const Tensor& vol, double lo, double hi, const std::string& path) {
  if (vol.shape.size() != 3)
    throw std::invalid_argument("pgm export: expected [D x H x W], got " + shape_str(vol.shape));
  if (!(lo < hi)) throw std::invalid_argument("pgm export: need lo < hi");
  const int D = vol.shape[0], H = vol.shape[1], W = vol.shape[2];
  const int d = D / 2;
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw std::runtime_error("pgm export: cannot write " + path);
  out << "P5\n" << W << " " << H << "\n255\n";
  for (int h = 0; h < H; ++h)
    for (int w = 0; w < W; ++w) {
      const double v = vol[(static_cast<std::size_t>(d) * H + h) * W + w];
      const double t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(t * 255.0))));
    }
  if (!out.flush()) throw std::runtime_error("pgm export: write failed for " + path);
}

AblationResult ablation_run(const TrainConfig& base, const std::string& data_dir,
                            const std::string& out_dir,
                            const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw std::invalid_argument("ablation: need at least one seed");

  AepNetConfig full_cfg = base.model;
  full_cfg.arch = Arch::full;
  AepNetConfig no_ceu_cfg = full_cfg;
  no_ceu_cfg.arch = Arch::no_ceu;
  const std::size_t full_count = build(full_cfg, 0).param_count();
  const AepNetConfig plain_cfg = tune_plain(full_cfg, full_count);

  const std::pair<std::string, AepNetConfig> variants[3] = {
      {"plain", plain_cfg}, {"no_ceu", no_ceu_cfg}, {"full", full_cfg}};

  AblationResult result;
  std::size_t mn = static_cast<std::size_t>(-1), mx = 0;
  for (const auto& [name, cfg] : variants) {
    const std::size_t n = build(cfg, 0).param_count();
    mn = std::min(mn, n);
    mx = std::max(mx, n);
  }
  result.budget_spread = static_cast<double>(mx - mn) / static_cast<double>(mn);
  result.budget_ok = result.budget_spread <= 0.10;

  for (const auto& [name, mcfg] : variants) {
    std::vector<double> dscs, accs;
    std::vector<std::optional<double>> precs, recls;
    for (std::uint64_t seed : seeds) {
      TrainConfig cfg = base;
      cfg.model = mcfg;
      cfg.seed = seed;
      const std::string run_dir =
          (fs::path(out_dir) / (name + "_seed" + std::to_string(seed))).string();
      const TrainResult tr = train_loop(cfg, data_dir, run_dir);
      const Checkpoint ck = load_checkpoint(tr.checkpoint_path);
      const MetricsReport rep =
          binned_report(evaluate_split(ck.model_config, ck.params, data_dir, "test"));

      AblationRow row;
      row.variant = name;
      row.seed = seed;
      row.param_count = build(mcfg, 0).param_count();
      row.dsc = rep.overall.dsc;
      row.acc = rep.overall.acc;
      row.prec = rep.overall.prec;
      row.recl = rep.overall.recl;
      result.rows.push_back(row);
      dscs.push_back(row.dsc);
      accs.push_back(row.acc);
      precs.push_back(row.prec);
      recls.push_back(row.recl);
    }
    AblationRow med;
    med.variant = name;
    med.param_count = result.rows.back().param_count;
    med.dsc = median_of(dscs);
    med.acc = median_of(accs);
    med.prec = median_defined(precs);
    med.recl = median_defined(recls);
    result.summary.push_back(med);
  }

  const double plain_dsc = result.summary[0].dsc;
  const double no_ceu_dsc = result.summary[1].dsc;
  const double full_dsc = result.summary[2].dsc;
  result.ordering_ok = plain_dsc <= no_ceu_dsc && no_ceu_dsc <= full_dsc;
  std::ostringstream note;
  note << "median test DSC: plain=" << f6(plain_dsc) << " no_ceu=" << f6(no_ceu_dsc)
       << " full=" << f6(full_dsc) << "; effects: no_ceu-plain=" << f6(no_ceu_dsc - plain_dsc)
       << " full-no_ceu=" << f6(full_dsc - no_ceu_dsc)
       << "; ordering plain<=no_ceu<=full " << (result.ordering_ok ? "holds" : "violated");
  result.note = note.str();
  return result;
}

void export_ablation(const AblationResult& result, const std::string& csv_path,
                     const std::string& txt_path) {
  if (!csv_path.empty()) {
    std::ofstream out = open_sink(csv_path);
    out << "variant,seed,param_count,dsc,acc,prec,recl\n";
    for (const AblationRow& r : result.rows)
      out << r.variant << "," << r.seed << "," << r.param_count << "," << g17(r.dsc) << ","
          << g17(r.acc) << "," << (r.prec ? g17(*r.prec) : "") << ","
          << (r.recl ? g17(*r.recl) : "") << "\n";
    if (!out.flush()) throw std::runtime_error("report: write failed for " + csv_path);
  }
  if (!txt_path.empty()) {
    std::ofstream out = open_sink(txt_path);
    out << "parameter budget:";
    for (const AblationRow& r : result.summary)
      out << " " << r.variant << "=" << r.param_count;
    char pct[32];
    std::snprintf(pct, sizeof pct, "%.2f%%", 100.0 * result.budget_spread);
    out << " spread=" << pct << " (" << (result.budget_ok ? "ok" : "VIOLATION") << ")\n";
    for (const AblationRow& r : result.summary)
      out << "median " << r.variant << ": DSC=" << f6(r.dsc) << " Acc=" << f6(r.acc)
          << " Prec=" << f6(r.prec) << " Recl=" << f6(r.recl) << "\n";
    out << result.note << "\n";
    if (!out.flush()) throw std::runtime_error("report: write failed for " + txt_path);
  }
}

}  // namespace aepnet
