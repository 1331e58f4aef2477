#include "aepnet.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "checkpoint.hpp"
#include "dataset.hpp"
#include "losses.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "report.hpp"
#include "train.hpp"
#include "volume.hpp"

namespace {

namespace fs = std::filesystem;

thread_local std::string g_error;

template <typename F>
aep_status guarded(F&& body) {
  try {
    body();
    g_error.clear();
    return AEP_OK;
  } catch (const std::invalid_argument& e) {
    g_error = e.what();
    return AEP_ERROR_INVALID_ARGUMENT;
  } catch (const std::out_of_range& e) {
    g_error = e.what();
    return AEP_ERROR_INVALID_ARGUMENT;
  } catch (const std::runtime_error& e) {
    g_error = e.what();
    return AEP_ERROR_IO;
  } catch (const std::exception& e) {
    g_error = e.what();
    return AEP_ERROR_INTERNAL;
  } catch (...) {
    g_error = "unknown error";
    return AEP_ERROR_INTERNAL;
  }
}

const char* require(const char* p, const char* what) {
  if (!p) throw std::invalid_argument(std::string(what) + " must not be NULL");
  return p;
}

void copy_to(char* buf, size_t len, const std::string& s, const char* what) {
  if (!buf) return;
  if (s.size() + 1 > len)
    throw std::invalid_argument(std::string(what) + " buffer too small: need " +
                                std::to_string(s.size() + 1) + " bytes");
  std::memcpy(buf, s.c_str(), s.size() + 1);
}

const aepnet::CaseEntry& case_by_id(const aepnet::Manifest& man, int case_id) {
  for (const aepnet::CaseEntry& c : man.cases)
    if (c.id == case_id) return c;
  throw std::invalid_argument("no case with id " + std::to_string(case_id));
}

}  // namespace

struct aep_model {
  aepnet::Checkpoint ck;
};

extern "C" {

const char* aep_last_error(void) { return g_error.c_str(); }

aep_status aep_generate_dataset(const char* out_dir, int count, const int dims[3],
                                int classes, int masks_per_case, uint64_t seed) {
  return guarded([&] {
    require(out_dir, "out_dir");
    if (!dims) throw std::invalid_argument("dims must not be NULL");
    aepnet::DatasetConfig cfg;
    cfg.num_cases = count;
    cfg.dims = {dims[0], dims[1], dims[2]};
    cfg.num_classes = classes;
    cfg.masks_per_case = masks_per_case;
    cfg.seed = seed;
    aepnet::generate_dataset(cfg, out_dir);
  });
}

aep_status aep_dataset_histogram(const char* data_dir, int counts[7], double edges[6],
                                 double* mean_dsc) {
  return guarded([&] {
    require(data_dir, "data_dir");
    if (!counts) throw std::invalid_argument("counts must not be NULL");
    const aepnet::Manifest man = aepnet::load_manifest(data_dir);
    const std::vector<double> bin_edges = aepnet::default_bin_edges();
    for (int i = 0; i < 7; ++i) counts[i] = 0;
    if (edges)
      for (int i = 0; i < 6; ++i) edges[i] = bin_edges[i];
    double sum = 0.0;
    long n = 0;
    for (const aepnet::CaseEntry& c : man.cases)
      for (const aepnet::MaskEntry& m : c.masks) {
        sum += m.seg_dsc;
        ++n;
        if (m.seg_dsc <= bin_edges.front()) {
          ++counts[0];
        } else if (m.seg_dsc > bin_edges.back()) {
          ++counts[6];
        } else {
          int i = 0;
          while (!(m.seg_dsc <= bin_edges[i + 1])) ++i;
          ++counts[1 + i];
        }
      }
    if (mean_dsc) *mean_dsc = n > 0 ? sum / n : 0.0;
  });
}

aep_status aep_train(const char* config_path, const char* data_dir, const char* out_dir,
                     char* ckpt_path_buf, size_t ckpt_path_buf_len, double* final_total) {
  return guarded([&] {
    const aepnet::TrainConfig cfg = aepnet::load_train_config(require(config_path, "config_path"));
    const aepnet::TrainResult result =
        aepnet::train_loop(cfg, require(data_dir, "data_dir"), require(out_dir, "out_dir"));
    copy_to(ckpt_path_buf, ckpt_path_buf_len, result.checkpoint_path, "checkpoint path");
    if (final_total) *final_total = result.final_total;
  });
}

aep_status aep_model_open(const char* checkpoint_path, aep_model** out) {
  return guarded([&] {
    require(checkpoint_path, "checkpoint_path");
    if (!out) throw std::invalid_argument("out must not be NULL");
    *out = new aep_model{aepnet::load_checkpoint(checkpoint_path)};
  });
}

void aep_model_close(aep_model* model) { delete model; }

aep_status aep_model_info(const aep_model* model, char* arch_buf, size_t arch_buf_len,
                          int* num_classes, long long* iteration, size_t* param_count) {
  return guarded([&] {
    if (!model) throw std::invalid_argument("model must not be NULL");
    copy_to(arch_buf, arch_buf_len, aepnet::arch_name(model->ck.model_config.arch), "arch");
    if (num_classes) *num_classes = model->ck.model_config.num_classes;
    if (iteration) *iteration = model->ck.iteration;
    if (param_count) {
      *param_count = 0;
      for (const auto& [name, t] : model->ck.params) *param_count += t.numel();
    }
  });
}

aep_status aep_predict(const aep_model* model, const char* data_dir, int case_id,
                       int mask_index, const char* out_dir, double* pacc, double* cer,
                       double* rer) {
  return guarded([&] {
    if (!model) throw std::invalid_argument("model must not be NULL");
    const std::string dir = require(data_dir, "data_dir");
    const aepnet::Manifest man = aepnet::load_manifest(dir);
    const aepnet::AepNetConfig& cfg = model->ck.model_config;
    if (man.num_classes != cfg.num_classes)
      throw std::invalid_argument("dataset has " + std::to_string(man.num_classes) +
                                  " classes but the model expects " +
                                  std::to_string(cfg.num_classes));
    const aepnet::CaseEntry& c = case_by_id(man, case_id);
    if (mask_index < 0 || mask_index >= static_cast<int>(c.masks.size()))
      throw std::invalid_argument("case " + std::to_string(case_id) + " has no mask " +
                                  std::to_string(mask_index));
    aepnet::CaseSample s = aepnet::load_sample(dir, c, mask_index);
    s.image = aepnet::preprocess(s.image);
    const aepnet::Shape& d = s.image.shape;
    const aepnet::ForwardResult fr =
        aepnet::forward(cfg, model->ck.params,
                        aepnet::Tensor(aepnet::Shape{1, d[0], d[1], d[2]}, s.image.data),
                        aepnet::one_hot(s.mask, cfg.num_classes));
    const aepnet::Tensor pred = aepnet::binarize_error_prob(fr.error_prob);
    if (out_dir) {
      fs::create_directories(out_dir);
      char name[64];
      std::snprintf(name, sizeof name, "pred_error_case_%03d_mask_%d.rvol", case_id,
                    mask_index);
      aepnet::write_volume((fs::path(out_dir) / name).string(), pred, aepnet::VolDtype::u8);
    }
    if (pacc) *pacc = aepnet::predicted_accuracy(pred);
    if (cer) *cer = fr.cer.numel() > 0 ? fr.cer.scalar_value() : 0.0;
    if (rer) *rer = aepnet::real_error_rate(s.error_map);
  });
}

aep_status aep_evaluate(const aep_model* model, const char* data_dir, const char* split,
                        const char* report_dir, int* num_records, double* pcc_a,
                        double* mae) {
  return guarded([&] {
    if (!model) throw std::invalid_argument("model must not be NULL");
    const std::vector<aepnet::EvalRecord> records =
        aepnet::evaluate_split(model->ck.model_config, model->ck.params,
                               require(data_dir, "data_dir"), require(split, "split"));
    const aepnet::MetricsReport report = aepnet::binned_report(records);
    const fs::path dir = require(report_dir, "report_dir");
    fs::create_directories(dir);
    aepnet::ExportPaths paths;
    paths.records_csv = (dir / "records.csv").string();
    paths.summary_txt = (dir / "summary.txt").string();
    paths.scatter_acc_csv = (dir / "scatter_acc.csv").string();
    paths.scatter_dsc_csv = (dir / "scatter_dsc.csv").string();
    aepnet::export_report(report, paths);
    if (num_records) *num_records = static_cast<int>(records.size());
    if (pcc_a) *pcc_a = report.corr.pcc_a ? *report.corr.pcc_a : std::nan("");
    if (mae) *mae = report.corr.mae;
  });
}

aep_status aep_ablate(const char* config_path, const char* data_dir, const char* out_dir,
                      const uint64_t* seeds, size_t num_seeds) {
  return guarded([&] {
    const aepnet::TrainConfig cfg = aepnet::load_train_config(require(config_path, "config_path"));
    if (!seeds || num_seeds == 0) throw std::invalid_argument("need at least one seed");
    const fs::path dir = require(out_dir, "out_dir");
    fs::create_directories(dir);
    const aepnet::AblationResult result =
        aepnet::ablation_run(cfg, require(data_dir, "data_dir"), dir.string(),
                             std::vector<uint64_t>(seeds, seeds + num_seeds));
    aepnet::export_ablation(result, (dir / "ablation.csv").string(),
                            (dir / "ablation.txt").string());
  });
}

}  // extern "C"
