// Batch front end for the AEP-Net pipeline: dataset generation, training,
// single-mask prediction, split evaluation, and the architecture ablation.
// Every run is fully determined by its flags; reruns overwrite byte-identically.
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aepnet.h"

namespace {

int fail(const std::string& sub) {
  std::cerr << "aepnet " << sub << ": " << aep_last_error() << "\n";
  return 1;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

int run_gen_data(const std::string& out, int count, const std::vector<int>& dims, int classes,
                 int masks_per_case, std::uint64_t seed) {
  if (dims.size() != 3) {
    std::cerr << "aepnet gen-data: --dims expects dx,dy,dz\n";
    return 1;
  }
  const int d[3] = {dims[0], dims[1], dims[2]};
  if (aep_generate_dataset(out.c_str(), count, d, classes, masks_per_case, seed) != AEP_OK)
    return fail("gen-data");

  int counts[7];
  double edges[6], mean = 0.0;
  if (aep_dataset_histogram(out.c_str(), counts, edges, &mean) != AEP_OK)
    return fail("gen-data");

  std::cout << "generated " << count << " cases x " << masks_per_case << " masks under " << out
            << "\n";
  std::cout << "Seg.DSC histogram: (<=" << fmt(edges[0]) << ")=" << counts[0];
  for (int i = 0; i < 5; ++i)
    std::cout << " (" << fmt(edges[i]) << "," << fmt(edges[i + 1]) << "]=" << counts[1 + i];
  std::cout << " (>" << fmt(edges[5]) << ")=" << counts[6] << " mean=" << fmt(mean) << "\n";
  return 0;
}

int run_train(const std::string& config, const std::string& data, const std::string& out) {
  char ckpt[4096];
  double final_total = 0.0;
  if (aep_train(config.c_str(), data.c_str(), out.c_str(), ckpt, sizeof ckpt, &final_total) !=
      AEP_OK)
    return fail("train");
  std::cout << "trained to " << ckpt << " (final total loss " << fmt(final_total) << ")\n";
  return 0;
}

int run_predict(const std::string& checkpoint, const std::string& data, int case_id,
                int mask_index, const std::string& out) {
  aep_model* model = nullptr;
  if (aep_model_open(checkpoint.c_str(), &model) != AEP_OK) return fail("predict");
  double pacc = 0.0, cer = 0.0, rer = 0.0;
  const aep_status st =
      aep_predict(model, data.c_str(), case_id, mask_index, out.c_str(), &pacc, &cer, &rer);
  aep_model_close(model);
  if (st != AEP_OK) return fail("predict");
  char name[64];
  std::snprintf(name, sizeof name, "pred_error_case_%03d_mask_%d.rvol", case_id, mask_index);
  std::cout << "pAcc=" << fmt(pacc) << " cER=" << fmt(cer) << " rER=" << fmt(rer) << "\n";
  std::cout << "wrote " << out << "/" << name << "\n";
  return 0;
}

int run_eval(const std::string& checkpoint, const std::string& data, const std::string& split,
             const std::string& report) {
  aep_model* model = nullptr;
  if (aep_model_open(checkpoint.c_str(), &model) != AEP_OK) return fail("eval");
  int num_records = 0;
  double pcc_a = 0.0, mae = 0.0;
  const aep_status st =
      aep_evaluate(model, data.c_str(), split.c_str(), report.c_str(), &num_records, &pcc_a, &mae);
  aep_model_close(model);
  if (st != AEP_OK) return fail("eval");
  std::cout << "evaluated " << num_records << " records (split " << split
            << "): PCC_a=" << (std::isnan(pcc_a) ? std::string("-") : fmt(pcc_a))
            << " MAE=" << fmt(mae) << "\n";
  std::cout << "report written under " << report << "\n";
  return 0;
}

int run_ablate(const std::string& config, const std::string& data, const std::string& out,
               const std::vector<std::uint64_t>& seeds) {
  if (aep_ablate(config.c_str(), data.c_str(), out.c_str(), seeds.data(), seeds.size()) !=
      AEP_OK)
    return fail("ablate");
  std::ifstream txt(out + "/ablation.txt");
  std::cout << txt.rdbuf();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AEP-Net: segmentation error-map prediction on synthetic phantoms"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic phantom dataset");
  std::string gen_out;
  int gen_count = 60, gen_classes = 4, gen_masks = 5;
  std::vector<int> gen_dims = {32, 32, 32};
  std::uint64_t gen_seed = 0;
  gen->add_option("--out", gen_out, "Dataset directory")->required();
  gen->add_option("--count", gen_count, "Number of cases")->required();
  gen->add_option("--dims", gen_dims, "Volume extents dx,dy,dz")->delimiter(',')->expected(1, 3);
  gen->add_option("--classes", gen_classes, "Tissue classes including background");
  gen->add_option("--masks-per-case", gen_masks, "Degraded masks per case");
  gen->add_option("--seed", gen_seed, "Master seed")->required();

  auto* train = app.add_subcommand("train", "Train a model per a JSON config");
  std::string train_config, train_data, train_out;
  train->add_option("--config", train_config, "JSON training config")->required();
  train->add_option("--data", train_data, "Dataset directory")->required();
  train->add_option("--out", train_out, "Run directory for checkpoints and log")->required();

  auto* predict = app.add_subcommand("predict", "Predict one mask's error map");
  std::string pred_ckpt, pred_data, pred_out;
  int pred_case = 0, pred_mask = 0;
  predict->add_option("--checkpoint", pred_ckpt, "Trained checkpoint")->required();
  predict->add_option("--data", pred_data, "Dataset directory")->required();
  predict->add_option("--case", pred_case, "Case id")->required();
  predict->add_option("--mask-index", pred_mask, "Mask index within the case")->required();
  predict->add_option("--out", pred_out, "Output directory for the predicted map")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate a split and write report files");
  std::string eval_ckpt, eval_data, eval_split = "test", eval_report;
  eval->add_option("--checkpoint", eval_ckpt, "Trained checkpoint")->required();
  eval->add_option("--data", eval_data, "Dataset directory")->required();
  eval->add_option("--split", eval_split, "Dataset split (default test)");
  eval->add_option("--report", eval_report, "Report directory")->required();

  auto* ablate = app.add_subcommand("ablate", "Compare architecture variants across seeds");
  std::string abl_config, abl_data, abl_out;
  std::vector<std::uint64_t> abl_seeds;
  ablate->add_option("--config", abl_config, "JSON training config")->required();
  ablate->add_option("--data", abl_data, "Dataset directory")->required();
  ablate->add_option("--out", abl_out, "Output directory")->required();
  ablate->add_option("--seeds", abl_seeds, "Comma-separated seeds s1,s2,s3")
      ->delimiter(',')
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "aepnet: " << e.what() << "\n";
    return 1;
  }

  if (gen->parsed())
    return run_gen_data(gen_out, gen_count, gen_dims, gen_classes, gen_masks, gen_seed);
  if (train->parsed()) return run_train(train_config, train_data, train_out);
  if (predict->parsed()) return run_predict(pred_ckpt, pred_data, pred_case, pred_mask, pred_out);
  if (eval->parsed()) return run_eval(eval_ckpt, eval_data, eval_split, eval_report);
  if (ablate->parsed()) return run_ablate(abl_config, abl_data, abl_out, abl_seeds);
  return 1;
}
