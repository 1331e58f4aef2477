#include "train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "checkpoint.hpp"
#include "core/rng.hpp"
#include "core/tape.hpp"
#include "dataset.hpp"
#include "optim.hpp"
#include "phantom.hpp"

namespace aepnet {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

void require_keys(const ordered_json& j, std::initializer_list<const char*> allowed,
                  const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw std::invalid_argument("train config: unknown key '" + key + "' in " + where);
  }
}

std::string fmt_row(int iter, double l1, double l2, double l3, double total, double lr) {
  char buf[192];
  std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", iter, l1, l2, l3, total,
                lr);
  return buf;
}

std::string periodic_name(int iter) {
  std::ostringstream os;
  os << "checkpoint_" << std::setw(6) << std::setfill('0') << iter << ".ckpt";
  return os.str();
}

Checkpoint snapshot(const TrainConfig& cfg, const AepNetModel& model, const AdamState& adam,
                    long long iter, const Rng& sample, const Rng& crop, const Rng& flip) {
  Checkpoint ck;
  ck.model_config = cfg.model;
  ck.iteration = iter;
  ck.params = model.params;
  ck.adam = adam;
  ck.rng_sample = sample.save();
  ck.rng_crop = crop.save();
  ck.rng_flip = flip.save();
  return ck;
}

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  if (lr0 <= 0.0) throw std::invalid_argument("train config: lr0 must be positive");
  if (poly_power <= 0.0) throw std::invalid_argument("train config: poly_power must be positive");
  if (max_iter < 1) throw std::invalid_argument("train config: max_iter must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (checkpoint_every < 0)
    throw std::invalid_argument("train config: checkpoint_every must be >= 0");
  if (crop.size() != 3)
    throw std::invalid_argument("train config: crop must have three extents");
  const int stride = 1 << model.depth;
  for (int e : crop)
    if (e < stride || e % stride != 0)
      throw std::invalid_argument("train config: crop extents must be positive multiples of " +
                                  std::to_string(stride));
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("train config: cannot open " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("train config " + path + ": " + e.what());
  }
  require_keys(j,
               {"loss", "lr0", "poly_power", "max_iter", "batch_size", "crop", "flip_x", "flip_y",
                "flip_z", "seed", "checkpoint_every", "model"},
               "the top level");

  TrainConfig cfg;
  if (j.contains("loss")) {
    const auto& jl = j["loss"];
    require_keys(jl, {"alpha", "beta", "gamma"}, "loss");
    cfg.loss.alpha = jl.value("alpha", cfg.loss.alpha);
    cfg.loss.beta = jl.value("beta", cfg.loss.beta);
    cfg.loss.gamma = jl.value("gamma", cfg.loss.gamma);
  }
  cfg.lr0 = j.value("lr0", cfg.lr0);
  cfg.poly_power = j.value("poly_power", cfg.poly_power);
  cfg.max_iter = j.value("max_iter", cfg.max_iter);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  if (j.contains("crop")) cfg.crop = j["crop"].get<Shape>();
  cfg.flip_x = j.value("flip_x", cfg.flip_x);
  cfg.flip_y = j.value("flip_y", cfg.flip_y);
  cfg.flip_z = j.value("flip_z", cfg.flip_z);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
  if (j.contains("model")) {
    const auto& jm = j["model"];
    require_keys(jm, {"arch", "num_classes", "depth", "base_channels", "gn_groups", "ceu_hidden",
                      "crop"},
                 "model");
    if (jm.contains("arch")) cfg.model.arch = arch_from_name(jm["arch"].get<std::string>());
    cfg.model.num_classes = jm.value("num_classes", cfg.model.num_classes);
    cfg.model.depth = jm.value("depth", cfg.model.depth);
    cfg.model.base_channels = jm.value("base_channels", cfg.model.base_channels);
    cfg.model.gn_groups = jm.value("gn_groups", cfg.model.gn_groups);
    cfg.model.ceu_hidden = jm.value("ceu_hidden", cfg.model.ceu_hidden);
    cfg.model.crop = jm.value("crop", cfg.model.crop);
  }
  cfg.validate();
  return cfg;
}

void save_train_config(const TrainConfig& cfg, const std::string& path) {
  ordered_json j;
  j["loss"] = {{"alpha", cfg.loss.alpha}, {"beta", cfg.loss.beta}, {"gamma", cfg.loss.gamma}};
  j["lr0"] = cfg.lr0;
  j["poly_power"] = cfg.poly_power;
  j["max_iter"] = cfg.max_iter;
  j["batch_size"] = cfg.batch_size;
  j["crop"] = cfg.crop;
  j["flip_x"] = cfg.flip_x;
  j["flip_y"] = cfg.flip_y;
  j["flip_z"] = cfg.flip_z;
  j["seed"] = cfg.seed;
  j["checkpoint_every"] = cfg.checkpoint_every;
  j["model"] = {{"arch", arch_name(cfg.model.arch)},
                {"num_classes", cfg.model.num_classes},
                {"depth", cfg.model.depth},
                {"base_channels", cfg.model.base_channels},
                {"gn_groups", cfg.model.gn_groups},
                {"ceu_hidden", cfg.model.ceu_hidden},
                {"crop", cfg.model.crop}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("train config: cannot write " + path);
  out << j.dump(2) << "\n";
  if (!out.flush()) throw std::runtime_error("train config: write failed for " + path);
}

TrainResult train_loop(const TrainConfig& cfg, const std::string& data_dir,
                       const std::string& out_dir, const std::string& resume_checkpoint) {
  cfg.validate();
  const Manifest manifest = load_manifest(data_dir);
  if (manifest.num_classes != cfg.model.num_classes)
    throw std::invalid_argument("train: dataset has " + std::to_string(manifest.num_classes) +
                                " classes but the model expects " +
                                std::to_string(cfg.model.num_classes));
  std::vector<int> train_cases;
  for (int i = 0; i < static_cast<int>(manifest.cases.size()); ++i)
    if (manifest.cases[i].split == "train") train_cases.push_back(i);
  if (train_cases.empty()) throw std::invalid_argument("train: dataset has no train split");

  fs::create_directories(out_dir);

  const Rng master(cfg.seed);
  AepNetModel model;
  AdamState adam;
  Rng sample_rng = master.fork(1);
  Rng crop_rng = master.fork(2);
  Rng flip_rng = master.fork(3);
  long long start_iter = 0;

  if (resume_checkpoint.empty()) {
    model = build(cfg.model, master.fork(0).next_u64());
    adam = make_adam_state(model.params);
  } else {
    Checkpoint ck = load_checkpoint(resume_checkpoint);
    if (!(ck.model_config == cfg.model))
      throw std::invalid_argument("train: checkpoint model config does not match the train config");
    if (ck.rng_sample.empty() || ck.rng_crop.empty() || ck.rng_flip.empty())
      throw std::invalid_argument("train: checkpoint carries no training stream state");
    if (ck.iteration > cfg.max_iter)
      throw std::invalid_argument("train: checkpoint iteration " + std::to_string(ck.iteration) +
                                  " is past max_iter " + std::to_string(cfg.max_iter));
    model.config = ck.model_config;
    model.params = std::move(ck.params);
    adam = std::move(ck.adam);
    sample_rng = Rng::load(ck.rng_sample);
    crop_rng = Rng::load(ck.rng_crop);
    flip_rng = Rng::load(ck.rng_flip);
    start_iter = ck.iteration;
  }

  TrainResult result;
  result.log_path = (fs::path(out_dir) / "train_log.csv").string();
  result.checkpoint_path = (fs::path(out_dir) / "model.ckpt").string();
  std::ofstream log(result.log_path, std::ios::trunc);
  if (!log) throw std::runtime_error("train: cannot open log " + result.log_path);
  log << "iter,l1,l2,l3,total,lr\n";

  for (long long iter = start_iter + 1; iter <= cfg.max_iter; ++iter) {
    const double lr =
        poly_lr(static_cast<int>(iter) - 1, cfg.max_iter, cfg.lr0, cfg.poly_power);

    GradMap batch_grads;
    double l1_sum = 0.0, l2_sum = 0.0, l3_sum = 0.0, total_sum = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const CaseEntry& ce =
          manifest.cases[train_cases[sample_rng.uniform_int(static_cast<int>(train_cases.size()))]];
      const int j = sample_rng.uniform_int(static_cast<int>(ce.masks.size()));
      CaseSample s = load_sample(data_dir, ce, j);
      s.image = preprocess(s.image);
      s = random_crop(s, cfg.crop, crop_rng);
      s = mirror_flip(s, cfg.flip_x, cfg.flip_y, cfg.flip_z, flip_rng);

      Tape tape;
      ParamTensors attached = attach_params(tape, model.params);
      const Shape& d = s.image.shape;
      const Tensor image4(Shape{1, d[0], d[1], d[2]}, s.image.data);
      const ForwardResult fr =
          forward(cfg.model, attached, image4, one_hot(s.mask, cfg.model.num_classes));

      const Tensor l1 = generalized_dice_loss(fr.error_prob, one_hot(s.error_map, 2));
      const Tensor l2 = cfg.model.arch == Arch::plain
                            ? Tensor::scalar(0.0)
                            : boundary_mse(fr.boundary_pred,
                                           Tensor(Shape{1, d[0], d[1], d[2]}, s.boundary.data));
      const Tensor l3 = cfg.model.arch == Arch::full
                            ? ceu_loss(fr.cer, real_error_rate(s.error_map))
                            : Tensor::scalar(0.0);
      const Tensor total = total_loss(l1, l2, l3, cfg.loss);

      const double tv = total.scalar_value();
      if (!std::isfinite(tv)) {
        const std::string dump = (fs::path(out_dir) / "abort_iteration.txt").string();
        std::ofstream d2(dump, std::ios::trunc);
        d2 << "iteration: " << iter << "\ncase: " << ce.id << "\nmask: " << j
           << "\nl1: " << l1.scalar_value() << "\nl2: " << l2.scalar_value()
           << "\nl3: " << l3.scalar_value() << "\ntotal: " << tv << "\n";
        throw std::runtime_error("train: non-finite loss at iteration " + std::to_string(iter) +
                                 " (details in " + dump + ")");
      }

      GradMap grads = tape.backward(total);
      if (iter == 1 && b == 0) {
        for (const auto& [name, g] : grads) {
          double mx = 0.0;
          for (std::size_t i = 0; i < g.numel(); ++i) mx = std::max(mx, std::abs(g[i]));
          if (mx == 0.0)
            throw std::logic_error("train: parameter " + name +
                                   " received no gradient on iteration 1");
        }
      }
      l1_sum += l1.scalar_value();
      l2_sum += l2.scalar_value();
      l3_sum += l3.scalar_value();
      total_sum += tv;
      if (batch_grads.empty()) {
        batch_grads = std::move(grads);
      } else {
        for (auto& [name, g] : batch_grads) {
          const Tensor& add = grads.at(name);
          for (std::size_t i = 0; i < g.numel(); ++i) g[i] += add[i];
        }
      }
    }
    if (cfg.batch_size > 1) {
      const double inv = 1.0 / cfg.batch_size;
      for (auto& [name, g] : batch_grads)
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] *= inv;
      l1_sum *= inv;
      l2_sum *= inv;
      l3_sum *= inv;
      total_sum *= inv;
    }

    adam_step(model.params, batch_grads, adam, lr);
    log << fmt_row(static_cast<int>(iter), l1_sum, l2_sum, l3_sum, total_sum, lr);
    if (!log) throw std::runtime_error("train: log write failed at iteration " + std::to_string(iter));
    result.final_total = total_sum;

    if (cfg.checkpoint_every > 0 && iter % cfg.checkpoint_every == 0 && iter < cfg.max_iter)
      save_checkpoint((fs::path(out_dir) / periodic_name(static_cast<int>(iter))).string(),
                      snapshot(cfg, model, adam, iter, sample_rng, crop_rng, flip_rng));
  }

  if (!log.flush()) throw std::runtime_error("train: log flush failed");
  save_checkpoint(result.checkpoint_path,
                  snapshot(cfg, model, adam, cfg.max_iter, sample_rng, crop_rng, flip_rng));
  return result;
}

}  // namespace aepnet
