#include "dataset.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "boundary.hpp"
#include "core/rng.hpp"
#include "metrics.hpp"
#include "volume.hpp"

namespace aepnet {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string case_dir_name(int id) {
  std::ostringstream os;
  os << "case_" << std::setw(3) << std::setfill('0') << id;
  return os.str();
}

void validate(const DatasetConfig& cfg) {
  if (cfg.num_cases < 1) throw std::invalid_argument("dataset: num_cases must be >= 1");
  if (cfg.masks_per_case < 1) throw std::invalid_argument("dataset: masks_per_case must be >= 1");
  if (cfg.severities.empty()) throw std::invalid_argument("dataset: severities must be nonempty");
  for (double s : cfg.severities)
    if (s < 0.0 || s > 1.0)
      throw std::invalid_argument("dataset: severities must lie in [0,1], got " +
                                  std::to_string(s));
}

}  // namespace

std::vector<double> default_severities() { return {0.13, 0.28, 0.50, 0.73, 1.00}; }

std::string split_of(int case_id) { return case_id % 3 == 2 ? "test" : "train"; }

Manifest generate_dataset(const DatasetConfig& cfg, const std::string& dir) {
  validate(cfg);
  fs::create_directories(dir);

  Manifest m;
  m.dims = cfg.dims;
  m.num_classes = cfg.num_classes;
  m.seed = cfg.seed;

  const Rng base(cfg.seed);
  for (int i = 0; i < cfg.num_cases; ++i) {
    const std::uint64_t case_seed = base.fork(static_cast<std::uint64_t>(i)).next_u64();
    Phantom ph = gen_phantom(case_seed, cfg.dims, cfg.num_classes);

    CaseEntry ce;
    ce.id = i;
    ce.split = split_of(i);
    const std::string cd = case_dir_name(i);
    fs::create_directories(fs::path(dir) / cd);
    ce.image_path = cd + "/image.rvol";
    ce.gt_path = cd + "/gt.rvol";
    write_volume((fs::path(dir) / ce.image_path).string(), ph.image, VolDtype::f32);
    write_volume((fs::path(dir) / ce.gt_path).string(), ph.gt, VolDtype::u8);

    const Rng mask_base(case_seed);
    for (int j = 0; j < cfg.masks_per_case; ++j) {
      MaskEntry me;
      me.severity = cfg.severities[j % cfg.severities.size()];
      const std::uint64_t mask_seed = mask_base.fork(1000 + static_cast<std::uint64_t>(j)).next_u64();
      Tensor mask = degrade_mask(ph.gt, me.severity, mask_seed, cfg.num_classes);
      Tensor err = make_error_map(mask, ph.gt);
      Tensor bnd = enhance_boundary(sobel3d(one_hot(mask, cfg.num_classes))).values;
      const SegQuality q = seg_quality(mask, ph.gt, cfg.num_classes);
      me.seg_dsc = q.dsc;
      me.seg_acc = q.acc;

      const std::string sj = std::to_string(j);
      me.mask_path = cd + "/mask_" + sj + ".rvol";
      me.error_path = cd + "/error_" + sj + ".rvol";
      me.boundary_path = cd + "/boundary_" + sj + ".rvol";
      write_volume((fs::path(dir) / me.mask_path).string(), mask, VolDtype::u8);
      write_volume((fs::path(dir) / me.error_path).string(), err, VolDtype::u8);
      write_volume((fs::path(dir) / me.boundary_path).string(), bnd, VolDtype::f32);
      ce.masks.push_back(std::move(me));
    }
    m.cases.push_back(std::move(ce));
  }

  ordered_json j;
  j["format"] = "aepnet-dataset";
  j["version"] = 1;
  j["dims"] = m.dims;
  j["num_classes"] = m.num_classes;
  j["seed"] = m.seed;
  j["cases"] = ordered_json::array();
  for (const CaseEntry& ce : m.cases) {
    ordered_json jc;
    jc["id"] = ce.id;
    jc["split"] = ce.split;
    jc["image"] = ce.image_path;
    jc["gt"] = ce.gt_path;
    jc["masks"] = ordered_json::array();
    for (const MaskEntry& me : ce.masks) {
      ordered_json jm;
      jm["severity"] = me.severity;
      jm["seg_dsc"] = me.seg_dsc;
      jm["seg_acc"] = me.seg_acc;
      jm["mask"] = me.mask_path;
      jm["error_map"] = me.error_path;
      jm["boundary"] = me.boundary_path;
      jc["masks"].push_back(std::move(jm));
    }
    j["cases"].push_back(std::move(jc));
  }
  std::ofstream out(fs::path(dir) / "manifest.json", std::ios::trunc);
  if (!out) throw std::runtime_error("dataset: cannot write manifest.json under " + dir);
  out << j.dump(2) << "\n";
  if (!out.flush()) throw std::runtime_error("dataset: manifest write failed");
  return m;
}

Manifest load_manifest(const std::string& dir) {
  const fs::path path = fs::path(dir) / "manifest.json";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("dataset: cannot open " + path.string());
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("dataset: malformed manifest: " + std::string(e.what()));
  }
  if (j.value("format", "") != "aepnet-dataset" || j.value("version", 0) != 1)
    throw std::runtime_error("dataset: unrecognized manifest format in " + path.string());

  Manifest m;
  m.dims = j.at("dims").get<Shape>();
  m.num_classes = j.at("num_classes").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& jc : j.at("cases")) {
    CaseEntry ce;
    ce.id = jc.at("id").get<int>();
    ce.split = jc.at("split").get<std::string>();
    ce.image_path = jc.at("image").get<std::string>();
    ce.gt_path = jc.at("gt").get<std::string>();
    for (const auto& jm : jc.at("masks")) {
      MaskEntry me;
      me.severity = jm.at("severity").get<double>();
      me.seg_dsc = jm.at("seg_dsc").get<double>();
      me.seg_acc = jm.at("seg_acc").get<double>();
      me.mask_path = jm.at("mask").get<std::string>();
      me.error_path = jm.at("error_map").get<std::string>();
      me.boundary_path = jm.at("boundary").get<std::string>();
      ce.masks.push_back(std::move(me));
    }
    m.cases.push_back(std::move(ce));
  }
  return m;
}

CaseSample load_sample(const std::string& dir, const CaseEntry& c, int mask_index) {
  if (mask_index < 0 || mask_index >= static_cast<int>(c.masks.size()))
    throw std::out_of_range("dataset: case " + std::to_string(c.id) + " has no mask " +
                            std::to_string(mask_index));
  const MaskEntry& me = c.masks[mask_index];
  CaseSample s;
  s.image = read_volume((fs::path(dir) / c.image_path).string());
  s.gt = read_volume((fs::path(dir) / c.gt_path).string());
  s.mask = read_volume((fs::path(dir) / me.mask_path).string());
  s.error_map = read_volume((fs::path(dir) / me.error_path).string());
  s.boundary = read_volume((fs::path(dir) / me.boundary_path).string());
  return s;
}

}  // namespace aepnet
