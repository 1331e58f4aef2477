#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "../support/temp_dir.hpp"
#include "boundary.hpp"
#include "core/tensor.hpp"
#include "dataset.hpp"
#include "metrics.hpp"
#include "phantom.hpp"

using namespace aepnet;
using testutil::TempDir;

namespace {

bool same_values(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) return false;
  for (std::size_t i = 0; i < a.numel(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

bool same_file(const std::string& a, const std::string& b) { return slurp(a) == slurp(b); }

std::string payload_of(const std::string& rvol_path) {
  return std::filesystem::path(rvol_path).replace_extension(".bin").string();
}

DatasetConfig tiny_config() {
  DatasetConfig cfg;
  cfg.num_cases = 6;
  cfg.dims = {16, 16, 16};
  cfg.num_classes = 3;
  cfg.masks_per_case = 3;
  cfg.seed = 5;
  cfg.severities = {0.3, 0.8};
  return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("dataset");

TEST_CASE("generation writes a manifest that loads back identically") {
  TempDir dir("manifest");
  const DatasetConfig cfg = tiny_config();
  Manifest gen = generate_dataset(cfg, dir.str());
  Manifest got = load_manifest(dir.str());

  for (const Manifest* m : {&gen, &got}) {
    CHECK(m->dims == cfg.dims);
    CHECK(m->num_classes == cfg.num_classes);
    CHECK(m->seed == cfg.seed);
    REQUIRE(m->cases.size() == 6);
  }
  for (std::size_t i = 0; i < gen.cases.size(); ++i) {
    const CaseEntry &a = gen.cases[i], &b = got.cases[i];
    CHECK(a.id == b.id);
    CHECK(a.split == b.split);
    CHECK(a.image_path == b.image_path);
    CHECK(a.gt_path == b.gt_path);
    REQUIRE(a.masks.size() == b.masks.size());
    for (std::size_t j = 0; j < a.masks.size(); ++j) {
      CHECK(a.masks[j].severity == b.masks[j].severity);
      CHECK(a.masks[j].seg_dsc == b.masks[j].seg_dsc);
      CHECK(a.masks[j].seg_acc == b.masks[j].seg_acc);
      CHECK(a.masks[j].mask_path == b.masks[j].mask_path);
      CHECK(a.masks[j].error_path == b.masks[j].error_path);
      CHECK(a.masks[j].boundary_path == b.masks[j].boundary_path);
    }
  }

  SUBCASE("a third of the cases is held out") {
    CHECK(split_of(0) == "train");
    CHECK(split_of(2) == "test");
    int held = 0;
    for (const CaseEntry& c : gen.cases) {
      CHECK(c.split == split_of(c.id));
      held += c.split == "test" ? 1 : 0;
    }
    CHECK(held == 2);
  }

  SUBCASE("severities cycle over the mask index") {
    for (const CaseEntry& c : gen.cases) {
      REQUIRE(c.masks.size() == 3);
      CHECK(c.masks[0].severity == 0.3);
      CHECK(c.masks[1].severity == 0.8);
      CHECK(c.masks[2].severity == 0.3);
    }
  }

  SUBCASE("every referenced file exists under predictable names") {
    CHECK(gen.cases[0].image_path == "case_000/image.rvol");
    CHECK(gen.cases[0].masks[1].mask_path == "case_000/mask_1.rvol");
    for (const CaseEntry& c : gen.cases) {
      CHECK(std::filesystem::exists(dir.file(c.image_path)));
      CHECK(std::filesystem::exists(dir.file(c.gt_path)));
      for (const MaskEntry& m : c.masks) {
        CHECK(std::filesystem::exists(dir.file(m.mask_path)));
        CHECK(std::filesystem::exists(dir.file(m.error_path)));
        CHECK(std::filesystem::exists(dir.file(m.boundary_path)));
      }
    }
  }
}

TEST_CASE("stored volumes agree with what their mask implies") {
  TempDir dir("derived");
  const DatasetConfig cfg = tiny_config();
  Manifest m = generate_dataset(cfg, dir.str());

  for (const CaseEntry& c : m.cases) {
    for (int j = 0; j < static_cast<int>(c.masks.size()); ++j) {
      CaseSample s = load_sample(dir.str(), c, j);
      REQUIRE(s.image.shape == cfg.dims);
      REQUIRE(s.gt.shape == cfg.dims);
      REQUIRE(s.mask.shape == cfg.dims);
      REQUIRE(s.error_map.shape == cfg.dims);
      REQUIRE(s.boundary.shape == cfg.dims);

      // labels survive u8 storage exactly, so derived volumes recompute exactly
      CHECK(same_values(s.error_map, make_error_map(s.mask, s.gt)));
      Tensor bnd = enhance_boundary(sobel3d(one_hot(s.mask, cfg.num_classes))).values;
      bool boundary_matches = true;
      for (std::size_t i = 0; i < bnd.numel(); ++i)
        if (s.boundary[i] != static_cast<double>(static_cast<float>(bnd[i])))
          boundary_matches = false;
      CHECK(boundary_matches);

      const SegQuality q = seg_quality(s.mask, s.gt, cfg.num_classes);
      CHECK(c.masks[j].seg_dsc == q.dsc);
      CHECK(c.masks[j].seg_acc == q.acc);
    }
  }

  CHECK_THROWS_AS(load_sample(dir.str(), m.cases[0], 3), std::out_of_range);
  CHECK_THROWS_AS(load_sample(dir.str(), m.cases[0], -1), std::out_of_range);
}

TEST_CASE("the same config regenerates byte-identical files") {
  TempDir d1("repro1"), d2("repro2"), d3("reseed");
  const DatasetConfig cfg = tiny_config();
  Manifest m = generate_dataset(cfg, d1.str());
  generate_dataset(cfg, d2.str());

  CHECK(same_file(d1.file("manifest.json"), d2.file("manifest.json")));
  for (const CaseEntry& c : m.cases) {
    std::vector<std::string> rel{c.image_path, c.gt_path};
    for (const MaskEntry& me : c.masks) {
      rel.push_back(me.mask_path);
      rel.push_back(me.error_path);
      rel.push_back(me.boundary_path);
    }
    for (const std::string& r : rel) {
      CHECK(same_file(d1.file(r), d2.file(r)));
      CHECK(same_file(d1.file(payload_of(r)), d2.file(payload_of(r))));
    }
  }

  DatasetConfig other = cfg;
  other.seed = 6;
  generate_dataset(other, d3.str());
  CHECK_FALSE(same_file(d1.file(payload_of(m.cases[0].image_path)),
                        d3.file(payload_of(m.cases[0].image_path))));
}

TEST_CASE("configs are validated and defaults span the quality range") {
  std::vector<double> sev = default_severities();
  REQUIRE(sev.size() == 5);
  CHECK(sev == std::vector<double>{0.13, 0.28, 0.50, 0.73, 1.00});
  for (std::size_t i = 0; i + 1 < sev.size(); ++i) CHECK(sev[i] < sev[i + 1]);
  CHECK(sev.front() > 0.0);
  CHECK(sev.back() == 1.0);

  TempDir dir("badcfg");
  DatasetConfig cfg = tiny_config();
  cfg.num_cases = 0;
  CHECK_THROWS_AS(generate_dataset(cfg, dir.str()), std::invalid_argument);
  cfg = tiny_config();
  cfg.severities = {0.3, 1.5};
  CHECK_THROWS_AS(generate_dataset(cfg, dir.str()), std::invalid_argument);
  cfg = tiny_config();
  cfg.severities.clear();
  CHECK_THROWS_AS(generate_dataset(cfg, dir.str()), std::invalid_argument);
  cfg = tiny_config();
  cfg.masks_per_case = 0;
  CHECK_THROWS_AS(generate_dataset(cfg, dir.str()), std::invalid_argument);

  CHECK_THROWS(load_manifest(dir.str()));  // nothing was written there
  std::ofstream(dir.file("manifest.json")) << "{ not json";
  CHECK_THROWS(load_manifest(dir.str()));
}

TEST_SUITE_END();
