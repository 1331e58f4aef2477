#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/tensor.hpp"
#include "phantom.hpp"

namespace aepnet {

/// The severity levels the default 5-mask sets are generated with, tuned so
/// expected mask quality spans the reporting bins from (0.9,0.95] down to
/// (0.5,0.6].
std::vector<double> default_severities();

struct DatasetConfig {
  int num_cases = 60;
  Shape dims = {32, 32, 32};
  int num_classes = 4;
  int masks_per_case = 5;
  std::uint64_t seed = 0;
  std::vector<double> severities = default_severities();  // cycled over mask index
};

struct MaskEntry {
  double severity = 0.0;
  double seg_dsc = 0.0;
  double seg_acc = 0.0;
  std::string mask_path, error_path, boundary_path;  // relative to the dataset dir
};

struct CaseEntry {
  int id = 0;
  std::string split;  // "train" | "test"
  std::string image_path, gt_path;
  std::vector<MaskEntry> masks;
};

struct Manifest {
  Shape dims;
  int num_classes = 0;
  std::uint64_t seed = 0;
  std::vector<CaseEntry> cases;
};

/// Case ids are dealt to splits by id % 3 == 2 -> test, so a third is held out.
std::string split_of(int case_id);

/// Generate every case (phantom, degraded masks, error maps, boundary
/// targets), write all volumes plus manifest.json under `dir`, and return the
/// manifest. Bit-reproducible per config; cases are independently seeded.
Manifest generate_dataset(const DatasetConfig& cfg, const std::string& dir);

Manifest load_manifest(const std::string& dir);

/// Read one (case, mask) volume set back from disk.
CaseSample load_sample(const std::string& dir, const CaseEntry& c, int mask_index);

}  // namespace aepnet
