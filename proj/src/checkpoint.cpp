#include "checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace aepnet {

namespace {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload I/O assumes a little-endian host");

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error("checkpoint " + path + ": " + what);
}

std::string hex_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_double(const std::string& path, const std::string& s) {
  double v = 0.0;
  if (std::sscanf(s.c_str(), "%la", &v) != 1) fail(path, "bad float field '" + s + "'");
  return v;
}

// the three tensor families stored per parameter, in file order
const char* kKinds[3] = {"param/", "adam_m/", "adam_v/"};

Tensor* slot_of(Checkpoint& ck, const std::string& qualified, const std::string& path) {
  for (int k = 0; k < 3; ++k) {
    const std::string prefix = kKinds[k];
    if (qualified.rfind(prefix, 0) == 0) {
      const std::string name = qualified.substr(prefix.size());
      auto& family = k == 0 ? ck.params : k == 1 ? ck.adam.m : ck.adam.v;
      return &family[name];
    }
  }
  fail(path, "unknown tensor kind in '" + qualified + "'");
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  ck.model_config.validate();
  const fs::path header(path);
  fs::path payload = header;
  payload.replace_extension(".bin");

  std::ofstream h(header, std::ios::trunc);
  if (!h) fail(path, "cannot open manifest for writing");
  h << "AEPC 1\n";
  h << "arch: " << arch_name(ck.model_config.arch) << "\n";
  h << "num_classes: " << ck.model_config.num_classes << "\n";
  h << "depth: " << ck.model_config.depth << "\n";
  h << "base_channels: " << ck.model_config.base_channels << "\n";
  h << "gn_groups: " << ck.model_config.gn_groups << "\n";
  h << "ceu_hidden: " << ck.model_config.ceu_hidden << "\n";
  h << "crop: " << ck.model_config.crop << "\n";
  h << "iteration: " << ck.iteration << "\n";
  h << "adam_step: " << ck.adam.step << "\n";
  h << "adam_beta1: " << hex_double(ck.adam.beta1) << "\n";
  h << "adam_beta2: " << hex_double(ck.adam.beta2) << "\n";
  h << "adam_eps: " << hex_double(ck.adam.eps) << "\n";
  h << "rng_sample: " << (ck.rng_sample.empty() ? "-" : ck.rng_sample) << "\n";
  h << "rng_crop: " << (ck.rng_crop.empty() ? "-" : ck.rng_crop) << "\n";
  h << "rng_flip: " << (ck.rng_flip.empty() ? "-" : ck.rng_flip) << "\n";
  h << "tensors: " << 3 * ck.params.size() << "\n";

  std::ofstream b(payload, std::ios::binary | std::ios::trunc);
  if (!b) fail(path, "cannot open payload for writing");
  for (const auto& [name, p] : ck.params) {
    auto mit = ck.adam.m.find(name);
    auto vit = ck.adam.v.find(name);
    if (mit == ck.adam.m.end() || vit == ck.adam.v.end())
      fail(path, "optimizer moments missing for " + name);
    const Tensor* three[3] = {&p, &mit->second, &vit->second};
    for (int k = 0; k < 3; ++k) {
      const Tensor& t = *three[k];
      if (!same_shape(t.shape, p.shape))
        fail(path, "moment shape " + shape_str(t.shape) + " does not match " + name);
      h << "tensor: " << kKinds[k] << name;
      for (int e : t.shape) h << " " << e;
      h << "\n";
      b.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
    }
  }
  h << "payload: " << payload.filename().string() << "\n";
  if (!h.flush()) fail(path, "manifest write failed");
  if (!b.flush()) fail(path, "payload write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream h(path);
  if (!h) fail(path, "cannot open manifest");
  std::string magic;
  int version = 0;
  if (!(h >> magic >> version) || magic != "AEPC" || version != 1)
    fail(path, "bad magic/version '" + magic + " " + std::to_string(version) + "'");
  h.ignore(1, '\n');

  Checkpoint ck;
  std::vector<std::pair<std::string, Shape>> order;  // payload order
  std::string payload_name;
  long long declared_tensors = -1;
  std::string line;
  while (std::getline(h, line)) {
    if (line.empty()) continue;
    const auto colon = line.find(": ");
    if (colon == std::string::npos) fail(path, "malformed line '" + line + "'");
    const std::string key = line.substr(0, colon);
    const std::string val = line.substr(colon + 2);
    if (key == "arch") ck.model_config.arch = arch_from_name(val);
    else if (key == "num_classes") ck.model_config.num_classes = std::stoi(val);
    else if (key == "depth") ck.model_config.depth = std::stoi(val);
    else if (key == "base_channels") ck.model_config.base_channels = std::stoi(val);
    else if (key == "gn_groups") ck.model_config.gn_groups = std::stoi(val);
    else if (key == "ceu_hidden") ck.model_config.ceu_hidden = std::stoi(val);
    else if (key == "crop") ck.model_config.crop = std::stoi(val);
    else if (key == "iteration") ck.iteration = std::stoll(val);
    else if (key == "adam_step") ck.adam.step = std::stoll(val);
    else if (key == "adam_beta1") ck.adam.beta1 = parse_double(path, val);
    else if (key == "adam_beta2") ck.adam.beta2 = parse_double(path, val);
    else if (key == "adam_eps") ck.adam.eps = parse_double(path, val);
    else if (key == "rng_sample") ck.rng_sample = val == "-" ? "" : val;
    else if (key == "rng_crop") ck.rng_crop = val == "-" ? "" : val;
    else if (key == "rng_flip") ck.rng_flip = val == "-" ? "" : val;
    else if (key == "tensors") declared_tensors = std::stoll(val);
    else if (key == "payload") payload_name = val;
    else if (key == "tensor") {
      std::istringstream is(val);
      std::string qualified;
      is >> qualified;
      Shape shape;
      for (int e = 0; is >> e;) shape.push_back(e);
      if (qualified.empty() || shape.empty()) fail(path, "malformed tensor line '" + line + "'");
      *slot_of(ck, qualified, path) = Tensor::zeros(shape);
      order.emplace_back(qualified, std::move(shape));
    } else {
      fail(path, "unknown key '" + key + "'");
    }
  }
  if (payload_name.empty()) fail(path, "missing payload line");
  if (declared_tensors != static_cast<long long>(order.size()))
    fail(path, "tensor count mismatch: declared " + std::to_string(declared_tensors) + ", found " +
                   std::to_string(order.size()));

  // the stored tensor set must be exactly what the stored config builds
  const AepNetModel expect = build(ck.model_config, 0);
  if (expect.params.size() != ck.params.size())
    fail(path, "parameter set does not match the stored config");
  for (const auto& [name, p] : expect.params) {
    auto it = ck.params.find(name);
    if (it == ck.params.end()) fail(path, "missing parameter " + name);
    if (!same_shape(it->second.shape, p.shape))
      fail(path, "shape mismatch for " + name + ": stored " + shape_str(it->second.shape) +
                     ", config builds " + shape_str(p.shape));
    if (ck.adam.m.count(name) == 0 || ck.adam.v.count(name) == 0)
      fail(path, "optimizer moments missing for " + name);
  }

  const fs::path payload = fs::path(path).parent_path() / payload_name;
  std::size_t want = 0;
  for (const auto& [q, s] : order) want += shape_numel(s);
  std::error_code ec;
  const auto got = fs::file_size(payload, ec);
  if (ec) fail(path, "cannot stat payload " + payload.string());
  if (got != want * sizeof(double))
    fail(path, "payload size mismatch: expected " + std::to_string(want * sizeof(double)) +
                   " bytes, got " + std::to_string(got));

  std::ifstream b(payload, std::ios::binary);
  if (!b) fail(path, "cannot open payload");
  for (const auto& [qualified, shape] : order) {
    Tensor* t = slot_of(ck, qualified, path);
    b.read(reinterpret_cast<char*>(t->data.data()),
           static_cast<std::streamsize>(t->numel() * sizeof(double)));
    if (!b) fail(path, "payload read failed at " + qualified);
  }
  return ck;
}

}  // namespace aepnet
