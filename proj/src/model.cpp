#include "model.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "core/nn_ops.hpp"
#include "core/ops.hpp"
#include "core/rng.hpp"
#include "core/tape.hpp"

namespace aepnet {

using namespace ops;
using nn::ConvSpec;

std::string arch_name(Arch a) {
  switch (a) {
    case Arch::full: return "full";
    case Arch::no_ceu: return "no_ceu";
    case Arch::plain: return "plain";
  }
  throw std::logic_error("arch_name: bad enum value");
}

Arch arch_from_name(const std::string& s) {
  if (s == "full") return Arch::full;
  if (s == "no_ceu") return Arch::no_ceu;
  if (s == "plain") return Arch::plain;
  throw std::invalid_argument("unknown arch '" + s + "' (expected full, no_ceu, or plain)");
}

void AepNetConfig::validate() const {
  if (num_classes < 2) throw std::invalid_argument("config: num_classes must be >= 2");
  if (depth < 1) throw std::invalid_argument("config: depth must be >= 1");
  if (base_channels < 1 || gn_groups < 1 || base_channels % gn_groups != 0)
    throw std::invalid_argument("config: base_channels must be a positive multiple of gn_groups");
  if (ceu_hidden < 1) throw std::invalid_argument("config: ceu_hidden must be positive");
  if (crop < 1 || crop % (1 << depth) != 0)
    throw std::invalid_argument("config: crop extent must be divisible by 2^depth");
}

std::size_t AepNetModel::param_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t.numel();
  return n;
}

namespace {

Tensor xavier(Rng& rng, const Shape& shape, int fan_in, int fan_out) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t = Tensor::zeros(shape);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-a, a);
  return t;
}

struct Builder {
  Rng rng;
  ParamTensors out;

  void conv(const std::string& name, int ci, int co, int k) {
    out.emplace(name + ".w", xavier(rng, {co, ci, k, k, k}, ci * k * k * k, co * k * k * k));
    out.emplace(name + ".b", Tensor::zeros({co}));
  }
  void tconv(const std::string& name, int ci, int co, int k) {
    out.emplace(name + ".w", xavier(rng, {ci, co, k, k, k}, ci * k * k * k, co * k * k * k));
    out.emplace(name + ".b", Tensor::zeros({co}));
  }
  void gn(const std::string& name, int c) {
    out.emplace(name + ".g", Tensor::full({c}, 1.0));
    out.emplace(name + ".b", Tensor::zeros({c}));
  }
  void linear(const std::string& name, int in, int n) {
    out.emplace(name + ".w", xavier(rng, {n, in}, in, n));
    out.emplace(name + ".b", Tensor::zeros({n}));
  }
  // two (conv3 -> gn -> relu) stages
  void block(const std::string& name, int ci, int co) {
    conv(name + ".conv1", ci, co, 3);
    gn(name + ".gn1", co);
    conv(name + ".conv2", co, co, 3);
    gn(name + ".gn2", co);
  }
  void unet(const std::string& p, const AepNetConfig& cfg, int in_ch, int extra_at_level,
            int head_out) {
    // `extra_at_level` > 0 marks the branch that concatenates the other
    // branch's per-level features onto its own input (encoder sharing)
    for (int l = 0; l < cfg.depth; ++l) {
      int base_in = l == 0 ? in_ch : cfg.level_channels(l - 1);
      int extra = extra_at_level ? cfg.level_channels(l) : 0;
      block(p + ".enc" + std::to_string(l), base_in + extra, cfg.level_channels(l));
    }
    int bot_extra = extra_at_level ? cfg.bottleneck_channels() : 0;
    block(p + ".bot", cfg.level_channels(cfg.depth - 1) + bot_extra, cfg.bottleneck_channels());
    for (int l = cfg.depth - 1; l >= 0; --l) {
      int from = l == cfg.depth - 1 ? cfg.bottleneck_channels() : cfg.level_channels(l + 1);
      int c = cfg.level_channels(l);
      std::string d = p + ".dec" + std::to_string(l);
      tconv(d + ".up", from, c, 2);
      block(d, 2 * c, c);
    }
    conv(p + ".head", cfg.level_channels(0), head_out, 1);
  }
};

// One (conv3x3x3 pad 1 -> group_norm -> relu) stage.
Tensor conv_gn_relu(const ParamTensors& p, const std::string& conv_name,
                    const std::string& gn_name, const Tensor& x, int groups) {
  const Tensor& w = p.at(conv_name + ".w");
  ConvSpec s;
  s.in_channels = w.shape[1];
  s.out_channels = w.shape[0];
  s.kd = s.kh = s.kw = w.shape[2];
  s.padding = w.shape[2] / 2;
  Tensor y = nn::conv3d(x, s, w, p.at(conv_name + ".b"));
  y = nn::group_norm(y, groups, p.at(gn_name + ".g"), p.at(gn_name + ".b"));
  return relu(y);
}

Tensor run_block(const ParamTensors& p, const std::string& name, const Tensor& x, int groups) {
  Tensor y = conv_gn_relu(p, name + ".conv1", name + ".gn1", x, groups);
  return conv_gn_relu(p, name + ".conv2", name + ".gn2", y, groups);
}

Tensor run_conv1x1(const ParamTensors& p, const std::string& name, const Tensor& x) {
  const Tensor& w = p.at(name + ".w");
  ConvSpec s;
  s.in_channels = w.shape[1];
  s.out_channels = w.shape[0];
  return nn::conv3d(x, s, w, p.at(name + ".b"));
}

Tensor run_tconv(const ParamTensors& p, const std::string& name, const Tensor& x) {
  const Tensor& w = p.at(name + ".w");
  ConvSpec s;
  s.in_channels = w.shape[0];
  s.out_channels = w.shape[1];
  s.kd = s.kh = s.kw = w.shape[2];
  s.stride = 2;
  return nn::transposed_conv3d(x, s, w, p.at(name + ".b"));
}

struct UnetOut {
  std::vector<Tensor> enc;  // per-level block outputs (pre-pool)
  Tensor bot;
  std::vector<Tensor> dec;  // per-level decoder outputs, index = level
  Tensor last;              // dec[0] after any fusion
};

}  // namespace

AepNetModel build(const AepNetConfig& config, std::uint64_t seed) {
  config.validate();
  Builder b{Rng(seed), {}};
  if (config.arch == Arch::plain) {
    b.unet("unet", config, 1 + config.num_classes, 0, 2);
  } else {
    b.unet("cbft", config, 1, 0, 1);
    b.unet("mep", config, config.num_classes, 1, 2);
    for (int l = 0; l < config.depth; ++l) {
      int c = config.level_channels(l);
      b.conv("mep.att" + std::to_string(l), c, c, 1);
    }
    if (config.arch == Arch::full) {
      int cb = config.bottleneck_channels();
      b.conv("ceu.conv1", cb, cb / 2, 3);
      b.gn("ceu.gn1", cb / 2);
      b.conv("ceu.conv2", cb / 2, cb / 2, 3);
      b.gn("ceu.gn2", cb / 2);
      b.linear("ceu.fc1", cb / 2, config.ceu_hidden);
      b.linear("ceu.fc2", config.ceu_hidden, 1);
    }
  }
  return AepNetModel{config, std::move(b.out)};
}

ParamTensors attach_params(Tape& tape, const ParamTensors& params) {
  ParamTensors out;
  for (const auto& [name, t] : params) out.emplace(name, tape.leaf(t, true, name));
  return out;
}

Tensor attention_fuse(const Tensor& f_mep, const Tensor& f_cbft, const Tensor& w,
                      const Tensor& b) {
  ConvSpec s;
  s.in_channels = w.shape[1];
  s.out_channels = w.shape[0];
  Tensor gate = sigmoid(nn::conv3d(f_cbft, s, w, b));
  return add(f_mep, mul(f_mep, gate));
}

Tensor ceu_forward(const AepNetConfig& config, const ParamTensors& params, const Tensor& f_deep) {
  const int groups = config.gn_groups;
  Tensor y = conv_gn_relu(params, "ceu.conv1", "ceu.gn1", f_deep, groups);
  const bool poolable =
      y.shape[1] % 2 == 0 && y.shape[2] % 2 == 0 && y.shape[3] % 2 == 0 && y.shape[1] >= 2;
  if (poolable) y = nn::max_pool3d(y);
  y = conv_gn_relu(params, "ceu.conv2", "ceu.gn2", y, groups);
  Tensor v = nn::global_avg_pool(y);
  v = relu(linear(v, params.at("ceu.fc1.w"), params.at("ceu.fc1.b")));
  v = linear(v, params.at("ceu.fc2.w"), params.at("ceu.fc2.b"));
  return sigmoid(v);
}

namespace {

UnetOut run_unet(const AepNetConfig& cfg, const ParamTensors& p, const std::string& prefix,
                 const Tensor& input, const UnetOut* shared) {
  UnetOut u;
  u.enc.resize(cfg.depth);
  u.dec.resize(cfg.depth);
  Tensor f = input;
  for (int l = 0; l < cfg.depth; ++l) {
    if (shared) f = nn::concat_channels(f, shared->enc[l]);
    f = run_block(p, prefix + ".enc" + std::to_string(l), f, cfg.gn_groups);
    u.enc[l] = f;
    f = nn::max_pool3d(f);
  }
  if (shared) f = nn::concat_channels(f, shared->bot);
  u.bot = run_block(p, prefix + ".bot", f, cfg.gn_groups);
  Tensor g = u.bot;
  for (int l = cfg.depth - 1; l >= 0; --l) {
    std::string d = prefix + ".dec" + std::to_string(l);
    g = run_tconv(p, d + ".up", g);
    g = nn::concat_channels(g, u.enc[l]);
    g = run_block(p, d, g, cfg.gn_groups);
    if (shared) {
      std::string a = prefix + ".att" + std::to_string(l);
      g = attention_fuse(g, shared->dec[l], p.at(a + ".w"), p.at(a + ".b"));
    }
    u.dec[l] = g;
  }
  u.last = g;
  return u;
}

}  // namespace

ForwardResult forward(const AepNetConfig& config, const ParamTensors& params,
                      const Tensor& image, const Tensor& mask_onehot) {
  if (image.shape.size() != 4 || image.shape[0] != 1)
    throw std::invalid_argument("forward: image must be [1 x D x H x W], got " +
                                shape_str(image.shape));
  if (mask_onehot.shape.size() != 4 || mask_onehot.shape[0] != config.num_classes)
    throw std::invalid_argument("forward: mask must be [" + std::to_string(config.num_classes) +
                                " x D x H x W], got " + shape_str(mask_onehot.shape));
  for (int a = 1; a < 4; ++a) {
    if (image.shape[a] != mask_onehot.shape[a])
      throw std::invalid_argument("forward: image/mask extent mismatch " +
                                  shape_str(image.shape) + " vs " + shape_str(mask_onehot.shape));
    if (image.shape[a] % (1 << config.depth) != 0)
      throw std::invalid_argument("forward: extents must be divisible by 2^depth, got " +
                                  shape_str(image.shape));
  }

  ForwardResult r;
  if (config.arch == Arch::plain) {
    UnetOut u = run_unet(config, params, "unet", nn::concat_channels(image, mask_onehot), nullptr);
    r.error_prob = softmax_channels(run_conv1x1(params, "unet.head", u.last));
    return r;
  }

  UnetOut cbft = run_unet(config, params, "cbft", image, nullptr);
  r.boundary_pred = sigmoid(run_conv1x1(params, "cbft.head", cbft.last));
  UnetOut mep = run_unet(config, params, "mep", mask_onehot, &cbft);
  r.error_prob = softmax_channels(run_conv1x1(params, "mep.head", mep.last));
  if (config.arch == Arch::full) r.cer = ceu_forward(config, params, mep.bot);
  return r;
}

}  // namespace aepnet
