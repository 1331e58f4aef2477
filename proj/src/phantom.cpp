#include "phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace aepnet {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void require_labels(const char* op, const Tensor& t, int num_classes) {
  for (std::size_t i = 0; i < t.numel(); ++i) {
    const double v = t[i];
    if (v != std::floor(v) || v < 0.0 || v >= static_cast<double>(num_classes))
      throw std::invalid_argument(std::string(op) + ": label out of range 0.." +
                                  std::to_string(num_classes - 1) + ", found " +
                                  std::to_string(v));
  }
}

struct Geometry {
  std::array<double, 3> center;   // normalized [0,1] coordinates
  std::array<double, 3> radius;   // normalized semi-axes
  std::vector<double> threshold;  // warped-radius shell edges, decreasing
  double warp_amp;
  std::array<double, 3> warp_freq, warp_phase;
};

Geometry draw_geometry(Rng& rng, int num_classes) {
  Geometry g;
  for (auto& c : g.center) c = 0.5 + rng.uniform(-0.06, 0.06);
  for (auto& r : g.radius) r = rng.uniform(0.32, 0.42);
  // equal-volume nesting: shell k ends at ((C-k)/(C-1))^(1/3) of the radius
  g.threshold.resize(num_classes - 1);
  for (int k = 1; k < num_classes; ++k)
    g.threshold[k - 1] = std::cbrt(static_cast<double>(num_classes - k) / (num_classes - 1)) *
                         (1.0 + rng.uniform(-0.025, 0.025));
  g.warp_amp = rng.uniform(0.05, 0.12);
  for (auto& f : g.warp_freq) f = rng.uniform(0.8, 1.6);
  for (auto& p : g.warp_phase) p = rng.uniform(0.0, 1.0);
  return g;
}

// Largest k with warped radius <= threshold[k-1]; 0 outside the outer shell.
int label_at(const Geometry& g, double ud, double uh, double uw) {
  const double dd = (ud - g.center[0]) / g.radius[0];
  const double dh = (uh - g.center[1]) / g.radius[1];
  const double dw = (uw - g.center[2]) / g.radius[2];
  const double base = std::sqrt(dd * dd + dh * dh + dw * dw);
  const double warp = (std::sin(kTwoPi * (g.warp_freq[0] * ud + g.warp_phase[0])) +
                       std::sin(kTwoPi * (g.warp_freq[1] * uh + g.warp_phase[1])) +
                       std::sin(kTwoPi * (g.warp_freq[2] * uw + g.warp_phase[2]))) /
                      3.0;
  const double rho = base * (1.0 + g.warp_amp * warp);
  int label = 0;
  for (std::size_t k = 0; k < g.threshold.size(); ++k)
    if (rho <= g.threshold[k]) label = static_cast<int>(k) + 1;
  return label;
}

std::vector<int> to_labels(const Tensor& t) {
  std::vector<int> v(t.numel());
  for (std::size_t i = 0; i < t.numel(); ++i) v[i] = static_cast<int>(t[i]);
  return v;
}

Tensor from_labels(const std::vector<int>& v, const Shape& shape) {
  Tensor t = Tensor::zeros(shape);
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = v[i];
  return t;
}

struct Extents {
  int D, H, W;
  std::size_t at(int d, int h, int w) const {
    return (static_cast<std::size_t>(d) * H + h) * W + w;
  }
};

constexpr int kNbr[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};

// One synchronous partial-morphology pass for class k. Eroding: boundary
// voxels of k join their most common differing 6-neighbor label with
// probability q (ties to the smallest label). Dilating: non-k voxels with a
// k 6-neighbor become k with probability q. Stacked passes penetrate deeper,
// so expected radius grows with q times the pass count.
void morph_pass(std::vector<int>& lab, const Extents& e, int k, bool erode, double q, Rng& rng) {
  const std::vector<int> snap = lab;
  for (int d = 0; d < e.D; ++d)
    for (int h = 0; h < e.H; ++h)
      for (int w = 0; w < e.W; ++w) {
        const std::size_t i = e.at(d, h, w);
        if (erode ? snap[i] != k : snap[i] == k) continue;
        int count[256] = {0};
        bool touches = false;
        for (const auto& n : kNbr) {
          const int nd = d + n[0], nh = h + n[1], nw = w + n[2];
          if (nd < 0 || nd >= e.D || nh < 0 || nh >= e.H || nw < 0 || nw >= e.W) continue;
          const int v = snap[e.at(nd, nh, nw)];
          if (v != k)
            ++count[v];
          else
            touches = true;
        }
        if (erode) {
          bool any_other = false;
          for (int v = 0; v < 256 && !any_other; ++v) any_other = count[v] > 0;
          if (!any_other) continue;  // interior voxel
          if (!rng.bernoulli(q)) continue;
          int best = 0, best_count = -1;
          for (int v = 0; v < 256; ++v)
            if (count[v] > best_count) {
              best = v;
              best_count = count[v];
            }
          lab[i] = best;
        } else {
          if (!touches) continue;
          if (rng.bernoulli(q)) lab[i] = k;
        }
      }
}

}  // namespace

double class_mean(int k, int num_classes) {
  return 0.1 + static_cast<double>(k) * 0.8 / (num_classes - 1);
}

double noise_sigma(int num_classes) {
  return std::min(0.05, 0.4 / (num_classes - 1));
}

Phantom gen_phantom(std::uint64_t seed, const Shape& dims, int num_classes) {
  if (dims.size() != 3 || dims[0] < 16 || dims[1] < 16 || dims[2] < 16)
    throw std::invalid_argument("gen_phantom: dims must be three extents >= 16, got " +
                                shape_str(dims));
  if (num_classes < 2) throw std::invalid_argument("gen_phantom: need at least 2 classes");

  Rng root(seed);
  Rng geo = root.fork(1);
  Rng img = root.fork(2);

  const int D = dims[0], H = dims[1], W = dims[2];
  const std::size_t n = shape_numel(dims);
  const std::size_t min_count = std::max<std::size_t>(1, n / 100);

  Tensor gt = Tensor::zeros(dims);
  Geometry g;
  bool ok = false;
  for (int attempt = 0; attempt < 50 && !ok; ++attempt) {
    g = draw_geometry(geo, num_classes);
    std::vector<std::size_t> count(num_classes, 0);
    std::size_t i = 0;
    for (int d = 0; d < D; ++d)
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w, ++i) {
          const int lab = label_at(g, (d + 0.5) / D, (h + 0.5) / H, (w + 0.5) / W);
          gt[i] = lab;
          ++count[lab];
        }
    ok = true;
    for (int c = 1; c < num_classes; ++c)
      if (count[c] < min_count) ok = false;
  }
  if (!ok)
    throw std::runtime_error("gen_phantom: no geometry with every class >= 1% after 50 attempts");

  std::array<double, 3> bf, bp;
  for (auto& f : bf) f = img.uniform(0.4, 0.9);
  for (auto& p : bp) p = img.uniform(0.0, 1.0);
  const double sigma = noise_sigma(num_classes);

  Tensor image = Tensor::zeros(dims);
  std::size_t i = 0;
  for (int d = 0; d < D; ++d)
    for (int h = 0; h < H; ++h)
      for (int w = 0; w < W; ++w, ++i) {
        const double bias = 1.0 + 0.06 * std::sin(kTwoPi * (bf[0] * (d + 0.5) / D + bp[0])) *
                                      std::sin(kTwoPi * (bf[1] * (h + 0.5) / H + bp[1])) *
                                      std::sin(kTwoPi * (bf[2] * (w + 0.5) / W + bp[2]));
        image[i] = class_mean(static_cast<int>(gt[i]), num_classes) * bias + sigma * img.normal();
      }
  return Phantom{std::move(image), std::move(gt)};
}

Tensor degrade_mask(const Tensor& gt, double severity, std::uint64_t seed, int num_classes) {
  if (gt.shape.size() != 3)
    throw std::invalid_argument("degrade_mask: expected [D x H x W], got " + shape_str(gt.shape));
  if (severity < 0.0 || severity > 1.0)
    throw std::invalid_argument("degrade_mask: severity must lie in [0,1], got " +
                                std::to_string(severity));
  require_labels("degrade_mask", gt, num_classes);
  if (severity == 0.0) return gt.detached();

  Rng rng(seed);
  const Extents e{gt.shape[0], gt.shape[1], gt.shape[2]};
  std::vector<int> lab = to_labels(gt);

  // (a) partial erosion/dilation of every foreground class in a random
  // direction; two stacked passes whose per-voxel odds scale with severity,
  // so the expected morphological radius does too
  std::vector<bool> erode_dir(num_classes);
  for (int c = 1; c < num_classes; ++c) erode_dir[c] = rng.bernoulli(0.5);
  const double q = 0.25 * severity;
  for (int pass = 0; pass < 3; ++pass)
    for (int c = 1; c < num_classes; ++c) morph_pass(lab, e, c, erode_dir[c], q, rng);

  // (b) independent flips in the boundary band: each voxel touching a label
  // transition takes a random 6-neighbor's label with severity-scaled odds
  {
    const std::vector<int> snap = lab;
    const double p = 0.45 * severity;
    for (int d = 0; d < e.D; ++d)
      for (int h = 0; h < e.H; ++h)
        for (int w = 0; w < e.W; ++w) {
          const std::size_t i = e.at(d, h, w);
          std::array<std::size_t, 6> nbr;
          int n_valid = 0;
          bool band = false;
          for (const auto& nb : kNbr) {
            const int nd = d + nb[0], nh = h + nb[1], nw = w + nb[2];
            if (nd < 0 || nd >= e.D || nh < 0 || nh >= e.H || nw < 0 || nw >= e.W) continue;
            const std::size_t j = e.at(nd, nh, nw);
            nbr[n_valid++] = j;
            if (snap[j] != snap[i]) band = true;
          }
          if (!band) continue;
          if (rng.bernoulli(p)) lab[i] = snap[nbr[rng.uniform_int(n_valid)]];
        }
  }

  // (c) paint random balls with random labels
  const int n_blobs = static_cast<int>(std::lround(6.0 * severity));
  for (int b = 0; b < n_blobs; ++b) {
    const int cd = rng.uniform_int(e.D), ch = rng.uniform_int(e.H), cw = rng.uniform_int(e.W);
    const double radius = rng.uniform(1.5, 2.0 + 2.0 * severity);
    const int cls = rng.uniform_int(num_classes);
    const int ir = static_cast<int>(radius) + 1;
    for (int d = std::max(0, cd - ir); d < std::min(e.D, cd + ir + 1); ++d)
      for (int h = std::max(0, ch - ir); h < std::min(e.H, ch + ir + 1); ++h)
        for (int w = std::max(0, cw - ir); w < std::min(e.W, cw + ir + 1); ++w) {
          const double dd = d - cd, dh = h - ch, dw = w - cw;
          if (dd * dd + dh * dh + dw * dw <= radius * radius) lab[e.at(d, h, w)] = cls;
        }
  }

  return from_labels(lab, gt.shape);
}

Tensor make_error_map(const Tensor& mask, const Tensor& gt) {
  if (!same_shape(mask.shape, gt.shape))
    throw std::invalid_argument("make_error_map: shape mismatch " + shape_str(mask.shape) +
                                " vs " + shape_str(gt.shape));
  Tensor out = Tensor::zeros(mask.shape);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = mask[i] == gt[i] ? 1.0 : 0.0;
  return out;
}

Tensor one_hot(const Tensor& labels, int num_classes) {
  if (labels.shape.size() != 3)
    throw std::invalid_argument("one_hot: expected [D x H x W], got " + shape_str(labels.shape));
  require_labels("one_hot", labels, num_classes);
  Shape s = labels.shape;
  s.insert(s.begin(), num_classes);
  Tensor out = Tensor::zeros(s);
  const std::size_t vol = labels.numel();
  for (std::size_t i = 0; i < vol; ++i)
    out[static_cast<std::size_t>(labels[i]) * vol + i] = 1.0;
  return out;
}

Tensor preprocess(const Tensor& image) {
  const std::size_t n = image.numel();
  if (n == 0) throw std::invalid_argument("preprocess: empty volume");
  double mn = image[0], mx = image[0], sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mn = std::min(mn, image[i]);
    mx = std::max(mx, image[i]);
    sum += image[i];
  }
  if (mn == mx) return Tensor::full(image.shape, 0.5);

  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) ss += (image[i] - mean) * (image[i] - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n));

  Tensor z = Tensor::zeros(image.shape);
  double zmn = (mn - mean) / sd, zmx = (mx - mean) / sd;
  for (std::size_t i = 0; i < n; ++i) z[i] = (image[i] - mean) / sd;
  for (std::size_t i = 0; i < n; ++i) z[i] = (z[i] - zmn) / (zmx - zmn);
  return z;
}

namespace {

Tensor crop_one(const Tensor& t, const Shape& crop, int od, int oh, int ow, double pad) {
  const int D = t.shape[0], H = t.shape[1], W = t.shape[2];
  Tensor out = Tensor::zeros(crop);
  std::size_t i = 0;
  for (int d = 0; d < crop[0]; ++d)
    for (int h = 0; h < crop[1]; ++h)
      for (int w = 0; w < crop[2]; ++w, ++i) {
        const int sd = od + d, sh = oh + h, sw = ow + w;
        out[i] = (sd < D && sh < H && sw < W)
                     ? t[(static_cast<std::size_t>(sd) * H + sh) * W + sw]
                     : pad;
      }
  return out;
}

Tensor flip_one(const Tensor& t, bool fd, bool fh, bool fw) {
  const int D = t.shape[0], H = t.shape[1], W = t.shape[2];
  Tensor out = Tensor::zeros(t.shape);
  std::size_t i = 0;
  for (int d = 0; d < D; ++d)
    for (int h = 0; h < H; ++h)
      for (int w = 0; w < W; ++w, ++i) {
        const int sd = fd ? D - 1 - d : d;
        const int sh = fh ? H - 1 - h : h;
        const int sw = fw ? W - 1 - w : w;
        out[i] = t[(static_cast<std::size_t>(sd) * H + sh) * W + sw];
      }
  return out;
}

void require_aligned(const CaseSample& s) {
  if (s.image.shape.size() != 3 || !same_shape(s.image.shape, s.gt.shape) ||
      !same_shape(s.image.shape, s.mask.shape) || !same_shape(s.image.shape, s.error_map.shape) ||
      !same_shape(s.image.shape, s.boundary.shape))
    throw std::invalid_argument("sample volumes must share one [D x H x W] shape");
}

}  // namespace

CaseSample random_crop(const CaseSample& s, const Shape& crop, Rng& rng) {
  require_aligned(s);
  if (crop.size() != 3 || crop[0] < 1 || crop[1] < 1 || crop[2] < 1)
    throw std::invalid_argument("random_crop: bad crop extents " + shape_str(crop));
  const int od = rng.uniform_int(std::max(s.image.shape[0], crop[0]) - crop[0] + 1);
  const int oh = rng.uniform_int(std::max(s.image.shape[1], crop[1]) - crop[1] + 1);
  const int ow = rng.uniform_int(std::max(s.image.shape[2], crop[2]) - crop[2] + 1);
  CaseSample out;
  out.image = crop_one(s.image, crop, od, oh, ow, 0.0);
  out.gt = crop_one(s.gt, crop, od, oh, ow, 0.0);
  out.mask = crop_one(s.mask, crop, od, oh, ow, 0.0);
  out.error_map = crop_one(s.error_map, crop, od, oh, ow, 1.0);
  out.boundary = crop_one(s.boundary, crop, od, oh, ow, 0.0);
  return out;
}

CaseSample mirror_flip(const CaseSample& s, bool x_axis, bool y_axis, bool z_axis, Rng& rng) {
  require_aligned(s);
  const bool fw = x_axis && rng.bernoulli(0.5);
  const bool fh = y_axis && rng.bernoulli(0.5);
  const bool fd = z_axis && rng.bernoulli(0.5);
  CaseSample out;
  out.image = flip_one(s.image, fd, fh, fw);
  out.gt = flip_one(s.gt, fd, fh, fw);
  out.mask = flip_one(s.mask, fd, fh, fw);
  out.error_map = flip_one(s.error_map, fd, fh, fw);
  out.boundary = flip_one(s.boundary, fd, fh, fw);
  return out;
}

}  // namespace aepnet
