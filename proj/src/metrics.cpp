#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace aepnet {

namespace {

void require_binary(const char* op, const Tensor& t) {
  for (std::size_t i = 0; i < t.numel(); ++i)
    if (t[i] != 0.0 && t[i] != 1.0)
      throw std::invalid_argument(std::string(op) + ": map must be binary, found " +
                                  std::to_string(t[i]));
}

void require_labels(const char* op, const Tensor& t, int num_classes) {
  for (std::size_t i = 0; i < t.numel(); ++i) {
    double v = t[i];
    if (v != std::floor(v) || v < 0.0 || v >= static_cast<double>(num_classes))
      throw std::invalid_argument(std::string(op) + ": label out of range 0.." +
                                  std::to_string(num_classes - 1) + ", found " +
                                  std::to_string(v));
  }
}

}  // namespace

Tensor binarize_error_prob(const Tensor& pred_prob) {
  if (pred_prob.shape.size() != 4 || pred_prob.shape[0] != 2)
    throw std::invalid_argument("binarize_error_prob: expected [2 x D x H x W], got " +
                                shape_str(pred_prob.shape));
  const std::size_t vol = pred_prob.numel() / 2;
  Tensor out = Tensor::zeros(Shape(pred_prob.shape.begin() + 1, pred_prob.shape.end()));
  for (std::size_t i = 0; i < vol; ++i)
    out[i] = pred_prob[i] >= pred_prob[vol + i] ? 0.0 : 1.0;
  return out;
}

ErrorMapMetrics error_map_metrics(const Tensor& pred_prob, const Tensor& real_map) {
  Tensor pred = binarize_error_prob(pred_prob);
  if (!same_shape(pred.shape, real_map.shape))
    throw std::invalid_argument("error_map_metrics: prediction " + shape_str(pred_prob.shape) +
                                " does not cover map " + shape_str(real_map.shape));
  require_binary("error_map_metrics", real_map);

  long tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const bool pe = pred[i] == 0.0, re = real_map[i] == 0.0;
    if (pe && re)
      ++tp;
    else if (pe)
      ++fp;
    else if (re)
      ++fn;
    else
      ++tn;
  }

  ErrorMapMetrics m;
  const long denom = 2 * tp + fp + fn;
  m.dsc = denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  m.acc = static_cast<double>(tp + tn) / static_cast<double>(pred.numel());
  if (tp + fp > 0) m.prec = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) m.recl = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return m;
}

double predicted_accuracy(const Tensor& pred_map) {
  if (pred_map.numel() == 0) throw std::invalid_argument("predicted_accuracy: empty map");
  require_binary("predicted_accuracy", pred_map);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred_map.numel(); ++i)
    if (pred_map[i] == 1.0) ++correct;
  return static_cast<double>(correct) / static_cast<double>(pred_map.numel());
}

SegQuality seg_quality(const Tensor& mask, const Tensor& gt, int num_classes) {
  if (!same_shape(mask.shape, gt.shape))
    throw std::invalid_argument("seg_quality: shape mismatch " + shape_str(mask.shape) + " vs " +
                                shape_str(gt.shape));
  if (num_classes < 2) throw std::invalid_argument("seg_quality: need at least 2 classes");
  require_labels("seg_quality", mask, num_classes);
  require_labels("seg_quality", gt, num_classes);

  SegQuality q;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < mask.numel(); ++i)
    if (mask[i] == gt[i]) ++agree;
  q.acc = static_cast<double>(agree) / static_cast<double>(mask.numel());

  double sum = 0.0;
  int counted = 0;
  for (int c = 1; c < num_classes; ++c) {
    long a = 0, b = 0, inter = 0;
    const double cv = static_cast<double>(c);
    for (std::size_t i = 0; i < mask.numel(); ++i) {
      const bool in_m = mask[i] == cv, in_g = gt[i] == cv;
      a += in_m;
      b += in_g;
      inter += in_m && in_g;
    }
    if (a + b == 0) continue;
    sum += 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
    ++counted;
  }
  q.dsc = counted == 0 ? 1.0 : sum / counted;
  return q;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size())
    throw std::invalid_argument("pearson: length mismatch " + std::to_string(xs.size()) + " vs " +
                                std::to_string(ys.size()));
  if (xs.size() < 2) throw std::invalid_argument("pearson: need at least 2 points");
  const std::size_t n = xs.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson: zero-variance input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double mae(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size())
    throw std::invalid_argument("mae: length mismatch " + std::to_string(xs.size()) + " vs " +
                                std::to_string(ys.size()));
  if (xs.empty()) throw std::invalid_argument("mae: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) s += std::abs(xs[i] - ys[i]);
  return s / static_cast<double>(xs.size());
}

}  // namespace aepnet
