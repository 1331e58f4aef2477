#include "boundary.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "core/op_support.hpp"

namespace aepnet {

Tensor sobel3d(const Tensor& mask_onehot) {
  opdetail::require_rank("sobel3d", mask_onehot, 4);
  const int C = mask_onehot.shape[0];
  const int D = mask_onehot.shape[1], H = mask_onehot.shape[2], W = mask_onehot.shape[3];
  const std::size_t vol = static_cast<std::size_t>(D) * H * W;

  for (std::size_t v = 0; v < vol; ++v) {
    double sum = 0.0;
    for (int c = 0; c < C; ++c) {
      double x = mask_onehot[c * vol + v];
      if (x != 0.0 && x != 1.0)
        throw std::invalid_argument("sobel3d: input is not one-hot (value " + std::to_string(x) +
                                    ")");
      sum += x;
    }
    if (sum != 1.0)
      throw std::invalid_argument("sobel3d: input is not one-hot (channel sum " +
                                  std::to_string(sum) + ")");
  }

  static const double DK[3] = {-1.0, 0.0, 1.0};  // derivative taps
  static const double SK[3] = {1.0, 2.0, 1.0};   // smoothing taps

  Tensor S = Tensor::zeros({D, H, W});
  for (int c = 0; c < C; ++c) {
    const double* ch = mask_onehot.data.data() + c * vol;
    std::size_t o = 0;
    for (int d = 0; d < D; ++d) {
      const int nd[3] = {std::max(d - 1, 0), d, std::min(d + 1, D - 1)};
      for (int h = 0; h < H; ++h) {
        const int nh[3] = {std::max(h - 1, 0), h, std::min(h + 1, H - 1)};
        for (int w = 0; w < W; ++w, ++o) {
          const int nw[3] = {std::max(w - 1, 0), w, std::min(w + 1, W - 1)};
          double gd = 0.0, gh = 0.0, gw = 0.0;
          for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
              for (int k = 0; k < 3; ++k) {
                const double v = ch[(static_cast<std::size_t>(nd[a]) * H + nh[b]) * W + nw[k]];
                gd += DK[a] * SK[b] * SK[k] * v;
                gh += SK[a] * DK[b] * SK[k] * v;
                gw += SK[a] * SK[b] * DK[k] * v;
              }
          const double mag = std::sqrt(gd * gd + gh * gh + gw * gw);
          if (mag > S[o]) S[o] = mag;
        }
      }
    }
  }
  return S;
}

BoundaryTarget enhance_boundary(const Tensor& S, std::string source_mask_id) {
  double mx = 0.0;
  for (std::size_t i = 0; i < S.numel(); ++i) {
    if (S[i] < 0.0)
      throw std::invalid_argument("enhance_boundary: negative gradient magnitude " +
                                  std::to_string(S[i]));
    mx = std::max(mx, S[i]);
  }
  BoundaryTarget out{Tensor::zeros(S.shape), std::move(source_mask_id)};
  if (mx == 0.0) return out;
  // direct division so the max voxel lands on exactly (m+m)/(2m) == 1
  const double denom = 2.0 * mx;
  for (std::size_t i = 0; i < S.numel(); ++i)
    out.values[i] = S[i] > 0.0 ? (S[i] + mx) / denom : 0.0;
  return out;
}

}  // namespace aepnet
