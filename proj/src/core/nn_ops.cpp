#include "core/nn_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "core/op_support.hpp"
#include "core/tape.hpp"

namespace aepnet::nn {

using opdetail::as_node;
using opdetail::require_rank;
using opdetail::tape_of;

namespace {

// Geometry captured by value into backward closures.
struct ConvDims {
  int ci, co;
  int kd, kh, kw;
  int s, p;
  int D, H, W;
  int OD, OH, OW;
};

// Valid output range [lo,hi) on one axis for kernel offset t0 = k - padding:
// index o contributes iff 0 <= o*s + t0 < n.
inline void axis_bounds(int extent_out, int extent_in, int s, int t0, int& lo, int& hi) {
  lo = t0 < 0 ? (-t0 + s - 1) / s : 0;
  hi = extent_in - 1 - t0 >= 0 ? std::min(extent_out, (extent_in - 1 - t0) / s + 1) : 0;
  if (hi < lo) hi = lo;
}

// The three conv passes share one skeleton: for each (co, ci, kernel offset)
// the work is a weighted row operation between an output row and a shifted
// input row, which keeps the inner loop contiguous and vectorizable.

void conv_forward(double* out, const double* x, const double* w, const double* b,
                  const ConvDims& d) {
  const std::size_t ovol = static_cast<std::size_t>(d.OD) * d.OH * d.OW;
  for (int co = 0; co < d.co; ++co) std::fill(out + co * ovol, out + (co + 1) * ovol, b[co]);
  for (int co = 0; co < d.co; ++co)
    for (int ci = 0; ci < d.ci; ++ci)
      for (int a = 0; a < d.kd; ++a) {
        int od_lo, od_hi;
        axis_bounds(d.OD, d.D, d.s, a - d.p, od_lo, od_hi);
        for (int i = 0; i < d.kh; ++i) {
          int oh_lo, oh_hi;
          axis_bounds(d.OH, d.H, d.s, i - d.p, oh_lo, oh_hi);
          for (int j = 0; j < d.kw; ++j) {
            int ow_lo, ow_hi;
            axis_bounds(d.OW, d.W, d.s, j - d.p, ow_lo, ow_hi);
            const double wv =
                w[(((static_cast<std::size_t>(co) * d.ci + ci) * d.kd + a) * d.kh + i) * d.kw + j];
            if (wv == 0.0) continue;
            for (int od = od_lo; od < od_hi; ++od) {
              const int id = od * d.s + a - d.p;
              for (int oh = oh_lo; oh < oh_hi; ++oh) {
                const int ih = oh * d.s + i - d.p;
                const double* xr =
                    x + ((static_cast<std::size_t>(ci) * d.D + id) * d.H + ih) * d.W + (j - d.p);
                double* orow =
                    out + ((static_cast<std::size_t>(co) * d.OD + od) * d.OH + oh) * d.OW;
                if (d.s == 1)
                  for (int ow = ow_lo; ow < ow_hi; ++ow) orow[ow] += wv * xr[ow];
                else
                  for (int ow = ow_lo; ow < ow_hi; ++ow) orow[ow] += wv * xr[ow * d.s];
              }
            }
          }
        }
      }
}

void conv_backward_input(double* gx, const double* g, const double* w, const ConvDims& d) {
  for (int co = 0; co < d.co; ++co)
    for (int ci = 0; ci < d.ci; ++ci)
      for (int a = 0; a < d.kd; ++a) {
        int od_lo, od_hi;
        axis_bounds(d.OD, d.D, d.s, a - d.p, od_lo, od_hi);
        for (int i = 0; i < d.kh; ++i) {
          int oh_lo, oh_hi;
          axis_bounds(d.OH, d.H, d.s, i - d.p, oh_lo, oh_hi);
          for (int j = 0; j < d.kw; ++j) {
            int ow_lo, ow_hi;
            axis_bounds(d.OW, d.W, d.s, j - d.p, ow_lo, ow_hi);
            const double wv =
                w[(((static_cast<std::size_t>(co) * d.ci + ci) * d.kd + a) * d.kh + i) * d.kw + j];
            if (wv == 0.0) continue;
            for (int od = od_lo; od < od_hi; ++od) {
              const int id = od * d.s + a - d.p;
              for (int oh = oh_lo; oh < oh_hi; ++oh) {
                const int ih = oh * d.s + i - d.p;
                double* gxr =
                    gx + ((static_cast<std::size_t>(ci) * d.D + id) * d.H + ih) * d.W + (j - d.p);
                const double* grow =
                    g + ((static_cast<std::size_t>(co) * d.OD + od) * d.OH + oh) * d.OW;
                if (d.s == 1)
                  for (int ow = ow_lo; ow < ow_hi; ++ow) gxr[ow] += wv * grow[ow];
                else
                  for (int ow = ow_lo; ow < ow_hi; ++ow) gxr[ow * d.s] += wv * grow[ow];
              }
            }
          }
        }
      }
}

void conv_backward_weights(double* gw, const double* g, const double* x, const ConvDims& d) {
  for (int co = 0; co < d.co; ++co)
    for (int ci = 0; ci < d.ci; ++ci)
      for (int a = 0; a < d.kd; ++a) {
        int od_lo, od_hi;
        axis_bounds(d.OD, d.D, d.s, a - d.p, od_lo, od_hi);
        for (int i = 0; i < d.kh; ++i) {
          int oh_lo, oh_hi;
          axis_bounds(d.OH, d.H, d.s, i - d.p, oh_lo, oh_hi);
          for (int j = 0; j < d.kw; ++j) {
            int ow_lo, ow_hi;
            axis_bounds(d.OW, d.W, d.s, j - d.p, ow_lo, ow_hi);
            double acc = 0.0;
            for (int od = od_lo; od < od_hi; ++od) {
              const int id = od * d.s + a - d.p;
              for (int oh = oh_lo; oh < oh_hi; ++oh) {
                const int ih = oh * d.s + i - d.p;
                const double* xr =
                    x + ((static_cast<std::size_t>(ci) * d.D + id) * d.H + ih) * d.W + (j - d.p);
                const double* grow =
                    g + ((static_cast<std::size_t>(co) * d.OD + od) * d.OH + oh) * d.OW;
                if (d.s == 1)
                  for (int ow = ow_lo; ow < ow_hi; ++ow) acc += grow[ow] * xr[ow];
                else
                  for (int ow = ow_lo; ow < ow_hi; ++ow) acc += grow[ow] * xr[ow * d.s];
              }
            }
            gw[(((static_cast<std::size_t>(co) * d.ci + ci) * d.kd + a) * d.kh + i) * d.kw + j] +=
                acc;
          }
        }
      }
}

void check_conv_args(const char* op, const Tensor& x, const ConvSpec& s, const Tensor& w,
                     const Tensor& b, const Shape& expected_w) {
  require_rank(op, x, 4);
  if (s.in_channels < 1 || s.out_channels < 1 || s.kd < 1 || s.kh < 1 || s.kw < 1 ||
      s.stride < 1 || s.padding < 0)
    throw std::invalid_argument(std::string(op) + ": invalid spec");
  if (x.shape[0] != s.in_channels)
    throw std::invalid_argument(std::string(op) + ": input has " + std::to_string(x.shape[0]) +
                                " channels, spec expects " + std::to_string(s.in_channels));
  if (!same_shape(w.shape, expected_w))
    throw std::invalid_argument(std::string(op) + ": weight shape " + shape_str(w.shape) +
                                ", expected " + shape_str(expected_w));
  if (!same_shape(b.shape, {s.out_channels}))
    throw std::invalid_argument(std::string(op) + ": bias shape " + shape_str(b.shape) +
                                ", expected [" + std::to_string(s.out_channels) + "]");
}

}  // namespace

Tensor conv3d(const Tensor& x, const ConvSpec& spec, const Tensor& weight, const Tensor& bias) {
  check_conv_args("conv3d", x, spec, weight, bias,
                  {spec.out_channels, spec.in_channels, spec.kd, spec.kh, spec.kw});
  ConvDims d;
  d.ci = spec.in_channels;
  d.co = spec.out_channels;
  d.kd = spec.kd, d.kh = spec.kh, d.kw = spec.kw;
  d.s = spec.stride, d.p = spec.padding;
  d.D = x.shape[1], d.H = x.shape[2], d.W = x.shape[3];
  d.OD = (d.D + 2 * d.p - d.kd) / d.s + 1;
  d.OH = (d.H + 2 * d.p - d.kh) / d.s + 1;
  d.OW = (d.W + 2 * d.p - d.kw) / d.s + 1;
  if (d.D + 2 * d.p < d.kd || d.H + 2 * d.p < d.kh || d.W + 2 * d.p < d.kw)
    throw std::invalid_argument("conv3d: kernel exceeds padded input " + shape_str(x.shape));

  Tensor out = Tensor::zeros({d.co, d.OD, d.OH, d.OW});
  conv_forward(out.data.data(), x.data.data(), weight.data.data(), bias.data.data(), d);

  Tape* tape = tape_of({&x, &weight, &bias});
  if (!tape) return out;
  int px = as_node(*tape, x);
  int pw = as_node(*tape, weight);
  int pb = as_node(*tape, bias);
  return tape->record(
      std::move(out), {px, pw, pb}, [d, px, pw, pb](Tape& t, int, const std::vector<double>& g) {
        if (t.needs_grad(px))
          conv_backward_input(t.grad_buffer(px).data(), g.data(), t.value(pw).data.data(), d);
        if (t.needs_grad(pw))
          conv_backward_weights(t.grad_buffer(pw).data(), g.data(), t.value(px).data.data(), d);
        if (t.needs_grad(pb)) {
          auto& gb = t.grad_buffer(pb);
          const std::size_t ovol = static_cast<std::size_t>(d.OD) * d.OH * d.OW;
          for (int co = 0; co < d.co; ++co) {
            double acc = 0.0;
            for (std::size_t v = 0; v < ovol; ++v) acc += g[co * ovol + v];
            gb[co] += acc;
          }
        }
      });
}

namespace {

void tconv_forward(double* out, const double* x, const double* w, const double* b,
                   const ConvDims& d) {
  const std::size_t ovol = static_cast<std::size_t>(d.OD) * d.OH * d.OW;
  for (int co = 0; co < d.co; ++co) std::fill(out + co * ovol, out + (co + 1) * ovol, b[co]);
  for (int ci = 0; ci < d.ci; ++ci)
    for (int co = 0; co < d.co; ++co)
      for (int a = 0; a < d.kd; ++a)
        for (int i = 0; i < d.kh; ++i)
          for (int j = 0; j < d.kw; ++j) {
            const double wv =
                w[(((static_cast<std::size_t>(ci) * d.co + co) * d.kd + a) * d.kh + i) * d.kw + j];
            if (wv == 0.0) continue;
            for (int id = 0; id < d.D; ++id)
              for (int ih = 0; ih < d.H; ++ih) {
                const double* xr =
                    x + ((static_cast<std::size_t>(ci) * d.D + id) * d.H + ih) * d.W;
                double* orow = out + ((static_cast<std::size_t>(co) * d.OD + (id * d.s + a)) * d.OH +
                                      (ih * d.s + i)) * d.OW + j;
                for (int iw = 0; iw < d.W; ++iw) orow[iw * d.s] += wv * xr[iw];
              }
          }
}

void tconv_backward_input(double* gx, const double* g, const double* w, const ConvDims& d) {
  // The adjoint: gradient wrt x is a plain convolution of g with the weights.
  for (int ci = 0; ci < d.ci; ++ci)
    for (int co = 0; co < d.co; ++co)
      for (int a = 0; a < d.kd; ++a)
        for (int i = 0; i < d.kh; ++i)
          for (int j = 0; j < d.kw; ++j) {
            const double wv =
                w[(((static_cast<std::size_t>(ci) * d.co + co) * d.kd + a) * d.kh + i) * d.kw + j];
            if (wv == 0.0) continue;
            for (int id = 0; id < d.D; ++id)
              for (int ih = 0; ih < d.H; ++ih) {
                double* gxr = gx + ((static_cast<std::size_t>(ci) * d.D + id) * d.H + ih) * d.W;
                const double* grow =
                    g + ((static_cast<std::size_t>(co) * d.OD + (id * d.s + a)) * d.OH +
                         (ih * d.s + i)) * d.OW + j;
                for (int iw = 0; iw < d.W; ++iw) gxr[iw] += wv * grow[iw * d.s];
              }
          }
}

void tconv_backward_weights(double* gw, const double* g, const double* x, const ConvDims& d) {
  for (int ci = 0; ci < d.ci; ++ci)
    for (int co = 0; co < d.co; ++co)
      for (int a = 0; a < d.kd; ++a)
        for (int i = 0; i < d.kh; ++i)
          for (int j = 0; j < d.kw; ++j) {
            double acc = 0.0;
            for (int id = 0; id < d.D; ++id)
              for (int ih = 0; ih < d.H; ++ih) {
                const double* xr =
                    x + ((static_cast<std::size_t>(ci) * d.D + id) * d.H + ih) * d.W;
                const double* grow =
                    g + ((static_cast<std::size_t>(co) * d.OD + (id * d.s + a)) * d.OH +
                         (ih * d.s + i)) * d.OW + j;
                for (int iw = 0; iw < d.W; ++iw) acc += xr[iw] * grow[iw * d.s];
              }
            gw[(((static_cast<std::size_t>(ci) * d.co + co) * d.kd + a) * d.kh + i) * d.kw + j] +=
                acc;
          }
}

}  // namespace

Tensor transposed_conv3d(const Tensor& x, const ConvSpec& spec, const Tensor& weight,
                         const Tensor& bias) {
  check_conv_args("transposed_conv3d", x, spec, weight, bias,
                  {spec.in_channels, spec.out_channels, spec.kd, spec.kh, spec.kw});
  ConvDims d;
  d.ci = spec.in_channels;
  d.co = spec.out_channels;
  d.kd = spec.kd, d.kh = spec.kh, d.kw = spec.kw;
  d.s = spec.stride, d.p = 0;
  d.D = x.shape[1], d.H = x.shape[2], d.W = x.shape[3];
  d.OD = d.s * (d.D - 1) + d.kd;
  d.OH = d.s * (d.H - 1) + d.kh;
  d.OW = d.s * (d.W - 1) + d.kw;

  Tensor out = Tensor::zeros({d.co, d.OD, d.OH, d.OW});
  tconv_forward(out.data.data(), x.data.data(), weight.data.data(), bias.data.data(), d);

  Tape* tape = tape_of({&x, &weight, &bias});
  if (!tape) return out;
  int px = as_node(*tape, x);
  int pw = as_node(*tape, weight);
  int pb = as_node(*tape, bias);
  return tape->record(
      std::move(out), {px, pw, pb}, [d, px, pw, pb](Tape& t, int, const std::vector<double>& g) {
        if (t.needs_grad(px))
          tconv_backward_input(t.grad_buffer(px).data(), g.data(), t.value(pw).data.data(), d);
        if (t.needs_grad(pw))
          tconv_backward_weights(t.grad_buffer(pw).data(), g.data(), t.value(px).data.data(), d);
        if (t.needs_grad(pb)) {
          auto& gb = t.grad_buffer(pb);
          const std::size_t ovol = static_cast<std::size_t>(d.OD) * d.OH * d.OW;
          for (int co = 0; co < d.co; ++co) {
            double acc = 0.0;
            for (std::size_t v = 0; v < ovol; ++v) acc += g[co * ovol + v];
            gb[co] += acc;
          }
        }
      });
}

Tensor max_pool3d(const Tensor& x) {
  require_rank("max_pool3d", x, 4);
  const int C = x.shape[0], D = x.shape[1], H = x.shape[2], W = x.shape[3];
  if (D % 2 || H % 2 || W % 2 || D == 0 || H == 0 || W == 0)
    throw std::invalid_argument("max_pool3d: spatial extents must be even, got " +
                                shape_str(x.shape));
  const int OD = D / 2, OH = H / 2, OW = W / 2;

  Tensor out = Tensor::zeros({C, OD, OH, OW});
  std::vector<std::size_t> argmax(out.numel());
  std::size_t o = 0;
  for (int c = 0; c < C; ++c)
    for (int od = 0; od < OD; ++od)
      for (int oh = 0; oh < OH; ++oh)
        for (int ow = 0; ow < OW; ++ow, ++o) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_i = 0;
          // scan the 2x2x2 block in input row-major order; strict > keeps
          // the first maximum on ties
          for (int dd = 0; dd < 2; ++dd)
            for (int hh = 0; hh < 2; ++hh)
              for (int ww = 0; ww < 2; ++ww) {
                std::size_t idx = ((static_cast<std::size_t>(c) * D + (2 * od + dd)) * H +
                                   (2 * oh + hh)) * W + (2 * ow + ww);
                if (x[idx] > best) {
                  best = x[idx];
                  best_i = idx;
                }
              }
          out[o] = best;
          argmax[o] = best_i;
        }

  Tape* tape = tape_of({&x});
  if (!tape) return out;
  int px = x.node;
  return tape->record(std::move(out), {px},
                      [px, argmax = std::move(argmax)](Tape& t, int,
                                                       const std::vector<double>& g) {
                        auto& gx = t.grad_buffer(px);
                        for (std::size_t k = 0; k < g.size(); ++k) gx[argmax[k]] += g[k];
                      });
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank("global_avg_pool", x, 4);
  const int C = x.shape[0];
  const std::size_t vol = x.numel() / static_cast<std::size_t>(C);
  Tensor out = Tensor::zeros({C});
  for (int c = 0; c < C; ++c) {
    double acc = 0.0;
    for (std::size_t v = 0; v < vol; ++v) acc += x[c * vol + v];
    out[c] = acc / static_cast<double>(vol);
  }

  Tape* tape = tape_of({&x});
  if (!tape) return out;
  int px = x.node;
  return tape->record(std::move(out), {px},
                      [px, C, vol](Tape& t, int, const std::vector<double>& g) {
                        auto& gx = t.grad_buffer(px);
                        const double inv = 1.0 / static_cast<double>(vol);
                        for (int c = 0; c < C; ++c)
                          for (std::size_t v = 0; v < vol; ++v) gx[c * vol + v] += g[c] * inv;
                      });
}

Tensor group_norm(const Tensor& x, int groups, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  require_rank("group_norm", x, 4);
  const int C = x.shape[0];
  if (groups < 1 || C % groups != 0)
    throw std::invalid_argument("group_norm: " + std::to_string(C) +
                                " channels not divisible by " + std::to_string(groups) +
                                " groups");
  if (!same_shape(gamma.shape, {C}) || !same_shape(beta.shape, {C}))
    throw std::invalid_argument("group_norm: gamma/beta must be [" + std::to_string(C) +
                                "], got " + shape_str(gamma.shape) + ", " +
                                shape_str(beta.shape));
  const std::size_t spatial = x.numel() / static_cast<std::size_t>(C);
  const int cpg = C / groups;
  const std::size_t m = static_cast<std::size_t>(cpg) * spatial;

  std::vector<double> mu(groups), istd(groups);
  for (int g = 0; g < groups; ++g) {
    const std::size_t base = static_cast<std::size_t>(g) * m;
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double v = x[base + i];
      s1 += v;
      s2 += v * v;
    }
    double mean = s1 / static_cast<double>(m);
    double var = s2 / static_cast<double>(m) - mean * mean;
    if (var < 0.0) var = 0.0;  // guard rounding on near-constant groups
    mu[g] = mean;
    istd[g] = 1.0 / std::sqrt(var + eps);
  }

  Tensor out = Tensor::zeros(x.shape);
  for (int c = 0; c < C; ++c) {
    const int g = c / cpg;
    const double k = gamma[c] * istd[g];
    const double off = beta[c] - k * mu[g];
    for (std::size_t v = 0; v < spatial; ++v) out[c * spatial + v] = k * x[c * spatial + v] + off;
  }

  Tape* tape = tape_of({&x, &gamma, &beta});
  if (!tape) return out;
  int px = as_node(*tape, x);
  int pg = as_node(*tape, gamma);
  int pb = as_node(*tape, beta);
  return tape->record(
      std::move(out), {px, pg, pb},
      [px, pg, pb, C, cpg, spatial, m, mu = std::move(mu), istd = std::move(istd)](
          Tape& t, int, const std::vector<double>& g) {
        const Tensor& xv = t.value(px);
        const Tensor& gam = t.value(pg);
        auto& gx = t.grad_buffer(px);
        auto& ggam = t.grad_buffer(pg);
        auto& gbet = t.grad_buffer(pb);
        const int groups = C / cpg;
        for (int grp = 0; grp < groups; ++grp) {
          const double is = istd[grp], mean = mu[grp];
          // ghat = upstream * gamma (grad wrt normalized x); two reductions
          // give the mean-shift terms of the normalization Jacobian
          double s1 = 0.0, s2 = 0.0;
          for (int cc = 0; cc < cpg; ++cc) {
            const int c = grp * cpg + cc;
            const double gc = gam[c];
            double dgamma = 0.0, dbeta = 0.0;
            const std::size_t cb = static_cast<std::size_t>(c) * spatial;
            for (std::size_t v = 0; v < spatial; ++v) {
              const double up = g[cb + v];
              const double xh = (xv[cb + v] - mean) * is;
              dgamma += up * xh;
              dbeta += up;
              const double gh = up * gc;
              s1 += gh;
              s2 += gh * xh;
            }
            ggam[c] += dgamma;
            gbet[c] += dbeta;
          }
          const double m1 = s1 / static_cast<double>(m);
          const double m2 = s2 / static_cast<double>(m);
          for (int cc = 0; cc < cpg; ++cc) {
            const int c = grp * cpg + cc;
            const double gc = gam[c];
            const std::size_t cb = static_cast<std::size_t>(c) * spatial;
            for (std::size_t v = 0; v < spatial; ++v) {
              const double xh = (xv[cb + v] - mean) * is;
              gx[cb + v] += is * (g[cb + v] * gc - m1 - xh * m2);
            }
          }
        }
      });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_rank("concat_channels", a, 4);
  require_rank("concat_channels", b, 4);
  if (a.shape[1] != b.shape[1] || a.shape[2] != b.shape[2] || a.shape[3] != b.shape[3])
    throw std::invalid_argument("concat_channels: spatial mismatch " + shape_str(a.shape) +
                                " vs " + shape_str(b.shape));
  Tensor out = Tensor::zeros({a.shape[0] + b.shape[0], a.shape[1], a.shape[2], a.shape[3]});
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.numel());

  Tape* tape = tape_of({&a, &b});
  if (!tape) return out;
  int pa = as_node(*tape, a);
  int pb = as_node(*tape, b);
  const std::size_t na = a.numel();
  return tape->record(std::move(out), {pa, pb},
                      [pa, pb, na](Tape& t, int, const std::vector<double>& g) {
                        auto& ga = t.grad_buffer(pa);
                        auto& gb = t.grad_buffer(pb);
                        for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
                        for (std::size_t i = na; i < g.size(); ++i) gb[i - na] += g[i];
                      });
}

}  // namespace aepnet::nn
