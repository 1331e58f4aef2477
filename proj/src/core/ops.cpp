#include "core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "core/op_support.hpp"

namespace aepnet::ops {

using opdetail::as_node;
using opdetail::require_same_shape;
using opdetail::tape_of;

namespace {

using Fn2 = double (*)(double, double);

Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, Fn2 fwd,
                 Fn2 dda, Fn2 ddb) {
  require_same_shape(name, a, b);
  Tensor out = Tensor::zeros(a.shape);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = fwd(a[i], b[i]);

  Tape* tape = tape_of({&a, &b});
  if (!tape) return out;
  int pa = as_node(*tape, a);
  int pb = as_node(*tape, b);
  return tape->record(std::move(out), {pa, pb},
                      [pa, pb, dda, ddb](Tape& t, int, const std::vector<double>& g) {
                        const Tensor& av = t.value(pa);
                        const Tensor& bv = t.value(pb);
                        auto& ga = t.grad_buffer(pa);
                        auto& gb = t.grad_buffer(pb);
                        for (std::size_t i = 0; i < g.size(); ++i) {
                          ga[i] += g[i] * dda(av[i], bv[i]);
                          gb[i] += g[i] * ddb(av[i], bv[i]);
                        }
                      });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor scale(const Tensor& x, double k) {
  Tensor out = Tensor::zeros(x.shape);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = x[i] * k;
  Tape* tape = tape_of({&x});
  if (!tape) return out;
  int px = x.node;
  return tape->record(std::move(out), {px},
                      [px, k](Tape& t, int, const std::vector<double>& g) {
                        auto& gx = t.grad_buffer(px);
                        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * k;
                      });
}

Tensor relu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  Tape* tape = tape_of({&x});
  if (!tape) return out;
  int px = x.node;
  return tape->record(std::move(out), {px},
                      [px](Tape& t, int, const std::vector<double>& g) {
                        const Tensor& xv = t.value(px);
                        auto& gx = t.grad_buffer(px);
                        for (std::size_t i = 0; i < g.size(); ++i)
                          if (xv[i] > 0.0) gx[i] += g[i];
                      });
}

Tensor sigmoid(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape);
  for (std::size_t i = 0; i < out.numel(); ++i) {
    double v = x[i];
    if (v >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      double e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
  Tape* tape = tape_of({&x});
  if (!tape) return out;
  int px = x.node;
  return tape->record(std::move(out), {px},
                      [px](Tape& t, int self, const std::vector<double>& g) {
                        const Tensor& s = t.value(self);
                        auto& gx = t.grad_buffer(px);
                        for (std::size_t i = 0; i < g.size(); ++i)
                          gx[i] += g[i] * s[i] * (1.0 - s[i]);
                      });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.shape.size() != 1 || weight.shape.size() != 2 || bias.shape.size() != 1)
    throw std::invalid_argument("linear: expected x[n_in], W[n_out x n_in], b[n_out], got " +
                                shape_str(x.shape) + ", " + shape_str(weight.shape) + ", " +
                                shape_str(bias.shape));
  int n_in = x.shape[0];
  int n_out = weight.shape[0];
  if (weight.shape[1] != n_in || bias.shape[0] != n_out)
    throw std::invalid_argument("linear: dimension mismatch, x " + shape_str(x.shape) + " W " +
                                shape_str(weight.shape) + " b " + shape_str(bias.shape));

  Tensor out = Tensor::zeros({n_out});
  for (int o = 0; o < n_out; ++o) {
    double acc = bias[o];
    const double* wrow = weight.data.data() + static_cast<std::size_t>(o) * n_in;
    for (int i = 0; i < n_in; ++i) acc += wrow[i] * x[i];
    out[o] = acc;
  }

  Tape* tape = tape_of({&x, &weight, &bias});
  if (!tape) return out;
  int px = as_node(*tape, x);
  int pw = as_node(*tape, weight);
  int pb = as_node(*tape, bias);
  return tape->record(
      std::move(out), {px, pw, pb},
      [px, pw, pb, n_in, n_out](Tape& t, int, const std::vector<double>& g) {
        const Tensor& xv = t.value(px);
        const Tensor& wv = t.value(pw);
        auto& gx = t.grad_buffer(px);
        auto& gw = t.grad_buffer(pw);
        auto& gb = t.grad_buffer(pb);
        for (int o = 0; o < n_out; ++o) {
          double go = g[o];
          gb[o] += go;
          const double* wrow = wv.data.data() + static_cast<std::size_t>(o) * n_in;
          double* gwrow = gw.data() + static_cast<std::size_t>(o) * n_in;
          for (int i = 0; i < n_in; ++i) {
            gx[i] += go * wrow[i];
            gwrow[i] += go * xv[i];  // outer product g x^T
          }
        }
      });
}

namespace {

Tensor reduce_impl(const Tensor& x, const std::vector<int>& axes, bool mean) {
  const int rank = static_cast<int>(x.shape.size());
  std::vector<char> reduced(rank, 0);
  if (axes.empty()) {
    std::fill(reduced.begin(), reduced.end(), 1);
  } else {
    for (int a : axes) {
      if (a < 0 || a >= rank)
        throw std::invalid_argument("reduce: axis " + std::to_string(a) +
                                    " invalid for shape " + shape_str(x.shape));
      reduced[a] = 1;
    }
  }

  Shape out_shape;
  std::size_t count = 1;
  for (int d = 0; d < rank; ++d) {
    if (reduced[d])
      count *= static_cast<std::size_t>(x.shape[d]);
    else
      out_shape.push_back(x.shape[d]);
  }
  if (out_shape.empty()) out_shape = {1};
  if (count == 0) throw std::invalid_argument("reduce: empty reduction");

  // Map each input flat index to its output flat index once; reused by the
  // backward broadcast.
  std::vector<std::size_t> strides_out(rank, 0);
  std::size_t os = 1;
  for (int d = rank - 1; d >= 0; --d) {
    if (!reduced[d]) {
      strides_out[d] = os;
      os *= static_cast<std::size_t>(x.shape[d]);
    }
  }

  Tensor out = Tensor::zeros(out_shape);
  {
    std::vector<int> idx(rank, 0);
    std::size_t oi = 0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
      out[oi] += x[i];
      // advance the multi-index and the output offset incrementally
      for (int d = rank - 1; d >= 0; --d) {
        ++idx[d];
        oi += strides_out[d];
        if (idx[d] < x.shape[d]) break;
        idx[d] = 0;
        oi -= strides_out[d] * static_cast<std::size_t>(x.shape[d]);
      }
    }
  }
  double inv = mean ? 1.0 / static_cast<double>(count) : 1.0;
  if (mean)
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= inv;

  Tape* tape = tape_of({&x});
  if (!tape) return out;
  int px = x.node;
  Shape xshape = x.shape;
  return tape->record(
      std::move(out), {px},
      [px, xshape, strides_out, inv](Tape& t, int, const std::vector<double>& g) {
        auto& gx = t.grad_buffer(px);
        const int rank = static_cast<int>(xshape.size());
        std::vector<int> idx(rank, 0);
        std::size_t oi = 0;
        for (std::size_t i = 0; i < gx.size(); ++i) {
          gx[i] += g[oi] * inv;
          for (int d = rank - 1; d >= 0; --d) {
            ++idx[d];
            oi += strides_out[d];
            if (idx[d] < xshape[d]) break;
            idx[d] = 0;
            oi -= strides_out[d] * static_cast<std::size_t>(xshape[d]);
          }
        }
      });
}

}  // namespace

Tensor reduce_sum(const Tensor& x, const std::vector<int>& axes) {
  return reduce_impl(x, axes, false);
}

Tensor reduce_mean(const Tensor& x, const std::vector<int>& axes) {
  return reduce_impl(x, axes, true);
}

Tensor softmax_channels(const Tensor& x) {
  if (x.shape.empty() || x.shape[0] < 1)
    throw std::invalid_argument("softmax_channels: need a channel axis, got " +
                                shape_str(x.shape));
  const int C = x.shape[0];
  const std::size_t spatial = x.numel() / static_cast<std::size_t>(C);

  Tensor out = Tensor::zeros(x.shape);
  for (std::size_t i = 0; i < spatial; ++i) {
    double mx = x[i];
    for (int c = 1; c < C; ++c) mx = std::max(mx, x[c * spatial + i]);
    double denom = 0.0;
    for (int c = 0; c < C; ++c) {
      double e = std::exp(x[c * spatial + i] - mx);
      out[c * spatial + i] = e;
      denom += e;
    }
    for (int c = 0; c < C; ++c) out[c * spatial + i] /= denom;
  }

  Tape* tape = tape_of({&x});
  if (!tape) return out;
  int px = x.node;
  return tape->record(std::move(out), {px},
                      [px, C, spatial](Tape& t, int self, const std::vector<double>& g) {
                        const Tensor& p = t.value(self);
                        auto& gx = t.grad_buffer(px);
                        for (std::size_t i = 0; i < spatial; ++i) {
                          double dot = 0.0;
                          for (int c = 0; c < C; ++c)
                            dot += g[c * spatial + i] * p[c * spatial + i];
                          for (int c = 0; c < C; ++c) {
                            std::size_t k = c * spatial + i;
                            gx[k] += p[k] * (g[k] - dot);
                          }
                        }
                      });
}

}  // namespace aepnet::ops
