#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "atat/graph.hpp"

// Layer primitives over the autograd tape. Layout conventions:
//   conv1d activations  [N, C, L]
//   conv2d activations  [N, C, H, W]
//   sequences           [N, L, F]
// Each op computes its value with Eigen maps and registers a closure that
// scatters gradients back to its parents.

namespace atat {

template <class S>
using StrideMap = Eigen::Map<MatX<S>, Eigen::Unaligned, Eigen::OuterStride<>>;
template <class S>
using CStrideMap = Eigen::Map<const MatX<S>, Eigen::Unaligned, Eigen::OuterStride<>>;

// ---------------------------------------------------------------------------
// elementwise / shape
// ---------------------------------------------------------------------------

template <class S>
Var<S> add(Var<S> a, Var<S> b) {
  Graph<S>& g = *a.g;
  require(g.val(a).same_shape(g.val(b)), Errc::ShapeError, "add shape mismatch");
  Tensor<S> out(g.val(a).shape());
  out.array() = g.val(a).array() + g.val(b).array();
  return g.make(std::move(out), {a, b}, [&g, a, b](Var<S> self) {
    const auto& dy = g.grad(self).array();
    if (g.needs_grad(a)) g.grad(a).array() += dy;
    if (g.needs_grad(b)) g.grad(b).array() += dy;
  });
}

template <class S>
Var<S> sub(Var<S> a, Var<S> b) {
  Graph<S>& g = *a.g;
  require(g.val(a).same_shape(g.val(b)), Errc::ShapeError, "sub shape mismatch");
  Tensor<S> out(g.val(a).shape());
  out.array() = g.val(a).array() - g.val(b).array();
  return g.make(std::move(out), {a, b}, [&g, a, b](Var<S> self) {
    const auto& dy = g.grad(self).array();
    if (g.needs_grad(a)) g.grad(a).array() += dy;
    if (g.needs_grad(b)) g.grad(b).array() -= dy;
  });
}

template <class S>
Var<S> mul(Var<S> a, Var<S> b) {
  Graph<S>& g = *a.g;
  require(g.val(a).same_shape(g.val(b)), Errc::ShapeError, "mul shape mismatch");
  Tensor<S> out(g.val(a).shape());
  out.array() = g.val(a).array() * g.val(b).array();
  return g.make(std::move(out), {a, b}, [&g, a, b](Var<S> self) {
    const auto& dy = g.grad(self).array();
    if (g.needs_grad(a)) g.grad(a).array() += dy * g.val(b).array();
    if (g.needs_grad(b)) g.grad(b).array() += dy * g.val(a).array();
  });
}

template <class S>
Var<S> scale(Var<S> a, S c) {
  Graph<S>& g = *a.g;
  Tensor<S> out(g.val(a).shape());
  out.array() = g.val(a).array() * c;
  return g.make(std::move(out), {a}, [&g, a, c](Var<S> self) {
    if (g.needs_grad(a)) g.grad(a).array() += g.grad(self).array() * c;
  });
}

template <class S>
Var<S> reshape(Var<S> a, Shape shape) {
  Graph<S>& g = *a.g;
  Tensor<S> out = g.val(a).reshaped(std::move(shape));
  return g.make(std::move(out), {a}, [&g, a](Var<S> self) {
    if (g.needs_grad(a)) g.grad(a).array() += g.grad(self).array();
  });
}

// out = a*(1-w) + b*w with w a fixed per-element weight; exact identity at
// w==0 / w==1 so hard splicing stays bitwise.
template <class S>
Var<S> blend(Var<S> a, Var<S> b, Tensor<S> w) {
  Graph<S>& g = *a.g;
  require(g.val(a).same_shape(g.val(b)) && g.val(a).same_shape(w), Errc::ShapeError,
          "blend shape mismatch");
  Tensor<S> out(g.val(a).shape());
  out.array() = g.val(a).array() * (S(1) - w.array()) + g.val(b).array() * w.array();
  return g.make(std::move(out), {a, b}, [&g, a, b, w = std::move(w)](Var<S> self) {
    const auto& dy = g.grad(self).array();
    if (g.needs_grad(a)) g.grad(a).array() += dy * (S(1) - w.array());
    if (g.needs_grad(b)) g.grad(b).array() += dy * w.array();
  });
}

// x viewed as [R, M] plus a length-M vector tiled across rows.
template <class S>
Var<S> add_tiled(Var<S> x, Var<S> v) {
  Graph<S>& g = *x.g;
  const Index m = g.val(v).size();
  const Index total = g.val(x).size();
  require(m > 0 && total % m == 0, Errc::ShapeError, "add_tiled size mismatch");
  const Index rows = total / m;
  Tensor<S> out(g.val(x).shape());
  out.mat(rows, m) = g.val(x).mat(rows, m).rowwise() + g.val(v).mat(1, m).row(0);
  return g.make(std::move(out), {x, v}, [&g, x, v, rows, m](Var<S> self) {
    const auto dy = g.grad(self).mat(rows, m);
    if (g.needs_grad(x)) g.grad(x).mat(rows, m) += dy;
    if (g.needs_grad(v)) g.grad(v).mat(1, m).row(0) += dy.colwise().sum();
  });
}

// x [N,L,D] with a learned D-vector added wherever mask[n*L+l] is nonzero.
template <class S>
Var<S> add_mask_embedding(Var<S> x, Tensor<S> mask, Var<S> emb) {
  Graph<S>& g = *x.g;
  const Shape& xs = g.val(x).shape();
  require(xs.size() == 3, Errc::ShapeError, "add_mask_embedding wants [N,L,D]");
  const Index rows = xs[0] * xs[1], d = xs[2];
  require(mask.size() == rows && g.val(emb).size() == d, Errc::ShapeError,
          "add_mask_embedding mask/emb size");
  Tensor<S> out = g.val(x);
  auto om = out.mat(rows, d);
  const auto ev = g.val(emb).mat(1, d).row(0);
  for (Index r = 0; r < rows; ++r)
    if (mask[r] != S(0)) om.row(r) += ev;
  return g.make(std::move(out), {x, emb},
                [&g, x, emb, mask = std::move(mask), rows, d](Var<S> self) {
                  const auto dy = g.grad(self).mat(rows, d);
                  if (g.needs_grad(x)) g.grad(x).mat(rows, d) += dy;
                  if (g.needs_grad(emb)) {
                    auto de = g.grad(emb).mat(1, d);
                    for (Index r = 0; r < rows; ++r)
                      if (mask[r] != S(0)) de.row(0) += dy.row(r);
                  }
                });
}

template <class S>
Var<S> concat_cols(const std::vector<Var<S>>& parts) {
  require(!parts.empty(), Errc::InvalidInput, "concat_cols needs inputs");
  Graph<S>& g = *parts[0].g;
  const Index n = g.val(parts[0]).dim(0);
  Index total = 0;
  std::vector<Index> widths;
  for (const Var<S>& p : parts) {
    const Shape& s = g.val(p).shape();
    require(s.size() == 2 && s[0] == n, Errc::ShapeError, "concat_cols wants [N,Fi]");
    widths.push_back(s[1]);
    total += s[1];
  }
  Tensor<S> out({n, total});
  auto om = out.mat(n, total);
  Index off = 0;
  for (size_t i = 0; i < parts.size(); ++i) {
    om.middleCols(off, widths[i]) = g.val(parts[i]).mat(n, widths[i]);
    off += widths[i];
  }
  return g.make(std::move(out), parts, [&g, parts, widths, n, total](Var<S> self) {
    const auto dy = g.grad(self).mat(n, total);
    Index off = 0;
    for (size_t i = 0; i < parts.size(); ++i) {
      if (g.needs_grad(parts[i]))
        g.grad(parts[i]).mat(n, widths[i]) += dy.middleCols(off, widths[i]);
      off += widths[i];
    }
  });
}

// [N,L,C] -> [N,C,L]; pairs with chan_to_seq for conv layers inside
// sequence models.
template <class S>
Var<S> seq_to_chan(Var<S> x) {
  Graph<S>& g = *x.g;
  const Shape& s = g.val(x).shape();
  require(s.size() == 3, Errc::ShapeError, "seq_to_chan wants [N,L,C]");
  const Index n = s[0], len = s[1], c = s[2];
  Tensor<S> out({n, c, len});
  for (Index b = 0; b < n; ++b)
    Eigen::Map<MatX<S>>(out.data() + b * c * len, c, len) =
        Eigen::Map<const MatX<S>>(g.val(x).data() + b * len * c, len, c).transpose();
  return g.make(std::move(out), {x}, [&g, x, n, len, c](Var<S> self) {
    if (!g.needs_grad(x)) return;
    for (Index b = 0; b < n; ++b)
      Eigen::Map<MatX<S>>(g.grad(x).data() + b * len * c, len, c) +=
          Eigen::Map<const MatX<S>>(g.grad(self).data() + b * c * len, c, len).transpose();
  });
}

// [N,C,L] -> [N,L,C]
template <class S>
Var<S> chan_to_seq(Var<S> x) {
  Graph<S>& g = *x.g;
  const Shape& s = g.val(x).shape();
  require(s.size() == 3, Errc::ShapeError, "chan_to_seq wants [N,C,L]");
  const Index n = s[0], c = s[1], len = s[2];
  Tensor<S> out({n, len, c});
  for (Index b = 0; b < n; ++b)
    Eigen::Map<MatX<S>>(out.data() + b * len * c, len, c) =
        Eigen::Map<const MatX<S>>(g.val(x).data() + b * c * len, c, len).transpose();
  return g.make(std::move(out), {x}, [&g, x, n, len, c](Var<S> self) {
    if (!g.needs_grad(x)) return;
    for (Index b = 0; b < n; ++b)
      Eigen::Map<MatX<S>>(g.grad(x).data() + b * c * len, c, len) +=
          Eigen::Map<const MatX<S>>(g.grad(self).data() + b * len * c, len, c).transpose();
  });
}

// ---------------------------------------------------------------------------
// activations
// ---------------------------------------------------------------------------

template <class S>
Var<S> relu(Var<S> x) {
  Graph<S>& g = *x.g;
  Tensor<S> out(g.val(x).shape());
  out.array() = g.val(x).array().max(S(0));
  return g.make(std::move(out), {x}, [&g, x](Var<S> self) {
    if (!g.needs_grad(x)) return;
    g.grad(x).array() +=
        g.grad(self).array() * (g.val(x).array() > S(0)).template cast<S>();
  });
}

template <class S>
Var<S> leaky_relu(Var<S> x, S slope) {
  Graph<S>& g = *x.g;
  Tensor<S> out(g.val(x).shape());
  out.array() = (g.val(x).array() > S(0)).select(g.val(x).array(), g.val(x).array() * slope);
  return g.make(std::move(out), {x}, [&g, x, slope](Var<S> self) {
    if (!g.needs_grad(x)) return;
    auto pos = (g.val(x).array() > S(0)).template cast<S>();
    g.grad(x).array() += g.grad(self).array() * (pos + (S(1) - pos) * slope);
  });
}

template <class S>
Var<S> sigmoid(Var<S> x) {
  Graph<S>& g = *x.g;
  Tensor<S> out(g.val(x).shape());
  out.array() = S(1) / (S(1) + (-g.val(x).array()).exp());
  return g.make(std::move(out), {x}, [&g, x](Var<S> self) {
    if (!g.needs_grad(x)) return;
    const auto& y = g.val(self).array();
    g.grad(x).array() += g.grad(self).array() * y * (S(1) - y);
  });
}

template <class S>
Var<S> tanh_op(Var<S> x) {
  Graph<S>& g = *x.g;
  Tensor<S> out(g.val(x).shape());
  out.array() = g.val(x).array().tanh();
  return g.make(std::move(out), {x}, [&g, x](Var<S> self) {
    if (!g.needs_grad(x)) return;
    const auto& y = g.val(self).array();
    g.grad(x).array() += g.grad(self).array() * (S(1) - y * y);
  });
}

// Row-wise softmax over a [R, C] view, max-subtracted for stability.
template <class S>
Var<S> softmax_rows(Var<S> x) {
  Graph<S>& g = *x.g;
  const Shape& s = g.val(x).shape();
  require(s.size() == 2, Errc::ShapeError, "softmax_rows wants [R,C]");
  const Index r = s[0], c = s[1];
  Tensor<S> out({r, c});
  auto xm = g.val(x).mat(r, c);
  auto om = out.mat(r, c);
  for (Index i = 0; i < r; ++i) {
    ArrX<S> row = xm.row(i).transpose().array();
    row -= row.maxCoeff();
    row = row.exp();
    om.row(i) = (row / row.sum()).matrix().transpose();
  }
  return g.make(std::move(out), {x}, [&g, x, r, c](Var<S> self) {
    if (!g.needs_grad(x)) return;
    auto y = g.val(self).mat(r, c);
    auto dy = g.grad(self).mat(r, c);
    auto dx = g.grad(x).mat(r, c);
    for (Index i = 0; i < r; ++i) {
      S dot = y.row(i).dot(dy.row(i));
      dx.row(i) += (y.row(i).array() * (dy.row(i).array() - dot)).matrix();
    }
  });
}

// ---------------------------------------------------------------------------
// dense
// ---------------------------------------------------------------------------

// x viewed as [R, Fin], w [Fin, Fout], b [Fout] -> [R, Fout].
// Higher-rank x keeps leading dims; only the last dim must equal Fin.
template <class S>
Var<S> dense(Var<S> x, Var<S> w, Var<S> b) {
  Graph<S>& g = *x.g;
  const Shape& ws = g.val(w).shape();
  require(ws.size() == 2, Errc::ShapeError, "dense weight wants [Fin,Fout]");
  const Index fin = ws[0], fout = ws[1];
  require(g.val(b).size() == fout, Errc::ShapeError, "dense bias size");
  const Index total = g.val(x).size();
  require(fin > 0 && total % fin == 0, Errc::ShapeError, "dense input not divisible by Fin");
  const Index rows = total / fin;
  Shape os = g.val(x).shape();
  require(!os.empty() && os.back() == fin, Errc::ShapeError, "dense input last dim != Fin");
  os.back() = fout;
  Tensor<S> out(os);
  out.mat(rows, fout).noalias() = g.val(x).mat(rows, fin) * g.val(w).mat(fin, fout);
  out.mat(rows, fout).rowwise() += g.val(b).mat(1, fout).row(0);
  return g.make(std::move(out), {x, w, b}, [&g, x, w, b, rows, fin, fout](Var<S> self) {
    const auto dy = g.grad(self).mat(rows, fout);
    if (g.needs_grad(x))
      g.grad(x).mat(rows, fin).noalias() += dy * g.val(w).mat(fin, fout).transpose();
    if (g.needs_grad(w))
      g.grad(w).mat(fin, fout).noalias() += g.val(x).mat(rows, fin).transpose() * dy;
    if (g.needs_grad(b)) g.grad(b).mat(1, fout).row(0) += dy.colwise().sum();
  });
}

// ---------------------------------------------------------------------------
// convolutions (same padding, stride 1, odd kernel)
// ---------------------------------------------------------------------------

namespace detail {

template <class S>
MatX<S> im2col1d(const Tensor<S>& x, Index n, Index cin, Index len, Index k) {
  const Index half = k / 2;
  MatX<S> cols = MatX<S>::Zero(n * len, cin * k);
  const S* xd = x.data();
  for (Index b = 0; b < n; ++b)
    for (Index c = 0; c < cin; ++c) {
      const S* ch = xd + (b * cin + c) * len;
      for (Index dk = 0; dk < k; ++dk) {
        const Index shift = dk - half;
        const Index lo = std::max<Index>(0, -shift);
        const Index hi = std::min<Index>(len, len - shift);
        for (Index l = lo; l < hi; ++l) cols(b * len + l, c * k + dk) = ch[l + shift];
      }
    }
  return cols;
}

template <class S>
void col2im1d(const MatX<S>& dcols, Tensor<S>& dx, Index n, Index cin, Index len, Index k) {
  const Index half = k / 2;
  S* xd = dx.data();
  for (Index b = 0; b < n; ++b)
    for (Index c = 0; c < cin; ++c) {
      S* ch = xd + (b * cin + c) * len;
      for (Index dk = 0; dk < k; ++dk) {
        const Index shift = dk - half;
        const Index lo = std::max<Index>(0, -shift);
        const Index hi = std::min<Index>(len, len - shift);
        for (Index l = lo; l < hi; ++l) ch[l + shift] += dcols(b * len + l, c * k + dk);
      }
    }
}

template <class S>
MatX<S> im2col2d(const Tensor<S>& x, Index n, Index cin, Index h, Index w, Index kh, Index kw) {
  const Index hh = kh / 2, hw = kw / 2;
  MatX<S> cols = MatX<S>::Zero(n * h * w, cin * kh * kw);
  const S* xd = x.data();
  for (Index b = 0; b < n; ++b)
    for (Index c = 0; c < cin; ++c) {
      const S* ch = xd + (b * cin + c) * h * w;
      for (Index dh = 0; dh < kh; ++dh)
        for (Index dw = 0; dw < kw; ++dw) {
          const Index col = (c * kh + dh) * kw + dw;
          for (Index i = 0; i < h; ++i) {
            const Index si = i + dh - hh;
            if (si < 0 || si >= h) continue;
            for (Index j = 0; j < w; ++j) {
              const Index sj = j + dw - hw;
              if (sj < 0 || sj >= w) continue;
              cols(b * h * w + i * w + j, col) = ch[si * w + sj];
            }
          }
        }
    }
  return cols;
}

template <class S>
void col2im2d(const MatX<S>& dcols, Tensor<S>& dx, Index n, Index cin, Index h, Index w,
              Index kh, Index kw) {
  const Index hh = kh / 2, hw = kw / 2;
  S* xd = dx.data();
  for (Index b = 0; b < n; ++b)
    for (Index c = 0; c < cin; ++c) {
      S* ch = xd + (b * cin + c) * h * w;
      for (Index dh = 0; dh < kh; ++dh)
        for (Index dw = 0; dw < kw; ++dw) {
          const Index col = (c * kh + dh) * kw + dw;
          for (Index i = 0; i < h; ++i) {
            const Index si = i + dh - hh;
            if (si < 0 || si >= h) continue;
            for (Index j = 0; j < w; ++j) {
              const Index sj = j + dw - hw;
              if (sj < 0 || sj >= w) continue;
              ch[si * w + sj] += dcols(b * h * w + i * w + j, col);
            }
          }
        }
    }
}

}  // namespace detail

// x [N,Cin,L], kernel [Cout,Cin,K], bias [Cout] -> [N,Cout,L].
template <class S>
Var<S> conv1d(Var<S> x, Var<S> kernel, Var<S> bias) {
  Graph<S>& g = *x.g;
  const Shape& xs = g.val(x).shape();
  const Shape& ks = g.val(kernel).shape();
  require(xs.size() == 3 && ks.size() == 3, Errc::ShapeError, "conv1d wants [N,Cin,L],[Cout,Cin,K]");
  const Index n = xs[0], cin = xs[1], len = xs[2];
  const Index cout = ks[0], k = ks[2];
  require(ks[1] == cin, Errc::ShapeError, "conv1d channel mismatch");
  require(k % 2 == 1, Errc::ShapeError, "conv1d kernel size must be odd");
  require(g.val(bias).size() == cout, Errc::ShapeError, "conv1d bias size");

  auto cols = std::make_shared<MatX<S>>(detail::im2col1d(g.val(x), n, cin, len, k));
  MatX<S> y2(n * len, cout);
  y2.noalias() = *cols * g.val(kernel).mat(cout, cin * k).transpose();
  y2.rowwise() += g.val(bias).mat(1, cout).row(0);

  Tensor<S> out({n, cout, len});
  for (Index b = 0; b < n; ++b)
    StrideMap<S>(out.data() + b * cout * len, cout, len, Eigen::OuterStride<>(len)) =
        y2.middleRows(b * len, len).transpose();

  return g.make(std::move(out), {x, kernel, bias},
                [&g, x, kernel, bias, cols, n, cin, cout, len, k](Var<S> self) {
                  MatX<S> dy2(n * len, cout);
                  for (Index b = 0; b < n; ++b)
                    dy2.middleRows(b * len, len) =
                        CStrideMap<S>(g.grad(self).data() + b * cout * len, cout, len,
                                      Eigen::OuterStride<>(len))
                            .transpose();
                  if (g.needs_grad(bias))
                    g.grad(bias).mat(1, cout).row(0) += dy2.colwise().sum();
                  if (g.needs_grad(kernel))
                    g.grad(kernel).mat(cout, cin * k).noalias() += dy2.transpose() * *cols;
                  if (g.needs_grad(x)) {
                    MatX<S> dcols(n * len, cin * k);
                    dcols.noalias() = dy2 * g.val(kernel).mat(cout, cin * k);
                    detail::col2im1d(dcols, g.grad(x), n, cin, len, k);
                  }
                });
}

// x [N,Cin,H,W], kernel [Cout,Cin,kh,kw], bias [Cout] -> [N,Cout,H,W].
template <class S>
Var<S> conv2d(Var<S> x, Var<S> kernel, Var<S> bias) {
  Graph<S>& g = *x.g;
  const Shape& xs = g.val(x).shape();
  const Shape& ks = g.val(kernel).shape();
  require(xs.size() == 4 && ks.size() == 4, Errc::ShapeError,
          "conv2d wants [N,Cin,H,W],[Cout,Cin,kh,kw]");
  const Index n = xs[0], cin = xs[1], h = xs[2], w = xs[3];
  const Index cout = ks[0], kh = ks[2], kw = ks[3];
  require(ks[1] == cin, Errc::ShapeError, "conv2d channel mismatch");
  require(kh % 2 == 1 && kw % 2 == 1, Errc::ShapeError, "conv2d kernel dims must be odd");
  require(g.val(bias).size() == cout, Errc::ShapeError, "conv2d bias size");

  const Index hw = h * w, kk = kh * kw;
  auto cols = std::make_shared<MatX<S>>(detail::im2col2d(g.val(x), n, cin, h, w, kh, kw));
  MatX<S> y2(n * hw, cout);
  y2.noalias() = *cols * g.val(kernel).mat(cout, cin * kk).transpose();
  y2.rowwise() += g.val(bias).mat(1, cout).row(0);

  Tensor<S> out({n, cout, h, w});
  for (Index b = 0; b < n; ++b)
    StrideMap<S>(out.data() + b * cout * hw, cout, hw, Eigen::OuterStride<>(hw)) =
        y2.middleRows(b * hw, hw).transpose();

  return g.make(std::move(out), {x, kernel, bias},
                [&g, x, kernel, bias, cols, n, cin, cout, h, w, hw, kh, kw, kk](Var<S> self) {
                  MatX<S> dy2(n * hw, cout);
                  for (Index b = 0; b < n; ++b)
                    dy2.middleRows(b * hw, hw) =
                        CStrideMap<S>(g.grad(self).data() + b * cout * hw, cout, hw,
                                      Eigen::OuterStride<>(hw))
                            .transpose();
                  if (g.needs_grad(bias))
                    g.grad(bias).mat(1, cout).row(0) += dy2.colwise().sum();
                  if (g.needs_grad(kernel))
                    g.grad(kernel).mat(cout, cin * kk).noalias() += dy2.transpose() * *cols;
                  if (g.needs_grad(x)) {
                    MatX<S> dcols(n * hw, cin * kk);
                    dcols.noalias() = dy2 * g.val(kernel).mat(cout, cin * kk);
                    detail::col2im2d(dcols, g.grad(x), n, cin, h, w, kh, kw);
                  }
                });
}

// ---------------------------------------------------------------------------
// pooling / upsampling
// ---------------------------------------------------------------------------

// x [N,C,L] -> [N,C,L/f]; gradient routes to the argmax (first index on ties).
template <class S>
Var<S> maxpool1d(Var<S> x, Index factor = 2) {
  Graph<S>& g = *x.g;
  const Shape& xs = g.val(x).shape();
  require(xs.size() == 3, Errc::ShapeError, "maxpool1d wants [N,C,L]");
  const Index n = xs[0], c = xs[1], len = xs[2];
  require(factor > 0 && len % factor == 0, Errc::ShapeError,
          "maxpool1d length not divisible by factor");
  const Index lo = len / factor;
  Tensor<S> out({n, c, lo});
  auto arg = std::make_shared<std::vector<Index>>(static_cast<size_t>(n * c * lo));
  const S* xd = g.val(x).data();
  S* od = out.data();
  for (Index i = 0; i < n * c; ++i)
    for (Index j = 0; j < lo; ++j) {
      Index base = i * len + j * factor;
      Index best = base;
      S bv = xd[base];
      for (Index t = 1; t < factor; ++t)
        if (xd[base + t] > bv) {
          bv = xd[base + t];
          best = base + t;
        }
      od[i * lo + j] = bv;
      (*arg)[static_cast<size_t>(i * lo + j)] = best;
    }
  return g.make(std::move(out), {x}, [&g, x, arg](Var<S> self) {
    if (!g.needs_grad(x)) return;
    const S* dy = g.grad(self).data();
    S* dx = g.grad(x).data();
    for (size_t i = 0; i < arg->size(); ++i) dx[(*arg)[i]] += dy[i];
  });
}

// x [N,C,H,W] -> [N,C,H/f,W/f].
template <class S>
Var<S> maxpool2d(Var<S> x, Index factor = 2) {
  Graph<S>& g = *x.g;
  const Shape& xs = g.val(x).shape();
  require(xs.size() == 4, Errc::ShapeError, "maxpool2d wants [N,C,H,W]");
  const Index n = xs[0], c = xs[1], h = xs[2], w = xs[3];
  require(factor > 0 && h % factor == 0 && w % factor == 0, Errc::ShapeError,
          "maxpool2d dims not divisible by factor");
  const Index ho = h / factor, wo = w / factor;
  Tensor<S> out({n, c, ho, wo});
  auto arg = std::make_shared<std::vector<Index>>(static_cast<size_t>(n * c * ho * wo));
  const S* xd = g.val(x).data();
  S* od = out.data();
  for (Index i = 0; i < n * c; ++i)
    for (Index oi = 0; oi < ho; ++oi)
      for (Index oj = 0; oj < wo; ++oj) {
        Index best = -1;
        S bv = S(0);
        for (Index di = 0; di < factor; ++di)
          for (Index dj = 0; dj < factor; ++dj) {
            Index idx = i * h * w + (oi * factor + di) * w + (oj * factor + dj);
            if (best < 0 || xd[idx] > bv) {
              bv = xd[idx];
              best = idx;
            }
          }
        od[(i * ho + oi) * wo + oj] = bv;
        (*arg)[static_cast<size_t>((i * ho + oi) * wo + oj)] = best;
      }
  return g.make(std::move(out), {x}, [&g, x, arg](Var<S> self) {
    if (!g.needs_grad(x)) return;
    const S* dy = g.grad(self).data();
    S* dx = g.grad(x).data();
    for (size_t i = 0; i < arg->size(); ++i) dx[(*arg)[i]] += dy[i];
  });
}

// x [N,C,L] -> [N,C,L*f], nearest neighbour.
template <class S>
Var<S> upsample1d(Var<S> x, Index factor = 2) {
  Graph<S>& g = *x.g;
  const Shape& xs = g.val(x).shape();
  require(xs.size() == 3, Errc::ShapeError, "upsample1d wants [N,C,L]");
  const Index n = xs[0], c = xs[1], len = xs[2];
  require(factor > 0, Errc::ShapeError, "upsample1d factor must be positive");
  const Index lo = len * factor;
  Tensor<S> out({n, c, lo});
  const S* xd = g.val(x).data();
  S* od = out.data();
  for (Index i = 0; i < n * c; ++i)
    for (Index j = 0; j < len; ++j)
      for (Index t = 0; t < factor; ++t) od[i * lo + j * factor + t] = xd[i * len + j];
  return g.make(std::move(out), {x}, [&g, x, n, c, len, factor, lo](Var<S> self) {
    if (!g.needs_grad(x)) return;
    const S* dy = g.grad(self).data();
    S* dx = g.grad(x).data();
    for (Index i = 0; i < n * c; ++i)
      for (Index j = 0; j < len; ++j) {
        S acc = S(0);
        for (Index t = 0; t < factor; ++t) acc += dy[i * lo + j * factor + t];
        dx[i * len + j] += acc;
      }
  });
}

// ---------------------------------------------------------------------------
// normalization
// ---------------------------------------------------------------------------

// Per-channel batch normalization over [N,C,...]; reduction spans batch and
// spatial dims. Train mode uses batch moments (biased variance) and updates
// the running stats in place; Infer mode uses the running stats.
template <class S>
Var<S> batchnorm(Var<S> x, Var<S> gamma, Var<S> beta, Parameter<S>& run_mean,
                 Parameter<S>& run_var, Mode mode, S momentum = S(0.1), S eps = S(1e-5)) {
  Graph<S>& g = *x.g;
  const Shape& xs = g.val(x).shape();
  require(xs.size() >= 2, Errc::ShapeError, "batchnorm wants rank >= 2");
  const Index n = xs[0], c = xs[1];
  Index sp = 1;
  for (size_t i = 2; i < xs.size(); ++i) sp *= xs[i];
  require(g.val(gamma).size() == c && g.val(beta).size() == c, Errc::ShapeError,
          "batchnorm affine size");
  require(run_mean.value.size() == c && run_var.value.size() == c, Errc::ShapeError,
          "batchnorm running stats size");

  const Index m = n * sp;
  Tensor<S> out(xs);
  auto xhat = std::make_shared<Tensor<S>>(xs);
  auto inv_std = std::make_shared<ArrX<S>>(c);

  const S* xd = g.val(x).data();
  S* od = out.data();
  S* hd = xhat->data();
  const auto& gm = g.val(gamma).array();
  const auto& bt = g.val(beta).array();

  if (mode == Mode::Train) {
    require(n >= 2, Errc::InvalidBatch, "batchnorm train mode needs batch >= 2");
    for (Index ch = 0; ch < c; ++ch) {
      S mean = S(0);
      for (Index b = 0; b < n; ++b) {
        const S* p = xd + (b * c + ch) * sp;
        for (Index s = 0; s < sp; ++s) mean += p[s];
      }
      mean /= static_cast<S>(m);
      S var = S(0);
      for (Index b = 0; b < n; ++b) {
        const S* p = xd + (b * c + ch) * sp;
        for (Index s = 0; s < sp; ++s) var += (p[s] - mean) * (p[s] - mean);
      }
      var /= static_cast<S>(m);
      const S is = S(1) / std::sqrt(var + eps);
      (*inv_std)[ch] = is;
      for (Index b = 0; b < n; ++b) {
        const S* p = xd + (b * c + ch) * sp;
        S* hp = hd + (b * c + ch) * sp;
        S* op = od + (b * c + ch) * sp;
        for (Index s = 0; s < sp; ++s) {
          hp[s] = (p[s] - mean) * is;
          op[s] = gm[ch] * hp[s] + bt[ch];
        }
      }
      run_mean.value[ch] += momentum * (mean - run_mean.value[ch]);
      run_var.value[ch] += momentum * (var - run_var.value[ch]);
    }
  } else {
    for (Index ch = 0; ch < c; ++ch) {
      const S mean = run_mean.value[ch];
      const S is = S(1) / std::sqrt(run_var.value[ch] + eps);
      (*inv_std)[ch] = is;
      for (Index b = 0; b < n; ++b) {
        const S* p = xd + (b * c + ch) * sp;
        S* hp = hd + (b * c + ch) * sp;
        S* op = od + (b * c + ch) * sp;
        for (Index s = 0; s < sp; ++s) {
          hp[s] = (p[s] - mean) * is;
          op[s] = gm[ch] * hp[s] + bt[ch];
        }
      }
    }
  }

  return g.make(std::move(out), {x, gamma, beta},
                [&g, x, gamma, beta, xhat, inv_std, mode, n, c, sp, m](Var<S> self) {
                  const S* dy = g.grad(self).data();
                  const S* hd = xhat->data();
                  const auto& gm = g.val(gamma).array();
                  // per-channel reductions
                  ArrX<S> sum_dy = ArrX<S>::Zero(c), sum_dyh = ArrX<S>::Zero(c);
                  for (Index b = 0; b < n; ++b)
                    for (Index ch = 0; ch < c; ++ch) {
                      const S* dp = dy + (b * c + ch) * sp;
                      const S* hp = hd + (b * c + ch) * sp;
                      for (Index s = 0; s < sp; ++s) {
                        sum_dy[ch] += dp[s];
                        sum_dyh[ch] += dp[s] * hp[s];
                      }
                    }
                  if (g.needs_grad(gamma)) g.grad(gamma).array() += sum_dyh;
                  if (g.needs_grad(beta)) g.grad(beta).array() += sum_dy;
                  if (!g.needs_grad(x)) return;
                  S* dx = g.grad(x).data();
                  if (mode == Mode::Train) {
                    const S inv_m = S(1) / static_cast<S>(m);
                    for (Index b = 0; b < n; ++b)
                      for (Index ch = 0; ch < c; ++ch) {
                        const S* dp = dy + (b * c + ch) * sp;
                        const S* hp = hd + (b * c + ch) * sp;
                        S* xp = dx + (b * c + ch) * sp;
                        const S k = gm[ch] * (*inv_std)[ch];
                        for (Index s = 0; s < sp; ++s)
                          xp[s] += k * (dp[s] - inv_m * sum_dy[ch] - inv_m * hp[s] * sum_dyh[ch]);
                      }
                  } else {
                    for (Index b = 0; b < n; ++b)
                      for (Index ch = 0; ch < c; ++ch) {
                        const S* dp = dy + (b * c + ch) * sp;
                        S* xp = dx + (b * c + ch) * sp;
                        const S k = gm[ch] * (*inv_std)[ch];
                        for (Index s = 0; s < sp; ++s) xp[s] += k * dp[s];
                      }
                  }
                });
}

// Row-wise layer norm over the last dim (rows = leading dims product).
template <class S>
Var<S> layer_norm(Var<S> x, Var<S> gamma, Var<S> beta, S eps = S(1e-5)) {
  Graph<S>& g = *x.g;
  const Index d = g.val(gamma).size();
  require(g.val(beta).size() == d, Errc::ShapeError, "layer_norm affine size");
  const Index total = g.val(x).size();
  require(d > 0 && total % d == 0, Errc::ShapeError, "layer_norm size mismatch");
  const Index rows = total / d;
  Tensor<S> out(g.val(x).shape());
  auto xhat = std::make_shared<Tensor<S>>(g.val(x).shape());
  auto inv_std = std::make_shared<ArrX<S>>(rows);
  auto xm = g.val(x).mat(rows, d);
  auto om = out.mat(rows, d);
  auto hm = xhat->mat(rows, d);
  const auto gv = g.val(gamma).mat(1, d).row(0);
  const auto bv = g.val(beta).mat(1, d).row(0);
  for (Index r = 0; r < rows; ++r) {
    const S mean = xm.row(r).mean();
    const S var = (xm.row(r).array() - mean).square().sum() / static_cast<S>(d);
    const S is = S(1) / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    hm.row(r) = ((xm.row(r).array() - mean) * is).matrix();
    om.row(r) = (hm.row(r).array() * gv.array() + bv.array()).matrix();
  }
  return g.make(std::move(out), {x, gamma, beta},
                [&g, x, gamma, beta, xhat, inv_std, rows, d](Var<S> self) {
                  auto dy = g.grad(self).mat(rows, d);
                  auto hm = xhat->mat(rows, d);
                  const auto gv = g.val(gamma).mat(1, d).row(0);
                  if (g.needs_grad(gamma))
                    g.grad(gamma).mat(1, d).row(0) += (dy.array() * hm.array()).colwise().sum().matrix();
                  if (g.needs_grad(beta)) g.grad(beta).mat(1, d).row(0) += dy.colwise().sum();
                  if (!g.needs_grad(x)) return;
                  auto dx = g.grad(x).mat(rows, d);
                  for (Index r = 0; r < rows; ++r) {
                    ArrX<S> dyg = (dy.row(r).array() * gv.array()).transpose();
                    const S mdyg = dyg.mean();
                    const S mdygh = (dyg * hm.row(r).transpose().array()).mean();
                    dx.row(r) += ((*inv_std)[r] *
                                  (dyg - mdyg - hm.row(r).transpose().array() * mdygh))
                                     .matrix()
                                     .transpose();
                  }
                });
}

// Per-row standardization (zero mean, unit population std); the z-score
// front door for discriminator and gate inputs inside the graph.
template <class S>
Var<S> standardize(Var<S> x, Index row_len, S eps = S(1e-8)) {
  Graph<S>& g = *x.g;
  const Index total = g.val(x).size();
  require(row_len > 0 && total % row_len == 0, Errc::ShapeError, "standardize size mismatch");
  const Index rows = total / row_len;
  Tensor<S> out(g.val(x).shape());
  auto inv_std = std::make_shared<ArrX<S>>(rows);
  auto xm = g.val(x).mat(rows, row_len);
  auto om = out.mat(rows, row_len);
  for (Index r = 0; r < rows; ++r) {
    const S mean = xm.row(r).mean();
    const S var = (xm.row(r).array() - mean).square().sum() / static_cast<S>(row_len);
    const S is = S(1) / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    om.row(r) = ((xm.row(r).array() - mean) * is).matrix();
  }
  return g.make(std::move(out), {x}, [&g, x, inv_std, rows, row_len](Var<S> self) {
    if (!g.needs_grad(x)) return;
    auto dy = g.grad(self).mat(rows, row_len);
    auto y = g.val(self).mat(rows, row_len);
    auto dx = g.grad(x).mat(rows, row_len);
    for (Index r = 0; r < rows; ++r) {
      const S mdy = dy.row(r).mean();
      const S mdyh = (dy.row(r).array() * y.row(r).array()).mean();
      dx.row(r) +=
          ((*inv_std)[r] * (dy.row(r).array() - mdy - y.row(r).array() * mdyh)).matrix();
    }
  });
}

// ---------------------------------------------------------------------------
// dropout
// ---------------------------------------------------------------------------

// Inverted dropout; Infer mode is the identity. A fixed mask can be supplied
// for finite-difference testing.
template <class S>
Var<S> dropout(Var<S> x, S rate, Mode mode, Rng& rng, const Tensor<S>* fixed_mask = nullptr) {
  Graph<S>& g = *x.g;
  require(rate >= S(0) && rate < S(1), Errc::InvalidConfig, "dropout rate in [0,1)");
  if (mode == Mode::Infer || rate == S(0)) return x;
  auto mask = std::make_shared<Tensor<S>>(g.val(x).shape());
  if (fixed_mask) {
    require(fixed_mask->same_shape(g.val(x)), Errc::ShapeError, "dropout mask shape");
    *mask = *fixed_mask;
  } else {
    const S keep = S(1) - rate;
    for (Index i = 0; i < mask->size(); ++i)
      (*mask)[i] = rng.uniform() >= static_cast<double>(rate) ? S(1) / keep : S(0);
  }
  Tensor<S> out(g.val(x).shape());
  out.array() = g.val(x).array() * mask->array();
  return g.make(std::move(out), {x}, [&g, x, mask](Var<S> self) {
    if (g.needs_grad(x)) g.grad(x).array() += g.grad(self).array() * mask->array();
  });
}

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

// x [N,L,F], w [F,4H], u [H,4H], b [4H]; gate packing [i,f,g,o]; zero initial
// state. return_sequence yields [N,L,H], otherwise the last hidden [N,H].
template <class S>
Var<S> lstm(Var<S> x, Var<S> w, Var<S> u, Var<S> b, bool return_sequence) {
  Graph<S>& g = *x.g;
  const Shape& xs = g.val(x).shape();
  require(xs.size() == 3, Errc::ShapeError, "lstm wants [N,L,F]");
  const Index n = xs[0], len = xs[1], f = xs[2];
  const Shape& wsh = g.val(w).shape();
  require(wsh.size() == 2 && wsh[0] == f && wsh[1] % 4 == 0, Errc::ShapeError,
          "lstm input weights want [F,4H]");
  const Index hdim = wsh[1] / 4;
  {
    const Shape& ush = g.val(u).shape();
    require(ush.size() == 2 && ush[0] == hdim && ush[1] == 4 * hdim, Errc::ShapeError,
            "lstm recurrent weights want [H,4H]");
    require(g.val(b).size() == 4 * hdim, Errc::ShapeError, "lstm bias wants [4H]");
  }

  struct Stash {
    std::vector<MatX<S>> gates;   // per t: [N,4H] activated (i,f,g,o)
    std::vector<MatX<S>> cells;   // c_0..c_L (c_0 = 0)
    std::vector<MatX<S>> hidden;  // h_0..h_L (h_0 = 0)
    std::vector<MatX<S>> tanh_c;  // per t
  };
  auto st = std::make_shared<Stash>();
  st->gates.reserve(static_cast<size_t>(len));
  st->tanh_c.reserve(static_cast<size_t>(len));
  st->cells.push_back(MatX<S>::Zero(n, hdim));
  st->hidden.push_back(MatX<S>::Zero(n, hdim));

  const auto wm = g.val(w).mat(f, 4 * hdim);
  const auto um = g.val(u).mat(hdim, 4 * hdim);
  const auto bv = g.val(b).mat(1, 4 * hdim).row(0);

  Tensor<S> out(return_sequence ? Shape{n, len, hdim} : Shape{n, hdim});
  for (Index t = 0; t < len; ++t) {
    CStrideMap<S> xt(g.val(x).data() + t * f, n, f, Eigen::OuterStride<>(len * f));
    MatX<S> pre(n, 4 * hdim);
    pre.noalias() = xt * wm;
    pre.noalias() += st->hidden.back() * um;
    pre.rowwise() += bv;
    MatX<S> gates(n, 4 * hdim);
    gates.leftCols(hdim) = (S(1) / (S(1) + (-pre.leftCols(hdim).array()).exp())).matrix();
    gates.middleCols(hdim, hdim) =
        (S(1) / (S(1) + (-pre.middleCols(hdim, hdim).array()).exp())).matrix();
    gates.middleCols(2 * hdim, hdim) = pre.middleCols(2 * hdim, hdim).array().tanh().matrix();
    gates.rightCols(hdim) = (S(1) / (S(1) + (-pre.rightCols(hdim).array()).exp())).matrix();

    MatX<S> c = (gates.middleCols(hdim, hdim).array() * st->cells.back().array() +
                 gates.leftCols(hdim).array() * gates.middleCols(2 * hdim, hdim).array())
                    .matrix();
    MatX<S> tc = c.array().tanh().matrix();
    MatX<S> h = (gates.rightCols(hdim).array() * tc.array()).matrix();

    if (return_sequence)
      StrideMap<S>(out.data() + t * hdim, n, hdim, Eigen::OuterStride<>(len * hdim)) = h;
    st->gates.push_back(std::move(gates));
    st->cells.push_back(std::move(c));
    st->tanh_c.push_back(std::move(tc));
    st->hidden.push_back(std::move(h));
  }
  if (!return_sequence) out.mat(n, hdim) = st->hidden.back();

  return g.make(std::move(out), {x, w, u, b},
                [&g, x, w, u, b, st, n, len, f, hdim, return_sequence](Var<S> self) {
                  const auto wm = g.val(w).mat(f, 4 * hdim);
                  const auto um = g.val(u).mat(hdim, 4 * hdim);
                  const bool nx = g.needs_grad(x), nw = g.needs_grad(w), nu = g.needs_grad(u),
                             nb = g.needs_grad(b);
                  MatX<S> dh = MatX<S>::Zero(n, hdim), dc = MatX<S>::Zero(n, hdim);
                  for (Index t = len - 1; t >= 0; --t) {
                    if (return_sequence)
                      dh += CStrideMap<S>(g.grad(self).data() + t * hdim, n, hdim,
                                          Eigen::OuterStride<>(len * hdim));
                    else if (t == len - 1)
                      dh += g.grad(self).mat(n, hdim);
                    const auto& gates = st->gates[static_cast<size_t>(t)];
                    const auto& tc = st->tanh_c[static_cast<size_t>(t)];
                    auto gi = gates.leftCols(hdim).array();
                    auto gf = gates.middleCols(hdim, hdim).array();
                    auto gg = gates.middleCols(2 * hdim, hdim).array();
                    auto go = gates.rightCols(hdim).array();
                    dc.array() += dh.array() * go * (S(1) - tc.array() * tc.array());
                    MatX<S> dpre(n, 4 * hdim);
                    dpre.leftCols(hdim) =
                        (dc.array() * gg * gi * (S(1) - gi)).matrix();  // d input gate
                    dpre.middleCols(hdim, hdim) =
                        (dc.array() * st->cells[static_cast<size_t>(t)].array() * gf *
                         (S(1) - gf))
                            .matrix();  // d forget gate
                    dpre.middleCols(2 * hdim, hdim) =
                        (dc.array() * gi * (S(1) - gg * gg)).matrix();  // d candidate
                    dpre.rightCols(hdim) =
                        (dh.array() * tc.array() * go * (S(1) - go)).matrix();  // d output gate

                    CStrideMap<S> xt(g.val(x).data() + t * f, n, f,
                                     Eigen::OuterStride<>(len * f));
                    if (nw) g.grad(w).mat(f, 4 * hdim).noalias() += xt.transpose() * dpre;
                    if (nu)
                      g.grad(u).mat(hdim, 4 * hdim).noalias() +=
                          st->hidden[static_cast<size_t>(t)].transpose() * dpre;
                    if (nb) g.grad(b).mat(1, 4 * hdim).row(0) += dpre.colwise().sum();
                    if (nx)
                      StrideMap<S>(g.grad(x).data() + t * f, n, f,
                                   Eigen::OuterStride<>(len * f))
                          .noalias() += dpre * wm.transpose();
                    dh.noalias() = dpre * um.transpose();
                    dc = (dc.array() * gf).matrix();
                  }
                });
}

// ---------------------------------------------------------------------------
// attention
// ---------------------------------------------------------------------------

// Scaled dot-product attention core on projected q,k,v (each [N*L, D]),
// per-head softmax rows stashed for backward. Output [N*L, D].
template <class S>
Var<S> attention_core(Var<S> q, Var<S> k, Var<S> v, Index n, Index len, Index heads) {
  Graph<S>& g = *q.g;
  const Shape& qs = g.val(q).shape();
  require(qs.size() == 2 && qs[0] == n * len, Errc::ShapeError, "attention_core wants [N*L,D]");
  const Index d = qs[1];
  require(g.val(k).same_shape(g.val(q)) && g.val(v).same_shape(g.val(q)), Errc::ShapeError,
          "attention_core q/k/v shapes differ");
  require(heads > 0 && d % heads == 0, Errc::ShapeError, "attention dim not divisible by heads");
  const Index dk = d / heads;
  const S sc = S(1) / std::sqrt(static_cast<S>(dk));

  auto attn = std::make_shared<std::vector<MatX<S>>>();
  attn->reserve(static_cast<size_t>(n * heads));
  Tensor<S> out({n * len, d});
  auto om = out.mat(n * len, d);
  for (Index b = 0; b < n; ++b) {
    const auto qb = g.val(q).mat(n * len, d).middleRows(b * len, len);
    const auto kb = g.val(k).mat(n * len, d).middleRows(b * len, len);
    const auto vb = g.val(v).mat(n * len, d).middleRows(b * len, len);
    for (Index h = 0; h < heads; ++h) {
      MatX<S> s(len, len);
      s.noalias() = qb.middleCols(h * dk, dk) * kb.middleCols(h * dk, dk).transpose();
      s *= sc;
      for (Index r = 0; r < len; ++r) {
        ArrX<S> row = s.row(r).transpose().array();
        row -= row.maxCoeff();
        row = row.exp();
        s.row(r) = (row / row.sum()).matrix().transpose();
      }
      om.middleRows(b * len, len).middleCols(h * dk, dk).noalias() =
          s * vb.middleCols(h * dk, dk);
      attn->push_back(std::move(s));
    }
  }

  return g.make(std::move(out), {q, k, v},
                [&g, q, k, v, attn, n, len, heads, d, dk, sc](Var<S> self) {
                  const auto dy = g.grad(self).mat(n * len, d);
                  const bool nq = g.needs_grad(q), nk = g.needs_grad(k), nv = g.needs_grad(v);
                  for (Index b = 0; b < n; ++b) {
                    const auto qb = g.val(q).mat(n * len, d).middleRows(b * len, len);
                    const auto kb = g.val(k).mat(n * len, d).middleRows(b * len, len);
                    const auto vb = g.val(v).mat(n * len, d).middleRows(b * len, len);
                    for (Index h = 0; h < heads; ++h) {
                      const MatX<S>& a = (*attn)[static_cast<size_t>(b * heads + h)];
                      const auto dyh = dy.middleRows(b * len, len).middleCols(h * dk, dk);
                      if (nv)
                        g.grad(v)
                            .mat(n * len, d)
                            .middleRows(b * len, len)
                            .middleCols(h * dk, dk)
                            .noalias() += a.transpose() * dyh;
                      if (!nq && !nk) continue;
                      MatX<S> da(len, len);
                      da.noalias() = dyh * vb.middleCols(h * dk, dk).transpose();
                      // softmax rows backward
                      MatX<S> ds(len, len);
                      for (Index r = 0; r < len; ++r) {
                        const S dot = a.row(r).dot(da.row(r));
                        ds.row(r) = (a.row(r).array() * (da.row(r).array() - dot)).matrix();
                      }
                      ds *= sc;
                      if (nq)
                        g.grad(q)
                            .mat(n * len, d)
                            .middleRows(b * len, len)
                            .middleCols(h * dk, dk)
                            .noalias() += ds * kb.middleCols(h * dk, dk);
                      if (nk)
                        g.grad(k)
                            .mat(n * len, d)
                            .middleRows(b * len, len)
                            .middleCols(h * dk, dk)
                            .noalias() += ds.transpose() * qb.middleCols(h * dk, dk);
                    }
                  }
                });
}

template <class S>
struct AttentionWeights {
  Var<S> wq, bq, wk, bk, wv, bv, wo, bo;
};

// x [N,L,D] -> [N,L,D].
template <class S>
Var<S> multihead_self_attention(Var<S> x, const AttentionWeights<S>& wts, Index heads) {
  Graph<S>& g = *x.g;
  const Shape& xs = g.val(x).shape();
  require(xs.size() == 3, Errc::ShapeError, "attention wants [N,L,D]");
  const Index n = xs[0], len = xs[1], d = xs[2];
  require(heads > 0 && d % heads == 0, Errc::ShapeError, "attention dim not divisible by heads");
  Var<S> x2 = reshape(x, {n * len, d});
  Var<S> q = dense(x2, wts.wq, wts.bq);
  Var<S> k = dense(x2, wts.wk, wts.bk);
  Var<S> v = dense(x2, wts.wv, wts.bv);
  Var<S> core = attention_core(q, k, v, n, len, heads);
  Var<S> out = dense(core, wts.wo, wts.bo);
  return reshape(out, {n, len, d});
}

template <class S>
struct EncoderLayerWeights {
  AttentionWeights<S> attn;
  Var<S> ff1_w, ff1_b, ff2_w, ff2_b;
  Var<S> ln1_g, ln1_b, ln2_g, ln2_b;
};

// Post-norm transformer encoder layer: LN(x + MHA(x)) then LN(h + FF(h)).
template <class S>
Var<S> transformer_encoder_layer(Var<S> x, const EncoderLayerWeights<S>& wts, Index heads) {
  Var<S> h = layer_norm(add(x, multihead_self_attention(x, wts.attn, heads)), wts.ln1_g,
                        wts.ln1_b);
  Var<S> ff = dense(relu(dense(h, wts.ff1_w, wts.ff1_b)), wts.ff2_w, wts.ff2_b);
  return layer_norm(add(h, ff), wts.ln2_g, wts.ln2_b);
}

// ---------------------------------------------------------------------------
// reductions / losses
// ---------------------------------------------------------------------------

template <class S>
Var<S> sum_all(Var<S> x) {
  Graph<S>& g = *x.g;
  Tensor<S> out({1});
  out[0] = g.val(x).array().sum();
  return g.make(std::move(out), {x}, [&g, x](Var<S> self) {
    if (g.needs_grad(x)) g.grad(x).array() += g.grad(self)[0];
  });
}

template <class S>
Var<S> mean_all(Var<S> x) {
  Graph<S>& g = *x.g;
  const S inv = S(1) / static_cast<S>(g.val(x).size());
  Tensor<S> out({1});
  out[0] = g.val(x).array().sum() * inv;
  return g.make(std::move(out), {x}, [&g, x, inv](Var<S> self) {
    if (g.needs_grad(x)) g.grad(x).array() += g.grad(self)[0] * inv;
  });
}

// sum(x .* r) with fixed r; used to project op outputs to a scalar for
// finite-difference checks.
template <class S>
Var<S> weighted_sum(Var<S> x, Tensor<S> r) {
  Graph<S>& g = *x.g;
  require(g.val(x).same_shape(r), Errc::ShapeError, "weighted_sum shape mismatch");
  Tensor<S> out({1});
  out[0] = (g.val(x).array() * r.array()).sum();
  return g.make(std::move(out), {x}, [&g, x, r = std::move(r)](Var<S> self) {
    if (g.needs_grad(x)) g.grad(x).array() += g.grad(self)[0] * r.array();
  });
}

// Binary cross-entropy against a fixed target, predictions clamped to
// [1e-7, 1-1e-7] (gradient is zero outside the clamp).
template <class S>
Var<S> bce(Var<S> pred, Tensor<S> target) {
  Graph<S>& g = *pred.g;
  require(g.val(pred).same_shape(target), Errc::ShapeError, "bce shape mismatch");
  const S lo = S(1e-7), hi = S(1) - S(1e-7);
  const Index m = g.val(pred).size();
  auto pc = std::make_shared<ArrX<S>>(g.val(pred).array().max(lo).min(hi));
  Tensor<S> out({1});
  out[0] = -(target.array() * pc->log() + (S(1) - target.array()) * (S(1) - *pc).log()).mean();
  return g.make(std::move(out), {pred},
                [&g, pred, pc, target = std::move(target), lo, hi, m](Var<S> self) {
                  if (!g.needs_grad(pred)) return;
                  const S dl = g.grad(self)[0] / static_cast<S>(m);
                  auto in_range = (g.val(pred).array() >= lo && g.val(pred).array() <= hi)
                                      .template cast<S>();
                  g.grad(pred).array() +=
                      dl * in_range * (*pc - target.array()) / (*pc * (S(1) - *pc));
                });
}

template <class S>
Var<S> bce(Var<S> pred, S target_const) {
  Graph<S>& g = *pred.g;
  return bce(pred, Tensor<S>::full(g.val(pred).shape(), target_const));
}

// Mean over rows of (1 - Pearson r) between prediction rows and fixed target
// rows; rows are segments. Constant rows are rejected.
template <class S>
Var<S> cc_loss(Var<S> pred, Tensor<S> target, Index row_len) {
  Graph<S>& g = *pred.g;
  require(g.val(pred).same_shape(target), Errc::ShapeError, "cc_loss shape mismatch");
  const Index total = g.val(pred).size();
  require(row_len > 0 && total % row_len == 0, Errc::ShapeError, "cc_loss row length");
  const Index rows = total / row_len;
  const S tiny = S(1e-12);
  auto pm = g.val(pred).mat(rows, row_len);
  auto tm = target.mat(rows, row_len);
  S loss = S(0);
  for (Index r = 0; r < rows; ++r) {
    ArrX<S> pc = pm.row(r).transpose().array() - pm.row(r).mean();
    ArrX<S> tc = tm.row(r).transpose().array() - tm.row(r).mean();
    const S sp = (pc * pc).sum(), st = (tc * tc).sum();
    require(sp > tiny && st > tiny, Errc::DegenerateSegment, "cc_loss on constant segment");
    loss += S(1) - (pc * tc).sum() / std::sqrt(sp * st);
  }
  Tensor<S> out({1});
  out[0] = loss / static_cast<S>(rows);
  return g.make(std::move(out), {pred},
                [&g, pred, target = std::move(target), rows, row_len](Var<S> self) {
                  if (!g.needs_grad(pred)) return;
                  const S dl = g.grad(self)[0] / static_cast<S>(rows);
                  auto pm = g.val(pred).mat(rows, row_len);
                  auto tm = target.mat(rows, row_len);
                  auto dx = g.grad(pred).mat(rows, row_len);
                  for (Index r = 0; r < rows; ++r) {
                    ArrX<S> pc = pm.row(r).transpose().array() - pm.row(r).mean();
                    ArrX<S> tc = tm.row(r).transpose().array() - tm.row(r).mean();
                    const S sp = (pc * pc).sum(), st = (tc * tc).sum();
                    const S c = (pc * tc).sum();
                    const S denom = std::sqrt(sp * st);
                    // d(1-r)/dp = -(t~ - (C/Sp) p~)/denom, then center drops out
                    ArrX<S> grad_row = -(tc - (c / sp) * pc) / denom;
                    grad_row -= grad_row.mean();
                    dx.row(r) += (dl * grad_row).matrix().transpose();
                  }
                });
}

// Softmax cross-entropy on logits [N,C] against integer labels.
template <class S>
Var<S> cross_entropy(Var<S> logits, std::vector<int> labels) {
  Graph<S>& g = *logits.g;
  const Shape& s = g.val(logits).shape();
  require(s.size() == 2, Errc::ShapeError, "cross_entropy wants [N,C]");
  const Index n = s[0], c = s[1];
  require(static_cast<Index>(labels.size()) == n, Errc::ShapeError, "cross_entropy labels size");
  auto probs = std::make_shared<MatX<S>>(n, c);
  auto lm = g.val(logits).mat(n, c);
  S loss = S(0);
  for (Index r = 0; r < n; ++r) {
    const int y = labels[static_cast<size_t>(r)];
    require(y >= 0 && y < c, Errc::InvalidInput, "cross_entropy label out of range");
    ArrX<S> row = lm.row(r).transpose().array();
    row -= row.maxCoeff();
    row = row.exp();
    row /= row.sum();
    probs->row(r) = row.matrix().transpose();
    loss -= std::log(std::max(row[y], S(1e-30)));
  }
  Tensor<S> out({1});
  out[0] = loss / static_cast<S>(n);
  return g.make(std::move(out), {logits},
                [&g, logits, probs, labels = std::move(labels), n, c](Var<S> self) {
                  if (!g.needs_grad(logits)) return;
                  const S dl = g.grad(self)[0] / static_cast<S>(n);
                  auto dx = g.grad(logits).mat(n, c);
                  for (Index r = 0; r < n; ++r) {
                    dx.row(r) += dl * probs->row(r);
                    dx(r, labels[static_cast<size_t>(r)]) -= dl;
                  }
                });
}

}  // namespace atat
