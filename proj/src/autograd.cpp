#include "egopose/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_set>

#include "egopose/kernels.hpp"

namespace egopose::ag {

namespace {

int64_t rows_excluding_lastdim(const Shape& s) {
  int64_t r = 1;
  for (size_t i = 0; i + 1 < s.size(); ++i) r *= s[i];
  return r;
}

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

}  // namespace

void Node::accum_grad(const Tensor& g) {
  Tensor& dst = ensure_grad();
  kernels::axpy(dst.numel(), 1.0f, g.data(), dst.data());
}

Var::Var(Tensor value, bool requires_grad) {
  node_ = std::make_shared<Node>();
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var make_op(Tensor value, std::vector<NodePtr> parents, std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (auto& p : parents) {
    if (p && p->requires_grad) n->requires_grad = true;
  }
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return Var::from_node(std::move(n));
}

void backward(const Var& root) {
  EGOPOSE_CHECK(root.defined() && root.val().numel() == 1, "backward() needs a scalar root");
  if (!root.requires_grad()) return;

  // post-order DFS, then reverse sweep
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.push_back({root.node().get(), 0});
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* parent = node->parents[idx].get();
      ++idx;
      if (parent && parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.push_back({parent, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->ensure_grad().fill(1.0f);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->has_grad()) n->backward_fn(*n);
  }
}

// ---- elementwise ----

Var add(const Var& a, const Var& b) {
  EGOPOSE_CHECK(a.val().same_shape(b.val()), "add: shape mismatch");
  Tensor out(a.shape());
  kernels::vadd(out.numel(), a.val().data(), b.val().data(), out.data());
  return make_op(std::move(out), {a.node(), b.node()}, [](Node& self) {
    for (int i = 0; i < 2; ++i) {
      if (self.parents[i]->requires_grad) self.parents[i]->accum_grad(self.grad);
    }
  });
}

Var sub(const Var& a, const Var& b) {
  EGOPOSE_CHECK(a.val().same_shape(b.val()), "sub: shape mismatch");
  Tensor out(a.shape());
  const float* pa = a.val().data();
  const float* pb = b.val().data();
  float* po = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] - pb[i];
  return make_op(std::move(out), {a.node(), b.node()}, [](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->accum_grad(self.grad);
    if (self.parents[1]->requires_grad) {
      Tensor& dst = self.parents[1]->ensure_grad();
      kernels::axpy(dst.numel(), -1.0f, self.grad.data(), dst.data());
    }
  });
}

Var mul(const Var& a, const Var& b) {
  EGOPOSE_CHECK(a.val().same_shape(b.val()), "mul: shape mismatch");
  Tensor out(a.shape());
  kernels::vmul(out.numel(), a.val().data(), b.val().data(), out.data());
  return make_op(std::move(out), {a.node(), b.node()}, [](Node& self) {
    const int64_t n = self.grad.numel();
    if (self.parents[0]->requires_grad) {
      Tensor t(self.grad.shape());
      kernels::vmul(n, self.grad.data(), self.parents[1]->value.data(), t.data());
      self.parents[0]->accum_grad(t);
    }
    if (self.parents[1]->requires_grad) {
      Tensor t(self.grad.shape());
      kernels::vmul(n, self.grad.data(), self.parents[0]->value.data(), t.data());
      self.parents[1]->accum_grad(t);
    }
  });
}

Var scale(const Var& a, float s) {
  Tensor out = a.val();
  kernels::scale(out.numel(), s, out.data());
  return make_op(std::move(out), {a.node()}, [s](Node& self) {
    Tensor& dst = self.parents[0]->ensure_grad();
    kernels::axpy(dst.numel(), s, self.grad.data(), dst.data());
  });
}

Var add_scalar(const Var& a, float s) {
  Tensor out = a.val();
  float* p = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) p[i] += s;
  return make_op(std::move(out), {a.node()},
                 [](Node& self) { self.parents[0]->accum_grad(self.grad); });
}

// ---- dense algebra ----

Var affine_lastdim(const Var& x, const Var& w, const Var& b) {
  const Shape& xs = x.shape();
  EGOPOSE_CHECK(!xs.empty() && w.shape().size() == 2, "affine: bad ranks");
  const int64_t din = xs.back();
  EGOPOSE_CHECK(w.shape()[0] == din, "affine: input dim mismatch");
  const int64_t dout = w.shape()[1];
  const int64_t rows = rows_excluding_lastdim(xs);

  Shape out_shape = xs;
  out_shape.back() = dout;
  Tensor out(out_shape);
  kernels::sgemm_nn(static_cast<int>(rows), static_cast<int>(dout), static_cast<int>(din), 1.0f,
                    x.val().data(), static_cast<int>(din), w.val().data(), static_cast<int>(dout),
                    0.0f, out.data(), static_cast<int>(dout));
  if (b.defined()) {
    EGOPOSE_CHECK(b.val().numel() == dout, "affine: bias dim mismatch");
    float* po = out.data();
    const float* pb = b.val().data();
    for (int64_t r = 0; r < rows; ++r) {
      kernels::axpy(dout, 1.0f, pb, po + r * dout);
    }
  }

  std::vector<NodePtr> parents = {x.node(), w.node()};
  if (b.defined()) parents.push_back(b.node());
  return make_op(std::move(out), std::move(parents), [rows, din, dout](Node& self) {
    const float* gy = self.grad.data();
    Node* xn = self.parents[0].get();
    Node* wn = self.parents[1].get();
    if (xn->requires_grad) {
      Tensor& gx = xn->ensure_grad();
      kernels::sgemm_nt(static_cast<int>(rows), static_cast<int>(din), static_cast<int>(dout),
                        1.0f, gy, static_cast<int>(dout), wn->value.data(), static_cast<int>(dout),
                        1.0f, gx.data(), static_cast<int>(din));
    }
    if (wn->requires_grad) {
      Tensor& gw = wn->ensure_grad();
      kernels::sgemm_tn(static_cast<int>(din), static_cast<int>(dout), static_cast<int>(rows),
                        1.0f, xn->value.data(), static_cast<int>(din), gy, static_cast<int>(dout),
                        1.0f, gw.data(), static_cast<int>(dout));
    }
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      Tensor& gb = self.parents[2]->ensure_grad();
      for (int64_t r = 0; r < rows; ++r) {
        kernels::axpy(dout, 1.0f, gy + r * dout, gb.data());
      }
    }
  });
}

Var bmm(const Var& a, const Var& b, bool trans_b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  EGOPOSE_CHECK(as.size() == 3 && bs.size() == 3 && as[0] == bs[0], "bmm: bad shapes");
  const int64_t g = as[0], m = as[1], k = as[2];
  const int64_t n = trans_b ? bs[1] : bs[2];
  EGOPOSE_CHECK(trans_b ? bs[2] == k : bs[1] == k, "bmm: inner dim mismatch");

  Tensor out({g, m, n});
  for (int64_t i = 0; i < g; ++i) {
    const float* pa = a.val().data() + i * m * k;
    const float* pb = b.val().data() + i * (trans_b ? n * k : k * n);
    float* pc = out.data() + i * m * n;
    if (trans_b) {
      kernels::sgemm_nt(static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), 1.0f, pa,
                        static_cast<int>(k), pb, static_cast<int>(k), 0.0f, pc,
                        static_cast<int>(n));
    } else {
      kernels::sgemm_nn(static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), 1.0f, pa,
                        static_cast<int>(k), pb, static_cast<int>(n), 0.0f, pc,
                        static_cast<int>(n));
    }
  }

  return make_op(std::move(out), {a.node(), b.node()}, [g, m, k, n, trans_b](Node& self) {
    Node* an = self.parents[0].get();
    Node* bn = self.parents[1].get();
    const int mi = static_cast<int>(m), ki = static_cast<int>(k), ni = static_cast<int>(n);
    for (int64_t i = 0; i < g; ++i) {
      const float* gy = self.grad.data() + i * m * n;
      const float* pa = an->value.data() + i * m * k;
      const float* pb = bn->value.data() + i * (trans_b ? n * k : k * n);
      if (an->requires_grad) {
        float* ga = an->ensure_grad().data() + i * m * k;
        if (trans_b) {
          kernels::sgemm_nn(mi, ki, ni, 1.0f, gy, ni, pb, ki, 1.0f, ga, ki);
        } else {
          kernels::sgemm_nt(mi, ki, ni, 1.0f, gy, ni, pb, ni, 1.0f, ga, ki);
        }
      }
      if (bn->requires_grad) {
        float* gb = bn->ensure_grad().data() + i * (trans_b ? n * k : k * n);
        if (trans_b) {
          kernels::sgemm_tn(ni, ki, mi, 1.0f, gy, ni, pa, ki, 1.0f, gb, ki);
        } else {
          kernels::sgemm_tn(ki, ni, mi, 1.0f, pa, ki, gy, ni, 1.0f, gb, ni);
        }
      }
    }
  });
}

// ---- convolution ----

namespace {

struct ConvDims {
  int64_t n, ci, h, w, co, kh, kw, oh, ow;
  int stride, pad;
};

void im2col(const float* img, const ConvDims& d, float* col) {
  // col is (ci*kh*kw, oh*ow)
  const int64_t ohw = d.oh * d.ow;
  for (int64_t c = 0; c < d.ci; ++c) {
    for (int64_t ky = 0; ky < d.kh; ++ky) {
      for (int64_t kx = 0; kx < d.kw; ++kx) {
        float* crow = col + ((c * d.kh + ky) * d.kw + kx) * ohw;
        for (int64_t oy = 0; oy < d.oh; ++oy) {
          const int64_t iy = oy * d.stride - d.pad + ky;
          if (iy < 0 || iy >= d.h) {
            std::memset(crow + oy * d.ow, 0, sizeof(float) * static_cast<size_t>(d.ow));
            continue;
          }
          const float* irow = img + (c * d.h + iy) * d.w;
          for (int64_t ox = 0; ox < d.ow; ++ox) {
            const int64_t ix = ox * d.stride - d.pad + kx;
            crow[oy * d.ow + ox] = (ix >= 0 && ix < d.w) ? irow[ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im_accum(const float* col, const ConvDims& d, float* img) {
  const int64_t ohw = d.oh * d.ow;
  for (int64_t c = 0; c < d.ci; ++c) {
    for (int64_t ky = 0; ky < d.kh; ++ky) {
      for (int64_t kx = 0; kx < d.kw; ++kx) {
        const float* crow = col + ((c * d.kh + ky) * d.kw + kx) * ohw;
        for (int64_t oy = 0; oy < d.oh; ++oy) {
          const int64_t iy = oy * d.stride - d.pad + ky;
          if (iy < 0 || iy >= d.h) continue;
          float* irow = img + (c * d.h + iy) * d.w;
          for (int64_t ox = 0; ox < d.ow; ++ox) {
            const int64_t ix = ox * d.stride - d.pad + kx;
            if (ix >= 0 && ix < d.w) irow[ix] += crow[oy * d.ow + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  EGOPOSE_CHECK(xs.size() == 4 && ws.size() == 4, "conv2d: expects (n,c,h,w) and (co,ci,kh,kw)");
  EGOPOSE_CHECK(xs[1] == ws[1], "conv2d: channel mismatch");
  ConvDims d;
  d.n = xs[0];
  d.ci = xs[1];
  d.h = xs[2];
  d.w = xs[3];
  d.co = ws[0];
  d.kh = ws[2];
  d.kw = ws[3];
  d.stride = stride;
  d.pad = pad;
  d.oh = (d.h + 2 * pad - d.kh) / stride + 1;
  d.ow = (d.w + 2 * pad - d.kw) / stride + 1;
  EGOPOSE_CHECK(d.oh >= 1 && d.ow >= 1, "conv2d: output would be empty");

  const int64_t ckk = d.ci * d.kh * d.kw;
  const int64_t ohw = d.oh * d.ow;
  Tensor out({d.n, d.co, d.oh, d.ow});
  Tensor col({ckk, ohw});
  for (int64_t i = 0; i < d.n; ++i) {
    im2col(x.val().data() + i * d.ci * d.h * d.w, d, col.data());
    float* po = out.data() + i * d.co * ohw;
    kernels::sgemm_nn(static_cast<int>(d.co), static_cast<int>(ohw), static_cast<int>(ckk), 1.0f,
                      w.val().data(), static_cast<int>(ckk), col.data(), static_cast<int>(ohw),
                      0.0f, po, static_cast<int>(ohw));
    if (b.defined()) {
      const float* pb = b.val().data();
      for (int64_t c = 0; c < d.co; ++c) {
        float* prow = po + c * ohw;
        for (int64_t j = 0; j < ohw; ++j) prow[j] += pb[c];
      }
    }
  }

  std::vector<NodePtr> parents = {x.node(), w.node()};
  if (b.defined()) parents.push_back(b.node());
  return make_op(std::move(out), std::move(parents), [d, ckk, ohw](Node& self) {
    Node* xn = self.parents[0].get();
    Node* wn = self.parents[1].get();
    Tensor col({ckk, ohw});
    Tensor dcol({ckk, ohw});
    for (int64_t i = 0; i < d.n; ++i) {
      const float* gy = self.grad.data() + i * d.co * ohw;
      if (wn->requires_grad) {
        im2col(xn->value.data() + i * d.ci * d.h * d.w, d, col.data());
        kernels::sgemm_nt(static_cast<int>(d.co), static_cast<int>(ckk), static_cast<int>(ohw),
                          1.0f, gy, static_cast<int>(ohw), col.data(), static_cast<int>(ohw), 1.0f,
                          wn->ensure_grad().data(), static_cast<int>(ckk));
      }
      if (xn->requires_grad) {
        kernels::sgemm_tn(static_cast<int>(ckk), static_cast<int>(ohw), static_cast<int>(d.co),
                          1.0f, wn->value.data(), static_cast<int>(ckk), gy,
                          static_cast<int>(ohw), 0.0f, dcol.data(), static_cast<int>(ohw));
        col2im_accum(dcol.data(), d, xn->ensure_grad().data() + i * d.ci * d.h * d.w);
      }
      if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
        float* gb = self.parents[2]->ensure_grad().data();
        for (int64_t c = 0; c < d.co; ++c) {
          gb[c] += static_cast<float>(kernels::reduce_sum(ohw, gy + c * ohw));
        }
      }
    }
  });
}

// ---- resize / pooling ----

Var bilinear_resize(const Var& x, int out_h, int out_w) {
  const Shape& xs = x.shape();
  EGOPOSE_CHECK(xs.size() == 4, "bilinear_resize: expects (n,c,h,w)");
  const int64_t n = xs[0], c = xs[1], h = xs[2], w = xs[3];
  if (h == out_h && w == out_w) {
    Tensor out = x.val();
    return make_op(std::move(out), {x.node()},
                   [](Node& self) { self.parents[0]->accum_grad(self.grad); });
  }

  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  // precompute sampling taps (half-pixel centers, clamped)
  std::vector<int> y0(out_h), y1(out_h);
  std::vector<float> fy(out_h);
  for (int oy = 0; oy < out_h; ++oy) {
    double src = (oy + 0.5) * sy - 0.5;
    src = std::max(0.0, std::min(src, static_cast<double>(h - 1)));
    y0[oy] = static_cast<int>(src);
    y1[oy] = std::min<int>(y0[oy] + 1, static_cast<int>(h - 1));
    fy[oy] = static_cast<float>(src - y0[oy]);
  }
  std::vector<int> x0(out_w), x1(out_w);
  std::vector<float> fx(out_w);
  for (int ox = 0; ox < out_w; ++ox) {
    double src = (ox + 0.5) * sx - 0.5;
    src = std::max(0.0, std::min(src, static_cast<double>(w - 1)));
    x0[ox] = static_cast<int>(src);
    x1[ox] = std::min<int>(x0[ox] + 1, static_cast<int>(w - 1));
    fx[ox] = static_cast<float>(src - x0[ox]);
  }

  Tensor out({n, c, out_h, out_w});
  const int64_t planes = n * c;
  for (int64_t p = 0; p < planes; ++p) {
    const float* src = x.val().data() + p * h * w;
    float* dst = out.data() + p * static_cast<int64_t>(out_h) * out_w;
    for (int oy = 0; oy < out_h; ++oy) {
      const float* r0 = src + static_cast<int64_t>(y0[oy]) * w;
      const float* r1 = src + static_cast<int64_t>(y1[oy]) * w;
      const float wy = fy[oy];
      for (int ox = 0; ox < out_w; ++ox) {
        const float wx = fx[ox];
        const float top = r0[x0[ox]] * (1.0f - wx) + r0[x1[ox]] * wx;
        const float bot = r1[x0[ox]] * (1.0f - wx) + r1[x1[ox]] * wx;
        dst[static_cast<int64_t>(oy) * out_w + ox] = top * (1.0f - wy) + bot * wy;
      }
    }
  }

  return make_op(std::move(out), {x.node()},
                 [planes, h, w, out_h, out_w, y0, y1, fy, x0, x1, fx](Node& self) {
                   Tensor& gx = self.parents[0]->ensure_grad();
                   for (int64_t p = 0; p < planes; ++p) {
                     const float* gy = self.grad.data() + p * static_cast<int64_t>(out_h) * out_w;
                     float* dst = gx.data() + p * h * w;
                     for (int oy = 0; oy < out_h; ++oy) {
                       const float wy = fy[oy];
                       float* r0 = dst + static_cast<int64_t>(y0[oy]) * w;
                       float* r1 = dst + static_cast<int64_t>(y1[oy]) * w;
                       for (int ox = 0; ox < out_w; ++ox) {
                         const float wx = fx[ox];
                         const float g = gy[static_cast<int64_t>(oy) * out_w + ox];
                         r0[x0[ox]] += g * (1.0f - wx) * (1.0f - wy);
                         r0[x1[ox]] += g * wx * (1.0f - wy);
                         r1[x0[ox]] += g * (1.0f - wx) * wy;
                         r1[x1[ox]] += g * wx * wy;
                       }
                     }
                   }
                 });
}

Var global_avg_pool(const Var& x) {
  const Shape& xs = x.shape();
  EGOPOSE_CHECK(xs.size() == 4, "global_avg_pool: expects (n,c,h,w)");
  const int64_t n = xs[0], c = xs[1], hw = xs[2] * xs[3];
  Tensor out({n, c});
  for (int64_t i = 0; i < n * c; ++i) {
    out.data()[i] = static_cast<float>(kernels::reduce_sum(hw, x.val().data() + i * hw) / hw);
  }
  return make_op(std::move(out), {x.node()}, [n, c, hw](Node& self) {
    Tensor& gx = self.parents[0]->ensure_grad();
    const float inv = 1.0f / static_cast<float>(hw);
    for (int64_t i = 0; i < n * c; ++i) {
      const float g = self.grad.data()[i] * inv;
      float* dst = gx.data() + i * hw;
      for (int64_t j = 0; j < hw; ++j) dst[j] += g;
    }
  });
}

// ---- nonlinearities ----

Var leaky_relu(const Var& x, float slope) {
  Tensor out(x.shape());
  kernels::leaky_relu_fwd(out.numel(), slope, x.val().data(), out.data());
  return make_op(std::move(out), {x.node()}, [slope](Node& self) {
    Node* xn = self.parents[0].get();
    kernels::leaky_relu_bwd(self.grad.numel(), slope, xn->value.data(), self.grad.data(),
                            xn->ensure_grad().data());
  });
}

Var gelu(const Var& x) {
  Tensor out(x.shape());
  const float* px = x.val().data();
  float* po = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) {
    const double v = px[i];
    po[i] = static_cast<float>(0.5 * v * (1.0 + std::erf(v * kInvSqrt2)));
  }
  return make_op(std::move(out), {x.node()}, [](Node& self) {
    Node* xn = self.parents[0].get();
    Tensor& gx = xn->ensure_grad();
    const float* px = xn->value.data();
    const float* gy = self.grad.data();
    float* pgx = gx.data();
    for (int64_t i = 0; i < self.grad.numel(); ++i) {
      const double v = px[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      pgx[i] += gy[i] * static_cast<float>(cdf + v * pdf);
    }
  });
}

Var sigmoid(const Var& x) {
  Tensor out(x.shape());
  const float* px = x.val().data();
  float* po = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) {
    const double v = px[i];
    po[i] = static_cast<float>(v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                        : std::exp(v) / (1.0 + std::exp(v)));
  }
  return make_op(std::move(out), {x.node()}, [](Node& self) {
    Tensor& gx = self.parents[0]->ensure_grad();
    const float* y = self.value.data();
    const float* gy = self.grad.data();
    float* pgx = gx.data();
    for (int64_t i = 0; i < self.grad.numel(); ++i) {
      pgx[i] += gy[i] * y[i] * (1.0f - y[i]);
    }
  });
}

// ---- softmax ----

Var masked_softmax(const Var& scores, const Tensor& mask) {
  const Shape& ss = scores.shape();
  EGOPOSE_CHECK(ss.size() >= 2, "masked_softmax: scores must be at least rank 2");
  const int64_t n = ss.back();
  const int64_t m = ss[ss.size() - 2];
  const int64_t rows = rows_excluding_lastdim(ss);
  const int64_t groups = rows / m;  // leading dims, e.g. batch*heads
  int64_t mask_groups = 0;
  if (mask.defined()) {
    EGOPOSE_CHECK(mask.numel() % (m * n) == 0, "masked_softmax: mask must be (..., M, N)");
    mask_groups = mask.numel() / (m * n);
    EGOPOSE_CHECK(groups % mask_groups == 0,
                  "masked_softmax: mask groups must divide score groups");
  }
  // heads replicate within a group: scores group g maps to mask group
  // g / (groups / mask_groups)
  const int64_t heads = mask.defined() ? groups / mask_groups : 1;

  Tensor out(ss);
  const float* ps = scores.val().data();
  float* po = out.data();
  for (int64_t r = 0; r < rows; ++r) {
    const float* srow = ps + r * n;
    float* orow = po + r * n;
    const float* mrow =
        mask.defined() ? mask.data() + (((r / m) / heads) * m + (r % m)) * n : nullptr;
    float max_v = -std::numeric_limits<float>::infinity();
    for (int64_t j = 0; j < n; ++j) {
      if (!mrow || mrow[j] > 0.5f) max_v = std::max(max_v, srow[j]);
    }
    if (max_v == -std::numeric_limits<float>::infinity()) {
      std::memset(orow, 0, sizeof(float) * static_cast<size_t>(n));
      continue;
    }
    double denom = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      if (!mrow || mrow[j] > 0.5f) {
        const double e = std::exp(static_cast<double>(srow[j]) - max_v);
        orow[j] = static_cast<float>(e);
        denom += e;
      } else {
        orow[j] = 0.0f;
      }
    }
    const float inv = static_cast<float>(1.0 / denom);
    for (int64_t j = 0; j < n; ++j) orow[j] *= inv;
  }

  return make_op(std::move(out), {scores.node()}, [rows, n](Node& self) {
    Tensor& gx = self.parents[0]->ensure_grad();
    const float* p = self.value.data();
    const float* gy = self.grad.data();
    float* pgx = gx.data();
    for (int64_t r = 0; r < rows; ++r) {
      const float* prow = p + r * n;
      const float* grow = gy + r * n;
      double dot = 0.0;
      for (int64_t j = 0; j < n; ++j) dot += static_cast<double>(prow[j]) * grow[j];
      float* xrow = pgx + r * n;
      for (int64_t j = 0; j < n; ++j) {
        xrow[j] += prow[j] * (grow[j] - static_cast<float>(dot));
      }
    }
  });
}

// ---- normalization ----

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, float eps) {
  const Shape& xs = x.shape();
  const int64_t d = xs.back();
  const int64_t rows = rows_excluding_lastdim(xs);
  EGOPOSE_CHECK(gamma.val().numel() == d && beta.val().numel() == d, "layer_norm: param dims");

  Tensor out(xs);
  std::vector<float> mean(rows), inv_std(rows);
  const float* px = x.val().data();
  const float* pg = gamma.val().data();
  const float* pb = beta.val().data();
  float* po = out.data();
  for (int64_t r = 0; r < rows; ++r) {
    const float* xrow = px + r * d;
    const double mu = kernels::reduce_sum(d, xrow) / d;
    double var = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      const double dv = xrow[j] - mu;
      var += dv * dv;
    }
    var /= d;
    const double inv = 1.0 / std::sqrt(var + eps);
    mean[r] = static_cast<float>(mu);
    inv_std[r] = static_cast<float>(inv);
    float* orow = po + r * d;
    for (int64_t j = 0; j < d; ++j) {
      orow[j] = static_cast<float>((xrow[j] - mu) * inv) * pg[j] + pb[j];
    }
  }

  return make_op(std::move(out), {x.node(), gamma.node(), beta.node()},
                 [rows, d, mean, inv_std](Node& self) {
                   Node* xn = self.parents[0].get();
                   Node* gn = self.parents[1].get();
                   Node* bn = self.parents[2].get();
                   const float* px = xn->value.data();
                   const float* pg = gn->value.data();
                   const float* gy = self.grad.data();
                   std::vector<float> xhat(d), dxhat(d);
                   for (int64_t r = 0; r < rows; ++r) {
                     const float* xrow = px + r * d;
                     const float* grow = gy + r * d;
                     const float mu = mean[r];
                     const float inv = inv_std[r];
                     double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                     for (int64_t j = 0; j < d; ++j) {
                       xhat[j] = (xrow[j] - mu) * inv;
                       dxhat[j] = grow[j] * pg[j];
                       sum_dxhat += dxhat[j];
                       sum_dxhat_xhat += static_cast<double>(dxhat[j]) * xhat[j];
                     }
                     if (gn->requires_grad) {
                       float* gg = gn->ensure_grad().data();
                       for (int64_t j = 0; j < d; ++j) gg[j] += grow[j] * xhat[j];
                     }
                     if (bn->requires_grad) {
                       float* gb = bn->ensure_grad().data();
                       for (int64_t j = 0; j < d; ++j) gb[j] += grow[j];
                     }
                     if (xn->requires_grad) {
                       float* gx = xn->ensure_grad().data() + r * d;
                       const float c1 = static_cast<float>(sum_dxhat / d);
                       const float c2 = static_cast<float>(sum_dxhat_xhat / d);
                       for (int64_t j = 0; j < d; ++j) {
                         gx[j] += inv * (dxhat[j] - c1 - xhat[j] * c2);
                       }
                     }
                   }
                 });
}

Var batch_norm1d(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
                 Tensor& running_var, bool training, float momentum, float eps) {
  const Shape& xs = x.shape();
  EGOPOSE_CHECK(xs.size() == 2, "batch_norm1d: expects (n,c)");
  const int64_t n = xs[0], c = xs[1];
  EGOPOSE_CHECK(gamma.val().numel() == c && running_mean.numel() == c, "batch_norm1d: dims");

  std::vector<float> mean(c), inv_std(c);
  const float* px = x.val().data();
  if (training) {
    for (int64_t j = 0; j < c; ++j) {
      double mu = 0.0;
      for (int64_t i = 0; i < n; ++i) mu += px[i * c + j];
      mu /= n;
      double var = 0.0;
      for (int64_t i = 0; i < n; ++i) {
        const double dv = px[i * c + j] - mu;
        var += dv * dv;
      }
      var /= n;
      mean[j] = static_cast<float>(mu);
      inv_std[j] = static_cast<float>(1.0 / std::sqrt(var + eps));
      running_mean.data()[j] =
          (1.0f - momentum) * running_mean.data()[j] + momentum * static_cast<float>(mu);
      running_var.data()[j] =
          (1.0f - momentum) * running_var.data()[j] + momentum * static_cast<float>(var);
    }
  } else {
    for (int64_t j = 0; j < c; ++j) {
      mean[j] = running_mean.data()[j];
      inv_std[j] = static_cast<float>(1.0 / std::sqrt(running_var.data()[j] + eps));
    }
  }

  Tensor out(xs);
  const float* pg = gamma.val().data();
  const float* pb = beta.val().data();
  float* po = out.data();
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < c; ++j) {
      po[i * c + j] = (px[i * c + j] - mean[j]) * inv_std[j] * pg[j] + pb[j];
    }
  }

  return make_op(std::move(out), {x.node(), gamma.node(), beta.node()},
                 [n, c, mean, inv_std, training](Node& self) {
                   Node* xn = self.parents[0].get();
                   Node* gn = self.parents[1].get();
                   Node* bn = self.parents[2].get();
                   const float* px = xn->value.data();
                   const float* pg = gn->value.data();
                   const float* gy = self.grad.data();
                   for (int64_t j = 0; j < c; ++j) {
                     const float mu = mean[j];
                     const float inv = inv_std[j];
                     double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0, sum_gy = 0.0, sum_gy_xhat = 0.0;
                     for (int64_t i = 0; i < n; ++i) {
                       const float xhat = (px[i * c + j] - mu) * inv;
                       const float g = gy[i * c + j];
                       sum_gy += g;
                       sum_gy_xhat += static_cast<double>(g) * xhat;
                       const float dxh = g * pg[j];
                       sum_dxhat += dxh;
                       sum_dxhat_xhat += static_cast<double>(dxh) * xhat;
                     }
                     if (gn->requires_grad) gn->ensure_grad().data()[j] += static_cast<float>(sum_gy_xhat);
                     if (bn->requires_grad) bn->ensure_grad().data()[j] += static_cast<float>(sum_gy);
                     if (xn->requires_grad) {
                       float* gx = xn->ensure_grad().data();
                       if (training) {
                         const float c1 = static_cast<float>(sum_dxhat / n);
                         const float c2 = static_cast<float>(sum_dxhat_xhat / n);
                         for (int64_t i = 0; i < n; ++i) {
                           const float xhat = (px[i * c + j] - mu) * inv;
                           const float dxh = gy[i * c + j] * pg[j];
                           gx[i * c + j] += inv * (dxh - c1 - xhat * c2);
                         }
                       } else {
                         for (int64_t i = 0; i < n; ++i) {
                           gx[i * c + j] += gy[i * c + j] * pg[j] * inv;
                         }
                       }
                     }
                   }
                 });
}

Var dropout(const Var& x, float p, bool training, std::mt19937_64& rng) {
  if (!training || p <= 0.0f) {
    Tensor out = x.val();
    return make_op(std::move(out), {x.node()},
                   [](Node& self) { self.parents[0]->accum_grad(self.grad); });
  }
  EGOPOSE_CHECK(p < 1.0f, "dropout: p must be < 1");
  const float keep = 1.0f - p;
  const float inv_keep = 1.0f / keep;
  std::uniform_real_distribution<float> uni(0.0f, 1.0f);
  Tensor mask(x.shape());
  Tensor out(x.shape());
  const float* px = x.val().data();
  float* pm = mask.data();
  float* po = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) {
    pm[i] = uni(rng) < keep ? inv_keep : 0.0f;
    po[i] = px[i] * pm[i];
  }
  return make_op(std::move(out), {x.node()}, [mask = std::move(mask)](Node& self) {
    Tensor t(self.grad.shape());
    kernels::vmul(t.numel(), self.grad.data(), mask.data(), t.data());
    self.parents[0]->accum_grad(t);
  });
}

// ---- shape ops ----

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.val().reshaped(std::move(shape));
  return make_op(std::move(out), {x.node()}, [](Node& self) {
    self.parents[0]->accum_grad(self.grad.reshaped(self.parents[0]->value.shape()));
  });
}

namespace {

std::vector<int64_t> strides_of(const Shape& s) {
  std::vector<int64_t> st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * s[i + 1];
  return st;
}

Tensor permute_tensor(const Tensor& in, const std::vector<int>& dims) {
  const Shape& is = in.shape();
  Shape os(is.size());
  for (size_t i = 0; i < dims.size(); ++i) os[i] = is[dims[i]];
  Tensor out(os);
  const auto in_strides = strides_of(is);
  std::vector<int64_t> map(dims.size());
  for (size_t i = 0; i < dims.size(); ++i) map[i] = in_strides[dims[i]];
  const int64_t total = out.numel();
  const int rank = static_cast<int>(os.size());
  std::vector<int64_t> coord(rank, 0);
  const float* pi = in.data();
  float* po = out.data();
  for (int64_t o = 0; o < total; ++o) {
    int64_t in_off = 0;
    for (int i = 0; i < rank; ++i) in_off += coord[i] * map[i];
    po[o] = pi[in_off];
    for (int i = rank - 1; i >= 0; --i) {
      if (++coord[i] < os[i]) break;
      coord[i] = 0;
    }
  }
  return out;
}

}  // namespace

Var permute(const Var& x, const std::vector<int>& dims) {
  EGOPOSE_CHECK(dims.size() == x.shape().size(), "permute: rank mismatch");
  Tensor out = permute_tensor(x.val(), dims);
  std::vector<int> inverse(dims.size());
  for (size_t i = 0; i < dims.size(); ++i) inverse[dims[i]] = static_cast<int>(i);
  return make_op(std::move(out), {x.node()}, [inverse](Node& self) {
    self.parents[0]->accum_grad(permute_tensor(self.grad, inverse));
  });
}

Var concat_lastdim(const Var& a, const Var& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  EGOPOSE_CHECK(as.size() == bs.size(), "concat: rank mismatch");
  for (size_t i = 0; i + 1 < as.size(); ++i) {
    EGOPOSE_CHECK(as[i] == bs[i], "concat: leading dims mismatch");
  }
  const int64_t da = as.back(), db = bs.back();
  const int64_t rows = rows_excluding_lastdim(as);
  Shape os = as;
  os.back() = da + db;
  Tensor out(os);
  const float* pa = a.val().data();
  const float* pb = b.val().data();
  float* po = out.data();
  for (int64_t r = 0; r < rows; ++r) {
    std::memcpy(po + r * (da + db), pa + r * da, sizeof(float) * static_cast<size_t>(da));
    std::memcpy(po + r * (da + db) + da, pb + r * db, sizeof(float) * static_cast<size_t>(db));
  }
  return make_op(std::move(out), {a.node(), b.node()}, [rows, da, db](Node& self) {
    const float* gy = self.grad.data();
    if (self.parents[0]->requires_grad) {
      Tensor& ga = self.parents[0]->ensure_grad();
      for (int64_t r = 0; r < rows; ++r) {
        kernels::axpy(da, 1.0f, gy + r * (da + db), ga.data() + r * da);
      }
    }
    if (self.parents[1]->requires_grad) {
      Tensor& gb = self.parents[1]->ensure_grad();
      for (int64_t r = 0; r < rows; ++r) {
        kernels::axpy(db, 1.0f, gy + r * (da + db) + da, gb.data() + r * db);
      }
    }
  });
}

Var tile_newaxis(const Var& x, int axis, int64_t count) {
  const Shape& xs = x.shape();
  EGOPOSE_CHECK(axis >= 0 && axis <= static_cast<int>(xs.size()), "tile_newaxis: bad axis");
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= xs[i];
  for (size_t i = axis; i < xs.size(); ++i) inner *= xs[i];
  Shape os;
  os.reserve(xs.size() + 1);
  for (int i = 0; i < axis; ++i) os.push_back(xs[i]);
  os.push_back(count);
  for (size_t i = axis; i < xs.size(); ++i) os.push_back(xs[i]);

  Tensor out(os);
  const float* px = x.val().data();
  float* po = out.data();
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t t = 0; t < count; ++t) {
      std::memcpy(po + (o * count + t) * inner, px + o * inner,
                  sizeof(float) * static_cast<size_t>(inner));
    }
  }
  return make_op(std::move(out), {x.node()}, [outer, count, inner](Node& self) {
    Tensor& gx = self.parents[0]->ensure_grad();
    const float* gy = self.grad.data();
    for (int64_t o = 0; o < outer; ++o) {
      for (int64_t t = 0; t < count; ++t) {
        kernels::axpy(inner, 1.0f, gy + (o * count + t) * inner, gx.data() + o * inner);
      }
    }
  });
}

Var mul_rowmask(const Var& x, const Tensor& mask) {
  const Shape& xs = x.shape();
  const int64_t d = xs.back();
  const int64_t rows = rows_excluding_lastdim(xs);
  EGOPOSE_CHECK(mask.numel() == rows, "mul_rowmask: mask size mismatch");
  Tensor out(xs);
  const float* px = x.val().data();
  const float* pm = mask.data();
  float* po = out.data();
  for (int64_t r = 0; r < rows; ++r) {
    const float m = pm[r];
    for (int64_t j = 0; j < d; ++j) po[r * d + j] = px[r * d + j] * m;
  }
  return make_op(std::move(out), {x.node()}, [mask, rows, d](Node& self) {
    Tensor& gx = self.parents[0]->ensure_grad();
    const float* gy = self.grad.data();
    for (int64_t r = 0; r < rows; ++r) {
      kernels::axpy(d, mask.data()[r], gy + r * d, gx.data() + r * d);
    }
  });
}

// ---- reductions ----

Var sum_all(const Var& x) {
  Tensor out = Tensor::scalar(static_cast<float>(kernels::reduce_sum(x.val().numel(), x.val().data())));
  return make_op(std::move(out), {x.node()}, [](Node& self) {
    Tensor& gx = self.parents[0]->ensure_grad();
    const float g = self.grad.data()[0];
    float* p = gx.data();
    for (int64_t i = 0; i < gx.numel(); ++i) p[i] += g;
  });
}

Var mean_all(const Var& x) {
  const int64_t n = x.val().numel();
  Tensor out = Tensor::scalar(static_cast<float>(kernels::reduce_sum(n, x.val().data()) / n));
  return make_op(std::move(out), {x.node()}, [n](Node& self) {
    Tensor& gx = self.parents[0]->ensure_grad();
    const float g = self.grad.data()[0] / static_cast<float>(n);
    float* p = gx.data();
    for (int64_t i = 0; i < n; ++i) p[i] += g;
  });
}

Tensor finite_diff(const std::function<float(const Tensor&)>& f, const Tensor& x, float h) {
  Tensor grad(x.shape());
  Tensor probe = x;
  for (int64_t i = 0; i < x.numel(); ++i) {
    const float orig = probe.data()[i];
    probe.data()[i] = orig + h;
    const float fp = f(probe);
    probe.data()[i] = orig - h;
    const float fm = f(probe);
    probe.data()[i] = orig;
    grad.data()[i] = (fp - fm) / (2.0f * h);
  }
  return grad;
}

}  // namespace egopose::ag
