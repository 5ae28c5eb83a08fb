#include "handreg/autodiff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "handreg/common/error.hpp"
#include "handreg/simd/kernels.hpp"

namespace handreg::ad {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

[[noreturn]] void shape_error(std::string_view op, const Shape& a, const Shape& b) {
  throw Error(ErrorCode::ShapeMismatch,
              std::string(op) + ": " + shape_str(a) + " vs " + shape_str(b));
}

std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  if (numel(shape) != values.size()) {
    shape_error("leaf", shape, Shape{values.size()});
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  if (requires_grad) n->grad.assign(n->value.size(), 0.0);
  return n;
}

inline bool wants(const std::shared_ptr<Node>& n) { return n->requires_grad; }

// Index maps from each output element to the broadcast source elements.
struct BroadcastMap {
  Shape out;
  std::vector<std::size_t> ia, ib;
};

BroadcastMap broadcast(std::string_view op, const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  std::vector<std::size_t> sa(rank, 0), sb(rank, 0);
  std::size_t stride_a = 1, stride_b = 1;
  for (std::size_t r = 0; r < rank; ++r) {
    const std::size_t i = rank - 1 - r;
    const std::size_t da = r < a.size() ? a[a.size() - 1 - r] : 1;
    const std::size_t db = r < b.size() ? b[b.size() - 1 - r] : 1;
    if (da != db && da != 1 && db != 1) shape_error(op, a, b);
    out[i] = std::max(da, db);
    sa[i] = da == 1 ? 0 : stride_a;
    sb[i] = db == 1 ? 0 : stride_b;
    stride_a *= da;
    stride_b *= db;
  }
  BroadcastMap m;
  m.out = out;
  const std::size_t n = numel(out);
  m.ia.resize(n);
  m.ib.resize(n);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t e = 0; e < n; ++e) {
    m.ia[e] = oa;
    m.ib[e] = ob;
    for (std::size_t r = rank; r-- > 0;) {
      ++idx[r];
      oa += sa[r];
      ob += sb[r];
      if (idx[r] < out[r]) break;
      oa -= sa[r] * idx[r];
      ob -= sb[r] * idx[r];
      idx[r] = 0;
    }
  }
  return m;
}

// Splits a shape around one axis into [outer, n, inner].
struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
  AxisSplit a;
  for (std::size_t i = 0; i < axis; ++i) a.outer *= s[i];
  a.n = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) a.inner *= s[i];
  return a;
}

void im2col(const double* x, std::size_t c, std::size_t h, std::size_t w, std::size_t k,
            std::size_t stride, std::size_t ho, std::size_t wo, double* cols) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* row = cols + ((ci * k + ky) * k + kx) * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - pad;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - pad;
            const bool in = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(h) &&
                            ix < static_cast<std::ptrdiff_t>(w);
            row[oy * wo + ox] = in ? x[(ci * h + iy) * w + ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* cols, std::size_t c, std::size_t h, std::size_t w, std::size_t k,
            std::size_t stride, std::size_t ho, std::size_t wo, double* dx) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* row = cols + ((ci * k + ky) * k + kx) * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - pad;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            dx[(ci * h + iy) * w + ix] += row[oy * wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  return Tensor(make_leaf(std::move(shape), std::move(values), true));
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  return Tensor(make_leaf(std::move(shape), std::move(values), false));
}

double Tensor::item() const {
  HANDREG_THROW_IF(numel() != 1, ErrorCode::ShapeMismatch,
                   "item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

void Tensor::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

Tensor Graph::input(Shape shape, std::vector<double> values, bool requires_grad) {
  auto n = make_leaf(std::move(shape), std::move(values), requires_grad);
  nodes_.push_back(n);
  return Tensor(n);
}

Tensor Graph::record(std::string_view op, Shape shape, std::vector<double> value,
                     std::vector<Tensor> inputs, std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = op;
  for (auto& t : inputs) {
    n->requires_grad = n->requires_grad || t.requires_grad();
    n->inputs.push_back(t.node());
  }
  if (n->requires_grad) {
    n->grad.assign(n->value.size(), 0.0);
    n->backward = std::move(backward);
  }
  nodes_.push_back(n);
  return Tensor(n);
}

Tensor Graph::custom(std::string_view op, Shape shape, std::vector<double> value,
                     std::vector<Tensor> inputs, std::function<void(Node&)> backward) {
  HANDREG_THROW_IF(numel(shape) != value.size(), ErrorCode::ShapeMismatch,
                   std::string(op) + ": value size does not match " + shape_str(shape));
  return record(op, std::move(shape), std::move(value), std::move(inputs), std::move(backward));
}

void Graph::backward(const Tensor& loss) {
  HANDREG_THROW_IF(loss.numel() != 1, ErrorCode::NonScalarLoss,
                   "loss has shape " + shape_str(loss.shape()));
  HANDREG_THROW_IF(backward_done_, ErrorCode::DoubleBackward,
                   "backward already ran on this graph");
  backward_done_ = true;
  if (!loss.requires_grad()) return;
  loss.node()->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (n.requires_grad && n.backward) n.backward(n);
  }
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor Graph::matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) shape_error("matmul", a.shape(), b.shape());
  const std::size_t m = a.dim(a.rank() - 2), k = a.dim(a.rank() - 1);
  const std::size_t kb = b.dim(b.rank() - 2), n = b.dim(b.rank() - 1);
  if (k != kb) shape_error("matmul", a.shape(), b.shape());
  const std::size_t ba = a.numel() / (m * k), bb = b.numel() / (kb * n);
  const bool a_batched = a.rank() > 2, b_batched = b.rank() > 2;
  if (a_batched && b_batched && ba != bb) shape_error("matmul", a.shape(), b.shape());
  const std::size_t batch = std::max(ba, bb);

  Shape out_shape;
  const Tensor& lead = a_batched ? a : b;
  if (a_batched || b_batched) {
    out_shape.assign(lead.shape().begin(), lead.shape().end() - 2);
  }
  // A 3-D left operand against a 2-D right one is one tall product.
  const bool fold = a_batched && !b_batched;
  out_shape.push_back(m);
  out_shape.push_back(n);

  std::vector<double> out(batch * m * n, 0.0);
  const double* av = a.value().data();
  const double* bv = b.value().data();
  if (fold) {
    simd::gemm_nn(batch * m, n, k, av, k, bv, n, out.data(), n);
  } else {
    for (std::size_t i = 0; i < batch; ++i) {
      simd::gemm_nn(m, n, k, av + (a_batched ? i * m * k : 0), k,
                    bv + (b_batched ? i * k * n : 0), n, out.data() + i * m * n, n);
    }
  }
  return record("matmul", out_shape, std::move(out), {a, b},
                [=](Node& o) {
                  Node& na = *o.inputs[0];
                  Node& nb = *o.inputs[1];
                  const double* g = o.grad.data();
                  if (fold) {
                    if (na.requires_grad)
                      simd::gemm_nt(batch * m, k, n, g, n, nb.value.data(), n, na.grad.data(), k);
                    if (nb.requires_grad)
                      simd::gemm_tn(k, n, batch * m, na.value.data(), k, g, n, nb.grad.data(), n);
                    return;
                  }
                  for (std::size_t i = 0; i < batch; ++i) {
                    const double* gi = g + i * m * n;
                    const std::size_t oa = a_batched ? i * m * k : 0;
                    const std::size_t ob = b_batched ? i * k * n : 0;
                    if (na.requires_grad)
                      simd::gemm_nt(m, k, n, gi, n, nb.value.data() + ob, n, na.grad.data() + oa, k);
                    if (nb.requires_grad)
                      simd::gemm_tn(k, n, m, na.value.data() + oa, k, gi, n, nb.grad.data() + ob, n);
                  }
                });
}

Tensor Graph::conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride) {
  if (x.rank() != 4 || w.rank() != 4 || w.dim(1) != x.dim(1) || w.dim(2) != w.dim(3) ||
      w.dim(2) % 2 == 0 || stride == 0) {
    shape_error("conv2d", x.shape(), w.shape());
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != w.dim(0))) {
    shape_error("conv2d bias", bias.shape(), w.shape());
  }
  const std::size_t nb = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t o = w.dim(0), k = w.dim(2);
  const std::size_t ho = (h + stride - 1) / stride, wo = (wd + stride - 1) / stride;
  const std::size_t ck = c * k * k, hw = ho * wo;

  std::vector<double> out(nb * o * hw, 0.0);
  std::vector<double> cols(ck * hw);
  for (std::size_t b = 0; b < nb; ++b) {
    double* ob = out.data() + b * o * hw;
    if (bias.defined()) {
      for (std::size_t oc = 0; oc < o; ++oc) std::fill_n(ob + oc * hw, hw, bias.value()[oc]);
    }
    im2col(x.value().data() + b * c * h * wd, c, h, wd, k, stride, ho, wo, cols.data());
    simd::gemm_nn(o, hw, ck, w.value().data(), ck, cols.data(), hw, ob, hw);
  }
  std::vector<Tensor> ins{x, w};
  if (bias.defined()) ins.push_back(bias);
  return record("conv2d", {nb, o, ho, wo}, std::move(out), std::move(ins),
                [=](Node& out_node) {
                  Node& nx = *out_node.inputs[0];
                  Node& nw = *out_node.inputs[1];
                  Node* nbias = out_node.inputs.size() > 2 ? out_node.inputs[2].get() : nullptr;
                  std::vector<double> cbuf(ck * hw), dcols(ck * hw);
                  for (std::size_t b = 0; b < nb; ++b) {
                    const double* g = out_node.grad.data() + b * o * hw;
                    if (nbias && nbias->requires_grad) {
                      for (std::size_t oc = 0; oc < o; ++oc) {
                        double s = 0.0;
                        for (std::size_t i = 0; i < hw; ++i) s += g[oc * hw + i];
                        nbias->grad[oc] += s;
                      }
                    }
                    const double* xb = nx.value.data() + b * c * h * wd;
                    if (nw.requires_grad) {
                      im2col(xb, c, h, wd, k, stride, ho, wo, cbuf.data());
                      simd::gemm_nt(o, ck, hw, g, hw, cbuf.data(), hw, nw.grad.data(), ck);
                    }
                    if (nx.requires_grad) {
                      std::fill(dcols.begin(), dcols.end(), 0.0);
                      simd::gemm_tn(ck, hw, o, nw.value.data(), ck, g, hw, dcols.data(), hw);
                      col2im(dcols.data(), c, h, wd, k, stride, ho, wo,
                             nx.grad.data() + b * c * h * wd);
                    }
                  }
                });
}

// ---------------------------------------------------------------------------
// Elementwise

template <class F, class GA, class GB>
Tensor Graph::binary(std::string_view op, const Tensor& a, const Tensor& b, F f, GA da, GB db) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (a.shape() == b.shape()) {
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i], bv[i]);
    return record(op, a.shape(), std::move(out), {a, b}, [=](Node& o) {
      Node& na = *o.inputs[0];
      Node& nb = *o.inputs[1];
      for (std::size_t i = 0; i < o.value.size(); ++i) {
        const double x = na.value[i], y = nb.value[i], g = o.grad[i];
        if (na.requires_grad) na.grad[i] += g * da(x, y, o.value[i]);
        if (nb.requires_grad) nb.grad[i] += g * db(x, y, o.value[i]);
      }
    });
  }
  auto map = std::make_shared<BroadcastMap>(broadcast(op, a.shape(), b.shape()));
  std::vector<double> out(map->ia.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[map->ia[i]], bv[map->ib[i]]);
  return record(op, map->out, std::move(out), {a, b}, [=](Node& o) {
    Node& na = *o.inputs[0];
    Node& nb = *o.inputs[1];
    for (std::size_t i = 0; i < o.value.size(); ++i) {
      const std::size_t ia = map->ia[i], ib = map->ib[i];
      const double x = na.value[ia], y = nb.value[ib], g = o.grad[i];
      if (na.requires_grad) na.grad[ia] += g * da(x, y, o.value[i]);
      if (nb.requires_grad) nb.grad[ib] += g * db(x, y, o.value[i]);
    }
  });
}

Tensor Graph::add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Tensor Graph::sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Tensor Graph::mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Tensor Graph::div(const Tensor& a, const Tensor& b) {
  return binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double z) { return -z / y; });
}

template <class F, class G>
Tensor Graph::unary(std::string_view op, const Tensor& x, F f, G df) {
  std::vector<double> out(x.numel());
  const auto xv = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  return record(op, x.shape(), std::move(out), {x}, [=](Node& o) {
    Node& nx = *o.inputs[0];
    for (std::size_t i = 0; i < o.value.size(); ++i) {
      nx.grad[i] += o.grad[i] * df(nx.value[i], o.value[i]);
    }
  });
}

Tensor Graph::scale(const Tensor& x, double c) {
  return unary("scale", x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Tensor Graph::add_scalar(const Tensor& x, double c) {
  return unary("add_scalar", x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Tensor Graph::relu(const Tensor& x) {
  return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor Graph::abs(const Tensor& x) {
  return unary("abs", x, [](double v) { return std::fabs(v); },
               [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor Graph::square(const Tensor& x) {
  return unary("square", x, [](double v) { return v * v; },
               [](double v, double) { return 2.0 * v; });
}

Tensor Graph::sqrt(const Tensor& x) {
  return unary("sqrt", x, [](double v) { return std::sqrt(v); },
               [](double, double y) { return 0.5 / y; });
}

Tensor Graph::log(const Tensor& x) {
  return unary("log", x, [](double v) { return std::log(v); },
               [](double v, double) { return 1.0 / v; });
}

Tensor Graph::exp(const Tensor& x) {
  return unary("exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor Graph::softplus(const Tensor& x) {
  return unary(
      "softplus", x,
      [](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
      [](double v, double) { return 1.0 / (1.0 + std::exp(-v)); });
}

Tensor Graph::sin(const Tensor& x) {
  return unary("sin", x, [](double v) { return std::sin(v); },
               [](double v, double) { return std::cos(v); });
}

Tensor Graph::cos(const Tensor& x) {
  return unary("cos", x, [](double v) { return std::cos(v); },
               [](double v, double) { return -std::sin(v); });
}

Tensor Graph::acos(const Tensor& x) {
  return unary("acos", x, [](double v) { return std::acos(v); },
               [](double v, double) { return -1.0 / std::sqrt(1.0 - v * v); });
}

Tensor Graph::clamp(const Tensor& x, double lo, double hi) {
  return unary("clamp", x, [=](double v) { return std::clamp(v, lo, hi); },
               [=](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// Reductions and layout

Tensor Graph::sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.value()) s += v;
  return record("sum", {1}, {s}, {x}, [](Node& o) {
    Node& nx = *o.inputs[0];
    for (double& g : nx.grad) g += o.grad[0];
  });
}

Tensor Graph::mean(const Tensor& x) {
  HANDREG_THROW_IF(x.numel() == 0, ErrorCode::ShapeMismatch, "mean of empty tensor");
  const double inv = 1.0 / static_cast<double>(x.numel());
  double s = 0.0;
  for (double v : x.value()) s += v;
  return record("mean", {1}, {s * inv}, {x}, [inv](Node& o) {
    Node& nx = *o.inputs[0];
    for (double& g : nx.grad) g += o.grad[0] * inv;
  });
}

Tensor Graph::sum_axis(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) shape_error("sum_axis", x.shape(), Shape{axis});
  const AxisSplit s = split_axis(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (out_shape.empty()) out_shape.push_back(1);
  std::vector<double> out(s.outer * s.inner, 0.0);
  const auto xv = x.value();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.n; ++i)
      for (std::size_t j = 0; j < s.inner; ++j)
        out[o * s.inner + j] += xv[(o * s.n + i) * s.inner + j];
  return record("sum_axis", out_shape, std::move(out), {x}, [s](Node& node) {
    Node& nx = *node.inputs[0];
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < s.n; ++i)
        for (std::size_t j = 0; j < s.inner; ++j)
          nx.grad[(o * s.n + i) * s.inner + j] += node.grad[o * s.inner + j];
  });
}

Tensor Graph::mean_axis(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) shape_error("mean_axis", x.shape(), Shape{axis});
  return scale(sum_axis(x, axis), 1.0 / static_cast<double>(x.dim(axis)));
}

Tensor Graph::slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  if (axis >= x.rank() || start + length > x.dim(axis)) {
    shape_error("slice", x.shape(), Shape{axis, start, length});
  }
  const AxisSplit s = split_axis(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  std::vector<double> out(s.outer * length * s.inner);
  const auto xv = x.value();
  for (std::size_t o = 0; o < s.outer; ++o)
    std::copy_n(xv.data() + (o * s.n + start) * s.inner, length * s.inner,
                out.data() + o * length * s.inner);
  return record("slice", out_shape, std::move(out), {x}, [s, start, length](Node& node) {
    Node& nx = *node.inputs[0];
    for (std::size_t o = 0; o < s.outer; ++o) {
      const double* g = node.grad.data() + o * length * s.inner;
      double* d = nx.grad.data() + (o * s.n + start) * s.inner;
      for (std::size_t i = 0; i < length * s.inner; ++i) d[i] += g[i];
    }
  });
}

Tensor Graph::concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor Graph::concat(std::span<const Tensor> parts, std::size_t axis) {
  HANDREG_THROW_IF(parts.empty(), ErrorCode::ShapeMismatch, "concat of nothing");
  const Shape& ref = parts[0].shape();
  if (axis >= ref.size()) shape_error("concat", ref, Shape{axis});
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != ref.size()) shape_error("concat", ref, p.shape());
    for (std::size_t d = 0; d < ref.size(); ++d)
      if (d != axis && p.dim(d) != ref[d]) shape_error("concat", ref, p.shape());
    total += p.dim(axis);
  }
  Shape out_shape = ref;
  out_shape[axis] = total;
  const AxisSplit s = split_axis(out_shape, axis);
  std::vector<double> out(numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t len = p.dim(axis);
    for (std::size_t o = 0; o < s.outer; ++o)
      std::copy_n(p.value().data() + o * len * s.inner, len * s.inner,
                  out.data() + (o * total + off) * s.inner);
    off += len;
  }
  return record("concat", out_shape, std::move(out), {parts.begin(), parts.end()},
                [s, total, offsets](Node& node) {
                  for (std::size_t k = 0; k < node.inputs.size(); ++k) {
                    Node& np = *node.inputs[k];
                    if (!np.requires_grad) continue;
                    const std::size_t len = np.shape.empty() ? 0 : np.value.size() / (s.outer * s.inner);
                    for (std::size_t o = 0; o < s.outer; ++o) {
                      const double* g = node.grad.data() + (o * total + offsets[k]) * s.inner;
                      double* d = np.grad.data() + o * len * s.inner;
                      for (std::size_t i = 0; i < len * s.inner; ++i) d[i] += g[i];
                    }
                  }
                });
}

Tensor Graph::reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.numel()) shape_error("reshape", x.shape(), shape);
  std::vector<double> out(x.value().begin(), x.value().end());
  return record("reshape", std::move(shape), std::move(out), {x}, [](Node& o) {
    Node& nx = *o.inputs[0];
    for (std::size_t i = 0; i < o.grad.size(); ++i) nx.grad[i] += o.grad[i];
  });
}

}  // namespace handreg::ad
