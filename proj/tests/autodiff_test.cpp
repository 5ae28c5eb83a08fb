#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

#include "handreg/autodiff/checkpoint.hpp"
#include "handreg/autodiff/optimizer.hpp"
#include "handreg/autodiff/tensor.hpp"
#include "handreg/common/error.hpp"
#include "handreg/simd/kernels.hpp"
#include "support/finite_difference.hpp"

using handreg::Error;
using handreg::ErrorCode;
using namespace handreg::ad;

namespace {

std::vector<double> uniform(std::size_t n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Values bounded away from zero so kinked ops are differentiable at +-h.
std::vector<double> away_from_zero(std::size_t n, std::mt19937_64& rng) {
  auto v = uniform(n, 0.05, 1.5, rng);
  std::bernoulli_distribution sign(0.5);
  for (auto& x : v)
    if (sign(rng)) x = -x;
  return v;
}

Shape random_shape(std::mt19937_64& rng, std::size_t max_rank = 4, std::size_t max_dim = 4) {
  std::uniform_int_distribution<std::size_t> r(1, max_rank), d(1, max_dim);
  Shape s(r(rng));
  for (auto& x : s) x = d(rng);
  return s;
}

struct OpCase {
  std::string name;
  // Produces input leaves for one random configuration.
  std::function<std::vector<std::pair<Shape, std::vector<double>>>(std::mt19937_64&)> inputs;
  std::function<Tensor(Graph&, const std::vector<Tensor>&)> apply;
};

// Max relative error between analytic and central-difference gradients over
// all inputs of one op configuration. The scalar loss is a random projection
// of the op output.
double gradient_error(const OpCase& c, std::mt19937_64& rng) {
  auto specs = c.inputs(rng);
  std::vector<Tensor> leaves;
  for (auto& [shape, values] : specs) leaves.push_back(Tensor::parameter(shape, values));

  std::vector<double> weights;
  auto evaluate = [&](bool with_backward) {
    Graph g;
    Tensor out = c.apply(g, leaves);
    if (weights.empty()) weights = uniform(out.numel(), -1.0, 1.0, rng);
    Tensor w = g.input(out.shape(), weights);
    Tensor loss = g.sum(g.mul(out, w));
    if (with_backward) g.backward(loss);
    return loss.item();
  };
  evaluate(true);
  double worst = 0.0;
  for (auto& leaf : leaves) {
    std::vector<double> analytic(leaf.grad().begin(), leaf.grad().end());
    auto numeric = handreg::testing::central_difference([&] { return evaluate(false); },
                                                        leaf.value());
    worst = std::max(worst, handreg::testing::relative_error(analytic, numeric));
  }
  return worst;
}

std::vector<OpCase> op_cases() {
  auto unary = [](std::string name, double lo, double hi,
                  std::function<Tensor(Graph&, const Tensor&)> f) {
    return OpCase{name,
                  [lo, hi](std::mt19937_64& rng) {
                    auto s = random_shape(rng);
                    return std::vector<std::pair<Shape, std::vector<double>>>{
                        {s, uniform(numel(s), lo, hi, rng)}};
                  },
                  [f](Graph& g, const std::vector<Tensor>& in) { return f(g, in[0]); }};
  };
  auto kinked = [](std::string name, std::function<Tensor(Graph&, const Tensor&)> f) {
    return OpCase{name,
                  [](std::mt19937_64& rng) {
                    auto s = random_shape(rng);
                    return std::vector<std::pair<Shape, std::vector<double>>>{
                        {s, away_from_zero(numel(s), rng)}};
                  },
                  [f](Graph& g, const std::vector<Tensor>& in) { return f(g, in[0]); }};
  };
  // Second operand shape is the first with random axes collapsed to 1 and
  // possibly leading axes dropped.
  auto broadcast_pair = [](std::mt19937_64& rng, double lo, double hi) {
    auto a = random_shape(rng);
    Shape b = a;
    std::bernoulli_distribution coin(0.3);
    for (auto& d : b)
      if (coin(rng)) d = 1;
    if (coin(rng) && b.size() > 1) b.erase(b.begin());
    if (coin(rng)) std::swap(a, b);
    return std::vector<std::pair<Shape, std::vector<double>>>{
        {a, uniform(numel(a), lo, hi, rng)}, {b, uniform(numel(b), lo, hi, rng)}};
  };

  std::vector<OpCase> cases;
  cases.push_back({"matmul",
                   [](std::mt19937_64& rng) {
                     std::uniform_int_distribution<std::size_t> d(1, 5), mode(0, 3);
                     const std::size_t m = d(rng), k = d(rng), n = d(rng), b = d(rng);
                     Shape sa{m, k}, sb{k, n};
                     switch (mode(rng)) {
                       case 1: sa = {b, m, k}; sb = {b, k, n}; break;
                       case 2: sb = {b, k, n}; break;
                       case 3: sa = {b, m, k}; break;
                       default: break;
                     }
                     return std::vector<std::pair<Shape, std::vector<double>>>{
                         {sa, uniform(numel(sa), -1, 1, rng)}, {sb, uniform(numel(sb), -1, 1, rng)}};
                   },
                   [](Graph& g, const std::vector<Tensor>& in) { return g.matmul(in[0], in[1]); }});
  for (std::size_t stride : {1u, 2u}) {
    cases.push_back({"conv2d_stride" + std::to_string(stride),
                     [](std::mt19937_64& rng) {
                       std::uniform_int_distribution<std::size_t> d(1, 3), hw(1, 6), k(0, 1);
                       const std::size_t b = d(rng), c = d(rng), o = d(rng), h = hw(rng),
                                         w = hw(rng), ks = 2 * k(rng) + 1;
                       Shape sx{b, c, h, w}, sw{o, c, ks, ks}, sb{o};
                       return std::vector<std::pair<Shape, std::vector<double>>>{
                           {sx, uniform(numel(sx), -1, 1, rng)},
                           {sw, uniform(numel(sw), -1, 1, rng)},
                           {sb, uniform(numel(sb), -1, 1, rng)}};
                     },
                     [stride](Graph& g, const std::vector<Tensor>& in) {
                       return g.conv2d(in[0], in[1], in[2], stride);
                     }});
  }
  cases.push_back({"add", [=](std::mt19937_64& r) { return broadcast_pair(r, -1, 1); },
                   [](Graph& g, const std::vector<Tensor>& in) { return g.add(in[0], in[1]); }});
  cases.push_back({"sub", [=](std::mt19937_64& r) { return broadcast_pair(r, -1, 1); },
                   [](Graph& g, const std::vector<Tensor>& in) { return g.sub(in[0], in[1]); }});
  cases.push_back({"mul", [=](std::mt19937_64& r) { return broadcast_pair(r, -1, 1); },
                   [](Graph& g, const std::vector<Tensor>& in) { return g.mul(in[0], in[1]); }});
  cases.push_back({"div", [=](std::mt19937_64& r) { return broadcast_pair(r, 0.5, 2.0); },
                   [](Graph& g, const std::vector<Tensor>& in) { return g.div(in[0], in[1]); }});
  cases.push_back(kinked("relu", [](Graph& g, const Tensor& x) { return g.relu(x); }));
  cases.push_back(kinked("abs", [](Graph& g, const Tensor& x) { return g.abs(x); }));
  cases.push_back(unary("square", -2, 2, [](Graph& g, const Tensor& x) { return g.square(x); }));
  cases.push_back(unary("sqrt", 0.3, 3, [](Graph& g, const Tensor& x) { return g.sqrt(x); }));
  cases.push_back(unary("log", 0.3, 3, [](Graph& g, const Tensor& x) { return g.log(x); }));
  cases.push_back(unary("exp", -2, 2, [](Graph& g, const Tensor& x) { return g.exp(x); }));
  cases.push_back(unary("softplus", -3, 3, [](Graph& g, const Tensor& x) { return g.softplus(x); }));
  cases.push_back(unary("sin", -3, 3, [](Graph& g, const Tensor& x) { return g.sin(x); }));
  cases.push_back(unary("cos", -3, 3, [](Graph& g, const Tensor& x) { return g.cos(x); }));
  cases.push_back(unary("acos", -0.9, 0.9, [](Graph& g, const Tensor& x) { return g.acos(x); }));
  cases.push_back(kinked("clamp", [](Graph& g, const Tensor& x) { return g.clamp(x, -1.0, 1.0); }));
  cases.push_back(unary("scale", -2, 2, [](Graph& g, const Tensor& x) { return g.scale(x, -1.7); }));
  cases.push_back(unary("mean", -2, 2, [](Graph& g, const Tensor& x) { return g.mean(x); }));
  cases.push_back(unary("sum", -2, 2, [](Graph& g, const Tensor& x) { return g.sum(x); }));
  cases.push_back(unary("mean_axis", -2, 2, [](Graph& g, const Tensor& x) {
    return g.mean_axis(x, x.rank() - 1);
  }));
  cases.push_back(unary("sum_axis", -2, 2, [](Graph& g, const Tensor& x) {
    return g.sum_axis(x, 0);
  }));
  cases.push_back(unary("slice", -2, 2, [](Graph& g, const Tensor& x) {
    const std::size_t axis = x.rank() - 1;
    const std::size_t n = x.dim(axis);
    return g.slice(x, axis, n / 2, n - n / 2);
  }));
  cases.push_back(unary("reshape", -2, 2, [](Graph& g, const Tensor& x) {
    return g.reshape(x, {x.numel()});
  }));
  cases.push_back({"concat",
                   [](std::mt19937_64& rng) {
                     auto a = random_shape(rng);
                     Shape b = a;
                     std::uniform_int_distribution<std::size_t> d(1, 4);
                     b[0] = d(rng);
                     return std::vector<std::pair<Shape, std::vector<double>>>{
                         {a, uniform(numel(a), -1, 1, rng)}, {b, uniform(numel(b), -1, 1, rng)}};
                   },
                   [](Graph& g, const std::vector<Tensor>& in) {
                     return g.concat({in[0], in[1], in[0]}, 0);
                   }});
  return cases;
}

}  // namespace

TEST(AutodiffOps, ReluForward) {
  Graph g;
  auto x = g.input({3}, {-1.0, 0.0, 2.0});
  auto y = g.relu(x);
  EXPECT_EQ(std::vector<double>(y.value().begin(), y.value().end()),
            (std::vector<double>{0.0, 0.0, 2.0}));
}

TEST(AutodiffOps, IdentityKernelConvLeavesInputUnchanged) {
  std::mt19937_64 rng(5);
  Graph g;
  auto x = g.input({2, 1, 5, 4}, uniform(40, -1, 1, rng));
  auto w = g.input({1, 1, 1, 1}, {1.0});
  auto y = g.conv2d(x, w, Tensor(), 1);
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.value()[i], x.value()[i]);

  // 3x3 kernel with a single centre tap behaves the same.
  std::vector<double> k3(9, 0.0);
  k3[4] = 1.0;
  auto y3 = g.conv2d(x, g.input({1, 1, 3, 3}, k3), Tensor(), 1);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y3.value()[i], x.value()[i]);
}

TEST(AutodiffOps, MatmulMatchesNaiveTripleLoop) {
  std::mt19937_64 rng(6);
  const auto a = uniform(12, -1, 1, rng), b = uniform(8, -1, 1, rng);
  Graph g;
  auto c = g.matmul(g.input({3, 4}, a), g.input({4, 2}, b));
  ASSERT_EQ(c.shape(), (Shape{3, 2}));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < 4; ++p) s += a[i * 4 + p] * b[p * 2 + j];
      EXPECT_NEAR(c.value()[i * 2 + j], s, 1e-12);
    }
}

TEST(AutodiffOps, ShapeMismatchNamesBothShapes) {
  Graph g;
  auto a = g.input({2, 3}, std::vector<double>(6, 1.0));
  auto b = g.input({4, 2}, std::vector<double>(8, 1.0));
  try {
    g.matmul(a, b);
    FAIL() << "expected ShapeMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
    EXPECT_NE(std::string(e.what()).find("[2,3]"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("[4,2]"), std::string::npos);
  }
  auto c = g.input({3}, std::vector<double>(3, 1.0));
  EXPECT_THROW(g.add(a, g.input({2}, {1.0, 2.0})), Error);
  EXPECT_NO_THROW(g.add(a, c));
}

TEST(AutodiffBackward, MeanSquareClosedForm) {
  std::mt19937_64 rng(7);
  auto x = Tensor::parameter({5, 3}, uniform(15, -2, 2, rng));
  Graph g;
  g.backward(g.mean(g.square(x)));
  for (std::size_t i = 0; i < x.numel(); ++i)
    EXPECT_NEAR(x.grad()[i], 2.0 * x.value()[i] / 15.0, 1e-12);
}

TEST(AutodiffBackward, DisconnectedParameterGetsExactZero) {
  auto used = Tensor::parameter({2}, {1.0, 2.0});
  auto unused = Tensor::parameter({2}, {3.0, 4.0});
  Graph g;
  g.backward(g.sum(g.square(used)));
  EXPECT_EQ(unused.grad()[0], 0.0);
  EXPECT_EQ(unused.grad()[1], 0.0);
}

TEST(AutodiffBackward, RejectsNonScalarAndSecondCall) {
  auto x = Tensor::parameter({2}, {1.0, 2.0});
  Graph g;
  auto y = g.square(x);
  try {
    g.backward(y);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonScalarLoss);
  }
  auto loss = g.sum(y);
  g.backward(loss);
  try {
    g.backward(loss);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DoubleBackward);
  }
}

TEST(AutodiffBackward, GradientsAccumulateAcrossGraphs) {
  auto x = Tensor::parameter({1}, {3.0});
  for (int i = 0; i < 2; ++i) {
    Graph g;
    g.backward(g.sum(g.square(x)));
  }
  EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
  x.zero_grad();
  EXPECT_EQ(x.grad()[0], 0.0);
}

TEST(AutodiffBackward, EveryOpMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  for (const auto& c : op_cases()) {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) worst = std::max(worst, gradient_error(c, rng));
    EXPECT_LT(worst, 1e-4) << c.name;
  }
}

TEST(AutodiffBackward, ScalarAndSimdPathsAgree) {
  if (!handreg::simd::avx2_supported()) GTEST_SKIP();
  std::mt19937_64 rng(9);
  const auto xv = uniform(2 * 3 * 8 * 8, -1, 1, rng), wv = uniform(4 * 3 * 9, -1, 1, rng);
  auto run = [&](handreg::simd::Isa isa) {
    handreg::simd::set_active_isa(isa);
    auto x = Tensor::parameter({2, 3, 8, 8}, xv);
    auto w = Tensor::parameter({4, 3, 3, 3}, wv);
    Graph g;
    auto y = g.conv2d(x, w, Tensor(), 2);
    g.backward(g.sum(g.square(y)));
    std::vector<double> out(y.value().begin(), y.value().end());
    out.insert(out.end(), w.grad().begin(), w.grad().end());
    out.insert(out.end(), x.grad().begin(), x.grad().end());
    return out;
  };
  const auto before = handreg::simd::active_isa();
  const auto s = run(handreg::simd::Isa::Scalar);
  const auto v = run(handreg::simd::Isa::Avx2);
  handreg::simd::set_active_isa(before);
  ASSERT_EQ(s.size(), v.size());
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(s[i], v[i], 1e-11);
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  std::vector<double> p{1.0, -2.0};
  const std::vector<double> g{0.0, 0.0};
  AdamState st;
  adam_step(p, g, st, {});
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
}

TEST(Adam, StepOnQuadraticDescends) {
  std::vector<double> w{1.0};
  AdamState st;
  const std::vector<double> g{2.0 * w[0]};
  adam_step(w, g, st, {});
  EXPECT_LT(w[0] * w[0], 1.0);
}

TEST(Adam, FirstStepIsMinusLrTimesSign) {
  // m1 = (1-b1) g, v1 = (1-b2) g^2; bias correction gives mhat = g, vhat = g^2.
  // The epsilon term shifts the step by lr * eps / |g|, below 1e-9 for these.
  for (double g : {3.5, -0.25, 0.05}) {
    std::vector<double> w{0.5};
    AdamState st;
    AdamHyper h;
    adam_step(w, std::vector<double>{g}, st, h);
    const double expected = 0.5 - h.learning_rate * g / (std::abs(g) + h.epsilon);
    EXPECT_NEAR(w[0], expected, 1e-15);
    EXPECT_NEAR(w[0], 0.5 - h.learning_rate * (g > 0 ? 1.0 : -1.0), 1e-9);
  }
}

TEST(Adam, ShapeMismatchRejected) {
  std::vector<double> p{1.0, 2.0};
  AdamState st;
  EXPECT_THROW(adam_step(p, std::vector<double>{1.0}, st, {}), Error);
  adam_step(p, std::vector<double>{1.0, 1.0}, st, {});
  std::vector<double> q{1.0};
  EXPECT_THROW(adam_step(q, std::vector<double>{1.0}, st, {}), Error);
}

TEST(Checkpoint, RoundTripPreservesArrays) {
  const auto path = std::filesystem::temp_directory_path() / "handreg_ckpt_test.bin";
  std::vector<NamedArray> arrays{{"a", {2, 3}, {1, 2, 3, 4, 5, 6}},
                                 {"bias", {1}, {-0.125}},
                                 {"empty", {0}, {}}};
  save_checkpoint(path, arrays);
  const auto back = load_checkpoint(path);
  ASSERT_EQ(back.size(), arrays.size());
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    EXPECT_EQ(back[i].name, arrays[i].name);
    EXPECT_EQ(back[i].shape, arrays[i].shape);
    EXPECT_EQ(back[i].data, arrays[i].data);
  }
  EXPECT_EQ(find_array(back, "bias").data[0], -0.125);
  EXPECT_THROW(find_array(back, "nope"), Error);
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsWrongMagic) {
  const auto path = std::filesystem::temp_directory_path() / "handreg_bad_ckpt.bin";
  {
    std::ofstream os(path, std::ios::binary);
    os << "not-a-checkpoint-at-all";
  }
  try {
    load_checkpoint(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Format);
  }
  std::filesystem::remove(path);
}
