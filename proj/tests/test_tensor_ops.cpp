#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "oracles.hpp"
#include "tskd/grad_check.hpp"
#include "tskd/ops.hpp"
#include "tskd/optim.hpp"
#include "tskd/tensor.hpp"

using namespace tskd;

namespace {

Tensor<double> vec(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor<double>(Shape{n}, std::move(v));
}

std::vector<double> as_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

// ---------------------------------------------------------------------------
// Construction and graph
// ---------------------------------------------------------------------------

TEST(Tensor, RejectsEmptyShapes) {
  EXPECT_THROW(Tensor<float>(Shape{}), DimensionError);
  EXPECT_THROW(Tensor<float>(Shape{2, 0}), DimensionError);
  EXPECT_THROW(Tensor<float>(Shape{2}, std::vector<float>{1, 2, 3}), DimensionError);
}

TEST(Tensor, CopiesShareStorage) {
  Tensor<float> a(Shape{3}, 1.0f);
  Tensor<float> b = a;
  b.mutable_data()[1] = 5.0f;
  EXPECT_EQ(a.data()[1], 5.0f);
  auto c = a.clone();
  c.mutable_data()[1] = 7.0f;
  EXPECT_EQ(a.data()[1], 5.0f);
}

TEST(Tensor, RequiresGradOnlyOnLeaves) {
  auto x = vec({1, 2}).set_requires_grad(true);
  auto y = add(x, x);
  EXPECT_FALSE(y.is_leaf());
  EXPECT_THROW(y.set_requires_grad(false), ContractError);
}

TEST(Autograd, SumOfSquares) {
  auto x = vec({1, -2, 3});
  x.set_requires_grad(true);
  backward(sum_all(square(x)));
  EXPECT_EQ(as_vec(x.grad()), (std::vector<double>{2, -4, 6}));
}

TEST(Autograd, IndependentParameterGetsNoGradient) {
  auto x = vec({1, 2}).set_requires_grad(true);
  auto p = vec({3, 4}).set_requires_grad(true);
  backward(sum_all(x));
  EXPECT_FALSE(p.has_grad());
}

TEST(Autograd, RepeatedBackwardAccumulates) {
  auto x = vec({1, 2}).set_requires_grad(true);
  backward(sum_all(scale(x, 3.0)));
  backward(sum_all(scale(x, 3.0)));
  EXPECT_EQ(as_vec(x.grad()), (std::vector<double>{6, 6}));
}

TEST(Autograd, NonScalarLossRejected) {
  auto x = vec({1, 2}).set_requires_grad(true);
  EXPECT_THROW(backward(square(x)), ContractError);
}

TEST(Autograd, GraphVisitsSharedNodeOnce) {
  auto x = vec({1, 2}).set_requires_grad(true);
  auto y = square(x);
  auto z = add(y, y);
  auto loss = sum_all(z);
  auto graph = Graph<double>::collect(loss);
  // sum, add, square; leaves are not scheduled
  EXPECT_EQ(graph.size(), 3u);
  graph.run_backward();
  EXPECT_EQ(as_vec(x.grad()), (std::vector<double>{4, 8}));
  graph.clear();
  EXPECT_EQ(graph.size(), 0u);
}

TEST(Autograd, DeepChainDoesNotOverflowStack) {
  auto x = vec({0.5}).set_requires_grad(true);
  auto y = x;
  for (int i = 0; i < 200000; ++i) y = scale(y, 1.0);
  backward(sum_all(y));
  EXPECT_EQ(x.grad()[0], 1.0);
}

TEST(Autograd, NoGradGuardDetaches) {
  auto x = vec({1, 2}).set_requires_grad(true);
  Tensor<double> y;
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    y = square(x);
  }
  EXPECT_TRUE(grad_enabled());
  EXPECT_TRUE(y.is_leaf());
  EXPECT_FALSE(y.requires_grad());
}

TEST(Autograd, ScaleGradIsForwardIdentity) {
  auto x = vec({1, -2}).set_requires_grad(true);
  auto y = scale_grad(x, 0.25);
  EXPECT_EQ(as_vec(y.data()), as_vec(x.data()));
  backward(sum_all(square(y)));
  EXPECT_EQ(as_vec(x.grad()), (std::vector<double>{0.5, -1.0}));
}

// ---------------------------------------------------------------------------
// Elementwise and reductions
// ---------------------------------------------------------------------------

TEST(Ops, AbsValues) { EXPECT_EQ(as_vec(abs(vec({-1, 0, 2})).data()), (std::vector<double>{1, 0, 2})); }

TEST(Ops, ReluBackwardGate) {
  auto x = vec({-1, 3}).set_requires_grad(true);
  backward(sum_all(relu(x)));
  EXPECT_EQ(as_vec(x.grad()), (std::vector<double>{0, 1}));
}

TEST(Ops, SubgradientZeroAtKinks) {
  auto x = vec({0.0, 0.0}).set_requires_grad(true);
  backward(sum_all(add(abs(x), relu(x))));
  EXPECT_EQ(as_vec(x.grad()), (std::vector<double>{0, 0}));
}

TEST(Ops, SigmoidAndTanhAtZero) {
  EXPECT_EQ(sigmoid(vec({0})).item(), 0.5);
  EXPECT_EQ(tanh(vec({0})).item(), 0.0);
}

TEST(Ops, SigmoidSaturatesWithoutNan) {
  auto s = sigmoid(vec({-1000, 1000}));
  EXPECT_EQ(s.data()[0], 0.0);
  EXPECT_EQ(s.data()[1], 1.0);
}

TEST(Ops, BinaryOpsDoNotBroadcast) {
  EXPECT_THROW(add(vec({1, 2}), vec({1, 2, 3})), DimensionError);
  EXPECT_THROW(mul(Tensor<double>(Shape{2, 1}), Tensor<double>(Shape{1, 2})), DimensionError);
}

TEST(Ops, SumChannels) {
  Tensor<double> x(Shape{1, 2, 1, 1}, std::vector<double>{3, 4});
  auto s = sum_channels(x);
  EXPECT_EQ(s.shape(), (Shape{1, 1, 1}));
  EXPECT_EQ(s.item(), 7.0);
}

TEST(Ops, MeanOfZeros) { EXPECT_EQ(mean_all(Tensor<double>(Shape{3, 4})).item(), 0.0); }

TEST(Ops, SumAllMatchesSerialAccumulation) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto x = oracle::random_tensor<float>(Shape{7, 13, 11}, seed, -3, 3);
    EXPECT_EQ(sum_all(x).item(), oracle::serial_sum<float>(x.data())) << "seed " << seed;
  }
}

TEST(Ops, AdaptivePoolAverages) {
  Tensor<double> x(Shape{1, 2, 4}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8});
  auto p = adaptive_avg_pool(x, 1, 2);
  EXPECT_EQ(as_vec(p.data()), (std::vector<double>{(1 + 2 + 5 + 6) / 4.0, (3 + 4 + 7 + 8) / 4.0}));
}

TEST(Ops, L2NormalizeLeavesZeroSamples) {
  Tensor<double> x(Shape{2, 2}, std::vector<double>{3, 4, 0, 0});
  auto y = l2_normalize_samples(x);
  EXPECT_EQ(as_vec(y.data()), (std::vector<double>{0.6, 0.8, 0, 0}));
}

// ---------------------------------------------------------------------------
// Cross entropy
// ---------------------------------------------------------------------------

TEST(CrossEntropy, UniformLogits) {
  Tensor<double> z(Shape{1, 2}, std::vector<double>{0, 0});
  std::vector<int> labels{0};
  EXPECT_NEAR(softmax_cross_entropy(z, std::span<const int>(labels)).item(), std::log(2.0), 1e-15);
}

TEST(CrossEntropy, LargeLogitsStable) {
  Tensor<double> z(Shape{1, 2}, std::vector<double>{1000, 0});
  std::vector<int> labels{0};
  auto l = softmax_cross_entropy(z, std::span<const int>(labels)).item();
  EXPECT_TRUE(std::isfinite(l));
  EXPECT_NEAR(l, 0.0, 1e-12);
}

TEST(CrossEntropy, LabelOutOfRange) {
  Tensor<double> z(Shape{1, 3});
  std::vector<int> labels{3};
  EXPECT_THROW(softmax_cross_entropy(z, std::span<const int>(labels)), IndexError);
  labels[0] = -1;
  EXPECT_THROW(softmax_cross_entropy(z, std::span<const int>(labels)), IndexError);
}

TEST(CrossEntropy, MatchesLoopOracle) {
  auto z = oracle::random_tensor<double>(Shape{5, 7}, 3, -4, 4);
  std::vector<int> labels{0, 6, 3, 2, 2};
  double want = 0;
  for (std::size_t b = 0; b < 5; ++b) {
    want += oracle::cross_entropy_row(std::span<const double>(z.data().data() + b * 7, 7), labels[b]);
  }
  EXPECT_NEAR(softmax_cross_entropy(z, std::span<const int>(labels)).item(), want / 5, 1e-14);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto z = oracle::random_param<double>(Shape{4, 5}, seed, -3, 3);
    std::vector<int> labels{1, 4, 0, 2};
    auto rep = grad_check([&] { return softmax_cross_entropy(z, std::span<const int>(labels)); }, {z},
                          {.step = 1e-5, .tolerance = 1e-6});
    EXPECT_TRUE(rep.passed()) << "seed " << seed << " max rel " << rep.max_rel_error;
  }
}

// ---------------------------------------------------------------------------
// conv2d
// ---------------------------------------------------------------------------

TEST(Conv2d, IdentityKernel) {
  auto x = oracle::random_tensor<double>(Shape{1, 1, 4, 5}, 1);
  Tensor<double> k(Shape{1, 1, 1, 1}, 1.0);
  EXPECT_EQ(as_vec(conv2d(x, k, Tensor<double>()).data()), as_vec(x.data()));
}

TEST(Conv2d, SumOfOnes) {
  Tensor<double> x(Shape{1, 1, 3, 3}, 1.0), k(Shape{1, 1, 3, 3}, 1.0);
  EXPECT_EQ(conv2d(x, k, Tensor<double>()).item(), 9.0);
}

TEST(Conv2d, MatchesNestedLoopOnRandomInput) {
  auto x = oracle::random_tensor<float>(Shape{2, 3, 8, 8}, 11);
  auto k = oracle::random_tensor<float>(Shape{4, 3, 3, 3}, 12);
  auto b = oracle::random_tensor<float>(Shape{4}, 13);
  std::vector<float> xv(x.data().begin(), x.data().end()), kv(k.data().begin(), k.data().end()),
      bv(b.data().begin(), b.data().end());
  auto want = oracle::conv2d(xv, x.shape(), kv, k.shape(), &bv, 1, 1);
  auto got = conv2d(x, k, b, 1, 1);
  EXPECT_EQ(got.shape(), (Shape{2, 4, 8, 8}));
  EXPECT_EQ(std::vector<float>(got.data().begin(), got.data().end()), want);
}

TEST(Conv2d, ShapeErrorsNameBothShapes) {
  Tensor<double> x(Shape{1, 2, 4, 4}), k(Shape{1, 3, 3, 3});
  try {
    conv2d(x, k, Tensor<double>());
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[1,2,4,4]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[1,3,3,3]"), std::string::npos) << msg;
  }
  EXPECT_THROW(conv2d(Tensor<double>(Shape{1, 1, 2, 2}), Tensor<double>(Shape{1, 1, 3, 3}), Tensor<double>()),
               DimensionError);
}

// ---------------------------------------------------------------------------
// Gradient checks
// ---------------------------------------------------------------------------

TEST(GradCheck, LinearIsExact) {
  auto x = oracle::random_param<double>(Shape{6}, 5);
  auto rep = grad_check([&] { return sum_all(x); }, {x});
  EXPECT_TRUE(rep.passed());
  EXPECT_LT(rep.max_rel_error, 1e-9);
}

TEST(GradCheck, AbsKinkExcluded) {
  auto x = vec({0.0, 0.7, -0.3}).set_requires_grad(true);
  auto rep = grad_check([&] { return sum_all(abs(x)); }, {x});
  EXPECT_TRUE(rep.passed());
  EXPECT_EQ(rep.excluded, 1u);
  EXPECT_EQ(rep.checked, 2u);
}

TEST(GradCheck, ConvReluSumComposite) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto x = oracle::random_param<double>(Shape{2, 2, 5, 5}, 100 + seed);
    auto k = oracle::random_param<double>(Shape{3, 2, 3, 3}, 200 + seed);
    auto b = oracle::random_param<double>(Shape{3}, 300 + seed);
    auto rep = grad_check([&] { return sum_all(relu(conv2d(x, k, b, 1, 1))); }, {x, k, b});
    EXPECT_TRUE(rep.passed()) << "seed " << seed << " max rel " << rep.max_rel_error;
  }
}

class OpGradients : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(OpGradients, EveryOpMatchesFiniteDifferences) {
  const std::uint64_t s = GetParam();
  const GradCheckOptions opt{.step = 1e-5, .tolerance = 1e-5};
  auto a = oracle::random_param<double>(Shape{2, 3, 4}, s * 7 + 1);
  auto b = oracle::random_param<double>(Shape{2, 3, 4}, s * 7 + 2);
  auto w = oracle::random_param<double>(Shape{2, 3, 4}, s * 7 + 3);
  // Weighting by w makes each output entry's adjoint distinct.
  auto check = [&](const char* name, auto&& f, std::vector<Tensor<double>> in) {
    auto rep = grad_check(f, std::move(in), opt);
    EXPECT_TRUE(rep.passed()) << name << " seed " << s << " max rel " << rep.max_rel_error;
  };
  check("add", [&] { return sum_all(mul(w, add(a, b))); }, {a, b});
  check("sub", [&] { return sum_all(mul(w, sub(a, b))); }, {a, b});
  check("mul", [&] { return sum_all(mul(w, mul(a, b))); }, {a, b});
  check("relu", [&] { return sum_all(mul(w, relu(a))); }, {a});
  check("sigmoid", [&] { return sum_all(mul(w, sigmoid(a))); }, {a});
  check("tanh", [&] { return sum_all(mul(w, tanh(a))); }, {a});
  check("abs", [&] { return sum_all(mul(w, abs(a))); }, {a});
  check("square", [&] { return sum_all(mul(w, square(a))); }, {a});
  check("scale", [&] { return sum_all(mul(w, scale(a, -1.7))); }, {a});
  check("mean_all", [&] { return mean_all(mul(a, b)); }, {a, b});
  check("mse", [&] { return mse(a, b); }, {a, b});

  auto f4 = oracle::random_param<double>(Shape{2, 3, 4, 5}, s * 7 + 4);
  auto wsc = oracle::random_param<double>(Shape{2, 4, 5}, s * 7 + 5);
  check("sum_channels", [&] { return sum_all(mul(wsc, sum_channels(f4))); }, {f4});
  auto wgp = oracle::random_param<double>(Shape{2, 3}, s * 7 + 6);
  check("global_avg_pool", [&] { return sum_all(mul(wgp, global_avg_pool(f4))); }, {f4});
  auto wap = oracle::random_param<double>(Shape{2, 3, 2, 3}, s * 7 + 7);
  check("adaptive_avg_pool", [&] { return sum_all(mul(wap, adaptive_avg_pool(f4, 2, 3))); }, {f4});
  auto wl2 = oracle::random_param<double>(Shape{2, 3, 4, 5}, s * 7 + 8);
  check("l2_normalize", [&] { return sum_all(mul(wl2, l2_normalize_samples(f4))); }, {f4});
  auto wrs = oracle::random_param<double>(Shape{6, 20}, s * 7 + 9);
  check("reshape", [&] { return sum_all(mul(wrs, reshape(f4, Shape{6, 20}))); }, {f4});

  auto x = oracle::random_param<double>(Shape{3, 5}, s * 7 + 10);
  auto lw = oracle::random_param<double>(Shape{4, 5}, s * 7 + 11);
  auto lb = oracle::random_param<double>(Shape{4}, s * 7 + 12);
  auto wlin = oracle::random_param<double>(Shape{3, 4}, s * 7 + 13);
  check("linear", [&] { return sum_all(mul(wlin, linear(x, lw, lb))); }, {x, lw, lb});
  auto wls = oracle::random_param<double>(Shape{3, 5}, s * 7 + 14);
  check("log_softmax", [&] { return sum_all(mul(wls, log_softmax(x))); }, {x});

  auto ci = oracle::random_param<double>(Shape{1, 2, 6, 6}, s * 7 + 15);
  auto ck = oracle::random_param<double>(Shape{3, 2, 3, 3}, s * 7 + 16);
  auto cb = oracle::random_param<double>(Shape{3}, s * 7 + 17);
  auto wc = oracle::random_param<double>(Shape{1, 3, 3, 3}, s * 7 + 18);
  check("conv2d stride 2", [&] { return sum_all(mul(wc, conv2d(ci, ck, cb, 2, 1))); }, {ci, ck, cb});
}

INSTANTIATE_TEST_SUITE_P(Seeds, OpGradients, ::testing::Range<std::uint64_t>(0, 20));

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

TEST(Sgd, SingleStep) {
  auto w = vec({1.0}).set_requires_grad(true);
  w.mutable_grad()[0] = 2.0;
  ParamSet<double> ps{{"w", w}};
  SgdState<double> st{.learning_rate = 0.1, .momentum = 0.0};
  sgd_step(ps, st, 0);
  EXPECT_DOUBLE_EQ(w.item(), 0.8);
  EXPECT_EQ(w.grad()[0], 0.0);
}

TEST(Sgd, MomentumRecurrence) {
  auto w = vec({0.0}).set_requires_grad(true);
  ParamSet<double> ps{{"w", w}};
  SgdState<double> st{.learning_rate = 1.0, .momentum = 0.9};
  w.mutable_grad()[0] = 1.0;
  sgd_step(ps, st, 0);
  EXPECT_DOUBLE_EQ(w.item(), -1.0);
  w.mutable_grad()[0] = 1.0;
  sgd_step(ps, st, 0);
  EXPECT_DOUBLE_EQ(w.item(), -2.9);
}

TEST(Sgd, MissingGradient) {
  auto w = vec({1.0}).set_requires_grad(true);
  ParamSet<double> ps{{"w", w}};
  SgdState<double> st;
  EXPECT_THROW(sgd_step(ps, st, 0), ContractError);
}

TEST(Sgd, CifarStepDecay) {
  SgdState<double> st{.learning_rate = 0.1, .milestones = step_decay(150, 30, 240, 0.1)};
  EXPECT_NEAR(st.lr_at(0), 0.1, 1e-15);
  EXPECT_NEAR(st.lr_at(149), 0.1, 1e-15);
  EXPECT_NEAR(st.lr_at(150), 0.01, 1e-15);
  EXPECT_NEAR(st.lr_at(179), 0.01, 1e-15);
  EXPECT_NEAR(st.lr_at(180), 0.001, 1e-15);
}

TEST(Sgd, VelocityShapesFollowParameters) {
  auto a = oracle::random_param<double>(Shape{2, 3}, 1);
  auto b = oracle::random_param<double>(Shape{4}, 2);
  ParamSet<double> ps{{"a", a}, {"b", b}};
  a.mutable_grad();
  b.mutable_grad();
  SgdState<double> st{.momentum = 0.5};
  sgd_step(ps, st, 0);
  ASSERT_EQ(st.velocity.size(), 2u);
  EXPECT_EQ(st.velocity[0].size(), 6u);
  EXPECT_EQ(st.velocity[1].size(), 4u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto w = vec({1.0, -1.0}).set_requires_grad(true);
  ParamSet<double> ps{{"w", w}};
  AdamState<double> st{.learning_rate = 0.01};
  w.mutable_grad()[0] = 3.0;
  w.mutable_grad()[1] = -0.5;
  adam_step(ps, st);
  EXPECT_NEAR(w.data()[0], 0.99, 1e-9);
  EXPECT_NEAR(w.data()[1], -0.99, 1e-9);
  EXPECT_EQ(st.steps, 1);
}

TEST(Determinism, SameOpsSameBits) {
  auto run = [] {
    auto x = oracle::random_param<float>(Shape{2, 3, 7, 7}, 42);
    auto k = oracle::random_param<float>(Shape{4, 3, 3, 3}, 43);
    auto y = sum_all(square(relu(conv2d(x, k, Tensor<float>(), 2, 1))));
    backward(y);
    std::vector<float> out(k.grad().begin(), k.grad().end());
    out.push_back(y.item());
    return out;
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)), 0);
}
