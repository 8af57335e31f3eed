#include <gtest/gtest.h>

#include <random>

#include "fcntag/nn/dispatch.hpp"
#include "fcntag/tensor/grad_check.hpp"
#include "fcntag/tensor/ops.hpp"

using namespace fcntag;

namespace {

Tensor<double> random_tensor(Shape shape, std::uint64_t seed, bool grad = true) {
  std::mt19937_64 rng(seed);
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = nn::uniform01(rng) * 2.0 - 1.0;
  return Tensor<double>::from(shape, v, grad);
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an fcntag::Error";
  return ErrorKind::io;
}

}  // namespace

TEST(Tensor, RejectsMismatchedShape) {
  EXPECT_EQ(kind_of([] { Tensor<float>::from({2, 3}, std::vector<float>(5)); }), ErrorKind::shape);
  EXPECT_EQ(kind_of([] { Tensor<float>::zeros({2, 0}); }), ErrorKind::shape);
}

TEST(Ops, ElementwiseAddShape) {
  auto a = Tensor<float>::full({2, 3}, 1.0f);
  auto b = Tensor<float>::full({2, 3}, 2.0f);
  auto c = add(a, b);
  EXPECT_EQ(c.shape(), (Shape{2, 3}));
  for (float v : c.values()) EXPECT_EQ(v, 3.0f);
}

TEST(Ops, MatmulShapes) {
  auto a = Tensor<float>::full({2, 3}, 1.0f);
  auto b = Tensor<float>::full({3, 4}, 2.0f);
  auto c = matmul(a, b);
  EXPECT_EQ(c.shape(), (Shape{2, 4}));
  for (float v : c.values()) EXPECT_EQ(v, 6.0f);
  auto bad = Tensor<float>::full({4, 4}, 1.0f);
  try {
    matmul(a, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::shape);
    EXPECT_NE(std::string(e.what()).find("matmul"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("[4x4]"), std::string::npos);
  }
}

TEST(Ops, MatmulMatchesNaiveProduct) {
  auto a = random_tensor({5, 7}, 1, false);
  auto b = random_tensor({7, 3}, 2, false);
  auto c = matmul(a, b);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double acc = 0;
      for (std::size_t k = 0; k < 7; ++k) acc += a.values()[i * 7 + k] * b.values()[k * 3 + j];
      EXPECT_NEAR(c.values()[i * 3 + j], acc, 1e-12);
    }
}

TEST(Ops, BroadcastRules) {
  auto a = Tensor<double>::from({2, 3}, {1, 2, 3, 4, 5, 6});
  auto row = Tensor<double>::from({3}, {10, 20, 30});
  auto s = Tensor<double>::scalar(2);
  EXPECT_EQ(add(a, row).values()[4], 25);
  EXPECT_EQ(mul(a, s).values()[5], 12);
  EXPECT_EQ(kind_of([&] { add(a, Tensor<double>::from({2}, {1, 2})); }), ErrorKind::shape);
}

TEST(Backward, SumGivesOnes) {
  auto x = Tensor<double>::from({3}, {4, -1, 7}, true);
  backward(sum(x));
  ASSERT_TRUE(x.has_grad());
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SquareGivesTwoX) {
  auto x = Tensor<double>::from({3}, {1, 2, 3}, true);
  backward(sum(mul(x, x)));
  EXPECT_EQ(x.grad()[0], 2.0);
  EXPECT_EQ(x.grad()[1], 4.0);
  EXPECT_EQ(x.grad()[2], 6.0);
}

TEST(Backward, NonScalarLossIsContractError) {
  auto x = Tensor<double>::from({3}, {1, 2, 3}, true);
  EXPECT_EQ(kind_of([&] { backward(relu(x)); }), ErrorKind::contract);
}

TEST(Backward, TapeIsTopological) {
  auto x = random_tensor({4, 4}, 3);
  auto w = random_tensor({4, 4}, 4);
  auto h = relu(matmul(x, w));
  auto y = mean(add(mul(h, h), matmul(h, w)));
  auto tape = ComputationTape<double>::record(y);
  EXPECT_TRUE(tape.is_topological());
  EXPECT_EQ(tape.entries().back(), y.impl());
  EXPECT_EQ(tape.size(), 6u);  // matmul relu mul matmul add mean
}

TEST(Backward, AccumulatesAcrossConsumers) {
  // x feeds three ops; compare with the single fused expression 3*x^2 summed.
  auto x = random_tensor({6}, 5);
  auto y = add(add(mul(x, x), mul(x, x)), mul(x, x));
  backward(sum(y));
  auto x2 = x.clone(true);
  auto three = Tensor<double>::scalar(3.0);
  backward(sum(mul(mul(x2, x2), three)));
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(x.grad()[i], x2.grad()[i], 1e-14);
}

TEST(Backward, IsLinear) {
  auto x = random_tensor({5}, 6);
  auto f = [](const Tensor<double>& t) { return sum(mul(t, t)); };
  auto g = [](const Tensor<double>& t) { return sum(sigmoid(t)); };
  const double a = 0.7, b = -1.3;

  backward(f(x));
  std::vector<double> gf(x.grad().begin(), x.grad().end());
  x.zero_grad();
  backward(g(x));
  std::vector<double> gg(x.grad().begin(), x.grad().end());
  x.zero_grad();
  backward(add(mul(f(x), Tensor<double>::scalar(a)), mul(g(x), Tensor<double>::scalar(b))));
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(x.grad()[i], a * gf[i] + b * gg[i], 1e-13);
}

TEST(Backward, RepeatDeterministic) {
  auto run = [] {
    auto x = random_tensor({3, 4}, 11);
    auto w = random_tensor({4, 2}, 12);
    backward(mean(sigmoid(matmul(x, w))));
    return std::vector<double>(w.grad().begin(), w.grad().end());
  };
  EXPECT_EQ(run(), run());
}

TEST(GradCheck, SumIsExact) {
  auto x = random_tensor({7}, 13);
  EXPECT_LT(grad_check<double>([](const Tensor<double>& t) { return sum(t); }, x), 1e-9);
}

TEST(GradCheck, ElementwiseAndShapeOps) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto a = random_tensor({3, 4}, 100 + seed);
    auto b = random_tensor({3, 4}, 200 + seed);
    auto row = random_tensor({4}, 300 + seed);
    auto f = [&] {
      auto joined = concat<double>({a, mul(b, row)}, 1);  // 3 x 8
      auto r = reshape(joined, {4, 6});
      return mean(mul(sigmoid(r), add(r, Tensor<double>::scalar(0.5))));
    };
    EXPECT_LT(grad_check<double>(f, {a, b, row}), 1e-8) << "seed " << seed;
  }
}

TEST(GradCheck, MatmulTransposes) {
  for (bool ta : {false, true})
    for (bool tb : {false, true}) {
      auto a = random_tensor(ta ? Shape{4, 3} : Shape{3, 4}, 21);
      auto b = random_tensor(tb ? Shape{5, 4} : Shape{4, 5}, 22);
      auto w = random_tensor({3, 5}, 23, false);
      auto f = [&] { return sum(mul(matmul(a, b, ta, tb), w)); };
      EXPECT_LT(grad_check<double>(f, {a, b}), 1e-8) << ta << tb;
    }
}

TEST(GradCheck, ConcatAxisZero) {
  auto a = random_tensor({2, 3}, 31);
  auto b = random_tensor({1, 3}, 32);
  auto w = random_tensor({3, 3}, 33, false);
  auto f = [&] { return sum(mul(concat<double>({a, b}, 0), w)); };
  EXPECT_LT(grad_check<double>(f, {a, b}), 1e-9);
}

TEST(Dispatch, RoutesByKind) {
  std::vector<Tensor<float>> in{Tensor<float>::full({2, 3}, 1.0f), Tensor<float>::full({3, 4}, 1.0f)};
  auto out = nn::forward_op<float>(nn::OpKind::matmul, in);
  EXPECT_EQ(out.shape(), (Shape{2, 4}));
  EXPECT_EQ(kind_of([&] { nn::forward_op<float>(nn::OpKind::relu, in); }), ErrorKind::shape);
}

TEST(Ops, RecordsOnlyWhenGradRequired) {
  auto a = Tensor<float>::full({2}, 1.0f);
  auto b = add(a, a);
  EXPECT_FALSE(b.requires_grad());
  EXPECT_EQ(b.grad_fn(), nullptr);
  a.set_requires_grad(true);
  auto c = add(a, a);
  EXPECT_TRUE(c.requires_grad());
  ASSERT_NE(c.grad_fn(), nullptr);
  EXPECT_EQ(c.grad_fn()->op, "add");
}
