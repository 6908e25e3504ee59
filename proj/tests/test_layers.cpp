#include <gtest/gtest.h>

#include <cmath>

#include "grad_util.hpp"
#include "hatebench/layers.hpp"

using namespace hatebench;
using namespace hatebench::nn;

namespace {
Tensor<double> T1(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor<double>({n}, std::move(v));
}
}  // namespace

TEST(Embedding, Gather) {
  Tensor<double> table({3, 2}, std::vector<double>{0, 0, 1, 2, 3, 4});
  const std::vector<int> ids{2, 1};
  EXPECT_EQ(embedding_forward(table, std::span<const int>(ids)), Tensor<double>({2, 2}, std::vector<double>{3, 4, 1, 2}));
  const std::vector<int> pad{0, 0, 0};
  EXPECT_EQ(embedding_forward(table, std::span<const int>(pad)), Tensor<double>({3, 2}));
  const std::vector<int> bad{3};
  try {
    embedding_forward(table, std::span<const int>(bad));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IdOutOfRange);
  }
}

TEST(Embedding, BackwardScatterAdds) {
  Tensor<double> dt({3, 2});
  const std::vector<int> ids{1, 1};
  embedding_backward(std::span<const int>(ids), Tensor<double>({2, 2}, 1.0), dt);
  EXPECT_EQ(dt(1, 0), 2.0);
  EXPECT_EQ(dt(1, 1), 2.0);
  const std::vector<int> pad{0};
  embedding_backward(std::span<const int>(pad), Tensor<double>({1, 2}, 5.0), dt);
  EXPECT_EQ(dt(0, 0), 0.0);
}

TEST(Conv, Examples) {
  Tensor<double> x({3, 1}, std::vector<double>{1, 2, 3});
  Tensor<double> f({1, 2, 1}, std::vector<double>{1, 1});
  EXPECT_EQ(conv1d_forward(x, f, T1({0})), Tensor<double>({2, 1}, std::vector<double>{3, 5}));
  Tensor<double> zero({1, 2, 1});
  EXPECT_EQ(conv1d_forward(x, zero, T1({0.7})), Tensor<double>({2, 1}, 0.7));
  Tensor<double> id({1, 1, 1}, std::vector<double>{1});
  EXPECT_EQ(conv1d_forward(x, id, T1({0})), x);
  Tensor<double> k5({1, 5, 1});
  try {
    conv1d_forward(x, k5, T1({0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(Conv, ZeroWindowShortcutMatchesFullSum) {
  Rng rng(2);
  auto x = gradtest::random_tensor({8, 3}, rng);
  for (std::size_t t = 4; t < 8; ++t)
    for (auto& v : x.row(t)) v = 0.0;
  const auto f = gradtest::random_tensor({2, 2, 3}, rng);
  const auto b = gradtest::random_tensor({2}, rng);
  const auto out = conv1d_forward(x, f, b);
  for (std::size_t t = 0; t < out.dim(0); ++t) {
    for (std::size_t j = 0; j < 2; ++j) {
      double s = b[j];
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t d = 0; d < 3; ++d) s += x(t + i, d) * f(j, i, d);
      EXPECT_NEAR(out(t, j), s, 1e-15);
    }
  }
}

TEST(MaxPool, Examples) {
  Tensor<double> x({2, 2}, std::vector<double>{1, 5, 3, 2});
  EXPECT_EQ(max_pool_time(x).out, T1({3, 5}));
  Tensor<double> one({1, 3}, std::vector<double>{4, -1, 2});
  EXPECT_EQ(max_pool_time(one).out, T1({4, -1, 2}));
  Tensor<double> tie({2, 1}, std::vector<double>{2, 2});
  const auto r = max_pool_time(tie);
  const auto dx = max_pool_time_backward(std::span<const std::size_t>(r.argmax), T1({1.0}), 2);
  EXPECT_EQ(dx(0, 0), 1.0);
  EXPECT_EQ(dx(1, 0), 0.0);
  try {
    max_pool_time(Tensor<double>({0, 2}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyTime);
  }
}

TEST(Activation, Examples) {
  const auto y = apply_activation(Activation::Elu, T1({0.0, 1.0, -1.0}));
  EXPECT_EQ(y[0], 0.0);
  EXPECT_EQ(y[1], 1.0);
  EXPECT_NEAR(y[2], std::exp(-1.0) - 1.0, 1e-15);
  EXPECT_NEAR(y[2], -0.632121, 1e-6);
  EXPECT_EQ(apply_activation(Activation::Sigmoid, T1({0.0}))[0], 0.5);
  EXPECT_NEAR(apply_activation(Activation::Tanh, T1({0.5}))[0], std::tanh(0.5), 1e-15);
}

TEST(Dense, Examples) {
  Tensor<double> I({2, 2}, std::vector<double>{1, 0, 0, 1});
  EXPECT_EQ(dense_forward(T1({3, 4}), I, T1({0, 0})), T1({3, 4}));
  EXPECT_EQ(dense_forward(T1({3, 4}), Tensor<double>({3, 2}), T1({1, 1, 1})), T1({1, 1, 1}));
  Tensor<double> W({2, 2}, std::vector<double>{1, 2, 3, 4});
  // (1*5 + 2*6 + 0.5, 3*5 + 4*6 - 1)
  EXPECT_EQ(dense_forward(T1({5, 6}), W, T1({0.5, -1})), T1({17.5, 38}));
  EXPECT_THROW(dense_forward(T1({1, 2, 3}), W, T1({0, 0})), Error);
}

namespace {

struct ScalarGru {
  ParamStore<double> store;
  GruParams<double> p;
  ScalarGru(double wz, double uz, double bz, double wr, double ur, double br, double wh, double uh, double bh) {
    const double v[3][3] = {{wz, uz, bz}, {wr, ur, br}, {wh, uh, bh}};
    for (std::size_t g = 0; g < 3; ++g) {
      store.add(gru_name("s.", 'W', g), Tensor<double>({1, 1}, v[g][0]));
      store.add(gru_name("s.", 'U', g), Tensor<double>({1, 1}, v[g][1]));
      store.add(gru_name("s.", 'b', g), Tensor<double>({1}, v[g][2]));
    }
    p = gru_params(store, "s.");
  }
};

double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

TEST(Gru, GateClosedKeepsState) {
  ParamStore<double> s;
  Rng rng(1);
  add_gru_params(s, "g.", 2, 3, rng);
  for (auto& [_, p] : s) p.value.fill(0.0);
  s.value(gru_name("g.", 'b', kUpdate)).fill(-20.0);
  const auto h = gru_cell(std::span<const double>(T1({0.3, -0.2}).data()), T1({0.5, -0.4, 0.9}), gru_params(s, "g."));
  EXPECT_NEAR(h[0], 0.5, 1e-8);
  EXPECT_NEAR(h[1], -0.4, 1e-8);
  EXPECT_NEAR(h[2], 0.9, 1e-8);
  s.value(gru_name("g.", 'b', kUpdate)).fill(20.0);
  const auto h2 = gru_cell(std::span<const double>(T1({0.3, -0.2}).data()), T1({0.5, -0.4, 0.9}), gru_params(s, "g."));
  for (double v : h2.data()) EXPECT_NEAR(v, 0.0, 1e-8);
}

TEST(Gru, ScalarHandComputation) {
  ScalarGru g(0.5, -0.3, 0.1, 0.2, 0.4, -0.1, 0.7, 0.6, 0.05);
  const double x = 0.8, hp = -0.5;
  const double z = sig(0.5 * x - 0.3 * hp + 0.1);
  const double r = sig(0.2 * x + 0.4 * hp - 0.1);
  const double hh = std::tanh(0.7 * x + 0.6 * r * hp + 0.05);
  const double expect = (1 - z) * hp + z * hh;
  const auto h = gru_cell(std::span<const double>(T1({x}).data()), T1({hp}), g.p);
  EXPECT_NEAR(h[0], expect, 1e-15);
}

TEST(Gru, ConvexCombinationBound) {
  Rng rng(31);
  ParamStore<double> s;
  add_gru_params(s, "g.", 3, 5, rng);
  for (auto& [_, p] : s)
    for (auto& v : p.value.data()) v = rng.uniform(-3, 3);
  for (int t = 0; t < 200; ++t) {
    const auto x = gradtest::random_tensor({3}, rng, -5, 5);
    const auto hp = gradtest::random_tensor({5}, rng, -2, 2);
    const auto h = gru_cell(std::span<const double>(x.data()), hp, gru_params(s, "g."));
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_GE(h[i], std::min(hp[i], -1.0) - 1e-12);
      EXPECT_LE(h[i], std::max(hp[i], 1.0) + 1e-12);
    }
  }
}

TEST(BiGru, SingleStepMatchesCell) {
  Rng rng(4);
  gradtest::GruFixture fx(2, 3, rng, {"f.", "b."});
  const auto x = gradtest::random_tensor({1, 2}, rng);
  const auto pf = gru_params(fx.store, "f.");
  const auto pb = gru_params(fx.store, "b.");
  const auto tr = bigru_sequence(x, pf, pb);
  EXPECT_EQ(tr.h_fwd, gru_cell(x.row(0), Tensor<double>({3}), pf));
  EXPECT_EQ(tr.h_bwd, gru_cell(x.row(0), Tensor<double>({3}), pb));
}

TEST(BiGru, PalindromeWithTiedParams) {
  Rng rng(5);
  gradtest::GruFixture fx(2, 3, rng, {"f."});
  Tensor<double> x({5, 2});
  const auto half = gradtest::random_tensor({3, 2}, rng);
  for (std::size_t t = 0; t < 5; ++t) {
    const std::size_t src = t < 3 ? t : 4 - t;
    x(t, 0) = half(src, 0);
    x(t, 1) = half(src, 1);
  }
  const auto p = gru_params(fx.store, "f.");
  const auto tr = bigru_sequence(x, p, p);
  EXPECT_EQ(tr.h_fwd, tr.h_bwd);
}

TEST(BiGru, ZeroInputZeroParams) {
  Rng rng(6);
  gradtest::GruFixture fx(2, 3, rng, {"f.", "b."});
  for (auto& [_, p] : fx.store) p.value.fill(0.0);
  const auto tr = bigru_sequence(Tensor<double>({4, 2}), gru_params(fx.store, "f."), gru_params(fx.store, "b."));
  EXPECT_EQ(tr.h_fwd, Tensor<double>({3}));
  EXPECT_EQ(tr.h_bwd, Tensor<double>({3}));
  try {
    bigru_sequence(Tensor<double>({0, 2}), gru_params(fx.store, "f."), gru_params(fx.store, "b."));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptySequence);
  }
}

TEST(Bce, Examples) {
  const std::vector<double> w1{1, 1, 1};
  EXPECT_NEAR(weighted_bce_loss(T1({1 - 1e-7, 1e-7, 1e-7}), 0, w1), 3e-7, 1e-9);
  EXPECT_NEAR(weighted_bce_loss(T1({0.5, 0.5, 0.5}), 0, w1), 3 * std::log(2.0), 1e-12);
  EXPECT_NEAR(weighted_bce_loss(T1({0.5, 0.5, 0.5}), 0, w1), 2.079442, 1e-6);
  const std::vector<double> w2{2, 1, 1};
  const auto p = T1({0.3, 0.6, 0.2});
  const double gold1 = -std::log(0.3), rest = -std::log(0.4) - std::log(0.8);
  EXPECT_NEAR(weighted_bce_loss(p, 0, w1), gold1 + rest, 1e-12);
  EXPECT_NEAR(weighted_bce_loss(p, 0, w2), 2 * gold1 + rest, 1e-12);
}

TEST(GradCheck, EveryOpAtTenPoints) {
  Rng rng(2024);
  for (int i = 0; i < 10; ++i) {
    EXPECT_LT(gradtest::dense_check(rng), 1e-6);
    EXPECT_LT(gradtest::conv_check(rng), 1e-5);
    EXPECT_LT(gradtest::activation_check(Activation::Elu, rng), 1e-5);
    EXPECT_LT(gradtest::activation_check(Activation::Sigmoid, rng), 1e-5);
    EXPECT_LT(gradtest::activation_check(Activation::Tanh, rng), 1e-5);
    EXPECT_LT(gradtest::maxpool_check(rng), 1e-8);
    EXPECT_LT(gradtest::embedding_check(rng), 1e-5);
    EXPECT_LT(gradtest::gru_cell_check(rng), 1e-5);
    EXPECT_LT(gradtest::bigru_check(rng), 1e-4);
    EXPECT_LT(gradtest::bce_check(rng), 1e-4);
  }
}

TEST(Forward, PureAndRepeatable) {
  Rng rng(8);
  const auto x = gradtest::random_tensor({6, 3}, rng);
  const auto f = gradtest::random_tensor({2, 3, 3}, rng);
  const auto b = gradtest::random_tensor({2}, rng);
  EXPECT_EQ(conv1d_forward(x, f, b), conv1d_forward(x, f, b));
}
