/*
 * Copyright 2026 The UDC Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "udc/numerics/archive.hpp"
#include "udc/numerics/layers.hpp"
#include "udc/numerics/optim.hpp"

using namespace udc;
using namespace udc::nn;

namespace {

using Builder = std::function<Var(Graph&, std::vector<Var>&)>;

// Runs `build` once with gradients, then compares against central differences.
oracle::GradientCheck check_op(std::vector<Parameter>& params, const Builder& build, std::mt19937_64& rng) {
  ParameterList list;
  for (auto& p : params) list.push_back(&p);
  for (auto* p : list) p->zero_grad();
  {
    Graph g;
    std::vector<Var> xs;
    for (auto* p : list) xs.push_back(g.param(*p));
    g.backward(build(g, xs));
  }
  auto loss = [&] {
    Graph g(false);
    std::vector<Var> xs;
    for (auto* p : list) xs.push_back(g.param(*p));
    return build(g, xs).scalar();
  };
  return oracle::finite_difference(list, loss, rng, 64);
}

// Contracts a tensor-valued op to a scalar with fixed random weights.
Var probe(Graph& g, const Var& out, std::uint64_t seed) {
  std::mt19937_64 r(seed);
  return sum(mul(out, g.constant(oracle::random_matrix(out.rows(), out.cols(), r))));
}

}  // namespace

TEST(Tensor, MeanStdOfKnownValues) {
  Matrix m(1, 4);
  m << 1, 2, 3, 4;
  const auto [mu, sd] = mean_std(m);
  EXPECT_DOUBLE_EQ(mu, 2.5);
  EXPECT_NEAR(sd, std::sqrt(1.25), 1e-15);
  EXPECT_THROW(mean_std(Matrix(0, 0)), ContractError);
}

TEST(Tensor, AttentionMatchesPerHeadOracle) {
  std::mt19937_64 rng(3);
  const Matrix q = oracle::random_matrix(3, 8, rng), k = oracle::random_matrix(5, 8, rng),
               v = oracle::random_matrix(5, 8, rng);
  const Matrix out = scaled_dot_attention(q, k, v, 2);
  for (Index r = 0; r < 3; ++r)
    for (int h = 0; h < 2; ++h) {
      std::vector<double> qr(4);
      for (int j = 0; j < 4; ++j) qr[static_cast<std::size_t>(j)] = q(r, h * 4 + j);
      const auto ref = oracle::attention_row(qr, k.middleCols(h * 4, 4), v.middleCols(h * 4, 4));
      for (int j = 0; j < 4; ++j) EXPECT_NEAR(out(r, h * 4 + j), ref[static_cast<std::size_t>(j)], 1e-12);
    }
  EXPECT_THROW(scaled_dot_attention(q, k, v, 3), DimensionError);
}

TEST(Autodiff, ElementwiseOpsMatchFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::vector<std::pair<const char*, Builder>> cases = {
      {"matmul", [](Graph& g, auto& x) { return probe(g, matmul(x[0], x[1]), 1); }},
      {"add_sub", [](Graph& g, auto& x) { return probe(g, sub(add(x[0], x[2]), scale(x[2], 0.3)), 2); }},
      {"mul", [](Graph& g, auto& x) { return probe(g, mul(x[0], x[2]), 3); }},
      {"gelu", [](Graph& g, auto& x) { return probe(g, gelu(x[0]), 4); }},
      {"tanh", [](Graph& g, auto& x) { return probe(g, nn::tanh(x[0]), 5); }},
      {"sigmoid", [](Graph& g, auto& x) { return probe(g, sigmoid(x[0]), 6); }},
      {"softmax", [](Graph& g, auto& x) { return probe(g, softmax_rows(x[0]), 7); }},
      {"lse", [](Graph& g, auto& x) { return log_sum_exp(x[0]); }},
      {"transpose", [](Graph& g, auto& x) { return probe(g, transpose(x[1]), 8); }},
      {"row_reductions",
       [](Graph& g, auto& x) { return add(probe(g, mean_over_rows(x[0]), 9), probe(g, sum_over_rows(x[2]), 10)); }},
      {"norm", [](Graph&, auto& x) { return add(squared_norm(x[0]), mean(x[2])); }},
      {"standardize", [](Graph& g, auto& x) { return probe(g, standardize_rows(x[0], 1e-5), 12); }},
      {"slice_concat",
       [](Graph& g, auto& x) {
         std::vector<Var> parts{slice_rows(x[0], 1, 2), slice_rows(x[2], 0, 1)};
         std::vector<Var> cols{slice_cols(x[0], 0, 2), x[2]};
         return add(probe(g, concat_rows(parts), 13), probe(g, concat_cols(cols), 14));
       }},
      {"gather",
       [](Graph& g, auto& x) {
         const std::vector<int> ids{2, 0, 2};
         return probe(g, gather_rows(x[0], ids), 15);
       }},
      {"bce",
       [](Graph&, auto& x) {
         Matrix t = Matrix::Zero(3, 4);
         t(0, 1) = t(2, 3) = t(1, 0) = 1.0;
         return bce_with_logits(x[0], t);
       }},
  };
  for (auto& [name, build] : cases) {
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<Parameter> ps;
      ps.emplace_back("a", oracle::random_matrix(3, 4, rng));
      ps.emplace_back("b", oracle::random_matrix(4, 5, rng));
      ps.emplace_back("c", oracle::random_matrix(3, 4, rng));
      const auto r = check_op(ps, build, rng);
      EXPECT_LT(r.relative_error, 1e-6) << name;
    }
  }
}

TEST(Autodiff, StraightThroughAndStopGradient) {
  Parameter x("x", Matrix::Constant(1, 3, 0.5));
  Parameter q("q", Matrix::Constant(1, 3, 2.0));
  Graph g;
  Var st = straight_through(g.param(x), g.param(q));
  EXPECT_TRUE(st.value().isApprox(q.value));
  Var loss = add(sum(mul(st, g.constant(Matrix::Constant(1, 3, 3.0)))), sum(stop_gradient(g.param(x))));
  g.backward(loss);
  EXPECT_TRUE(x.grad.isApprox(Matrix::Constant(1, 3, 3.0)));
  EXPECT_EQ(q.grad.norm(), 0.0);
}

TEST(Autodiff, RejectsMisuse) {
  Graph g;
  Var a = g.constant(Matrix::Ones(2, 3));
  EXPECT_THROW(matmul(a, a), DimensionError);
  EXPECT_THROW(g.backward(a), ContractError);
  Graph other;
  EXPECT_THROW(add(a, other.constant(Matrix::Ones(2, 3))), ContractError);
}

TEST(Layers, MlpMatchesScalarOracle) {
  std::mt19937_64 rng(5);
  Mlp mlp("m", {3, 4, 2}, Activation::gelu, rng);
  const Matrix x = oracle::random_matrix(2, 3, rng);
  const Matrix y = mlp.evaluate(x);
  std::vector<std::pair<Matrix, Matrix>> layers;
  for (const auto& l : mlp.layers()) layers.emplace_back(l.weight.value, l.bias.value);
  for (Index r = 0; r < 2; ++r) {
    const auto ref = oracle::mlp_forward({x(r, 0), x(r, 1), x(r, 2)}, layers, oracle::gelu);
    for (Index c = 0; c < 2; ++c) EXPECT_NEAR(y(r, c), ref[static_cast<std::size_t>(c)], 1e-12);
  }
  Graph g(false);
  EXPECT_TRUE(mlp.forward(g, g.constant(x)).value().isApprox(y, 1e-14));
}

TEST(Layers, AttentionAndLayerNormGradients) {
  std::mt19937_64 rng(8);
  MultiHeadAttention mha("a", 4, 4, 2, rng);
  LayerNorm ln("ln", 4);
  ln.gain.value = oracle::random_matrix(1, 4, rng);
  Parameter x("x", oracle::random_matrix(3, 4, rng));
  Parameter kv("kv", oracle::random_matrix(5, 4, rng));
  ParameterList ps = mha.parameters();
  ps.push_back(&ln.gain);
  ps.push_back(&ln.bias);
  ps.push_back(&x);
  ps.push_back(&kv);
  auto build = [&](Graph& g) {
    Var kvv = g.param(kv);
    return probe(g, ln.forward(g, mha.forward(g, g.param(x), kvv, kvv)), 21);
  };
  AdamW::zero_grad(ps);
  {
    Graph g;
    g.backward(build(g));
  }
  const auto r = oracle::finite_difference(ps, [&] { Graph g(false); return build(g).scalar(); }, rng, 64);
  EXPECT_LT(r.relative_error, 1e-6);
}

TEST(Optim, AdamWFirstStepMatchesHandFormula) {
  Parameter p("p", Matrix::Constant(1, 2, 1.0));
  p.grad << 0.5, -2.0;
  AdamW opt({0.1, 0.9, 0.999, 1e-8, 0.01});
  opt.step({&p});
  // First step: m^ = g, v^ = g^2, so the update is lr * g / (|g| + eps).
  EXPECT_NEAR(p.value(0, 0), 1.0 * (1 - 0.001) - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(p.value(0, 1), 1.0 * (1 - 0.001) + 0.1 * 2.0 / (2.0 + 1e-8), 1e-15);
  p.grad(0, 0) = std::nan("");
  EXPECT_THROW(opt.step({&p}), NumericError);
}

TEST(Archive, RoundTripIsBitExact) {
  std::mt19937_64 rng(2);
  TensorArchive ar;
  ar.put("w", oracle::random_matrix(3, 7, rng));
  ar.put("empty", Matrix(0, 4));
  ar.put_text("flags", "NCO");
  const auto path = std::filesystem::temp_directory_path() / "udc_archive_test.ckpt";
  ar.save(path);
  const TensorArchive back = TensorArchive::load(path);
  EXPECT_EQ(back.get("w"), ar.get("w"));
  EXPECT_EQ(back.get("empty").cols(), 4);
  EXPECT_EQ(back.text("flags"), "NCO");
  EXPECT_EQ(back.checksum(), ar.checksum());
  EXPECT_THROW(back.get("missing"), ParseError);
  std::filesystem::remove(path);
  EXPECT_THROW(TensorArchive::load(path), StageError);
}

TEST(Archive, CorruptionIsDetected) {
  TensorArchive ar;
  ar.put("w", Matrix::Ones(2, 2));
  std::string bytes = ar.serialize();
  bytes[bytes.size() / 2] ^= 0x01;
  EXPECT_THROW(TensorArchive::deserialize(bytes), ParseError);
  EXPECT_THROW(TensorArchive::deserialize("junk"), ParseError);
}

TEST(Archive, RestoreChecksShape) {
  TensorArchive ar;
  ar.put("p", Matrix::Ones(2, 2));
  Parameter p("p", Matrix::Zero(2, 3));
  EXPECT_THROW(ar.restore(p), DimensionError);
}
