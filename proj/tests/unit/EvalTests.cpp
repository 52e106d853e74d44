//===- EvalTests.cpp - reference evaluator tests --------------------------===//
//
// Part of the ttir project, under the Apache License v2.0 with LLVM Exceptions.
// SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception
//
//===----------------------------------------------------------------------===//

#include "ttir/Eval.hpp"
#include "ttir/Text.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace ttir;

namespace {

DenseTensor randomTensor(std::vector<int64_t> shape, std::mt19937 &rng) {
  DenseTensor t = DenseTensor::zeros(std::move(shape));
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  for (float &v : t.data)
    v = dist(rng);
  return t;
}

const char *kMatmulAddSource =
    "func.func @main(%a: tensor<6x5xf32>, %b: tensor<5x7xf32>, "
    "%bias: tensor<6x7xf32>, %init: tensor<6x7xf32>) -> tensor<6x7xf32> {\n"
    "  %mm = linalg.matmul ins(%a, %b : tensor<6x5xf32>, tensor<5x7xf32>) "
    "outs(%init : tensor<6x7xf32>) -> tensor<6x7xf32>\n"
    "  %r = linalg.elemwise_binary {fun = \"add\"} ins(%mm, %bias : "
    "tensor<6x7xf32>, tensor<6x7xf32>) outs(%init : tensor<6x7xf32>) -> "
    "tensor<6x7xf32>\n"
    "  func.return %r : tensor<6x7xf32>\n"
    "}\n";

} // namespace

TEST_CASE("evaluator matches a hand-written matmul oracle") {
  SourceMap sm;
  ParseResult parsed = parseSource("mm.mlir", kMatmulAddSource, sm);
  REQUIRE(parsed.ok);

  std::mt19937 rng(7);
  DenseTensor a = randomTensor({6, 5}, rng);
  DenseTensor b = randomTensor({5, 7}, rng);
  DenseTensor bias = randomTensor({6, 7}, rng);
  DenseTensor init = randomTensor({6, 7}, rng);

  Evaluator ev(parsed.module.get());
  std::vector<DenseTensor> results;
  REQUIRE(ev.evalFunction("main", {a, b, bias, init}, results).succeeded());
  REQUIRE(results.size() == 1);

  // Triple-loop oracle: out = init + a*b, then + bias.
  for (int64_t i = 0; i < 6; ++i) {
    for (int64_t j = 0; j < 7; ++j) {
      float acc = init.at({i, j});
      for (int64_t k = 0; k < 5; ++k)
        acc += a.at({i, k}) * b.at({k, j});
      float expected = acc + bias.at({i, j});
      CHECK(results[0].at({i, j}) == doctest::Approx(expected).epsilon(1e-5));
    }
  }
}

TEST_CASE("parallel loop order does not change results bit for bit") {
  SourceMap sm;
  ParseResult parsed = parseSource("mm.mlir", kMatmulAddSource, sm);
  REQUIRE(parsed.ok);

  std::mt19937 rng(11);
  std::vector<DenseTensor> args = {
      randomTensor({6, 5}, rng), randomTensor({5, 7}, rng),
      randomTensor({6, 7}, rng), randomTensor({6, 7}, rng)};

  Evaluator forward(parsed.module.get());
  Evaluator reversed(parsed.module.get(), /*reverseLoops=*/true);
  std::vector<DenseTensor> a, b;
  REQUIRE(forward.evalFunction("main", args, a).succeeded());
  REQUIRE(reversed.evalFunction("main", args, b).succeeded());
  REQUIRE(a.size() == b.size());
  CHECK(a[0].data == b[0].data);
}

TEST_CASE("tensor files round trip") {
  std::mt19937 rng(3);
  DenseTensor t = randomTensor({3, 4, 2}, rng);
  std::stringstream ss;
  writeTensor(ss, t);

  std::string error;
  std::optional<DenseTensor> back = readTensor(ss, error);
  REQUIRE(back.has_value());
  CHECK(back->shape == t.shape);
  REQUIRE(back->data.size() == t.data.size());
  for (size_t i = 0; i < t.data.size(); ++i)
    CHECK(back->data[i] == doctest::Approx(t.data[i]).epsilon(1e-6));
}

TEST_CASE("relative error comparison") {
  DenseTensor a = DenseTensor::splat({2, 2}, 1.0f);
  DenseTensor b = DenseTensor::splat({2, 2}, 1.0f);
  auto same = maxRelativeError(a, b);
  REQUIRE(same.has_value());
  CHECK(*same == 0.0);

  a.data[3] = 1.1f;
  auto off = maxRelativeError(a, b);
  REQUIRE(off.has_value());
  CHECK(*off == doctest::Approx(0.1).epsilon(1e-3));

  DenseTensor c = DenseTensor::splat({3}, 1.0f);
  CHECK(!maxRelativeError(a, c).has_value());
}

TEST_CASE("evaluating an unknown function fails cleanly") {
  SourceMap sm;
  ParseResult parsed = parseSource("mm.mlir", kMatmulAddSource, sm);
  REQUIRE(parsed.ok);
  Evaluator ev(parsed.module.get());
  std::vector<DenseTensor> results;
  CHECK(!ev.evalFunction("missing", {}, results).succeeded());
}
