//===- TextTests.cpp - parser, printer and diagnostics tests --------------===//
//
// Part of the ttir project, under the Apache License v2.0 with LLVM Exceptions.
// SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception
//
//===----------------------------------------------------------------------===//

#include "ttir/Structured.hpp"
#include "ttir/Text.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace ttir;

static std::string readFileOrEmpty(const std::string &path) {
  std::ifstream is(path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

TEST_CASE("round trip through print and reparse is structurally stable") {
  std::string text =
      readFileOrEmpty(std::string(TEST_DATA_DIR) + "/cases/fc_relu.mlir");
  REQUIRE(!text.empty());

  SourceMap sm;
  ParseResult first = parseSource("fc_relu.mlir", text, sm);
  REQUIRE(first.ok);
  std::string printed = printModule(first.module.get());

  SourceMap sm2;
  ParseResult second = parseSource("printed.mlir", printed, sm2);
  REQUIRE(second.ok);
  CHECK(structurallyEqual(first.module.get(), second.module.get()));

  // Printing is idempotent.
  CHECK(printModule(second.module.get()) == printed);
}

TEST_CASE("parse errors render a caret under the offending token") {
  std::string text = "func.func @f() {\n  %x = arith.bogus 1 : f32\n}\n";
  SourceMap sm;
  ParseResult parsed = parseSource("bad.mlir", text, sm);
  CHECK(!parsed.ok);
  REQUIRE(!parsed.diags.empty());
  std::string rendered = renderDiagnostic(parsed.diags.front(), sm);
  CHECK(rendered.find("bad.mlir:2:") != std::string::npos);
  CHECK(rendered.find("error:") != std::string::npos);
  CHECK(rendered.find("^") != std::string::npos);
}

TEST_CASE("iteration domain of a matmul follows the operand shapes") {
  std::string text =
      "func.func @f(%a: tensor<8x10xf32>, %b: tensor<10x16xf32>, "
      "%c: tensor<8x16xf32>) {\n"
      "  %r = linalg.matmul ins(%a, %b : tensor<8x10xf32>, tensor<10x16xf32>) "
      "outs(%c : tensor<8x16xf32>) -> tensor<8x16xf32>\n"
      "  func.return %r : tensor<8x16xf32>\n"
      "}\n";
  SourceMap sm;
  ParseResult parsed = parseSource("mm.mlir", text, sm);
  REQUIRE(parsed.ok);
  Operation *mm = walkPreorder(parsed.module.get(), [](Operation *o) {
                    return o->name == "linalg.matmul";
                  }).front();
  auto info = getStructuredInfo(mm);
  REQUIRE(info.has_value());
  std::vector<int64_t> extents;
  REQUIRE(inferIterationDomain(*info, extents).succeeded());
  CHECK(extents == std::vector<int64_t>{8, 16, 10});
}

TEST_CASE("contradictory shapes fail domain inference") {
  std::string text =
      "func.func @f(%a: tensor<8x10xf32>, %b: tensor<12x16xf32>, "
      "%c: tensor<8x16xf32>) {\n"
      "  %r = linalg.matmul ins(%a, %b : tensor<8x10xf32>, tensor<12x16xf32>) "
      "outs(%c : tensor<8x16xf32>) -> tensor<8x16xf32>\n"
      "  func.return %r : tensor<8x16xf32>\n"
      "}\n";
  SourceMap sm;
  ParseResult parsed = parseSource("mm.mlir", text, sm);
  REQUIRE(parsed.ok);
  Operation *mm = walkPreorder(parsed.module.get(), [](Operation *o) {
                    return o->name == "linalg.matmul";
                  }).front();
  auto info = getStructuredInfo(mm);
  REQUIRE(info.has_value());
  std::vector<int64_t> extents;
  CHECK(!inferIterationDomain(*info, extents).succeeded());
}

TEST_CASE("operation count is preserved across reprinting") {
  std::string text =
      readFileOrEmpty(std::string(TEST_DATA_DIR) + "/cases/tile.mlir");
  REQUIRE(!text.empty());
  SourceMap sm;
  ParseResult first = parseSource("tile.mlir", text, sm);
  REQUIRE(first.ok);
  size_t count =
      walkPreorder(first.module.get(), [](Operation *) { return true; }).size();

  SourceMap sm2;
  ParseResult second =
      parseSource("tile2.mlir", printModule(first.module.get()), sm2);
  REQUIRE(second.ok);
  CHECK(walkPreorder(second.module.get(), [](Operation *) {
          return true;
        }).size() == count);
}
