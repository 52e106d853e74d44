//===- TransformTests.cpp - transform interpreter tests -------------------===//
//
// Part of the ttir project, under the Apache License v2.0 with LLVM Exceptions.
// SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception
//
//===----------------------------------------------------------------------===//

#include "ttir/Text.hpp"
#include "ttir/Transform.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace ttir;

namespace {

struct LoadedCase {
  SourceMap sm;
  ParseResult parsed;
};

LoadedCase loadCase(const std::string &name) {
  std::ifstream is(std::string(TEST_DATA_DIR) + "/cases/" + name);
  REQUIRE(is.good());
  std::ostringstream ss;
  ss << is.rdbuf();
  LoadedCase c;
  c.parsed = parseSource(name, ss.str(), c.sm);
  REQUIRE(c.parsed.ok);
  return c;
}

LoadedCase loadText(const std::string &text) {
  LoadedCase c;
  c.parsed = parseSource("inline.mlir", text, c.sm);
  REQUIRE(c.parsed.ok);
  return c;
}

PayloadList opsNamed(Operation *module, const std::string &name) {
  PayloadList list;
  for (Operation *op : walkPreorder(
           module, [&](Operation *o) { return o->name == name; }))
    list.push_back(PayloadRef::makeOp(op));
  return list;
}

} // namespace

TEST_CASE("remarks are emitted at the bound payload ops") {
  LoadedCase c = loadCase("fc_relu.mlir");
  Registry registry = buildFullRegistry();
  Interpreter interp(c.parsed.module.get(), registry, {});
  Result r = interp.run("__transform_main",
                        {opsNamed(c.parsed.module.get(), "linalg.matmul"),
                         opsNamed(c.parsed.module.get(),
                                  "linalg.elemwise_binary")});
  REQUIRE(r.succeeded());

  int matmulRemarks = 0, elemwiseRemarks = 0;
  for (const Diagnostic &d : interp.diagnostics()) {
    if (d.severity != Severity::Remark)
      continue;
    if (d.message == "matmul")
      ++matmulRemarks;
    if (d.message == "elemwise_binaries")
      ++elemwiseRemarks;
  }
  CHECK(matmulRemarks == 1);
  CHECK(elemwiseRemarks == 2);
}

TEST_CASE("using a consumed handle is reported with notes") {
  LoadedCase c = loadCase("invalidation-1.mlir");
  Registry registry = buildFullRegistry();
  Interpreter interp(c.parsed.module.get(), registry, {});
  Result r = interp.run("__transform_main",
                        {opsNamed(c.parsed.module.get(), "linalg.matmul"),
                         opsNamed(c.parsed.module.get(),
                                  "linalg.elemwise_binary")});
  REQUIRE(!r.succeeded());
  CHECK(r.isDefinite());
  CHECK(r.diag().message ==
        "op uses a handle invalidated by a previously executed transform op");
  REQUIRE(r.diag().notes.size() >= 2);
  CHECK(r.diag().notes[0].message == "handle to invalidated ops");
  CHECK(r.diag().notes[1].message.find(
            "invalidated by this transform op that consumes its operand #0") ==
        0);
}

TEST_CASE("disabling expensive checks degrades to a staleness error") {
  LoadedCase c = loadCase("invalidation-1.mlir");
  Registry registry = buildFullRegistry();
  InterpreterOptions opts;
  opts.expensiveChecks = false;
  Interpreter interp(c.parsed.module.get(), registry, opts);
  Result r = interp.run("__transform_main",
                        {opsNamed(c.parsed.module.get(), "linalg.matmul"),
                         opsNamed(c.parsed.module.get(),
                                  "linalg.elemwise_binary")});
  // Consumption dissociated the handle; the cheap staleness check reports
  // that instead of the invalidation analysis.
  REQUIRE(!r.succeeded());
  CHECK(r.diag().message.find("not associated with any payload") !=
        std::string::npos);
}

TEST_CASE("cast aliases share invalidation") {
  LoadedCase c = loadCase("cast-invalidation.mlir");
  Registry registry = buildFullRegistry();
  Interpreter interp(c.parsed.module.get(), registry, {});
  Result r = interp.run("__transform_main",
                        {opsNamed(c.parsed.module.get(), "linalg.matmul"),
                         opsNamed(c.parsed.module.get(),
                                  "linalg.elemwise_binary")});
  REQUIRE(!r.succeeded());
  CHECK(r.diag().message ==
        "op uses a handle invalidated by a previously executed transform op");
}

TEST_CASE("split and merge reshape payload lists") {
  LoadedCase c = loadText(
      "module attributes {transform.with_named_sequence} {\n"
      "  func.func @f(%a: tensor<4x4xf32>, %b: tensor<4x4xf32>, "
      "%i: tensor<4x4xf32>) -> tensor<4x4xf32> {\n"
      "    %x = linalg.elemwise_binary {fun = \"add\"} ins(%a, %b : "
      "tensor<4x4xf32>, tensor<4x4xf32>) outs(%i : tensor<4x4xf32>) -> "
      "tensor<4x4xf32>\n"
      "    %y = linalg.elemwise_binary {fun = \"mul\"} ins(%x, %b : "
      "tensor<4x4xf32>, tensor<4x4xf32>) outs(%i : tensor<4x4xf32>) -> "
      "tensor<4x4xf32>\n"
      "    func.return %y : tensor<4x4xf32>\n"
      "  }\n"
      "  transform.named_sequence @__transform_main(%root: !transform.any_op,"
      " %ops: !transform.any_op) {\n"
      "    %first, %second = transform.split_handle %ops\n"
      "        : (!transform.any_op) -> (!transform.any_op, "
      "!transform.any_op)\n"
      "    transform.debug.emit_remark_at %first, \"first\" : "
      "!transform.any_op\n"
      "    %merged = transform.merge_handles %second, %first : "
      "!transform.any_op\n"
      "    transform.debug.emit_remark_at %merged, \"merged\" : "
      "!transform.any_op\n"
      "    transform.yield\n"
      "  }\n"
      "}\n");
  Registry registry = buildFullRegistry();
  Interpreter interp(c.parsed.module.get(), registry, {});
  Result r = interp.run(
      "__transform_main",
      {opsNamed(c.parsed.module.get(), "linalg.elemwise_binary")});
  REQUIRE(r.succeeded());
  int firsts = 0, merged = 0;
  for (const Diagnostic &d : interp.diagnostics()) {
    if (d.message == "first")
      ++firsts;
    if (d.message == "merged")
      ++merged;
  }
  CHECK(firsts == 1);
  CHECK(merged == 2);
}

TEST_CASE("split_handle with the wrong arity fails silenceably") {
  LoadedCase c = loadText(
      "module attributes {transform.with_named_sequence} {\n"
      "  func.func @f(%a: tensor<4x4xf32>, %b: tensor<4x4xf32>, "
      "%i: tensor<4x4xf32>) -> tensor<4x4xf32> {\n"
      "    %x = linalg.elemwise_binary {fun = \"add\"} ins(%a, %b : "
      "tensor<4x4xf32>, tensor<4x4xf32>) outs(%i : tensor<4x4xf32>) -> "
      "tensor<4x4xf32>\n"
      "    func.return %x : tensor<4x4xf32>\n"
      "  }\n"
      "  transform.named_sequence @__transform_main(%root: !transform.any_op,"
      " %ops: !transform.any_op) {\n"
      "    %first, %second = transform.split_handle %ops\n"
      "        : (!transform.any_op) -> (!transform.any_op, "
      "!transform.any_op)\n"
      "    transform.yield\n"
      "  }\n"
      "}\n");
  Registry registry = buildFullRegistry();
  Interpreter interp(c.parsed.module.get(), registry, {});
  Result r = interp.run(
      "__transform_main",
      {opsNamed(c.parsed.module.get(), "linalg.elemwise_binary")});
  // Unsilenced top-level failures are escalated to hard errors.
  REQUIRE(!r.succeeded());
  CHECK(r.diag().message.find("expected 2 payload ops, got 1") !=
        std::string::npos);
}

TEST_CASE("include failure modes: propagate surfaces, suppress silences") {
  const char *source =
      "module attributes {transform.with_named_sequence} {\n"
      "  func.func @f(%a: tensor<4x4xf32>, %b: tensor<4x4xf32>, "
      "%i: tensor<4x4xf32>) -> tensor<4x4xf32> {\n"
      "    %x = linalg.elemwise_binary {fun = \"add\"} ins(%a, %b : "
      "tensor<4x4xf32>, tensor<4x4xf32>) outs(%i : tensor<4x4xf32>) -> "
      "tensor<4x4xf32>\n"
      "    func.return %x : tensor<4x4xf32>\n"
      "  }\n"
      "  transform.named_sequence @must_be_matmul(%op: !transform.any_op) {\n"
      "    transform.match.operation_name %op [\"linalg.matmul\"] : "
      "!transform.any_op\n"
      "    transform.debug.emit_remark_at %op, \"was a matmul\" : "
      "!transform.any_op\n"
      "    transform.yield\n"
      "  }\n"
      "  transform.named_sequence @__transform_main(%root: !transform.any_op,"
      " %ops: !transform.any_op) {\n"
      "    transform.include @must_be_matmul failures(MODE) (%ops) : "
      "(!transform.any_op) -> ()\n"
      "    transform.debug.emit_remark_at %ops, \"after include\" : "
      "!transform.any_op\n"
      "    transform.yield\n"
      "  }\n"
      "}\n";

  auto withMode = [&](const std::string &mode) {
    std::string text = source;
    text.replace(text.find("MODE"), 4, mode);
    return text;
  };

  SUBCASE("propagate") {
    LoadedCase c = loadText(withMode("propagate"));
    Registry registry = buildFullRegistry();
    Interpreter interp(c.parsed.module.get(), registry, {});
    Result r = interp.run(
        "__transform_main",
        {opsNamed(c.parsed.module.get(), "linalg.elemwise_binary")});
    REQUIRE(!r.succeeded());
    CHECK(r.diag().message.find("wrong operation name") != std::string::npos);
    for (const Diagnostic &d : interp.diagnostics())
      CHECK(d.message != "after include");
  }

  SUBCASE("suppress") {
    LoadedCase c = loadText(withMode("suppress"));
    Registry registry = buildFullRegistry();
    Interpreter interp(c.parsed.module.get(), registry, {});
    Result r = interp.run(
        "__transform_main",
        {opsNamed(c.parsed.module.get(), "linalg.elemwise_binary")});
    REQUIRE(r.succeeded());
    // The included sequence stopped at the failing match; nothing after it
    // ran inside the include, but the caller continued.
    bool sawAfter = false, sawMatmulRemark = false;
    for (const Diagnostic &d : interp.diagnostics()) {
      if (d.message == "after include")
        sawAfter = true;
      if (d.message == "was a matmul")
        sawMatmulRemark = true;
    }
    CHECK(sawAfter);
    CHECK(!sawMatmulRemark);
  }
}

TEST_CASE("unregistered transform ops are definite failures") {
  LoadedCase c = loadText(
      "module attributes {transform.with_named_sequence} {\n"
      "  transform.named_sequence @__transform_main(%root: "
      "!transform.any_op) {\n"
      "    transform.debug.emit_remark_at %root, \"hello\" : "
      "!transform.any_op\n"
      "    transform.yield\n"
      "  }\n"
      "}\n");
  Registry empty;
  Interpreter interp(c.parsed.module.get(), empty, {});
  Result r = interp.run("__transform_main", {});
  REQUIRE(!r.succeeded());
  CHECK(r.isDefinite());
}
