//===- IRTests.cpp - core IR data structure tests -------------------------===//
//
// Part of the ttir project, under the Apache License v2.0 with LLVM Exceptions.
// SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception
//
//===----------------------------------------------------------------------===//

#include "ttir/IR.hpp"

#include <doctest.h>

using namespace ttir;

TEST_CASE("affine map application at a convolution access point") {
  // Input access of a 2D channeled convolution:
  // (n, y, x, co, ry, rx, ci) -> (n, y + ry, x + rx, ci).
  AffineMap m;
  m.numDims = 7;
  AffineExpr n, yry, xrx, ci;
  n.dims = {0};
  yry.dims = {1, 4};
  xrx.dims = {2, 5};
  ci.dims = {6};
  m.results = {n, yry, xrx, ci};

  std::vector<int64_t> out;
  REQUIRE(m.apply({0, 3, 4, 0, 1, 2, 5}, out).succeeded());
  CHECK(out == std::vector<int64_t>{0, 4, 6, 5});

  // Arity mismatch is a definite failure.
  CHECK(m.apply({0, 1}, out).isDefinite());
}

TEST_CASE("projected permutations invert to dim positions") {
  AffineMap lhs = AffineMap::projection(3, {0, 2});
  CHECK(lhs.isProjectedPermutation());
  std::map<int, int> inv;
  REQUIRE(lhs.invertProjected(inv).succeeded());
  CHECK(inv == std::map<int, int>{{0, 0}, {2, 1}});

  AffineMap id = AffineMap::identity(4);
  CHECK(id.isProjectedPermutation());
  REQUIRE(id.invertProjected(inv).succeeded());
  CHECK(inv.size() == 4);
  for (int d = 0; d < 4; ++d)
    CHECK(inv.at(d) == d);

  // A sum expression is not a projected permutation.
  AffineMap conv;
  conv.numDims = 3;
  AffineExpr sum;
  sum.dims = {0, 1};
  conv.results = {sum};
  CHECK(!conv.isProjectedPermutation());
  CHECK(conv.invertProjected(inv).isDefinite());
}

TEST_CASE("erased ops move to the graveyard and release their operands") {
  Location loc;
  auto module = makeModule(loc);
  Block *body = &module->region(0)->block;
  OpBuilder b = OpBuilder::atEnd(body);
  Operation *def = b.create(loc, "arith.constant", {},
                            {Type::scalar(ElemKind::F32)});
  Operation *use =
      b.create(loc, "arith.addf", {def->result(0), def->result(0)},
               {Type::scalar(ElemKind::F32)});
  CHECK(def->result(0)->hasUses());

  std::vector<std::unique_ptr<Operation>> graveyard;
  eraseOp(use, &graveyard);
  CHECK(use->dead);
  CHECK(!def->result(0)->hasUses());
  CHECK(body->ops.size() == 1);
  REQUIRE(graveyard.size() == 1);
  CHECK(graveyard[0].get() == use);
}

TEST_CASE("use-def consistency check detects corrupted use records") {
  Location loc;
  auto module = makeModule(loc);
  OpBuilder b = OpBuilder::atEnd(&module->region(0)->block);
  Operation *def = b.create(loc, "arith.constant", {},
                            {Type::scalar(ElemKind::F32)});
  b.create(loc, "arith.addf", {def->result(0), def->result(0)},
           {Type::scalar(ElemKind::F32)});

  std::string err;
  CHECK(checkUseDefConsistency(module.get(), &err));

  def->result(0)->uses.clear();
  CHECK(!checkUseDefConsistency(module.get(), &err));
  CHECK(!err.empty());
}

TEST_CASE("walkPreorder visits nested ops, excluding the root") {
  Location loc;
  auto module = makeModule(loc);
  OpBuilder b = OpBuilder::atEnd(&module->region(0)->block);
  Operation *fn =
      b.create(loc, "func.func", {}, {}, {{"sym_name", std::string("f")}}, 1);
  OpBuilder inner = OpBuilder::atEnd(&fn->region(0)->block);
  inner.create(loc, "arith.constant", {}, {Type::scalar(ElemKind::F32)});
  inner.create(loc, "arith.constant", {}, {Type::scalar(ElemKind::F32)});

  auto all = walkPreorder(module.get(), [](Operation *) { return true; });
  CHECK(all.size() == 3);
  CHECK(all[0] == fn);
  auto consts = walkPreorder(
      module.get(), [](Operation *o) { return o->name == "arith.constant"; });
  CHECK(consts.size() == 2);
}
