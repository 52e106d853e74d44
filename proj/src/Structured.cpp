//===- Structured.cpp - structured-op view and domain inference ----------===//
//
// Part of the ttir project, under the Apache License v2.0 with LLVM Exceptions.
// SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception
//
//===----------------------------------------------------------------------===//

#include "ttir/Structured.hpp"

#include <algorithm>
#include <set>

namespace ttir {

bool isStructuredOpName(const std::string &name) {
  return name == "linalg.generic" || name == "linalg.matmul" ||
         name == "linalg.elemwise_binary" || name == "linalg.fill";
}

static std::optional<StructuredInfo> genericInfo(Operation *op) {
  StructuredInfo info;
  info.op = op;
  if (!op->hasAttr("indexing_maps") || !op->hasAttr("iterator_types") ||
      !op->hasAttr("ins_count"))
    return std::nullopt;
  info.maps = op->mapArrayAttr("indexing_maps");
  info.iterators = op->iterArrayAttr("iterator_types");
  int insCount = static_cast<int>(op->intAttr("ins_count"));
  if (insCount > op->numOperands())
    return std::nullopt;
  for (int i = 0; i < op->numOperands(); ++i)
    (i < insCount ? info.ins : info.outs).push_back(op->operand(i));
  info.body = BodyKind::Region;
  return info;
}

std::optional<StructuredInfo> getStructuredInfo(Operation *op) {
  const std::string &n = op->name;
  if (n == "linalg.generic")
    return genericInfo(op);

  StructuredInfo info;
  info.op = op;
  if (n == "linalg.matmul") {
    if (op->numOperands() != 3)
      return std::nullopt;
    info.ins = {op->operand(0), op->operand(1)};
    info.outs = {op->operand(2)};
    info.maps = {AffineMap::projection(3, {0, 2}),
                 AffineMap::projection(3, {2, 1}),
                 AffineMap::projection(3, {0, 1})};
    info.iterators = {IteratorKind::Parallel, IteratorKind::Parallel,
                      IteratorKind::Reduction};
    info.body = BodyKind::Matmul;
    return info;
  }
  if (n == "linalg.elemwise_binary") {
    if (op->numOperands() != 3 || !op->hasAttr("fun"))
      return std::nullopt;
    info.ins = {op->operand(0), op->operand(1)};
    info.outs = {op->operand(2)};
    int rank = op->operand(2)->type.rank();
    for (Value *in : info.ins) {
      // Rank-0 tensor inputs broadcast.
      if (in->type.isTensor() && in->type.rank() == 0) {
        AffineMap m;
        m.numDims = rank;
        info.maps.push_back(m);
      } else {
        info.maps.push_back(AffineMap::identity(rank));
      }
    }
    info.maps.push_back(AffineMap::identity(rank));
    info.iterators.assign(static_cast<size_t>(rank), IteratorKind::Parallel);
    const std::string &fun = op->strAttr("fun");
    if (fun == "add")
      info.body = BodyKind::Add;
    else if (fun == "mul")
      info.body = BodyKind::Mul;
    else if (fun == "max_signed")
      info.body = BodyKind::Max;
    else
      return std::nullopt;
    return info;
  }
  if (n == "linalg.fill") {
    if (op->numOperands() != 2)
      return std::nullopt;
    info.ins = {op->operand(0)};
    info.outs = {op->operand(1)};
    int rank = op->operand(1)->type.rank();
    AffineMap scalarMap;
    scalarMap.numDims = rank;
    info.maps = {scalarMap, AffineMap::identity(rank)};
    info.iterators.assign(static_cast<size_t>(rank), IteratorKind::Parallel);
    info.body = BodyKind::Fill;
    return info;
  }
  return std::nullopt;
}

Result inferIterationDomain(const StructuredInfo &info,
                            std::vector<int64_t> &extents) {
  int rank = info.rank();
  extents.assign(static_cast<size_t>(rank), -1);
  Location loc = info.op ? info.op->loc : Location{};

  auto setExtent = [&](int dim, int64_t value) -> Result {
    int64_t &slot = extents[static_cast<size_t>(dim)];
    if (slot >= 0 && slot != value)
      return Result::definiteAt(loc, "contradictory extents for dim " +
                                         std::to_string(dim) + ": " +
                                         std::to_string(slot) + " vs " +
                                         std::to_string(value));
    slot = value;
    return Result::success();
  };

  std::vector<Value *> operands = info.ins;
  operands.insert(operands.end(), info.outs.begin(), info.outs.end());

  // Single-dim results pin extents directly; sums resolve iteratively once
  // all but one of their dims is known.
  for (size_t i = 0; i < operands.size(); ++i) {
    if (!operands[i]->type.isTensor())
      continue;
    const AffineMap &map = info.maps[i];
    const auto &shape = operands[i]->type.shape;
    if (map.results.size() != shape.size())
      return Result::definiteAt(loc, "map result count does not match "
                                     "operand rank");
    for (size_t r = 0; r < map.results.size(); ++r) {
      const AffineExpr &e = map.results[r];
      if (e.isSingleDim()) {
        Result res = setExtent(e.dims[0], shape[r]);
        if (!res.succeeded())
          return res;
      }
    }
  }

  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t i = 0; i < operands.size(); ++i) {
      if (!operands[i]->type.isTensor())
        continue;
      const AffineMap &map = info.maps[i];
      const auto &shape = operands[i]->type.shape;
      for (size_t r = 0; r < map.results.size(); ++r) {
        const AffineExpr &e = map.results[r];
        if (e.dims.size() < 2)
          continue;
        int unknown = -1;
        int64_t knownSum = 0;
        bool multipleUnknown = false;
        for (int d : e.dims) {
          int64_t ext = extents[static_cast<size_t>(d)];
          if (ext < 0) {
            if (unknown >= 0)
              multipleUnknown = true;
            unknown = d;
          } else {
            knownSum += ext;
          }
        }
        if (multipleUnknown)
          continue;
        // size(sum of k dims) = sum of extents - (k - 1)
        int64_t k = static_cast<int64_t>(e.dims.size());
        if (unknown < 0) {
          int64_t expected = knownSum - (k - 1);
          if (expected != shape[r])
            return Result::definiteAt(
                loc, "contradictory extents for summed subscript");
          continue;
        }
        int64_t value = shape[r] - knownSum + (k - 1);
        if (value < 1)
          return Result::definiteAt(loc, "inferred non-positive extent");
        Result res = setExtent(unknown, value);
        if (!res.succeeded())
          return res;
        changed = true;
      }
    }
  }

  for (int d = 0; d < rank; ++d)
    if (extents[static_cast<size_t>(d)] < 0)
      return Result::definiteAt(loc, "underdetermined extent for dim " +
                                         std::to_string(d));
  return Result::success();
}

bool bodyIsMulAddContraction(const StructuredInfo &info) {
  if (info.body == BodyKind::Matmul)
    return true;
  if (info.body != BodyKind::Region)
    return false;
  Operation *op = info.op;
  if (op->regions.size() != 1)
    return false;
  Block &body = op->region(0)->block;
  if (body.numArgs() != static_cast<int>(info.ins.size() + info.outs.size()))
    return false;
  if (info.ins.size() != 2 || info.outs.size() != 1)
    return false;
  // Expect exactly: mulf, addf, yield.
  std::vector<Operation *> ops;
  for (auto &o : body.ops)
    ops.push_back(o.get());
  if (ops.size() != 3)
    return false;
  Operation *mul = ops[0], *add = ops[1], *yield = ops[2];
  if (mul->name != "arith.mulf" || add->name != "arith.addf" ||
      yield->name != "linalg.yield")
    return false;
  if (yield->numOperands() != 1 || yield->operand(0) != add->result(0))
    return false;
  Value *a = body.arg(0), *b = body.arg(1), *acc = body.arg(2);
  bool mulOk = (mul->operand(0) == a && mul->operand(1) == b) ||
               (mul->operand(0) == b && mul->operand(1) == a);
  bool addOk =
      (add->operand(0) == mul->result(0) && add->operand(1) == acc) ||
      (add->operand(0) == acc && add->operand(1) == mul->result(0));
  return mulOk && addOk;
}

Result classifyContractionDims(const StructuredInfo &info,
                               ContractionDims &dims) {
  Location loc = info.op ? info.op->loc : Location{};
  if (info.ins.size() != 2 || info.outs.empty())
    return Result::silenceableAt(loc,
                                 "expected 2 inputs and at least 1 init");
  for (const AffineMap &m : info.maps)
    if (!m.isProjectedPermutation())
      return Result::silenceableAt(loc,
                                   "expected projected permutation maps");
  if (!bodyIsMulAddContraction(info))
    return Result::silenceableAt(loc, "body is not a mulf/addf contraction");

  auto dimsOf = [](const AffineMap &m) {
    std::set<int> s;
    for (const AffineExpr &e : m.results)
      s.insert(e.dims[0]);
    return s;
  };
  std::set<int> lhs = dimsOf(info.inMap(0));
  std::set<int> rhs = dimsOf(info.inMap(1));
  std::set<int> init = dimsOf(info.outMap(0));

  dims = ContractionDims();
  for (int d = 0; d < info.rank(); ++d) {
    bool inLhs = lhs.count(d), inRhs = rhs.count(d), inInit = init.count(d);
    bool reduction =
        info.iterators[static_cast<size_t>(d)] == IteratorKind::Reduction;
    if (reduction && inLhs && inRhs && !inInit)
      dims.reduction.push_back(d);
    else if (!reduction && inLhs && inInit && !inRhs)
      dims.lhsParallel.push_back(d);
    else if (!reduction && inRhs && inInit && !inLhs)
      dims.rhsParallel.push_back(d);
    else if (!reduction && inLhs && inRhs && inInit)
      dims.batch.push_back(d);
    else
      return Result::silenceableAt(loc, "dim " + std::to_string(d) +
                                            " fits no contraction class");
  }
  return Result::success();
}

} // namespace ttir
