//===- StructuredTransforms.cpp - tiling, fusion, outlining, unrolling ----===//
//
// Part of the ttir project, under the Apache License v2.0 with LLVM Exceptions.
// SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception
//
//===----------------------------------------------------------------------===//

#include "ttir/Structured.hpp"
#include "ttir/Transform.hpp"

#include <set>

namespace ttir {

namespace {
/// Per-iteration-dim slice offset: either a static constant or an SSA index
/// value (a scaled induction variable).
struct DimOff {
  Value *dyn = nullptr;
  int64_t cst = 0;
};
} // namespace

static Type indexType() { return Type::scalar(ElemKind::Index); }

static Value *constIndex(OpBuilder &b, Location loc, int64_t v) {
  std::map<std::string, Attr> attrs;
  attrs["value"] = v;
  return b.create(loc, "arith.constant", {}, {indexType()}, std::move(attrs))
      ->result(0);
}

/// Builds the tensor.extract_slice of `src` accessed by a structured op
/// through `map` when its iteration dims are restricted to the given offsets
/// and sizes. Sum expressions accumulate offsets and widen the size by
/// size_i - 1 per extra dim.
static Operation *buildSlice(OpBuilder &b, Location loc, Value *src,
                             const AffineMap &map,
                             const std::vector<DimOff> &offsets,
                             const std::vector<int64_t> &sizes) {
  std::vector<int64_t> staticOffsets, staticSizes;
  std::vector<Value *> dyn;
  for (const AffineExpr &e : map.results) {
    int64_t cst = e.constant;
    std::vector<Value *> dynParts;
    int64_t size = e.dims.empty() ? 1 : 1 - static_cast<int64_t>(e.dims.size());
    for (int d : e.dims) {
      if (offsets[static_cast<size_t>(d)].dyn)
        dynParts.push_back(offsets[static_cast<size_t>(d)].dyn);
      else
        cst += offsets[static_cast<size_t>(d)].cst;
      size += sizes[static_cast<size_t>(d)];
    }
    if (dynParts.empty()) {
      staticOffsets.push_back(cst);
    } else {
      Value *acc = dynParts[0];
      for (size_t i = 1; i < dynParts.size(); ++i)
        acc = b.create(loc, "arith.addi", {acc, dynParts[i]}, {indexType()})
                  ->result(0);
      if (cst != 0)
        acc = b.create(loc, "arith.addi", {acc, constIndex(b, loc, cst)},
                       {indexType()})
                  ->result(0);
      staticOffsets.push_back(kDynamic);
      dyn.push_back(acc);
    }
    staticSizes.push_back(size);
  }
  std::vector<Value *> operands = {src};
  operands.insert(operands.end(), dyn.begin(), dyn.end());
  std::map<std::string, Attr> attrs;
  attrs["static_offsets"] = staticOffsets;
  attrs["static_sizes"] = staticSizes;
  return b.create(loc, "tensor.extract_slice", std::move(operands),
                  {Type::tensor(staticSizes)}, std::move(attrs));
}

static Result expectOpRef(ApplyCtx &ctx, const PayloadRef &ref) {
  if (ref.kind != PayloadRef::Op)
    return Result::definiteAt(ctx.op->loc, "expected an op handle");
  return Result::success();
}

static std::vector<int64_t> paddedTiles(const std::vector<int64_t> &attr,
                                        int rank) {
  std::vector<int64_t> tiles = attr;
  tiles.resize(static_cast<size_t>(rank), 0);
  return tiles;
}

//===----------------------------------------------------------------------===//
// tile_using_forall
//===----------------------------------------------------------------------===//

static Result applyTileUsingForall(ApplyCtx &ctx) {
  const std::vector<int64_t> &sizesAttr = ctx.op->intArrayAttr("tile_sizes");
  for (const PayloadRef &ref : ctx.operands[0]) {
    Result res = expectOpRef(ctx, ref);
    if (!res.succeeded())
      return res;
    Operation *target = ref.op;
    std::optional<StructuredInfo> infoOpt = getStructuredInfo(target);
    if (!infoOpt)
      return Result::silenceableAt(ctx.op->loc, "not a structured op");
    StructuredInfo info = std::move(*infoOpt);
    std::vector<int64_t> extents;
    res = inferIterationDomain(info, extents);
    if (!res.succeeded())
      return res;
    int rank = info.rank();
    if (static_cast<int>(sizesAttr.size()) > rank)
      return Result::silenceableAt(ctx.op->loc,
                                   "more tile sizes than iteration dims");
    std::vector<int64_t> tiles = paddedTiles(sizesAttr, rank);
    std::vector<int> tiledDims;
    std::vector<int64_t> trips;
    for (int d = 0; d < rank; ++d) {
      int64_t t = tiles[static_cast<size_t>(d)];
      if (t == 0)
        continue;
      if (info.iterators[static_cast<size_t>(d)] != IteratorKind::Parallel)
        return Result::silenceableAt(
            ctx.op->loc, "only parallel dimensions can be tiled to a forall");
      if (t < 0 || extents[static_cast<size_t>(d)] % t != 0)
        return Result::silenceableAt(
            ctx.op->loc, "tile size " + std::to_string(t) +
                             " does not divide iteration extent " +
                             std::to_string(extents[static_cast<size_t>(d)]));
      tiledDims.push_back(d);
      trips.push_back(extents[static_cast<size_t>(d)] / t);
    }
    if (tiledDims.empty())
      return Result::silenceableAt(ctx.op->loc, "nothing to tile");

    Location loc = target->loc;
    std::vector<Value *> outsVals = info.outs;
    std::vector<Type> outTypes;
    for (Value *v : outsVals)
      outTypes.push_back(v->type);
    std::map<std::string, Attr> forallAttrs;
    forallAttrs["trip_counts"] = trips;
    OpBuilder before = OpBuilder::before(target);
    Operation *forall = before.create(loc, "scf.forall", outsVals, outTypes,
                                      std::move(forallAttrs), 1);
    Block *body = &forall->region(0)->block;
    std::vector<Value *> ivs;
    for (size_t i = 0; i < tiledDims.size(); ++i)
      ivs.push_back(body->addArg(indexType(), loc));
    std::vector<Value *> shared;
    for (Value *v : outsVals)
      shared.push_back(body->addArg(v->type, loc));

    OpBuilder bb = OpBuilder::atEnd(body);
    std::vector<DimOff> offsets(static_cast<size_t>(rank));
    std::vector<int64_t> sliceSizes = extents;
    for (size_t i = 0; i < tiledDims.size(); ++i) {
      int d = tiledDims[i];
      Value *cst = constIndex(bb, loc, tiles[static_cast<size_t>(d)]);
      Value *scaled =
          bb.create(loc, "arith.muli", {ivs[i], cst}, {indexType()})
              ->result(0);
      offsets[static_cast<size_t>(d)].dyn = scaled;
      sliceSizes[static_cast<size_t>(d)] = tiles[static_cast<size_t>(d)];
    }
    std::map<Value *, Value *> mapping;
    for (size_t i = 0; i < info.ins.size(); ++i) {
      Operation *slice = buildSlice(bb, loc, info.ins[i],
                                    info.inMap(static_cast<int>(i)), offsets,
                                    sliceSizes);
      mapping[info.ins[i]] = slice->result(0);
    }
    std::vector<Operation *> outSlices;
    for (size_t o = 0; o < info.outs.size(); ++o) {
      Operation *slice = buildSlice(bb, loc, shared[o],
                                    info.outMap(static_cast<int>(o)), offsets,
                                    sliceSizes);
      mapping[info.outs[o]] = slice->result(0);
      outSlices.push_back(slice);
    }
    Operation *tiled = cloneOp(bb, target, mapping);
    for (size_t o = 0; o < info.outs.size(); ++o)
      tiled->result(static_cast<int>(o))->type =
          outSlices[o]->result(0)->type;

    Operation *inPar =
        bb.create(loc, "scf.forall.in_parallel", {}, {}, {}, 1);
    OpBuilder pb = OpBuilder::atEnd(&inPar->region(0)->block);
    for (size_t o = 0; o < info.outs.size(); ++o) {
      std::vector<Value *> operands = {tiled->result(static_cast<int>(o)),
                                       shared[o]};
      for (int i = 1; i < outSlices[o]->numOperands(); ++i)
        operands.push_back(outSlices[o]->operand(i));
      std::map<std::string, Attr> attrs;
      attrs["static_offsets"] = outSlices[o]->intArrayAttr("static_offsets");
      attrs["static_sizes"] = outSlices[o]->intArrayAttr("static_sizes");
      pb.create(loc, "tensor.parallel_insert_slice", std::move(operands), {},
                std::move(attrs));
    }

    std::vector<Value *> repls;
    for (int i = 0; i < forall->numResults(); ++i)
      repls.push_back(forall->result(i));
    res = ctx.state.trackedReplace(target, repls);
    if (!res.succeeded())
      return res;
    ctx.results[0].push_back(PayloadRef::makeOp(tiled));
    ctx.results[1].push_back(PayloadRef::makeOp(forall));
  }
  return Result::success();
}

//===----------------------------------------------------------------------===//
// fuse_into_containing_op
//===----------------------------------------------------------------------===//

static Result applyFuseIntoContaining(ApplyCtx &ctx) {
  if (ctx.operands[0].size() != 1 ||
      ctx.operands[0][0].kind != PayloadRef::Op)
    return Result::silenceableAt(ctx.op->loc,
                                 "expected a single producer payload op");
  Operation *producer = ctx.operands[0][0].op;
  std::optional<StructuredInfo> infoOpt = getStructuredInfo(producer);
  if (!infoOpt)
    return Result::silenceableAt(ctx.op->loc,
                                 "producer is not a structured op");
  StructuredInfo info = std::move(*infoOpt);
  if (info.outs.size() != 1 || producer->numResults() != 1)
    return Result::silenceableAt(ctx.op->loc,
                                 "producer must have a single init");
  std::vector<int64_t> extents;
  Result res = inferIterationDomain(info, extents);
  if (!res.succeeded())
    return res;
  int rank = info.rank();

  bool fusedAny = false;
  for (const PayloadRef &cref : ctx.operands[1]) {
    res = expectOpRef(ctx, cref);
    if (!res.succeeded())
      return res;
    Operation *containing = cref.op;

    Operation *sliceOp = nullptr;
    for (Operation *o :
         walkPreorder(containing, [](Operation *) { return true; })) {
      if (!o->dead && o->name == "tensor.extract_slice" &&
          o->operand(0)->defOp == producer) {
        sliceOp = o;
        break;
      }
    }
    if (!sliceOp)
      continue;

    std::map<int, int> inverted;
    res = info.outMap(0).invertProjected(inverted);
    if (!res.succeeded())
      return Result::silenceableAt(
          ctx.op->loc, "producer result map is not a projected permutation");

    const std::vector<int64_t> &sliceOffsets =
        sliceOp->intArrayAttr("static_offsets");
    const std::vector<int64_t> &sliceSizesAttr =
        sliceOp->intArrayAttr("static_sizes");
    std::vector<DimOff> offsets(static_cast<size_t>(rank));
    std::vector<int64_t> sliceSizes = extents;
    for (auto [d, ri] : inverted) {
      int64_t so = sliceOffsets[static_cast<size_t>(ri)];
      if (so == kDynamic) {
        // Dynamic offsets are trailing operands in static-array order.
        int dynIndex = 0;
        for (int j = 0; j < ri; ++j)
          if (sliceOffsets[static_cast<size_t>(j)] == kDynamic)
            ++dynIndex;
        offsets[static_cast<size_t>(d)].dyn = sliceOp->operand(1 + dynIndex);
      } else {
        offsets[static_cast<size_t>(d)].cst = so;
      }
      sliceSizes[static_cast<size_t>(d)] =
          sliceSizesAttr[static_cast<size_t>(ri)];
    }

    Location loc = producer->loc;
    OpBuilder bb = OpBuilder::before(sliceOp);
    std::map<Value *, Value *> mapping;
    for (size_t i = 0; i < info.ins.size(); ++i) {
      Operation *slice = buildSlice(bb, loc, info.ins[i],
                                    info.inMap(static_cast<int>(i)), offsets,
                                    sliceSizes);
      mapping[info.ins[i]] = slice->result(0);
    }
    Operation *outSlice =
        buildSlice(bb, loc, info.outs[0], info.outMap(0), offsets, sliceSizes);
    mapping[info.outs[0]] = outSlice->result(0);
    Operation *fused = cloneOp(bb, producer, mapping);
    fused->result(0)->type = outSlice->result(0)->type;

    res = ctx.state.trackedReplace(sliceOp, {fused->result(0)});
    if (!res.succeeded())
      return res;
    fusedAny = true;
    ctx.results[0].push_back(PayloadRef::makeOp(fused));
  }
  if (!fusedAny)
    return Result::silenceableAt(ctx.op->loc,
                                 "could not find fusion opportunity");

  bool hasUses = false;
  for (int i = 0; i < producer->numResults(); ++i)
    hasUses |= producer->result(i)->hasUses();
  if (!hasUses)
    ctx.state.eraseTracked(producer);
  ctx.results[1] = ctx.operands[1];
  return Result::success();
}

//===----------------------------------------------------------------------===//
// tile_reduction_using_for
//===----------------------------------------------------------------------===//

static Result applyTileReduction(ApplyCtx &ctx) {
  const std::vector<int64_t> &sizesAttr = ctx.op->intArrayAttr("tile_sizes");
  for (const PayloadRef &ref : ctx.operands[0]) {
    Result res = expectOpRef(ctx, ref);
    if (!res.succeeded())
      return res;
    Operation *target = ref.op;
    std::optional<StructuredInfo> infoOpt = getStructuredInfo(target);
    if (!infoOpt)
      return Result::silenceableAt(ctx.op->loc, "not a structured op");
    StructuredInfo info = std::move(*infoOpt);
    if (info.outs.size() != 1 || target->numResults() != 1)
      return Result::silenceableAt(ctx.op->loc,
                                   "expected a single-init reduction op");
    std::vector<int64_t> extents;
    res = inferIterationDomain(info, extents);
    if (!res.succeeded())
      return res;
    int rank = info.rank();
    if (static_cast<int>(sizesAttr.size()) > rank)
      return Result::silenceableAt(ctx.op->loc,
                                   "more tile sizes than iteration dims");
    std::vector<int64_t> tiles = paddedTiles(sizesAttr, rank);
    std::vector<int> tiledDims;
    for (int d = 0; d < rank; ++d) {
      int64_t t = tiles[static_cast<size_t>(d)];
      if (t == 0)
        continue;
      if (info.iterators[static_cast<size_t>(d)] != IteratorKind::Reduction)
        return Result::silenceableAt(
            ctx.op->loc, "only reduction dimensions can be tiled here");
      if (t != 1)
        return Result::silenceableAt(ctx.op->loc,
                                     "only unit reduction tiles supported");
      tiledDims.push_back(d);
    }
    if (tiledDims.empty())
      return Result::silenceableAt(ctx.op->loc, "nothing to tile");
    bool combinerOk = info.body == BodyKind::Matmul ||
                      (info.body == BodyKind::Region &&
                       bodyIsMulAddContraction(info));
    if (!combinerOk)
      return Result::silenceableAt(ctx.op->loc, "unrecognized combiner");

    Location loc = target->loc;
    Type accT = info.outs[0]->type;
    OpBuilder b = OpBuilder::before(target);
    Value *empty = b.create(loc, "tensor.empty", {}, {accT})->result(0);
    std::map<std::string, Attr> zattrs;
    zattrs["value"] = 0.0;
    Value *zero = b.create(loc, "arith.constant", {},
                           {Type::scalar(ElemKind::F32)}, std::move(zattrs))
                      ->result(0);
    Operation *fill =
        b.create(loc, "linalg.fill", {zero, empty}, {accT});
    Value *acc = fill->result(0);

    std::vector<Operation *> loops;
    std::vector<DimOff> offsets(static_cast<size_t>(rank));
    std::vector<int64_t> sliceSizes = extents;
    OpBuilder cur = b;
    for (int d : tiledDims) {
      Value *lb = constIndex(cur, loc, 0);
      Value *ub = constIndex(cur, loc, extents[static_cast<size_t>(d)]);
      Value *st = constIndex(cur, loc, 1);
      Operation *loop =
          cur.create(loc, "scf.for", {lb, ub, st, acc}, {accT}, {}, 1);
      Block *lbody = &loop->region(0)->block;
      Value *iv = lbody->addArg(indexType(), loc);
      Value *iter = lbody->addArg(accT, loc);
      offsets[static_cast<size_t>(d)].dyn = iv;
      sliceSizes[static_cast<size_t>(d)] = 1;
      loops.push_back(loop);
      acc = iter;
      cur = OpBuilder::atEnd(lbody);
    }

    std::map<Value *, Value *> mapping;
    for (size_t i = 0; i < info.ins.size(); ++i) {
      Operation *slice = buildSlice(cur, loc, info.ins[i],
                                    info.inMap(static_cast<int>(i)), offsets,
                                    sliceSizes);
      mapping[info.ins[i]] = slice->result(0);
    }
    mapping[info.outs[0]] = acc;
    Operation *partial = cloneOp(cur, target, mapping);
    cur.create(loc, "scf.yield", {partial->result(0)}, {});
    for (size_t k = loops.size() - 1; k > 0; --k)
      OpBuilder::atEnd(&loops[k - 1]->region(0)->block)
          .create(loc, "scf.yield", {loops[k]->result(0)}, {});

    OpBuilder after = OpBuilder::before(target);
    Value *empty2 = after.create(loc, "tensor.empty", {}, {accT})->result(0);
    std::map<std::string, Attr> cattrs;
    cattrs["fun"] = std::string("add");
    Operation *combiner = after.create(
        loc, "linalg.elemwise_binary",
        {loops[0]->result(0), info.outs[0], empty2}, {accT},
        std::move(cattrs));

    res = ctx.state.trackedReplace(target, {combiner->result(0)});
    if (!res.succeeded())
      return res;
    ctx.results[0].push_back(PayloadRef::makeOp(fill));
    ctx.results[1].push_back(PayloadRef::makeOp(partial));
    ctx.results[2].push_back(PayloadRef::makeOp(combiner));
    ctx.results[3].push_back(PayloadRef::makeOp(loops[0]));
  }
  return Result::success();
}

//===----------------------------------------------------------------------===//
// loop.outline
//===----------------------------------------------------------------------===//

static Result applyLoopOutline(ApplyCtx &ctx) {
  const std::string &base = ctx.op->strAttr("func_name");
  for (const PayloadRef &ref : ctx.operands[0]) {
    Result res = expectOpRef(ctx, ref);
    if (!res.succeeded())
      return res;
    Operation *loop = ref.op;
    if (loop->name != "scf.for" && loop->name != "scf.forall")
      return Result::silenceableAt(ctx.op->loc, "payload is not a loop");

    std::set<Value *> inside;
    std::vector<Value *> frees;
    std::set<Value *> freeSet;
    loop->walk([&](Operation *o) {
      for (auto &r : o->resultList)
        inside.insert(r.get());
      for (auto &region : o->regions)
        for (auto &arg : region->block.args)
          inside.insert(arg.get());
    });
    loop->walk([&](Operation *o) {
      for (Value *v : o->operandList)
        if (!inside.count(v) && freeSet.insert(v).second)
          frees.push_back(v);
    });

    Operation *module = ctx.interp.module();
    std::string name = base;
    int suffix = 0;
    while (lookupSymbol(module, name))
      name = base + "_" + std::to_string(suffix++);

    std::map<std::string, Attr> fattrs;
    fattrs["sym_name"] = name;
    Operation *func = OpBuilder::atEnd(&module->region(0)->block)
                          .create(loop->loc, "func.func", {}, {},
                                  std::move(fattrs), 1);
    Block *fbody = &func->region(0)->block;
    std::map<Value *, Value *> argMap;
    std::vector<Value *> args;
    for (Value *v : frees) {
      Value *arg = fbody->addArg(v->type, v->getLoc());
      argMap[v] = arg;
      args.push_back(arg);
    }

    std::vector<Type> loopResultTypes;
    for (auto &r : loop->resultList)
      loopResultTypes.push_back(r->type);
    std::map<std::string, Attr> cattrs;
    cattrs["callee"] = name;
    Operation *call =
        OpBuilder::before(loop).create(loop->loc, "func.call", frees,
                                       std::move(loopResultTypes),
                                       std::move(cattrs));
    for (int i = 0; i < loop->numResults(); ++i)
      loop->result(i)->replaceAllUsesWith(call->result(i));

    moveOp(loop, OpBuilder::atEnd(fbody));
    loop->walk([&](Operation *o) {
      for (int i = 0; i < o->numOperands(); ++i) {
        auto it = argMap.find(o->operand(i));
        if (it != argMap.end())
          o->setOperand(i, it->second);
      }
    });
    std::vector<Value *> rets;
    for (int i = 0; i < loop->numResults(); ++i)
      rets.push_back(loop->result(i));
    OpBuilder::atEnd(fbody).create(loop->loc, "func.return", rets, {});

    ctx.results[0].push_back(PayloadRef::makeOp(func));
    ctx.results[1].push_back(PayloadRef::makeOp(call));
  }
  return Result::success();
}

//===----------------------------------------------------------------------===//
// loop.unroll
//===----------------------------------------------------------------------===//

static bool constIndexValue(Value *v, int64_t &out) {
  if (!v->defOp || v->defOp->name != "arith.constant" ||
      v->type != Type::scalar(ElemKind::Index))
    return false;
  out = v->defOp->intAttr("value");
  return true;
}

static Result applyLoopUnroll(ApplyCtx &ctx) {
  for (const PayloadRef &ref : ctx.operands[0]) {
    Result res = expectOpRef(ctx, ref);
    if (!res.succeeded())
      return res;
    Operation *loop = ref.op;
    if (loop->name != "scf.for")
      return Result::silenceableAt(ctx.op->loc, "payload is not an scf.for");
    int64_t lb = 0, ub = 0, step = 0;
    if (!constIndexValue(loop->operand(0), lb) ||
        !constIndexValue(loop->operand(1), ub) ||
        !constIndexValue(loop->operand(2), step) || step <= 0 ||
        (ub - lb) % step != 0)
      return Result::silenceableAt(ctx.op->loc, "dynamic trip count");
    int64_t trip = (ub - lb) / step;
    int64_t factor =
        ctx.op->hasAttr("full") ? trip : ctx.op->intAttr("factor");
    if (factor <= 0)
      return Result::silenceableAt(ctx.op->loc, "invalid unroll factor");

    Block &body = loop->region(0)->block;
    std::vector<Operation *> bodyOps;
    for (auto &o : body.ops)
      if (o->name != "scf.yield")
        bodyOps.push_back(o.get());
    Operation *yield = body.terminator();

    auto mapped = [](std::map<Value *, Value *> &m, Value *v) {
      auto it = m.find(v);
      return it == m.end() ? v : it->second;
    };

    if (factor >= trip) {
      OpBuilder b = OpBuilder::before(loop);
      std::vector<Value *> accs;
      for (int i = 3; i < loop->numOperands(); ++i)
        accs.push_back(loop->operand(i));
      for (int64_t it = 0; it < trip; ++it) {
        std::map<Value *, Value *> mapping;
        mapping[body.arg(0)] = constIndex(b, loop->loc, lb + it * step);
        for (size_t i = 0; i < accs.size(); ++i)
          mapping[body.arg(static_cast<int>(i) + 1)] = accs[i];
        for (Operation *o : bodyOps)
          cloneOp(b, o, mapping);
        std::vector<Value *> next;
        for (Value *v : yield->operandList)
          next.push_back(mapped(mapping, v));
        accs = next;
      }
      for (int i = 0; i < loop->numResults(); ++i)
        loop->result(i)->replaceAllUsesWith(accs[static_cast<size_t>(i)]);
      ctx.state.eraseTracked(loop);
      continue;
    }

    if (trip % factor != 0)
      return Result::silenceableAt(
          ctx.op->loc, "unroll factor does not divide the trip count");
    OpBuilder b = OpBuilder::before(loop);
    Value *newStep = constIndex(b, loop->loc, step * factor);
    std::vector<Value *> operands = {loop->operand(0), loop->operand(1),
                                     newStep};
    std::vector<Type> resultTypes;
    for (int i = 3; i < loop->numOperands(); ++i) {
      operands.push_back(loop->operand(i));
      resultTypes.push_back(loop->operand(i)->type);
    }
    Operation *newLoop =
        b.create(loop->loc, "scf.for", std::move(operands),
                 std::move(resultTypes), {}, 1);
    Block *nb = &newLoop->region(0)->block;
    Value *iv = nb->addArg(indexType(), loop->loc);
    std::vector<Value *> accs;
    for (int i = 3; i < loop->numOperands(); ++i)
      accs.push_back(nb->addArg(loop->operand(i)->type, loop->loc));
    OpBuilder ib = OpBuilder::atEnd(nb);
    for (int64_t j = 0; j < factor; ++j) {
      Value *ivj = iv;
      if (j != 0)
        ivj = ib.create(loop->loc, "arith.addi",
                        {iv, constIndex(ib, loop->loc, j * step)},
                        {indexType()})
                  ->result(0);
      std::map<Value *, Value *> mapping;
      mapping[body.arg(0)] = ivj;
      for (size_t i = 0; i < accs.size(); ++i)
        mapping[body.arg(static_cast<int>(i) + 1)] = accs[i];
      for (Operation *o : bodyOps)
        cloneOp(ib, o, mapping);
      std::vector<Value *> next;
      for (Value *v : yield->operandList)
        next.push_back(mapped(mapping, v));
      accs = next;
    }
    ib.create(loop->loc, "scf.yield", accs, {});
    std::vector<Value *> repls;
    for (int i = 0; i < newLoop->numResults(); ++i)
      repls.push_back(newLoop->result(i));
    res = ctx.state.trackedReplace(loop, repls);
    if (!res.succeeded())
      return res;
  }
  return Result::success();
}

//===----------------------------------------------------------------------===//
// loop.forall_to_for
//===----------------------------------------------------------------------===//

static Result convertForallToFor(ApplyCtx &ctx, Operation *forall,
                                 Operation *&outermost) {
  const std::vector<int64_t> &trips = forall->intArrayAttr("trip_counts");
  size_t nIvs = trips.size();
  Location loc = forall->loc;
  Block &fb = forall->region(0)->block;

  std::vector<Value *> accs = forall->operandList;
  std::vector<Type> accTypes;
  for (Value *v : accs)
    accTypes.push_back(v->type);

  std::map<Value *, Value *> mapping;
  std::vector<Operation *> loops;
  OpBuilder cur = OpBuilder::before(forall);
  for (size_t k = 0; k < nIvs; ++k) {
    Value *lb = constIndex(cur, loc, 0);
    Value *ub = constIndex(cur, loc, trips[k]);
    Value *st = constIndex(cur, loc, 1);
    std::vector<Value *> operands = {lb, ub, st};
    operands.insert(operands.end(), accs.begin(), accs.end());
    Operation *loop =
        cur.create(loc, "scf.for", std::move(operands), accTypes, {}, 1);
    Block *lbody = &loop->region(0)->block;
    Value *iv = lbody->addArg(indexType(), loc);
    mapping[fb.arg(static_cast<int>(k))] = iv;
    std::vector<Value *> iters;
    for (const Type &t : accTypes)
      iters.push_back(lbody->addArg(t, loc));
    accs = iters;
    loops.push_back(loop);
    cur = OpBuilder::atEnd(lbody);
  }
  for (size_t o = 0; o < accs.size(); ++o)
    mapping[fb.arg(static_cast<int>(nIvs + o))] = accs[o];

  Operation *inPar = fb.terminator();
  for (auto &o : fb.ops)
    if (o.get() != inPar)
      cloneOp(cur, o.get(), mapping);

  auto mv = [&](Value *v) {
    auto it = mapping.find(v);
    return it == mapping.end() ? v : it->second;
  };
  std::vector<Value *> newAccs = accs;
  for (auto &pis : inPar->region(0)->block.ops) {
    if (pis->name != "tensor.parallel_insert_slice")
      continue;
    Value *dst = pis->operand(1);
    if (!dst->isBlockArg() || dst->ownerBlock != &fb)
      return Result::definiteAt(ctx.op->loc,
                                "parallel insertion into a non-shared out");
    size_t outIdx = static_cast<size_t>(dst->argIndex) - nIvs;
    std::vector<Value *> operands = {mv(pis->operand(0)), newAccs[outIdx]};
    for (int i = 2; i < pis->numOperands(); ++i)
      operands.push_back(mv(pis->operand(i)));
    std::map<std::string, Attr> attrs;
    attrs["static_offsets"] = pis->intArrayAttr("static_offsets");
    attrs["static_sizes"] = pis->intArrayAttr("static_sizes");
    Operation *ins =
        cur.create(pis->loc, "tensor.insert_slice", std::move(operands),
                   {newAccs[outIdx]->type}, std::move(attrs));
    newAccs[outIdx] = ins->result(0);
  }
  cur.create(loc, "scf.yield", newAccs, {});
  for (size_t k = nIvs - 1; k > 0; --k) {
    std::vector<Value *> inner;
    for (int i = 0; i < loops[k]->numResults(); ++i)
      inner.push_back(loops[k]->result(i));
    OpBuilder::atEnd(&loops[k - 1]->region(0)->block)
        .create(loc, "scf.yield", inner, {});
  }

  std::vector<Value *> repls;
  for (int i = 0; i < loops[0]->numResults(); ++i)
    repls.push_back(loops[0]->result(i));
  Result res = ctx.state.trackedReplace(forall, repls);
  if (!res.succeeded())
    return res;
  outermost = loops[0];
  return Result::success();
}

static Result applyForallToFor(ApplyCtx &ctx) {
  for (const PayloadRef &ref : ctx.operands[0]) {
    Result res = expectOpRef(ctx, ref);
    if (!res.succeeded())
      return res;
    std::vector<Operation *> targets;
    if (ref.op->name == "scf.forall")
      targets.push_back(ref.op);
    else
      targets = walkPreorder(
          ref.op, [](Operation *o) { return o->name == "scf.forall"; });
    // Convert innermost-first: outer conversions clone their body, so inner
    // foralls must already be rewritten. Only top-level conversions yield
    // stable loop handles; nested results are re-cloned by the outer pass.
    std::vector<std::pair<Operation *, bool>> ordered;
    for (Operation *forall : targets) {
      bool nested = false;
      for (Operation *other : targets)
        if (other != forall && other->isProperAncestorOf(forall))
          nested = true;
      ordered.emplace_back(forall, nested);
    }
    std::vector<Operation *> tops;
    for (auto it = ordered.rbegin(); it != ordered.rend(); ++it) {
      if (it->first->dead)
        continue;
      Operation *outermost = nullptr;
      res = convertForallToFor(ctx, it->first, outermost);
      if (!res.succeeded())
        return res;
      if (!it->second)
        tops.push_back(outermost);
    }
    for (auto it = tops.rbegin(); it != tops.rend(); ++it)
      ctx.results[0].push_back(PayloadRef::makeOp(*it));
  }
  return Result::success();
}

//===----------------------------------------------------------------------===//
// generalize
//===----------------------------------------------------------------------===//

static Result applyGeneralize(ApplyCtx &ctx) {
  for (const PayloadRef &ref : ctx.operands[0]) {
    Result res = expectOpRef(ctx, ref);
    if (!res.succeeded())
      return res;
    Operation *target = ref.op;
    if (target->name == "linalg.generic") {
      ctx.results[0].push_back(ref);
      continue;
    }
    std::optional<StructuredInfo> infoOpt = getStructuredInfo(target);
    if (!infoOpt)
      return Result::silenceableAt(ctx.op->loc, "not a structured op");
    StructuredInfo info = std::move(*infoOpt);

    Location loc = target->loc;
    std::map<std::string, Attr> attrs;
    attrs["indexing_maps"] = info.maps;
    attrs["iterator_types"] = info.iterators;
    attrs["ins_count"] = static_cast<int64_t>(info.ins.size());
    std::vector<Value *> operands = info.ins;
    operands.insert(operands.end(), info.outs.begin(), info.outs.end());
    std::vector<Type> resultTypes;
    for (Value *v : info.outs)
      resultTypes.push_back(v->type);
    OpBuilder b = OpBuilder::before(target);
    Operation *generic = b.create(loc, "linalg.generic", std::move(operands),
                                  std::move(resultTypes), std::move(attrs), 1);
    Block *body = &generic->region(0)->block;
    std::vector<Value *> args;
    for (int i = 0; i < generic->numOperands(); ++i)
      args.push_back(body->addArg(Type::scalar(ElemKind::F32), loc));
    OpBuilder ib = OpBuilder::atEnd(body);
    Type f32 = Type::scalar(ElemKind::F32);
    Value *yielded = nullptr;
    switch (info.body) {
    case BodyKind::Matmul: {
      Value *mul =
          ib.create(loc, "arith.mulf", {args[0], args[1]}, {f32})->result(0);
      yielded =
          ib.create(loc, "arith.addf", {mul, args[2]}, {f32})->result(0);
      break;
    }
    case BodyKind::Add:
      yielded =
          ib.create(loc, "arith.addf", {args[0], args[1]}, {f32})->result(0);
      break;
    case BodyKind::Mul:
      yielded =
          ib.create(loc, "arith.mulf", {args[0], args[1]}, {f32})->result(0);
      break;
    case BodyKind::Max:
      yielded = ib.create(loc, "arith.maximumf", {args[0], args[1]}, {f32})
                    ->result(0);
      break;
    case BodyKind::Fill:
      yielded = args[0];
      break;
    case BodyKind::Region:
      return Result::definiteAt(ctx.op->loc,
                                "named op with an opaque body");
    }
    ib.create(loc, "linalg.yield", {yielded}, {});

    res = ctx.state.trackedReplace(target, {generic->result(0)});
    if (!res.succeeded())
      return res;
    ctx.results[0].push_back(PayloadRef::makeOp(generic));
  }
  return Result::success();
}

//===----------------------------------------------------------------------===//
// cleanup
//===----------------------------------------------------------------------===//

static bool isPure(const Operation *op) {
  const std::string &n = op->name;
  return n.rfind("arith.", 0) == 0 || n.rfind("tensor.", 0) == 0 ||
         n.rfind("linalg.", 0) == 0 || n.rfind("my.", 0) == 0;
}

static bool isIdentitySlice(Operation *op) {
  if (op->name != "tensor.extract_slice")
    return false;
  for (int64_t o : op->intArrayAttr("static_offsets"))
    if (o != 0)
      return false;
  return op->result(0)->type == op->operand(0)->type;
}

static void collectBlocks(Operation *root, std::vector<Block *> &out) {
  root->walk([&](Operation *o) {
    for (auto &region : o->regions)
      out.push_back(&region->block);
  });
}

static Result applyCleanup(ApplyCtx &ctx) {
  for (const PayloadRef &ref : ctx.operands[0]) {
    Result res = expectOpRef(ctx, ref);
    if (!res.succeeded())
      return res;
    Operation *root = ref.op;
    bool changed = true;
    while (changed) {
      changed = false;
      std::vector<Operation *> ops =
          walkPreorder(root, [](Operation *) { return true; });
      for (Operation *o : ops) {
        if (o->dead)
          continue;
        if (isIdentitySlice(o)) {
          o->result(0)->replaceAllUsesWith(o->operand(0));
          ctx.state.eraseTracked(o);
          changed = true;
          continue;
        }
        if (isPure(o) && o->numResults() > 0) {
          bool used = false;
          for (auto &r : o->resultList)
            used |= r->hasUses();
          if (!used) {
            ctx.state.eraseTracked(o);
            changed = true;
          }
        }
      }
      std::vector<Block *> blocks;
      collectBlocks(root, blocks);
      for (Block *block : blocks) {
        std::vector<Operation *> seen;
        for (auto &o : block->ops) {
          Operation *op = o.get();
          if (op->dead || !isPure(op) || !op->regions.empty() ||
              op->numResults() == 0)
            continue;
          Operation *match = nullptr;
          for (Operation *prev : seen) {
            if (prev->dead)
              continue;
            if (prev->name == op->name &&
                prev->operandList == op->operandList &&
                prev->attrs == op->attrs) {
              match = prev;
              break;
            }
          }
          if (match) {
            for (int i = 0; i < op->numResults(); ++i)
              op->result(i)->replaceAllUsesWith(match->result(i));
            changed = true;
          } else {
            seen.push_back(op);
          }
        }
        // Erase outside the iteration so the op list stays stable.
        std::vector<Operation *> toErase;
        for (auto &o : block->ops) {
          Operation *op = o.get();
          if (!op->dead && isPure(op) && op->numResults() > 0) {
            bool used = false;
            for (auto &r : op->resultList)
              used |= r->hasUses();
            if (!used)
              toErase.push_back(op);
          }
        }
        for (Operation *op : toErase)
          ctx.state.eraseTracked(op);
      }
    }
  }
  return Result::success();
}

//===----------------------------------------------------------------------===//
// Registration
//===----------------------------------------------------------------------===//

void registerStructuredTransformOps(Registry &r) {
  TransformOpDef d;

  d = {};
  d.name = "transform.structured.tile_using_forall";
  d.consumesOperand = {true};
  d.mutatesPayload = true;
  d.apply = applyTileUsingForall;
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.structured.fuse_into_containing_op";
  d.consumesOperand = {true, true};
  d.mutatesPayload = true;
  d.apply = applyFuseIntoContaining;
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.structured.tile_reduction_using_for";
  d.consumesOperand = {true};
  d.mutatesPayload = true;
  d.apply = applyTileReduction;
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.loop.outline";
  d.consumesOperand = {true};
  d.mutatesPayload = true;
  d.apply = applyLoopOutline;
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.loop.unroll";
  d.consumesOperand = {true};
  d.mutatesPayload = true;
  d.apply = applyLoopUnroll;
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.loop.forall_to_for";
  d.consumesOperand = {true};
  d.mutatesPayload = true;
  d.apply = applyForallToFor;
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.structured.generalize";
  d.consumesOperand = {true};
  d.mutatesPayload = true;
  d.apply = applyGeneralize;
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.cleanup";
  d.mutatesPayload = true;
  d.apply = applyCleanup;
  (void)r.registerOp(d);
}

} // namespace ttir
