//===- TransformOps.cpp - sequencing, handle plumbing and param ops -------===//
//
// Part of the ttir project, under the Apache License v2.0 with LLVM Exceptions.
// SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception
//
//===----------------------------------------------------------------------===//

#include "ttir/Transform.hpp"

namespace ttir {

static Location refLoc(const PayloadRef &ref, Location fallback) {
  if (ref.kind == PayloadRef::Op)
    return ref.op->loc;
  if (ref.kind == PayloadRef::Val)
    return ref.value->getLoc();
  return fallback;
}

static Operation *findSequence(ApplyCtx &ctx, const std::string &name,
                               Result &err) {
  Operation *seq = lookupSymbol(ctx.interp.module(), name);
  if (!seq || seq->name != "transform.named_sequence") {
    err = Result::definiteAt(ctx.op->loc,
                             "no named sequence '" + name + "'");
    return nullptr;
  }
  return seq;
}

/// Runs `matcher` against a single payload op. Silenceable failures go to the
/// debug stream and report false; yields are filled on success.
static Result tryMatch(ApplyCtx &ctx, Operation *matcher, Operation *payload,
                       std::vector<PayloadList> &yields, bool &matched) {
  matched = false;
  Result r = ctx.interp.runSequence(matcher, FailureMode::Propagate,
                                    {{PayloadRef::makeOp(payload)}}, yields);
  if (r.isDefinite())
    return r;
  if (r.isSilenceable()) {
    ctx.interp.debugLine("[transform-matcher] matcher " +
                         matcher->strAttr("sym_name") +
                         " failed: " + r.diag().message);
    return Result::success();
  }
  matched = true;
  return Result::success();
}

void registerBuiltinTransformOps(Registry &r) {
  TransformOpDef d;

  d = {};
  d.name = "transform.yield";
  d.apply = [](ApplyCtx &) { return Result::success(); };
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.debug.emit_remark_at";
  d.apply = [](ApplyCtx &ctx) {
    const std::string &msg = ctx.op->strAttr("message");
    for (const PayloadRef &ref : ctx.operands[0]) {
      // Parameters have no payload location; render their value instead.
      if (ref.kind == PayloadRef::Param)
        ctx.interp.emitRemark(ctx.op->loc,
                              msg + ": " + std::to_string(ref.param));
      else
        ctx.interp.emitRemark(refLoc(ref, ctx.op->loc), msg);
    }
    return Result::success();
  };
  (void)r.registerOp(d);

  // Aliasing ops: the result shares the operand's payload; the operand stays
  // live, so consuming either later invalidates both.
  d = {};
  d.name = "transform.cast";
  d.apply = [](ApplyCtx &ctx) {
    ctx.results[0] = ctx.operands[0];
    return Result::success();
  };
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.split_handle";
  d.apply = [](ApplyCtx &ctx) {
    const PayloadList &payload = ctx.operands[0];
    size_t n = ctx.results.size();
    if (payload.size() != n)
      return Result::silenceableAt(
          ctx.op->loc, "expected " + std::to_string(n) +
                           " payload ops, got " +
                           std::to_string(payload.size()));
    for (size_t i = 0; i < n; ++i)
      ctx.results[i] = {payload[i]};
    return Result::success();
  };
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.merge_handles";
  d.apply = [](ApplyCtx &ctx) {
    for (const PayloadList &list : ctx.operands)
      ctx.results[0].insert(ctx.results[0].end(), list.begin(), list.end());
    return Result::success();
  };
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.include";
  d.apply = [](ApplyCtx &ctx) {
    Result err = Result::success();
    Operation *seq = findSequence(ctx, ctx.op->strAttr("callee"), err);
    if (!seq)
      return err;
    FailureMode mode = ctx.op->strAttr("failure_mode") == "suppress"
                           ? FailureMode::Suppress
                           : FailureMode::Propagate;
    std::vector<PayloadList> yields;
    Result res = ctx.interp.runSequence(seq, mode, ctx.operands, yields);
    if (!res.succeeded())
      return res;
    if (yields.size() != ctx.results.size())
      return Result::definiteAt(ctx.op->loc,
                                "included sequence yields " +
                                    std::to_string(yields.size()) +
                                    " values, op declares " +
                                    std::to_string(ctx.results.size()));
    ctx.results = std::move(yields);
    return Result::success();
  };
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.collect_matching";
  d.apply = [](ApplyCtx &ctx) {
    Result err = Result::success();
    Operation *matcher = findSequence(ctx, ctx.op->strAttr("matcher"), err);
    if (!matcher)
      return err;
    for (const PayloadRef &rootRef : ctx.operands[0]) {
      if (rootRef.kind != PayloadRef::Op)
        return Result::definiteAt(ctx.op->loc, "expected an op handle root");
      std::vector<Operation *> candidates =
          walkPreorder(rootRef.op, [](Operation *) { return true; });
      for (Operation *candidate : candidates) {
        if (candidate->dead)
          continue;
        std::vector<PayloadList> yields;
        bool matched = false;
        Result res = tryMatch(ctx, matcher, candidate, yields, matched);
        if (!res.succeeded())
          return res;
        if (!matched)
          continue;
        if (yields.size() != ctx.results.size())
          return Result::definiteAt(ctx.op->loc,
                                    "matcher yield count does not match "
                                    "result count");
        for (size_t i = 0; i < yields.size(); ++i)
          ctx.results[i].insert(ctx.results[i].end(), yields[i].begin(),
                                yields[i].end());
      }
    }
    return Result::success();
  };
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.foreach_match";
  d.consumesOperand = {true};
  d.mutatesPayload = true;
  d.apply = [](ApplyCtx &ctx) {
    const std::vector<std::string> &matcherNames =
        ctx.op->strArrayAttr("matchers");
    const std::vector<std::string> &actionNames =
        ctx.op->strArrayAttr("actions");
    std::vector<Operation *> matchers, actions;
    Result err = Result::success();
    for (size_t i = 0; i < matcherNames.size(); ++i) {
      Operation *m = findSequence(ctx, matcherNames[i], err);
      if (!m)
        return err;
      Operation *a = findSequence(ctx, actionNames[i], err);
      if (!a)
        return err;
      matchers.push_back(m);
      actions.push_back(a);
    }

    // Pre-order walk that does not descend into matched-and-acted ops, so
    // actions never observe half-rewritten ancestors.
    std::function<Result(Operation *)> visit =
        [&](Operation *payload) -> Result {
      for (auto &region : payload->regions) {
        std::vector<Operation *> children;
        for (auto &child : region->block.ops)
          children.push_back(child.get());
        for (Operation *child : children) {
          if (child->dead)
            continue;
          bool acted = false;
          for (size_t i = 0; i < matchers.size(); ++i) {
            std::vector<PayloadList> yields;
            bool matched = false;
            Result res = tryMatch(ctx, matchers[i], child, yields, matched);
            if (!res.succeeded())
              return res;
            if (!matched)
              continue;
            std::vector<PayloadList> actionYields;
            res = ctx.interp.runSequence(actions[i], FailureMode::Propagate,
                                         yields, actionYields);
            if (!res.succeeded())
              return res;
            acted = true;
            break;
          }
          if (!acted && !child->dead) {
            Result res = visit(child);
            if (!res.succeeded())
              return res;
          }
        }
      }
      return Result::success();
    };

    for (const PayloadRef &rootRef : ctx.operands[0]) {
      if (rootRef.kind != PayloadRef::Op)
        return Result::definiteAt(ctx.op->loc, "expected an op handle root");
      Result res = visit(rootRef.op);
      if (!res.succeeded())
        return res;
    }
    ctx.results[0] = ctx.operands[0];
    return Result::success();
  };
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.param.constant";
  d.apply = [](ApplyCtx &ctx) {
    ctx.results[0] = {PayloadRef::makeParam(ctx.op->intAttr("value"))};
    return Result::success();
  };
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.param.count";
  d.apply = [](ApplyCtx &ctx) {
    ctx.results[0] = {
        PayloadRef::makeParam(static_cast<int64_t>(ctx.operands[0].size()))};
    return Result::success();
  };
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.match.param.cmpi";
  d.isMatch = true;
  d.apply = [](ApplyCtx &ctx) {
    if (ctx.op->strAttr("predicate") != "eq")
      return Result::definiteAt(ctx.op->loc, "unsupported predicate");
    const PayloadList &a = ctx.operands[0];
    const PayloadList &b = ctx.operands[1];
    for (const PayloadList *l : {&a, &b})
      for (const PayloadRef &ref : *l)
        if (ref.kind != PayloadRef::Param)
          return Result::definiteAt(ctx.op->loc,
                                    "expected parameter handles");
    size_t n = std::max(a.size(), b.size());
    if (a.size() != b.size() && a.size() != 1 && b.size() != 1)
      return Result::definiteAt(
          ctx.op->loc, "parameter lists have incompatible lengths");
    for (size_t i = 0; i < n; ++i) {
      int64_t x = a[a.size() == 1 ? 0 : i].param;
      int64_t y = b[b.size() == 1 ? 0 : i].param;
      if (x != y)
        return Result::silenceableAt(ctx.op->loc,
                                     "parameters are not equal (" +
                                         std::to_string(x) + " vs " +
                                         std::to_string(y) + ")");
    }
    return Result::success();
  };
  (void)r.registerOp(d);
}

} // namespace ttir
