//===- Matchers.cpp - name, use-def and structured match ops --------------===//
//
// Part of the ttir project, under the Apache License v2.0 with LLVM Exceptions.
// SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception
//
//===----------------------------------------------------------------------===//

#include "ttir/Structured.hpp"
#include "ttir/Transform.hpp"

#include <algorithm>

namespace ttir {

/// Matchers operate on singleton handles; anything else is a script error.
static Result singlePayloadOp(ApplyCtx &ctx, int operandIndex,
                              Operation *&out) {
  const PayloadList &list = ctx.operands[static_cast<size_t>(operandIndex)];
  if (list.size() != 1 || list[0].kind != PayloadRef::Op)
    return Result::definiteAt(ctx.op->loc, "expected single payload");
  out = list[0].op;
  return Result::success();
}

static Result singlePayloadValue(ApplyCtx &ctx, int operandIndex,
                                 Value *&out) {
  const PayloadList &list = ctx.operands[static_cast<size_t>(operandIndex)];
  if (list.size() != 1 || list[0].kind != PayloadRef::Val)
    return Result::definiteAt(ctx.op->loc, "expected single payload value");
  out = list[0].value;
  return Result::success();
}

static Result singleStructured(ApplyCtx &ctx, StructuredInfo &info) {
  Operation *payload = nullptr;
  Result r = singlePayloadOp(ctx, 0, payload);
  if (!r.succeeded())
    return r;
  std::optional<StructuredInfo> si = getStructuredInfo(payload);
  if (!si)
    return Result::silenceableAt(ctx.op->loc, "not a structured op");
  info = std::move(*si);
  return Result::success();
}

static std::vector<PayloadRef> paramsOf(const std::vector<int64_t> &values) {
  std::vector<PayloadRef> out;
  for (int64_t v : values)
    out.push_back(PayloadRef::makeParam(v));
  return out;
}

void registerMatcherOps(Registry &r) {
  TransformOpDef d;

  d = {};
  d.name = "transform.match.operation_name";
  d.isMatch = true;
  d.apply = [](ApplyCtx &ctx) {
    Operation *payload = nullptr;
    Result res = singlePayloadOp(ctx, 0, payload);
    if (!res.succeeded())
      return res;
    const std::vector<std::string> &names = ctx.op->strArrayAttr("names");
    if (std::find(names.begin(), names.end(), payload->name) == names.end())
      return Result::silenceableAt(ctx.op->loc, "wrong operation name");
    return Result::success();
  };
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.get_producer_of_operand";
  d.isMatch = true;
  d.apply = [](ApplyCtx &ctx) {
    Operation *payload = nullptr;
    Result res = singlePayloadOp(ctx, 0, payload);
    if (!res.succeeded())
      return res;
    int64_t n = ctx.op->intAttr("position");
    if (n < 0 || n >= payload->numOperands())
      return Result::silenceableAt(ctx.op->loc,
                                   "operand #" + std::to_string(n) +
                                       " does not exist");
    Operation *def = payload->operand(static_cast<int>(n))->defOp;
    if (!def)
      return Result::silenceableAt(ctx.op->loc,
                                   "operand #" + std::to_string(n) +
                                       " is not produced by an operation");
    ctx.results[0] = {PayloadRef::makeOp(def)};
    return Result::success();
  };
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.get_operand";
  d.isMatch = true;
  d.apply = [](ApplyCtx &ctx) {
    Operation *payload = nullptr;
    Result res = singlePayloadOp(ctx, 0, payload);
    if (!res.succeeded())
      return res;
    int64_t n = ctx.op->intAttr("position");
    if (n < 0 || n >= payload->numOperands())
      return Result::silenceableAt(ctx.op->loc,
                                   "operand #" + std::to_string(n) +
                                       " does not exist");
    ctx.results[0] = {
        PayloadRef::makeValue(payload->operand(static_cast<int>(n)))};
    return Result::success();
  };
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.get_defining_op";
  d.isMatch = true;
  d.apply = [](ApplyCtx &ctx) {
    Value *payload = nullptr;
    Result res = singlePayloadValue(ctx, 0, payload);
    if (!res.succeeded())
      return res;
    if (!payload->defOp)
      return Result::silenceableAt(ctx.op->loc,
                                   "value is defined by a block argument");
    ctx.results[0] = {PayloadRef::makeOp(payload->defOp)};
    return Result::success();
  };
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.match.my.has_operand_satisfying";
  d.isMatch = true;
  d.apply = [](ApplyCtx &ctx) {
    Operation *payload = nullptr;
    Result res = singlePayloadOp(ctx, 0, payload);
    if (!res.succeeded())
      return res;
    Block &body = ctx.op->region(0)->block;
    if (body.numArgs() != 1)
      return Result::definiteAt(ctx.op->loc,
                                "expected one value block argument");
    for (int n = 0; n < payload->numOperands(); ++n) {
      TransformState::RegionScope scope(ctx.state);
      Result bind = ctx.state.setPayload(
          body.arg(0), {PayloadRef::makeValue(payload->operand(n))});
      Result run = bind.succeeded()
                       ? ctx.interp.applyBody(body, FailureMode::Propagate)
                       : std::move(bind);
      if (run.isDefinite())
        return run;
      if (run.isSilenceable()) {
        ctx.interp.debugLine("[transform-matcher] failed to match operand #" +
                             std::to_string(n) + ": " + run.diag().message);
        continue;
      }
      ctx.results[0] = {PayloadRef::makeParam(n)};
      Operation *term = body.terminator();
      for (int i = 0; i < term->numOperands(); ++i) {
        const PayloadList *p = ctx.state.getPayload(term->operand(i));
        ctx.results[static_cast<size_t>(i) + 1] = p ? *p : PayloadList{};
      }
      return Result::success();
    }
    return Result::silenceableAt(ctx.op->loc,
                                 "none of the operands satisfied the "
                                 "conditions");
  };
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.match.structured";
  d.isMatch = true;
  d.apply = [](ApplyCtx &ctx) {
    Operation *payload = nullptr;
    Result res = singlePayloadOp(ctx, 0, payload);
    if (!res.succeeded())
      return res;
    if (!getStructuredInfo(payload))
      return Result::silenceableAt(ctx.op->loc, "not a structured op");
    Block &body = ctx.op->region(0)->block;
    if (body.numArgs() != 1)
      return Result::definiteAt(ctx.op->loc,
                                "expected one op block argument");
    TransformState::RegionScope scope(ctx.state);
    Result bind =
        ctx.state.setPayload(body.arg(0), {PayloadRef::makeOp(payload)});
    if (!bind.succeeded())
      return bind;
    Result run = ctx.interp.applyBody(body, FailureMode::Propagate);
    if (!run.succeeded())
      return run;
    Operation *term = body.terminator();
    for (int i = 0; i < term->numOperands(); ++i) {
      const PayloadList *p = ctx.state.getPayload(term->operand(i));
      ctx.results[static_cast<size_t>(i)] = p ? *p : PayloadList{};
    }
    return Result::success();
  };
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.match.structured.rank";
  d.isMatch = true;
  d.apply = [](ApplyCtx &ctx) {
    StructuredInfo info;
    Result res = singleStructured(ctx, info);
    if (!res.succeeded())
      return res;
    ctx.results[0] = {PayloadRef::makeParam(info.rank())};
    return Result::success();
  };
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.match.structured.num_inputs";
  d.isMatch = true;
  d.apply = [](ApplyCtx &ctx) {
    StructuredInfo info;
    Result res = singleStructured(ctx, info);
    if (!res.succeeded())
      return res;
    ctx.results[0] = {
        PayloadRef::makeParam(static_cast<int64_t>(info.ins.size()))};
    return Result::success();
  };
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.match.structured.num_inits";
  d.isMatch = true;
  d.apply = [](ApplyCtx &ctx) {
    StructuredInfo info;
    Result res = singleStructured(ctx, info);
    if (!res.succeeded())
      return res;
    ctx.results[0] = {
        PayloadRef::makeParam(static_cast<int64_t>(info.outs.size()))};
    return Result::success();
  };
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.match.structured.input";
  d.isMatch = true;
  d.apply = [](ApplyCtx &ctx) {
    StructuredInfo info;
    Result res = singleStructured(ctx, info);
    if (!res.succeeded())
      return res;
    std::vector<size_t> positions;
    if (ctx.op->hasAttr("all")) {
      for (size_t i = 0; i < info.ins.size(); ++i)
        positions.push_back(i);
    } else {
      int64_t p = ctx.op->intAttr("position");
      if (p < 0 || p >= static_cast<int64_t>(info.ins.size()))
        return Result::silenceableAt(ctx.op->loc,
                                     "input #" + std::to_string(p) +
                                         " does not exist");
      positions.push_back(static_cast<size_t>(p));
    }
    if (ctx.op->hasAttr("projected_permutation")) {
      for (size_t p : positions)
        if (!info.inMap(static_cast<int>(p)).isProjectedPermutation())
          return Result::silenceableAt(
              ctx.op->loc, "input #" + std::to_string(p) +
                               " is not accessed via a projected "
                               "permutation");
    }
    return Result::success();
  };
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.match.structured.init";
  d.isMatch = true;
  d.apply = [](ApplyCtx &ctx) {
    StructuredInfo info;
    Result res = singleStructured(ctx, info);
    if (!res.succeeded())
      return res;
    std::vector<size_t> positions;
    if (ctx.op->hasAttr("all")) {
      for (size_t i = 0; i < info.outs.size(); ++i)
        positions.push_back(i);
    } else {
      int64_t p = ctx.op->intAttr("position");
      if (p < 0 || p >= static_cast<int64_t>(info.outs.size()))
        return Result::silenceableAt(ctx.op->loc,
                                     "init #" + std::to_string(p) +
                                         " does not exist");
      positions.push_back(static_cast<size_t>(p));
    }
    if (ctx.op->hasAttr("projected_permutation")) {
      for (size_t p : positions)
        if (!info.outMap(static_cast<int>(p)).isProjectedPermutation())
          return Result::silenceableAt(
              ctx.op->loc, "init #" + std::to_string(p) +
                               " is not accessed via a projected "
                               "permutation");
    }
    return Result::success();
  };
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.match.structured.body";
  d.isMatch = true;
  d.apply = [](ApplyCtx &ctx) {
    StructuredInfo info;
    Result res = singleStructured(ctx, info);
    if (!res.succeeded())
      return res;
    const std::vector<std::string> &ops = ctx.op->strArrayAttr("contraction");
    if (ops != std::vector<std::string>{"arith.mulf", "arith.addf"})
      return Result::definiteAt(ctx.op->loc,
                                "unsupported contraction body spec");
    if (!bodyIsMulAddContraction(info))
      return Result::silenceableAt(
          ctx.op->loc, "body is not a multiply-accumulate contraction");
    return Result::success();
  };
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.match.structured.classify_contraction_dims";
  d.isMatch = true;
  d.apply = [](ApplyCtx &ctx) {
    StructuredInfo info;
    Result res = singleStructured(ctx, info);
    if (!res.succeeded())
      return res;
    ContractionDims dims;
    res = classifyContractionDims(info, dims);
    if (!res.succeeded())
      return res;
    ctx.results[0] = paramsOf(dims.batch);
    ctx.results[1] = paramsOf(dims.lhsParallel);
    ctx.results[2] = paramsOf(dims.rhsParallel);
    ctx.results[3] = paramsOf(dims.reduction);
    return Result::success();
  };
  (void)r.registerOp(d);
}

} // namespace ttir
