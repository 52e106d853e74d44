//===- Extension.cpp - demo extension: call retargeting and rewriting -----===//
//
// Part of the ttir project, under the Apache License v2.0 with LLVM Exceptions.
// SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception
//
//===----------------------------------------------------------------------===//

#include "ttir/Transform.hpp"

namespace ttir {

void registerMyExtension(Registry &r) {
  TypeConstraint callLike;
  callLike.id = "my.call_op_interface";
  callLike.description = "call-like payload operations";
  callLike.predicate = [](Operation *op) { return op->name == "func.call"; };
  r.addTypeConstraint(callLike);

  TransformOpDef d;

  d = {};
  d.name = "transform.my.change_call_target";
  d.mutatesPayload = true;
  d.apply = [](ApplyCtx &ctx) {
    const std::string &newTarget = ctx.op->strAttr("new_target");
    for (const PayloadRef &ref : ctx.operands[0]) {
      if (ref.kind != PayloadRef::Op || ref.op->name != "func.call") {
        Result res = Result::silenceableAt(
            ctx.op->loc, "only applies to func.call payloads");
        res.diag().attachNote(ref.kind == PayloadRef::Op ? ref.op->loc
                                                         : ctx.op->loc,
                              "offending payload");
        return res;
      }
      ref.op->attrs["callee"] = newTarget;
    }
    return Result::success();
  };
  (void)r.registerOp(d);

  d = {};
  d.name = "transform.my.call_to_op";
  d.consumesOperand = {true};
  d.mutatesPayload = true;
  d.apply = [](ApplyCtx &ctx) {
    for (const PayloadRef &ref : ctx.operands[0]) {
      if (ref.kind != PayloadRef::Op || ref.op->name != "func.call") {
        Result res = Result::silenceableAt(
            ctx.op->loc, "only applies to func.call payloads");
        res.diag().attachNote(ref.kind == PayloadRef::Op ? ref.op->loc
                                                         : ctx.op->loc,
                              "offending payload");
        return res;
      }
      Operation *call = ref.op;
      std::vector<Type> resultTypes;
      for (auto &res : call->resultList)
        resultTypes.push_back(res->type);
      Operation *repl = OpBuilder::before(call).create(
          call->loc, "my.mm4", call->operandList, std::move(resultTypes));
      std::vector<Value *> repls;
      for (int i = 0; i < repl->numResults(); ++i)
        repls.push_back(repl->result(i));
      Result res = ctx.state.trackedReplace(call, repls);
      if (!res.succeeded())
        return res;
      ctx.results[0].push_back(PayloadRef::makeOp(repl));
    }
    return Result::success();
  };
  (void)r.registerOp(d);
}

} // namespace ttir
