//===- Transform.cpp - association state, tracking rewriter, interpreter --===//
//
// Part of the ttir project, under the Apache License v2.0 with LLVM Exceptions.
// SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception
//
//===----------------------------------------------------------------------===//

#include "ttir/Transform.hpp"
#include "ttir/Verifier.hpp"

#include <algorithm>
#include <set>

namespace ttir {

//===----------------------------------------------------------------------===//
// TransformState
//===----------------------------------------------------------------------===//

void TransformState::popScope() {
  assert(scopes.size() > 1 && "popping the root scope");
  scopes.pop_back();
}

Result TransformState::setPayload(Value *handle, PayloadList refs) {
  Result r = checkHandleType(refs, handle->type, handle->getLoc());
  if (!r.succeeded())
    return r;
  scopes.back()[handle] = std::move(refs);
  return Result::success();
}

const PayloadList *TransformState::getPayload(Value *handle) const {
  for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
    auto f = it->find(handle);
    if (f != it->end())
      return &f->second;
  }
  return nullptr;
}

void TransformState::forEachAssociation(
    const std::function<void(Value *, PayloadList &)> &fn) {
  for (auto &scope : scopes)
    for (auto &kv : scope)
      fn(kv.first, kv.second);
}

static Location payloadLoc(const PayloadRef &ref) {
  if (ref.kind == PayloadRef::Op)
    return ref.op->loc;
  if (ref.kind == PayloadRef::Val)
    return ref.value->getLoc();
  return Location{};
}

Result TransformState::checkHandleType(const PayloadList &refs, const Type &t,
                                       Location diagLoc) const {
  if (!t.isTransform())
    return Result::definiteAt(diagLoc, "expected a transform handle type");
  const TransformTypeInfo &info = t.transform;
  for (const PayloadRef &ref : refs) {
    bool ok = false;
    switch (info.kind) {
    case TransformTypeInfo::AnyOp:
      ok = ref.kind == PayloadRef::Op;
      break;
    case TransformTypeInfo::ConcreteOp:
      ok = ref.kind == PayloadRef::Op && ref.op->name == info.name;
      break;
    case TransformTypeInfo::AnyValue:
      ok = ref.kind == PayloadRef::Val;
      break;
    case TransformTypeInfo::Param:
      ok = ref.kind == PayloadRef::Param;
      break;
    case TransformTypeInfo::Custom: {
      const TypeConstraint *c = typeConstraint(info.name);
      if (!c)
        return Result::definiteAt(diagLoc, "unknown handle type constraint '" +
                                               info.name + "'");
      ok = ref.kind == PayloadRef::Op && c->predicate(ref.op);
      break;
    }
    }
    if (!ok) {
      Result r = Result::silenceableAt(
          diagLoc, "payload does not satisfy handle type " + typeName(t));
      if (ref.kind != PayloadRef::Param)
        r.diag().attachNote(payloadLoc(ref), "offending operation");
      return r;
    }
  }
  return Result::success();
}

bool TransformState::isStale(const PayloadRef &ref) const {
  if (ref.kind == PayloadRef::Op)
    return ref.op->dead;
  if (ref.kind == PayloadRef::Val) {
    if (ref.value->defOp)
      return ref.value->defOp->dead;
    Operation *owner = ref.value->ownerBlock->parent->owner;
    return owner && owner->dead;
  }
  return false;
}

void TransformState::consumeAndInvalidate(Value *handle,
                                          Location consumingOpLoc,
                                          int operandIndex) {
  PayloadList consumed;
  if (const PayloadList *p = getPayload(handle))
    consumed = *p;

  std::vector<Operation *> consumedOps;
  for (const PayloadRef &ref : consumed)
    if (ref.kind == PayloadRef::Op)
      consumedOps.push_back(ref.op);

  forEachAssociation([&](Value *h, PayloadList &list) {
    if (invalidations.count(h))
      return;
    bool alias = h == handle;
    Operation *ancestor = nullptr;
    Operation *nested = nullptr;
    for (const PayloadRef &ref : list) {
      Operation *owner = nullptr;
      if (ref.kind == PayloadRef::Op)
        owner = ref.op;
      else if (ref.kind == PayloadRef::Val)
        owner = ref.value->defOp ? ref.value->defOp
                                 : ref.value->ownerBlock->parent->owner;
      if (!owner)
        continue;
      for (Operation *c : consumedOps) {
        if (c == owner && ref.kind == PayloadRef::Op) {
          alias = true;
        } else if (c == owner || c->isProperAncestorOf(owner)) {
          ancestor = c;
          nested = owner;
        }
      }
    }
    if (!alias && !nested)
      return;
    InvalidationRecord rec;
    rec.consumingOp = consumingOpLoc;
    rec.consumedOperandIndex = operandIndex;
    if (!alias && nested) {
      rec.ancestorPayloadLoc = ancestor->loc;
      rec.nestedPayloadLoc = nested->loc;
    }
    invalidations.emplace(h, std::move(rec));
  });

  if (!invalidations.count(handle)) {
    InvalidationRecord rec;
    rec.consumingOp = consumingOpLoc;
    rec.consumedOperandIndex = operandIndex;
    invalidations.emplace(handle, std::move(rec));
  }

  for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
    if (it->erase(handle))
      break;
  }
}

const InvalidationRecord *TransformState::invalidationOf(Value *handle) const {
  auto it = invalidations.find(handle);
  return it == invalidations.end() ? nullptr : &it->second;
}

void TransformState::eraseTracked(Operation *op) {
  std::set<Operation *> erasedOps;
  op->walk([&](Operation *o) { erasedOps.insert(o); });

  // Invalidated handles keep their stale references so later uses fail the
  // staleness check instead of silently shrinking to an empty payload.
  forEachAssociation([&](Value *h, PayloadList &list) {
    if (invalidations.count(h))
      return;
    list.erase(std::remove_if(list.begin(), list.end(),
                              [&](const PayloadRef &ref) {
                                if (ref.kind == PayloadRef::Op)
                                  return erasedOps.count(ref.op) > 0;
                                if (ref.kind == PayloadRef::Val) {
                                  Operation *owner =
                                      ref.value->defOp
                                          ? ref.value->defOp
                                          : ref.value->ownerBlock->parent
                                                ->owner;
                                  return owner && erasedOps.count(owner) > 0;
                                }
                                return false;
                              }),
               list.end());
  });
  eraseOp(op, &graveyard);
}

Result TransformState::trackedReplace(Operation *old,
                                      const std::vector<Value *> &repls) {
  assert(repls.size() == static_cast<size_t>(old->numResults()) &&
         "replacement count mismatch");

  bool tracked = false;
  forEachAssociation([&](Value *h, PayloadList &list) {
    if (invalidations.count(h))
      return;
    for (const PayloadRef &ref : list)
      if (ref.kind == PayloadRef::Op && ref.op == old)
        tracked = true;
  });

  Operation *replacementOp = nullptr;
  if (tracked) {
    for (Value *v : repls) {
      Operation *def = v->defOp;
      if (!def || (replacementOp && def != replacementOp))
        return Result::definiteAt(
            old->loc, "tracked payload op replaced with values defined by "
                      "multiple ops; handle updates would be ambiguous");
      replacementOp = def;
    }
    if (replacementOp && replacementOp->name != old->name)
      return Result::definiteAt(
          old->loc, "tracked payload op replaced with an op of a different "
                    "kind ('" +
                        replacementOp->name + "' vs '" + old->name + "')");
  }

  for (int i = 0; i < old->numResults(); ++i)
    old->result(i)->replaceAllUsesWith(repls[static_cast<size_t>(i)]);

  if (tracked && replacementOp) {
    forEachAssociation([&](Value *h, PayloadList &list) {
      if (invalidations.count(h))
        return;
      for (PayloadRef &ref : list)
        if (ref.kind == PayloadRef::Op && ref.op == old)
          ref.op = replacementOp;
    });
  }
  eraseTracked(old);
  return Result::success();
}

//===----------------------------------------------------------------------===//
// Registry
//===----------------------------------------------------------------------===//

Result Registry::registerOp(TransformOpDef def) {
  if (defs.count(def.name))
    return Result::definiteAt({}, "duplicate transform op registration '" +
                                      def.name + "'");
  if (!def.apply)
    return Result::definiteAt({}, "transform op '" + def.name +
                                      "' registered without an apply body");
  if (def.isMatch && def.mutatesPayload)
    return Result::definiteAt({}, "match op '" + def.name +
                                      "' must not mutate payload");
  defs.emplace(def.name, std::move(def));
  return Result::success();
}

const TransformOpDef *Registry::lookup(const std::string &name) const {
  auto it = defs.find(name);
  return it == defs.end() ? nullptr : &it->second;
}

Registry buildFullRegistry() {
  Registry r;
  registerBuiltinTransformOps(r);
  registerMatcherOps(r);
  registerStructuredTransformOps(r);
  registerMyExtension(r);
  return r;
}

//===----------------------------------------------------------------------===//
// Interpreter
//===----------------------------------------------------------------------===//

Interpreter::Interpreter(Operation *module, const Registry &registry,
                         InterpreterOptions options)
    : mod(module), registry(registry), opts(options), assocState(module) {
  for (const TypeConstraint &c : registry.constraints())
    assocState.addTypeConstraint(c);
}

Result Interpreter::run(const std::string &entryName,
                        const std::vector<PayloadList> &extraBindings) {
  Operation *seq = lookupSymbol(mod, entryName);
  if (!seq || seq->name != "transform.named_sequence")
    return Result::definiteAt(mod->loc,
                              "no named sequence '" + entryName + "'");
  std::vector<PayloadList> args;
  args.push_back({PayloadRef::makeOp(mod)});
  args.insert(args.end(), extraBindings.begin(), extraBindings.end());

  std::vector<PayloadList> yields;
  Result r = runSequence(seq, FailureMode::Propagate, args, yields);
  // Entry bindings that fail the handle type check are a hard error.
  if (r.isSilenceable())
    return Result::definite(r.diag());
  if (!r.succeeded())
    return r;
  std::vector<Diagnostic> verifyDiags;
  if (!verifyModule(mod, verifyDiags))
    return Result::definite(verifyDiags.front());
  return Result::success();
}

Result Interpreter::runSequence(Operation *seqOp, FailureMode mode,
                                const std::vector<PayloadList> &args,
                                std::vector<PayloadList> &yields) {
  Block &body = seqOp->region(0)->block;
  if (static_cast<int>(args.size()) != body.numArgs())
    return Result::definiteAt(
        seqOp->loc, "sequence '" + seqOp->strAttr("sym_name") + "' expects " +
                        std::to_string(body.numArgs()) + " arguments, got " +
                        std::to_string(args.size()));
  assocState.pushScope();
  auto fail = [&](Result r) {
    assocState.popScope();
    return r;
  };
  for (int i = 0; i < body.numArgs(); ++i) {
    Result r = assocState.setPayload(body.arg(i), args[static_cast<size_t>(i)]);
    if (!r.succeeded())
      return fail(std::move(r));
  }
  Result r = applyBody(body, mode);
  if (!r.succeeded())
    return fail(std::move(r));

  yields.clear();
  Operation *term = body.terminator();
  if (term && term->name == "transform.yield") {
    for (int i = 0; i < term->numOperands(); ++i) {
      // A suppressed failure may skip the ops defining yield operands; the
      // corresponding results are then bound to empty payload lists.
      const PayloadList *p = assocState.getPayload(term->operand(i));
      yields.push_back(p ? *p : PayloadList{});
    }
  }
  assocState.popScope();
  return Result::success();
}

Result Interpreter::applyBody(Block &body, FailureMode mode) {
  for (auto &op : body.ops) {
    if (op->name == "transform.yield")
      break;
    Result r = applyOp(op.get());
    if (r.isDefinite())
      return r;
    if (r.isSilenceable()) {
      if (mode == FailureMode::Propagate)
        return r;
      debugLine("[transform] silenced: " + r.diag().message);
      return Result::success();
    }
  }
  return Result::success();
}

Result Interpreter::expensiveCheck(Operation *op) {
  for (int i = 0; i < op->numOperands(); ++i) {
    Value *handle = op->operand(i);
    if (!handle->type.isTransform())
      continue;
    const InvalidationRecord *rec = assocState.invalidationOf(handle);
    if (!rec)
      continue;
    Diagnostic d(Severity::Error,
                 "op uses a handle invalidated by a previously executed "
                 "transform op",
                 op->loc);
    d.attachNote(handle->getLoc(), "handle to invalidated ops");
    d.attachNote(rec->consumingOp,
                 "invalidated by this transform op that consumes its "
                 "operand #" +
                     std::to_string(rec->consumedOperandIndex) +
                     " and invalidates all handles to payload IR entities "
                     "associated with this operand and entities nested in "
                     "them");
    if (rec->ancestorPayloadLoc)
      d.attachNote(*rec->ancestorPayloadLoc, "ancestor payload op");
    if (rec->nestedPayloadLoc)
      d.attachNote(*rec->nestedPayloadLoc, "nested payload op");
    return Result::definite(std::move(d));
  }
  return Result::success();
}

Result Interpreter::stalenessCheck(Operation *op) {
  for (int i = 0; i < op->numOperands(); ++i) {
    Value *handle = op->operand(i);
    const PayloadList *payload = assocState.getPayload(handle);
    if (!payload)
      return Result::definiteAt(
          op->loc, "operand #" + std::to_string(i) +
                       " is not associated with any payload (the handle may "
                       "have been consumed)");
    for (const PayloadRef &ref : *payload)
      if (assocState.isStale(ref))
        return Result::definiteAt(op->loc,
                                  "operand #" + std::to_string(i) +
                                      " points to erased payload IR");
  }
  return Result::success();
}

Result Interpreter::applyOp(Operation *op) {
  const TransformOpDef *def = registry.lookup(op->name);
  if (!def)
    return Result::definiteAt(op->loc,
                              "unregistered transform op '" + op->name + "'");

  if (opts.expensiveChecks) {
    Result r = expensiveCheck(op);
    if (!r.succeeded())
      return r;
  }
  Result r = stalenessCheck(op);
  if (!r.succeeded())
    return r;

  ApplyCtx ctx{*this, assocState, op, {}, {}};
  for (int i = 0; i < op->numOperands(); ++i)
    ctx.operands.push_back(*assocState.getPayload(op->operand(i)));
  ctx.results.resize(static_cast<size_t>(op->numResults()));

  // Dissociate consumed handles before the payload is mutated so that
  // replacement tracking never sees them as live.
  for (int i = 0; i < op->numOperands(); ++i)
    if (def->consumes(i))
      assocState.consumeAndInvalidate(op->operand(i), op->loc, i);

  ++applied;
  r = def->apply(ctx);
  if (!r.succeeded())
    return r;

  for (int i = 0; i < op->numResults(); ++i) {
    r = assocState.setPayload(op->result(i),
                              std::move(ctx.results[static_cast<size_t>(i)]));
    if (!r.succeeded())
      return r;
  }

  if (def->mutatesPayload) {
    std::vector<Diagnostic> verifyDiags;
    if (!verifyModule(mod, verifyDiags))
      return Result::definite(verifyDiags.front());
    std::string err;
    if (!checkUseDefConsistency(mod, &err))
      return Result::definiteAt(op->loc, "use-def inconsistency: " + err);
  }
  return Result::success();
}

} // namespace ttir
