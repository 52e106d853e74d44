//===- Transform.hpp - transform-script interpreter and state ------------===//
//
// Part of the ttir project, under the Apache License v2.0 with LLVM Exceptions.
// SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception
//
//===----------------------------------------------------------------------===//

#ifndef TTIR_TRANSFORM_HPP
#define TTIR_TRANSFORM_HPP

#include "ttir/IR.hpp"

#include <functional>
#include <optional>
#include <sstream>

namespace ttir {

class Interpreter;
class TransformState;

//===----------------------------------------------------------------------===//
// Payload references and handle state
//===----------------------------------------------------------------------===//

/// One payload entity a handle may refer to. Stale references (to erased IR)
/// are checked errors, never dangling pointers: erased storage is kept in a
/// graveyard and flagged dead.
struct PayloadRef {
  enum Kind { Op, Val, Param } kind = Op;
  Operation *op = nullptr;
  Value *value = nullptr;
  int64_t param = 0;

  static PayloadRef makeOp(Operation *o) {
    PayloadRef r;
    r.kind = Op;
    r.op = o;
    return r;
  }
  static PayloadRef makeValue(Value *v) {
    PayloadRef r;
    r.kind = Val;
    r.value = v;
    return r;
  }
  static PayloadRef makeParam(int64_t p) {
    PayloadRef r;
    r.kind = Param;
    r.param = p;
    return r;
  }

  bool operator==(const PayloadRef &o) const {
    return kind == o.kind && op == o.op && value == o.value &&
           param == o.param;
  }
};

using PayloadList = std::vector<PayloadRef>;

/// Recorded when a consuming transform op invalidates a handle.
struct InvalidationRecord {
  Location consumingOp;
  int consumedOperandIndex = 0;
  std::optional<Location> ancestorPayloadLoc;
  std::optional<Location> nestedPayloadLoc;
};

/// Named predicates over payload ops backing custom handle types such as
/// !transform.my.call_op_interface.
struct TypeConstraint {
  std::string id;
  std::string description; // used in mismatch diagnostics
  std::function<bool(Operation *)> predicate;
};

/// Association table with a scope stack, invalidation records and the
/// tracking rewriter (erasure graveyard + handle-preserving replacement).
class TransformState {
public:
  explicit TransformState(Operation *payloadRoot) : root(payloadRoot) {
    scopes.emplace_back();
  }

  Operation *payloadRoot() const { return root; }

  //===--------------------------------------------------------------------===//
  // Scopes and associations
  //===--------------------------------------------------------------------===//

  void pushScope() { scopes.emplace_back(); }
  void popScope();
  size_t scopeDepth() const { return scopes.size(); }

  /// Associates `handle` in the innermost scope after checking the handle
  /// type constraints. Silenceable on mismatch.
  Result setPayload(Value *handle, PayloadList refs);

  /// Innermost association, or null if the handle is unbound.
  const PayloadList *getPayload(Value *handle) const;
  bool isBound(Value *handle) const { return getPayload(handle) != nullptr; }

  /// RAII scope used by region-carrying match ops.
  class RegionScope {
  public:
    explicit RegionScope(TransformState &s) : state(s) { s.pushScope(); }
    ~RegionScope() { state.popScope(); }

  private:
    TransformState &state;
  };

  //===--------------------------------------------------------------------===//
  // Consumption and invalidation
  //===--------------------------------------------------------------------===//

  /// Records invalidation for `handle`, every alias sharing payload, and
  /// every handle whose payload is nested in the consumed payload, then drops
  /// the consumed handle's association.
  void consumeAndInvalidate(Value *handle, Location consumingOpLoc,
                            int operandIndex);

  const InvalidationRecord *invalidationOf(Value *handle) const;

  /// True when a reference points at erased IR.
  bool isStale(const PayloadRef &ref) const;

  //===--------------------------------------------------------------------===//
  // Tracking rewriter
  //===--------------------------------------------------------------------===//

  /// Erases `op` and everything nested in it; every erased op and value is
  /// removed from all handle associations.
  void eraseTracked(Operation *op);

  /// Rewires all uses of `old`'s results to `replacements` and erases `old`.
  /// If `old` is tracked, its handle entries transfer to the defining op of
  /// the replacements; that requires a single defining op with the same op
  /// name, otherwise Definite failure.
  Result trackedReplace(Operation *old,
                        const std::vector<Value *> &replacements);

  //===--------------------------------------------------------------------===//
  // Handle type checking
  //===--------------------------------------------------------------------===//

  void addTypeConstraint(TypeConstraint c) {
    typeConstraints[c.id] = std::move(c);
  }
  const TypeConstraint *typeConstraint(const std::string &id) const {
    auto it = typeConstraints.find(id);
    return it == typeConstraints.end() ? nullptr : &it->second;
  }

  /// Success iff every ref satisfies the handle type `t`. Silenceable with an
  /// "offending operation" note otherwise.
  Result checkHandleType(const PayloadList &refs, const Type &t,
                         Location diagLoc) const;

private:
  Operation *root;
  std::vector<std::map<Value *, PayloadList>> scopes;
  std::map<Value *, InvalidationRecord> invalidations;
  std::map<std::string, TypeConstraint> typeConstraints;
  std::vector<std::unique_ptr<Operation>> graveyard;

  void forEachAssociation(
      const std::function<void(Value *, PayloadList &)> &fn);
};

//===----------------------------------------------------------------------===//
// Registry
//===----------------------------------------------------------------------===//

/// Context handed to a transform op implementation. Operand payload lists are
/// prefetched (consumed operands are already dissociated); the implementation
/// fills one payload list per transform result.
struct ApplyCtx {
  Interpreter &interp;
  TransformState &state;
  Operation *op;
  std::vector<PayloadList> operands;
  std::vector<PayloadList> results;
};

struct TransformOpDef {
  std::string name;
  /// Per-operand consumption; when the op has more operands than entries the
  /// last entry repeats (variadic tails).
  std::vector<bool> consumesOperand;
  bool isMatch = false;
  bool mutatesPayload = false;
  std::function<Result(ApplyCtx &)> apply;

  bool consumes(int operandIndex) const {
    if (consumesOperand.empty())
      return false;
    size_t i = std::min(static_cast<size_t>(operandIndex),
                        consumesOperand.size() - 1);
    return consumesOperand[i];
  }
};

class Registry {
public:
  /// Definite failure on duplicate names or match ops declaring mutation.
  Result registerOp(TransformOpDef def);
  const TransformOpDef *lookup(const std::string &name) const;

  void addTypeConstraint(TypeConstraint c) {
    typeConstraints.push_back(std::move(c));
  }
  const std::vector<TypeConstraint> &constraints() const {
    return typeConstraints;
  }

private:
  std::map<std::string, TransformOpDef> defs;
  std::vector<TypeConstraint> typeConstraints;
};

void registerBuiltinTransformOps(Registry &r);
void registerMatcherOps(Registry &r);
void registerStructuredTransformOps(Registry &r);
/// change_call_target, call_to_op and the my.call_op_interface constraint.
void registerMyExtension(Registry &r);

/// All of the above.
Registry buildFullRegistry();

//===----------------------------------------------------------------------===//
// Interpreter
//===----------------------------------------------------------------------===//

struct InterpreterOptions {
  bool expensiveChecks = true;
};

enum class FailureMode { Propagate, Suppress };

class Interpreter {
public:
  Interpreter(Operation *module, const Registry &registry,
              InterpreterOptions options = {});

  /// Applies the named entry sequence. The first entry argument binds to the
  /// payload module; `extraBindings` bind the remaining arguments.
  Result run(const std::string &entryName,
             const std::vector<PayloadList> &extraBindings = {});

  /// Applies one transform op: staleness + expensive checks, consumption,
  /// dispatch, result binding, payload re-verification.
  Result applyOp(Operation *op);

  /// Runs a named sequence in a fresh scope with the given argument
  /// bindings; on success the yield operand payloads are copied out.
  Result runSequence(Operation *seqOp, FailureMode mode,
                     const std::vector<PayloadList> &args,
                     std::vector<PayloadList> &yields);

  /// Applies the ops of a sequence body under the given failure mode.
  Result applyBody(Block &body, FailureMode mode);

  TransformState &state() { return assocState; }
  Operation *module() const { return mod; }
  const InterpreterOptions &options() const { return opts; }

  void emitRemark(Location loc, const std::string &message) {
    diags.push_back(Diagnostic(Severity::Remark, message, loc));
  }
  void debugLine(const std::string &line) { debug << line << "\n"; }

  /// Remarks and silenced messages collected while running.
  const std::vector<Diagnostic> &diagnostics() const { return diags; }
  std::string debugLog() const { return debug.str(); }

  /// Number of transform ops applied; used to verify suppress-mode skipping.
  int appliedOpCount() const { return applied; }

private:
  Result expensiveCheck(Operation *op);
  Result stalenessCheck(Operation *op);

  Operation *mod;
  const Registry &registry;
  InterpreterOptions opts;
  TransformState assocState;
  std::vector<Diagnostic> diags;
  std::ostringstream debug;
  int applied = 0;
};

} // namespace ttir

#endif // TTIR_TRANSFORM_HPP
