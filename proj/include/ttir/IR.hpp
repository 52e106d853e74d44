//===- IR.hpp - payload IR: types, values, operations, regions -----------===//
//
// Part of the ttir project, under the Apache License v2.0 with LLVM Exceptions.
// SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception
//
//===----------------------------------------------------------------------===//

#ifndef TTIR_IR_HPP
#define TTIR_IR_HPP

#include "ttir/Support.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <list>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace ttir {

//===----------------------------------------------------------------------===//
// Types
//===----------------------------------------------------------------------===//

enum class ElemKind { F32, Index, I1 };
enum class IteratorKind { Parallel, Reduction };

std::string elemKindName(ElemKind k);
std::string iteratorKindName(IteratorKind k);

/// Kind of payload entity a transform-script value may be associated with.
struct TransformTypeInfo {
  enum Kind { AnyOp, ConcreteOp, AnyValue, Param, Custom };
  Kind kind = AnyOp;
  /// Payload op name for ConcreteOp, constraint id for Custom.
  std::string name;

  bool operator==(const TransformTypeInfo &o) const {
    return kind == o.kind && name == o.name;
  }
};

struct Type {
  enum Kind { Scalar, Tensor, Transform };
  Kind kind = Scalar;
  ElemKind elem = ElemKind::F32;   // Scalar and Tensor
  std::vector<int64_t> shape;      // Tensor only
  TransformTypeInfo transform;     // Transform only

  static Type scalar(ElemKind e) {
    Type t;
    t.kind = Scalar;
    t.elem = e;
    return t;
  }
  static Type tensor(std::vector<int64_t> shape) {
    Type t;
    t.kind = Tensor;
    t.elem = ElemKind::F32;
    t.shape = std::move(shape);
    return t;
  }
  static Type transformType(TransformTypeInfo info) {
    Type t;
    t.kind = Transform;
    t.transform = std::move(info);
    return t;
  }
  static Type anyOp() { return transformType({TransformTypeInfo::AnyOp, ""}); }
  static Type concreteOp(std::string name) {
    return transformType({TransformTypeInfo::ConcreteOp, std::move(name)});
  }
  static Type anyValue() {
    return transformType({TransformTypeInfo::AnyValue, ""});
  }
  static Type param() { return transformType({TransformTypeInfo::Param, ""}); }

  bool isTensor() const { return kind == Tensor; }
  bool isScalar() const { return kind == Scalar; }
  bool isTransform() const { return kind == Transform; }
  int rank() const { return static_cast<int>(shape.size()); }
  int64_t numElements() const;

  bool operator==(const Type &o) const {
    if (kind != o.kind)
      return false;
    switch (kind) {
    case Scalar:
      return elem == o.elem;
    case Tensor:
      return elem == o.elem && shape == o.shape;
    case Transform:
      return transform == o.transform;
    }
    return false;
  }
  bool operator!=(const Type &o) const { return !(*this == o); }
};

std::string typeName(const Type &t);

//===----------------------------------------------------------------------===//
// Affine maps
//===----------------------------------------------------------------------===//

/// Sum of dims plus a constant; all coefficients are +1 in this artifact.
struct AffineExpr {
  std::vector<int> dims;
  int64_t constant = 0;

  bool isSingleDim() const { return dims.size() == 1 && constant == 0; }
  bool operator==(const AffineExpr &o) const {
    return dims == o.dims && constant == o.constant;
  }
};

struct AffineMap {
  int numDims = 0;
  std::vector<AffineExpr> results;

  static AffineMap identity(int rank);
  /// Map whose results are the given single dims, e.g. (i,j,k)->(i,k).
  static AffineMap projection(int numDims, std::vector<int> dims);

  /// Evaluates every result expression at the given point.
  /// Definite failure on arity mismatch.
  Result apply(const std::vector<int64_t> &point,
               std::vector<int64_t> &out) const;

  /// True iff every result is a distinct single dim.
  bool isProjectedPermutation() const;

  /// Partial inverse of a projected permutation: dim index -> result index.
  /// Definite failure if this is not a projected permutation.
  Result invertProjected(std::map<int, int> &out) const;

  bool operator==(const AffineMap &o) const {
    return numDims == o.numDims && results == o.results;
  }
};

//===----------------------------------------------------------------------===//
// Attributes
//===----------------------------------------------------------------------===//

using Attr =
    std::variant<int64_t, double, std::string, std::vector<int64_t>,
                 std::vector<std::string>, std::vector<AffineMap>,
                 std::vector<IteratorKind>>;

/// Marker for a dynamic (SSA-operand) entry in static offset arrays.
inline constexpr int64_t kDynamic = std::numeric_limits<int64_t>::min();

//===----------------------------------------------------------------------===//
// Values, operations, regions
//===----------------------------------------------------------------------===//

struct Operation;
struct Block;
struct Region;

struct Use {
  Operation *user = nullptr;
  int operandIndex = 0;
};

struct Value {
  Type type;
  /// Exactly one of defOp / ownerBlock is set.
  Operation *defOp = nullptr;
  int resultIndex = 0;
  Block *ownerBlock = nullptr;
  int argIndex = 0;
  Location loc; // block args carry their own location
  std::vector<Use> uses;

  bool isBlockArg() const { return ownerBlock != nullptr; }
  Location getLoc() const;
  bool hasUses() const { return !uses.empty(); }
  void replaceAllUsesWith(Value *repl);
};

using OpList = std::list<std::unique_ptr<Operation>>;

struct Block {
  Region *parent = nullptr;
  std::vector<std::unique_ptr<Value>> args;
  OpList ops;

  Value *addArg(Type t, Location loc);
  Value *arg(int i) { return args[static_cast<size_t>(i)].get(); }
  int numArgs() const { return static_cast<int>(args.size()); }
  Operation *terminator();
  bool empty() const { return ops.empty(); }
  Operation *front() { return ops.front().get(); }
  Operation *back() { return ops.back().get(); }
};

struct Region {
  Operation *owner = nullptr;
  Block block;
  Region() { block.parent = this; }
};

struct Operation {
  std::string name;
  std::vector<Value *> operandList;
  std::vector<std::unique_ptr<Value>> resultList;
  std::map<std::string, Attr> attrs;
  std::vector<std::unique_ptr<Region>> regions;
  Location loc;
  Block *block = nullptr;
  OpList::iterator self{};
  bool dead = false;

  int numOperands() const { return static_cast<int>(operandList.size()); }
  int numResults() const { return static_cast<int>(resultList.size()); }
  Value *operand(int i) const { return operandList[static_cast<size_t>(i)]; }
  Value *result(int i) const {
    return resultList[static_cast<size_t>(i)].get();
  }

  void setOperand(int i, Value *v);
  void appendOperand(Value *v);
  void dropAllOperands();

  bool hasAttr(const std::string &key) const { return attrs.count(key) > 0; }
  int64_t intAttr(const std::string &key) const;
  double floatAttr(const std::string &key) const;
  const std::string &strAttr(const std::string &key) const;
  const std::vector<int64_t> &intArrayAttr(const std::string &key) const;
  const std::vector<std::string> &strArrayAttr(const std::string &key) const;
  const std::vector<AffineMap> &mapArrayAttr(const std::string &key) const;
  const std::vector<IteratorKind> &iterArrayAttr(const std::string &key) const;

  Region *region(int i) const { return regions[static_cast<size_t>(i)].get(); }
  Region *addRegion();

  Operation *parentOp() const;
  /// True if `other` is strictly nested within this op's regions.
  bool isProperAncestorOf(const Operation *other) const;

  /// Pre-order walk of this op and everything nested in it.
  void walk(const std::function<void(Operation *)> &fn);
};

//===----------------------------------------------------------------------===//
// Construction and mutation helpers
//===----------------------------------------------------------------------===//

class OpBuilder {
public:
  static OpBuilder atEnd(Block *b) { return OpBuilder(b, b->ops.end()); }
  static OpBuilder atBegin(Block *b) { return OpBuilder(b, b->ops.begin()); }
  static OpBuilder before(Operation *op) {
    return OpBuilder(op->block, op->self);
  }
  static OpBuilder after(Operation *op) {
    return OpBuilder(op->block, std::next(op->self));
  }

  Operation *create(Location loc, std::string name,
                    std::vector<Value *> operands,
                    std::vector<Type> resultTypes,
                    std::map<std::string, Attr> attrs = {},
                    int numRegions = 0);

  Block *insertionBlock() const { return block_; }
  OpList::iterator insertPoint() const { return insertPt_; }

private:
  OpBuilder(Block *b, OpList::iterator it) : block_(b), insertPt_(it) {}
  Block *block_;
  OpList::iterator insertPt_;
};

/// Detaches `op` (and everything nested in it) from the IR. Uses of nested
/// results are dropped; the op is marked dead. If `graveyard` is non-null the
/// storage is kept alive there so stale references remain checkable.
void eraseOp(Operation *op, std::vector<std::unique_ptr<Operation>> *graveyard);

/// Deep-clones `op` at the builder's insertion point. `mapping` translates
/// operand values; cloned results/args are added to it.
Operation *cloneOp(OpBuilder builder, Operation *op,
                   std::map<Value *, Value *> &mapping);

/// Moves `op` from its current block to the builder's insertion point.
void moveOp(Operation *op, OpBuilder builder);

/// All ops nested under `root` (excluding `root`) in program order that
/// satisfy `pred`.
std::vector<Operation *>
walkPreorder(Operation *root, const std::function<bool(Operation *)> &pred);

/// Top-level module builder.
std::unique_ptr<Operation> makeModule(Location loc);

/// Finds a func.func or transform.named_sequence with the given symbol name
/// directly under `module`.
Operation *lookupSymbol(Operation *module, const std::string &name);

/// Checks that every use list matches the operand lists exactly.
bool checkUseDefConsistency(Operation *root, std::string *err = nullptr);

} // namespace ttir

#endif // TTIR_IR_HPP
