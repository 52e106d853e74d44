//===- IR.cpp - payload IR implementation ---------------------------------===//
//
// Part of the ttir project, under the Apache License v2.0 with LLVM Exceptions.
// SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception
//
//===----------------------------------------------------------------------===//

#include "ttir/IR.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace ttir {

std::string elemKindName(ElemKind k) {
  switch (k) {
  case ElemKind::F32:
    return "f32";
  case ElemKind::Index:
    return "index";
  case ElemKind::I1:
    return "i1";
  }
  return "f32";
}

std::string iteratorKindName(IteratorKind k) {
  return k == IteratorKind::Parallel ? "parallel" : "reduction";
}

int64_t Type::numElements() const {
  int64_t n = 1;
  for (int64_t d : shape)
    n *= d;
  return n;
}

std::string typeName(const Type &t) {
  switch (t.kind) {
  case Type::Scalar:
    return elemKindName(t.elem);
  case Type::Tensor: {
    std::ostringstream os;
    os << "tensor<";
    for (int64_t d : t.shape)
      os << d << "x";
    os << elemKindName(t.elem) << ">";
    return os.str();
  }
  case Type::Transform:
    switch (t.transform.kind) {
    case TransformTypeInfo::AnyOp:
      return "!transform.any_op";
    case TransformTypeInfo::ConcreteOp:
      return "!transform.op<\"" + t.transform.name + "\">";
    case TransformTypeInfo::AnyValue:
      return "!transform.any_value";
    case TransformTypeInfo::Param:
      return "!transform.param<i64>";
    case TransformTypeInfo::Custom:
      return "!transform." + t.transform.name;
    }
  }
  return "<?>";
}

//===----------------------------------------------------------------------===//
// AffineMap
//===----------------------------------------------------------------------===//

AffineMap AffineMap::identity(int rank) {
  AffineMap m;
  m.numDims = rank;
  for (int i = 0; i < rank; ++i) {
    AffineExpr e;
    e.dims.push_back(i);
    m.results.push_back(std::move(e));
  }
  return m;
}

AffineMap AffineMap::projection(int numDims, std::vector<int> dims) {
  AffineMap m;
  m.numDims = numDims;
  for (int d : dims) {
    AffineExpr e;
    e.dims.push_back(d);
    m.results.push_back(std::move(e));
  }
  return m;
}

Result AffineMap::apply(const std::vector<int64_t> &point,
                        std::vector<int64_t> &out) const {
  if (static_cast<int>(point.size()) != numDims)
    return Result::definiteAt(
        {}, "affine map expects " + std::to_string(numDims) +
                " coordinates, got " + std::to_string(point.size()));
  out.clear();
  for (const AffineExpr &e : results) {
    int64_t v = e.constant;
    for (int d : e.dims)
      v += point[static_cast<size_t>(d)];
    out.push_back(v);
  }
  return Result::success();
}

bool AffineMap::isProjectedPermutation() const {
  std::set<int> seen;
  for (const AffineExpr &e : results) {
    if (!e.isSingleDim())
      return false;
    if (!seen.insert(e.dims[0]).second)
      return false;
  }
  return true;
}

Result AffineMap::invertProjected(std::map<int, int> &out) const {
  if (!isProjectedPermutation())
    return Result::definiteAt({}, "map is not a projected permutation");
  out.clear();
  for (int r = 0; r < static_cast<int>(results.size()); ++r)
    out[results[static_cast<size_t>(r)].dims[0]] = r;
  return Result::success();
}

//===----------------------------------------------------------------------===//
// Values and operations
//===----------------------------------------------------------------------===//

Location Value::getLoc() const {
  if (defOp)
    return defOp->loc;
  return loc;
}

void Value::replaceAllUsesWith(Value *repl) {
  // Copy: setOperand mutates the use list.
  std::vector<Use> copy = uses;
  for (const Use &u : copy)
    u.user->setOperand(u.operandIndex, repl);
}

Value *Block::addArg(Type t, Location loc) {
  auto v = std::make_unique<Value>();
  v->type = std::move(t);
  v->ownerBlock = this;
  v->argIndex = static_cast<int>(args.size());
  v->loc = std::move(loc);
  args.push_back(std::move(v));
  return args.back().get();
}

Operation *Block::terminator() { return ops.empty() ? nullptr : back(); }

static void removeUse(Value *v, Operation *user, int index) {
  auto it = std::find_if(v->uses.begin(), v->uses.end(), [&](const Use &u) {
    return u.user == user && u.operandIndex == index;
  });
  assert(it != v->uses.end() && "use not found");
  v->uses.erase(it);
}

void Operation::setOperand(int i, Value *v) {
  Value *old = operandList[static_cast<size_t>(i)];
  if (old == v)
    return;
  removeUse(old, this, i);
  operandList[static_cast<size_t>(i)] = v;
  v->uses.push_back({this, i});
}

void Operation::appendOperand(Value *v) {
  operandList.push_back(v);
  v->uses.push_back({this, static_cast<int>(operandList.size()) - 1});
}

void Operation::dropAllOperands() {
  for (int i = 0; i < numOperands(); ++i)
    removeUse(operandList[static_cast<size_t>(i)], this, i);
  operandList.clear();
}

int64_t Operation::intAttr(const std::string &key) const {
  return std::get<int64_t>(attrs.at(key));
}
double Operation::floatAttr(const std::string &key) const {
  return std::get<double>(attrs.at(key));
}
const std::string &Operation::strAttr(const std::string &key) const {
  return std::get<std::string>(attrs.at(key));
}
const std::vector<int64_t> &
Operation::intArrayAttr(const std::string &key) const {
  return std::get<std::vector<int64_t>>(attrs.at(key));
}
const std::vector<std::string> &
Operation::strArrayAttr(const std::string &key) const {
  return std::get<std::vector<std::string>>(attrs.at(key));
}
const std::vector<AffineMap> &
Operation::mapArrayAttr(const std::string &key) const {
  return std::get<std::vector<AffineMap>>(attrs.at(key));
}
const std::vector<IteratorKind> &
Operation::iterArrayAttr(const std::string &key) const {
  return std::get<std::vector<IteratorKind>>(attrs.at(key));
}

Region *Operation::addRegion() {
  regions.push_back(std::make_unique<Region>());
  regions.back()->owner = this;
  return regions.back().get();
}

Operation *Operation::parentOp() const {
  if (!block || !block->parent)
    return nullptr;
  return block->parent->owner;
}

bool Operation::isProperAncestorOf(const Operation *other) const {
  for (const Operation *p = other ? other->parentOp() : nullptr; p;
       p = p->parentOp())
    if (p == this)
      return true;
  return false;
}

void Operation::walk(const std::function<void(Operation *)> &fn) {
  fn(this);
  for (auto &region : regions)
    for (auto &op : region->block.ops)
      op->walk(fn);
}

//===----------------------------------------------------------------------===//
// Builders and structural helpers
//===----------------------------------------------------------------------===//

Operation *OpBuilder::create(Location loc, std::string name,
                             std::vector<Value *> operands,
                             std::vector<Type> resultTypes,
                             std::map<std::string, Attr> attrs,
                             int numRegions) {
  auto op = std::make_unique<Operation>();
  Operation *raw = op.get();
  raw->name = std::move(name);
  raw->loc = std::move(loc);
  raw->attrs = std::move(attrs);
  for (Value *v : operands)
    raw->appendOperand(v);
  for (size_t i = 0; i < resultTypes.size(); ++i) {
    auto v = std::make_unique<Value>();
    v->type = resultTypes[i];
    v->defOp = raw;
    v->resultIndex = static_cast<int>(i);
    raw->resultList.push_back(std::move(v));
  }
  for (int i = 0; i < numRegions; ++i)
    raw->addRegion();
  raw->block = block_;
  raw->self = block_->ops.insert(insertPt_, std::move(op));
  return raw;
}

static void markDeadRecursive(Operation *op) {
  op->walk([](Operation *o) { o->dead = true; });
}

static void dropNestedOperandUses(Operation *op) {
  op->dropAllOperands();
  for (auto &region : op->regions)
    for (auto &nested : region->block.ops)
      dropNestedOperandUses(nested.get());
}

void eraseOp(Operation *op,
             std::vector<std::unique_ptr<Operation>> *graveyard) {
  assert(op->block && "erasing detached op");
  dropNestedOperandUses(op);
  markDeadRecursive(op);
  OpList &ops = op->block->ops;
  std::unique_ptr<Operation> holder = std::move(*op->self);
  ops.erase(op->self);
  op->block = nullptr;
  if (graveyard)
    graveyard->push_back(std::move(holder));
}

static Value *mapValue(std::map<Value *, Value *> &mapping, Value *v) {
  auto it = mapping.find(v);
  return it == mapping.end() ? v : it->second;
}

Operation *cloneOp(OpBuilder builder, Operation *op,
                   std::map<Value *, Value *> &mapping) {
  std::vector<Value *> operands;
  operands.reserve(op->operandList.size());
  for (Value *v : op->operandList)
    operands.push_back(mapValue(mapping, v));
  std::vector<Type> resultTypes;
  for (auto &r : op->resultList)
    resultTypes.push_back(r->type);
  Operation *clone = builder.create(op->loc, op->name, std::move(operands),
                                    std::move(resultTypes), op->attrs, 0);
  for (int i = 0; i < op->numResults(); ++i)
    mapping[op->result(i)] = clone->result(i);
  for (auto &region : op->regions) {
    Region *newRegion = clone->addRegion();
    for (auto &arg : region->block.args) {
      Value *newArg = newRegion->block.addArg(arg->type, arg->loc);
      mapping[arg.get()] = newArg;
    }
    for (auto &nested : region->block.ops)
      cloneOp(OpBuilder::atEnd(&newRegion->block), nested.get(), mapping);
  }
  return clone;
}

void moveOp(Operation *op, OpBuilder builder) {
  assert(op->block && "moving detached op");
  OpList &src = op->block->ops;
  std::unique_ptr<Operation> holder = std::move(*op->self);
  src.erase(op->self);
  Block *destBlock = builder.insertionBlock();
  op->block = destBlock;
  op->self = destBlock->ops.insert(builder.insertPoint(), std::move(holder));
}

std::vector<Operation *>
walkPreorder(Operation *root, const std::function<bool(Operation *)> &pred) {
  std::vector<Operation *> out;
  for (auto &region : root->regions)
    for (auto &op : region->block.ops)
      op->walk([&](Operation *o) {
        if (pred(o))
          out.push_back(o);
      });
  return out;
}

std::unique_ptr<Operation> makeModule(Location loc) {
  auto op = std::make_unique<Operation>();
  op->name = "module";
  op->loc = std::move(loc);
  op->addRegion();
  return op;
}

Operation *lookupSymbol(Operation *module, const std::string &name) {
  for (auto &op : module->region(0)->block.ops) {
    if ((op->name == "func.func" || op->name == "transform.named_sequence") &&
        op->hasAttr("sym_name") && op->strAttr("sym_name") == name)
      return op.get();
  }
  return nullptr;
}

bool checkUseDefConsistency(Operation *root, std::string *err) {
  bool ok = true;
  auto fail = [&](const std::string &msg) {
    ok = false;
    if (err && err->empty())
      *err = msg;
  };
  root->walk([&](Operation *op) {
    for (int i = 0; i < op->numOperands(); ++i) {
      Value *v = op->operand(i);
      int count = 0;
      for (const Use &u : v->uses)
        if (u.user == op && u.operandIndex == i)
          ++count;
      if (count != 1)
        fail("operand use count mismatch at op '" + op->name + "'");
    }
    for (int i = 0; i < op->numResults(); ++i)
      for (const Use &u : op->result(i)->uses)
        if (u.user->operand(u.operandIndex) != op->result(i))
          fail("dangling use record at op '" + op->name + "'");
  });
  return ok;
}

} // namespace ttir
