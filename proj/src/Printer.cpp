//===- Printer.cpp - deterministic textual output -------------------------===//
//
// Part of the ttir project, under the Apache License v2.0 with LLVM Exceptions.
// SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception
//
//===----------------------------------------------------------------------===//

#include "ttir/Text.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace ttir {

namespace {

/// Shortest scientific form that parses back to the same double.
std::string formatFloat(double v) {
  char buf[64];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*e", prec, v);
    if (std::strtod(buf, nullptr) == v)
      return buf;
  }
  return buf;
}

std::string formatAffineExpr(const AffineExpr &e) {
  std::string s;
  for (size_t i = 0; i < e.dims.size(); ++i) {
    if (i)
      s += " + ";
    s += "d" + std::to_string(e.dims[i]);
  }
  if (e.constant != 0 || e.dims.empty()) {
    if (!e.dims.empty())
      s += " + ";
    s += std::to_string(e.constant);
  }
  return s;
}

std::string formatAffineMap(const AffineMap &m) {
  std::string s = "affine_map<(";
  for (int i = 0; i < m.numDims; ++i) {
    if (i)
      s += ", ";
    s += "d" + std::to_string(i);
  }
  s += ") -> (";
  for (size_t i = 0; i < m.results.size(); ++i) {
    if (i)
      s += ", ";
    s += formatAffineExpr(m.results[i]);
  }
  s += ")>";
  return s;
}

std::string formatAttrValue(const Attr &a) {
  struct Visitor {
    std::string operator()(int64_t v) const { return std::to_string(v); }
    std::string operator()(double v) const { return formatFloat(v); }
    std::string operator()(const std::string &v) const {
      return "\"" + v + "\"";
    }
    std::string operator()(const std::vector<int64_t> &v) const {
      std::string s = "[";
      for (size_t i = 0; i < v.size(); ++i)
        s += (i ? ", " : "") + std::to_string(v[i]);
      return s + "]";
    }
    std::string operator()(const std::vector<std::string> &v) const {
      std::string s = "[";
      for (size_t i = 0; i < v.size(); ++i)
        s += (i ? ", \"" : "\"") + v[i] + "\"";
      return s + "]";
    }
    std::string operator()(const std::vector<AffineMap> &v) const {
      std::string s = "[";
      for (size_t i = 0; i < v.size(); ++i)
        s += (i ? ", " : "") + formatAffineMap(v[i]);
      return s + "]";
    }
    std::string operator()(const std::vector<IteratorKind> &v) const {
      std::string s = "[";
      for (size_t i = 0; i < v.size(); ++i)
        s += (i ? ", \"" : "\"") + iteratorKindName(v[i]) + "\"";
      return s + "]";
    }
  };
  return std::visit(Visitor(), a);
}

class Printer {
public:
  std::string run(Operation *module) {
    if (module->attrs.count("transform.with_named_sequence"))
      os << "module attributes {transform.with_named_sequence} {\n";
    else
      os << "module {\n";
    indent = 1;
    for (auto &op : module->region(0)->block.ops)
      printOp(op.get());
    os << "}\n";
    return os.str();
  }

private:
  std::ostringstream os;
  int indent = 0;
  std::map<Value *, std::string> names;
  int nextResult = 0;
  int nextArg = 0;

  void pad() {
    for (int i = 0; i < indent; ++i)
      os << "  ";
  }

  const std::string &nameOf(Value *v) {
    auto it = names.find(v);
    assert(it != names.end() && "value printed before definition");
    return it->second;
  }

  void defineResults(Operation *op) {
    for (int i = 0; i < op->numResults(); ++i)
      names[op->result(i)] = "%" + std::to_string(nextResult++);
  }
  std::string defineArg(Value *v) {
    std::string n = "%arg" + std::to_string(nextArg++);
    names[v] = n;
    return n;
  }

  void printResultPrefix(Operation *op) {
    defineResults(op);
    for (int i = 0; i < op->numResults(); ++i)
      os << (i ? ", " : "") << nameOf(op->result(i));
    if (op->numResults())
      os << " = ";
  }

  void printOperandNames(Operation *op, int begin, int end,
                         const char *sep = ", ") {
    for (int i = begin; i < end; ++i)
      os << (i > begin ? sep : "") << nameOf(op->operand(i));
  }

  void printFunctionalTrailer(Operation *op, int numOperands) {
    os << " : (";
    for (int i = 0; i < numOperands; ++i)
      os << (i ? ", " : "") << typeName(op->operand(i)->type);
    os << ") -> ";
    if (op->numResults() == 1) {
      os << typeName(op->result(0)->type);
    } else {
      os << "(";
      for (int i = 0; i < op->numResults(); ++i)
        os << (i ? ", " : "") << typeName(op->result(i)->type);
      os << ")";
    }
  }

  void printRegion(Block &block, bool header) {
    os << "{\n";
    ++indent;
    if (header) {
      pad();
      os << "^bb0(";
      for (int i = 0; i < block.numArgs(); ++i) {
        Value *arg = block.arg(i);
        os << (i ? ", " : "") << defineArg(arg) << ": "
           << typeName(arg->type);
      }
      os << "):\n";
    }
    for (auto &op : block.ops)
      printOp(op.get());
    --indent;
    pad();
    os << "}";
  }

  void printAttrDict(const std::map<std::string, Attr> &attrs,
                     const std::vector<std::string> &unitKeys = {}) {
    os << "{";
    bool first = true;
    for (auto &kv : attrs) {
      if (!first)
        os << ", ";
      first = false;
      bool unit = false;
      for (const std::string &k : unitKeys)
        if (k == kv.first)
          unit = true;
      if (unit)
        os << kv.first;
      else
        os << kv.first << " = " << formatAttrValue(kv.second);
    }
    os << "}";
  }

  void printSliceBrackets(Operation *op, int firstDynOperand) {
    const auto &offsets = op->intArrayAttr("static_offsets");
    const auto &sizes = op->intArrayAttr("static_sizes");
    int dyn = firstDynOperand;
    os << "[";
    for (size_t i = 0; i < offsets.size(); ++i) {
      os << (i ? ", " : "");
      if (offsets[i] == kDynamic)
        os << nameOf(op->operand(dyn++));
      else
        os << offsets[i];
    }
    os << "] [";
    for (size_t i = 0; i < sizes.size(); ++i)
      os << (i ? ", " : "") << sizes[i];
    os << "] [";
    for (size_t i = 0; i < sizes.size(); ++i)
      os << (i ? ", " : "") << "1";
    os << "]";
  }

  void printInsOuts(Operation *op, int insCount) {
    os << " ins(";
    printOperandNames(op, 0, insCount);
    os << " : ";
    for (int i = 0; i < insCount; ++i)
      os << (i ? ", " : "") << typeName(op->operand(i)->type);
    os << ") outs(";
    printOperandNames(op, insCount, op->numOperands());
    os << " : ";
    for (int i = insCount; i < op->numOperands(); ++i)
      os << (i > insCount ? ", " : "") << typeName(op->operand(i)->type);
    os << ")";
  }

  void printOp(Operation *op) {
    pad();
    const std::string &n = op->name;

    if (n == "func.func" || n == "transform.named_sequence") {
      // Fresh numbering per isolated scope.
      int savedResult = nextResult, savedArg = nextArg;
      nextResult = 0;
      nextArg = 0;
      Block &body = op->region(0)->block;
      os << n << " @" << op->strAttr("sym_name") << "(";
      for (int i = 0; i < body.numArgs(); ++i) {
        Value *arg = body.arg(i);
        os << (i ? ", " : "") << defineArg(arg) << ": "
           << typeName(arg->type);
      }
      os << ")";
      Operation *term = body.terminator();
      if (term && term->numOperands() > 0) {
        os << " -> ";
        if (term->numOperands() == 1) {
          os << typeName(term->operand(0)->type);
        } else {
          os << "(";
          for (int i = 0; i < term->numOperands(); ++i)
            os << (i ? ", " : "") << typeName(term->operand(i)->type);
          os << ")";
        }
      }
      os << " {\n";
      ++indent;
      for (auto &nested : body.ops)
        printOp(nested.get());
      --indent;
      pad();
      os << "}\n";
      nextResult = savedResult;
      nextArg = savedArg;
      return;
    }

    if (n == "func.return" || n == "scf.yield" || n == "transform.yield" ||
        n == "linalg.yield") {
      os << n;
      if (op->numOperands()) {
        os << " ";
        printOperandNames(op, 0, op->numOperands());
        os << " : ";
        for (int i = 0; i < op->numOperands(); ++i)
          os << (i ? ", " : "") << typeName(op->operand(i)->type);
      }
      os << "\n";
      return;
    }

    if (n == "func.call") {
      printResultPrefix(op);
      os << n << " @" << op->strAttr("callee") << "(";
      printOperandNames(op, 0, op->numOperands());
      os << ")";
      printFunctionalTrailer(op, op->numOperands());
      os << "\n";
      return;
    }

    if (n == "arith.constant") {
      printResultPrefix(op);
      os << n << " ";
      const Type &t = op->result(0)->type;
      if (t.isTensor())
        os << "dense<" << formatFloat(op->floatAttr("value")) << ">";
      else if (t.elem == ElemKind::F32)
        os << formatFloat(op->floatAttr("value"));
      else
        os << op->intAttr("value");
      os << " : " << typeName(t) << "\n";
      return;
    }

    if (n == "arith.addf" || n == "arith.mulf" || n == "arith.maximumf" ||
        n == "arith.addi" || n == "arith.muli") {
      printResultPrefix(op);
      os << n << " ";
      printOperandNames(op, 0, 2);
      os << " : " << typeName(op->operand(0)->type) << "\n";
      return;
    }

    if (n == "arith.cmpf") {
      printResultPrefix(op);
      os << n << " " << op->strAttr("predicate") << ", ";
      printOperandNames(op, 0, 2);
      os << " : " << typeName(op->operand(0)->type) << "\n";
      return;
    }

    if (n == "arith.select") {
      printResultPrefix(op);
      os << n << " ";
      printOperandNames(op, 0, 3);
      os << " : " << typeName(op->operand(1)->type) << "\n";
      return;
    }

    if (n == "tensor.empty") {
      printResultPrefix(op);
      os << n << "() : " << typeName(op->result(0)->type) << "\n";
      return;
    }

    if (n == "tensor.extract_slice") {
      printResultPrefix(op);
      os << n << " " << nameOf(op->operand(0));
      printSliceBrackets(op, 1);
      os << " : " << typeName(op->operand(0)->type) << " to "
         << typeName(op->result(0)->type) << "\n";
      return;
    }

    if (n == "tensor.insert_slice" || n == "tensor.parallel_insert_slice") {
      printResultPrefix(op);
      os << n << " " << nameOf(op->operand(0)) << " into "
         << nameOf(op->operand(1));
      printSliceBrackets(op, 2);
      os << " : " << typeName(op->operand(0)->type) << " into "
         << typeName(op->operand(1)->type) << "\n";
      return;
    }

    if (n == "linalg.generic") {
      printResultPrefix(op);
      int insCount = static_cast<int>(op->intAttr("ins_count"));
      os << n << " {indexing_maps = "
         << formatAttrValue(op->attrs.at("indexing_maps"))
         << ", iterator_types = "
         << formatAttrValue(op->attrs.at("iterator_types")) << "}";
      printInsOuts(op, insCount);
      os << " ";
      printRegion(op->region(0)->block, true);
      os << " -> ";
      if (op->numResults() == 1) {
        os << typeName(op->result(0)->type);
      } else {
        os << "(";
        for (int i = 0; i < op->numResults(); ++i)
          os << (i ? ", " : "") << typeName(op->result(i)->type);
        os << ")";
      }
      os << "\n";
      return;
    }

    if (n == "linalg.matmul" || n == "linalg.elemwise_binary" ||
        n == "linalg.fill") {
      printResultPrefix(op);
      os << n;
      if (!op->attrs.empty()) {
        os << " ";
        printAttrDict(op->attrs);
      }
      printInsOuts(op, op->numOperands() - 1);
      os << " -> " << typeName(op->result(0)->type) << "\n";
      return;
    }

    if (n == "scf.forall") {
      printResultPrefix(op);
      const auto &trips = op->intArrayAttr("trip_counts");
      int rank = static_cast<int>(trips.size());
      Block &body = op->region(0)->block;
      os << n << " (";
      for (int i = 0; i < rank; ++i)
        os << (i ? ", " : "") << defineArg(body.arg(i));
      os << ") in (";
      for (size_t i = 0; i < trips.size(); ++i)
        os << (i ? ", " : "") << trips[i];
      os << ")";
      if (op->numOperands()) {
        os << " shared_outs(";
        for (int i = 0; i < op->numOperands(); ++i)
          os << (i ? ", " : "") << defineArg(body.arg(rank + i)) << " = "
             << nameOf(op->operand(i));
        os << ") -> (";
        for (int i = 0; i < op->numResults(); ++i)
          os << (i ? ", " : "") << typeName(op->result(i)->type);
        os << ")";
      }
      os << " ";
      // IVs and shared outs were named above; no ^bb0 header.
      os << "{\n";
      ++indent;
      for (auto &nested : body.ops)
        printOp(nested.get());
      --indent;
      pad();
      os << "}\n";
      return;
    }

    if (n == "scf.forall.in_parallel") {
      os << n << " ";
      printRegion(op->region(0)->block, false);
      os << "\n";
      return;
    }

    if (n == "scf.for") {
      printResultPrefix(op);
      Block &body = op->region(0)->block;
      os << n << " " << defineArg(body.arg(0)) << " = "
         << nameOf(op->operand(0)) << " to " << nameOf(op->operand(1))
         << " step " << nameOf(op->operand(2));
      int numIter = op->numOperands() - 3;
      if (numIter) {
        os << " iter_args(";
        for (int i = 0; i < numIter; ++i)
          os << (i ? ", " : "") << defineArg(body.arg(1 + i)) << " = "
             << nameOf(op->operand(3 + i));
        os << ") -> (";
        for (int i = 0; i < op->numResults(); ++i)
          os << (i ? ", " : "") << typeName(op->result(i)->type);
        os << ")";
      }
      os << " {\n";
      ++indent;
      for (auto &nested : body.ops)
        printOp(nested.get());
      --indent;
      pad();
      os << "}\n";
      return;
    }

    if (n.rfind("transform.", 0) == 0) {
      printTransformOp(op);
      return;
    }

    // Call-like fallback (extension payload ops such as my.mm4).
    printResultPrefix(op);
    os << n << "(";
    printOperandNames(op, 0, op->numOperands());
    os << ")";
    printFunctionalTrailer(op, op->numOperands());
    os << "\n";
  }

  void printTransformOp(Operation *op) {
    const std::string &n = op->name;

    if (n == "transform.debug.emit_remark_at") {
      os << n << " " << nameOf(op->operand(0)) << ", \""
         << op->strAttr("message") << "\" : "
         << typeName(op->operand(0)->type) << "\n";
      return;
    }
    if (n == "transform.cast") {
      printResultPrefix(op);
      os << n << " " << nameOf(op->operand(0)) << " : "
         << typeName(op->operand(0)->type) << " to "
         << typeName(op->result(0)->type) << "\n";
      return;
    }
    if (n == "transform.merge_handles") {
      printResultPrefix(op);
      os << n << " ";
      printOperandNames(op, 0, op->numOperands());
      os << " : " << typeName(op->result(0)->type) << "\n";
      return;
    }
    if (n == "transform.include") {
      printResultPrefix(op);
      os << n << " @" << op->strAttr("callee") << " failures("
         << op->strAttr("failure_mode") << ") (";
      printOperandNames(op, 0, op->numOperands());
      os << ")";
      printFunctionalTrailer(op, op->numOperands());
      os << "\n";
      return;
    }
    if (n == "transform.collect_matching") {
      printResultPrefix(op);
      os << n << " @" << op->strAttr("matcher") << " in "
         << nameOf(op->operand(0));
      printFunctionalTrailer(op, 1);
      os << "\n";
      return;
    }
    if (n == "transform.foreach_match") {
      printResultPrefix(op);
      os << n << " in " << nameOf(op->operand(0));
      const auto &matchers = op->strArrayAttr("matchers");
      const auto &actions = op->strArrayAttr("actions");
      for (size_t i = 0; i < matchers.size(); ++i)
        os << (i ? ", @" : " @") << matchers[i] << " -> @" << actions[i];
      printFunctionalTrailer(op, 1);
      os << "\n";
      return;
    }
    if (n == "transform.param.constant") {
      printResultPrefix(op);
      os << n << " " << op->intAttr("value") << " : i64\n";
      return;
    }
    if (n == "transform.match.param.cmpi") {
      os << n << " " << op->strAttr("predicate") << " "
         << nameOf(op->operand(0)) << ", " << nameOf(op->operand(1)) << "\n";
      return;
    }
    if (n == "transform.match.operation_name") {
      os << n << " " << nameOf(op->operand(0)) << " "
         << formatAttrValue(op->attrs.at("names")) << " : "
         << typeName(op->operand(0)->type) << "\n";
      return;
    }
    if (n == "transform.get_producer_of_operand" ||
        n == "transform.get_operand") {
      printResultPrefix(op);
      os << n << " " << nameOf(op->operand(0)) << "["
         << op->intAttr("position") << "]";
      printFunctionalTrailer(op, 1);
      os << "\n";
      return;
    }
    if (n == "transform.match.my.has_operand_satisfying" ||
        n == "transform.match.structured") {
      bool functional =
          n == "transform.match.my.has_operand_satisfying" ||
          op->numResults() > 0;
      printResultPrefix(op);
      os << n << " " << nameOf(op->operand(0));
      if (functional)
        printFunctionalTrailer(op, 1);
      else
        os << " : " << typeName(op->operand(0)->type);
      os << " ";
      printRegion(op->region(0)->block, true);
      os << "\n";
      return;
    }
    if (n == "transform.match.structured.input" ||
        n == "transform.match.structured.init") {
      os << n << " " << nameOf(op->operand(0)) << "[";
      if (op->hasAttr("all"))
        os << "all";
      else
        os << op->intAttr("position");
      os << "]";
      if (op->hasAttr("projected_permutation"))
        os << " {projected_permutation}";
      os << " : " << typeName(op->operand(0)->type) << "\n";
      return;
    }
    if (n == "transform.match.structured.body") {
      os << n << " " << nameOf(op->operand(0)) << " ";
      printAttrDict(op->attrs);
      os << " : " << typeName(op->operand(0)->type) << "\n";
      return;
    }
    if (n == "transform.structured.tile_using_forall") {
      printResultPrefix(op);
      os << n << " " << nameOf(op->operand(0)) << " tile_sizes "
         << formatAttrValue(op->attrs.at("tile_sizes"));
      printFunctionalTrailer(op, 1);
      os << "\n";
      return;
    }
    if (n == "transform.structured.tile_reduction_using_for") {
      printResultPrefix(op);
      os << n << " " << nameOf(op->operand(0)) << " by tile_sizes = "
         << formatAttrValue(op->attrs.at("tile_sizes"));
      printFunctionalTrailer(op, 1);
      os << "\n";
      return;
    }
    if (n == "transform.structured.fuse_into_containing_op") {
      printResultPrefix(op);
      os << n << " " << nameOf(op->operand(0)) << " into "
         << nameOf(op->operand(1));
      printFunctionalTrailer(op, 2);
      os << "\n";
      return;
    }
    if (n == "transform.loop.outline") {
      printResultPrefix(op);
      os << n << " " << nameOf(op->operand(0)) << " ";
      printAttrDict(op->attrs);
      printFunctionalTrailer(op, 1);
      os << "\n";
      return;
    }
    if (n == "transform.loop.unroll") {
      os << n << " " << nameOf(op->operand(0)) << " ";
      printAttrDict(op->attrs, {"full"});
      os << " : " << typeName(op->operand(0)->type) << "\n";
      return;
    }
    if (n == "transform.cleanup") {
      os << n << " " << nameOf(op->operand(0)) << " : "
         << typeName(op->operand(0)->type) << "\n";
      return;
    }

    // Remaining ops share the "operand(s) : functional type" shape
    // (split_handle, param.count, get_defining_op, generalize,
    // forall_to_for, match.structured queries).
    if (op->numResults() > 0) {
      printResultPrefix(op);
      os << n << " ";
      printOperandNames(op, 0, op->numOperands());
      printFunctionalTrailer(op, op->numOperands());
      os << "\n";
      return;
    }

    // No-result extension ops: operands, optional string, single type.
    os << n << " ";
    printOperandNames(op, 0, op->numOperands());
    for (auto &kv : op->attrs)
      if (std::holds_alternative<std::string>(kv.second))
        os << ", \"" << std::get<std::string>(kv.second) << "\"";
    os << " : " << typeName(op->operand(0)->type) << "\n";
  }
};

} // namespace

std::string printModule(Operation *module) { return Printer().run(module); }

//===----------------------------------------------------------------------===//
// Structural equality
//===----------------------------------------------------------------------===//

namespace {

bool equalImpl(Operation *a, Operation *b, std::map<Value *, Value *> &map) {
  if (a->name != b->name || a->attrs != b->attrs)
    return false;
  if (a->numOperands() != b->numOperands() ||
      a->numResults() != b->numResults() ||
      a->regions.size() != b->regions.size())
    return false;
  for (int i = 0; i < a->numOperands(); ++i) {
    auto it = map.find(a->operand(i));
    if (it == map.end() || it->second != b->operand(i))
      return false;
  }
  for (int i = 0; i < a->numResults(); ++i) {
    if (a->result(i)->type != b->result(i)->type)
      return false;
    map[a->result(i)] = b->result(i);
  }
  for (size_t r = 0; r < a->regions.size(); ++r) {
    Block &ba = a->region(static_cast<int>(r))->block;
    Block &bb = b->region(static_cast<int>(r))->block;
    if (ba.numArgs() != bb.numArgs() || ba.ops.size() != bb.ops.size())
      return false;
    for (int i = 0; i < ba.numArgs(); ++i) {
      if (ba.arg(i)->type != bb.arg(i)->type)
        return false;
      map[ba.arg(i)] = bb.arg(i);
    }
    auto ia = ba.ops.begin(), ib = bb.ops.begin();
    for (; ia != ba.ops.end(); ++ia, ++ib)
      if (!equalImpl(ia->get(), ib->get(), map))
        return false;
  }
  return true;
}

} // namespace

bool structurallyEqual(Operation *a, Operation *b) {
  std::map<Value *, Value *> map;
  return equalImpl(a, b, map);
}

} // namespace ttir
