//===- Verifier.cpp - structural module verification ----------------------===//
//
// Part of the ttir project, under the Apache License v2.0 with LLVM Exceptions.
// SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception
//
//===----------------------------------------------------------------------===//

#include "ttir/Verifier.hpp"
#include "ttir/Structured.hpp"

#include <set>

namespace ttir {

namespace {

class Verifier {
public:
  Verifier(std::vector<Diagnostic> &diags) : diags(diags) {}

  bool run(Operation *module) {
    std::set<Value *> visible;
    verifyBlock(module->region(0)->block, visible);
    return !failed;
  }

private:
  void error(Location loc, const std::string &msg) {
    failed = true;
    diags.push_back(Diagnostic(Severity::Error, msg, loc));
  }

  bool isIsolated(const Operation *op) const {
    return op->name == "func.func" || op->name == "transform.named_sequence" ||
           op->name == "module";
  }

  void verifyBlock(Block &block, std::set<Value *> &visible) {
    for (auto &arg : block.args)
      visible.insert(arg.get());
    for (auto &op : block.ops) {
      for (int i = 0; i < op->numOperands(); ++i)
        if (!visible.count(op->operand(i)))
          error(op->loc, "operand #" + std::to_string(i) + " of '" +
                             op->name + "' does not dominate its use");
      verifyOp(op.get());
      for (auto &region : op->regions) {
        if (isIsolated(op.get())) {
          std::set<Value *> inner;
          verifyBlock(region->block, inner);
        } else {
          std::set<Value *> inner(visible);
          verifyBlock(region->block, inner);
        }
      }
      for (int i = 0; i < op->numResults(); ++i)
        visible.insert(op->result(i));
    }
  }

  void expectOperands(Operation *op, int n) {
    if (op->numOperands() != n)
      error(op->loc, "'" + op->name + "' expects " + std::to_string(n) +
                         " operands, got " + std::to_string(op->numOperands()));
  }

  void verifyOp(Operation *op) {
    const std::string &n = op->name;
    if (n == "arith.addf" || n == "arith.mulf" || n == "arith.maximumf" ||
        n == "arith.addi" || n == "arith.muli") {
      expectOperands(op, 2);
      if (op->numOperands() == 2 &&
          (op->operand(0)->type != op->operand(1)->type ||
           op->result(0)->type != op->operand(0)->type))
        error(op->loc, "'" + n + "' operand/result types must match");
      return;
    }
    if (n == "arith.select") {
      expectOperands(op, 3);
      if (op->numOperands() == 3 &&
          op->operand(0)->type != Type::scalar(ElemKind::I1))
        error(op->loc, "'arith.select' condition must be i1");
      return;
    }
    if (n == "func.func" || n == "transform.named_sequence") {
      if (!op->hasAttr("sym_name"))
        error(op->loc, "'" + n + "' requires a symbol name");
      return;
    }
    if (n == "func.call") {
      Operation *module = op;
      while (module->parentOp())
        module = module->parentOp();
      Operation *callee =
          op->hasAttr("callee") ? lookupSymbol(module, op->strAttr("callee"))
                                : nullptr;
      if (!callee) {
        error(op->loc, "'func.call' references unknown function");
        return;
      }
      Block &body = callee->region(0)->block;
      if (body.numArgs() != op->numOperands()) {
        error(op->loc, "'func.call' argument count does not match callee");
        return;
      }
      for (int i = 0; i < op->numOperands(); ++i)
        if (op->operand(i)->type != body.arg(i)->type)
          error(op->loc, "'func.call' argument #" + std::to_string(i) +
                             " type does not match callee");
      return;
    }
    if (n == "linalg.generic") {
      verifyGeneric(op);
      return;
    }
    if (n == "tensor.extract_slice" || n == "tensor.insert_slice" ||
        n == "tensor.parallel_insert_slice")
      verifySlice(op);
  }

  void verifyGeneric(Operation *op) {
    auto info = getStructuredInfo(op);
    if (!info) {
      error(op->loc, "'linalg.generic' is missing indexing_maps, "
                     "iterator_types or ins_count");
      return;
    }
    size_t numIO = info->ins.size() + info->outs.size();
    if (info->maps.size() != numIO) {
      error(op->loc, "'linalg.generic' expects one indexing map per operand");
      return;
    }
    for (const AffineMap &m : info->maps)
      if (m.numDims != info->rank())
        error(op->loc, "indexing map dimension count does not match "
                       "iterator_types");
    if (op->regions.size() != 1) {
      error(op->loc, "'linalg.generic' requires a body region");
      return;
    }
    Block &body = op->region(0)->block;
    if (body.numArgs() != static_cast<int>(numIO)) {
      error(op->loc, "'linalg.generic' body expects one argument per operand");
      return;
    }
    for (int i = 0; i < body.numArgs(); ++i)
      if (!body.arg(i)->type.isScalar())
        error(op->loc, "'linalg.generic' body arguments must be scalars");
    Operation *term = body.terminator();
    if (!term || term->name != "linalg.yield") {
      error(op->loc, "'linalg.generic' body must end in linalg.yield");
      return;
    }
    if (term->numOperands() != static_cast<int>(info->outs.size()))
      error(term->loc, "'linalg.yield' arity must match the number of outs");
    if (op->numResults() != static_cast<int>(info->outs.size()))
      error(op->loc, "'linalg.generic' must have one result per out");
    for (size_t i = 0; i < info->outs.size(); ++i)
      if (op->numResults() == static_cast<int>(info->outs.size()) &&
          op->result(static_cast<int>(i))->type != info->outs[i]->type)
        error(op->loc, "'linalg.generic' result type must match its out");
  }

  void verifySlice(Operation *op) {
    if (!op->hasAttr("static_offsets") || !op->hasAttr("static_sizes")) {
      error(op->loc, "'" + op->name + "' requires offsets and sizes");
      return;
    }
    const auto &offsets = op->intArrayAttr("static_offsets");
    const auto &sizes = op->intArrayAttr("static_sizes");
    if (offsets.size() != sizes.size())
      error(op->loc, "'" + op->name + "' offset/size rank mismatch");
    int dynCount = 0;
    for (int64_t o : offsets)
      if (o == kDynamic)
        ++dynCount;
    int tensorOperands = op->name == "tensor.extract_slice" ? 1 : 2;
    if (op->numOperands() != tensorOperands + dynCount)
      error(op->loc, "'" + op->name + "' dynamic offset operand count "
                     "mismatch");
  }

  std::vector<Diagnostic> &diags;
  bool failed = false;
};

} // namespace

bool verifyModule(Operation *module, std::vector<Diagnostic> &diags) {
  return Verifier(diags).run(module);
}

} // namespace ttir
