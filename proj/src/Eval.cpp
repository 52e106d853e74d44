//===- Eval.cpp - reference evaluator --------------------------------------===//
//
// Part of the ttir project, under the Apache License v2.0 with LLVM Exceptions.
// SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception
//
//===----------------------------------------------------------------------===//

#include "ttir/Eval.hpp"
#include "ttir/Structured.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace ttir {

//===----------------------------------------------------------------------===//
// DenseTensor
//===----------------------------------------------------------------------===//

DenseTensor DenseTensor::zeros(std::vector<int64_t> shape) {
  return splat(std::move(shape), 0.0f);
}

DenseTensor DenseTensor::splat(std::vector<int64_t> shape, float v) {
  DenseTensor t;
  t.shape = std::move(shape);
  t.data.assign(static_cast<size_t>(t.numElements()), v);
  return t;
}

int64_t DenseTensor::numElements() const {
  int64_t n = 1;
  for (int64_t d : shape)
    n *= d;
  return n;
}

int64_t DenseTensor::flatten(const std::vector<int64_t> &idx) const {
  assert(idx.size() == shape.size() && "rank mismatch");
  int64_t flat = 0;
  for (size_t i = 0; i < shape.size(); ++i) {
    assert(idx[i] >= 0 && idx[i] < shape[i] && "index out of bounds");
    flat = flat * shape[i] + idx[i];
  }
  return flat;
}

std::optional<DenseTensor> readTensor(std::istream &is, std::string &error) {
  std::string header;
  if (!std::getline(is, header)) {
    error = "missing shape header";
    return std::nullopt;
  }
  std::istringstream hs(header);
  std::string tag;
  hs >> tag;
  if (tag != "shape:") {
    error = "first line must start with 'shape:'";
    return std::nullopt;
  }
  DenseTensor t;
  int64_t d;
  while (hs >> d) {
    if (d < 1) {
      error = "shape dims must be positive";
      return std::nullopt;
    }
    t.shape.push_back(d);
  }
  int64_t n = t.numElements();
  t.data.reserve(static_cast<size_t>(n));
  float v;
  while (static_cast<int64_t>(t.data.size()) < n && is >> v)
    t.data.push_back(v);
  if (static_cast<int64_t>(t.data.size()) != n) {
    error = "expected " + std::to_string(n) + " values, got " +
            std::to_string(t.data.size());
    return std::nullopt;
  }
  return t;
}

void writeTensor(std::ostream &os, const DenseTensor &t) {
  os << "shape:";
  for (int64_t d : t.shape)
    os << " " << d;
  os << "\n";
  char buf[32];
  for (size_t i = 0; i < t.data.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(t.data[i]));
    os << buf << (((i + 1) % 8 == 0) ? "\n" : " ");
  }
  if (t.data.size() % 8 != 0)
    os << "\n";
}

std::optional<double> maxRelativeError(const DenseTensor &a,
                                       const DenseTensor &b) {
  if (a.shape != b.shape)
    return std::nullopt;
  double worst = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    double denom = std::max(1.0, std::fabs(static_cast<double>(b.data[i])));
    worst = std::max(
        worst, std::fabs(static_cast<double>(a.data[i]) -
                         static_cast<double>(b.data[i])) /
                   denom);
  }
  return worst;
}

//===----------------------------------------------------------------------===//
// Interpreter
//===----------------------------------------------------------------------===//

namespace {

struct EvalValue {
  enum Kind { F32, Index, I1, Tensor } kind = F32;
  float f = 0;
  int64_t i = 0;
  bool b = false;
  DenseTensor t;

  static EvalValue scalar(float v) {
    EvalValue e;
    e.kind = F32;
    e.f = v;
    return e;
  }
  static EvalValue index(int64_t v) {
    EvalValue e;
    e.kind = Index;
    e.i = v;
    return e;
  }
  static EvalValue boolean(bool v) {
    EvalValue e;
    e.kind = I1;
    e.b = v;
    return e;
  }
  static EvalValue tensor(DenseTensor v) {
    EvalValue e;
    e.kind = Tensor;
    e.t = std::move(v);
    return e;
  }
};

using Env = std::map<Value *, EvalValue>;

class Interp {
public:
  Interp(Operation *module, bool reverseLoops)
      : module(module), reverseLoops(reverseLoops) {}

  Result callFunction(Operation *funcOp, const std::vector<EvalValue> &args,
                      std::vector<EvalValue> &out) {
    Block &body = funcOp->region(0)->block;
    if (static_cast<int>(args.size()) != body.numArgs())
      return Result::definiteAt(funcOp->loc, "argument count mismatch");
    Env env;
    for (int i = 0; i < body.numArgs(); ++i)
      env[body.arg(i)] = args[static_cast<size_t>(i)];
    for (auto &op : body.ops) {
      if (op->name == "func.return") {
        out.clear();
        for (int i = 0; i < op->numOperands(); ++i)
          out.push_back(env.at(op->operand(i)));
        return Result::success();
      }
      Result r = evalOp(op.get(), env);
      if (!r.succeeded())
        return r;
    }
    return Result::definiteAt(funcOp->loc, "function has no return");
  }

private:
  Operation *module;
  bool reverseLoops;

  //===--------------------------------------------------------------------===//
  // Iteration helpers
  //===--------------------------------------------------------------------===//

  static int64_t product(const std::vector<int64_t> &v) {
    int64_t n = 1;
    for (int64_t d : v)
      n *= d;
    return n;
  }

  static std::vector<int64_t> decode(int64_t flat,
                                     const std::vector<int64_t> &ext) {
    std::vector<int64_t> p(ext.size());
    for (size_t i = ext.size(); i-- > 0;) {
      p[i] = flat % ext[i];
      flat /= ext[i];
    }
    return p;
  }

  //===--------------------------------------------------------------------===//
  // Op evaluation
  //===--------------------------------------------------------------------===//

  Result evalOp(Operation *op, Env &env) {
    const std::string &n = op->name;

    auto set = [&](int i, EvalValue v) { env[op->result(i)] = std::move(v); };
    auto get = [&](int i) -> const EvalValue & {
      return env.at(op->operand(i));
    };

    if (n == "arith.constant") {
      const Type &t = op->result(0)->type;
      if (t.isTensor())
        set(0, EvalValue::tensor(DenseTensor::splat(
                   t.shape, static_cast<float>(op->floatAttr("value")))));
      else if (t.elem == ElemKind::F32)
        set(0, EvalValue::scalar(static_cast<float>(op->floatAttr("value"))));
      else
        set(0, EvalValue::index(op->intAttr("value")));
      return Result::success();
    }
    if (n == "arith.addf" || n == "arith.mulf" || n == "arith.maximumf") {
      float a = get(0).f, b = get(1).f;
      float r = n == "arith.addf"   ? a + b
                : n == "arith.mulf" ? a * b
                                    : std::max(a, b);
      set(0, EvalValue::scalar(r));
      return Result::success();
    }
    if (n == "arith.addi" || n == "arith.muli") {
      int64_t a = get(0).i, b = get(1).i;
      set(0, EvalValue::index(n == "arith.addi" ? a + b : a * b));
      return Result::success();
    }
    if (n == "arith.cmpf") {
      float a = get(0).f, b = get(1).f;
      const std::string &p = op->strAttr("predicate");
      bool r;
      if (p == "ogt")
        r = a > b;
      else if (p == "olt")
        r = a < b;
      else if (p == "oge")
        r = a >= b;
      else if (p == "ole")
        r = a <= b;
      else if (p == "oeq")
        r = a == b;
      else if (p == "one")
        r = a != b;
      else
        return Result::definiteAt(op->loc,
                                  "unsupported cmpf predicate '" + p + "'");
      set(0, EvalValue::boolean(r));
      return Result::success();
    }
    if (n == "arith.select") {
      set(0, get(0).b ? get(1) : get(2));
      return Result::success();
    }
    if (n == "tensor.empty") {
      set(0, EvalValue::tensor(DenseTensor::zeros(op->result(0)->type.shape)));
      return Result::success();
    }
    if (n == "tensor.extract_slice")
      return evalExtractSlice(op, env);
    if (n == "tensor.insert_slice")
      return evalInsertSlice(op, env);
    if (n == "func.call") {
      Operation *callee = lookupSymbol(module, op->strAttr("callee"));
      if (!callee)
        return Result::definiteAt(op->loc, "call to unknown function");
      std::vector<EvalValue> args, results;
      for (int i = 0; i < op->numOperands(); ++i)
        args.push_back(get(i));
      Result r = callFunction(callee, args, results);
      if (!r.succeeded())
        return r;
      if (static_cast<int>(results.size()) != op->numResults())
        return Result::definiteAt(op->loc, "call result count mismatch");
      for (int i = 0; i < op->numResults(); ++i)
        set(i, results[static_cast<size_t>(i)]);
      return Result::success();
    }
    if (n == "scf.forall")
      return evalForall(op, env);
    if (n == "scf.for")
      return evalFor(op, env);
    if (auto info = getStructuredInfo(op))
      return evalStructured(op, *info, env);
    if (n == "my.mm4") {
      // Microkernel stand-in: plain matmul accumulating into the init.
      if (op->numOperands() != 3)
        return Result::definiteAt(op->loc, "my.mm4 expects (lhs, rhs, init)");
      const DenseTensor &a = get(0).t, &b = get(1).t;
      DenseTensor c = get(2).t;
      if (a.shape.size() != 2 || b.shape.size() != 2 || c.shape.size() != 2 ||
          a.shape[1] != b.shape[0] || c.shape[0] != a.shape[0] ||
          c.shape[1] != b.shape[1])
        return Result::definiteAt(op->loc, "my.mm4 shape mismatch");
      for (int64_t i = 0; i < c.shape[0]; ++i)
        for (int64_t j = 0; j < c.shape[1]; ++j)
          for (int64_t k = 0; k < a.shape[1]; ++k)
            c.at({i, j}) += a.at({i, k}) * b.at({k, j});
      set(0, EvalValue::tensor(std::move(c)));
      return Result::success();
    }
    return Result::definiteAt(op->loc,
                              "no evaluation rule for '" + n + "'");
  }

  Result gatherOffsets(Operation *op, int firstDyn, Env &env,
                       std::vector<int64_t> &offsets) {
    const auto &statics = op->intArrayAttr("static_offsets");
    int dyn = firstDyn;
    for (int64_t o : statics) {
      if (o == kDynamic) {
        const EvalValue &v = env.at(op->operand(dyn++));
        if (v.kind != EvalValue::Index)
          return Result::definiteAt(op->loc, "dynamic offset is not an index");
        offsets.push_back(v.i);
      } else {
        offsets.push_back(o);
      }
    }
    return Result::success();
  }

  static Result checkSliceBounds(Operation *op, const DenseTensor &t,
                                 const std::vector<int64_t> &offsets,
                                 const std::vector<int64_t> &sizes) {
    if (offsets.size() != t.shape.size() || sizes.size() != t.shape.size())
      return Result::definiteAt(op->loc, "slice rank mismatch");
    for (size_t i = 0; i < offsets.size(); ++i)
      if (offsets[i] < 0 || sizes[i] < 0 ||
          offsets[i] + sizes[i] > t.shape[i])
        return Result::definiteAt(
            op->loc, "slice out of bounds in dim " + std::to_string(i) +
                         ": offset " + std::to_string(offsets[i]) +
                         " size " + std::to_string(sizes[i]) + " extent " +
                         std::to_string(t.shape[i]));
    return Result::success();
  }

  Result evalExtractSlice(Operation *op, Env &env) {
    const DenseTensor &src = env.at(op->operand(0)).t;
    std::vector<int64_t> offsets;
    Result r = gatherOffsets(op, 1, env, offsets);
    if (!r.succeeded())
      return r;
    const auto &sizes = op->intArrayAttr("static_sizes");
    r = checkSliceBounds(op, src, offsets, sizes);
    if (!r.succeeded())
      return r;
    DenseTensor dst = DenseTensor::zeros(sizes);
    int64_t total = dst.numElements();
    for (int64_t flat = 0; flat < total; ++flat) {
      std::vector<int64_t> p = decode(flat, dst.shape);
      std::vector<int64_t> sp(p.size());
      for (size_t i = 0; i < p.size(); ++i)
        sp[i] = p[i] + offsets[i];
      dst.at(p) = src.at(sp);
    }
    env[op->result(0)] = EvalValue::tensor(std::move(dst));
    return Result::success();
  }

  Result writeSlice(Operation *op, Env &env, DenseTensor &dst) {
    const DenseTensor &src = env.at(op->operand(0)).t;
    std::vector<int64_t> offsets;
    Result r = gatherOffsets(op, 2, env, offsets);
    if (!r.succeeded())
      return r;
    const auto &sizes = op->intArrayAttr("static_sizes");
    if (src.shape != std::vector<int64_t>(sizes.begin(), sizes.end()))
      return Result::definiteAt(op->loc, "slice source shape mismatch");
    r = checkSliceBounds(op, dst, offsets, sizes);
    if (!r.succeeded())
      return r;
    int64_t total = src.numElements();
    for (int64_t flat = 0; flat < total; ++flat) {
      std::vector<int64_t> p = decode(flat, src.shape);
      std::vector<int64_t> dp(p.size());
      for (size_t i = 0; i < p.size(); ++i)
        dp[i] = p[i] + offsets[i];
      dst.at(dp) = src.at(p);
    }
    return Result::success();
  }

  Result evalInsertSlice(Operation *op, Env &env) {
    DenseTensor dst = env.at(op->operand(1)).t;
    Result r = writeSlice(op, env, dst);
    if (!r.succeeded())
      return r;
    env[op->result(0)] = EvalValue::tensor(std::move(dst));
    return Result::success();
  }

  Result evalStructured(Operation *op, const StructuredInfo &info, Env &env) {
    std::vector<int64_t> extents;
    Result r = inferIterationDomain(info, extents);
    if (!r.succeeded())
      return r;

    std::vector<DenseTensor> outs;
    for (Value *o : info.outs)
      outs.push_back(env.at(o).t);

    int64_t total = product(extents);
    std::vector<int64_t> idx;
    for (int64_t flat = 0; flat < total; ++flat) {
      std::vector<int64_t> point = decode(flat, extents);

      std::vector<float> inVals;
      for (size_t i = 0; i < info.ins.size(); ++i) {
        const EvalValue &ev = env.at(info.ins[i]);
        if (ev.kind == EvalValue::F32) {
          inVals.push_back(ev.f);
          continue;
        }
        r = info.inMap(static_cast<int>(i)).apply(point, idx);
        if (!r.succeeded())
          return r;
        inVals.push_back(ev.t.at(idx));
      }
      std::vector<std::vector<int64_t>> outIdx(info.outs.size());
      for (size_t i = 0; i < info.outs.size(); ++i) {
        r = info.outMap(static_cast<int>(i)).apply(point, outIdx[i]);
        if (!r.succeeded())
          return r;
      }

      switch (info.body) {
      case BodyKind::Matmul:
        outs[0].at(outIdx[0]) += inVals[0] * inVals[1];
        break;
      case BodyKind::Add:
        outs[0].at(outIdx[0]) = inVals[0] + inVals[1];
        break;
      case BodyKind::Mul:
        outs[0].at(outIdx[0]) = inVals[0] * inVals[1];
        break;
      case BodyKind::Max:
        outs[0].at(outIdx[0]) = std::max(inVals[0], inVals[1]);
        break;
      case BodyKind::Fill:
        outs[0].at(outIdx[0]) = inVals[0];
        break;
      case BodyKind::Region: {
        Block &body = op->region(0)->block;
        Env benv;
        for (size_t i = 0; i < info.ins.size(); ++i)
          benv[body.arg(static_cast<int>(i))] = EvalValue::scalar(inVals[i]);
        for (size_t i = 0; i < info.outs.size(); ++i)
          benv[body.arg(static_cast<int>(info.ins.size() + i))] =
              EvalValue::scalar(outs[i].at(outIdx[i]));
        for (auto &nested : body.ops) {
          if (nested->name == "linalg.yield") {
            for (int i = 0; i < nested->numOperands(); ++i)
              outs[static_cast<size_t>(i)].at(outIdx[static_cast<size_t>(i)]) =
                  benv.at(nested->operand(i)).f;
            break;
          }
          r = evalOp(nested.get(), benv);
          if (!r.succeeded())
            return r;
        }
        break;
      }
      }
    }
    for (size_t i = 0; i < outs.size(); ++i)
      env[op->result(static_cast<int>(i))] =
          EvalValue::tensor(std::move(outs[i]));
    return Result::success();
  }

  Result evalForall(Operation *op, Env &env) {
    const auto &tripAttr = op->intArrayAttr("trip_counts");
    std::vector<int64_t> trips(tripAttr.begin(), tripAttr.end());
    int rank = static_cast<int>(trips.size());
    Block &body = op->region(0)->block;

    std::vector<DenseTensor> accs;
    for (int i = 0; i < op->numOperands(); ++i)
      accs.push_back(env.at(op->operand(i)).t);

    int64_t total = product(trips);
    for (int64_t step = 0; step < total; ++step) {
      int64_t flat = reverseLoops ? total - 1 - step : step;
      std::vector<int64_t> point = decode(flat, trips);
      Env ienv = env;
      for (int i = 0; i < rank; ++i)
        ienv[body.arg(i)] = EvalValue::index(point[static_cast<size_t>(i)]);
      for (int i = 0; i < op->numOperands(); ++i)
        ienv[body.arg(rank + i)] =
            EvalValue::tensor(accs[static_cast<size_t>(i)]);

      Operation *term = nullptr;
      for (auto &nested : body.ops) {
        if (nested->name == "scf.forall.in_parallel") {
          term = nested.get();
          break;
        }
        Result r = evalOp(nested.get(), ienv);
        if (!r.succeeded())
          return r;
      }
      if (!term)
        return Result::definiteAt(op->loc,
                                  "scf.forall without in_parallel terminator");
      for (auto &ins : term->region(0)->block.ops) {
        if (ins->name != "tensor.parallel_insert_slice")
          return Result::definiteAt(ins->loc,
                                    "unexpected op inside in_parallel");
        Value *dest = ins->operand(1);
        if (!dest->isBlockArg() || dest->ownerBlock != &body ||
            dest->argIndex < rank)
          return Result::definiteAt(
              ins->loc, "parallel_insert_slice must target a shared out");
        DenseTensor &acc = accs[static_cast<size_t>(dest->argIndex - rank)];
        Result r = writeSlice(ins.get(), ienv, acc);
        if (!r.succeeded())
          return r;
      }
    }
    for (int i = 0; i < op->numResults(); ++i)
      env[op->result(i)] =
          EvalValue::tensor(std::move(accs[static_cast<size_t>(i)]));
    return Result::success();
  }

  Result evalFor(Operation *op, Env &env) {
    int64_t lb = env.at(op->operand(0)).i;
    int64_t ub = env.at(op->operand(1)).i;
    int64_t step = env.at(op->operand(2)).i;
    if (step <= 0)
      return Result::definiteAt(op->loc, "scf.for requires a positive step");
    Block &body = op->region(0)->block;
    int numIter = op->numOperands() - 3;

    std::vector<EvalValue> iters;
    for (int i = 0; i < numIter; ++i)
      iters.push_back(env.at(op->operand(3 + i)));

    for (int64_t iv = lb; iv < ub; iv += step) {
      Env ienv = env;
      ienv[body.arg(0)] = EvalValue::index(iv);
      for (int i = 0; i < numIter; ++i)
        ienv[body.arg(1 + i)] = iters[static_cast<size_t>(i)];
      bool yielded = false;
      for (auto &nested : body.ops) {
        if (nested->name == "scf.yield") {
          for (int i = 0; i < nested->numOperands(); ++i)
            iters[static_cast<size_t>(i)] = ienv.at(nested->operand(i));
          yielded = true;
          break;
        }
        Result r = evalOp(nested.get(), ienv);
        if (!r.succeeded())
          return r;
      }
      if (!yielded && numIter > 0)
        return Result::definiteAt(op->loc, "scf.for body must yield");
    }
    for (int i = 0; i < op->numResults(); ++i)
      env[op->result(i)] = iters[static_cast<size_t>(i)];
    return Result::success();
  }
};

} // namespace

Result Evaluator::evalFunction(const std::string &name,
                               const std::vector<DenseTensor> &args,
                               std::vector<DenseTensor> &results) {
  Operation *funcOp = lookupSymbol(module, name);
  if (!funcOp || funcOp->name != "func.func")
    return Result::definiteAt(module->loc,
                              "no function named '" + name + "'");
  Block &body = funcOp->region(0)->block;
  if (static_cast<int>(args.size()) != body.numArgs())
    return Result::definiteAt(funcOp->loc,
                              "expected " + std::to_string(body.numArgs()) +
                                  " arguments, got " +
                                  std::to_string(args.size()));
  std::vector<EvalValue> in;
  for (size_t i = 0; i < args.size(); ++i) {
    const Type &t = body.arg(static_cast<int>(i))->type;
    if (!t.isTensor() || args[i].shape != t.shape)
      return Result::definiteAt(funcOp->loc,
                                "argument #" + std::to_string(i) +
                                    " shape does not match " + typeName(t));
    in.push_back(EvalValue::tensor(args[i]));
  }
  std::vector<EvalValue> out;
  Interp interp(module, reverseLoops);
  Result r = interp.callFunction(funcOp, in, out);
  if (!r.succeeded())
    return r;
  results.clear();
  for (EvalValue &v : out) {
    if (v.kind != EvalValue::Tensor)
      return Result::definiteAt(funcOp->loc,
                                "function results must be tensors");
    results.push_back(std::move(v.t));
  }
  return Result::success();
}

} // namespace ttir
