//===- Eval.hpp - reference evaluator for the payload IR -----------------===//
//
// Part of the ttir project, under the Apache License v2.0 with LLVM Exceptions.
// SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception
//
//===----------------------------------------------------------------------===//

#ifndef TTIR_EVAL_HPP
#define TTIR_EVAL_HPP

#include "ttir/IR.hpp"

#include <iosfwd>
#include <optional>

namespace ttir {

/// Row-major f32 tensor.
struct DenseTensor {
  std::vector<int64_t> shape;
  std::vector<float> data;

  static DenseTensor zeros(std::vector<int64_t> shape);
  static DenseTensor splat(std::vector<int64_t> shape, float v);

  int64_t numElements() const;
  int64_t flatten(const std::vector<int64_t> &idx) const;
  float at(const std::vector<int64_t> &idx) const {
    return data[static_cast<size_t>(flatten(idx))];
  }
  float &at(const std::vector<int64_t> &idx) {
    return data[static_cast<size_t>(flatten(idx))];
  }
};

/// Evaluates payload functions over dense tensors. Loops and structured ops
/// run in a fixed lexicographic iteration order; `reverseLoops` flips the
/// order of parallel loop nests to probe order independence.
class Evaluator {
public:
  explicit Evaluator(Operation *module, bool reverseLoops = false)
      : module(module), reverseLoops(reverseLoops) {}

  /// Runs `func.func @name` on `args`. Tensor results are written to
  /// `results` in return order.
  Result evalFunction(const std::string &name,
                      const std::vector<DenseTensor> &args,
                      std::vector<DenseTensor> &results);

private:
  Operation *module;
  bool reverseLoops;
};

/// `shape: d0 d1 ...` on the first line, then row-major f32 literals.
std::optional<DenseTensor> readTensor(std::istream &is, std::string &error);
void writeTensor(std::ostream &os, const DenseTensor &t);

/// Largest elementwise |a-b| / max(1, |b|). Returns nullopt on shape
/// mismatch.
std::optional<double> maxRelativeError(const DenseTensor &a,
                                       const DenseTensor &b);

} // namespace ttir

#endif // TTIR_EVAL_HPP
