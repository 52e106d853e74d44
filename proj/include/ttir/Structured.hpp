//===- Structured.hpp - uniform view of structured tensor ops ------------===//
//
// Part of the ttir project, under the Apache License v2.0 with LLVM Exceptions.
// SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception
//
//===----------------------------------------------------------------------===//

#ifndef TTIR_STRUCTURED_HPP
#define TTIR_STRUCTURED_HPP

#include "ttir/IR.hpp"

#include <optional>

namespace ttir {

/// Canonical scalar body shapes of the named ops. Generic ops interpret their
/// region instead.
enum class BodyKind { Region, Matmul, Add, Mul, Max, Fill };

/// Indexing maps, iterators and in/out operand split of a structured op,
/// independent of whether it is spelled as linalg.generic or in named form.
struct StructuredInfo {
  Operation *op = nullptr;
  std::vector<Value *> ins;
  std::vector<Value *> outs;
  std::vector<AffineMap> maps; // ins first, then outs
  std::vector<IteratorKind> iterators;
  BodyKind body = BodyKind::Region;

  int rank() const { return static_cast<int>(iterators.size()); }
  const AffineMap &inMap(int i) const { return maps[static_cast<size_t>(i)]; }
  const AffineMap &outMap(int i) const {
    return maps[ins.size() + static_cast<size_t>(i)];
  }
};

bool isStructuredOpName(const std::string &name);

/// Builds the structured view. Returns nullopt for non-structured ops or
/// malformed generics.
std::optional<StructuredInfo> getStructuredInfo(Operation *op);

/// Derives the iteration-space extents of a structured op from its operand
/// shapes through the indexing maps. Definite failure when extents are
/// contradictory or underdetermined.
Result inferIterationDomain(const StructuredInfo &info,
                            std::vector<int64_t> &extents);

/// Classification of iterator dims of a two-input contraction.
struct ContractionDims {
  std::vector<int64_t> batch, lhsParallel, rhsParallel, reduction;
};

/// Set-membership classification over the in/out maps. Silenceable failure
/// when the op is not a recognizable contraction or a dim fits no class.
Result classifyContractionDims(const StructuredInfo &info,
                               ContractionDims &dims);

/// True iff the scalar body is exactly yield(add(mul(a, b), acc)) modulo
/// operand commutativity, with a/b the input block args and acc the init.
bool bodyIsMulAddContraction(const StructuredInfo &info);

} // namespace ttir

#endif // TTIR_STRUCTURED_HPP
