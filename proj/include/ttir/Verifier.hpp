//===- Verifier.hpp - structural module verification ---------------------===//
//
// Part of the ttir project, under the Apache License v2.0 with LLVM Exceptions.
// SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception
//
//===----------------------------------------------------------------------===//

#ifndef TTIR_VERIFIER_HPP
#define TTIR_VERIFIER_HPP

#include "ttir/IR.hpp"

namespace ttir {

/// Verifies SSA dominance, operand/result typing of known ops, and the
/// map/iterator/body arity rules of linalg.generic. Errors are appended to
/// `diags`; returns true when the module is clean.
bool verifyModule(Operation *module, std::vector<Diagnostic> &diags);

} // namespace ttir

#endif // TTIR_VERIFIER_HPP
