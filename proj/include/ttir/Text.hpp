//===- Text.hpp - parser and printer for the combined text format --------===//
//
// Part of the ttir project, under the Apache License v2.0 with LLVM Exceptions.
// SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception
//
//===----------------------------------------------------------------------===//

#ifndef TTIR_TEXT_HPP
#define TTIR_TEXT_HPP

#include "ttir/IR.hpp"

#include <memory>
#include <string>

namespace ttir {

/// Syntax hook for registered transform extension ops: comma-separated
/// operands, an optional trailing string attribute, then a type trailer.
struct ExtensionSyntax {
  std::string name;
  std::string trailingStringKey; // empty when the op takes no string
};

std::map<std::string, ExtensionSyntax> defaultExtensionSyntax();

struct ParseResult {
  std::unique_ptr<Operation> module;
  std::vector<Diagnostic> diags;
  bool ok = false;
};

/// Parses a combined payload + transform-script module and verifies it.
/// The raw text is recorded in `sm` for diagnostic rendering.
ParseResult parseSource(const std::string &filename, const std::string &text,
                        SourceMap &sm,
                        const std::map<std::string, ExtensionSyntax> &ext =
                            defaultExtensionSyntax());

/// Deterministic textual form; parse(print(m)) is structurally equal to m.
std::string printModule(Operation *module);

/// Structural equality used by round-trip tests (names, attrs, types,
/// operand wiring; locations ignored).
bool structurallyEqual(Operation *a, Operation *b);

} // namespace ttir

#endif // TTIR_TEXT_HPP
