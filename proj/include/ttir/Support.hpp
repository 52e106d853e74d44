//===- Support.hpp - locations, diagnostics, tri-state results -----------===//
//
// Part of the ttir project, under the Apache License v2.0 with LLVM Exceptions.
// SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception
//
//===----------------------------------------------------------------------===//

#ifndef TTIR_SUPPORT_HPP
#define TTIR_SUPPORT_HPP

#include <cassert>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace ttir {

struct Location {
  std::string file;
  int line = 0;
  int col = 0;

  bool valid() const { return line > 0; }
  std::string str() const {
    return file + ":" + std::to_string(line) + ":" + std::to_string(col);
  }
};

enum class Severity { Error, Remark, Note };

struct Diagnostic {
  Severity severity = Severity::Error;
  std::string message;
  Location loc;
  std::vector<Diagnostic> notes;

  Diagnostic() = default;
  Diagnostic(Severity sev, std::string msg, Location l)
      : severity(sev), message(std::move(msg)), loc(std::move(l)) {}

  Diagnostic &attachNote(Location l, std::string msg) {
    notes.push_back(Diagnostic(Severity::Note, std::move(msg), std::move(l)));
    return notes.back();
  }
};

/// Keeps the raw source lines of every parsed file so diagnostics can render
/// the offending line with a caret.
struct SourceMap {
  std::map<std::string, std::vector<std::string>> files;

  void add(const std::string &file, const std::string &text);
  const std::string *line(const Location &loc) const;
};

std::string renderDiagnostic(const Diagnostic &d, const SourceMap &sm);

/// Success / silenceable failure / definite failure.
class Result {
public:
  enum Kind { Success, Silenceable, Definite };

  static Result success() { return Result(Kind::Success, Diagnostic()); }
  static Result silenceable(Diagnostic d) {
    return Result(Kind::Silenceable, std::move(d));
  }
  static Result definite(Diagnostic d) {
    return Result(Kind::Definite, std::move(d));
  }
  static Result silenceableAt(Location loc, std::string msg) {
    return silenceable(Diagnostic(Severity::Error, std::move(msg), loc));
  }
  static Result definiteAt(Location loc, std::string msg) {
    return definite(Diagnostic(Severity::Error, std::move(msg), loc));
  }

  bool succeeded() const { return kind_ == Kind::Success; }
  bool isSilenceable() const { return kind_ == Kind::Silenceable; }
  bool isDefinite() const { return kind_ == Kind::Definite; }
  Kind kind() const { return kind_; }

  const Diagnostic &diag() const {
    assert(!succeeded() && "no diagnostic on success");
    return diag_;
  }
  Diagnostic &diag() {
    assert(!succeeded() && "no diagnostic on success");
    return diag_;
  }

private:
  Result(Kind k, Diagnostic d) : kind_(k), diag_(std::move(d)) {}
  Kind kind_;
  Diagnostic diag_;
};

} // namespace ttir

#endif // TTIR_SUPPORT_HPP
