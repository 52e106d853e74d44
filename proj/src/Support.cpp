//===- Support.cpp - diagnostic rendering --------------------------------===//
//
// Part of the ttir project, under the Apache License v2.0 with LLVM Exceptions.
// SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception
//
//===----------------------------------------------------------------------===//

#include "ttir/Support.hpp"

#include <sstream>

namespace ttir {

void SourceMap::add(const std::string &file, const std::string &text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty())
    lines.push_back(cur);
  files[file] = std::move(lines);
}

const std::string *SourceMap::line(const Location &loc) const {
  auto it = files.find(loc.file);
  if (it == files.end())
    return nullptr;
  if (loc.line < 1 || loc.line > static_cast<int>(it->second.size()))
    return nullptr;
  return &it->second[static_cast<size_t>(loc.line - 1)];
}

static const char *severityName(Severity s) {
  switch (s) {
  case Severity::Error:
    return "error";
  case Severity::Remark:
    return "remark";
  case Severity::Note:
    return "note";
  }
  return "error";
}

static void renderOne(const Diagnostic &d, const SourceMap &sm,
                      std::ostringstream &os) {
  if (d.loc.valid())
    os << d.loc.str() << ": ";
  os << severityName(d.severity) << ": " << d.message << "\n";
  if (const std::string *src = sm.line(d.loc)) {
    os << *src << "\n";
    for (int i = 1; i < d.loc.col; ++i)
      os << ' ';
    os << "^\n";
  }
  for (const Diagnostic &note : d.notes)
    renderOne(note, sm, os);
}

std::string renderDiagnostic(const Diagnostic &d, const SourceMap &sm) {
  std::ostringstream os;
  renderOne(d, sm, os);
  return os.str();
}

} // namespace ttir
