//===- ttir-opt.cpp - transform-script driver, evaluator and formatter ----===//
//
// Part of the ttir project, under the Apache License v2.0 with LLVM Exceptions.
// SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception
//
//===----------------------------------------------------------------------===//

#include "ttir/Eval.hpp"
#include "ttir/Text.hpp"
#include "ttir/Transform.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace ttir;

static bool readFile(const std::string &path, std::string &out) {
  std::ifstream is(path);
  if (!is)
    return false;
  std::ostringstream ss;
  ss << is.rdbuf();
  out = ss.str();
  return true;
}

static void printDiags(const std::vector<Diagnostic> &diags,
                       const SourceMap &sm) {
  for (const Diagnostic &d : diags)
    std::cerr << renderDiagnostic(d, sm);
}

static std::vector<std::vector<std::string>>
parseTrailingBindings(const std::string &spec) {
  std::vector<std::vector<std::string>> out;
  if (spec.empty())
    return out;
  std::stringstream args(spec);
  std::string arg;
  while (std::getline(args, arg, ';')) {
    std::vector<std::string> names;
    std::stringstream parts(arg);
    std::string name;
    while (std::getline(parts, name, ','))
      if (!name.empty())
        names.push_back(name);
    out.push_back(std::move(names));
  }
  return out;
}

static int cmdRun(const std::string &input, const std::string &entry,
                  const std::string &trailing, bool expensiveChecks,
                  bool debugMatcher, bool dumpAfter) {
  std::string text;
  if (!readFile(input, text)) {
    std::cerr << "error: cannot read '" << input << "'\n";
    return 1;
  }
  SourceMap sm;
  ParseResult parsed = parseSource(input, text, sm);
  printDiags(parsed.diags, sm);
  if (!parsed.ok)
    return 1;

  Registry registry = buildFullRegistry();
  InterpreterOptions opts;
  opts.expensiveChecks = expensiveChecks;
  Interpreter interp(parsed.module.get(), registry, opts);

  std::vector<PayloadList> bindings;
  for (const std::vector<std::string> &names :
       parseTrailingBindings(trailing)) {
    PayloadList list;
    for (Operation *op :
         walkPreorder(parsed.module.get(), [&](Operation *o) {
           for (const std::string &n : names)
             if (o->name == n)
               return true;
           return false;
         }))
      list.push_back(PayloadRef::makeOp(op));
    bindings.push_back(std::move(list));
  }

  Result result = interp.run(entry, bindings);
  printDiags(interp.diagnostics(), sm);
  if (!result.succeeded())
    std::cerr << renderDiagnostic(result.diag(), sm);
  if (debugMatcher)
    std::cerr << interp.debugLog();
  if (result.succeeded() || dumpAfter)
    std::cout << printModule(parsed.module.get());
  return result.succeeded() ? 0 : 1;
}

static int cmdEval(const std::string &input, const std::string &func,
                   const std::vector<std::string> &tensorPaths) {
  std::string text;
  if (!readFile(input, text)) {
    std::cerr << "error: cannot read '" << input << "'\n";
    return 1;
  }
  SourceMap sm;
  ParseResult parsed = parseSource(input, text, sm);
  printDiags(parsed.diags, sm);
  if (!parsed.ok)
    return 1;

  std::vector<DenseTensor> args;
  for (const std::string &path : tensorPaths) {
    std::ifstream is(path);
    if (!is) {
      std::cerr << "error: cannot read '" << path << "'\n";
      return 1;
    }
    std::string error;
    std::optional<DenseTensor> t = readTensor(is, error);
    if (!t) {
      std::cerr << "error: " << path << ": " << error << "\n";
      return 1;
    }
    args.push_back(std::move(*t));
  }

  Evaluator evaluator(parsed.module.get());
  std::vector<DenseTensor> results;
  Result r = evaluator.evalFunction(func, args, results);
  if (!r.succeeded()) {
    std::cerr << renderDiagnostic(r.diag(), sm);
    return 1;
  }
  for (const DenseTensor &t : results)
    writeTensor(std::cout, t);
  return 0;
}

static int cmdFmt(const std::string &input) {
  std::string text;
  if (!readFile(input, text)) {
    std::cerr << "error: cannot read '" << input << "'\n";
    return 1;
  }
  SourceMap sm;
  ParseResult parsed = parseSource(input, text, sm);
  printDiags(parsed.diags, sm);
  if (!parsed.ok)
    return 1;
  std::cout << printModule(parsed.module.get());
  return 0;
}

int main(int argc, char **argv) {
  CLI::App app{"structured-tensor IR transform driver"};
  app.require_subcommand(1);

  std::string input, entry = "__transform_main", trailing;
  bool expensiveChecks = true, debugMatcher = false, dumpAfter = false;
  CLI::App *run = app.add_subcommand("run", "apply a transform script");
  run->add_option("input", input)->required();
  run->add_option("--entry-point", entry);
  run->add_option("--debug-bind-trailing-args", trailing);
  run->add_option("--expensive-checks", expensiveChecks);
  run->add_flag("--debug-matcher", debugMatcher);
  run->add_flag("--dump-after", dumpAfter);

  std::string evalInput, evalFunc;
  std::vector<std::string> tensorPaths;
  CLI::App *eval = app.add_subcommand("eval", "evaluate a payload function");
  eval->add_option("input", evalInput)->required();
  eval->add_option("function", evalFunc)->required();
  eval->add_option("tensors", tensorPaths);

  std::string fmtInput;
  CLI::App *fmt = app.add_subcommand("fmt", "parse and reprint a module");
  fmt->add_option("input", fmtInput)->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed())
    return cmdRun(input, entry, trailing, expensiveChecks, debugMatcher,
                  dumpAfter);
  if (eval->parsed())
    return cmdEval(evalInput, evalFunc, tensorPaths);
  return cmdFmt(fmtInput);
}
