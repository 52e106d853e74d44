//===- Parser.cpp - textual format parser ---------------------------------===//
//
// Part of the ttir project, under the Apache License v2.0 with LLVM Exceptions.
// SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception
//
//===----------------------------------------------------------------------===//

#include "ttir/Text.hpp"
#include "ttir/Verifier.hpp"

#include <cstdlib>
#include <cstring>

namespace ttir {

std::map<std::string, ExtensionSyntax> defaultExtensionSyntax() {
  std::map<std::string, ExtensionSyntax> ext;
  ext["transform.my.change_call_target"] = {"transform.my.change_call_target",
                                            "new_target"};
  ext["transform.my.call_to_op"] = {"transform.my.call_to_op", ""};
  return ext;
}

namespace {

struct ParseError {};

struct Token {
  enum Kind { Eof, Ident, Percent, At, Caret, Bang, Int, Float, Str, Punct };
  Kind kind = Eof;
  std::string text; // lexeme; sigil stripped for Percent/At/Caret/Bang
  int64_t ival = 0;
  double fval = 0;
  Location loc;
};

class Lexer {
public:
  Lexer(const std::string &file, const std::string &text,
        std::vector<Diagnostic> &diags)
      : file(file), text(text), diags(diags) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skipSpace();
      Token t = lexOne();
      out.push_back(t);
      if (t.kind == Token::Eof)
        break;
    }
    return out;
  }

private:
  static bool isIdentStart(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
  }
  static bool isIdentChar(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
           c == '.' || c == '$';
  }

  char cur() const { return pos < text.size() ? text[pos] : '\0'; }
  char ahead(size_t n) const {
    return pos + n < text.size() ? text[pos + n] : '\0';
  }
  void advance() {
    if (text[pos] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    ++pos;
  }
  Location here() const { return Location{file, line, col}; }

  void skipSpace() {
    while (pos < text.size()) {
      char c = cur();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else if (c == '/' && ahead(1) == '/') {
        while (pos < text.size() && cur() != '\n')
          advance();
      } else {
        break;
      }
    }
  }

  [[noreturn]] void fail(Location loc, const std::string &msg) {
    diags.push_back(Diagnostic(Severity::Error, msg, loc));
    throw ParseError();
  }

  std::string lexIdentBody() {
    std::string s;
    while (pos < text.size() && isIdentChar(cur())) {
      s.push_back(cur());
      advance();
    }
    return s;
  }

  Token lexNumber(Location loc) {
    std::string s;
    if (cur() == '-') {
      s.push_back('-');
      advance();
    }
    while (std::isdigit(static_cast<unsigned char>(cur()))) {
      s.push_back(cur());
      advance();
    }
    bool isFloat = false;
    if (cur() == '.' && std::isdigit(static_cast<unsigned char>(ahead(1)))) {
      isFloat = true;
      s.push_back('.');
      advance();
      while (std::isdigit(static_cast<unsigned char>(cur()))) {
        s.push_back(cur());
        advance();
      }
    }
    if (cur() == 'e' || cur() == 'E') {
      char sign = ahead(1);
      if (std::isdigit(static_cast<unsigned char>(sign)) ||
          ((sign == '+' || sign == '-') &&
           std::isdigit(static_cast<unsigned char>(ahead(2))))) {
        isFloat = true;
        s.push_back(cur());
        advance();
        if (cur() == '+' || cur() == '-') {
          s.push_back(cur());
          advance();
        }
        while (std::isdigit(static_cast<unsigned char>(cur()))) {
          s.push_back(cur());
          advance();
        }
      }
    }
    Token t;
    t.loc = loc;
    t.text = s;
    if (isFloat) {
      t.kind = Token::Float;
      t.fval = std::strtod(s.c_str(), nullptr);
    } else {
      t.kind = Token::Int;
      t.ival = std::strtoll(s.c_str(), nullptr, 10);
    }
    return t;
  }

  Token lexOne() {
    Location loc = here();
    Token t;
    t.loc = loc;
    if (pos >= text.size()) {
      t.kind = Token::Eof;
      return t;
    }
    char c = cur();
    if (isIdentStart(c)) {
      t.kind = Token::Ident;
      t.text = lexIdentBody();
      return t;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '-' && std::isdigit(static_cast<unsigned char>(ahead(1)))))
      return lexNumber(loc);
    if (c == '%' || c == '@' || c == '^' || c == '!') {
      advance();
      t.kind = c == '%'   ? Token::Percent
               : c == '@' ? Token::At
               : c == '^' ? Token::Caret
                          : Token::Bang;
      // Value names may start with a digit (%0).
      while (pos < text.size() && isIdentChar(cur())) {
        t.text.push_back(cur());
        advance();
      }
      if (t.text.empty())
        fail(loc, "expected identifier after sigil");
      return t;
    }
    if (c == '"') {
      advance();
      t.kind = Token::Str;
      while (pos < text.size() && cur() != '"') {
        char ch = cur();
        if (ch == '\\') {
          advance();
          char esc = cur();
          if (esc == 'n')
            ch = '\n';
          else if (esc == 't')
            ch = '\t';
          else
            ch = esc;
        }
        t.text.push_back(ch);
        advance();
      }
      if (cur() != '"')
        fail(loc, "unterminated string literal");
      advance();
      return t;
    }
    if (c == '-' && ahead(1) == '>') {
      advance();
      advance();
      t.kind = Token::Punct;
      t.text = "->";
      return t;
    }
    static const char singles[] = "()[]{}<>,:=+";
    if (std::strchr(singles, c)) {
      advance();
      t.kind = Token::Punct;
      t.text = std::string(1, c);
      return t;
    }
    fail(loc, std::string("unexpected character '") + c + "'");
  }

  std::string file;
  const std::string &text;
  std::vector<Diagnostic> &diags;
  size_t pos = 0;
  int line = 1;
  int col = 1;
};

class Parser {
public:
  Parser(std::vector<Token> tokens, std::vector<Diagnostic> &diags,
         const std::map<std::string, ExtensionSyntax> &ext)
      : tokens(std::move(tokens)), diags(diags), ext(ext) {}

  std::unique_ptr<Operation> parseModule() {
    std::unique_ptr<Operation> module;
    pushScope();
    if (peek().kind == Token::Ident && peek().text == "module") {
      Token t = next();
      module = makeModule(t.loc);
      if (peek().kind == Token::Ident && peek().text == "attributes") {
        next();
        module->attrs = parseAttrDict();
      }
      expectPunct("{");
      while (!isPunct("}"))
        parseOp(&module->region(0)->block);
      expectPunct("}");
    } else {
      module = makeModule(peek().loc);
      while (peek().kind != Token::Eof)
        parseOp(&module->region(0)->block);
    }
    if (peek().kind != Token::Eof)
      err(peek().loc, "expected end of input");
    popScope();
    return module;
  }

private:
  //===--------------------------------------------------------------------===//
  // Token plumbing
  //===--------------------------------------------------------------------===//

  const Token &peek(size_t n = 0) const {
    size_t i = pos + n;
    return i < tokens.size() ? tokens[i] : tokens.back();
  }
  Token next() { return tokens[std::min(pos++, tokens.size() - 1)]; }

  [[noreturn]] void err(Location loc, const std::string &msg) {
    diags.push_back(Diagnostic(Severity::Error, msg, loc));
    throw ParseError();
  }

  bool isPunct(const char *p, size_t n = 0) const {
    return peek(n).kind == Token::Punct && peek(n).text == p;
  }
  Token expectPunct(const char *p) {
    if (!isPunct(p))
      err(peek().loc, std::string("expected '") + p + "'");
    return next();
  }
  Token expectIdent() {
    if (peek().kind != Token::Ident)
      err(peek().loc, "expected identifier");
    return next();
  }
  Token expectKeyword(const char *kw) {
    if (peek().kind != Token::Ident || peek().text != kw)
      err(peek().loc, std::string("expected '") + kw + "'");
    return next();
  }
  Token expectKind(Token::Kind k, const char *what) {
    if (peek().kind != k)
      err(peek().loc, std::string("expected ") + what);
    return next();
  }
  bool consumeKeyword(const char *kw) {
    if (peek().kind == Token::Ident && peek().text == kw) {
      next();
      return true;
    }
    return false;
  }

  //===--------------------------------------------------------------------===//
  // Scopes
  //===--------------------------------------------------------------------===//

  void pushScope() { scopes.emplace_back(); }
  void popScope() { scopes.pop_back(); }

  void define(const std::string &name, Value *v, Location loc) {
    if (scopes.back().count(name))
      err(loc, "redefinition of value '%" + name + "'");
    scopes.back()[name] = v;
  }

  Value *lookup(const std::string &name, Location loc) {
    for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
      auto f = it->find(name);
      if (f != it->end())
        return f->second;
    }
    err(loc, "use of undefined value '%" + name + "'");
  }

  Value *parseValueUse() {
    Token t = expectKind(Token::Percent, "SSA value");
    return lookup(t.text, t.loc);
  }

  std::vector<Value *> parseValueUseList() {
    std::vector<Value *> vals;
    vals.push_back(parseValueUse());
    while (isPunct(",")) {
      next();
      vals.push_back(parseValueUse());
    }
    return vals;
  }

  //===--------------------------------------------------------------------===//
  // Types
  //===--------------------------------------------------------------------===//

  Type parseTensorBody(Location loc) {
    // Shape tokens arrive as a mix of ints and idents ("4", "x16xf32").
    expectPunct("<");
    std::string s;
    while (!isPunct(">")) {
      const Token &t = peek();
      if (t.kind == Token::Int || t.kind == Token::Ident)
        s += next().text;
      else
        err(t.loc, "malformed tensor type");
    }
    expectPunct(">");
    std::vector<int64_t> shape;
    size_t i = 0;
    while (i < s.size()) {
      size_t x = s.find('x', i);
      std::string piece = s.substr(i, x == std::string::npos ? x : x - i);
      if (piece == "f32") {
        if (x != std::string::npos)
          err(loc, "malformed tensor type");
        return Type::tensor(std::move(shape));
      }
      char *end = nullptr;
      long long dim = std::strtoll(piece.c_str(), &end, 10);
      if (piece.empty() || *end != '\0')
        err(loc, "malformed tensor type");
      shape.push_back(dim);
      if (x == std::string::npos)
        break;
      i = x + 1;
    }
    err(loc, "tensor type must have f32 element type");
  }

  Type parseTransformType(const Token &bang) {
    const std::string &n = bang.text;
    if (n == "transform.any_op")
      return Type::anyOp();
    if (n == "transform.any_value")
      return Type::anyValue();
    if (n == "transform.param") {
      expectPunct("<");
      expectKeyword("i64");
      expectPunct(">");
      return Type::param();
    }
    if (n == "transform.op") {
      expectPunct("<");
      Token s = expectKind(Token::Str, "operation name string");
      expectPunct(">");
      return Type::concreteOp(s.text);
    }
    if (n.rfind("transform.", 0) == 0)
      return Type::transformType(
          {TransformTypeInfo::Custom, n.substr(std::strlen("transform."))});
    err(bang.loc, "unknown transform type '!" + n + "'");
  }

  Type parseType() {
    if (peek().kind == Token::Bang)
      return parseTransformType(next());
    Token t = expectIdent();
    if (t.text == "tensor")
      return parseTensorBody(t.loc);
    if (t.text == "f32")
      return Type::scalar(ElemKind::F32);
    if (t.text == "index")
      return Type::scalar(ElemKind::Index);
    if (t.text == "i1")
      return Type::scalar(ElemKind::I1);
    if (t.text == "i64")
      return Type::scalar(ElemKind::Index); // only inside param trailers
    err(t.loc, "unknown type '" + t.text + "'");
  }

  std::vector<Type> parseTypeOrList() {
    std::vector<Type> types;
    if (isPunct("(")) {
      next();
      if (!isPunct(")")) {
        types.push_back(parseType());
        while (isPunct(",")) {
          next();
          types.push_back(parseType());
        }
      }
      expectPunct(")");
    } else {
      types.push_back(parseType());
    }
    return types;
  }

  void checkOperandTypes(Location loc, const std::vector<Value *> &operands,
                         const std::vector<Type> &types) {
    if (operands.size() != types.size())
      err(loc, "operand count does not match the declared types");
    for (size_t i = 0; i < operands.size(); ++i)
      if (operands[i]->type != types[i])
        err(loc, "operand #" + std::to_string(i) + " has type " +
                     typeName(operands[i]->type) + " but " +
                     typeName(types[i]) + " was declared");
  }

  /// ':' '(' types ')' '->' type-or-list. Checks operands, returns results.
  std::vector<Type> functionalTrailer(Location loc,
                                      const std::vector<Value *> &operands) {
    expectPunct(":");
    expectPunct("(");
    std::vector<Type> inTypes;
    if (!isPunct(")")) {
      inTypes.push_back(parseType());
      while (isPunct(",")) {
        next();
        inTypes.push_back(parseType());
      }
    }
    expectPunct(")");
    expectPunct("->");
    checkOperandTypes(loc, operands, inTypes);
    return parseTypeOrList();
  }

  /// ':' single type applying to all operands; no results.
  void singleTypeTrailer(Location loc, const std::vector<Value *> &operands) {
    expectPunct(":");
    Type t = parseType();
    for (size_t i = 0; i < operands.size(); ++i)
      if (operands[i]->type != t)
        err(loc, "operand #" + std::to_string(i) + " has type " +
                     typeName(operands[i]->type) + " but " + typeName(t) +
                     " was declared");
  }

  //===--------------------------------------------------------------------===//
  // Attributes
  //===--------------------------------------------------------------------===//

  AffineExpr parseAffineExpr(int numDims) {
    AffineExpr e;
    while (true) {
      const Token &t = peek();
      if (t.kind == Token::Ident && t.text.size() > 1 && t.text[0] == 'd') {
        int d = std::atoi(t.text.c_str() + 1);
        if (d < 0 || d >= numDims)
          err(t.loc, "affine dim out of range");
        e.dims.push_back(d);
        next();
      } else if (t.kind == Token::Int) {
        e.constant += next().ival;
      } else {
        err(t.loc, "expected affine dim or constant");
      }
      if (isPunct("+"))
        next();
      else
        break;
    }
    return e;
  }

  AffineMap parseAffineMap() {
    expectKeyword("affine_map");
    expectPunct("<");
    expectPunct("(");
    int numDims = 0;
    if (!isPunct(")")) {
      expectIdent();
      ++numDims;
      while (isPunct(",")) {
        next();
        expectIdent();
        ++numDims;
      }
    }
    expectPunct(")");
    expectPunct("->");
    expectPunct("(");
    AffineMap m;
    m.numDims = numDims;
    if (!isPunct(")")) {
      m.results.push_back(parseAffineExpr(numDims));
      while (isPunct(",")) {
        next();
        m.results.push_back(parseAffineExpr(numDims));
      }
    }
    expectPunct(")");
    expectPunct(">");
    return m;
  }

  Attr parseAttrValue() {
    const Token &t = peek();
    if (t.kind == Token::Int)
      return next().ival;
    if (t.kind == Token::Float)
      return next().fval;
    if (t.kind == Token::Str)
      return next().text;
    if (t.kind == Token::Ident && t.text == "affine_map") {
      std::vector<AffineMap> maps;
      maps.push_back(parseAffineMap());
      return maps;
    }
    if (t.kind == Token::Ident)
      return next().text;
    if (isPunct("[")) {
      next();
      if (isPunct("]")) {
        next();
        return std::vector<int64_t>();
      }
      if (peek().kind == Token::Str) {
        std::vector<std::string> strs;
        strs.push_back(next().text);
        while (isPunct(",")) {
          next();
          strs.push_back(expectKind(Token::Str, "string").text);
        }
        expectPunct("]");
        return strs;
      }
      if (peek().kind == Token::Ident && peek().text == "affine_map") {
        std::vector<AffineMap> maps;
        maps.push_back(parseAffineMap());
        while (isPunct(",")) {
          next();
          maps.push_back(parseAffineMap());
        }
        expectPunct("]");
        return maps;
      }
      std::vector<int64_t> ints;
      ints.push_back(expectKind(Token::Int, "integer").ival);
      while (isPunct(",")) {
        next();
        ints.push_back(expectKind(Token::Int, "integer").ival);
      }
      expectPunct("]");
      return ints;
    }
    err(t.loc, "expected attribute value");
  }

  std::map<std::string, Attr> parseAttrDict() {
    std::map<std::string, Attr> attrs;
    expectPunct("{");
    while (!isPunct("}")) {
      Token key = expectIdent();
      if (isPunct("=")) {
        next();
        attrs[key.text] = parseAttrValue();
      } else {
        attrs[key.text] = static_cast<int64_t>(1); // unit attribute
      }
      if (!isPunct(","))
        break;
      next();
    }
    expectPunct("}");
    return attrs;
  }

  //===--------------------------------------------------------------------===//
  // Operations
  //===--------------------------------------------------------------------===//

  Operation *build(Block *block, Location loc, std::string name,
                   std::vector<Value *> operands, std::vector<Type> results,
                   std::map<std::string, Attr> attrs = {}, int numRegions = 0) {
    return OpBuilder::atEnd(block).create(loc, std::move(name),
                                          std::move(operands),
                                          std::move(results), std::move(attrs),
                                          numRegions);
  }

  void bindResults(Operation *op,
                   const std::vector<std::pair<std::string, Location>> &names) {
    if (static_cast<size_t>(op->numResults()) != names.size())
      err(op->loc, "'" + op->name + "' produces " +
                       std::to_string(op->numResults()) + " results, but " +
                       std::to_string(names.size()) + " names were bound");
    for (size_t i = 0; i < names.size(); ++i)
      define(names[i].first, op->result(static_cast<int>(i)), names[i].second);
  }

  /// Parses the ops of `{ ... }` into `block`. An optional ^bb0 header
  /// declares block args. `autoTerminator` is appended when the block does
  /// not already end in it (empty name keeps the block as written).
  void parseRegionBody(Block *block, bool allowHeader,
                       const std::string &autoTerminator) {
    Location open = expectPunct("{").loc;
    pushScope();
    if (allowHeader && peek().kind == Token::Caret) {
      next();
      expectPunct("(");
      if (!isPunct(")")) {
        while (true) {
          Token name = expectKind(Token::Percent, "block argument");
          expectPunct(":");
          Type t = parseType();
          Value *arg = block->addArg(t, name.loc);
          define(name.text, arg, name.loc);
          if (!isPunct(","))
            break;
          next();
        }
      }
      expectPunct(")");
      expectPunct(":");
    }
    while (!isPunct("}"))
      parseOp(block);
    Location close = expectPunct("}").loc;
    popScope();
    if (!autoTerminator.empty()) {
      Operation *term = block->terminator();
      if (!term || term->name != autoTerminator)
        build(block, close, autoTerminator, {}, {});
    }
    (void)open;
  }

  void parseOp(Block *block) {
    std::vector<std::pair<std::string, Location>> results;
    if (peek().kind == Token::Percent) {
      while (true) {
        Token t = next();
        results.emplace_back(t.text, t.loc);
        if (!isPunct(","))
          break;
        next();
      }
      expectPunct("=");
    }
    Token opTok = expectIdent();
    Operation *op = dispatch(block, opTok, results.size());
    bindResults(op, results);
  }

  Operation *dispatch(Block *block, const Token &opTok, size_t numResults) {
    const std::string &n = opTok.text;
    Location loc = opTok.loc;

    if (n == "func.func" || n == "transform.named_sequence")
      return parseFuncLike(block, loc, n);
    if (n == "func.return" || n == "scf.yield" || n == "transform.yield")
      return parseYieldLike(block, loc, n);
    if (n == "func.call")
      return parseCall(block, loc);
    if (n == "arith.constant")
      return parseConstant(block, loc);
    if (n == "arith.addf" || n == "arith.mulf" || n == "arith.maximumf" ||
        n == "arith.addi" || n == "arith.muli")
      return parseBinary(block, loc, n);
    if (n == "arith.cmpf")
      return parseCmpf(block, loc);
    if (n == "arith.select")
      return parseSelect(block, loc);
    if (n == "tensor.empty")
      return parseTensorEmpty(block, loc);
    if (n == "tensor.extract_slice")
      return parseExtractSlice(block, loc);
    if (n == "tensor.insert_slice" || n == "tensor.parallel_insert_slice")
      return parseInsertSlice(block, loc, n);
    if (n == "linalg.generic")
      return parseGeneric(block, loc);
    if (n == "linalg.matmul" || n == "linalg.elemwise_binary" ||
        n == "linalg.fill")
      return parseNamedStructured(block, loc, n);
    if (n == "linalg.yield")
      return parseYieldLike(block, loc, n);
    if (n == "scf.forall")
      return parseForall(block, loc);
    if (n == "scf.forall.in_parallel") {
      Operation *op = build(block, loc, n, {}, {}, {}, 1);
      parseRegionBody(&op->region(0)->block, false, "");
      return op;
    }
    if (n == "scf.for")
      return parseFor(block, loc);

    if (n.rfind("transform.", 0) == 0)
      return parseTransformOp(block, loc, n, numResults);
    if (n.rfind("my.", 0) == 0)
      return parseCallLikePayload(block, loc, n);
    err(loc, "unknown operation '" + n + "'");
  }

  //===--------------------------------------------------------------------===//
  // Payload ops
  //===--------------------------------------------------------------------===//

  Operation *parseFuncLike(Block *block, Location loc, const std::string &n) {
    Token sym = expectKind(Token::At, "symbol name");
    std::map<std::string, Attr> attrs;
    attrs["sym_name"] = sym.text;
    Operation *op = build(block, loc, n, {}, {}, std::move(attrs), 1);
    Block *body = &op->region(0)->block;
    pushScope();
    expectPunct("(");
    if (!isPunct(")")) {
      while (true) {
        Token name = expectKind(Token::Percent, "argument");
        expectPunct(":");
        Type t = parseType();
        if (isPunct("{"))
          parseAttrDict(); // per-argument annotations are accepted and dropped
        Value *arg = body->addArg(t, name.loc);
        define(name.text, arg, name.loc);
        if (!isPunct(","))
          break;
        next();
      }
    }
    expectPunct(")");
    if (isPunct("->")) {
      next();
      parseTypeOrList(); // declared result types are derived from the yield
    }
    expectPunct("{");
    while (!isPunct("}"))
      parseOp(body);
    Location close = expectPunct("}").loc;
    popScope();
    const char *term =
        n == "func.func" ? "func.return" : "transform.yield";
    if (!body->terminator() || body->terminator()->name != term)
      build(body, close, term, {}, {});
    return op;
  }

  Operation *parseYieldLike(Block *block, Location loc, const std::string &n) {
    std::vector<Value *> operands;
    if (peek().kind == Token::Percent) {
      operands = parseValueUseList();
      expectPunct(":");
      std::vector<Type> types;
      types.push_back(parseType());
      while (isPunct(",")) {
        next();
        types.push_back(parseType());
      }
      checkOperandTypes(loc, operands, types);
    }
    return build(block, loc, n, std::move(operands), {});
  }

  Operation *parseCall(Block *block, Location loc) {
    Token callee = expectKind(Token::At, "callee");
    expectPunct("(");
    std::vector<Value *> operands;
    if (!isPunct(")"))
      operands = parseValueUseList();
    expectPunct(")");
    std::vector<Type> results = functionalTrailer(loc, operands);
    std::map<std::string, Attr> attrs;
    attrs["callee"] = callee.text;
    return build(block, loc, "func.call", std::move(operands),
                 std::move(results), std::move(attrs));
  }

  Operation *parseConstant(Block *block, Location loc) {
    std::map<std::string, Attr> attrs;
    if (peek().kind == Token::Ident && peek().text == "dense") {
      next();
      expectPunct("<");
      const Token &v = peek();
      if (v.kind == Token::Float)
        attrs["value"] = next().fval;
      else if (v.kind == Token::Int)
        attrs["value"] = static_cast<double>(next().ival);
      else
        err(v.loc, "expected splat constant");
      expectPunct(">");
      expectPunct(":");
      Type t = parseType();
      if (!t.isTensor())
        err(loc, "dense constant requires a tensor type");
      return build(block, loc, "arith.constant", {}, {t}, std::move(attrs));
    }
    const Token &v = peek();
    bool isFloat = v.kind == Token::Float;
    if (isFloat)
      attrs["value"] = next().fval;
    else
      attrs["value"] = expectKind(Token::Int, "constant value").ival;
    expectPunct(":");
    Type t = parseType();
    if (!t.isScalar())
      err(loc, "expected scalar constant type");
    if (t.elem == ElemKind::F32 && !isFloat)
      attrs["value"] = static_cast<double>(std::get<int64_t>(attrs["value"]));
    return build(block, loc, "arith.constant", {}, {t}, std::move(attrs));
  }

  Operation *parseBinary(Block *block, Location loc, const std::string &n) {
    Value *a = parseValueUse();
    expectPunct(",");
    Value *b = parseValueUse();
    singleTypeTrailer(loc, {a, b});
    return build(block, loc, n, {a, b}, {a->type});
  }

  Operation *parseCmpf(Block *block, Location loc) {
    Token pred = expectIdent();
    expectPunct(",");
    Value *a = parseValueUse();
    expectPunct(",");
    Value *b = parseValueUse();
    singleTypeTrailer(loc, {a, b});
    std::map<std::string, Attr> attrs;
    attrs["predicate"] = pred.text;
    return build(block, loc, "arith.cmpf", {a, b},
                 {Type::scalar(ElemKind::I1)}, std::move(attrs));
  }

  Operation *parseSelect(Block *block, Location loc) {
    Value *c = parseValueUse();
    expectPunct(",");
    Value *a = parseValueUse();
    expectPunct(",");
    Value *b = parseValueUse();
    singleTypeTrailer(loc, {a, b});
    return build(block, loc, "arith.select", {c, a, b}, {a->type});
  }

  Operation *parseTensorEmpty(Block *block, Location loc) {
    expectPunct("(");
    expectPunct(")");
    expectPunct(":");
    Type t = parseType();
    if (!t.isTensor())
      err(loc, "tensor.empty requires a tensor type");
    return build(block, loc, "tensor.empty", {}, {t});
  }

  /// [offs] [sizes] [strides]; dynamic offsets become trailing operands.
  void parseSliceBrackets(Location loc, std::vector<int64_t> &staticOffsets,
                          std::vector<int64_t> &sizes,
                          std::vector<Value *> &dynOperands) {
    expectPunct("[");
    if (!isPunct("]")) {
      while (true) {
        if (peek().kind == Token::Percent) {
          dynOperands.push_back(parseValueUse());
          staticOffsets.push_back(kDynamic);
        } else {
          staticOffsets.push_back(expectKind(Token::Int, "offset").ival);
        }
        if (!isPunct(","))
          break;
        next();
      }
    }
    expectPunct("]");
    expectPunct("[");
    if (!isPunct("]")) {
      while (true) {
        sizes.push_back(expectKind(Token::Int, "size").ival);
        if (!isPunct(","))
          break;
        next();
      }
    }
    expectPunct("]");
    expectPunct("[");
    if (!isPunct("]")) {
      while (true) {
        if (expectKind(Token::Int, "stride").ival != 1)
          err(loc, "only unit strides are supported");
        if (!isPunct(","))
          break;
        next();
      }
    }
    expectPunct("]");
  }

  Operation *parseExtractSlice(Block *block, Location loc) {
    Value *src = parseValueUse();
    std::vector<int64_t> offsets, sizes;
    std::vector<Value *> dyn;
    parseSliceBrackets(loc, offsets, sizes, dyn);
    expectPunct(":");
    Type srcType = parseType();
    expectKeyword("to");
    Type dstType = parseType();
    if (src->type != srcType)
      err(loc, "source type mismatch");
    std::vector<Value *> operands = {src};
    operands.insert(operands.end(), dyn.begin(), dyn.end());
    std::map<std::string, Attr> attrs;
    attrs["static_offsets"] = offsets;
    attrs["static_sizes"] = sizes;
    return build(block, loc, "tensor.extract_slice", std::move(operands),
                 {dstType}, std::move(attrs));
  }

  Operation *parseInsertSlice(Block *block, Location loc,
                              const std::string &n) {
    Value *val = parseValueUse();
    expectKeyword("into");
    Value *dst = parseValueUse();
    std::vector<int64_t> offsets, sizes;
    std::vector<Value *> dyn;
    parseSliceBrackets(loc, offsets, sizes, dyn);
    expectPunct(":");
    Type valType = parseType();
    expectKeyword("into");
    Type dstType = parseType();
    if (val->type != valType || dst->type != dstType)
      err(loc, "slice type mismatch");
    std::vector<Value *> operands = {val, dst};
    operands.insert(operands.end(), dyn.begin(), dyn.end());
    std::map<std::string, Attr> attrs;
    attrs["static_offsets"] = offsets;
    attrs["static_sizes"] = sizes;
    std::vector<Type> results;
    if (n == "tensor.insert_slice")
      results.push_back(dstType);
    return build(block, loc, n, std::move(operands), std::move(results),
                 std::move(attrs));
  }

  void parseInsOuts(Location loc, std::vector<Value *> &ins,
                    std::vector<Value *> &outs) {
    expectKeyword("ins");
    expectPunct("(");
    ins = parseValueUseList();
    expectPunct(":");
    std::vector<Type> inTypes;
    inTypes.push_back(parseType());
    while (isPunct(",")) {
      next();
      inTypes.push_back(parseType());
    }
    checkOperandTypes(loc, ins, inTypes);
    expectPunct(")");
    expectKeyword("outs");
    expectPunct("(");
    outs = parseValueUseList();
    expectPunct(":");
    std::vector<Type> outTypes;
    outTypes.push_back(parseType());
    while (isPunct(",")) {
      next();
      outTypes.push_back(parseType());
    }
    checkOperandTypes(loc, outs, outTypes);
    expectPunct(")");
  }

  Operation *parseGeneric(Block *block, Location loc) {
    std::map<std::string, Attr> dict = parseAttrDict();
    if (!dict.count("indexing_maps") || !dict.count("iterator_types"))
      err(loc, "linalg.generic requires indexing_maps and iterator_types");
    std::vector<IteratorKind> iters;
    for (const std::string &s :
         std::get<std::vector<std::string>>(dict.at("iterator_types"))) {
      if (s == "parallel")
        iters.push_back(IteratorKind::Parallel);
      else if (s == "reduction")
        iters.push_back(IteratorKind::Reduction);
      else
        err(loc, "unknown iterator type '" + s + "'");
    }
    std::vector<Value *> ins, outs;
    parseInsOuts(loc, ins, outs);
    std::map<std::string, Attr> attrs;
    attrs["indexing_maps"] = dict.at("indexing_maps");
    attrs["iterator_types"] = iters;
    attrs["ins_count"] = static_cast<int64_t>(ins.size());
    std::vector<Value *> operands = ins;
    operands.insert(operands.end(), outs.begin(), outs.end());
    Operation *op =
        build(block, loc, "linalg.generic", std::move(operands), {},
              std::move(attrs), 1);
    parseRegionBody(&op->region(0)->block, true, "");
    // Result types mirror the outs.
    std::vector<Type> resultTypes;
    if (isPunct("->")) {
      next();
      resultTypes = parseTypeOrList();
    }
    if (resultTypes.size() != outs.size())
      err(loc, "linalg.generic must declare one result type per out");
    for (size_t i = 0; i < outs.size(); ++i) {
      if (resultTypes[i] != outs[i]->type)
        err(loc, "linalg.generic result type must match its out");
      auto v = std::make_unique<Value>();
      v->type = resultTypes[i];
      v->defOp = op;
      v->resultIndex = static_cast<int>(i);
      op->resultList.push_back(std::move(v));
    }
    return op;
  }

  Operation *parseNamedStructured(Block *block, Location loc,
                                  const std::string &n) {
    std::map<std::string, Attr> attrs;
    if (isPunct("{"))
      attrs = parseAttrDict();
    std::vector<Value *> ins, outs;
    parseInsOuts(loc, ins, outs);
    expectPunct("->");
    Type resultType = parseType();
    if (outs.size() != 1 || resultType != outs[0]->type)
      err(loc, "'" + n + "' result type must match its out");
    std::vector<Value *> operands = ins;
    operands.insert(operands.end(), outs.begin(), outs.end());
    return build(block, loc, n, std::move(operands), {resultType},
                 std::move(attrs));
  }

  Operation *parseForall(Block *block, Location loc) {
    expectPunct("(");
    std::vector<std::pair<std::string, Location>> ivs;
    while (true) {
      Token t = expectKind(Token::Percent, "induction variable");
      ivs.emplace_back(t.text, t.loc);
      if (!isPunct(","))
        break;
      next();
    }
    expectPunct(")");
    expectKeyword("in");
    expectPunct("(");
    std::vector<int64_t> trips;
    while (true) {
      trips.push_back(expectKind(Token::Int, "trip count").ival);
      if (!isPunct(","))
        break;
      next();
    }
    expectPunct(")");
    if (trips.size() != ivs.size())
      err(loc, "trip count arity must match the induction variables");

    std::vector<std::pair<std::string, Location>> outNames;
    std::vector<Value *> inits;
    if (consumeKeyword("shared_outs")) {
      expectPunct("(");
      while (true) {
        Token t = expectKind(Token::Percent, "shared out");
        expectPunct("=");
        Value *init = parseValueUse();
        outNames.emplace_back(t.text, t.loc);
        inits.push_back(init);
        if (!isPunct(","))
          break;
        next();
      }
      expectPunct(")");
    }
    std::vector<Type> resultTypes;
    for (Value *v : inits)
      resultTypes.push_back(v->type);
    if (isPunct("->")) {
      next();
      std::vector<Type> declared = parseTypeOrList();
      if (declared != resultTypes)
        err(loc, "scf.forall result types must match the shared outs");
    }
    std::map<std::string, Attr> attrs;
    attrs["trip_counts"] = trips;
    Operation *op = build(block, loc, "scf.forall", inits,
                          std::move(resultTypes), std::move(attrs), 1);
    Block *body = &op->region(0)->block;
    pushScope();
    for (auto &iv : ivs) {
      Value *arg = body->addArg(Type::scalar(ElemKind::Index), iv.second);
      define(iv.first, arg, iv.second);
    }
    for (size_t i = 0; i < outNames.size(); ++i) {
      Value *arg = body->addArg(inits[i]->type, outNames[i].second);
      define(outNames[i].first, arg, outNames[i].second);
    }
    expectPunct("{");
    while (!isPunct("}"))
      parseOp(body);
    Location close = expectPunct("}").loc;
    popScope();
    Operation *term = body->terminator();
    if (!term || term->name != "scf.forall.in_parallel")
      build(body, close, "scf.forall.in_parallel", {}, {}, {}, 1);
    return op;
  }

  Operation *parseFor(Block *block, Location loc) {
    Token iv = expectKind(Token::Percent, "induction variable");
    expectPunct("=");
    Value *lb = parseValueUse();
    expectKeyword("to");
    Value *ub = parseValueUse();
    expectKeyword("step");
    Value *step = parseValueUse();
    std::vector<std::pair<std::string, Location>> iterNames;
    std::vector<Value *> inits;
    if (consumeKeyword("iter_args")) {
      expectPunct("(");
      while (true) {
        Token t = expectKind(Token::Percent, "iter arg");
        expectPunct("=");
        inits.push_back(parseValueUse());
        iterNames.emplace_back(t.text, t.loc);
        if (!isPunct(","))
          break;
        next();
      }
      expectPunct(")");
    }
    std::vector<Type> resultTypes;
    for (Value *v : inits)
      resultTypes.push_back(v->type);
    if (isPunct("->")) {
      next();
      std::vector<Type> declared = parseTypeOrList();
      if (declared != resultTypes)
        err(loc, "scf.for result types must match the iter_args");
    }
    std::vector<Value *> operands = {lb, ub, step};
    operands.insert(operands.end(), inits.begin(), inits.end());
    Operation *op = build(block, loc, "scf.for", std::move(operands),
                          std::move(resultTypes), {}, 1);
    Block *body = &op->region(0)->block;
    pushScope();
    Value *ivArg = body->addArg(Type::scalar(ElemKind::Index), iv.loc);
    define(iv.text, ivArg, iv.loc);
    for (size_t i = 0; i < iterNames.size(); ++i) {
      Value *arg = body->addArg(inits[i]->type, iterNames[i].second);
      define(iterNames[i].first, arg, iterNames[i].second);
    }
    expectPunct("{");
    while (!isPunct("}"))
      parseOp(body);
    Location close = expectPunct("}").loc;
    popScope();
    Operation *term = body->terminator();
    if (!term || term->name != "scf.yield")
      build(body, close, "scf.yield", {}, {});
    return op;
  }

  Operation *parseCallLikePayload(Block *block, Location loc,
                                  const std::string &n) {
    expectPunct("(");
    std::vector<Value *> operands;
    if (!isPunct(")"))
      operands = parseValueUseList();
    expectPunct(")");
    std::vector<Type> results = functionalTrailer(loc, operands);
    return build(block, loc, n, std::move(operands), std::move(results));
  }

  //===--------------------------------------------------------------------===//
  // Transform ops
  //===--------------------------------------------------------------------===//

  Operation *parseTransformOp(Block *block, Location loc, const std::string &n,
                              size_t numResults) {
    if (n == "transform.debug.emit_remark_at") {
      Value *h = parseValueUse();
      expectPunct(",");
      Token msg = expectKind(Token::Str, "remark message");
      singleTypeTrailer(loc, {h});
      std::map<std::string, Attr> attrs;
      attrs["message"] = msg.text;
      return build(block, loc, n, {h}, {}, std::move(attrs));
    }
    if (n == "transform.cast") {
      Value *h = parseValueUse();
      expectPunct(":");
      Type from = parseType();
      expectKeyword("to");
      Type to = parseType();
      if (h->type != from)
        err(loc, "cast source type mismatch");
      return build(block, loc, n, {h}, {to});
    }
    if (n == "transform.split_handle") {
      Value *h = parseValueUse();
      std::vector<Type> results = functionalTrailer(loc, {h});
      return build(block, loc, n, {h}, std::move(results));
    }
    if (n == "transform.merge_handles") {
      std::vector<Value *> operands = parseValueUseList();
      expectPunct(":");
      Type t = parseType();
      for (Value *v : operands)
        if (v->type != t)
          err(loc, "merge_handles operands must share the declared type");
      return build(block, loc, n, std::move(operands), {t});
    }
    if (n == "transform.include") {
      Token callee = expectKind(Token::At, "sequence name");
      expectKeyword("failures");
      expectPunct("(");
      Token mode = expectIdent();
      if (mode.text != "propagate" && mode.text != "suppress")
        err(mode.loc, "expected 'propagate' or 'suppress'");
      expectPunct(")");
      expectPunct("(");
      std::vector<Value *> operands;
      if (!isPunct(")"))
        operands = parseValueUseList();
      expectPunct(")");
      std::vector<Type> results = functionalTrailer(loc, operands);
      std::map<std::string, Attr> attrs;
      attrs["callee"] = callee.text;
      attrs["failure_mode"] = mode.text;
      return build(block, loc, n, std::move(operands), std::move(results),
                   std::move(attrs));
    }
    if (n == "transform.collect_matching") {
      Token matcher = expectKind(Token::At, "matcher name");
      expectKeyword("in");
      Value *root = parseValueUse();
      std::vector<Type> results = functionalTrailer(loc, {root});
      std::map<std::string, Attr> attrs;
      attrs["matcher"] = matcher.text;
      return build(block, loc, n, {root}, std::move(results),
                   std::move(attrs));
    }
    if (n == "transform.foreach_match") {
      expectKeyword("in");
      Value *root = parseValueUse();
      std::vector<std::string> matchers, actions;
      while (true) {
        matchers.push_back(expectKind(Token::At, "matcher name").text);
        expectPunct("->");
        actions.push_back(expectKind(Token::At, "action name").text);
        if (!isPunct(","))
          break;
        next();
      }
      std::vector<Type> results = functionalTrailer(loc, {root});
      std::map<std::string, Attr> attrs;
      attrs["matchers"] = matchers;
      attrs["actions"] = actions;
      return build(block, loc, n, {root}, std::move(results),
                   std::move(attrs));
    }
    if (n == "transform.param.constant") {
      Token v = expectKind(Token::Int, "parameter value");
      expectPunct(":");
      expectKeyword("i64");
      std::map<std::string, Attr> attrs;
      attrs["value"] = v.ival;
      return build(block, loc, n, {}, {Type::param()}, std::move(attrs));
    }
    if (n == "transform.param.count") {
      Value *h = parseValueUse();
      std::vector<Type> results = functionalTrailer(loc, {h});
      return build(block, loc, n, {h}, std::move(results));
    }
    if (n == "transform.match.param.cmpi") {
      Token pred = expectIdent();
      Value *a = parseValueUse();
      expectPunct(",");
      Value *b = parseValueUse();
      std::map<std::string, Attr> attrs;
      attrs["predicate"] = pred.text;
      return build(block, loc, n, {a, b}, {}, std::move(attrs));
    }
    if (n == "transform.match.operation_name") {
      Value *h = parseValueUse();
      expectPunct("[");
      std::vector<std::string> names;
      while (true) {
        names.push_back(expectKind(Token::Str, "operation name").text);
        if (!isPunct(","))
          break;
        next();
      }
      expectPunct("]");
      singleTypeTrailer(loc, {h});
      std::map<std::string, Attr> attrs;
      attrs["names"] = names;
      return build(block, loc, n, {h}, {}, std::move(attrs));
    }
    if (n == "transform.get_producer_of_operand" ||
        n == "transform.get_operand") {
      Value *h = parseValueUse();
      expectPunct("[");
      Token idx = expectKind(Token::Int, "operand position");
      expectPunct("]");
      std::vector<Type> results = functionalTrailer(loc, {h});
      std::map<std::string, Attr> attrs;
      attrs["position"] = idx.ival;
      return build(block, loc, n, {h}, std::move(results), std::move(attrs));
    }
    if (n == "transform.get_defining_op" || n == "transform.structured.generalize" ||
        n == "transform.loop.forall_to_for") {
      Value *h = parseValueUse();
      std::vector<Type> results = functionalTrailer(loc, {h});
      return build(block, loc, n, {h}, std::move(results));
    }
    if (n == "transform.match.my.has_operand_satisfying") {
      Value *h = parseValueUse();
      std::vector<Type> results = functionalTrailer(loc, {h});
      Operation *op = build(block, loc, n, {h}, std::move(results), {}, 1);
      parseRegionBody(&op->region(0)->block, true, "transform.yield");
      return op;
    }
    if (n == "transform.match.structured") {
      Value *h = parseValueUse();
      std::vector<Type> results;
      expectPunct(":");
      if (isPunct("(")) {
        next();
        Type t = parseType();
        expectPunct(")");
        if (h->type != t)
          err(loc, "operand type mismatch");
        expectPunct("->");
        results = parseTypeOrList();
      } else {
        Type t = parseType();
        if (h->type != t)
          err(loc, "operand type mismatch");
      }
      Operation *op = build(block, loc, n, {h}, std::move(results), {}, 1);
      parseRegionBody(&op->region(0)->block, true, "transform.yield");
      return op;
    }
    if (n == "transform.match.structured.rank" ||
        n == "transform.match.structured.num_inputs" ||
        n == "transform.match.structured.num_inits" ||
        n == "transform.match.structured.classify_contraction_dims") {
      Value *h = parseValueUse();
      std::vector<Type> results = functionalTrailer(loc, {h});
      return build(block, loc, n, {h}, std::move(results));
    }
    if (n == "transform.match.structured.input" ||
        n == "transform.match.structured.init") {
      Value *h = parseValueUse();
      expectPunct("[");
      std::map<std::string, Attr> attrs;
      if (peek().kind == Token::Ident && peek().text == "all") {
        next();
        attrs["all"] = static_cast<int64_t>(1);
      } else {
        attrs["position"] = expectKind(Token::Int, "operand position").ival;
      }
      expectPunct("]");
      if (isPunct("{")) {
        auto dict = parseAttrDict();
        for (auto &kv : dict)
          attrs[kv.first] = kv.second;
      }
      singleTypeTrailer(loc, {h});
      return build(block, loc, n, {h}, {}, std::move(attrs));
    }
    if (n == "transform.match.structured.body") {
      Value *h = parseValueUse();
      std::map<std::string, Attr> attrs = parseAttrDict();
      singleTypeTrailer(loc, {h});
      return build(block, loc, n, {h}, {}, std::move(attrs));
    }
    if (n == "transform.structured.tile_using_forall") {
      Value *h = parseValueUse();
      expectKeyword("tile_sizes");
      std::vector<int64_t> sizes = parseIntArray();
      std::vector<Type> results = functionalTrailer(loc, {h});
      std::map<std::string, Attr> attrs;
      attrs["tile_sizes"] = sizes;
      return build(block, loc, n, {h}, std::move(results), std::move(attrs));
    }
    if (n == "transform.structured.tile_reduction_using_for") {
      Value *h = parseValueUse();
      expectKeyword("by");
      expectKeyword("tile_sizes");
      expectPunct("=");
      std::vector<int64_t> sizes = parseIntArray();
      std::vector<Type> results = functionalTrailer(loc, {h});
      std::map<std::string, Attr> attrs;
      attrs["tile_sizes"] = sizes;
      return build(block, loc, n, {h}, std::move(results), std::move(attrs));
    }
    if (n == "transform.structured.fuse_into_containing_op") {
      Value *producer = parseValueUse();
      expectKeyword("into");
      Value *containing = parseValueUse();
      std::vector<Type> results = functionalTrailer(loc, {producer, containing});
      return build(block, loc, n, {producer, containing}, std::move(results));
    }
    if (n == "transform.loop.outline") {
      Value *h = parseValueUse();
      std::map<std::string, Attr> attrs = parseAttrDict();
      std::vector<Type> results = functionalTrailer(loc, {h});
      return build(block, loc, n, {h}, std::move(results), std::move(attrs));
    }
    if (n == "transform.loop.unroll") {
      Value *h = parseValueUse();
      std::map<std::string, Attr> attrs = parseAttrDict();
      singleTypeTrailer(loc, {h});
      return build(block, loc, n, {h}, {}, std::move(attrs));
    }
    if (n == "transform.cleanup") {
      Value *h = parseValueUse();
      singleTypeTrailer(loc, {h});
      return build(block, loc, n, {h}, {});
    }
    auto extIt = ext.find(n);
    if (extIt != ext.end())
      return parseExtensionOp(block, loc, extIt->second, numResults);
    err(loc, "unknown transform operation '" + n + "'");
  }

  std::vector<int64_t> parseIntArray() {
    std::vector<int64_t> out;
    expectPunct("[");
    if (!isPunct("]")) {
      while (true) {
        out.push_back(expectKind(Token::Int, "integer").ival);
        if (!isPunct(","))
          break;
        next();
      }
    }
    expectPunct("]");
    return out;
  }

  Operation *parseExtensionOp(Block *block, Location loc,
                              const ExtensionSyntax &syntax,
                              size_t numResults) {
    std::vector<Value *> operands;
    std::map<std::string, Attr> attrs;
    operands.push_back(parseValueUse());
    while (isPunct(",")) {
      next();
      if (peek().kind == Token::Str) {
        if (syntax.trailingStringKey.empty())
          err(peek().loc, "'" + syntax.name + "' takes no string attribute");
        attrs[syntax.trailingStringKey] = next().text;
        break;
      }
      operands.push_back(parseValueUse());
    }
    std::vector<Type> results;
    if (numResults == 0) {
      singleTypeTrailer(loc, operands);
    } else {
      results = functionalTrailer(loc, operands);
    }
    return build(block, loc, syntax.name, std::move(operands),
                 std::move(results), std::move(attrs));
  }

  std::vector<Token> tokens;
  size_t pos = 0;
  std::vector<Diagnostic> &diags;
  const std::map<std::string, ExtensionSyntax> &ext;
  std::vector<std::map<std::string, Value *>> scopes;
};

} // namespace

ParseResult parseSource(const std::string &filename, const std::string &text,
                        SourceMap &sm,
                        const std::map<std::string, ExtensionSyntax> &ext) {
  sm.add(filename, text);
  ParseResult result;
  try {
    Lexer lexer(filename, text, result.diags);
    std::vector<Token> tokens = lexer.run();
    Parser parser(std::move(tokens), result.diags, ext);
    result.module = parser.parseModule();
  } catch (const ParseError &) {
    result.ok = false;
    return result;
  }
  result.ok = verifyModule(result.module.get(), result.diags);
  return result;
}

} // namespace ttir
