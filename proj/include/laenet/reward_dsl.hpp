#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "laenet/rewards.hpp"

namespace laenet::dsl {

struct SourceSpan {
  std::size_t begin = 0, end = 0;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, SourceSpan span)
      : std::runtime_error(msg + " (at offset " + std::to_string(span.begin) + ")"),
        span_(span) {}
  SourceSpan span() const { return span_; }

 private:
  SourceSpan span_;
};

// Candidate-level failure: division by zero, bad index, non-finite result.
class EvalError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Kind { Scalar, Vector };

enum class Op { Add, Sub, Mul, Div, Neg, Lt, Le, Gt, Ge, Eq };

struct Node;
using NodePtr = std::unique_ptr<Node>;

struct Node {
  enum class Type { Literal, Feature, Call, Binary, Unary, Index } type;
  double literal = 0.0;
  std::string name;  // feature or function name
  Op op = Op::Add;
  std::vector<NodePtr> args;  // call args, binary lhs/rhs, unary operand, index base/idx
  SourceSpan span;
  Kind kind = Kind::Scalar;  // filled by validation
};

namespace limits {
inline constexpr int kMaxDepth = 32;
inline constexpr int kMaxNodes = 512;
}  // namespace limits

// ---- lexer ---------------------------------------------------------------

namespace detail {

struct Token {
  enum class Type { Num, Ident, Punct, End } type;
  std::string text;
  double value = 0.0;
  SourceSpan span;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) { advance(); }
  const Token& peek() const { return tok_; }
  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    const std::size_t start = pos_;
    if (pos_ >= src_.size()) {
      tok_ = {Token::Type::End, "", 0.0, {start, start}};
      return;
    }
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && pos_ + 1 < src_.size() &&
         std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
      std::size_t consumed = 0;
      double v;
      try {
        v = std::stod(std::string(src_.substr(pos_)), &consumed);
      } catch (const std::exception&) {
        throw ParseError("malformed number", {start, pos_ + 1});
      }
      tok_ = {Token::Type::Num, std::string(src_.substr(pos_, consumed)), v,
              {start, start + consumed}};
      pos_ += consumed;
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t end = pos_;
      while (end < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[end])) || src_[end] == '_'))
        ++end;
      tok_ = {Token::Type::Ident, std::string(src_.substr(pos_, end - pos_)), 0.0, {start, end}};
      pos_ = end;
      return;
    }
    // multi-char comparison operators
    for (std::string_view p : {"<=", ">=", "=="}) {
      if (src_.substr(pos_).starts_with(p)) {
        tok_ = {Token::Type::Punct, std::string(p), 0.0, {start, start + 2}};
        pos_ += 2;
        return;
      }
    }
    if (std::string_view("+-*/()[],<>").find(c) != std::string_view::npos) {
      tok_ = {Token::Type::Punct, std::string(1, c), 0.0, {start, start + 1}};
      ++pos_;
      return;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", {start, start + 1});
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  Token tok_;
};

inline bool is_feature(const std::string& name) {
  for (std::string_view f : {"backlog", "rate", "transmitted", "dist_to", "delta_dist_to",
                             "slot", "slot_len", "num_users"})
    if (name == f) return true;
  return false;
}

inline bool is_function(const std::string& name) {
  for (std::string_view f : {"sum", "max", "min", "mean", "var_q", "clamp", "indicator",
                             "argmax", "dist_to", "delta_dist_to"})
    if (name == f) return true;
  return false;
}

class Parser {
 public:
  explicit Parser(std::string_view src) : lex_(src) {}

  NodePtr parse() {
    NodePtr e = cmp();
    if (lex_.peek().type != Token::Type::End)
      throw ParseError("unexpected trailing input", lex_.peek().span);
    return e;
  }

 private:
  NodePtr cmp() {
    NodePtr lhs = add();
    const Token& t = lex_.peek();
    if (t.type == Token::Type::Punct &&
        (t.text == "<" || t.text == "<=" || t.text == ">" || t.text == ">=" || t.text == "==")) {
      Token op = lex_.take();
      NodePtr rhs = add();
      Op o = op.text == "<"    ? Op::Lt
             : op.text == "<=" ? Op::Le
             : op.text == ">"  ? Op::Gt
             : op.text == ">=" ? Op::Ge
                               : Op::Eq;
      lhs = binary(o, std::move(lhs), std::move(rhs), op.span);
    }
    return lhs;
  }

  NodePtr add() {
    NodePtr lhs = mul();
    while (lex_.peek().type == Token::Type::Punct &&
           (lex_.peek().text == "+" || lex_.peek().text == "-")) {
      Token op = lex_.take();
      lhs = binary(op.text == "+" ? Op::Add : Op::Sub, std::move(lhs), mul(), op.span);
    }
    return lhs;
  }

  NodePtr mul() {
    NodePtr lhs = unary();
    while (lex_.peek().type == Token::Type::Punct &&
           (lex_.peek().text == "*" || lex_.peek().text == "/")) {
      Token op = lex_.take();
      lhs = binary(op.text == "*" ? Op::Mul : Op::Div, std::move(lhs), unary(), op.span);
    }
    return lhs;
  }

  NodePtr unary() {
    if (lex_.peek().type == Token::Type::Punct && lex_.peek().text == "-") {
      Token op = lex_.take();
      auto n = std::make_unique<Node>();
      n->type = Node::Type::Unary;
      n->op = Op::Neg;
      n->span = op.span;
      n->args.push_back(unary());
      return n;
    }
    return postfix();
  }

  NodePtr postfix() {
    NodePtr base = primary();
    while (lex_.peek().type == Token::Type::Punct && lex_.peek().text == "[") {
      Token open = lex_.take();
      NodePtr idx = cmp();
      expect("]");
      auto n = std::make_unique<Node>();
      n->type = Node::Type::Index;
      n->span = open.span;
      n->args.push_back(std::move(base));
      n->args.push_back(std::move(idx));
      base = std::move(n);
    }
    return base;
  }

  NodePtr primary() {
    Token t = lex_.take();
    if (t.type == Token::Type::Num) {
      auto n = std::make_unique<Node>();
      n->type = Node::Type::Literal;
      n->literal = t.value;
      n->span = t.span;
      return n;
    }
    if (t.type == Token::Type::Punct && t.text == "(") {
      NodePtr e = cmp();
      expect(")");
      return e;
    }
    if (t.type == Token::Type::Ident) {
      if (lex_.peek().type == Token::Type::Punct && lex_.peek().text == "(") {
        if (!is_function(t.text))
          throw ParseError("unknown function '" + t.text + "'", t.span);
        lex_.take();
        auto n = std::make_unique<Node>();
        n->type = Node::Type::Call;
        n->name = t.text;
        n->span = t.span;
        if (!(lex_.peek().type == Token::Type::Punct && lex_.peek().text == ")")) {
          n->args.push_back(cmp());
          while (lex_.peek().type == Token::Type::Punct && lex_.peek().text == ",") {
            lex_.take();
            n->args.push_back(cmp());
          }
        }
        expect(")");
        return n;
      }
      if (!is_feature(t.text))
        throw ParseError("unknown identifier '" + t.text + "'", t.span);
      auto n = std::make_unique<Node>();
      n->type = Node::Type::Feature;
      n->name = t.text;
      n->span = t.span;
      return n;
    }
    throw ParseError("expected expression", t.span);
  }

  void expect(std::string_view punct) {
    Token t = lex_.take();
    if (t.type != Token::Type::Punct || t.text != punct)
      throw ParseError("expected '" + std::string(punct) + "'", t.span);
  }

  static NodePtr binary(Op op, NodePtr lhs, NodePtr rhs, SourceSpan span) {
    auto n = std::make_unique<Node>();
    n->type = Node::Type::Binary;
    n->op = op;
    n->span = span;
    n->args.push_back(std::move(lhs));
    n->args.push_back(std::move(rhs));
    return n;
  }

  Lexer lex_;
};

inline int count_nodes(const Node& n) {
  int c = 1;
  for (const auto& a : n.args) c += count_nodes(*a);
  return c;
}

// Type inference + structural limits. Vector-valued features are per-user;
// binary ops broadcast scalar against vector.
inline Kind validate(Node& n, int depth) {
  if (depth > limits::kMaxDepth) throw ParseError("expression too deep", n.span);
  switch (n.type) {
    case Node::Type::Literal: return n.kind = Kind::Scalar;
    case Node::Type::Feature: {
      const bool vec = n.name == "backlog" || n.name == "rate" || n.name == "transmitted" ||
                       n.name == "dist_to" || n.name == "delta_dist_to";
      return n.kind = vec ? Kind::Vector : Kind::Scalar;
    }
    case Node::Type::Unary:
      return n.kind = validate(*n.args[0], depth + 1);
    case Node::Type::Binary: {
      const Kind a = validate(*n.args[0], depth + 1);
      const Kind b = validate(*n.args[1], depth + 1);
      return n.kind = (a == Kind::Vector || b == Kind::Vector) ? Kind::Vector : Kind::Scalar;
    }
    case Node::Type::Index: {
      if (validate(*n.args[0], depth + 1) != Kind::Vector)
        throw ParseError("indexing requires a per-user vector", n.span);
      if (validate(*n.args[1], depth + 1) != Kind::Scalar)
        throw ParseError("index must be a scalar", n.span);
      return n.kind = Kind::Scalar;
    }
    case Node::Type::Call: {
      auto arity = [&](std::size_t lo, std::size_t hi) {
        if (n.args.size() < lo || n.args.size() > hi)
          throw ParseError("wrong argument count for " + n.name, n.span);
      };
      std::vector<Kind> ks;
      for (auto& a : n.args) ks.push_back(validate(*a, depth + 1));
      if (n.name == "sum" || n.name == "mean" || n.name == "argmax") {
        arity(1, 1);
        if (ks[0] != Kind::Vector)
          throw ParseError(n.name + " requires a per-user vector", n.span);
        return n.kind = Kind::Scalar;
      }
      if (n.name == "min" || n.name == "max") {
        arity(1, 2);
        if (n.args.size() == 1) {
          if (ks[0] != Kind::Vector)
            throw ParseError("1-argument " + n.name + " requires a per-user vector", n.span);
          return n.kind = Kind::Scalar;  // reducer
        }
        return n.kind =
                   (ks[0] == Kind::Vector || ks[1] == Kind::Vector) ? Kind::Vector : Kind::Scalar;
      }
      if (n.name == "var_q") {
        arity(2, 2);
        if (ks[0] != Kind::Vector) throw ParseError("var_q requires a per-user vector", n.span);
        if (ks[1] != Kind::Scalar) throw ParseError("var_q level must be scalar", n.span);
        return n.kind = Kind::Scalar;
      }
      if (n.name == "clamp") {
        arity(3, 3);
        if (ks[1] != Kind::Scalar || ks[2] != Kind::Scalar)
          throw ParseError("clamp bounds must be scalar", n.span);
        return n.kind = ks[0];
      }
      if (n.name == "indicator") {
        arity(1, 1);
        return n.kind = ks[0];
      }
      if (n.name == "dist_to" || n.name == "delta_dist_to") {
        arity(1, 1);
        if (ks[0] != Kind::Scalar) throw ParseError(n.name + " index must be scalar", n.span);
        return n.kind = Kind::Scalar;
      }
      throw ParseError("unknown function '" + n.name + "'", n.span);
    }
  }
  throw ParseError("unreachable node type", n.span);
}

}  // namespace detail

// ---- program -------------------------------------------------------------

class RewardProgram {
 public:
  static RewardProgram parse(std::string_view text) {
    detail::Parser p(text);
    NodePtr root = p.parse();
    if (detail::count_nodes(*root) > limits::kMaxNodes)
      throw ParseError("expression too large", root->span);
    detail::validate(*root, 1);
    return RewardProgram(std::move(root));
  }

  double evaluate(const RewardContext& ctx) const {
    const Value v = eval(*root_, ctx);
    if (v.kind != Kind::Scalar) throw EvalError("program must produce a scalar");
    if (!std::isfinite(v.s)) throw EvalError("non-finite result");
    return v.s;
  }

  std::string print_canonical() const { return print(*root_, 0); }

  const Node& root() const { return *root_; }

  friend bool structurally_equal(const RewardProgram& a, const RewardProgram& b) {
    return equal(*a.root_, *b.root_);
  }

 private:
  explicit RewardProgram(NodePtr root) : root_(std::move(root)) {}

  struct Value {
    Kind kind = Kind::Scalar;
    double s = 0.0;
    std::vector<double> v;
  };

  static std::vector<double> feature_vector(const std::string& name, const RewardContext& ctx) {
    if (name == "backlog") return ctx.backlog;
    if (name == "rate") return ctx.rate;
    if (name == "transmitted") return ctx.transmitted;
    if (name == "dist_to" || name == "delta_dist_to") {
      std::vector<double> out;
      for (const auto& u : ctx.user_pos) {
        const double d0 = dist3(ctx.uav_pos, u);
        out.push_back(name == "dist_to" ? d0 : d0 - dist3(ctx.uav_pos_next, u));
      }
      return out;
    }
    throw EvalError("unknown vector feature " + name);
  }

  static std::size_t as_index(double x, std::size_t n_users) {
    const double r = std::round(x);
    if (std::abs(x - r) > 1e-9) throw EvalError("index is not an integer");
    if (r < 0.0 || r >= static_cast<double>(n_users)) throw EvalError("index out of range");
    return static_cast<std::size_t>(r);
  }

  template <class F>
  static Value zip(const Value& a, const Value& b, F f) {
    Value out;
    if (a.kind == Kind::Scalar && b.kind == Kind::Scalar) {
      out.s = f(a.s, b.s);
      return out;
    }
    out.kind = Kind::Vector;
    const std::size_t n = a.kind == Kind::Vector ? a.v.size() : b.v.size();
    if (a.kind == Kind::Vector && b.kind == Kind::Vector && a.v.size() != b.v.size())
      throw EvalError("vector length mismatch");
    out.v.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      out.v[i] = f(a.kind == Kind::Vector ? a.v[i] : a.s, b.kind == Kind::Vector ? b.v[i] : b.s);
    return out;
  }

  static Value eval(const Node& n, const RewardContext& ctx) {
    switch (n.type) {
      case Node::Type::Literal: return {Kind::Scalar, n.literal, {}};
      case Node::Type::Feature: {
        if (n.name == "slot") return {Kind::Scalar, static_cast<double>(ctx.slot), {}};
        if (n.name == "slot_len") return {Kind::Scalar, ctx.slot_len_s, {}};
        if (n.name == "num_users")
          return {Kind::Scalar, static_cast<double>(ctx.num_users()), {}};
        return {Kind::Vector, 0.0, feature_vector(n.name, ctx)};
      }
      case Node::Type::Unary: {
        Value a = eval(*n.args[0], ctx);
        if (a.kind == Kind::Scalar) a.s = -a.s;
        else
          for (auto& x : a.v) x = -x;
        return a;
      }
      case Node::Type::Binary: {
        const Value a = eval(*n.args[0], ctx);
        const Value b = eval(*n.args[1], ctx);
        switch (n.op) {
          case Op::Add: return zip(a, b, [](double x, double y) { return x + y; });
          case Op::Sub: return zip(a, b, [](double x, double y) { return x - y; });
          case Op::Mul: return zip(a, b, [](double x, double y) { return x * y; });
          case Op::Div:
            return zip(a, b, [](double x, double y) {
              if (y == 0.0) throw EvalError("division by zero");
              return x / y;
            });
          case Op::Lt: return zip(a, b, [](double x, double y) { return x < y ? 1.0 : 0.0; });
          case Op::Le: return zip(a, b, [](double x, double y) { return x <= y ? 1.0 : 0.0; });
          case Op::Gt: return zip(a, b, [](double x, double y) { return x > y ? 1.0 : 0.0; });
          case Op::Ge: return zip(a, b, [](double x, double y) { return x >= y ? 1.0 : 0.0; });
          case Op::Eq: return zip(a, b, [](double x, double y) { return x == y ? 1.0 : 0.0; });
          case Op::Neg: break;
        }
        throw EvalError("bad binary operator");
      }
      case Node::Type::Index: {
        const Value base = eval(*n.args[0], ctx);
        const Value idx = eval(*n.args[1], ctx);
        return {Kind::Scalar, base.v.at(as_index(idx.s, base.v.size())), {}};
      }
      case Node::Type::Call: return eval_call(n, ctx);
    }
    throw EvalError("unreachable node type");
  }

  static Value eval_call(const Node& n, const RewardContext& ctx) {
    std::vector<Value> args;
    for (const auto& a : n.args) args.push_back(eval(*a, ctx));
    auto vec_of = [](const Value& v) -> const std::vector<double>& {
      if (v.kind != Kind::Vector) throw EvalError("expected a vector argument");
      return v.v;
    };
    if (n.name == "sum") {
      double s = 0.0;
      for (double x : vec_of(args[0])) s += x;
      return {Kind::Scalar, s, {}};
    }
    if (n.name == "mean") {
      const auto& v = vec_of(args[0]);
      if (v.empty()) throw EvalError("mean of empty vector");
      double s = 0.0;
      for (double x : v) s += x;
      return {Kind::Scalar, s / static_cast<double>(v.size()), {}};
    }
    if (n.name == "min" || n.name == "max") {
      const bool is_min = n.name == "min";
      if (args.size() == 1) {
        const auto& v = vec_of(args[0]);
        if (v.empty()) throw EvalError("reduction of empty vector");
        double best = v[0];
        for (double x : v) best = is_min ? std::min(best, x) : std::max(best, x);
        return {Kind::Scalar, best, {}};
      }
      return zip(args[0], args[1], [is_min](double x, double y) {
        return is_min ? std::min(x, y) : std::max(x, y);
      });
    }
    if (n.name == "argmax") {
      const auto& v = vec_of(args[0]);
      if (v.empty()) throw EvalError("argmax of empty vector");
      std::size_t best = 0;
      for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
      return {Kind::Scalar, static_cast<double>(best), {}};
    }
    if (n.name == "var_q") {
      try {
        return {Kind::Scalar, var_q(vec_of(args[0]), args[1].s), {}};
      } catch (const std::invalid_argument& e) {
        throw EvalError(e.what());
      }
    }
    if (n.name == "clamp") {
      const double lo = args[1].s, hi = args[2].s;
      if (lo > hi) throw EvalError("clamp bounds inverted");
      Value out = args[0];
      if (out.kind == Kind::Scalar) out.s = std::clamp(out.s, lo, hi);
      else
        for (auto& x : out.v) x = std::clamp(x, lo, hi);
      return out;
    }
    if (n.name == "indicator") {
      Value out = args[0];
      if (out.kind == Kind::Scalar) out.s = out.s != 0.0 ? 1.0 : 0.0;
      else
        for (auto& x : out.v) x = x != 0.0 ? 1.0 : 0.0;
      return out;
    }
    if (n.name == "dist_to" || n.name == "delta_dist_to") {
      const auto v = feature_vector(n.name, ctx);
      return {Kind::Scalar, v.at(as_index(args[0].s, v.size())), {}};
    }
    throw EvalError("unknown function " + n.name);
  }

  // ---- canonical printing ----

  static std::string number(double v) {
    // shortest representation that round-trips
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
      std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
      if (std::stod(buf) == v) break;
    }
    return buf;
  }

  static int precedence(const Node& n) {
    if (n.type == Node::Type::Binary) {
      switch (n.op) {
        case Op::Lt: case Op::Le: case Op::Gt: case Op::Ge: case Op::Eq: return 1;
        case Op::Add: case Op::Sub: return 2;
        case Op::Mul: case Op::Div: return 3;
        default: break;
      }
    }
    if (n.type == Node::Type::Unary) return 4;
    return 5;
  }

  static std::string print(const Node& n, int parent_prec) {
    std::string out;
    const int prec = precedence(n);
    switch (n.type) {
      case Node::Type::Literal: out = number(n.literal); break;
      case Node::Type::Feature: out = n.name; break;
      case Node::Type::Unary: out = "-" + print(*n.args[0], prec); break;
      case Node::Type::Binary: {
        const char* op = n.op == Op::Add   ? " + "
                         : n.op == Op::Sub ? " - "
                         : n.op == Op::Mul ? "*"
                         : n.op == Op::Div ? "/"
                         : n.op == Op::Lt  ? " < "
                         : n.op == Op::Le  ? " <= "
                         : n.op == Op::Gt  ? " > "
                         : n.op == Op::Ge  ? " >= "
                                           : " == ";
        out = print(*n.args[0], prec) + op + print(*n.args[1], prec + 1);
        break;
      }
      case Node::Type::Index:
        out = print(*n.args[0], prec) + "[" + print(*n.args[1], 0) + "]";
        break;
      case Node::Type::Call: {
        out = n.name + "(";
        for (std::size_t i = 0; i < n.args.size(); ++i) {
          if (i) out += ", ";
          out += print(*n.args[i], 0);
        }
        out += ")";
        break;
      }
    }
    if (prec < parent_prec) out = "(" + out + ")";
    return out;
  }

  static bool equal(const Node& a, const Node& b) {
    if (a.type != b.type || a.name != b.name || a.args.size() != b.args.size()) return false;
    if (a.type == Node::Type::Literal && a.literal != b.literal) return false;
    if ((a.type == Node::Type::Binary || a.type == Node::Type::Unary) && a.op != b.op)
      return false;
    for (std::size_t i = 0; i < a.args.size(); ++i)
      if (!equal(*a.args[i], *b.args[i])) return false;
    return true;
  }

  NodePtr root_;
};

// The risk-aware reward expressed in the DSL; evaluates identically to the
// native implementation.
inline std::string canonical_risk_program_text(const RiskRewardParams& p) {
  auto num = [](double v) {
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
      std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
      if (std::stod(buf) == v) break;
    }
    return std::string(buf);
  };
  return "-var_q(backlog, " + num(p.q) + ") + " + num(p.mu) +
         "*sum(min(backlog, rate*slot_len)) + " + num(p.gamma_d) +
         "*delta_dist_to(argmax(backlog))";
}

}  // namespace laenet::dsl
