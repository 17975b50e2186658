#include "avar/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "avar/errors.hpp"

namespace avar::expr {

struct Expression::Node {
  enum class Op { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Exp, Log };
  Op op;
  double value = 0.0;
  std::shared_ptr<const Node> lhs, rhs;

  double eval(double x) const {
    switch (op) {
      case Op::Const: return value;
      case Op::Var: return x;
      case Op::Add: return lhs->eval(x) + rhs->eval(x);
      case Op::Sub: return lhs->eval(x) - rhs->eval(x);
      case Op::Mul: return lhs->eval(x) * rhs->eval(x);
      case Op::Div: return lhs->eval(x) / rhs->eval(x);
      case Op::Pow: return std::pow(lhs->eval(x), rhs->eval(x));
      case Op::Neg: return -lhs->eval(x);
      case Op::Exp: return std::exp(lhs->eval(x));
      case Op::Log: return std::log(lhs->eval(x));
    }
    return 0.0;
  }
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

[[noreturn]] void fail(const std::string& text, std::size_t pos,
                       const std::string& what) {
  throw Error(ErrorKind::InvalidInput, "BadExpression",
              "expression '" + text + "': " + what + " at position " +
                  std::to_string(pos));
}

class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text) {}

  NodePtr run() {
    NodePtr e = parse_sum();
    skip_ws();
    if (pos_ != text_.size()) fail(text_, pos_, "trailing input");
    return e;
  }

 private:
  NodePtr make(Node::Op op, NodePtr lhs = nullptr, NodePtr rhs = nullptr,
               double value = 0.0) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    n->value = value;
    return n;
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr parse_sum() {
    NodePtr e = parse_term();
    for (;;) {
      if (eat('+')) e = make(Node::Op::Add, e, parse_term());
      else if (eat('-')) e = make(Node::Op::Sub, e, parse_term());
      else return e;
    }
  }

  NodePtr parse_term() {
    NodePtr e = parse_unary();
    for (;;) {
      if (eat('*')) e = make(Node::Op::Mul, e, parse_unary());
      else if (eat('/')) e = make(Node::Op::Div, e, parse_unary());
      else return e;
    }
  }

  NodePtr parse_unary() {
    if (eat('-')) return make(Node::Op::Neg, parse_unary());
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_primary();
    if (eat('^')) return make(Node::Op::Pow, base, parse_unary());
    return base;
  }

  NodePtr parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail(text_, pos_, "unexpected end");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = parse_sum();
      if (!eat(')')) fail(text_, pos_, "missing ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = text_.c_str() + pos_;
      char* end = nullptr;
      double v = std::strtod(begin, &end);
      if (end == begin) fail(text_, pos_, "bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      return make(Node::Op::Const, nullptr, nullptr, v);
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < text_.size() &&
             std::isalpha(static_cast<unsigned char>(text_[pos_])))
        ++pos_;
      std::string word = text_.substr(start, pos_ - start);
      if (word == "x") return make(Node::Op::Var);
      Node::Op fn;
      if (word == "exp") fn = Node::Op::Exp;
      else if (word == "log") fn = Node::Op::Log;
      else fail(text_, start, "unknown symbol '" + word + "'");
      if (!eat('(')) fail(text_, pos_, "expected '(' after " + word);
      NodePtr arg = parse_sum();
      if (!eat(')')) fail(text_, pos_, "missing ')'");
      return make(fn, arg);
    }
    fail(text_, pos_, std::string("unexpected character '") + c + "'");
  }

  const std::string& text_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression Expression::parse(const std::string& text) {
  Expression e;
  e.root_ = Parser(text).run();
  e.text_ = text;
  return e;
}

double Expression::operator()(double x) const { return root_->eval(x); }

}  // namespace avar::expr
