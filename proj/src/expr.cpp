#include "bhom/expr.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "bhom/error.hpp"

namespace bhom {

struct Expr::Node {
  enum class Op { Const, VarX, VarY, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Tan, Exp, Log, Sqrt, Abs, Floor, Sign };
  Op op = Op::Const;
  double value = 0.0;
  int index = 0;
  std::shared_ptr<const Node> lhs, rhs;

  double eval(std::span<const double> x, std::span<const double> y) const {
    switch (op) {
      case Op::Const: return value;
      case Op::VarX: return index < static_cast<int>(x.size()) ? x[index] : 0.0;
      case Op::VarY: return index < static_cast<int>(y.size()) ? y[index] : 0.0;
      case Op::Neg: return -lhs->eval(x, y);
      case Op::Add: return lhs->eval(x, y) + rhs->eval(x, y);
      case Op::Sub: return lhs->eval(x, y) - rhs->eval(x, y);
      case Op::Mul: return lhs->eval(x, y) * rhs->eval(x, y);
      case Op::Div: return lhs->eval(x, y) / rhs->eval(x, y);
      case Op::Pow: return std::pow(lhs->eval(x, y), rhs->eval(x, y));
      case Op::Sin: return std::sin(lhs->eval(x, y));
      case Op::Cos: return std::cos(lhs->eval(x, y));
      case Op::Tan: return std::tan(lhs->eval(x, y));
      case Op::Exp: return std::exp(lhs->eval(x, y));
      case Op::Log: return std::log(lhs->eval(x, y));
      case Op::Sqrt: return std::sqrt(lhs->eval(x, y));
      case Op::Abs: return std::abs(lhs->eval(x, y));
      case Op::Floor: return std::floor(lhs->eval(x, y));
      case Op::Sign: {
        const double v = lhs->eval(x, y);
        return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0);
      }
    }
    return 0.0;
  }

  bool uses(Op var) const {
    if (op == var) return true;
    return (lhs && lhs->uses(var)) || (rhs && rhs->uses(var));
  }
};

namespace {

using Node = Expr::Node;
using NodePtr = std::shared_ptr<const Node>;

NodePtr make_const(double v) {
  auto n = std::make_shared<Node>();
  n->value = v;
  return n;
}

NodePtr make_op(Node::Op op, NodePtr a, NodePtr b = nullptr) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  NodePtr parse() {
    NodePtr e = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    std::ostringstream os;
    os << "expression '" << s_ << "': " << msg << " at column " << pos_ + 1;
    throw ConfigError(os.str(), "expression");
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+')) lhs = make_op(Node::Op::Add, lhs, term());
      else if (accept('-')) lhs = make_op(Node::Op::Sub, lhs, term());
      else return lhs;
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (accept('*')) lhs = make_op(Node::Op::Mul, lhs, unary());
      else if (accept('/')) lhs = make_op(Node::Op::Div, lhs, unary());
      else return lhs;
    }
  }

  NodePtr unary() {
    if (accept('-')) return make_op(Node::Op::Neg, unary());
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = atom();
    if (accept('^')) return make_op(Node::Op::Pow, base, unary());
    return base;
  }

  NodePtr atom() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(s_.substr(pos_), &used);
      } catch (const std::exception&) {
        fail("malformed number");
      }
      pos_ += used;
      return make_const(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      const std::string id = s_.substr(start, pos_ - start);
      if (id == "pi") return make_const(std::numbers::pi);
      if (id.size() == 2 && (id[0] == 'x' || id[0] == 'y') && id[1] >= '1' && id[1] <= '3') {
        auto n = std::make_shared<Node>();
        n->op = id[0] == 'x' ? Node::Op::VarX : Node::Op::VarY;
        n->index = id[1] - '1';
        return n;
      }
      static const std::vector<std::pair<std::string, Node::Op>> funcs = {
          {"sin", Node::Op::Sin},   {"cos", Node::Op::Cos}, {"tan", Node::Op::Tan}, {"exp", Node::Op::Exp},
          {"log", Node::Op::Log},   {"sqrt", Node::Op::Sqrt}, {"abs", Node::Op::Abs},
          {"floor", Node::Op::Floor}, {"sign", Node::Op::Sign}};
      for (const auto& [name, op] : funcs) {
        if (id == name) {
          if (!accept('(')) fail("expected '(' after " + name);
          NodePtr arg = expr();
          if (!accept(')')) fail("expected ')'");
          return make_op(op, arg);
        }
      }
      pos_ = start;
      fail("unknown identifier '" + id + "'");
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr::Expr() : root_(make_const(0.0)), source_("0") {}

Expr Expr::parse(const std::string& source) {
  Expr e;
  e.root_ = Parser(source).parse();
  e.source_ = source;
  return e;
}

Expr Expr::constant(double c) {
  Expr e;
  e.root_ = make_const(c);
  std::ostringstream os;
  os.precision(17);
  os << c;
  e.source_ = os.str();
  return e;
}

double Expr::operator()(std::span<const double> x, std::span<const double> y) const {
  return root_->eval(x, y);
}

bool Expr::depends_on_x() const { return root_->uses(Node::Op::VarX); }
bool Expr::depends_on_y() const { return root_->uses(Node::Op::VarY); }

}  // namespace bhom
