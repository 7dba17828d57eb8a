#pragma once

#include <memory>
#include <span>
#include <string>

namespace bhom {

/// A compiled scalar expression over slow variables x1..x3 and fast variables
/// y1..y3.
///
/// Grammar:
///   expr   := term (('+' | '-') term)*
///   term   := unary (('*' | '/') unary)*
///   unary  := ('+' | '-') unary | power
///   power  := atom ('^' unary)?
///   atom   := number | 'pi' | var | func '(' expr ')' | '(' expr ')'
///   var    := 'x1'|'x2'|'x3'|'y1'|'y2'|'y3'
///   func   := sin | cos | tan | exp | log | sqrt | abs | floor | sign
///
/// Parse errors throw ConfigError with the column of the offending token.
class Expr {
 public:
  Expr();  // the constant 0
  static Expr parse(const std::string& source);
  static Expr constant(double c);

  /// Missing coordinates evaluate as 0.
  double operator()(std::span<const double> x, std::span<const double> y) const;
  double of_y(std::span<const double> y) const { return (*this)({}, y); }

  const std::string& source() const { return source_; }
  bool depends_on_x() const;
  bool depends_on_y() const;
  /// True when the expression is a numeric constant.
  bool is_constant() const { return !depends_on_x() && !depends_on_y(); }

  struct Node;

 private:
  std::shared_ptr<const Node> root_;
  std::string source_;
};

}  // namespace bhom
