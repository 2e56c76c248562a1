#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bdsde {

namespace detail {
struct ExprNode;
}

/// Scalar arithmetic expression over named variables, compiled to a postfix
/// program. Used to read coefficient functions from experiment files and to
/// derive their analytic partials symbolically.
///
/// Grammar: numbers, variables, + - * / ^ (or **), parentheses, and the
/// functions sin cos tan exp log sqrt abs tanh sinh cosh atan sign step
/// max(a,b) min(a,b) pow(a,b). The constant `pi` is predefined.
class Expression {
 public:
  Expression();

  static Expression parse(std::string_view text, std::span<const std::string> variables);
  static Expression constant(double value);

  double eval(std::span<const double> vars) const;
  double operator()(std::span<const double> vars) const { return eval(vars); }

  /// Symbolic partial derivative with respect to variable `index`.
  Expression derivative(int index) const;

  bool is_constant() const;
  /// Only meaningful when is_constant().
  double constant_value() const;
  /// True when the expression reads variable `index`.
  bool depends_on(int index) const;

  /// Source text for parsed expressions, a rendering for derived ones.
  const std::string& text() const { return text_; }
  int n_variables() const { return n_vars_; }

 private:
  explicit Expression(std::shared_ptr<const detail::ExprNode> root, int n_vars, std::string text);
  void compile();

  struct Instr {
    int op;
    int slot;
    double value;
  };

  std::shared_ptr<const detail::ExprNode> root_;
  std::vector<Instr> program_;
  int max_stack_ = 0;
  int n_vars_ = 0;
  std::string text_;
};

}  // namespace bdsde
