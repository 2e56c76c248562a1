#include "bdsde/expression.hpp"

#include "bdsde/types.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

namespace bdsde {

namespace detail {

enum class Op : int {
  kConst,
  kVar,
  // unary
  kNeg,
  kSin,
  kCos,
  kTan,
  kExp,
  kLog,
  kSqrt,
  kAbs,
  kTanh,
  kSinh,
  kCosh,
  kAtan,
  kSign,
  kStep,
  // binary
  kAdd,
  kSub,
  kMul,
  kDiv,
  kPow,
  kMax,
  kMin,
};

struct ExprNode {
  Op op;
  double value = 0.0;
  int var = -1;
  std::shared_ptr<const ExprNode> a;
  std::shared_ptr<const ExprNode> b;
};

}  // namespace detail

namespace {

using detail::ExprNode;
using detail::Op;
using NodePtr = std::shared_ptr<const ExprNode>;

bool is_unary(Op op) { return op >= Op::kNeg && op <= Op::kStep; }
bool is_binary(Op op) { return op >= Op::kAdd; }

NodePtr mk_const(double v) { return std::make_shared<const ExprNode>(ExprNode{Op::kConst, v, -1, nullptr, nullptr}); }
NodePtr mk_var(int i) { return std::make_shared<const ExprNode>(ExprNode{Op::kVar, 0.0, i, nullptr, nullptr}); }

bool is_const(const NodePtr& n, double v) { return n->op == Op::kConst && n->value == v; }

double apply_unary(Op op, double x) {
  switch (op) {
    case Op::kNeg: return -x;
    case Op::kSin: return std::sin(x);
    case Op::kCos: return std::cos(x);
    case Op::kTan: return std::tan(x);
    case Op::kExp: return std::exp(x);
    case Op::kLog: return std::log(x);
    case Op::kSqrt: return std::sqrt(x);
    case Op::kAbs: return std::abs(x);
    case Op::kTanh: return std::tanh(x);
    case Op::kSinh: return std::sinh(x);
    case Op::kCosh: return std::cosh(x);
    case Op::kAtan: return std::atan(x);
    case Op::kSign: return (x > 0.0) - (x < 0.0);
    case Op::kStep: return x >= 0.0 ? 1.0 : 0.0;
    default: return 0.0;
  }
}

double apply_binary(Op op, double x, double y) {
  switch (op) {
    case Op::kAdd: return x + y;
    case Op::kSub: return x - y;
    case Op::kMul: return x * y;
    case Op::kDiv: return x / y;
    case Op::kPow: return std::pow(x, y);
    case Op::kMax: return std::max(x, y);
    case Op::kMin: return std::min(x, y);
    default: return 0.0;
  }
}

NodePtr mk_unary(Op op, NodePtr a) {
  if (a->op == Op::kConst) return mk_const(apply_unary(op, a->value));
  if (op == Op::kNeg && a->op == Op::kNeg) return a->a;
  return std::make_shared<const ExprNode>(ExprNode{op, 0.0, -1, std::move(a), nullptr});
}

NodePtr mk_binary(Op op, NodePtr a, NodePtr b) {
  if (a->op == Op::kConst && b->op == Op::kConst) return mk_const(apply_binary(op, a->value, b->value));
  switch (op) {
    case Op::kAdd:
      if (is_const(a, 0.0)) return b;
      if (is_const(b, 0.0)) return a;
      break;
    case Op::kSub:
      if (is_const(b, 0.0)) return a;
      if (is_const(a, 0.0)) return mk_unary(Op::kNeg, b);
      break;
    case Op::kMul:
      if (is_const(a, 0.0) || is_const(b, 0.0)) return mk_const(0.0);
      if (is_const(a, 1.0)) return b;
      if (is_const(b, 1.0)) return a;
      break;
    case Op::kDiv:
      if (is_const(a, 0.0)) return mk_const(0.0);
      if (is_const(b, 1.0)) return a;
      break;
    case Op::kPow:
      if (is_const(b, 1.0)) return a;
      if (is_const(b, 0.0)) return mk_const(1.0);
      break;
    default: break;
  }
  return std::make_shared<const ExprNode>(ExprNode{op, 0.0, -1, std::move(a), std::move(b)});
}

NodePtr add(NodePtr a, NodePtr b) { return mk_binary(Op::kAdd, std::move(a), std::move(b)); }
NodePtr sub(NodePtr a, NodePtr b) { return mk_binary(Op::kSub, std::move(a), std::move(b)); }
NodePtr mul(NodePtr a, NodePtr b) { return mk_binary(Op::kMul, std::move(a), std::move(b)); }
NodePtr div(NodePtr a, NodePtr b) { return mk_binary(Op::kDiv, std::move(a), std::move(b)); }

NodePtr differentiate(const NodePtr& n, int var) {
  const NodePtr& a = n->a;
  const NodePtr& b = n->b;
  switch (n->op) {
    case Op::kConst: return mk_const(0.0);
    case Op::kVar: return mk_const(n->var == var ? 1.0 : 0.0);
    default: break;
  }
  const NodePtr da = differentiate(a, var);
  if (is_unary(n->op)) {
    if (is_const(da, 0.0)) return mk_const(0.0);
    switch (n->op) {
      case Op::kNeg: return mk_unary(Op::kNeg, da);
      case Op::kSin: return mul(mk_unary(Op::kCos, a), da);
      case Op::kCos: return mk_unary(Op::kNeg, mul(mk_unary(Op::kSin, a), da));
      case Op::kTan: return div(da, mk_binary(Op::kPow, mk_unary(Op::kCos, a), mk_const(2.0)));
      case Op::kExp: return mul(n, da);
      case Op::kLog: return div(da, a);
      case Op::kSqrt: return div(da, mul(mk_const(2.0), n));
      case Op::kAbs: return mul(mk_unary(Op::kSign, a), da);
      case Op::kTanh: return mul(sub(mk_const(1.0), mul(n, n)), da);
      case Op::kSinh: return mul(mk_unary(Op::kCosh, a), da);
      case Op::kCosh: return mul(mk_unary(Op::kSinh, a), da);
      case Op::kAtan: return div(da, add(mk_const(1.0), mul(a, a)));
      default: return mk_const(0.0);
    }
  }
  const NodePtr db = differentiate(b, var);
  switch (n->op) {
    case Op::kAdd: return add(da, db);
    case Op::kSub: return sub(da, db);
    case Op::kMul: return add(mul(da, b), mul(a, db));
    case Op::kDiv: return div(sub(mul(da, b), mul(a, db)), mul(b, b));
    case Op::kPow:
      if (b->op == Op::kConst) {
        return mul(mul(b, mk_binary(Op::kPow, a, mk_const(b->value - 1.0))), da);
      }
      return mul(n, add(mul(db, mk_unary(Op::kLog, a)), div(mul(b, da), a)));
    case Op::kMax: {
      const NodePtr s = mk_unary(Op::kStep, sub(a, b));
      return add(mul(s, da), mul(sub(mk_const(1.0), s), db));
    }
    case Op::kMin: {
      const NodePtr s = mk_unary(Op::kStep, sub(b, a));
      return add(mul(s, da), mul(sub(mk_const(1.0), s), db));
    }
    default: return mk_const(0.0);
  }
}

bool node_depends_on(const NodePtr& n, int var) {
  if (!n) return false;
  if (n->op == Op::kVar) return n->var == var;
  return node_depends_on(n->a, var) || node_depends_on(n->b, var);
}

const char* op_name(Op op) {
  switch (op) {
    case Op::kSin: return "sin";
    case Op::kCos: return "cos";
    case Op::kTan: return "tan";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSqrt: return "sqrt";
    case Op::kAbs: return "abs";
    case Op::kTanh: return "tanh";
    case Op::kSinh: return "sinh";
    case Op::kCosh: return "cosh";
    case Op::kAtan: return "atan";
    case Op::kSign: return "sign";
    case Op::kStep: return "step";
    case Op::kMax: return "max";
    case Op::kMin: return "min";
    default: return "?";
  }
}

void render(const NodePtr& n, std::ostream& os) {
  switch (n->op) {
    case Op::kConst: {
      std::ostringstream tmp;
      tmp.precision(17);
      tmp << n->value;
      os << (n->value < 0 ? "(" + tmp.str() + ")" : tmp.str());
      return;
    }
    case Op::kVar: os << "v" << n->var; return;
    case Op::kNeg: os << "(-"; render(n->a, os); os << ")"; return;
    case Op::kAdd: case Op::kSub: case Op::kMul: case Op::kDiv: case Op::kPow: {
      const char sym = n->op == Op::kAdd ? '+' : n->op == Op::kSub ? '-' : n->op == Op::kMul ? '*'
                       : n->op == Op::kDiv ? '/' : '^';
      os << "(";
      render(n->a, os);
      os << sym;
      render(n->b, os);
      os << ")";
      return;
    }
    case Op::kMax: case Op::kMin:
      os << op_name(n->op) << "(";
      render(n->a, os);
      os << ",";
      render(n->b, os);
      os << ")";
      return;
    default:
      os << op_name(n->op) << "(";
      render(n->a, os);
      os << ")";
      return;
  }
}

class Parser {
 public:
  Parser(std::string_view text, std::span<const std::string> vars) : text_(text), vars_(vars) {}

  NodePtr parse() {
    NodePtr e = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigurationError("expression '" + std::string(text_) + "': " + msg + " at offset " +
                             std::to_string(pos_));
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+')) lhs = add(lhs, term());
      else if (accept('-')) lhs = sub(lhs, term());
      else return lhs;
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      skip_ws();
      if (pos_ + 1 < text_.size() && text_[pos_] == '*' && text_[pos_ + 1] == '*') return lhs;
      if (accept('*')) lhs = mul(lhs, unary());
      else if (accept('/')) lhs = div(lhs, unary());
      else return lhs;
    }
  }

  NodePtr unary() {
    if (accept('-')) return mk_unary(Op::kNeg, unary());
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    skip_ws();
    if (accept('^')) return mk_binary(Op::kPow, base, unary());
    if (pos_ + 1 < text_.size() && text_[pos_] == '*' && text_[pos_ + 1] == '*') {
      pos_ += 2;
      return mk_binary(Op::kPow, base, unary());
    }
    return base;
  }

  NodePtr primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail(std::string("unexpected character '") + c + "'");
  }

  NodePtr number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
      ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
      if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
        pos_ = p;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
    }
    double v = 0.0;
    const auto* first = text_.data() + start;
    const auto* last = text_.data() + pos_;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) fail("malformed number");
    return mk_const(v);
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    const std::string name(text_.substr(start, pos_ - start));
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == '(') {
      ++pos_;
      static const std::map<std::string, Op> kUnary = {
          {"sin", Op::kSin},   {"cos", Op::kCos},   {"tan", Op::kTan},   {"exp", Op::kExp},
          {"log", Op::kLog},   {"sqrt", Op::kSqrt}, {"abs", Op::kAbs},   {"tanh", Op::kTanh},
          {"sinh", Op::kSinh}, {"cosh", Op::kCosh}, {"atan", Op::kAtan}, {"sign", Op::kSign},
          {"step", Op::kStep}};
      static const std::map<std::string, Op> kBinary = {{"max", Op::kMax}, {"min", Op::kMin}, {"pow", Op::kPow}};
      if (auto it = kUnary.find(name); it != kUnary.end()) {
        NodePtr arg = expr();
        expect(')');
        return mk_unary(it->second, arg);
      }
      if (auto it = kBinary.find(name); it != kBinary.end()) {
        NodePtr a = expr();
        expect(',');
        NodePtr b = expr();
        expect(')');
        return mk_binary(it->second, a, b);
      }
      fail("unknown function '" + name + "'");
    }
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (vars_[i] == name) return mk_var(static_cast<int>(i));
    }
    if (name == "pi") return mk_const(std::numbers::pi);
    std::string known;
    for (const auto& v : vars_) known += (known.empty() ? "" : ", ") + v;
    fail("unknown variable '" + name + "' (known: " + known + ")");
  }

  std::string_view text_;
  std::span<const std::string> vars_;
  std::size_t pos_ = 0;
};

void emit(const NodePtr& n, std::vector<std::array<double, 3>>& out) {
  // Each instruction is encoded as (op, slot, value) while building.
  if (n->op == Op::kConst) {
    out.push_back({static_cast<double>(Op::kConst), -1.0, n->value});
    return;
  }
  if (n->op == Op::kVar) {
    out.push_back({static_cast<double>(Op::kVar), static_cast<double>(n->var), 0.0});
    return;
  }
  emit(n->a, out);
  if (n->b) emit(n->b, out);
  out.push_back({static_cast<double>(n->op), -1.0, 0.0});
}

}  // namespace

Expression::Expression() : Expression(mk_const(0.0), 0, "0") {}

Expression::Expression(std::shared_ptr<const detail::ExprNode> root, int n_vars, std::string text)
    : root_(std::move(root)), n_vars_(n_vars), text_(std::move(text)) {
  compile();
}

Expression Expression::parse(std::string_view text, std::span<const std::string> variables) {
  Parser p(text, variables);
  NodePtr root = p.parse();
  std::string trimmed(text);
  const auto b = trimmed.find_first_not_of(" \t");
  const auto e = trimmed.find_last_not_of(" \t");
  trimmed = b == std::string::npos ? std::string() : trimmed.substr(b, e - b + 1);
  return Expression(std::move(root), static_cast<int>(variables.size()), trimmed);
}

Expression Expression::constant(double value) {
  std::ostringstream os;
  os.precision(17);
  os << value;
  return Expression(mk_const(value), 0, os.str());
}

void Expression::compile() {
  std::vector<std::array<double, 3>> raw;
  emit(root_, raw);
  program_.clear();
  program_.reserve(raw.size());
  int depth = 0;
  max_stack_ = 0;
  for (const auto& r : raw) {
    const Op op = static_cast<Op>(static_cast<int>(r[0]));
    program_.push_back({static_cast<int>(op), static_cast<int>(r[1]), r[2]});
    if (op == Op::kConst || op == Op::kVar) ++depth;
    else if (is_binary(op)) --depth;
    max_stack_ = std::max(max_stack_, depth);
  }
}

double Expression::eval(std::span<const double> vars) const {
  constexpr int kInline = 32;
  std::array<double, kInline> inline_stack;
  std::vector<double> heap_stack;
  double* st = inline_stack.data();
  if (max_stack_ > kInline) {
    heap_stack.resize(static_cast<std::size_t>(max_stack_));
    st = heap_stack.data();
  }
  int top = -1;
  for (const Instr& in : program_) {
    const Op op = static_cast<Op>(in.op);
    if (op == Op::kConst) {
      st[++top] = in.value;
    } else if (op == Op::kVar) {
      st[++top] = vars[static_cast<std::size_t>(in.slot)];
    } else if (is_unary(op)) {
      st[top] = apply_unary(op, st[top]);
    } else {
      const double rhs = st[top--];
      st[top] = apply_binary(op, st[top], rhs);
    }
  }
  return st[0];
}

Expression Expression::derivative(int index) const {
  NodePtr d = differentiate(root_, index);
  std::ostringstream os;
  render(d, os);
  return Expression(std::move(d), n_vars_, os.str());
}

bool Expression::is_constant() const { return root_->op == Op::kConst; }

double Expression::constant_value() const { return root_->value; }

bool Expression::depends_on(int index) const { return node_depends_on(root_, index); }

}  // namespace bdsde
