#include "idg/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <utility>

namespace idg {

namespace {

enum class UnOp { Neg, Sin, Cos, Tan, Exp, Sqrt, Abs };
enum class BinOp { Add, Sub, Mul, Div, Pow };

const char* un_name(UnOp op) {
  switch (op) {
    case UnOp::Neg: return "-";
    case UnOp::Sin: return "sin";
    case UnOp::Cos: return "cos";
    case UnOp::Tan: return "tan";
    case UnOp::Exp: return "exp";
    case UnOp::Sqrt: return "sqrt";
    case UnOp::Abs: return "abs";
  }
  return "?";
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

struct Expr::Node {
  enum class Kind { Const, Var, Unary, Binary } kind;
  double value = 0.0;  // Const
  int var = -1;        // Var
  UnOp un = UnOp::Neg;
  BinOp bin = BinOp::Add;
  NodePtr a, b;
};

namespace detail {

using NodePtr = std::shared_ptr<const Expr::Node>;
using Kind = Expr::Node::Kind;

NodePtr make_const(double v) {
  auto n = std::make_shared<Expr::Node>();
  n->kind = Kind::Const;
  n->value = v;
  return n;
}

NodePtr make_var(int index) {
  if (index < 0) throw std::invalid_argument("variable index must be >= 0");
  auto n = std::make_shared<Expr::Node>();
  n->kind = Kind::Var;
  n->var = index;
  return n;
}

bool is_const(const NodePtr& n, double v) {
  return n->kind == Kind::Const && n->value == v;
}

double eval_node(const Expr::Node& n, std::span<const double> x);

NodePtr make_unary(UnOp op, NodePtr a) {
  if (a->kind == Kind::Const) {
    auto wrap = std::make_shared<Expr::Node>();
    wrap->kind = Kind::Unary;
    wrap->un = op;
    wrap->a = a;
    return make_const(eval_node(*wrap, {}));
  }
  if (op == UnOp::Neg && a->kind == Kind::Unary && a->un == UnOp::Neg) return a->a;
  auto n = std::make_shared<Expr::Node>();
  n->kind = Kind::Unary;
  n->un = op;
  n->a = std::move(a);
  return n;
}

NodePtr make_binary(BinOp op, NodePtr a, NodePtr b) {
  if (a->kind == Kind::Const && b->kind == Kind::Const) {
    auto n = std::make_shared<Expr::Node>();
    n->kind = Kind::Binary;
    n->bin = op;
    n->a = a;
    n->b = b;
    return make_const(eval_node(*n, {}));
  }
  switch (op) {
    case BinOp::Add:
      if (is_const(a, 0)) return b;
      if (is_const(b, 0)) return a;
      break;
    case BinOp::Sub:
      if (is_const(b, 0)) return a;
      if (is_const(a, 0)) return make_unary(UnOp::Neg, std::move(b));
      break;
    case BinOp::Mul:
      if (is_const(a, 0) || is_const(b, 0)) return make_const(0.0);
      if (is_const(a, 1)) return b;
      if (is_const(b, 1)) return a;
      break;
    case BinOp::Div:
      if (is_const(a, 0)) return make_const(0.0);
      if (is_const(b, 1)) return a;
      break;
    case BinOp::Pow:
      if (b->kind != Kind::Const)
        throw std::invalid_argument("exponent must be a constant");
      if (is_const(b, 1)) return a;
      if (is_const(b, 0)) return make_const(1.0);
      break;
  }
  auto n = std::make_shared<Expr::Node>();
  n->kind = Kind::Binary;
  n->bin = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

double eval_node(const Expr::Node& n, std::span<const double> x) {
  switch (n.kind) {
    case Kind::Const:
      return n.value;
    case Kind::Var:
      if (n.var >= static_cast<int>(x.size()))
        throw EvalError("state vector too short for variable x" +
                        std::to_string(n.var + 1));
      return x[static_cast<std::size_t>(n.var)];
    case Kind::Unary: {
      double a = eval_node(*n.a, x);
      switch (n.un) {
        case UnOp::Neg: return -a;
        case UnOp::Sin: return std::sin(a);
        case UnOp::Cos: return std::cos(a);
        case UnOp::Tan: return std::tan(a);
        case UnOp::Exp: return std::exp(a);
        case UnOp::Sqrt:
          if (a < 0) throw EvalError("sqrt of negative value");
          return std::sqrt(a);
        case UnOp::Abs: return std::abs(a);
      }
      return 0;
    }
    case Kind::Binary: {
      double a = eval_node(*n.a, x);
      double b = eval_node(*n.b, x);
      switch (n.bin) {
        case BinOp::Add: return a + b;
        case BinOp::Sub: return a - b;
        case BinOp::Mul: return a * b;
        case BinOp::Div:
          if (b == 0) throw EvalError("division by zero");
          return a / b;
        case BinOp::Pow: {
          if (a < 0 && b != std::floor(b))
            throw EvalError("non-integer power of negative base");
          if (a == 0 && b < 0) throw EvalError("zero raised to negative power");
          return std::pow(a, b);
        }
      }
      return 0;
    }
  }
  return 0;
}

NodePtr diff_node(const NodePtr& n, int var) {
  switch (n->kind) {
    case Kind::Const:
      return make_const(0.0);
    case Kind::Var:
      return make_const(n->var == var ? 1.0 : 0.0);
    case Kind::Unary: {
      NodePtr da = diff_node(n->a, var);
      switch (n->un) {
        case UnOp::Neg:
          return make_unary(UnOp::Neg, da);
        case UnOp::Sin:
          return make_binary(BinOp::Mul, make_unary(UnOp::Cos, n->a), da);
        case UnOp::Cos:
          return make_unary(
              UnOp::Neg, make_binary(BinOp::Mul, make_unary(UnOp::Sin, n->a), da));
        case UnOp::Tan: {
          NodePtr sec2 = make_binary(
              BinOp::Div, make_const(1.0),
              make_binary(BinOp::Pow, make_unary(UnOp::Cos, n->a), make_const(2.0)));
          return make_binary(BinOp::Mul, sec2, da);
        }
        case UnOp::Exp:
          return make_binary(BinOp::Mul, make_unary(UnOp::Exp, n->a), da);
        case UnOp::Sqrt: {
          NodePtr denom =
              make_binary(BinOp::Mul, make_const(2.0), make_unary(UnOp::Sqrt, n->a));
          return make_binary(BinOp::Div, da, denom);
        }
        case UnOp::Abs:
          if (da->kind == Kind::Const && da->value == 0.0) return make_const(0.0);
          throw DiffError("abs is not differentiable");
      }
      return make_const(0.0);
    }
    case Kind::Binary: {
      switch (n->bin) {
        case BinOp::Add:
          return make_binary(BinOp::Add, diff_node(n->a, var), diff_node(n->b, var));
        case BinOp::Sub:
          return make_binary(BinOp::Sub, diff_node(n->a, var), diff_node(n->b, var));
        case BinOp::Mul:
          return make_binary(
              BinOp::Add, make_binary(BinOp::Mul, diff_node(n->a, var), n->b),
              make_binary(BinOp::Mul, n->a, diff_node(n->b, var)));
        case BinOp::Div: {
          NodePtr num = make_binary(
              BinOp::Sub, make_binary(BinOp::Mul, diff_node(n->a, var), n->b),
              make_binary(BinOp::Mul, n->a, diff_node(n->b, var)));
          NodePtr den = make_binary(BinOp::Pow, n->b, make_const(2.0));
          return make_binary(BinOp::Div, num, den);
        }
        case BinOp::Pow: {
          // Exponent is constant by construction: d/dx u^c = c u^(c-1) u'.
          double c = n->b->value;
          NodePtr factor = make_binary(
              BinOp::Mul, make_const(c),
              make_binary(BinOp::Pow, n->a, make_const(c - 1.0)));
          return make_binary(BinOp::Mul, factor, diff_node(n->a, var));
        }
      }
      return make_const(0.0);
    }
  }
  return make_const(0.0);
}

int min_state_dim_node(const Expr::Node& n) {
  switch (n.kind) {
    case Kind::Const: return 0;
    case Kind::Var: return n.var + 1;
    case Kind::Unary: return min_state_dim_node(*n.a);
    case Kind::Binary:
      return std::max(min_state_dim_node(*n.a), min_state_dim_node(*n.b));
  }
  return 0;
}

// Printing with minimal parentheses. Precedence: add/sub 1, mul/div 2,
// unary minus 3, pow 4, atoms 5.
int precedence(const Expr::Node& n) {
  switch (n.kind) {
    case Kind::Const: return n.value < 0 ? 3 : 5;
    case Kind::Var: return 5;
    case Kind::Unary: return n.un == UnOp::Neg ? 3 : 5;
    case Kind::Binary:
      switch (n.bin) {
        case BinOp::Add:
        case BinOp::Sub: return 1;
        case BinOp::Mul:
        case BinOp::Div: return 2;
        case BinOp::Pow: return 4;
      }
  }
  return 5;
}

void print_node(const Expr::Node& n, std::string& out);

void print_child(const Expr::Node& child, int min_prec, std::string& out) {
  if (precedence(child) < min_prec) {
    out += '(';
    print_node(child, out);
    out += ')';
  } else {
    print_node(child, out);
  }
}

void print_node(const Expr::Node& n, std::string& out) {
  switch (n.kind) {
    case Kind::Const:
      out += format_double(n.value);
      return;
    case Kind::Var:
      out += 'x';
      out += std::to_string(n.var + 1);
      return;
    case Kind::Unary:
      if (n.un == UnOp::Neg) {
        out += '-';
        print_child(*n.a, 3, out);
      } else {
        out += un_name(n.un);
        out += '(';
        print_node(*n.a, out);
        out += ')';
      }
      return;
    case Kind::Binary: {
      const char* sym = nullptr;
      int prec = precedence(n);
      int left_min = prec, right_min = prec + 1;
      switch (n.bin) {
        case BinOp::Add: sym = "+"; right_min = prec; break;
        case BinOp::Sub: sym = "-"; right_min = prec + 1; break;
        case BinOp::Mul: sym = "*"; right_min = prec; break;
        case BinOp::Div: sym = "/"; right_min = prec + 1; break;
        case BinOp::Pow: sym = "^"; left_min = prec + 1; right_min = prec; break;
      }
      print_child(*n.a, left_min, out);
      out += sym;
      print_child(*n.b, right_min, out);
      return;
    }
  }
}

// --- recursive-descent parser ------------------------------------------

struct Parser {
  std::string_view src;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) pos++;
  }

  bool peek(char c) {
    skip_ws();
    return pos < src.size() && src[pos] == c;
  }

  bool accept(char c) {
    if (peek(c)) {
      pos++;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c))
      throw ParseError(std::string("expected '") + c + "'", pos);
  }

  NodePtr parse_expr() {
    NodePtr lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = make_binary(BinOp::Add, lhs, parse_term());
      } else if (accept('-')) {
        lhs = make_binary(BinOp::Sub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_factor();
    for (;;) {
      if (accept('*')) {
        lhs = make_binary(BinOp::Mul, lhs, parse_factor());
      } else if (accept('/')) {
        lhs = make_binary(BinOp::Div, lhs, parse_factor());
      } else {
        return lhs;
      }
    }
  }

  // factor handles unary minus, which binds looser than '^'.
  NodePtr parse_factor() {
    if (accept('-')) return make_unary(UnOp::Neg, parse_factor());
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_atom();
    if (accept('^')) {
      std::size_t at = pos;
      NodePtr exponent = parse_factor();  // right associative
      if (exponent->kind != Kind::Const)
        throw ParseError("exponent must be a numeric constant", at);
      return make_binary(BinOp::Pow, base, exponent);
    }
    return base;
  }

  NodePtr parse_atom() {
    skip_ws();
    if (pos >= src.size()) throw ParseError("unexpected end of input", pos);
    char c = src[pos];
    if (c == '(') {
      pos++;
      NodePtr inner = parse_expr();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
    throw ParseError(std::string("unexpected character '") + c + "'", pos);
  }

  NodePtr parse_number() {
    std::size_t start = pos;
    while (pos < src.size() &&
           (std::isdigit(static_cast<unsigned char>(src[pos])) || src[pos] == '.'))
      pos++;
    if (pos < src.size() && (src[pos] == 'e' || src[pos] == 'E')) {
      std::size_t mark = pos++;
      if (pos < src.size() && (src[pos] == '+' || src[pos] == '-')) pos++;
      if (pos < src.size() && std::isdigit(static_cast<unsigned char>(src[pos]))) {
        while (pos < src.size() && std::isdigit(static_cast<unsigned char>(src[pos])))
          pos++;
      } else {
        pos = mark;  // 'e' was not an exponent
      }
    }
    std::string text(src.substr(start, pos - start));
    try {
      return make_const(std::stod(text));
    } catch (const std::exception&) {
      throw ParseError("malformed number '" + text + "'", start);
    }
  }

  NodePtr parse_ident() {
    std::size_t start = pos;
    while (pos < src.size() &&
           (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
      pos++;
    std::string name(src.substr(start, pos - start));
    if (name.size() >= 2 && name[0] == 'x') {
      bool digits = true;
      for (std::size_t i = 1; i < name.size(); i++)
        if (!std::isdigit(static_cast<unsigned char>(name[i]))) digits = false;
      if (digits) {
        int index = std::stoi(name.substr(1));
        if (index < 1) throw ParseError("variable indices start at x1", start);
        return make_var(index - 1);
      }
    }
    UnOp fn;
    if (name == "sin") fn = UnOp::Sin;
    else if (name == "cos") fn = UnOp::Cos;
    else if (name == "tan") fn = UnOp::Tan;
    else if (name == "exp") fn = UnOp::Exp;
    else if (name == "sqrt") fn = UnOp::Sqrt;
    else if (name == "abs") fn = UnOp::Abs;
    else throw ParseError("unknown identifier '" + name + "'", start);
    skip_ws();
    if (!accept('('))
      throw ParseError("function '" + name + "' expects an argument list", pos);
    NodePtr arg = parse_expr();
    expect(')');
    return make_unary(fn, arg);
  }
};

}  // namespace detail

Expr::Expr() : node_(detail::make_const(0.0)) {}

Expr Expr::constant(double value) { return Expr(detail::make_const(value)); }

Expr Expr::variable(int index) { return Expr(detail::make_var(index)); }

Expr Expr::parse(std::string_view src) {
  detail::Parser p{src};
  detail::NodePtr root = p.parse_expr();
  p.skip_ws();
  if (p.pos != src.size())
    throw ParseError("trailing input after expression", p.pos);
  return Expr(std::move(root));
}

double Expr::eval(std::span<const double> x) const { return detail::eval_node(*node_, x); }

double Expr::eval(const Eigen::VectorXd& x) const {
  return detail::eval_node(*node_, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

Expr Expr::diff(int var) const { return Expr(detail::diff_node(node_, var)); }

std::string Expr::str() const {
  std::string out;
  detail::print_node(*node_, out);
  return out;
}

int Expr::min_state_dim() const { return detail::min_state_dim_node(*node_); }

bool Expr::is_constant() const { return node_->kind == Node::Kind::Const; }

bool Expr::is_zero() const {
  return node_->kind == Node::Kind::Const && node_->value == 0.0;
}

double Expr::constant_value() const {
  if (!is_constant()) throw std::logic_error("expression is not a constant");
  return node_->value;
}

Expr operator+(const Expr& a, const Expr& b) {
  return Expr(detail::make_binary(BinOp::Add, a.node_, b.node_));
}

Expr operator-(const Expr& a, const Expr& b) {
  return Expr(detail::make_binary(BinOp::Sub, a.node_, b.node_));
}

Expr operator*(const Expr& a, const Expr& b) {
  return Expr(detail::make_binary(BinOp::Mul, a.node_, b.node_));
}

Expr operator/(const Expr& a, const Expr& b) {
  return Expr(detail::make_binary(BinOp::Div, a.node_, b.node_));
}

Expr operator-(const Expr& a) { return Expr(detail::make_unary(UnOp::Neg, a.node_)); }

Expr pow(const Expr& base, double exponent) {
  return Expr(detail::make_binary(BinOp::Pow, base.node_, detail::make_const(exponent)));
}

Expr sin(const Expr& a) { return Expr(detail::make_unary(UnOp::Sin, a.node_)); }
Expr cos(const Expr& a) { return Expr(detail::make_unary(UnOp::Cos, a.node_)); }
Expr tan(const Expr& a) { return Expr(detail::make_unary(UnOp::Tan, a.node_)); }
Expr exp(const Expr& a) { return Expr(detail::make_unary(UnOp::Exp, a.node_)); }
Expr sqrt(const Expr& a) { return Expr(detail::make_unary(UnOp::Sqrt, a.node_)); }
Expr abs(const Expr& a) { return Expr(detail::make_unary(UnOp::Abs, a.node_)); }

Eigen::VectorXd ExprVec::eval(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(size());
  for (int i = 0; i < size(); i++) out[i] = elems_[static_cast<std::size_t>(i)].eval(x);
  return out;
}

int ExprVec::min_state_dim() const {
  int n = 0;
  for (const Expr& e : elems_) n = std::max(n, e.min_state_dim());
  return n;
}

Eigen::MatrixXd ExprMat::eval(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd out(rows_, cols_);
  for (int r = 0; r < rows_; r++)
    for (int c = 0; c < cols_; c++) out(r, c) = (*this)(r, c).eval(x);
  return out;
}

int ExprMat::min_state_dim() const {
  int n = 0;
  for (const Expr& e : elems_) n = std::max(n, e.min_state_dim());
  return n;
}

ExprMat jacobian(const ExprVec& v, int state_dim) {
  ExprMat out(v.size(), state_dim);
  for (int r = 0; r < v.size(); r++)
    for (int c = 0; c < state_dim; c++) out(r, c) = v[r].diff(c);
  return out;
}

ExprVec gradient(const Expr& e, int state_dim) {
  ExprVec out(state_dim);
  for (int c = 0; c < state_dim; c++) out[c] = e.diff(c);
  return out;
}

Expr dot(const Eigen::VectorXd& weights, const ExprVec& basis) {
  if (weights.size() != basis.size())
    throw std::invalid_argument("dot: weight/basis size mismatch");
  Expr acc = Expr::constant(0.0);
  for (int i = 0; i < basis.size(); i++)
    acc = acc + Expr::constant(weights[i]) * basis[i];
  return acc;
}

}  // namespace idg
