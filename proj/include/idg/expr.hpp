#pragma once

#include <Eigen/Dense>

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace idg {

/// Raised by Expr::parse with the byte offset of the offending token.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Raised on evaluation outside the domain (division by zero, sqrt of a
/// negative value, non-integer power of a negative base).
class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when differentiating through a non-differentiable node (abs).
class DiffError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Immutable scalar expression over state variables x1..xn.
///
/// Supported operations: +, -, *, /, ^ (constant exponent), unary minus and
/// the functions sin, cos, tan, exp, sqrt, abs. Values are shared subtrees;
/// an Expr never changes after construction and is safe to evaluate
/// concurrently.
class Expr {
 public:
  /// Structural zero constant.
  Expr();

  static Expr constant(double value);
  static Expr variable(int index);  // 0-based index into the state vector

  /// Parses the textual format: variables x1..xn, numeric literals, the
  /// function set above, parentheses; precedence ^ > unary- > *,/ > +,-
  /// with ^ right-associative.
  static Expr parse(std::string_view src);

  double eval(std::span<const double> x) const;
  double eval(const Eigen::VectorXd& x) const;

  /// Symbolic partial derivative with respect to variable `var` (0-based).
  Expr diff(int var) const;

  std::string str() const;

  /// 1 + highest variable index referenced, i.e. the minimum state dimension.
  int min_state_dim() const;

  bool is_constant() const;
  bool is_zero() const;  // structurally the constant 0
  double constant_value() const;

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a);
  friend Expr pow(const Expr& base, double exponent);
  friend Expr sin(const Expr& a);
  friend Expr cos(const Expr& a);
  friend Expr tan(const Expr& a);
  friend Expr exp(const Expr& a);
  friend Expr sqrt(const Expr& a);
  friend Expr abs(const Expr& a);

  struct Node;  // opaque; defined in expr.cpp

 private:
  using NodePtr = std::shared_ptr<const Node>;
  explicit Expr(NodePtr node) : node_(std::move(node)) {}

  NodePtr node_;
};

/// Fixed-length vector of expressions; evaluates to an Eigen vector.
class ExprVec {
 public:
  ExprVec() = default;
  explicit ExprVec(int size) : elems_(static_cast<std::size_t>(size)) {}
  explicit ExprVec(std::vector<Expr> elems) : elems_(std::move(elems)) {}

  int size() const { return static_cast<int>(elems_.size()); }
  const Expr& operator[](int i) const { return elems_[static_cast<std::size_t>(i)]; }
  Expr& operator[](int i) { return elems_[static_cast<std::size_t>(i)]; }

  Eigen::VectorXd eval(const Eigen::VectorXd& x) const;
  int min_state_dim() const;

  auto begin() const { return elems_.begin(); }
  auto end() const { return elems_.end(); }

 private:
  std::vector<Expr> elems_;
};

/// Rectangular expression matrix with the shape fixed at construction.
class ExprMat {
 public:
  ExprMat() : rows_(0), cols_(0) {}
  ExprMat(int rows, int cols)
      : rows_(rows), cols_(cols),
        elems_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  const Expr& operator()(int r, int c) const { return elems_[idx(r, c)]; }
  Expr& operator()(int r, int c) { return elems_[idx(r, c)]; }

  Eigen::MatrixXd eval(const Eigen::VectorXd& x) const;
  int min_state_dim() const;

 private:
  std::size_t idx(int r, int c) const {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) +
           static_cast<std::size_t>(c);
  }
  int rows_, cols_;
  std::vector<Expr> elems_;
};

/// Row j, column k holds d v[j] / d x_k.
ExprMat jacobian(const ExprVec& v, int state_dim);

/// Gradient of a scalar expression as a 1 x n row written into an ExprVec.
ExprVec gradient(const Expr& e, int state_dim);

/// theta . phi as a single expression.
Expr dot(const Eigen::VectorXd& weights, const ExprVec& basis);

}  // namespace idg
