#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fluidmc {

/// Immutable rate-expression tree.
///
/// Leaves are numeric literals, parameter references, state densities
/// (`x_<state>`) and references to named `def` macros. Interior nodes are the
/// arithmetic operators plus `pow`, `min` and `max`. Nodes are shared, so
/// copying an Expr is cheap.
class Expr {
 public:
  enum class Kind { Literal, Param, Density, Def, Neg, Add, Sub, Mul, Div, Pow, Min, Max };

  Expr() = default;

  static Expr literal(double v);
  static Expr param(std::size_t index);
  static Expr density(std::size_t state);
  static Expr def(std::size_t index);
  static Expr neg(Expr e);
  static Expr binary(Kind k, Expr lhs, Expr rhs);

  bool empty() const noexcept { return node_ == nullptr; }
  Kind kind() const;
  double value() const;
  std::size_t index() const;
  const Expr& lhs() const;
  const Expr& rhs() const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  struct Node;
  static Expr make(Kind k, double v, std::size_t idx, Expr lhs, Expr rhs);
  std::shared_ptr<const Node> node_;
};

struct Expr::Node {
  Kind kind = Kind::Literal;
  double value = 0.0;
  std::size_t index = 0;
  Expr lhs;
  Expr rhs;
};

/// Names used to resolve and print an expression.
struct SymbolTable {
  std::vector<std::string> params;
  std::vector<double> param_values;
  std::vector<std::string> states;
  std::vector<std::string> defs;
  std::vector<Expr> def_bodies;
};

std::string to_string(const Expr& e, const SymbolTable& symbols);

/// Replace every Def node by its body (recursively).
Expr inline_defs(const Expr& e, std::span<const Expr> def_bodies);

/// True when `x_state` is a multiplicative factor of the expression, i.e. the
/// expression can be written as `x_state * g` without division.
bool has_density_factor(const Expr& e, std::size_t state, std::span<const Expr> def_bodies);

/// Symbolically removes one `x_state` factor; nullopt when there is none.
std::optional<Expr> divide_by_density(const Expr& e, std::size_t state,
                                      std::span<const Expr> def_bodies);

bool mentions_density(const Expr& e, std::span<const Expr> def_bodies);

/// Flat stack program compiled from an Expr with parameters and constant
/// subtrees folded. Evaluation is allocation-free.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  CompiledExpr(const Expr& e, std::span<const double> param_values, std::span<const Expr> def_bodies);

  /// Raw value; may be negative or non-finite.
  double operator()(std::span<const double> x) const noexcept;

  bool is_constant() const noexcept { return code_.size() == 1 && code_[0].op == Op::Const; }

 private:
  enum class Op : unsigned char { Const, Var, Neg, Add, Sub, Mul, Div, Pow, Min, Max };
  struct Instr {
    Op op;
    std::size_t index;
    double value;
  };
  void emit(const Expr& e, std::span<const double> params, std::span<const Expr> defs, std::size_t depth);

  std::vector<Instr> code_;
  std::size_t max_depth_ = 0;
};

/// Tolerance below zero that is still accepted (and clamped to 0) for rates.
inline constexpr double kNegativeRateTolerance = 1e-12;

/// Applies the rate acceptance rule: clamps tiny negatives, throws
/// NegativeRate / NonFiniteRate otherwise.
double checked_rate(double raw, const std::string& what, std::span<const double> x);

}  // namespace fluidmc
