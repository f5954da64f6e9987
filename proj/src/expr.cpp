#include "fluidmc/expr.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <sstream>

#include "fluidmc/error.hpp"

namespace fluidmc {

namespace {

int precedence(Expr::Kind k) {
  switch (k) {
    case Expr::Kind::Add:
    case Expr::Kind::Sub:
      return 1;
    case Expr::Kind::Mul:
    case Expr::Kind::Div:
      return 2;
    case Expr::Kind::Neg:
      return 3;
    default:
      return 4;
  }
}

std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

void print(std::ostream& os, const Expr& e, const SymbolTable& s);

void print_child(std::ostream& os, const Expr& child, bool parens, const SymbolTable& s) {
  if (parens) os << '(';
  print(os, child, s);
  if (parens) os << ')';
}

void print(std::ostream& os, const Expr& e, const SymbolTable& s) {
  using K = Expr::Kind;
  switch (e.kind()) {
    case K::Literal:
      os << format_number(e.value());
      return;
    case K::Param:
      os << s.params.at(e.index());
      return;
    case K::Density:
      os << "x_" << s.states.at(e.index());
      return;
    case K::Def:
      os << s.defs.at(e.index());
      return;
    case K::Neg: {
      const bool atom = precedence(e.lhs().kind()) == 4 &&
                        !(e.lhs().kind() == K::Literal && e.lhs().value() < 0);
      os << '-';
      print_child(os, e.lhs(), !atom, s);
      return;
    }
    case K::Pow:
    case K::Min:
    case K::Max:
      os << (e.kind() == K::Pow ? "pow(" : e.kind() == K::Min ? "min(" : "max(");
      print(os, e.lhs(), s);
      os << ", ";
      print(os, e.rhs(), s);
      os << ')';
      return;
    default: {
      const int p = precedence(e.kind());
      print_child(os, e.lhs(), precedence(e.lhs().kind()) < p, s);
      switch (e.kind()) {
        case K::Add: os << " + "; break;
        case K::Sub: os << " - "; break;
        case K::Mul: os << " * "; break;
        default: os << " / "; break;
      }
      print_child(os, e.rhs(), precedence(e.rhs().kind()) <= p, s);
      return;
    }
  }
}

double apply(Expr::Kind k, double a, double b) {
  using K = Expr::Kind;
  switch (k) {
    case K::Add: return a + b;
    case K::Sub: return a - b;
    case K::Mul: return a * b;
    case K::Div: return a / b;
    case K::Pow: return std::pow(a, b);
    case K::Min: return std::min(a, b);
    case K::Max: return std::max(a, b);
    default: return std::nan("");
  }
}

double eval_tree(const Expr& e, std::span<const double> params, std::span<const Expr> defs) {
  using K = Expr::Kind;
  switch (e.kind()) {
    case K::Literal: return e.value();
    case K::Param: return params[e.index()];
    case K::Def: return eval_tree(defs[e.index()], params, defs);
    case K::Density: return std::nan("");
    case K::Neg: return -eval_tree(e.lhs(), params, defs);
    default: return apply(e.kind(), eval_tree(e.lhs(), params, defs), eval_tree(e.rhs(), params, defs));
  }
}

}  // namespace

Expr Expr::literal(double v) { return make(Kind::Literal, v, 0, {}, {}); }
Expr Expr::param(std::size_t index) { return make(Kind::Param, 0, index, {}, {}); }
Expr Expr::density(std::size_t state) { return make(Kind::Density, 0, state, {}, {}); }
Expr Expr::def(std::size_t index) { return make(Kind::Def, 0, index, {}, {}); }
Expr Expr::neg(Expr e) { return make(Kind::Neg, 0, 0, std::move(e), {}); }
Expr Expr::binary(Kind k, Expr lhs, Expr rhs) { return make(k, 0, 0, std::move(lhs), std::move(rhs)); }

Expr Expr::make(Kind k, double v, std::size_t idx, Expr lhs, Expr rhs) {
  Node n;
  n.kind = k;
  n.value = v;
  n.index = idx;
  n.lhs = std::move(lhs);
  n.rhs = std::move(rhs);
  Expr out;
  out.node_ = std::make_shared<const Node>(std::move(n));
  return out;
}

Expr::Kind Expr::kind() const { return node_->kind; }
double Expr::value() const { return node_->value; }
std::size_t Expr::index() const { return node_->index; }
const Expr& Expr::lhs() const { return node_->lhs; }
const Expr& Expr::rhs() const { return node_->rhs; }

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  if (!a.node_ || !b.node_) return false;
  const auto& x = *a.node_;
  const auto& y = *b.node_;
  if (x.kind != y.kind) return false;
  switch (x.kind) {
    case Expr::Kind::Literal:
      return x.value == y.value;
    case Expr::Kind::Param:
    case Expr::Kind::Density:
    case Expr::Kind::Def:
      return x.index == y.index;
    default:
      return x.lhs == y.lhs && x.rhs == y.rhs;
  }
}

std::string to_string(const Expr& e, const SymbolTable& symbols) {
  std::ostringstream os;
  print(os, e, symbols);
  return os.str();
}

Expr inline_defs(const Expr& e, std::span<const Expr> def_bodies) {
  using K = Expr::Kind;
  switch (e.kind()) {
    case K::Def:
      return inline_defs(def_bodies[e.index()], def_bodies);
    case K::Literal:
    case K::Param:
    case K::Density:
      return e;
    case K::Neg:
      return Expr::neg(inline_defs(e.lhs(), def_bodies));
    default:
      return Expr::binary(e.kind(), inline_defs(e.lhs(), def_bodies), inline_defs(e.rhs(), def_bodies));
  }
}

bool has_density_factor(const Expr& e, std::size_t state, std::span<const Expr> def_bodies) {
  return divide_by_density(e, state, def_bodies).has_value();
}

std::optional<Expr> divide_by_density(const Expr& e, std::size_t state, std::span<const Expr> def_bodies) {
  using K = Expr::Kind;
  switch (e.kind()) {
    case K::Density:
      if (e.index() == state) return Expr::literal(1.0);
      return std::nullopt;
    case K::Def:
      return divide_by_density(def_bodies[e.index()], state, def_bodies);
    case K::Neg:
      if (auto inner = divide_by_density(e.lhs(), state, def_bodies)) return Expr::neg(*inner);
      return std::nullopt;
    case K::Mul: {
      if (auto l = divide_by_density(e.lhs(), state, def_bodies)) {
        if (l->kind() == K::Literal && l->value() == 1.0) return e.rhs();
        return Expr::binary(K::Mul, *l, e.rhs());
      }
      if (auto r = divide_by_density(e.rhs(), state, def_bodies)) {
        if (r->kind() == K::Literal && r->value() == 1.0) return e.lhs();
        return Expr::binary(K::Mul, e.lhs(), *r);
      }
      return std::nullopt;
    }
    case K::Div:
      if (auto l = divide_by_density(e.lhs(), state, def_bodies)) return Expr::binary(K::Div, *l, e.rhs());
      return std::nullopt;
    default:
      return std::nullopt;
  }
}

bool mentions_density(const Expr& e, std::span<const Expr> def_bodies) {
  using K = Expr::Kind;
  switch (e.kind()) {
    case K::Density: return true;
    case K::Literal:
    case K::Param: return false;
    case K::Def: return mentions_density(def_bodies[e.index()], def_bodies);
    case K::Neg: return mentions_density(e.lhs(), def_bodies);
    default: return mentions_density(e.lhs(), def_bodies) || mentions_density(e.rhs(), def_bodies);
  }
}

CompiledExpr::CompiledExpr(const Expr& e, std::span<const double> params, std::span<const Expr> defs) {
  emit(e, params, defs, 0);
  if (max_depth_ > 64) throw InvalidModel("rate expression nests deeper than 64 levels");
}

void CompiledExpr::emit(const Expr& e, std::span<const double> params, std::span<const Expr> defs,
                        std::size_t depth) {
  using K = Expr::Kind;
  max_depth_ = std::max(max_depth_, depth + 1);
  if (!mentions_density(e, defs)) {
    code_.push_back({Op::Const, 0, eval_tree(e, params, defs)});
    return;
  }
  switch (e.kind()) {
    case K::Density:
      code_.push_back({Op::Var, e.index(), 0.0});
      return;
    case K::Def:
      emit(defs[e.index()], params, defs, depth);
      return;
    case K::Neg:
      emit(e.lhs(), params, defs, depth);
      code_.push_back({Op::Neg, 0, 0.0});
      return;
    default:
      break;
  }
  emit(e.lhs(), params, defs, depth);
  emit(e.rhs(), params, defs, depth + 1);
  Op op = Op::Add;
  switch (e.kind()) {
    case K::Add: op = Op::Add; break;
    case K::Sub: op = Op::Sub; break;
    case K::Mul: op = Op::Mul; break;
    case K::Div: op = Op::Div; break;
    case K::Pow: op = Op::Pow; break;
    case K::Min: op = Op::Min; break;
    case K::Max: op = Op::Max; break;
    default: break;
  }
  code_.push_back({op, 0, 0.0});
}

double CompiledExpr::operator()(std::span<const double> x) const noexcept {
  if (code_.empty()) return 0.0;
  std::array<double, 64> st;
  std::size_t sp = 0;
  for (const Instr& in : code_) {
    switch (in.op) {
      case Op::Const: st[sp++] = in.value; break;
      case Op::Var: st[sp++] = x[in.index]; break;
      case Op::Neg: st[sp - 1] = -st[sp - 1]; break;
      case Op::Add: --sp; st[sp - 1] += st[sp]; break;
      case Op::Sub: --sp; st[sp - 1] -= st[sp]; break;
      case Op::Mul: --sp; st[sp - 1] *= st[sp]; break;
      case Op::Div: --sp; st[sp - 1] /= st[sp]; break;
      case Op::Pow: --sp; st[sp - 1] = std::pow(st[sp - 1], st[sp]); break;
      case Op::Min: --sp; st[sp - 1] = std::min(st[sp - 1], st[sp]); break;
      case Op::Max: --sp; st[sp - 1] = std::max(st[sp - 1], st[sp]); break;
    }
  }
  return st[0];
}

double checked_rate(double raw, const std::string& what, std::span<const double> x) {
  if (!std::isfinite(raw)) throw NonFiniteRate(what, {x.begin(), x.end()});
  if (raw < 0.0) {
    if (raw < -kNegativeRateTolerance) throw NegativeRate(what, raw, {x.begin(), x.end()});
    return 0.0;
  }
  return raw;
}

}  // namespace fluidmc
