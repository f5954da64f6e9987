#include "fluidmc/formula.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "fluidmc/error.hpp"
#include "lexer.hpp"

namespace fluidmc {

Verdict decide(double value, const Bound& b, double margin) {
  if (b.is_query()) return Verdict::Value;
  if (std::abs(value - b.value) < margin) return Verdict::Indeterminate;
  bool holds = false;
  switch (b.cmp) {
    case Comparison::Less: holds = value < b.value; break;
    case Comparison::LessEqual: holds = value <= b.value; break;
    case Comparison::Greater: holds = value > b.value; break;
    case Comparison::GreaterEqual: holds = value >= b.value; break;
    case Comparison::Query: break;
  }
  return holds ? Verdict::True : Verdict::False;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::True: return "true";
    case Verdict::False: return "false";
    case Verdict::Indeterminate: return "indeterminate";
    case Verdict::Value: return "value";
  }
  return "";
}

std::string to_string(Comparison c) {
  switch (c) {
    case Comparison::Less: return "<";
    case Comparison::LessEqual: return "<=";
    case Comparison::Greater: return ">";
    case Comparison::GreaterEqual: return ">=";
    case Comparison::Query: return "=?";
  }
  return "";
}

namespace {

using detail::Tok;
using detail::TokenStream;

FormulaPtr make(Formula f) { return std::make_shared<const Formula>(std::move(f)); }

class FormulaParser {
 public:
  FormulaParser(std::string_view text, const PopulationModel& m) : ts_(detail::tokenize(text)), m_(m) {}

  FormulaPtr parse() {
    FormulaPtr f = state();
    if (!ts_.at_end()) ts_.fail("unexpected trailing input");
    return f;
  }

 private:
  FormulaPtr state() {
    FormulaPtr lhs = conj();
    while (ts_.accept_punct("|") || ts_.accept_punct("||")) {
      Formula f;
      f.kind = Formula::Kind::Or;
      f.lhs = lhs;
      f.rhs = conj();
      lhs = make(std::move(f));
    }
    return lhs;
  }

  FormulaPtr conj() {
    FormulaPtr lhs = unary();
    while (ts_.accept_punct("&") || ts_.accept_punct("&&")) {
      Formula f;
      f.kind = Formula::Kind::And;
      f.lhs = lhs;
      f.rhs = unary();
      lhs = make(std::move(f));
    }
    return lhs;
  }

  FormulaPtr unary() {
    if (ts_.accept_punct("!")) {
      Formula f;
      f.kind = Formula::Kind::Not;
      f.lhs = unary();
      return make(std::move(f));
    }
    return primary();
  }

  FormulaPtr primary() {
    if (ts_.accept_punct("(")) {
      FormulaPtr f = state();
      ts_.expect_punct(")");
      return f;
    }
    const auto& t = ts_.peek();
    if (t.kind != Tok::Ident) ts_.fail("expected state formula");
    if (t.text == "P" && is_bound_start(1)) return prob();
    if (t.text == "R" && ts_.is_punct("{", 1)) return reward();
    Formula f;
    const std::string id = ts_.next().text;
    if (id == "true") {
      f.kind = Formula::Kind::True;
    } else if (id == "false") {
      f.kind = Formula::Kind::False;
    } else {
      f.kind = Formula::Kind::Atom;
      f.atom = id;
      f.atom_states.assign(m_.n_states(), false);
      if (const Label* l = m_.label(id)) {
        for (std::size_t s : l->states) f.atom_states[s] = true;
      } else if (auto s = m_.agent.index(id)) {
        f.atom_states[*s] = true;
      } else {
        throw UnknownIdentifier(id);
      }
    }
    return make(std::move(f));
  }

  bool is_bound_start(std::size_t ahead) const {
    for (const char* p : {"<", "<=", ">", ">=", "=?"})
      if (ts_.is_punct(p, ahead)) return true;
    return false;
  }

  Bound bound(bool probability) {
    Bound b;
    const auto& at = ts_.peek();
    if (ts_.accept_punct("=?")) return b;
    if (ts_.accept_punct("<=")) b.cmp = Comparison::LessEqual;
    else if (ts_.accept_punct("<")) b.cmp = Comparison::Less;
    else if (ts_.accept_punct(">=")) b.cmp = Comparison::GreaterEqual;
    else if (ts_.accept_punct(">")) b.cmp = Comparison::Greater;
    else ts_.fail("expected comparison or '=?'");
    b.value = ts_.number();
    if (probability && (b.value < 0.0 || b.value > 1.0))
      throw ParseError("probability bound must lie in [0, 1]", at.line, at.column);
    if (!probability && b.value < 0.0) throw ParseError("reward bound must be >= 0", at.line, at.column);
    return b;
  }

  std::pair<double, double> interval() {
    const auto& at = ts_.peek();
    ts_.expect_punct("[");
    const double a = ts_.number();
    ts_.expect_punct(",");
    const double b = ts_.number();
    ts_.expect_punct("]");
    if (!(a >= 0.0) || !(b >= a) || !std::isfinite(b))
      throw ParseError("time interval must satisfy 0 <= T1 <= T2 < inf", at.line, at.column);
    return {a, b};
  }

  FormulaPtr prob() {
    ts_.next();
    Formula f;
    f.kind = Formula::Kind::Prob;
    f.bound = bound(true);
    ts_.expect_punct("[");
    if (ts_.is_ident("X") && ts_.is_punct("[", 1)) {
      ts_.next();
      auto [a, b] = interval();
      f.path.kind = PathFormula::Kind::Next;
      f.path.t1 = a;
      f.path.t2 = b;
      f.path.right = state();
    } else {
      f.path.kind = PathFormula::Kind::Until;
      f.path.left = state();
      ts_.expect_ident("U");
      auto [a, b] = interval();
      f.path.t1 = a;
      f.path.t2 = b;
      f.path.right = state();
    }
    if ((f.path.left && !is_propositional(*f.path.left)) || !is_propositional(*f.path.right))
      throw NestedFormulaUnsupported(
          "NestedFormulaUnsupported: probability or reward operator inside a path formula");
    ts_.expect_punct("]");
    return make(std::move(f));
  }

  FormulaPtr reward() {
    ts_.next();
    Formula f;
    f.kind = Formula::Kind::Reward;
    ts_.expect_punct("{");
    const std::string name = ts_.identifier("reward structure name");
    ts_.expect_punct("}");
    bool found = false;
    for (std::size_t i = 0; i < m_.rewards.size(); ++i)
      if (m_.rewards[i].name == name) {
        f.reward.reward = i;
        found = true;
      }
    if (!found) throw UnknownIdentifier(name);
    f.bound = bound(false);
    ts_.expect_punct("[");
    const auto& at = ts_.peek();
    const std::string op = ts_.identifier("reward operator C, I, S or F");
    auto horizon = [&] {
      const double T = ts_.number();
      if (!(T >= 0.0) || !std::isfinite(T)) throw ParseError("time bound must be finite and >= 0", at.line, at.column);
      return T;
    };
    if (op == "C") {
      ts_.expect_punct("<=");
      f.reward.op = RewardOp::Cumulative;
      f.reward.T = horizon();
    } else if (op == "I") {
      ts_.expect_punct("=");
      f.reward.op = RewardOp::Instantaneous;
      f.reward.T = horizon();
    } else if (op == "S") {
      f.reward.op = RewardOp::SteadyState;
    } else if (op == "F") {
      ts_.expect_punct("<=");
      f.reward.op = RewardOp::Reachability;
      f.reward.T = horizon();
      f.reward.target = state();
      if (!is_propositional(*f.reward.target))
        throw NestedFormulaUnsupported("reachability reward target must not contain P or R operators");
    } else {
      throw ParseError("unknown reward operator '" + op + "'", at.line, at.column);
    }
    ts_.expect_punct("]");
    return make(std::move(f));
  }

  TokenStream ts_;
  const PopulationModel& m_;
};

std::string number(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void print(std::ostringstream& os, const Formula& f, const PopulationModel& m, int parent) {
  // Precedence: or 1, and 2, unary 3.
  auto wrap = [&](int prec, auto body) {
    if (prec < parent) os << "(";
    body();
    if (prec < parent) os << ")";
  };
  switch (f.kind) {
    case Formula::Kind::True: os << "true"; break;
    case Formula::Kind::False: os << "false"; break;
    case Formula::Kind::Atom: os << f.atom; break;
    case Formula::Kind::Not:
      os << "!";
      print(os, *f.lhs, m, 3);
      break;
    case Formula::Kind::And:
      wrap(2, [&] {
        print(os, *f.lhs, m, 2);
        os << " & ";
        print(os, *f.rhs, m, 3);
      });
      break;
    case Formula::Kind::Or:
      wrap(1, [&] {
        print(os, *f.lhs, m, 1);
        os << " | ";
        print(os, *f.rhs, m, 2);
      });
      break;
    case Formula::Kind::Prob: {
      os << "P" << to_string(f.bound.cmp);
      if (!f.bound.is_query()) os << number(f.bound.value);
      os << " [ ";
      const auto& p = f.path;
      const std::string iv = "[" + number(p.t1) + "," + number(p.t2) + "]";
      if (p.kind == PathFormula::Kind::Next) {
        os << "X" << iv << " ";
        print(os, *p.right, m, 3);
      } else {
        print(os, *p.left, m, 3);
        os << " U" << iv << " ";
        print(os, *p.right, m, 3);
      }
      os << " ]";
      break;
    }
    case Formula::Kind::Reward: {
      os << "R{" << m.rewards.at(f.reward.reward).name << "}" << to_string(f.bound.cmp);
      if (!f.bound.is_query()) os << number(f.bound.value);
      os << " [ ";
      switch (f.reward.op) {
        case RewardOp::Cumulative: os << "C<=" << number(f.reward.T); break;
        case RewardOp::Instantaneous: os << "I=" << number(f.reward.T); break;
        case RewardOp::SteadyState: os << "S"; break;
        case RewardOp::Reachability:
          os << "F<=" << number(f.reward.T) << " ";
          print(os, *f.reward.target, m, 3);
          break;
      }
      os << " ]";
      break;
    }
  }
}

}  // namespace

FormulaPtr parse_formula(std::string_view text, const PopulationModel& m) { return FormulaParser(text, m).parse(); }

std::vector<FormulaLine> parse_formula_list(std::string_view text, const PopulationModel& m) {
  std::vector<FormulaLine> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    const auto last = line.find_last_not_of(" \t\r");
    const std::string_view body = line.substr(first, last - first + 1);
    try {
      out.push_back({std::string(body), parse_formula(body, m)});
    } catch (const ParseError& e) {
      throw ParseError(std::string(e.what()).substr(std::string(e.what()).find(": ") + 2), line_no, e.column());
    }
    if (end == text.size()) break;
  }
  return out;
}

std::string to_string(const Formula& f, const PopulationModel& m) {
  std::ostringstream os;
  print(os, f, m, 0);
  return os.str();
}

bool is_propositional(const Formula& f) {
  switch (f.kind) {
    case Formula::Kind::True:
    case Formula::Kind::False:
    case Formula::Kind::Atom: return true;
    case Formula::Kind::Not: return is_propositional(*f.lhs);
    case Formula::Kind::And:
    case Formula::Kind::Or: return is_propositional(*f.lhs) && is_propositional(*f.rhs);
    case Formula::Kind::Prob:
    case Formula::Kind::Reward: return false;
  }
  return false;
}

std::vector<bool> satisfaction_set(const Formula& f, std::size_t n) {
  switch (f.kind) {
    case Formula::Kind::True: return std::vector<bool>(n, true);
    case Formula::Kind::False: return std::vector<bool>(n, false);
    case Formula::Kind::Atom: return f.atom_states;
    case Formula::Kind::Not: {
      auto s = satisfaction_set(*f.lhs, n);
      s.flip();
      return s;
    }
    case Formula::Kind::And:
    case Formula::Kind::Or: {
      auto a = satisfaction_set(*f.lhs, n);
      const auto b = satisfaction_set(*f.rhs, n);
      for (std::size_t i = 0; i < n; ++i) a[i] = f.kind == Formula::Kind::And ? (a[i] && b[i]) : (a[i] || b[i]);
      return a;
    }
    case Formula::Kind::Prob:
    case Formula::Kind::Reward: break;
  }
  throw NestedFormulaUnsupported("NestedFormulaUnsupported: probability or reward operator inside a path formula");
}

}  // namespace fluidmc
