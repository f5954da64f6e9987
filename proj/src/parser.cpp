#include "fluidmc/parser.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "fluidmc/error.hpp"
#include "lexer.hpp"

namespace fluidmc {

namespace detail {

namespace {

Expr parse_sum(TokenStream& ts, const PopulationModel& m);

Expr resolve_identifier(const Token& tok, const PopulationModel& m) {
  const std::string& id = tok.text;
  for (std::size_t i = 0; i < m.def_names.size(); ++i)
    if (m.def_names[i] == id) return Expr::def(i);
  for (std::size_t i = 0; i < m.param_names.size(); ++i)
    if (m.param_names[i] == id) return Expr::param(i);
  if (id.size() > 2 && id.rfind("x_", 0) == 0) {
    if (auto s = m.agent.index(std::string_view(id).substr(2))) return Expr::density(*s);
  }
  throw UnknownIdentifier(id);
}

Expr parse_primary(TokenStream& ts, const PopulationModel& m) {
  const Token& t = ts.peek();
  if (t.kind == Tok::Number) return Expr::literal(ts.next().number);
  if (ts.accept_punct("(")) {
    Expr e = parse_sum(ts, m);
    ts.expect_punct(")");
    return e;
  }
  if (t.kind == Tok::Ident) {
    if ((t.text == "pow" || t.text == "min" || t.text == "max") && ts.is_punct("(", 1)) {
      const auto kind = t.text == "pow" ? Expr::Kind::Pow : t.text == "min" ? Expr::Kind::Min : Expr::Kind::Max;
      ts.next();
      ts.expect_punct("(");
      Expr a = parse_sum(ts, m);
      ts.expect_punct(",");
      Expr b = parse_sum(ts, m);
      ts.expect_punct(")");
      return Expr::binary(kind, std::move(a), std::move(b));
    }
    Token tok = ts.next();
    return resolve_identifier(tok, m);
  }
  ts.fail("expected expression");
}

Expr parse_unary(TokenStream& ts, const PopulationModel& m) {
  if (ts.accept_punct("-")) {
    Expr inner = parse_unary(ts, m);
    if (inner.kind() == Expr::Kind::Literal) return Expr::literal(-inner.value());
    return Expr::neg(std::move(inner));
  }
  return parse_primary(ts, m);
}

Expr parse_product(TokenStream& ts, const PopulationModel& m) {
  Expr lhs = parse_unary(ts, m);
  for (;;) {
    if (ts.accept_punct("*")) {
      lhs = Expr::binary(Expr::Kind::Mul, std::move(lhs), parse_unary(ts, m));
    } else if (ts.accept_punct("/")) {
      lhs = Expr::binary(Expr::Kind::Div, std::move(lhs), parse_unary(ts, m));
    } else {
      return lhs;
    }
  }
}

Expr parse_sum(TokenStream& ts, const PopulationModel& m) {
  Expr lhs = parse_product(ts, m);
  for (;;) {
    if (ts.accept_punct("+")) {
      lhs = Expr::binary(Expr::Kind::Add, std::move(lhs), parse_product(ts, m));
    } else if (ts.accept_punct("-")) {
      lhs = Expr::binary(Expr::Kind::Sub, std::move(lhs), parse_product(ts, m));
    } else {
      return lhs;
    }
  }
}

}  // namespace

Expr parse_expression(TokenStream& ts, const PopulationModel& scope) { return parse_sum(ts, scope); }

double parse_constant(TokenStream& ts, const PopulationModel& scope) {
  const Token start = ts.peek();
  Expr e = parse_sum(ts, scope);
  if (mentions_density(e, scope.def_bodies))
    throw ParseError("expected a constant expression", start.line, start.column);
  CompiledExpr c(e, scope.param_values, scope.def_bodies);
  return c({});
}

}  // namespace detail

namespace {

using detail::Tok;
using detail::Token;
using detail::TokenStream;

class ModelParser {
 public:
  explicit ModelParser(std::string_view text) : ts_(detail::tokenize(text)) {}

  PopulationModel run() {
    while (!ts_.at_end()) statement();
    if (!have_states_) throw ParseError("missing 'states' declaration", 1, 1);
    // Reward vectors may predate later transitions.
    for (auto& rw : m_.rewards) rw.transition_reward.resize(m_.transitions.size(), 0.0);
    check_invariants(m_);
    return std::move(m_);
  }

 private:
  void statement() {
    const Token& t = ts_.peek();
    if (t.kind != Tok::Ident) ts_.fail("expected a declaration keyword");
    const std::string kw = t.text;
    if (kw == "model") {
      ts_.next();
      m_.name = ts_.identifier("model name");
    } else if (kw == "states") {
      ts_.next();
      if (have_states_) ts_.fail("states declared twice");
      std::vector<std::string> names{ts_.identifier("state name")};
      while (ts_.accept_punct(",")) names.push_back(ts_.identifier("state name"));
      for (const auto& n : names)
        if (std::count(names.begin(), names.end(), n) > 1) throw DuplicateName(n);
      m_.agent = AgentStateSpace(std::move(names));
      m_.init_density.assign(m_.agent.size(), 0.0);
      have_states_ = true;
    } else if (kw == "param") {
      ts_.next();
      std::string name = ts_.identifier("parameter name");
      ensure_fresh(name);
      ts_.expect_punct("=");
      double v = detail::parse_constant(ts_, m_);
      m_.param_names.push_back(std::move(name));
      m_.param_values.push_back(v);
    } else if (kw == "def") {
      ts_.next();
      std::string name = ts_.identifier("definition name");
      ensure_fresh(name);
      ts_.expect_punct("=");
      need_states();
      Expr body = detail::parse_expression(ts_, m_);
      m_.def_names.push_back(std::move(name));
      m_.def_bodies.push_back(std::move(body));
    } else if (kw == "transition") {
      ts_.next();
      transition();
    } else if (kw == "init") {
      ts_.next();
      need_states();
      const Token var = ts_.peek();
      const std::string id = ts_.identifier("density variable");
      if (id.rfind("x_", 0) != 0) throw ParseError("expected x_<state>", var.line, var.column);
      auto s = m_.agent.index(std::string_view(id).substr(2));
      if (!s) throw UnknownIdentifier(id);
      ts_.expect_punct("=");
      m_.init_density[*s] = detail::parse_constant(ts_, m_);
    } else if (kw == "label") {
      ts_.next();
      need_states();
      Label l;
      l.name = ts_.identifier("label name");
      if (m_.label(l.name)) throw DuplicateName(l.name);
      ts_.expect_punct("=");
      ts_.expect_punct("{");
      if (!ts_.is_punct("}")) {
        do {
          l.states.push_back(m_.state_index(ts_.identifier("state name")));
        } while (ts_.accept_punct(","));
      }
      ts_.expect_punct("}");
      std::sort(l.states.begin(), l.states.end());
      l.states.erase(std::unique(l.states.begin(), l.states.end()), l.states.end());
      m_.labels.push_back(std::move(l));
    } else if (kw == "reward") {
      ts_.next();
      reward();
    } else {
      ts_.fail("unknown declaration");
    }
  }

  void need_states() {
    if (!have_states_) ts_.fail("'states' must be declared first");
  }

  void ensure_fresh(const std::string& name) {
    if (std::find(m_.param_names.begin(), m_.param_names.end(), name) != m_.param_names.end() ||
        std::find(m_.def_names.begin(), m_.def_names.end(), name) != m_.def_names.end())
      throw DuplicateName(name);
  }

  void transition() {
    need_states();
    Transition t;
    t.name = ts_.identifier("transition name");
    if (m_.transition_index(t.name)) throw DuplicateName(t.name);
    ts_.expect_punct("{");
    struct PendingPercap {
      std::optional<std::size_t> source;
      Expr body;
      Token at;
    };
    std::vector<PendingPercap> percaps;
    bool have_rate = false;
    while (!ts_.accept_punct("}")) {
      if (ts_.accept_punct(";")) continue;
      if (ts_.accept_ident("rule")) {
        int mult = 1;
        if (ts_.peek().kind == Tok::Number) {
          const Token nt = ts_.next();
          if (nt.number < 1 || nt.number != static_cast<int>(nt.number))
            throw ParseError("multiplicity must be a positive integer", nt.line, nt.column);
          mult = static_cast<int>(nt.number);
          ts_.expect_punct("*");
        }
        const std::size_t from = m_.state_index(ts_.identifier("state name"));
        ts_.expect_punct("->");
        const std::size_t to = m_.state_index(ts_.identifier("state name"));
        auto it = std::find_if(t.rules.begin(), t.rules.end(),
                               [&](const Rule& r) { return r.from == from && r.to == to; });
        if (it != t.rules.end()) {
          it->multiplicity += mult;
        } else {
          t.rules.push_back(Rule{from, to, mult, std::nullopt});
        }
      } else if (ts_.accept_ident("rate")) {
        if (have_rate) ts_.fail("rate declared twice");
        t.rate = detail::parse_expression(ts_, m_);
        have_rate = true;
      } else if (ts_.is_ident("percap")) {
        PendingPercap p;
        p.at = ts_.next();
        if (ts_.peek().kind == Tok::Ident && ts_.is_punct(":", 1)) {
          p.source = m_.state_index(ts_.identifier());
          ts_.expect_punct(":");
        }
        p.body = detail::parse_expression(ts_, m_);
        percaps.push_back(std::move(p));
      } else {
        ts_.fail("expected 'rule', 'rate' or 'percap'");
      }
      if (!ts_.is_punct("}")) ts_.expect_punct(";");
    }
    if (t.rules.empty()) ts_.fail("transition '" + t.name + "' needs at least one rule");
    if (!have_rate) ts_.fail("transition '" + t.name + "' needs a rate");
    for (auto& p : percaps) {
      std::size_t source = 0;
      if (p.source) {
        source = *p.source;
      } else {
        source = t.rules.front().from;
        for (const Rule& r : t.rules)
          if (r.from != source)
            throw ParseError("percap must name its source state when rules have several sources", p.at.line,
                             p.at.column);
      }
      bool used = false;
      for (Rule& r : t.rules) {
        if (r.from == source) {
          if (r.percap) throw ParseError("percap declared twice for one source", p.at.line, p.at.column);
          r.percap = p.body;
          used = true;
        }
      }
      if (!used) throw ParseError("percap source is not a rule source", p.at.line, p.at.column);
    }
    m_.transitions.push_back(std::move(t));
  }

  void reward() {
    need_states();
    RewardStructure rw;
    rw.name = ts_.identifier("reward name");
    if (m_.reward(rw.name)) throw DuplicateName(rw.name);
    rw.state_reward.assign(m_.n_states(), 0.0);
    rw.transition_reward.assign(m_.transitions.size(), 0.0);
    ts_.expect_punct("{");
    while (!ts_.accept_punct("}")) {
      if (ts_.accept_punct(";")) continue;
      const Token at = ts_.peek();
      double* slot = nullptr;
      if (ts_.accept_ident("state")) {
        slot = &rw.state_reward[m_.state_index(ts_.identifier("state name"))];
      } else if (ts_.accept_ident("trans")) {
        const std::string tn = ts_.identifier("transition name");
        auto ti = m_.transition_index(tn);
        if (!ti) throw UnknownIdentifier(tn);
        slot = &rw.transition_reward[*ti];
      } else {
        ts_.fail("expected 'state' or 'trans'");
      }
      ts_.expect_punct("=");
      const double v = detail::parse_constant(ts_, m_);
      if (!(v >= 0.0)) throw ParseError("rewards must be nonnegative", at.line, at.column);
      *slot = v;
      if (!ts_.is_punct("}")) ts_.expect_punct(";");
    }
    m_.rewards.push_back(std::move(rw));
  }

  TokenStream ts_;
  PopulationModel m_;
  bool have_states_ = false;
};

std::string number(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace

PopulationModel parse_model(std::string_view text) { return ModelParser(text).run(); }

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PopulationModel load_model(const std::filesystem::path& path) { return parse_model(read_text_file(path)); }

std::string print_model(const PopulationModel& m) {
  const SymbolTable sym = m.symbols();
  std::ostringstream os;
  if (!m.name.empty()) os << "model " << m.name << "\n";
  os << "states ";
  for (std::size_t i = 0; i < m.n_states(); ++i) os << (i ? ", " : "") << m.agent.name(i);
  os << "\n";
  for (std::size_t i = 0; i < m.param_names.size(); ++i)
    os << "param " << m.param_names[i] << " = " << number(m.param_values[i]) << "\n";
  for (std::size_t i = 0; i < m.def_names.size(); ++i)
    os << "def " << m.def_names[i] << " = " << to_string(m.def_bodies[i], sym) << "\n";
  for (const auto& t : m.transitions) {
    os << "transition " << t.name << " {";
    for (const Rule& r : t.rules) {
      os << " rule ";
      if (r.multiplicity != 1) os << r.multiplicity << " * ";
      os << m.agent.name(r.from) << " -> " << m.agent.name(r.to) << ";";
    }
    os << " rate " << to_string(t.rate, sym);
    std::set<std::size_t> printed;
    for (const Rule& r : t.rules) {
      if (r.percap && printed.insert(r.from).second)
        os << "; percap " << m.agent.name(r.from) << ": " << to_string(*r.percap, sym);
    }
    os << " }\n";
  }
  for (std::size_t i = 0; i < m.n_states(); ++i)
    if (m.init_density[i] != 0.0) os << "init x_" << m.agent.name(i) << " = " << number(m.init_density[i]) << "\n";
  for (const auto& l : m.labels) {
    os << "label " << l.name << " = {";
    for (std::size_t k = 0; k < l.states.size(); ++k) os << (k ? ", " : " ") << m.agent.name(l.states[k]);
    os << " }\n";
  }
  for (const auto& rw : m.rewards) {
    os << "reward " << rw.name << " {";
    bool first = true;
    for (std::size_t i = 0; i < rw.state_reward.size(); ++i) {
      if (rw.state_reward[i] == 0.0) continue;
      os << (first ? " " : "; ") << "state " << m.agent.name(i) << " = " << number(rw.state_reward[i]);
      first = false;
    }
    for (std::size_t i = 0; i < rw.transition_reward.size(); ++i) {
      if (rw.transition_reward[i] == 0.0) continue;
      os << (first ? " " : "; ") << "trans " << m.transitions[i].name << " = " << number(rw.transition_reward[i]);
      first = false;
    }
    os << " }\n";
  }
  return os.str();
}

}  // namespace fluidmc
