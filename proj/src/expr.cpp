#include "riglab/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

namespace riglab::expr {

namespace {

bool is_const(const NodePtr& n, double v) {
  return n->kind == NodeKind::Constant && n->value == v;
}

bool is_int(double v) { return std::abs(v - std::nearbyint(v)) < 1e-12 && std::abs(v) < 1e9; }

NodePtr make(NodeKind kind, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

double powi(double base, long long e) {
  if (e < 0) {
    if (base == 0.0) throw EvalDomainError("zero raised to a negative power");
    return 1.0 / powi(base, -e);
  }
  double r = 1.0, b = base;
  while (e > 0) {
    if (e & 1) r *= b;
    b *= b;
    e >>= 1;
  }
  return r;
}

}  // namespace

NodePtr constant(double v) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Constant;
  n->value = v;
  return n;
}

NodePtr variable(VarKind var, int index) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Variable;
  n->var = var;
  n->index = index;
  return n;
}

NodePtr add(NodePtr a, NodePtr b) {
  if (a->kind == NodeKind::Constant && b->kind == NodeKind::Constant)
    return constant(a->value + b->value);
  if (is_const(a, 0.0)) return b;
  if (is_const(b, 0.0)) return a;
  return make(NodeKind::Add, std::move(a), std::move(b));
}

NodePtr sub(NodePtr a, NodePtr b) {
  if (a->kind == NodeKind::Constant && b->kind == NodeKind::Constant)
    return constant(a->value - b->value);
  if (is_const(b, 0.0)) return a;
  if (is_const(a, 0.0)) return neg(std::move(b));
  return make(NodeKind::Sub, std::move(a), std::move(b));
}

NodePtr mul(NodePtr a, NodePtr b) {
  if (a->kind == NodeKind::Constant && b->kind == NodeKind::Constant)
    return constant(a->value * b->value);
  if (is_const(a, 0.0) || is_const(b, 0.0)) return constant(0.0);
  if (is_const(a, 1.0)) return b;
  if (is_const(b, 1.0)) return a;
  return make(NodeKind::Mul, std::move(a), std::move(b));
}

NodePtr div(NodePtr a, NodePtr b) {
  if (a->kind == NodeKind::Constant && b->kind == NodeKind::Constant && b->value != 0.0)
    return constant(a->value / b->value);
  if (is_const(a, 0.0)) return constant(0.0);
  if (is_const(b, 1.0)) return a;
  return make(NodeKind::Div, std::move(a), std::move(b));
}

NodePtr pow(NodePtr a, NodePtr b) {
  if (is_const(b, 1.0)) return a;
  if (is_const(b, 0.0)) return constant(1.0);
  return make(NodeKind::Pow, std::move(a), std::move(b));
}

NodePtr neg(NodePtr a) {
  if (a->kind == NodeKind::Constant) return constant(-a->value);
  if (a->kind == NodeKind::Neg) return a->a;
  return make(NodeKind::Neg, std::move(a));
}

NodePtr apply(FuncKind f, NodePtr a) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Func;
  n->func = f;
  n->a = std::move(a);
  return n;
}

double eval_node(const NodePtr& n, const EvalPoint& at) {
  switch (n->kind) {
    case NodeKind::Constant:
      return n->value;
    case NodeKind::Variable:
      switch (n->var) {
        case VarKind::Q:
          return at.q[n->index];
        case VarKind::P:
          return at.p[n->index];
        case VarKind::K:
          if (!at.k) throw EvalDomainError("expression uses parameter k but none was supplied");
          return *at.k;
      }
      break;
    case NodeKind::Add:
      return eval_node(n->a, at) + eval_node(n->b, at);
    case NodeKind::Sub:
      return eval_node(n->a, at) - eval_node(n->b, at);
    case NodeKind::Mul:
      return eval_node(n->a, at) * eval_node(n->b, at);
    case NodeKind::Div: {
      const double num = eval_node(n->a, at);
      const double den = eval_node(n->b, at);
      if (den == 0.0) throw EvalDomainError("division by zero");
      return num / den;
    }
    case NodeKind::Pow: {
      const double base = eval_node(n->a, at);
      if (n->b->kind == NodeKind::Constant && is_int(n->b->value))
        return powi(base, static_cast<long long>(std::nearbyint(n->b->value)));
      const double e = eval_node(n->b, at);
      if (base < 0.0) throw EvalDomainError("negative base with non-integer exponent");
      if (base == 0.0) {
        if (e <= 0.0) throw EvalDomainError("zero base with non-positive exponent");
        return 0.0;
      }
      return std::pow(base, e);
    }
    case NodeKind::Neg:
      return -eval_node(n->a, at);
    case NodeKind::Func: {
      const double x = eval_node(n->a, at);
      switch (n->func) {
        case FuncKind::Sin:
          return std::sin(x);
        case FuncKind::Cos:
          return std::cos(x);
        case FuncKind::Exp:
          return std::exp(x);
        case FuncKind::Log:
          if (x <= 0.0) throw EvalDomainError("log of a non-positive value");
          return std::log(x);
        case FuncKind::Cosh:
          return std::cosh(x);
        case FuncKind::Sinh:
          return std::sinh(x);
        case FuncKind::Sqrt:
          if (x < 0.0) throw EvalDomainError("sqrt of a negative value");
          return std::sqrt(x);
      }
      break;
    }
  }
  throw Error("corrupt expression node");
}

bool depends_on(const NodePtr& n, VarKind var, int index) {
  switch (n->kind) {
    case NodeKind::Constant:
      return false;
    case NodeKind::Variable:
      return n->var == var && (index < 0 || n->index == index);
    case NodeKind::Neg:
    case NodeKind::Func:
      return depends_on(n->a, var, index);
    default:
      return depends_on(n->a, var, index) || depends_on(n->b, var, index);
  }
}

NodePtr differentiate(const NodePtr& n, VarKind var, int index) {
  switch (n->kind) {
    case NodeKind::Constant:
      return constant(0.0);
    case NodeKind::Variable:
      return constant(n->var == var && n->index == index ? 1.0 : 0.0);
    case NodeKind::Add:
      return add(differentiate(n->a, var, index), differentiate(n->b, var, index));
    case NodeKind::Sub:
      return sub(differentiate(n->a, var, index), differentiate(n->b, var, index));
    case NodeKind::Mul:
      return add(mul(differentiate(n->a, var, index), n->b),
                 mul(n->a, differentiate(n->b, var, index)));
    case NodeKind::Div:
      return div(sub(mul(differentiate(n->a, var, index), n->b),
                     mul(n->a, differentiate(n->b, var, index))),
                 pow(n->b, constant(2.0)));
    case NodeKind::Pow: {
      if (n->b->kind == NodeKind::Constant) {
        const double c = n->b->value;
        return mul(mul(constant(c), pow(n->a, constant(c - 1.0))),
                   differentiate(n->a, var, index));
      }
      // a^b = exp(b log a); chain rule on both slots
      NodePtr da = differentiate(n->a, var, index);
      NodePtr db = differentiate(n->b, var, index);
      NodePtr term1 = mul(db, apply(FuncKind::Log, n->a));
      NodePtr term2 = div(mul(n->b, da), n->a);
      return mul(n, add(term1, term2));
    }
    case NodeKind::Neg:
      return neg(differentiate(n->a, var, index));
    case NodeKind::Func: {
      NodePtr inner = differentiate(n->a, var, index);
      switch (n->func) {
        case FuncKind::Sin:
          return mul(apply(FuncKind::Cos, n->a), inner);
        case FuncKind::Cos:
          return neg(mul(apply(FuncKind::Sin, n->a), inner));
        case FuncKind::Exp:
          return mul(apply(FuncKind::Exp, n->a), inner);
        case FuncKind::Log:
          return div(inner, n->a);
        case FuncKind::Cosh:
          return mul(apply(FuncKind::Sinh, n->a), inner);
        case FuncKind::Sinh:
          return mul(apply(FuncKind::Cosh, n->a), inner);
        case FuncKind::Sqrt:
          return div(inner, mul(constant(2.0), n));
      }
      break;
    }
  }
  throw Error("corrupt expression node");
}

namespace {

const char* func_name(FuncKind f) {
  switch (f) {
    case FuncKind::Sin:
      return "sin";
    case FuncKind::Cos:
      return "cos";
    case FuncKind::Exp:
      return "exp";
    case FuncKind::Log:
      return "log";
    case FuncKind::Cosh:
      return "cosh";
    case FuncKind::Sinh:
      return "sinh";
    case FuncKind::Sqrt:
      return "sqrt";
  }
  return "?";
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int precedence(const NodePtr& n) {
  switch (n->kind) {
    case NodeKind::Add:
    case NodeKind::Sub:
      return 1;
    case NodeKind::Mul:
    case NodeKind::Div:
      return 2;
    case NodeKind::Neg:
      return 3;
    case NodeKind::Pow:
      return 4;
    default:
      return 5;
  }
}

std::string print_node(const NodePtr& n, int parent_prec) {
  std::string s;
  const int prec = precedence(n);
  switch (n->kind) {
    case NodeKind::Constant:
      s = format_number(n->value);
      if (n->value < 0.0) return "(" + s + ")";
      return s;
    case NodeKind::Variable:
      switch (n->var) {
        case VarKind::Q:
          return "q" + std::to_string(n->index + 1);
        case VarKind::P:
          return "p" + std::to_string(n->index + 1);
        case VarKind::K:
          return "k";
      }
      break;
    case NodeKind::Add:
      s = print_node(n->a, prec) + " + " + print_node(n->b, prec);
      break;
    case NodeKind::Sub:
      s = print_node(n->a, prec) + " - " + print_node(n->b, prec + 1);
      break;
    case NodeKind::Mul:
      s = print_node(n->a, prec) + "*" + print_node(n->b, prec);
      break;
    case NodeKind::Div:
      s = print_node(n->a, prec) + "/" + print_node(n->b, prec + 1);
      break;
    case NodeKind::Pow:
      s = print_node(n->a, prec + 1) + "^" + print_node(n->b, prec);
      break;
    case NodeKind::Neg:
      s = "-" + print_node(n->a, prec);
      break;
    case NodeKind::Func:
      return std::string(func_name(n->func)) + "(" + print_node(n->a, 0) + ")";
  }
  if (prec < parent_prec) return "(" + s + ")";
  return s;
}

}  // namespace

std::string to_string(const NodePtr& n) { return print_node(n, 0); }

// ---------------------------------------------------------------------------
// Parser

namespace {

struct Token {
  enum Type { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, End } type;
  double number = 0.0;
  std::string ident;
  size_t pos = 0;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) {}

  Token next() {
    while (i_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[i_]))) ++i_;
    Token t;
    t.pos = i_;
    if (i_ >= src_.size()) {
      t.type = Token::End;
      return t;
    }
    const char c = src_[i_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      size_t end = i_;
      while (end < src_.size() &&
             (std::isdigit(static_cast<unsigned char>(src_[end])) || src_[end] == '.'))
        ++end;
      if (end < src_.size() && (src_[end] == 'e' || src_[end] == 'E')) {
        size_t e = end + 1;
        if (e < src_.size() && (src_[e] == '+' || src_[e] == '-')) ++e;
        if (e < src_.size() && std::isdigit(static_cast<unsigned char>(src_[e]))) {
          ++e;
          while (e < src_.size() && std::isdigit(static_cast<unsigned char>(src_[e]))) ++e;
          end = e;
        }
      }
      try {
        size_t used = 0;
        t.number = std::stod(src_.substr(i_, end - i_), &used);
        if (used != end - i_) throw ParseError("malformed number", i_);
      } catch (const std::invalid_argument&) {
        throw ParseError("malformed number", i_);
      } catch (const std::out_of_range&) {
        throw ParseError("number out of range", i_);
      }
      t.type = Token::Number;
      i_ = end;
      return t;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      size_t end = i_;
      while (end < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[end])))) ++end;
      t.type = Token::Ident;
      t.ident = src_.substr(i_, end - i_);
      i_ = end;
      return t;
    }
    ++i_;
    switch (c) {
      case '+':
        t.type = Token::Plus;
        return t;
      case '-':
        t.type = Token::Minus;
        return t;
      case '*':
        t.type = Token::Star;
        return t;
      case '/':
        t.type = Token::Slash;
        return t;
      case '^':
        t.type = Token::Caret;
        return t;
      case '(':
        t.type = Token::LParen;
        return t;
      case ')':
        t.type = Token::RParen;
        return t;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", t.pos);
    }
  }

 private:
  const std::string& src_;
  size_t i_ = 0;
};

class Parser {
 public:
  Parser(const std::string& src, const ManifoldSpec& m) : lexer_(src), manifold_(m) { advance(); }

  NodePtr parse_all() {
    NodePtr e = parse_expr();
    if (cur_.type != Token::End) throw ParseError("trailing input", cur_.pos);
    return e;
  }

 private:
  void advance() { cur_ = lexer_.next(); }

  NodePtr parse_expr() {
    NodePtr e = parse_term();
    while (cur_.type == Token::Plus || cur_.type == Token::Minus) {
      const bool plus = cur_.type == Token::Plus;
      advance();
      NodePtr rhs = parse_term();
      e = plus ? add(e, rhs) : sub(e, rhs);
    }
    return e;
  }

  NodePtr parse_term() {
    NodePtr e = parse_factor();
    while (cur_.type == Token::Star || cur_.type == Token::Slash) {
      const bool star = cur_.type == Token::Star;
      advance();
      NodePtr rhs = parse_factor();
      e = star ? mul(e, rhs) : div(e, rhs);
    }
    return e;
  }

  NodePtr parse_factor() {
    if (cur_.type == Token::Minus) {
      advance();
      return neg(parse_factor());
    }
    if (cur_.type == Token::Plus) {
      advance();
      return parse_factor();
    }
    NodePtr base = parse_base();
    if (cur_.type == Token::Caret) {
      advance();
      return pow(base, parse_factor());
    }
    return base;
  }

  NodePtr parse_base() {
    switch (cur_.type) {
      case Token::Number: {
        NodePtr n = constant(cur_.number);
        advance();
        return n;
      }
      case Token::LParen: {
        advance();
        NodePtr e = parse_expr();
        expect(Token::RParen, "')'");
        return e;
      }
      case Token::Ident: {
        const std::string name = cur_.ident;
        const size_t pos = cur_.pos;
        advance();
        if (auto f = func_from_name(name)) {
          expect(Token::LParen, "'(' after function name");
          NodePtr arg = parse_expr();
          expect(Token::RParen, "')'");
          return apply(*f, arg);
        }
        return ident_node(name, pos);
      }
      default:
        throw ParseError("expected a number, identifier or '('", cur_.pos);
    }
  }

  void expect(Token::Type t, const char* what) {
    if (cur_.type != t) throw ParseError(std::string("expected ") + what, cur_.pos);
    advance();
  }

  static std::optional<FuncKind> func_from_name(const std::string& s) {
    if (s == "sin") return FuncKind::Sin;
    if (s == "cos") return FuncKind::Cos;
    if (s == "exp") return FuncKind::Exp;
    if (s == "log") return FuncKind::Log;
    if (s == "cosh") return FuncKind::Cosh;
    if (s == "sinh") return FuncKind::Sinh;
    if (s == "sqrt") return FuncKind::Sqrt;
    return std::nullopt;
  }

  NodePtr ident_node(const std::string& name, size_t pos) {
    if (name == "k") return variable(VarKind::K, 0);
    if (name.size() == 2 && (name[0] == 'q' || name[0] == 'p') && name[1] >= '1' &&
        name[1] <= '9') {
      const int index = name[1] - '1';
      if (index >= manifold_.dim)
        throw ParseError("identifier '" + name + "' exceeds manifold dimension " +
                             std::to_string(manifold_.dim),
                         pos);
      return variable(name[0] == 'q' ? VarKind::Q : VarKind::P, index);
    }
    throw ParseError("unknown identifier '" + name + "'", pos);
  }

  Lexer lexer_;
  Token cur_;
  const ManifoldSpec& manifold_;
};

void validate_periodicity(const HamiltonianExpr& h) {
  const ManifoldSpec& m = h.manifold();
  if (m.kind != ManifoldKind::Torus) return;
  std::mt19937_64 rng(0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::vector<double> k_values = h.has_parameter() ? std::vector<double>{1, 3, 8}
                                                         : std::vector<double>{0};
  int checked = 0;
  for (int attempt = 0; attempt < 1000 && checked < 100; ++attempt) {
    PhasePoint x;
    x.q = Vec::zero(m.dim);
    x.p = Vec::zero(m.dim);
    for (int i = 0; i < m.dim; ++i) {
      x.q[i] = unit(rng) * m.period(i);
      x.p[i] = -3.0 + 6.0 * unit(rng);
    }
    const double kv = k_values[static_cast<size_t>(attempt) % k_values.size()];
    const std::optional<double> k = h.has_parameter() ? std::optional<double>(kv) : std::nullopt;
    try {
      const double base = h.eval(x, k);
      for (int axis = 0; axis < m.dim; ++axis) {
        PhasePoint shifted = x;
        shifted.q[axis] += m.period(axis);
        const double moved = h.eval(shifted, k);
        if (std::abs(moved - base) > 1e-9 * std::max(1.0, std::abs(base)))
          throw ParseError("expression is not periodic in q" + std::to_string(axis + 1), 0);
      }
      ++checked;
    } catch (const EvalDomainError&) {
      continue;  // sampled outside the expression's domain; try another point
    }
  }
  if (checked < 100)
    throw ParseError("could not validate periodicity: too few admissible sample points", 0);
}

}  // namespace

// ---------------------------------------------------------------------------
// HamiltonianExpr

HamiltonianExpr::HamiltonianExpr(NodePtr root, ManifoldSpec manifold)
    : root_(std::move(root)), manifold_(std::move(manifold)) {
  for (int i = manifold_.dim; i < 2; ++i) {
    if (depends_on(root_, VarKind::Q, i) || depends_on(root_, VarKind::P, i))
      throw Error("expression uses coordinates beyond the manifold dimension");
  }
  has_k_ = depends_on(root_, VarKind::K);
  const int n = manifold_.dim;
  dq_.resize(n);
  dp_.resize(n);
  d2pp_.assign(n, std::vector<NodePtr>(n));
  d2qq_.assign(n, std::vector<NodePtr>(n));
  d2qp_.assign(n, std::vector<NodePtr>(n));
  for (int i = 0; i < n; ++i) {
    dq_[i] = differentiate(root_, VarKind::Q, i);
    dp_[i] = differentiate(root_, VarKind::P, i);
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      d2pp_[i][j] = differentiate(dp_[i], VarKind::P, j);
      d2qq_[i][j] = differentiate(dq_[i], VarKind::Q, j);
      d2qp_[i][j] = differentiate(dq_[i], VarKind::P, j);
    }
}

EvalPoint HamiltonianExpr::make_point(const PhasePoint& x, std::optional<double> k) const {
  if (x.q.n != manifold_.dim || x.p.n != manifold_.dim)
    throw Error("evaluation point dimension mismatch");
  if (has_k_ && !k) throw EvalDomainError("expression uses parameter k but none was supplied");
  if (!has_k_ && k) throw EvalDomainError("parameter k supplied to a k-free expression");
  return EvalPoint{x.q, x.p, k};
}

double HamiltonianExpr::eval(const PhasePoint& x, std::optional<double> k) const {
  const EvalPoint at = make_point(x, k);
  const double v = eval_node(root_, at);
  if (!std::isfinite(v)) throw EvalDomainError("expression evaluated to a non-finite value");
  return v;
}

Partials HamiltonianExpr::partials(const PhasePoint& x, std::optional<double> k) const {
  const EvalPoint at = make_point(x, k);
  const int n = manifold_.dim;
  Partials out;
  out.dq = Vec::zero(n);
  out.dp = Vec::zero(n);
  out.d2pp = Mat::zero(n);
  for (int i = 0; i < n; ++i) {
    out.dq[i] = eval_node(dq_[i], at);
    out.dp[i] = eval_node(dp_[i], at);
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.d2pp(i, j) = eval_node(d2pp_[i][j], at);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double s = 0.5 * (out.d2pp(i, j) + out.d2pp(j, i));
      out.d2pp(i, j) = s;
      out.d2pp(j, i) = s;
    }
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(out.dq[i]) || !std::isfinite(out.dp[i]))
      throw EvalDomainError("partial derivative evaluated to a non-finite value");
  }
  return out;
}

SecondPartials HamiltonianExpr::second_partials(const PhasePoint& x,
                                                std::optional<double> k) const {
  const EvalPoint at = make_point(x, k);
  const int n = manifold_.dim;
  SecondPartials out;
  out.d2qq = Mat::zero(n);
  out.d2qp = Mat::zero(n);
  out.d2pp = Mat::zero(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      out.d2qq(i, j) = eval_node(d2qq_[i][j], at);
      out.d2qp(i, j) = eval_node(d2qp_[i][j], at);
      out.d2pp(i, j) = eval_node(d2pp_[i][j], at);
    }
  return out;
}

bool TonelliCertificate::superlinearity_plausible() const {
  for (size_t i = 1; i < superlinearity_probe.size(); ++i)
    if (!(superlinearity_probe[i].second > superlinearity_probe[i - 1].second)) return false;
  return !superlinearity_probe.empty();
}

TonelliCertificate HamiltonianExpr::tonelli_check(
    const std::vector<std::array<double, 2>>& q_range,
    const std::vector<std::array<double, 2>>& p_range, int samples, std::optional<double> k,
    uint64_t seed, std::vector<double> probe_radii) const {
  if (samples < 100) throw Error("tonelli_check needs at least 100 samples");
  const int n = manifold_.dim;
  if (static_cast<int>(q_range.size()) != n || static_cast<int>(p_range.size()) != n)
    throw Error("tonelli_check: box dimension mismatch");
  if (probe_radii.empty()) probe_radii = {1.0, 2.0, 4.0, 8.0, 16.0};

  TonelliCertificate cert;
  cert.q_range = q_range;
  cert.p_range = p_range;
  cert.seed = seed;
  cert.samples = samples;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto sample_in = [&](const std::vector<std::array<double, 2>>& r, int i) {
    return r[static_cast<size_t>(i)][0] +
           (r[static_cast<size_t>(i)][1] - r[static_cast<size_t>(i)][0]) * unit(rng);
  };

  double min_eig = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    PhasePoint x;
    x.q = Vec::zero(n);
    x.p = Vec::zero(n);
    for (int i = 0; i < n; ++i) {
      x.q[i] = sample_in(q_range, i);
      x.p[i] = sample_in(p_range, i);
    }
    min_eig = std::min(min_eig, partials(x, k).d2pp.min_eigenvalue());
  }
  cert.hessian_min_eig = min_eig;

  for (double radius : probe_radii) {
    double probe_min = std::numeric_limits<double>::infinity();
    for (int s = 0; s < samples; ++s) {
      PhasePoint x;
      x.q = Vec::zero(n);
      x.p = Vec::zero(n);
      for (int i = 0; i < n; ++i) x.q[i] = sample_in(q_range, i);
      if (n == 1) {
        x.p[0] = (s % 2 == 0) ? radius : -radius;
      } else {
        const double theta = unit(rng) * 2.0 * 3.14159265358979323846;
        x.p[0] = radius * std::cos(theta);
        x.p[1] = radius * std::sin(theta);
      }
      probe_min = std::min(probe_min, eval(x, k) / radius);
    }
    cert.superlinearity_probe.emplace_back(radius, probe_min);
  }
  return cert;
}

namespace {

NodePtr substitute_k(const NodePtr& n, double k) {
  switch (n->kind) {
    case NodeKind::Constant:
      return n;
    case NodeKind::Variable:
      return n->var == VarKind::K ? constant(k) : n;
    case NodeKind::Add:
      return add(substitute_k(n->a, k), substitute_k(n->b, k));
    case NodeKind::Sub:
      return sub(substitute_k(n->a, k), substitute_k(n->b, k));
    case NodeKind::Mul:
      return mul(substitute_k(n->a, k), substitute_k(n->b, k));
    case NodeKind::Div:
      return div(substitute_k(n->a, k), substitute_k(n->b, k));
    case NodeKind::Pow:
      return pow(substitute_k(n->a, k), substitute_k(n->b, k));
    case NodeKind::Neg:
      return neg(substitute_k(n->a, k));
    case NodeKind::Func:
      return apply(n->func, substitute_k(n->a, k));
  }
  throw Error("corrupt expression node");
}

void collect_terms(const NodePtr& n, bool negated, std::vector<NodePtr>* terms) {
  if (n->kind == NodeKind::Add) {
    collect_terms(n->a, negated, terms);
    collect_terms(n->b, negated, terms);
    return;
  }
  if (n->kind == NodeKind::Sub) {
    collect_terms(n->a, negated, terms);
    collect_terms(n->b, !negated, terms);
    return;
  }
  if (n->kind == NodeKind::Neg) {
    collect_terms(n->a, !negated, terms);
    return;
  }
  terms->push_back(n);
}

}  // namespace

HamiltonianExpr HamiltonianExpr::at_parameter(double k) const {
  if (!has_k_) throw Error("at_parameter: expression has no parameter k");
  return HamiltonianExpr(substitute_k(root_, k), manifold_);
}

bool HamiltonianExpr::separable() const {
  std::vector<NodePtr> terms;
  collect_terms(root_, false, &terms);
  for (const NodePtr& t : terms) {
    const bool uses_q = depends_on(t, VarKind::Q);
    const bool uses_p = depends_on(t, VarKind::P);
    if (uses_q && uses_p) return false;
  }
  return true;
}

HamiltonianExpr parse_unvalidated(const std::string& source, const ManifoldSpec& manifold) {
  Parser parser(source, manifold);
  return HamiltonianExpr(parser.parse_all(), manifold);
}

HamiltonianExpr parse(const std::string& source, const ManifoldSpec& manifold) {
  HamiltonianExpr h = parse_unvalidated(source, manifold);
  validate_periodicity(h);
  return h;
}

HamiltonianSequence::HamiltonianSequence(HamiltonianExpr family_, HamiltonianExpr limit_)
    : family(std::move(family_)), limit(std::move(limit_)) {
  if (limit.has_parameter()) throw Error("sequence limit must be k-free");
  if (!(family.manifold() == limit.manifold()))
    throw Error("sequence family and limit must share a manifold");
}

const std::vector<CorpusEntry>& corpus() {
  static const std::vector<CorpusEntry> entries = [] {
    const ManifoldSpec t1 = ManifoldSpec::torus(1);
    const ManifoldSpec t2 = ManifoldSpec::torus(2);
    const std::vector<std::array<double, 2>> q1{{0.0, t1.period(0)}};
    const std::vector<std::array<double, 2>> p1{{-3.0, 3.0}};
    std::vector<CorpusEntry> v;
    v.push_back({"free", "0.5*p1^2", t1, q1, p1});
    v.push_back({"pendulum", "0.5*p1^2 + cos(q1)", t1, q1, p1});
    v.push_back({"cosh-fiber", "cosh(p1) + 0.5*cos(q1)", t1, q1, p1});
    v.push_back({"coupled sin-perturbed", "0.5*p1^2 + 0.125*sin(8*q1)*sin(p1)", t1, q1, p1});
    v.push_back({"mechanical-2d", "0.5*(p1^2 + p2^2) + 0.3*cos(q1)*cos(q2)", t2,
                 {{0.0, t2.period(0)}, {0.0, t2.period(1)}}, {{-3.0, 3.0}, {-3.0, 3.0}}});
    return v;
  }();
  return entries;
}

}  // namespace riglab::expr
