#pragma once

// Closed-form Hamiltonians H(q, p; k): parsing, evaluation with guarded
// domains, and exact symbolic partial derivatives. Derivative trees for the
// first and second partials are built eagerly at construction, so evaluation
// is pure and shareable across threads.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "riglab/geometry.hpp"

namespace riglab::expr {

class ParseError : public Error {
 public:
  ParseError(const std::string& what, size_t position)
      : Error(what + " (at position " + std::to_string(position) + ")"), position(position) {}
  size_t position;
};

class EvalDomainError : public Error {
 public:
  explicit EvalDomainError(const std::string& what) : Error(what) {}
};

enum class NodeKind { Constant, Variable, Add, Sub, Mul, Div, Pow, Neg, Func };
enum class FuncKind { Sin, Cos, Exp, Log, Cosh, Sinh, Sqrt };
enum class VarKind { Q, P, K };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  NodeKind kind;
  double value = 0.0;       // Constant
  VarKind var = VarKind::K; // Variable
  int index = 0;            // Variable: component index (0-based), unused for K
  FuncKind func = FuncKind::Sin;
  NodePtr a, b;
};

NodePtr constant(double v);
NodePtr variable(VarKind var, int index);
NodePtr add(NodePtr a, NodePtr b);
NodePtr sub(NodePtr a, NodePtr b);
NodePtr mul(NodePtr a, NodePtr b);
NodePtr div(NodePtr a, NodePtr b);
NodePtr pow(NodePtr a, NodePtr b);
NodePtr neg(NodePtr a);
NodePtr apply(FuncKind f, NodePtr a);

struct EvalPoint {
  Vec q;
  Vec p;
  std::optional<double> k;
};

double eval_node(const NodePtr& n, const EvalPoint& at);
NodePtr differentiate(const NodePtr& n, VarKind var, int index);
std::string to_string(const NodePtr& n);
bool depends_on(const NodePtr& n, VarKind var, int index = -1);  // index -1: any component

struct Partials {
  Vec dq;
  Vec dp;
  Mat d2pp;  // symmetrized fiber Hessian
};

struct SecondPartials {
  Mat d2qq;
  Mat d2qp;  // entry (i,j) = d^2 H / dq_i dp_j
  Mat d2pp;
};

// Probe of the Tonelli conditions on a compact box, by deterministic seeded
// sampling. Superlinearity is a forall/exists condition, so the probe can only
// report "plausible", never "proved".
struct TonelliCertificate {
  std::vector<std::array<double, 2>> q_range;  // per-axis [lo, hi]
  std::vector<std::array<double, 2>> p_range;
  double hessian_min_eig = 0.0;
  std::vector<std::pair<double, double>> superlinearity_probe;  // (radius, min H/|p|)
  uint64_t seed = 0;
  int samples = 0;

  bool tonelli_on_box() const { return hessian_min_eig > 0.0; }
  bool superlinearity_plausible() const;
};

class HamiltonianExpr {
 public:
  HamiltonianExpr(NodePtr root, ManifoldSpec manifold);

  const ManifoldSpec& manifold() const { return manifold_; }
  bool has_parameter() const { return has_k_; }
  const NodePtr& root() const { return root_; }

  double eval(const PhasePoint& x, std::optional<double> k = std::nullopt) const;
  Partials partials(const PhasePoint& x, std::optional<double> k = std::nullopt) const;
  SecondPartials second_partials(const PhasePoint& x, std::optional<double> k = std::nullopt) const;

  TonelliCertificate tonelli_check(const std::vector<std::array<double, 2>>& q_range,
                                   const std::vector<std::array<double, 2>>& p_range,
                                   int samples = 400, std::optional<double> k = std::nullopt,
                                   uint64_t seed = 12345,
                                   std::vector<double> probe_radii = {}) const;

  std::string to_string() const { return expr::to_string(root_); }

  // Fixes the parameter k, yielding a parameter-free instance.
  HamiltonianExpr at_parameter(double k) const;

  // True when the expression splits additively into p-only and q-only parts.
  bool separable() const;

 private:
  EvalPoint make_point(const PhasePoint& x, std::optional<double> k) const;

  NodePtr root_;
  ManifoldSpec manifold_;
  bool has_k_ = false;
  std::vector<NodePtr> dq_, dp_;            // first partials, n entries each
  std::vector<std::vector<NodePtr>> d2pp_;  // n x n
  std::vector<std::vector<NodePtr>> d2qq_;
  std::vector<std::vector<NodePtr>> d2qp_;
};

// Parses the grammar
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := ('+'|'-')* base ('^' factor)?
//   base   := number | ident | '(' expr ')' | func '(' expr ')'
// with func in {sin, cos, exp, log, cosh, sinh, sqrt} and ident in
// {q1..qn, p1..pn, k}. Torus manifolds additionally require the expression to
// be periodic in q (validated at random sample points).
HamiltonianExpr parse(const std::string& source, const ManifoldSpec& manifold);

// Parse without the periodicity validation (used by the validator itself and
// for auxiliary non-Hamiltonian expressions).
HamiltonianExpr parse_unvalidated(const std::string& source, const ManifoldSpec& manifold);

struct HamiltonianSequence {
  HamiltonianExpr family;  // depends on k; a k-free family is the constant sequence
  HamiltonianExpr limit;   // k-free

  HamiltonianSequence(HamiltonianExpr family_, HamiltonianExpr limit_);

  bool constant() const { return !family.has_parameter(); }
  // The k-th member, with the parameter already substituted.
  HamiltonianExpr at(double k) const {
    return constant() ? family : family.at_parameter(k);
  }
};

// Built-in corpus entry used across tests and experiment defaults.
struct CorpusEntry {
  std::string name;
  std::string source;
  ManifoldSpec manifold;
  std::vector<std::array<double, 2>> q_range;
  std::vector<std::array<double, 2>> p_range;
};

const std::vector<CorpusEntry>& corpus();

}  // namespace riglab::expr
