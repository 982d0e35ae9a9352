#include "riglab/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace riglab {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

Vec Mat::solve(const Vec& b) const {
  if (n == 1) {
    if (a[0][0] == 0.0) throw Error("singular 1x1 system");
    return Vec(b[0] / a[0][0]);
  }
  const double d = det();
  if (d == 0.0) throw Error("singular 2x2 system");
  Vec r(0.0, 0.0);
  r[0] = (b[0] * a[1][1] - b[1] * a[0][1]) / d;
  r[1] = (a[0][0] * b[1] - a[1][0] * b[0]) / d;
  return r;
}

ManifoldSpec ManifoldSpec::torus(int dim, std::vector<double> periods) {
  if (dim != 1 && dim != 2) throw Error("manifold dim must be 1 or 2");
  if (periods.empty()) periods.assign(static_cast<size_t>(dim), kTwoPi);
  if (static_cast<int>(periods.size()) != dim)
    throw Error("periods length must match manifold dim");
  for (double p : periods)
    if (!(p > 0.0)) throw Error("torus periods must be strictly positive");
  ManifoldSpec m;
  m.kind = ManifoldKind::Torus;
  m.dim = dim;
  m.periods = std::move(periods);
  return m;
}

ManifoldSpec ManifoldSpec::euclidean(int dim) {
  if (dim != 1 && dim != 2) throw Error("manifold dim must be 1 or 2");
  ManifoldSpec m;
  m.kind = ManifoldKind::Euclidean;
  m.dim = dim;
  return m;
}

bool ManifoldSpec::operator==(const ManifoldSpec& o) const {
  return kind == o.kind && dim == o.dim && periods == o.periods;
}

ReduceResult reduce(const Vec& q_raw, const ManifoldSpec& m) {
  if (q_raw.n != m.dim) throw Error("reduce: coordinate dimension mismatch");
  ReduceResult r;
  r.reduced = q_raw;
  if (m.kind == ManifoldKind::Euclidean) return r;
  for (int i = 0; i < m.dim; ++i) {
    const double per = m.period(i);
    double w = std::floor(q_raw[i] / per);
    double red = q_raw[i] - w * per;
    // floor rounding can leave red == per for raw values just below a seam
    if (red >= per) {
      red -= per;
      w += 1.0;
    }
    if (red < 0.0) {
      red += per;
      w -= 1.0;
    }
    r.reduced[i] = red;
    r.winding[static_cast<size_t>(i)] = static_cast<int64_t>(w);
  }
  return r;
}

double base_distance(const Vec& qa, const Vec& qb, const ManifoldSpec& m) {
  double s = 0.0;
  for (int i = 0; i < m.dim; ++i) {
    double d = std::abs(qa[i] - qb[i]);
    if (m.kind == ManifoldKind::Torus) {
      const double per = m.period(i);
      d = std::fmod(d, per);
      d = std::min(d, per - d);
    }
    s += d * d;
  }
  return std::sqrt(s);
}

PhasePoint DiscretizedArc::phase_at(int i) const {
  if (kind != ArcKind::Phase) throw Error("arc does not carry phase nodes");
  return PhasePoint::raw(q_reduced(i), fiber[static_cast<size_t>(i)]);
}

TangentPoint DiscretizedArc::tangent_at(int i) const {
  if (kind != ArcKind::Tangent) throw Error("arc does not carry tangent nodes");
  return TangentPoint::raw(q_reduced(i), fiber[static_cast<size_t>(i)]);
}

void DiscretizedArc::validate() const {
  if (nodes() < 2) throw Error("arc needs at least 2 nodes");
  if (!(t1 > t0)) throw Error("arc needs t1 > t0");
  if (fiber.size() != q_lift.size()) throw Error("arc track lengths differ");
  for (const Vec& q : q_lift)
    if (q.n != manifold.dim) throw Error("arc node dimension mismatch");
}

namespace {

void check_same_grid(const DiscretizedArc& a, const DiscretizedArc& b) {
  if (!(a.manifold == b.manifold)) throw GridMismatchError("arcs live on different manifolds");
  if (a.kind != b.kind) throw GridMismatchError("arcs carry different node kinds");
  if (a.nodes() != b.nodes() || a.t0 != b.t0 || a.t1 != b.t1)
    throw GridMismatchError("arcs use different grids");
}

double node_component_distance(const DiscretizedArc& a, const DiscretizedArc& b, int i,
                               ArcComponent component) {
  if (component == ArcComponent::Base)
    return base_distance(a.q_reduced(i), b.q_reduced(i), a.manifold);
  return norm(a.fiber[static_cast<size_t>(i)] - b.fiber[static_cast<size_t>(i)]);
}

}  // namespace

double arc_distance_c0(const DiscretizedArc& a, const DiscretizedArc& b, ArcComponent component) {
  check_same_grid(a, b);
  double sup = 0.0;
  for (int i = 0; i < a.nodes(); ++i)
    sup = std::max(sup, node_component_distance(a, b, i, component));
  return sup;
}

double arc_distance_l2(const DiscretizedArc& a, const DiscretizedArc& b, ArcComponent component) {
  check_same_grid(a, b);
  std::vector<double> sq(static_cast<size_t>(a.nodes()));
  for (int i = 0; i < a.nodes(); ++i) {
    const double d = node_component_distance(a, b, i, component);
    sq[static_cast<size_t>(i)] = d * d;
  }
  return std::sqrt(trapezoid(sq, a.dt()));
}

double trapezoid(const std::vector<double>& samples, double dt) {
  if (samples.size() < 2) return 0.0;
  double s = 0.5 * (samples.front() + samples.back());
  for (size_t i = 1; i + 1 < samples.size(); ++i) s += samples[i];
  return s * dt;
}

}  // namespace riglab
