#pragma once

// Charts, points and arc metrics on T*M and TM for M in {T^n, R^n}, n = 1, 2.
// Torus coordinates are stored reduced to [0, period) with an integer winding
// so that lifts (unwrapped coordinates) are always available for velocities.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace riglab {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class GridMismatchError : public Error {
 public:
  explicit GridMismatchError(const std::string& what) : Error(what) {}
};

// Fixed-capacity coordinate vector; dimensions here are 1 or 2.
struct Vec {
  int n = 0;
  std::array<double, 2> x{0.0, 0.0};

  Vec() = default;
  explicit Vec(double a) : n(1), x{a, 0.0} {}
  Vec(double a, double b) : n(2), x{a, b} {}
  static Vec zero(int dim) {
    Vec v;
    v.n = dim;
    return v;
  }

  double& operator[](int i) { return x[static_cast<size_t>(i)]; }
  double operator[](int i) const { return x[static_cast<size_t>(i)]; }

  Vec& operator+=(const Vec& o) {
    for (int i = 0; i < n; ++i) x[i] += o.x[i];
    return *this;
  }
  Vec& operator-=(const Vec& o) {
    for (int i = 0; i < n; ++i) x[i] -= o.x[i];
    return *this;
  }
  Vec& operator*=(double s) {
    for (int i = 0; i < n; ++i) x[i] *= s;
    return *this;
  }
  friend Vec operator+(Vec a, const Vec& b) { return a += b; }
  friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
  friend Vec operator*(double s, Vec a) { return a *= s; }
  friend Vec operator*(Vec a, double s) { return a *= s; }
};

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (int i = 0; i < a.n; ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

// Symmetric/general n-by-n matrix, n <= 2.
struct Mat {
  int n = 0;
  std::array<std::array<double, 2>, 2> a{{{0.0, 0.0}, {0.0, 0.0}}};

  static Mat zero(int dim) {
    Mat m;
    m.n = dim;
    return m;
  }
  static Mat identity(int dim) {
    Mat m = zero(dim);
    for (int i = 0; i < dim; ++i) m.a[i][i] = 1.0;
    return m;
  }

  double& operator()(int i, int j) { return a[static_cast<size_t>(i)][static_cast<size_t>(j)]; }
  double operator()(int i, int j) const {
    return a[static_cast<size_t>(i)][static_cast<size_t>(j)];
  }

  Vec apply(const Vec& v) const {
    Vec r = Vec::zero(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) r[i] += a[i][j] * v[j];
    return r;
  }

  double det() const { return n == 1 ? a[0][0] : a[0][0] * a[1][1] - a[0][1] * a[1][0]; }

  // Least eigenvalue; assumes the matrix is symmetric.
  double min_eigenvalue() const {
    if (n == 1) return a[0][0];
    const double tr = a[0][0] + a[1][1];
    const double d = det();
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - d));
    return tr / 2.0 - disc;
  }

  // Spectral norm of a (possibly non-symmetric) matrix via A^T A.
  double operator_norm() const {
    if (n == 1) return std::abs(a[0][0]);
    Mat ata = zero(2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) ata(i, j) += a[k][i] * a[k][j];
    const double tr = ata(0, 0) + ata(1, 1);
    const double d = ata.det();
    const double lmax = tr / 2.0 + std::sqrt(std::max(0.0, tr * tr / 4.0 - d));
    return std::sqrt(std::max(0.0, lmax));
  }

  Vec solve(const Vec& b) const;
};

enum class ManifoldKind { Torus, Euclidean };

struct ManifoldSpec {
  ManifoldKind kind = ManifoldKind::Torus;
  int dim = 1;
  std::vector<double> periods;  // Torus only

  static ManifoldSpec torus(int dim, std::vector<double> periods = {});
  static ManifoldSpec euclidean(int dim);

  double period(int axis) const { return periods[static_cast<size_t>(axis)]; }
  bool operator==(const ManifoldSpec& o) const;
};

struct ReduceResult {
  Vec reduced;
  std::array<int64_t, 2> winding{0, 0};
};

// Reduce a raw coordinate into the fundamental domain; raw = reduced + winding*period.
ReduceResult reduce(const Vec& q_raw, const ManifoldSpec& m);

// Per-component geodesic distance between base points (min(|d|, period-|d|) on the torus).
double base_distance(const Vec& qa, const Vec& qb, const ManifoldSpec& m);

struct PhasePoint {
  Vec q;  // reduced for Torus
  Vec p;

  PhasePoint() = default;
  PhasePoint(const Vec& q_, const Vec& p_, const ManifoldSpec& m) : p(p_) {
    q = reduce(q_, m).reduced;
  }
  static PhasePoint raw(const Vec& q_, const Vec& p_) {
    PhasePoint x;
    x.q = q_;
    x.p = p_;
    return x;
  }
};

struct TangentPoint {
  Vec q;
  Vec v;

  TangentPoint() = default;
  TangentPoint(const Vec& q_, const Vec& v_, const ManifoldSpec& m) : v(v_) {
    q = reduce(q_, m).reduced;
  }
  static TangentPoint raw(const Vec& q_, const Vec& v_) {
    TangentPoint x;
    x.q = q_;
    x.v = v_;
    return x;
  }
};

enum class ArcKind { Phase, Tangent };

// Uniform-grid arc on T*M or TM. The base track is stored unwrapped (lift
// coordinates) so finite differences never jump across the periodic seam;
// reduced coordinates are recovered on demand.
struct DiscretizedArc {
  ManifoldSpec manifold;
  ArcKind kind = ArcKind::Phase;
  double t0 = 0.0, t1 = 1.0;
  std::vector<Vec> q_lift;  // size N
  std::vector<Vec> fiber;   // p (Phase) or v (Tangent), size N

  int nodes() const { return static_cast<int>(q_lift.size()); }
  double dt() const { return (t1 - t0) / (nodes() - 1); }
  double time_at(int i) const { return t0 + dt() * i; }

  Vec q_reduced(int i) const { return reduce(q_lift[static_cast<size_t>(i)], manifold).reduced; }
  PhasePoint phase_at(int i) const;
  TangentPoint tangent_at(int i) const;

  void validate() const;
};

enum class ArcComponent { Base, Fiber };

// Sup over nodes of the chart distance, for the requested component.
double arc_distance_c0(const DiscretizedArc& a, const DiscretizedArc& b,
                       ArcComponent component = ArcComponent::Base);

// Trapezoid-rule L2 distance (integral of the squared chart distance).
double arc_distance_l2(const DiscretizedArc& a, const DiscretizedArc& b,
                       ArcComponent component = ArcComponent::Fiber);

// Trapezoid rule on a uniform grid of samples.
double trapezoid(const std::vector<double>& samples, double dt);

}  // namespace riglab
