#include "riglab/sampling.hpp"

#include <cmath>
#include <random>

#include "riglab/expr.hpp"

namespace riglab {

int default_grid_per_axis(int total_axes) { return total_axes <= 2 ? 64 : 12; }

namespace {

double grid_coord(const std::array<double, 2>& range, int j, int m) {
  if (m <= 1) return 0.5 * (range[0] + range[1]);
  return range[0] + (range[1] - range[0]) * j / (m - 1);
}

}  // namespace

void for_each_phase_sample(const Box& q_range, const Box& p_range, const SampleScheme& scheme,
                           const std::function<void(const PhasePoint&)>& fn) {
  const int nq = static_cast<int>(q_range.size());
  const int np = static_cast<int>(p_range.size());
  const int axes = nq + np;
  if (axes < 2 || axes > 4 || nq != np) throw Error("sampling box dimension mismatch");
  const int m = scheme.grid_per_axis > 0 ? scheme.grid_per_axis : default_grid_per_axis(axes);

  long long total = 1;
  for (int a = 0; a < axes; ++a) total *= m;
  std::vector<int> idx(static_cast<size_t>(axes), 0);
  for (long long c = 0; c < total; ++c) {
    PhasePoint x;
    x.q = Vec::zero(nq);
    x.p = Vec::zero(np);
    for (int i = 0; i < nq; ++i) x.q[i] = grid_coord(q_range[static_cast<size_t>(i)], idx[i], m);
    for (int i = 0; i < np; ++i)
      x.p[i] = grid_coord(p_range[static_cast<size_t>(i)], idx[nq + i], m);
    fn(x);
    for (int a = 0; a < axes; ++a) {
      if (++idx[a] < m) break;
      idx[a] = 0;
    }
  }

  std::mt19937_64 rng(scheme.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int s = 0; s < scheme.random_samples; ++s) {
    PhasePoint x;
    x.q = Vec::zero(nq);
    x.p = Vec::zero(np);
    for (int i = 0; i < nq; ++i) {
      const auto& r = q_range[static_cast<size_t>(i)];
      x.q[i] = r[0] + (r[1] - r[0]) * unit(rng);
    }
    for (int i = 0; i < np; ++i) {
      const auto& r = p_range[static_cast<size_t>(i)];
      x.p[i] = r[0] + (r[1] - r[0]) * unit(rng);
    }
    fn(x);
  }
}

double sup_phase(const Box& q_range, const Box& p_range, const SampleScheme& scheme,
                 const std::function<double(const PhasePoint&)>& f, int* skipped) {
  double sup = 0.0;
  int skips = 0;
  for_each_phase_sample(q_range, p_range, scheme, [&](const PhasePoint& x) {
    try {
      sup = std::max(sup, std::abs(f(x)));
    } catch (const expr::EvalDomainError&) {
      ++skips;
    }
  });
  if (skipped) *skipped = skips;
  return sup;
}

}  // namespace riglab
