#pragma once

// Sup-norm estimation over compact (q, p) boxes: a deterministic grid plus a
// seeded batch of uniform random samples. Every module that claims a
// "sup over the box" goes through this scheme so results are comparable and
// reproducible.

#include <cstdint>
#include <functional>

#include "riglab/geometry.hpp"

namespace riglab {

using Box = std::vector<std::array<double, 2>>;

struct SampleScheme {
  int grid_per_axis = 0;  // 0 picks a default from the axis count (64 for 2 axes, 12 for 4)
  int random_samples = 1000;
  uint64_t seed = 20260801u;
};

int default_grid_per_axis(int total_axes);

// Calls fn at every grid point and random sample of the box [q_range x p_range].
void for_each_phase_sample(const Box& q_range, const Box& p_range, const SampleScheme& scheme,
                           const std::function<void(const PhasePoint&)>& fn);

// Sampled sup of |f|; f may throw EvalDomainError on isolated points, which
// are skipped (the count of skips is added to *skipped when given).
double sup_phase(const Box& q_range, const Box& p_range, const SampleScheme& scheme,
                 const std::function<double(const PhasePoint&)>& f, int* skipped = nullptr);

}  // namespace riglab
