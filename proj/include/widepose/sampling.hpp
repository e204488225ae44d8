#pragma once

// Ensemble-aware distribution of a per-instance sample budget over pyramid
// levels. Every level gets a share of the budget that decays with the squared
// log2 distance between the object size and the level's reference size; the
// concentration parameter lambda moves between a uniform split (0) and
// classic hard assignment (large values).

#include "widepose/grid.hpp"

#include <cstdint>
#include <vector>

namespace widepose {

struct SamplingParams {
  double alpha = 10.0;
  double lambda = 1.0;
  std::vector<double> reference_sizes = {16.0, 32.0, 64.0, 128.0, 256.0};

  void validate() const;
};

struct SamplingPlan {
  std::vector<double> expected;      // N_k
  std::vector<std::size_t> realized; // n_k, filled by one of the realize_* calls
};

/// |log2(S / s_k)| per level. Throws kNonPositiveSize unless S > 0.
std::vector<double> level_deltas(double object_size, const SamplingParams& params);

/// Softmax of -lambda * delta^2, scaled so the counts sum to alpha.
SamplingPlan sample_counts(double object_size, const SamplingParams& params);

/// floor(N_k) plus a Bernoulli draw on the fractional part; E[n_k] = N_k.
std::vector<std::size_t> realize_counts(const std::vector<double>& expected, std::uint64_t seed);

/// floor(N_k + 0.5), used at inference where reproducibility matters more
/// than unbiasedness.
std::vector<std::size_t> realize_counts_rounded(const std::vector<double>& expected);

/// Draws n_k distinct masked cells per level, uniformly without replacement.
/// Levels with fewer masked cells than n_k return all of them.
std::vector<std::vector<CellIndex>> select_cells(const SegmentationMask& mask,
                                                 const std::vector<std::size_t>& counts,
                                                 std::uint64_t seed);

}  // namespace widepose
