#include "widepose/sampling.hpp"

#include "widepose/error.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <random>

namespace widepose {

void SamplingParams::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha must be positive");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::kInvalidArgument, "lambda must be non-negative");
  }
  if (reference_sizes.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "at least one reference size is required");
  }
  for (std::size_t i = 0; i < reference_sizes.size(); ++i) {
    if (!(reference_sizes[i] > 0.0) || (i > 0 && reference_sizes[i] <= reference_sizes[i - 1])) {
      throw Error(ErrorCode::kInvalidArgument, "reference sizes must be positive and increasing");
    }
  }
}

std::vector<double> level_deltas(double object_size, const SamplingParams& params) {
  if (!(object_size > 0.0) || !std::isfinite(object_size)) {
    throw Error(ErrorCode::kNonPositiveSize, "object size must be positive");
  }
  std::vector<double> deltas;
  deltas.reserve(params.reference_sizes.size());
  for (double s : params.reference_sizes) deltas.push_back(std::abs(std::log2(object_size / s)));
  return deltas;
}

SamplingPlan sample_counts(double object_size, const SamplingParams& params) {
  params.validate();
  const std::vector<double> deltas = level_deltas(object_size, params);

  // Shift by the smallest exponent so the largest weight is exactly 1.
  double min_energy = INFINITY;
  for (double d : deltas) min_energy = std::min(min_energy, params.lambda * d * d);

  std::vector<double> weights;
  weights.reserve(deltas.size());
  double total = 0.0;
  for (double d : deltas) {
    weights.push_back(std::exp(-(params.lambda * d * d - min_energy)));
    total += weights.back();
  }

  SamplingPlan plan;
  plan.expected.reserve(weights.size());
  for (double w : weights) plan.expected.push_back(params.alpha * w / total);
  return plan;
}

std::vector<std::size_t> realize_counts(const std::vector<double>& expected, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::size_t> out;
  out.reserve(expected.size());
  for (double n : expected) {
    if (!(n >= 0.0) || !std::isfinite(n)) {
      throw Error(ErrorCode::kInvalidArgument, "expected counts must be finite and non-negative");
    }
    const double base = std::floor(n);
    const double frac = n - base;
    // Always consume one draw per level so level k's outcome does not depend
    // on whether earlier levels were integral.
    const double draw = unit(rng);
    out.push_back(static_cast<std::size_t>(base) + (draw < frac ? 1u : 0u));
  }
  return out;
}

std::vector<std::size_t> realize_counts_rounded(const std::vector<double>& expected) {
  std::vector<std::size_t> out;
  out.reserve(expected.size());
  for (double n : expected) {
    if (!(n >= 0.0) || !std::isfinite(n)) {
      throw Error(ErrorCode::kInvalidArgument, "expected counts must be finite and non-negative");
    }
    out.push_back(static_cast<std::size_t>(std::floor(n + 0.5)));
  }
  return out;
}

std::vector<std::vector<CellIndex>> select_cells(const SegmentationMask& mask,
                                                 const std::vector<std::size_t>& counts,
                                                 std::uint64_t seed) {
  if (counts.size() != mask.num_levels()) {
    throw Error(ErrorCode::kInvalidArgument, "one count per mask level is required");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::vector<CellIndex>> out(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const std::vector<CellIndex> candidates = mask.cells(k);
    if (counts[k] >= candidates.size()) {
      out[k] = candidates;
      continue;
    }
    // Selection sampling keeps the row-major order of the candidates.
    std::sample(candidates.begin(), candidates.end(), std::back_inserter(out[k]), counts[k], rng);
  }
  return out;
}

}  // namespace widepose
