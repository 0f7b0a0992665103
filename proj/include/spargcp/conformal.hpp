#pragma once

#include <cstdint>
#include <vector>

#include "spargcp/matrix.hpp"

namespace spargcp {

/// Sorted list of included label ids for one node. May be empty.
using PredictionSet = std::vector<std::int32_t>;

struct CalibrationResult {
  double threshold = 0.0;
  std::vector<double> scores;  // one per calibration row, input order
};

/// Class ranking of one probability row: probability descending, ties by
/// label id ascending.
std::vector<std::int32_t> rank_labels(const Matrix& probs, std::size_t row);

/// Adaptive prediction-set score: cumulative probability mass of the row's
/// ranking up to and including `label`. Deterministic, no randomization.
double aps_score(const Matrix& probs, std::size_t row, std::int32_t label);

/// Score every calibration row at its true label and take the j-th smallest
/// with j = clamp(ceil((1 - alpha) * (n + 1)), 1, n).
CalibrationResult calibrate(const Matrix& probs,
                            const std::vector<std::int32_t>& labels,
                            double alpha);

/// Include label y for a node iff its cumulative-mass score is <= threshold.
std::vector<PredictionSet> predict_sets(const Matrix& probs,
                                        double threshold);

/// Fraction of nodes whose true label lands in its prediction set.
double coverage(const std::vector<PredictionSet>& sets,
                const std::vector<std::int32_t>& labels);

/// Mean prediction-set cardinality.
double efficiency(const std::vector<PredictionSet>& sets);

}  // namespace spargcp
