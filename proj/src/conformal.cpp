#include "spargcp/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "spargcp/common.hpp"

namespace spargcp {

namespace {

void check_distribution_row(const Matrix& probs, std::size_t row) {
  double total = 0.0;
  for (std::size_t c = 0; c < probs.cols(); ++c) {
    const double p = probs(row, c);
    if (!(p >= 0.0) || p > 1.0 + 1e-9)
      throw ValidationError("conformal: probability out of [0, 1] at row " +
                            std::to_string(row));
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ValidationError("conformal: row " + std::to_string(row) +
                          " sums to " + std::to_string(total));
}

void check_prob_matrix(const Matrix& probs) {
  if (probs.rows() == 0 || probs.cols() == 0)
    throw ValidationError("conformal: empty probability matrix");
  for (std::size_t r = 0; r < probs.rows(); ++r)
    check_distribution_row(probs, r);
}

}  // namespace

std::vector<std::int32_t> rank_labels(const Matrix& probs, std::size_t row) {
  if (row >= probs.rows())
    throw ValidationError("conformal: row index out of range");
  std::vector<std::int32_t> order(probs.cols());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::int32_t a, std::int32_t b) {
              const double pa = probs(row, static_cast<std::size_t>(a));
              const double pb = probs(row, static_cast<std::size_t>(b));
              if (pa != pb) return pa > pb;
              return a < b;
            });
  return order;
}

double aps_score(const Matrix& probs, std::size_t row, std::int32_t label) {
  if (row >= probs.rows())
    throw ValidationError("conformal: row index out of range");
  if (label < 0 || static_cast<std::size_t>(label) >= probs.cols())
    throw ValidationError("conformal: label " + std::to_string(label) +
                          " out of range for " + std::to_string(probs.cols()) +
                          " classes");
  check_distribution_row(probs, row);
  double mass = 0.0;
  for (std::int32_t y : rank_labels(probs, row)) {
    mass = std::min(mass + probs(row, static_cast<std::size_t>(y)), 1.0);
    if (y == label) return mass;
  }
  throw UsageError("aps_score: ranking omitted a label");
}

CalibrationResult calibrate(const Matrix& probs,
                            const std::vector<std::int32_t>& labels,
                            double alpha) {
  if (!(alpha > 0.0) || !(alpha < 1.0))
    throw ConfigError("calibrate: alpha must lie in (0, 1)");
  if (probs.rows() == 0)
    throw ValidationError("calibrate: empty calibration set");
  if (labels.size() != probs.rows())
    throw ValidationError("calibrate: " + std::to_string(probs.rows()) +
                          " rows but " + std::to_string(labels.size()) +
                          " labels");
  check_prob_matrix(probs);

  CalibrationResult result;
  result.scores.reserve(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r)
    result.scores.push_back(aps_score(probs, r, labels[r]));

  const std::size_t n = result.scores.size();
  const double x =
      snap_integer((1.0 - alpha) * static_cast<double>(n + 1));
  long long j = static_cast<long long>(std::ceil(x));
  j = std::max(1ll, std::min(j, static_cast<long long>(n)));

  std::vector<double> sorted = result.scores;
  std::sort(sorted.begin(), sorted.end());
  result.threshold = sorted[static_cast<std::size_t>(j - 1)];
  return result;
}

std::vector<PredictionSet> predict_sets(const Matrix& probs,
                                        double threshold) {
  check_prob_matrix(probs);
  std::vector<PredictionSet> sets(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    double mass = 0.0;
    for (std::int32_t y : rank_labels(probs, r)) {
      mass = std::min(mass + probs(r, static_cast<std::size_t>(y)), 1.0);
      if (mass <= threshold)
        sets[r].push_back(y);
      else
        break;
    }
    std::sort(sets[r].begin(), sets[r].end());
  }
  return sets;
}

double coverage(const std::vector<PredictionSet>& sets,
                const std::vector<std::int32_t>& labels) {
  if (sets.empty()) throw ValidationError("coverage: no prediction sets");
  if (sets.size() != labels.size())
    throw ValidationError("coverage: " + std::to_string(sets.size()) +
                          " sets but " + std::to_string(labels.size()) +
                          " labels");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < sets.size(); ++i)
    if (std::binary_search(sets[i].begin(), sets[i].end(), labels[i])) ++hit;
  return static_cast<double>(hit) / static_cast<double>(sets.size());
}

double efficiency(const std::vector<PredictionSet>& sets) {
  if (sets.empty()) throw ValidationError("efficiency: no prediction sets");
  std::size_t total = 0;
  for (const auto& s : sets) total += s.size();
  return static_cast<double>(total) / static_cast<double>(sets.size());
}

}  // namespace spargcp
