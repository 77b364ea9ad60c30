// Evaluation metrics: confusion-matrix statistics, rank-based ROC AUC with
// midrank tie handling, and seed aggregation (mean and coefficient of
// variation).
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "iada/errors.hpp"

namespace iada {

struct ConfusionMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long support_positive = 0;  // true instances of the positive class
  long support_total = 0;
};

// Standard binary-style metrics for one positive class. Undefined ratios
// (zero denominators) are reported as 0 by convention.
inline ConfusionMetrics confusion_metrics(const std::vector<int>& pred,
                                          const std::vector<int>& truth,
                                          int positive_class) {
  if (pred.size() != truth.size())
    throw ValueError("confusion_metrics: length mismatch " +
                     std::to_string(pred.size()) + " vs " +
                     std::to_string(truth.size()));
  if (pred.empty()) throw ValueError("confusion_metrics: empty input");
  long tp = 0, fp = 0, fn = 0, correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] == positive_class;
    const bool t = truth[i] == positive_class;
    if (pred[i] == truth[i]) ++correct;
    if (p && t) ++tp;
    if (p && !t) ++fp;
    if (!p && t) ++fn;
  }
  ConfusionMetrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(pred.size());
  m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = (m.precision + m.recall) > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  m.support_positive = tp + fn;
  m.support_total = static_cast<long>(pred.size());
  return m;
}

// Macro-averaged F1 over the given class labels.
inline double macro_f1(const std::vector<int>& pred,
                       const std::vector<int>& truth, int num_classes) {
  double s = 0.0;
  for (int c = 1; c <= num_classes; ++c)
    s += confusion_metrics(pred, truth, c).f1;
  return s / static_cast<double>(num_classes);
}

// ROC AUC as the Mann-Whitney statistic P(score+ > score-) + P(tie)/2,
// computed from midranks. `positive` marks the positive-class entries.
inline double auc_roc(const std::vector<double>& scores,
                      const std::vector<bool>& positive) {
  if (scores.size() != positive.size())
    throw ValueError("auc_roc: length mismatch");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (bool b : positive) n_pos += b ? 1 : 0;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw ValueError("auc_roc: both classes must be present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Midranks over tie groups; ranks are 1-based.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k)
      if (positive[order[k]]) rank_sum_pos += midrank;
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

// Macro one-vs-rest AUC for multi-class scoring: the mean over classes of
// the binary AUC of that class's score column. `scores` is n x C row-major;
// labels in {1..C}. Used when C > 2; the binary case reads column 0.
inline double macro_ovr_auc(const std::vector<std::vector<double>>& scores,
                            const std::vector<int>& labels, int num_classes) {
  if (scores.size() != labels.size() || scores.empty())
    throw ValueError("macro_ovr_auc: shape mismatch or empty input");
  double total = 0.0;
  for (int c = 1; c <= num_classes; ++c) {
    std::vector<double> col(scores.size());
    std::vector<bool> positive(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
      col[i] = scores[i][static_cast<std::size_t>(c - 1)];
      positive[i] = labels[i] == c;
    }
    total += auc_roc(col, positive);
  }
  return total / static_cast<double>(num_classes);
}

struct SeedAggregate {
  double mean = 0.0;
  double cv_percent = 0.0;   // 100 * population std / mean
  bool cv_defined = true;    // false when mean == 0
};

inline SeedAggregate seed_aggregate(const std::vector<double>& values) {
  if (values.empty()) throw ValueError("seed_aggregate: empty input");
  bool all_same = true;
  for (double v : values) all_same = all_same && v == values[0];
  if (all_same) {
    SeedAggregate a;
    a.mean = values[0];
    a.cv_defined = values[0] != 0.0;
    return a;
  }
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= n;  // population variance: the seeds are the whole run population
  SeedAggregate a;
  a.mean = mean;
  if (mean == 0.0) {
    a.cv_defined = false;
    a.cv_percent = 0.0;
  } else {
    a.cv_percent = 100.0 * std::sqrt(var) / mean;
  }
  return a;
}

}  // namespace iada
