#include "gfd/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace gfd {

double auc_score(const std::vector<double>& scores, const std::vector<int8_t>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: size mismatch");
  const size_t n = scores.size();
  int64_t pos = 0;
  for (int8_t y : labels) pos += (y == 1);
  const int64_t neg = static_cast<int64_t>(n) - pos;
  if (pos == 0 || neg == 0) throw std::invalid_argument("auc undefined for single-class input");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&scores](size_t a, size_t b) { return scores[a] < scores[b]; });

  // rank-sum of positives with midranks for ties
  double pos_rank_sum = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
    for (size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) pos_rank_sum += midrank;
    i = j;
  }
  const double u = pos_rank_sum - 0.5 * static_cast<double>(pos) * (pos + 1);
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

double average_precision(const std::vector<double>& scores, const std::vector<int8_t>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("ap: size mismatch");
  const size_t n = scores.size();
  int64_t pos = 0;
  for (int8_t y : labels) pos += (y == 1);
  if (pos == 0) throw std::invalid_argument("average precision undefined without positives");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&scores](size_t a, size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });

  double ap = 0.0;
  int64_t tp = 0;
  for (size_t k = 0; k < n; ++k) {
    if (labels[order[k]] == 1) {
      ++tp;
      ap += static_cast<double>(tp) / static_cast<double>(k + 1);
    }
  }
  return ap / static_cast<double>(pos);
}

F1Result f1_scores(const std::vector<double>& scores, const std::vector<int8_t>& labels,
                   double threshold) {
  if (scores.size() != labels.size()) throw std::invalid_argument("f1: size mismatch");
  int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (labels[i] == 1)
      pred ? ++tp : ++fn;
    else
      pred ? ++fp : ++tn;
  }
  F1Result out;
  auto f1 = [&out](int64_t tp_, int64_t fp_, int64_t fn_) {
    // precision or recall with an empty denominator is treated as 0
    if (tp_ + fp_ == 0 || tp_ + fn_ == 0) out.zero_division_warning = true;
    const int64_t denom = 2 * tp_ + fp_ + fn_;
    if (denom == 0) return 0.0;
    return 2.0 * static_cast<double>(tp_) / static_cast<double>(denom);
  };
  out.f1_fraud = f1(tp, fp, fn);
  out.f1_benign = f1(tn, fn, fp);
  out.f1_macro = 0.5 * (out.f1_fraud + out.f1_benign);
  return out;
}

Metrics compute_metrics(const std::vector<double>& scores, const std::vector<int8_t>& labels,
                        double threshold) {
  Metrics m;
  m.threshold = threshold;
  m.auc = auc_score(scores, labels);
  m.ap = average_precision(scores, labels);
  F1Result f1 = f1_scores(scores, labels, threshold);
  m.f1_fraud = f1.f1_fraud;
  m.f1_benign = f1.f1_benign;
  m.f1_macro = f1.f1_macro;
  m.zero_division_warning = f1.zero_division_warning;
  return m;
}

}  // namespace gfd
