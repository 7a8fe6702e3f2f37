#pragma once

#include <cstdint>
#include <vector>

namespace gfd {

struct Metrics {
  double auc = 0.0;
  double ap = 0.0;
  double f1_macro = 0.0;
  double f1_fraud = 0.0;
  double f1_benign = 0.0;
  double threshold = 0.5;
  bool zero_division_warning = false;
};

struct F1Result {
  double f1_fraud = 0.0;
  double f1_benign = 0.0;
  double f1_macro = 0.0;
  bool zero_division_warning = false;
};

// Mann-Whitney statistic computed exactly by sorting: P(fraud score >
// benign score) + 0.5 P(tie). Throws if only one class is present.
double auc_score(const std::vector<double>& scores, const std::vector<int8_t>& labels);

// Step-wise precision-recall integral over the ranked list. Ties broken by
// descending score then ascending index. Throws without positives.
double average_precision(const std::vector<double>& scores, const std::vector<int8_t>& labels);

// Per-class F1 at the threshold (score >= threshold predicts fraud);
// zero-division cases yield 0 and set the warning flag.
F1Result f1_scores(const std::vector<double>& scores, const std::vector<int8_t>& labels,
                   double threshold = 0.5);

Metrics compute_metrics(const std::vector<double>& scores, const std::vector<int8_t>& labels,
                        double threshold = 0.5);

}  // namespace gfd
