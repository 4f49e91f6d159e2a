#ifndef MIL_METRICS_HPP
#define MIL_METRICS_HPP

#include <cstdint>
#include <vector>

namespace mil {

// Bag-level classification report. When a ratio is 0/0 (no predicted
// positives, or no actual positives) the metric is reported as 0 and the
// matching flag is set instead of emitting NaN.
struct MetricsReport {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f_score = 0.0;
    double auc = 0.0;
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    double threshold = 0.5;
    bool precision_degenerate = false;
    bool recall_degenerate = false;
    bool f_score_degenerate = false;
    bool auc_defined = false;
};

// Thresholded confusion metrics; predict positive iff theta >= threshold.
// auc is left unset. Throws DomainError on length mismatch or empty input.
MetricsReport confusion_metrics(const std::vector<double>& thetas,
                                const std::vector<int>& labels,
                                double threshold);

// Mann-Whitney AUC: fraction of positive-negative pairs with
// theta_pos > theta_neg, ties counted 0.5. Computed via rank sums with
// midrank tie handling. Throws DomainError unless both classes appear.
double auc(const std::vector<double>& thetas, const std::vector<int>& labels);

// confusion_metrics + auc in one report (auc_defined set accordingly;
// single-class inputs leave auc at 0 with auc_defined = false).
MetricsReport full_report(const std::vector<double>& thetas,
                          const std::vector<int>& labels, double threshold);

}  // namespace mil

#endif
