#include "mil/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "mil/errors.hpp"

namespace mil {

namespace {

void check_inputs(const std::vector<double>& thetas,
                  const std::vector<int>& labels) {
    if (thetas.size() != labels.size()) {
        throw DomainError("metrics: " + std::to_string(thetas.size()) +
                          " predictions vs " + std::to_string(labels.size()) +
                          " labels");
    }
    if (thetas.empty()) throw DomainError("metrics: no predictions");
    for (int y : labels) {
        if (y != 0 && y != 1) {
            throw DomainError("metrics: label " + std::to_string(y) +
                              " outside {0, 1}");
        }
    }
}

}  // namespace

MetricsReport confusion_metrics(const std::vector<double>& thetas,
                                const std::vector<int>& labels,
                                double threshold) {
    check_inputs(thetas, labels);
    MetricsReport r;
    r.threshold = threshold;
    for (std::size_t i = 0; i < thetas.size(); ++i) {
        const bool pred = thetas[i] >= threshold;
        if (pred && labels[i] == 1) ++r.tp;
        else if (pred && labels[i] == 0) ++r.fp;
        else if (!pred && labels[i] == 0) ++r.tn;
        else ++r.fn;
    }
    const double n = static_cast<double>(thetas.size());
    r.accuracy = static_cast<double>(r.tp + r.tn) / n;
    if (r.tp + r.fp > 0) {
        r.precision = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
    } else {
        r.precision_degenerate = true;
    }
    if (r.tp + r.fn > 0) {
        r.recall = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
    } else {
        r.recall_degenerate = true;
    }
    if (r.precision + r.recall > 0.0) {
        r.f_score = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    } else {
        r.f_score_degenerate = true;
    }
    return r;
}

double auc(const std::vector<double>& thetas, const std::vector<int>& labels) {
    check_inputs(thetas, labels);
    const std::int64_t n_pos = std::count(labels.begin(), labels.end(), 1);
    const std::int64_t n_neg = static_cast<std::int64_t>(labels.size()) - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw DomainError("auc undefined: need at least one positive and one "
                          "negative label");
    }

    std::vector<std::size_t> order(thetas.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return thetas[a] < thetas[b];
    });

    // Midranks over tied blocks; the rank-sum identity then counts each
    // pos>neg pair once and each tied pair 0.5.
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && thetas[order[j]] == thetas[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) pos_rank_sum += midrank;
        }
        i = j;
    }
    const double np = static_cast<double>(n_pos);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) /
           (np * static_cast<double>(n_neg));
}

MetricsReport full_report(const std::vector<double>& thetas,
                          const std::vector<int>& labels, double threshold) {
    MetricsReport r = confusion_metrics(thetas, labels, threshold);
    const std::int64_t n_pos = std::count(labels.begin(), labels.end(), 1);
    if (n_pos > 0 && n_pos < static_cast<std::int64_t>(labels.size())) {
        r.auc = auc(thetas, labels);
        r.auc_defined = true;
    }
    return r;
}

}  // namespace mil
