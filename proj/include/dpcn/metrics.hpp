#pragma once

#include <string>
#include <vector>

#include "dpcn/common.hpp"

namespace dpcn {

struct ConfusionMatrix {
    int num_classes = 0;
    std::vector<long long> counts;  // rows = truth, columns = prediction

    explicit ConfusionMatrix(int C = 0)
        : num_classes(C), counts(static_cast<std::size_t>(C) * C, 0) {}
    long long& at(int truth, int pred) { return counts[static_cast<std::size_t>(truth) * num_classes + pred]; }
    long long at(int truth, int pred) const { return counts[static_cast<std::size_t>(truth) * num_classes + pred]; }
    long long total() const;
};

ConfusionMatrix confusion_matrix(const std::vector<int>& truth,
                                 const std::vector<int>& predicted, int num_classes);

struct MetricsReport {
    double accuracy = 0.0;
    // binary: class 1 is positive; multiclass: unweighted macro one-vs-rest
    double sensitivity = 0.0;
    double specificity = 0.0;
    double kappa_unweighted = 0.0;
    double kappa_quadratic = 0.0;
    std::vector<double> per_class_sensitivity;
    std::vector<double> per_class_specificity;
};

MetricsReport classification_metrics(const ConfusionMatrix& cm);

std::string metrics_json(const ConfusionMatrix& cm, const MetricsReport& metrics,
                         double auc = -1.0);

struct RocCurve {
    std::vector<double> thresholds;  // descending, one per distinct score
    std::vector<double> fpr, tpr;    // same length as thresholds, plus (0,0) start
    double auc = 0.0;
};

// Threshold sweep over the distinct scores; higher score means more
// positive. Ties are grouped, which makes the trapezoidal AUC equal the
// pairwise-concordance value (ties count 1/2).
RocCurve roc_auc(const std::vector<double>& scores, const std::vector<int>& truth);

void export_roc_csv(const RocCurve& roc, const std::string& path);

} // namespace dpcn
