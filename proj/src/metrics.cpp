#include "dpcn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

namespace dpcn {

long long ConfusionMatrix::total() const {
    long long t = 0;
    for (long long v : counts) t += v;
    return t;
}

ConfusionMatrix confusion_matrix(const std::vector<int>& truth,
                                 const std::vector<int>& predicted, int num_classes) {
    if (truth.size() != predicted.size())
        throw DpcnError("confusion_matrix: truth and prediction lengths differ");
    ConfusionMatrix cm(num_classes);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || truth[i] >= num_classes || predicted[i] < 0 ||
            predicted[i] >= num_classes)
            throw DpcnError("confusion_matrix: label out of range");
        cm.at(truth[i], predicted[i])++;
    }
    return cm;
}

MetricsReport classification_metrics(const ConfusionMatrix& cm) {
    const int C = cm.num_classes;
    const long long total = cm.total();
    if (total <= 0) throw DpcnError("classification_metrics: empty confusion matrix");

    MetricsReport r;
    long long diag = 0;
    std::vector<long long> row(C, 0), col(C, 0);
    for (int i = 0; i < C; ++i) {
        diag += cm.at(i, i);
        for (int j = 0; j < C; ++j) {
            row[i] += cm.at(i, j);
            col[j] += cm.at(i, j);
        }
    }
    r.accuracy = static_cast<double>(diag) / static_cast<double>(total);

    r.per_class_sensitivity.assign(C, 0.0);
    r.per_class_specificity.assign(C, 0.0);
    double se_sum = 0.0, sp_sum = 0.0;
    int se_n = 0, sp_n = 0;
    for (int k = 0; k < C; ++k) {
        const long long tp = cm.at(k, k);
        const long long fn = row[k] - tp;
        const long long fp = col[k] - tp;
        const long long tn = total - tp - fn - fp;
        if (tp + fn > 0) {
            r.per_class_sensitivity[k] = static_cast<double>(tp) / static_cast<double>(tp + fn);
            se_sum += r.per_class_sensitivity[k];
            ++se_n;
        } else {
            log::warn("classification_metrics: class ", k,
                      " absent from truth, excluded from macro sensitivity");
        }
        if (tn + fp > 0) {
            r.per_class_specificity[k] = static_cast<double>(tn) / static_cast<double>(tn + fp);
            sp_sum += r.per_class_specificity[k];
            ++sp_n;
        } else {
            log::warn("classification_metrics: class ", k,
                      " covers all of truth, excluded from macro specificity");
        }
    }
    if (C == 2) {
        // class 1 is the positive (disease) class
        r.sensitivity = r.per_class_sensitivity[1];
        r.specificity = r.per_class_specificity[1];
    } else {
        r.sensitivity = se_n > 0 ? se_sum / se_n : 0.0;
        r.specificity = sp_n > 0 ? sp_sum / sp_n : 0.0;
    }

    // agreement terms as exact integer ratios so clean fixtures come out
    // bit-exact
    const double p_o = static_cast<double>(diag) / static_cast<double>(total);
    long long pe_num = 0;
    for (int k = 0; k < C; ++k) pe_num += row[k] * col[k];
    const double p_e = static_cast<double>(pe_num) / (static_cast<double>(total) * total);
    r.kappa_unweighted = (1.0 - p_e) < 1e-15 ? 0.0 : (p_o - p_e) / (1.0 - p_e);

    // quadratic agreement weights 1 - (i-j)^2/(C-1)^2
    const long long w_denom = static_cast<long long>(C - 1) * (C - 1);
    long long pow_num = 0, pew_num = 0;
    for (int i = 0; i < C; ++i) {
        for (int j = 0; j < C; ++j) {
            const long long wgt = w_denom - static_cast<long long>(i - j) * (i - j);
            pow_num += wgt * cm.at(i, j);
            pew_num += wgt * row[i] * col[j];
        }
    }
    const double po_w = static_cast<double>(pow_num) / (static_cast<double>(total) * w_denom);
    const double pe_w =
        static_cast<double>(pew_num) / (static_cast<double>(total) * total * w_denom);
    r.kappa_quadratic = (1.0 - pe_w) < 1e-15 ? 0.0 : (po_w - pe_w) / (1.0 - pe_w);
    return r;
}

std::string metrics_json(const ConfusionMatrix& cm, const MetricsReport& metrics, double auc) {
    nlohmann::json j;
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < cm.num_classes; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int k = 0; k < cm.num_classes; ++k) row.push_back(cm.at(i, k));
        rows.push_back(std::move(row));
    }
    j["confusion"] = std::move(rows);
    j["num_samples"] = cm.total();
    j["accuracy"] = metrics.accuracy;
    j["sensitivity"] = metrics.sensitivity;
    j["specificity"] = metrics.specificity;
    j["kappa_unweighted"] = metrics.kappa_unweighted;
    j["kappa_quadratic"] = metrics.kappa_quadratic;
    j["per_class_sensitivity"] = metrics.per_class_sensitivity;
    j["per_class_specificity"] = metrics.per_class_specificity;
    if (auc >= 0.0) j["auc"] = auc;
    return j.dump(2) + "\n";
}

RocCurve roc_auc(const std::vector<double>& scores, const std::vector<int>& truth) {
    if (scores.size() != truth.size())
        throw DpcnError("roc_auc: scores and labels differ in length");
    long long pos = 0, neg = 0;
    for (int t : truth) {
        if (t == 1)
            ++pos;
        else if (t == 0)
            ++neg;
        else
            throw DpcnError("roc_auc: labels must be binary");
    }
    if (pos == 0 || neg == 0) throw DpcnError("roc_auc: both classes must be present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });

    RocCurve roc;
    roc.fpr.push_back(0.0);
    roc.tpr.push_back(0.0);
    long long tp = 0, fp = 0;
    double auc = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        long long dtp = 0, dfp = 0;
        while (i < order.size() && scores[order[i]] == s) {
            if (truth[order[i]] == 1)
                ++dtp;
            else
                ++dfp;
            ++i;
        }
        const double fpr0 = static_cast<double>(fp) / neg;
        const double tpr0 = static_cast<double>(tp) / pos;
        tp += dtp;
        fp += dfp;
        const double fpr1 = static_cast<double>(fp) / neg;
        const double tpr1 = static_cast<double>(tp) / pos;
        auc += (fpr1 - fpr0) * (tpr0 + tpr1) * 0.5; // trapezoid; ties count half
        roc.thresholds.push_back(s);
        roc.fpr.push_back(fpr1);
        roc.tpr.push_back(tpr1);
    }
    roc.auc = auc;
    return roc;
}

void export_roc_csv(const RocCurve& roc, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DpcnError("cannot write ROC CSV '" + path + "'");
    out << "threshold,fpr,tpr\n";
    out.precision(17);
    for (std::size_t i = 0; i < roc.thresholds.size(); ++i)
        out << roc.thresholds[i] << "," << roc.fpr[i + 1] << "," << roc.tpr[i + 1] << "\n";
}

} // namespace dpcn
