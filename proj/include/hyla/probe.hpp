#pragma once

#include <algorithm>
#include <vector>

#include <Eigen/Dense>

#include "hyla/dense_array.hpp"

namespace hyla {

inline constexpr double kProbeRidge = 1e-3;

// One-vs-rest ridge regression readout with a bias column.
struct LinearProbe {
    Eigen::MatrixXd weights; // (F + 1) x classes
    double train_accuracy = 0.0;

    int predict(std::span<const double> features) const {
        const auto f = static_cast<Eigen::Index>(features.size());
        Eigen::Index best = 0;
        double best_score = -std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < weights.cols(); ++k) {
            double s = weights(f, k);
            for (Eigen::Index i = 0; i < f; ++i) s += weights(i, k) * features[static_cast<std::size_t>(i)];
            if (s > best_score) {
                best_score = s;
                best = k;
            }
        }
        return static_cast<int>(best);
    }
};

inline LinearProbe linear_probe(const Array& features, const std::vector<int>& labels, int num_classes,
                                double ridge = kProbeRidge) {
    require_matrix(features.shape(), "linear_probe");
    const auto n = static_cast<Eigen::Index>(features.rows());
    const auto f = static_cast<Eigen::Index>(features.cols());
    if (labels.size() != features.rows()) throw DimensionError("linear_probe: one label per feature row");
    if (num_classes < 1) throw DomainError("linear_probe: need at least one class");

    Eigen::MatrixXd x(n, f + 1);
    Eigen::MatrixXd y = Eigen::MatrixXd::Constant(n, num_classes, -1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < f; ++j) x(i, j) = features(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        x(i, f) = 1.0;
        const int label = labels[static_cast<std::size_t>(i)];
        if (label < 0 || label >= num_classes) throw DomainError("linear_probe: label out of range");
        y(i, label) = 1.0;
    }
    Eigen::MatrixXd gram = x.transpose() * x;
    gram.diagonal().array() += ridge;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw ConditioningError("linear_probe: normal equations are singular");

    LinearProbe probe;
    probe.weights = ldlt.solve(x.transpose() * y);
    if (!probe.weights.allFinite()) throw ConditioningError("linear_probe: non-finite solution");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < features.rows(); ++i)
        if (probe.predict(features.row(i)) == labels[i]) ++correct;
    probe.train_accuracy = n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
    return probe;
}

} // namespace hyla
