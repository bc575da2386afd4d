#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "core.hpp"

namespace shiftmon {

/// Brute-force k-nearest-neighbour regressor of the error on z-scored
/// features. Only the ordering of its output matters downstream.
class KnnModel {
public:
    static constexpr std::size_t kDefaultK = 10;

    KnnModel() = default;

    std::size_t k() const noexcept { return k_; }
    std::size_t dimension() const noexcept { return means_.size(); }
    std::size_t size() const noexcept { return errors_.size(); }
    const std::vector<double>& feature_means() const noexcept { return means_; }
    const std::vector<double>& feature_stds() const noexcept { return stds_; }

    double predict(std::span<const double> x) const {
        if (x.size() != dimension())
            throw InvalidInput("predict: expected " + std::to_string(dimension()) + " features, got " +
                               std::to_string(x.size()));
        const std::size_t d = dimension();
        std::vector<double> z(d);
        for (std::size_t j = 0; j < d; ++j) z[j] = (x[j] - means_[j]) / stds_[j];

        std::vector<std::pair<double, std::size_t>> dist(errors_.size());
        for (std::size_t i = 0; i < errors_.size(); ++i) {
            const double* row = &features_[i * d];
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = row[j] - z[j];
                acc += diff * diff;
            }
            dist[i] = {acc, i};
        }
        // Pairs compare by distance then index, so ties go to the lower index.
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_), dist.end());
        double sum = 0.0;
        for (std::size_t i = 0; i < k_; ++i) sum += errors_[dist[i].second];
        return sum / static_cast<double>(k_);
    }

    std::vector<double> predict_all(const Dataset& data) const {
        std::vector<double> out;
        out.reserve(data.size());
        for (const auto& s : data) out.push_back(predict(s.features));
        return out;
    }

    friend KnnModel fit_knn(const Dataset& train, std::size_t k);

private:
    std::size_t k_ = 0;
    std::vector<double> features_; // row-major, standardized
    std::vector<double> errors_;
    std::vector<double> means_;
    std::vector<double> stds_;
};

inline KnnModel fit_knn(const Dataset& train, std::size_t k = KnnModel::kDefaultK) {
    if (train.empty()) throw InvalidInput("fit_knn: empty training set");
    if (k == 0 || k > train.size())
        throw InvalidInput("fit_knn: k must be in [1, n], got k=" + std::to_string(k) + ", n=" +
                           std::to_string(train.size()));
    const std::size_t n = train.size();
    const std::size_t d = train.dimension();
    KnnModel m;
    m.k_ = k;
    m.means_.assign(d, 0.0);
    m.stds_.assign(d, 1.0);
    for (const auto& s : train)
        for (std::size_t j = 0; j < d; ++j) m.means_[j] += s.features[j];
    for (auto& mu : m.means_) mu /= static_cast<double>(n);
    for (std::size_t j = 0; j < d; ++j) {
        double ss = 0.0;
        for (const auto& s : train) ss += (s.features[j] - m.means_[j]) * (s.features[j] - m.means_[j]);
        const double sd = std::sqrt(ss / static_cast<double>(n));
        m.stds_[j] = sd > 0.0 ? sd : 1.0; // constant column
    }
    m.features_.reserve(n * d);
    m.errors_.reserve(n);
    for (const auto& s : train) {
        for (std::size_t j = 0; j < d; ++j) m.features_.push_back((s.features[j] - m.means_[j]) / m.stds_[j]);
        m.errors_.push_back(s.true_error);
    }
    return m;
}

/// Coefficient of determination 1 - SS_res / SS_tot.
inline double r_squared(std::span<const double> predicted, std::span<const double> actual) {
    if (predicted.size() != actual.size() || actual.empty())
        throw InvalidInput("r_squared: lengths must be equal and nonzero");
    const double mean = std::accumulate(actual.begin(), actual.end(), 0.0) / static_cast<double>(actual.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        ss_res += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
        ss_tot += (actual[i] - mean) * (actual[i] - mean);
    }
    if (ss_tot == 0.0) throw Degenerate("r_squared: actual values are constant");
    return 1.0 - ss_res / ss_tot;
}

} // namespace shiftmon
