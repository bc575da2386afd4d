#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace shiftmon {

/// One labeled source observation: features, the monitored model's error in
/// [0,1] and (once an estimator has run) the estimated error score.
struct ErrorSample {
    std::vector<double> features;
    double true_error = 0.0;
    std::optional<double> est_score;
};

inline void check_error_range(double e, const char* what = "true_error") {
    if (!(e >= 0.0 && e <= 1.0))
        throw InvalidInput(std::string(what) + " must lie in [0,1], got " + std::to_string(e));
}

/// Ordered collection of ErrorSample with a common feature dimension.
class Dataset {
public:
    Dataset() = default;

    explicit Dataset(std::vector<ErrorSample> samples) : samples_(std::move(samples)) {
        for (const auto& s : samples_) validate(s);
    }

    void push_back(ErrorSample s) {
        validate(s);
        samples_.push_back(std::move(s));
    }

    std::size_t size() const noexcept { return samples_.size(); }
    bool empty() const noexcept { return samples_.empty(); }
    std::size_t dimension() const noexcept {
        return samples_.empty() ? 0 : samples_.front().features.size();
    }

    const ErrorSample& operator[](std::size_t i) const { return samples_[i]; }
    ErrorSample& operator[](std::size_t i) { return samples_[i]; }
    auto begin() const noexcept { return samples_.begin(); }
    auto end() const noexcept { return samples_.end(); }
    auto begin() noexcept { return samples_.begin(); }
    auto end() noexcept { return samples_.end(); }
    const std::vector<ErrorSample>& samples() const noexcept { return samples_; }

    std::vector<double> errors() const {
        std::vector<double> out;
        out.reserve(samples_.size());
        for (const auto& s : samples_) out.push_back(s.true_error);
        return out;
    }

    bool has_scores() const noexcept {
        return std::all_of(samples_.begin(), samples_.end(),
                           [](const ErrorSample& s) { return s.est_score.has_value(); });
    }

    std::vector<double> scores() const {
        std::vector<double> out;
        out.reserve(samples_.size());
        for (const auto& s : samples_) {
            if (!s.est_score) throw InvalidInput("sample has no estimated score");
            out.push_back(*s.est_score);
        }
        return out;
    }

    Dataset subset(std::span<const std::size_t> idx) const {
        Dataset out;
        out.samples_.reserve(idx.size());
        for (auto i : idx) out.samples_.push_back(samples_.at(i));
        return out;
    }

private:
    void validate(const ErrorSample& s) const {
        check_error_range(s.true_error);
        if (!samples_.empty() && s.features.size() != samples_.front().features.size())
            throw InvalidInput("feature dimension mismatch within dataset");
        if (s.est_score && !std::isfinite(*s.est_score))
            throw InvalidInput("est_score must be finite");
    }

    std::vector<ErrorSample> samples_;
};

/// Calibrated threshold pair. An observation is flagged high-error when its
/// score is strictly greater than q_hat.
struct Selector {
    double q = 0.0;
    double q_hat = 0.0;
    double p = 0.5;
    double p_hat = 0.5;

    bool selects(double score) const noexcept { return score > q_hat; }
};

struct StreamEvent {
    std::int64_t t = 0;
    std::vector<double> features;
    std::optional<double> true_error;
    std::optional<double> est_score;
};

/// k-th smallest element with k = ceil(p * n), 1-indexed. No interpolation, so
/// the result is always a member of `values`.
inline double empirical_quantile(double p, std::span<const double> values) {
    if (values.empty()) throw InvalidInput("empirical_quantile: empty multiset");
    if (!(p > 0.0 && p < 1.0)) throw InvalidInput("empirical_quantile: p must lie in (0,1)");
    const auto n = values.size();
    // p values such as 0.55 are not exact in binary; 0.55 * 100 must give k = 55.
    auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n) - 1e-9));
    k = std::clamp<std::size_t>(k, 1, n);
    std::vector<double> buf(values.begin(), values.end());
    std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(k - 1), buf.end());
    return buf[k - 1];
}

inline double clip01(double x) noexcept { return std::clamp(x, 0.0, 1.0); }

} // namespace shiftmon
