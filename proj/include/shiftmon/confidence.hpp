#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "core.hpp"

namespace shiftmon {

/// Two-sided Hoeffding half-width sqrt(ln(2/alpha) / (2n)) for the mean of n
/// variables bounded in [0,1].
inline double hoeffding_halfwidth(std::int64_t n, double alpha) {
    if (n < 1) throw InvalidInput("hoeffding_halfwidth: n must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("hoeffding_halfwidth: alpha must lie in (0,1)");
    return std::sqrt(std::log(2.0 / alpha) / (2.0 * static_cast<double>(n)));
}

struct HoeffdingBound {
    std::int64_t n = 0;
    double alpha = 0.05;
    double halfwidth = 0.0;

    static HoeffdingBound make(std::int64_t n, double alpha) {
        return {n, alpha, hoeffding_halfwidth(n, alpha)};
    }
};

/// Accumulators of a one-sided predictably-mixed empirical-Bernstein lower
/// confidence sequence for the running mean of [0,1]-valued observations.
///
/// At step i the bet lambda_i and the variance proxy are built from data up to
/// i-1 only, so
///   (sum lambda_i x_i - ln(1/alpha) - sum v_i psi(lambda_i)) / sum lambda_i
/// is a lower bound valid simultaneously for all t with probability 1-alpha.
/// best_lower keeps the running maximum of these bounds.
struct PmEbState {
    std::int64_t t = 0;
    double alpha = 0.05;
    double sum_lx = 0.0;
    double sum_l = 0.0;
    double sum_psi = 0.0;
    double sum_x = 0.0;
    double sum_sq_dev = 0.0;
    double mu_hat = 0.5;
    double sigma2_hat = 0.25;
    double last_lower = 0.0;
    double best_lower = 0.0;

    static PmEbState start(double alpha) {
        if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("PmEbState: alpha must lie in (0,1)");
        PmEbState s;
        s.alpha = alpha;
        return s;
    }

    static constexpr double kMaxLambda = 0.5;

    static double psi_e(double lambda) noexcept { return (-std::log1p(-lambda) - lambda) / 4.0; }

    void update(double x) {
        if (!(x >= 0.0 && x <= 1.0))
            throw InvalidInput("pmeb_update: observation outside [0,1]: " + std::to_string(x));
        const double log_inv_alpha = std::log(1.0 / alpha);
        const double tt = static_cast<double>(t);
        const double lambda = std::min(
            std::sqrt(2.0 * log_inv_alpha / (sigma2_hat * (tt + 1.0) * std::log(tt + 2.0))), kMaxLambda);
        const double dev = x - mu_hat;
        const double v = 4.0 * dev * dev;

        sum_lx += lambda * x;
        sum_l += lambda;
        sum_psi += v * psi_e(lambda);

        ++t;
        sum_x += x;
        mu_hat = (0.5 + sum_x) / (static_cast<double>(t) + 1.0);
        const double dev_post = x - mu_hat;
        sum_sq_dev += dev_post * dev_post;
        sigma2_hat = (0.25 + sum_sq_dev) / (static_cast<double>(t) + 1.0);

        last_lower = clip01((sum_lx - log_inv_alpha - sum_psi) / sum_l);
        best_lower = std::max(best_lower, last_lower);
    }

    double lower() const noexcept { return t == 0 ? 0.0 : best_lower; }
    double running_mean() const noexcept { return t == 0 ? 0.0 : sum_x / static_cast<double>(t); }
};

inline PmEbState pmeb_update(PmEbState state, double x) {
    state.update(x);
    return state;
}

inline double pmeb_lower(const PmEbState& state) noexcept { return state.lower(); }

} // namespace shiftmon
