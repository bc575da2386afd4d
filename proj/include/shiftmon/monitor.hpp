#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "calibration.hpp"
#include "confidence.hpp"
#include "core.hpp"
#include "csv.hpp"

namespace shiftmon {

struct MonitorConfig {
    double alpha_source = 0.05;
    double alpha_prod = 0.05;
    double alpha1_share = 0.5; // alpha_1 = share * alpha_prod, alpha_2 = the rest
    double eps_tol = 0.0;
    double delta_corr = 0.0;

    double alpha1() const noexcept { return alpha_prod * alpha1_share; }
    double alpha2() const noexcept { return alpha_prod - alpha1(); }

    void validate() const {
        auto in01 = [](double a) { return a > 0.0 && a < 1.0; };
        if (!in01(alpha_source)) throw InvalidInput("MonitorConfig: alpha_source must lie in (0,1)");
        if (!in01(alpha_prod)) throw InvalidInput("MonitorConfig: alpha_prod must lie in (0,1)");
        if (!in01(alpha1_share)) throw InvalidInput("MonitorConfig: alpha1_share must lie in (0,1)");
        if (!(eps_tol >= 0.0)) throw InvalidInput("MonitorConfig: eps_tol must be >= 0");
        if (!(delta_corr >= 0.0)) throw InvalidInput("MonitorConfig: delta_corr must be >= 0");
    }
};

/// Empirical source-side terms of the quantile detectors.
struct SourceStats {
    std::int64_t n = 0;
    double rate_above_q = 0.0;         // (1/n) #{E > q}
    double rate_true_discovery = 0.0;  // (1/n) #{S = 1, E > q}
    double rate_false_discovery = 0.0; // (1/n) #{S = 1, E <= q}
    double w_n = 0.0;                  // Hoeffding width at alpha_source
    double w_n_fd = 0.0;               // Hoeffding width at alpha_2, for the false-discovery term
    double u_q = 0.0;
    double u_q2 = 0.0;
};

inline SourceStats make_source_stats(std::int64_t n, std::int64_t above, std::int64_t true_disc,
                                     std::int64_t false_disc, const MonitorConfig& cfg) {
    cfg.validate();
    if (n < 1) throw InvalidInput("source_statistics: empty source");
    SourceStats s;
    s.n = n;
    const double dn = static_cast<double>(n);
    s.rate_above_q = static_cast<double>(above) / dn;
    s.rate_true_discovery = static_cast<double>(true_disc) / dn;
    s.rate_false_discovery = static_cast<double>(false_disc) / dn;
    s.w_n = hoeffding_halfwidth(n, cfg.alpha_source);
    s.w_n_fd = hoeffding_halfwidth(n, cfg.alpha2());
    s.u_q = s.rate_above_q + s.w_n;
    s.u_q2 = s.rate_true_discovery + s.w_n;
    return s;
}

inline SourceStats source_statistics(std::span<const double> errors, std::span<const double> scores,
                                     const Selector& sel, const MonitorConfig& cfg) {
    if (errors.size() != scores.size()) throw InvalidInput("source_statistics: length mismatch");
    const auto m = selector_metrics(sel, errors, scores);
    return make_source_stats(static_cast<std::int64_t>(errors.size()), static_cast<std::int64_t>(m.positives),
                             static_cast<std::int64_t>(m.true_discoveries),
                             static_cast<std::int64_t>(m.false_discoveries), cfg);
}

inline SourceStats source_statistics(const Dataset& source, const Selector& sel, const MonitorConfig& cfg) {
    if (source.empty()) throw InvalidInput("source_statistics: empty source");
    const auto e = source.errors();
    const auto s = source.scores();
    return source_statistics(e, s, sel, cfg);
}

/// Source terms for the labeled oracle: the selection is 1{E > q} itself, so
/// there are no false discoveries and every positive is a true discovery.
inline SourceStats oracle_source_statistics(std::span<const double> errors, double q, const MonitorConfig& cfg) {
    std::int64_t above = 0;
    for (double e : errors) above += e > q;
    return make_source_stats(static_cast<std::int64_t>(errors.size()), above, above, 0, cfg);
}

struct TrajectoryPoint {
    std::int64_t t = 0;
    double selection_rate = 0.0;
    double l_q = 0.0;
    double u_q = 0.0;
    double u_q2 = 0.0;
    bool phi_q = false;
    bool phi_q2 = false;
};

struct AlarmDecision {
    bool phi_q = false;
    bool phi_q2 = false;
    bool raised_now = false; // some flag latched on this step
};

/// Sequential quantile detectors Phi_q and Phi_q^2 over the selection stream
/// 1{score > q_hat}. L_q = CS lower bound of the selection rate minus the
/// source false-discovery term (rate + width) minus delta_corr, floored at 0.
class QuantileMonitor {
public:
    QuantileMonitor(Selector selector, SourceStats source, MonitorConfig config, bool keep_trajectory = true)
        : selector_(selector), source_(source), config_(config), keep_trajectory_(keep_trajectory) {
        config_.validate();
        selection_cs_ = PmEbState::start(config_.alpha1());
    }

    AlarmDecision observe(const StreamEvent& event, double score) {
        if (event.t <= t_) throw InvalidInput("observe: out-of-order time index " + std::to_string(event.t));
        return step(event.t, selector_.selects(score));
    }

    /// Feeds an already-computed selection flag; used by the labeled oracle.
    AlarmDecision observe_flag(std::int64_t t, bool selected) {
        if (t <= t_) throw InvalidInput("observe: out-of-order time index " + std::to_string(t));
        return step(t, selected);
    }

    std::int64_t t() const noexcept { return t_; }
    std::int64_t steps() const noexcept { return selection_cs_.t; }
    double lower_raw() const noexcept { return lower_raw_; }
    double lower() const noexcept { return std::max(lower_raw_, 0.0); }
    double max_lower() const noexcept { return max_lower_; }
    const SourceStats& source() const noexcept { return source_; }
    const Selector& selector() const noexcept { return selector_; }
    const MonitorConfig& config() const noexcept { return config_; }
    const PmEbState& selection_cs() const noexcept { return selection_cs_; }
    bool phi_q() const noexcept { return phi_q_at_.has_value(); }
    bool phi_q2() const noexcept { return phi_q2_at_.has_value(); }
    std::optional<std::int64_t> phi_q_time() const noexcept { return phi_q_at_; }
    std::optional<std::int64_t> phi_q2_time() const noexcept { return phi_q2_at_; }
    const std::vector<TrajectoryPoint>& trajectory() const noexcept { return trajectory_; }

private:
    AlarmDecision step(std::int64_t t, bool selected) {
        t_ = t;
        selection_cs_.update(selected ? 1.0 : 0.0);
        lower_raw_ = selection_cs_.lower() - (source_.rate_false_discovery + source_.w_n_fd) - config_.delta_corr;
        const double l = lower();
        max_lower_ = std::max(max_lower_, l);

        AlarmDecision d;
        if (!phi_q_at_ && l > source_.u_q + config_.eps_tol) phi_q_at_ = t, d.raised_now = true;
        if (!phi_q2_at_ && l > source_.u_q2 + config_.eps_tol) phi_q2_at_ = t, d.raised_now = true;
        d.phi_q = phi_q();
        d.phi_q2 = phi_q2();
        if (keep_trajectory_)
            trajectory_.push_back({t, selection_cs_.running_mean(), l, source_.u_q, source_.u_q2, d.phi_q, d.phi_q2});
        return d;
    }

    Selector selector_;
    SourceStats source_;
    MonitorConfig config_;
    bool keep_trajectory_;
    PmEbState selection_cs_;
    std::int64_t t_ = 0;
    double lower_raw_ = 0.0;
    double max_lower_ = 0.0;
    std::optional<std::int64_t> phi_q_at_;
    std::optional<std::int64_t> phi_q2_at_;
    std::vector<TrajectoryPoint> trajectory_;
};

/// Mean-error detector: CS lower bound on the running mean of the stream
/// against mean(source errors) + Hoeffding width. Fed true errors it is the
/// labeled oracle; fed estimated scores it is the plug-in variant, in which
/// case scores are clipped into [0,1] and counted.
class MeanMonitor {
public:
    MeanMonitor(double source_mean, std::int64_t source_n, MonitorConfig config, bool keep_trajectory = false)
        : config_(config), keep_trajectory_(keep_trajectory) {
        config_.validate();
        check_error_range(source_mean, "source mean");
        source_upper_ = source_mean + hoeffding_halfwidth(source_n, config_.alpha_source);
        error_cs_ = PmEbState::start(config_.alpha_prod);
    }

    static MeanMonitor from_source(std::span<const double> source_errors, MonitorConfig config,
                                   bool keep_trajectory = false) {
        if (source_errors.empty()) throw InvalidInput("MeanMonitor: empty source");
        double sum = 0.0;
        for (double e : source_errors) sum += e;
        return MeanMonitor(sum / static_cast<double>(source_errors.size()),
                           static_cast<std::int64_t>(source_errors.size()), config, keep_trajectory);
    }

    bool observe(double value) {
        if (!(value >= 0.0 && value <= 1.0))
            throw InvalidInput("mean_observe: value outside [0,1]: " + std::to_string(value));
        error_cs_.update(value);
        const double l = error_cs_.lower();
        if (!alarm_at_ && l > source_upper_ + config_.eps_tol) alarm_at_ = error_cs_.t;
        if (keep_trajectory_) lower_.push_back(l);
        return alarm();
    }

    bool observe_score(double score) {
        if (!std::isfinite(score)) throw InvalidInput("mean_observe: non-finite score");
        if (score < 0.0 || score > 1.0) ++clipped_;
        return observe(clip01(score));
    }

    double lower() const noexcept { return error_cs_.lower(); }
    double source_upper() const noexcept { return source_upper_; }
    bool alarm() const noexcept { return alarm_at_.has_value(); }
    std::optional<std::int64_t> alarm_time() const noexcept { return alarm_at_; }
    std::int64_t clipped() const noexcept { return clipped_; }
    std::int64_t t() const noexcept { return error_cs_.t; }
    const std::vector<double>& lower_trajectory() const noexcept { return lower_; }

private:
    MonitorConfig config_;
    bool keep_trajectory_;
    PmEbState error_cs_;
    double source_upper_ = 0.0;
    std::optional<std::int64_t> alarm_at_;
    std::int64_t clipped_ = 0;
    std::vector<double> lower_;
};

/// Signed excess of the production false-discovery rate over the source rate.
/// Negative values mean the production false-discovery rate stayed at or
/// below the source rate on this sample.
inline double delta_diagnostic(std::span<const double> prod_errors, std::span<const double> prod_scores,
                               const Selector& sel, const SourceStats& source) {
    if (prod_errors.size() != prod_scores.size()) throw InvalidInput("delta_diagnostic: length mismatch");
    if (prod_errors.empty()) throw InvalidInput("delta_diagnostic: empty production sample");
    std::int64_t fd = 0;
    for (std::size_t i = 0; i < prod_errors.size(); ++i) fd += sel.selects(prod_scores[i]) && prod_errors[i] <= sel.q;
    return static_cast<double>(fd) / static_cast<double>(prod_errors.size()) - source.rate_false_discovery;
}

inline double delta_diagnostic(const std::vector<StreamEvent>& prod, const Selector& sel, const SourceStats& source) {
    std::vector<double> e, s;
    e.reserve(prod.size());
    s.reserve(prod.size());
    for (const auto& ev : prod) {
        if (!ev.true_error) throw InvalidInput("delta_diagnostic: production event without true error");
        if (!ev.est_score) throw InvalidInput("delta_diagnostic: production event without score");
        e.push_back(*ev.true_error);
        s.push_back(*ev.est_score);
    }
    return delta_diagnostic(e, s, sel, source);
}

inline void write_trajectory_header(std::ostream& out) { out << "t,selection_rate,L_q,U_q,U_q2,phi_q,phi_q2\n"; }

inline void write_trajectory_row(std::ostream& out, const TrajectoryPoint& p) {
    using csv::format_double;
    out << p.t << ',' << format_double(p.selection_rate) << ',' << format_double(p.l_q) << ','
        << format_double(p.u_q) << ',' << format_double(p.u_q2) << ',' << (p.phi_q ? 1 : 0) << ','
        << (p.phi_q2 ? 1 : 0) << '\n';
}

inline void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryPoint>& traj) {
    write_trajectory_header(out);
    for (const auto& p : traj) write_trajectory_row(out, p);
}

} // namespace shiftmon
