#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "calibration.hpp"
#include "core.hpp"
#include "estimator.hpp"
#include "monitor.hpp"
#include "shiftsim.hpp"

namespace shiftmon {

enum class EstimatorKind { knn, external };
enum class Family { quantile, mean };
enum class Detector { phi_q, phi_q2, mean_plugin };

inline std::string to_string(Family f) { return f == Family::quantile ? "quantile" : "mean"; }
inline std::string to_string(Detector d) {
    switch (d) {
    case Detector::phi_q: return "phi_q";
    case Detector::phi_q2: return "phi_q2";
    case Detector::mean_plugin: return "mean_plugin";
    }
    return "";
}
inline Family family_of(Detector d) { return d == Detector::mean_plugin ? Family::mean : Family::quantile; }

struct ExperimentConfig {
    GridSpec grid = GridSpec::defaults();
    MonitorConfig monitor;
    Schedule schedule = Schedule::sudden(1000, 2000);
    EstimatorKind estimator = EstimatorKind::knn;
    std::size_t k = KnnModel::kDefaultK;
    double eps_harm = 0.0;
};

/// First time index (1-based) at which a nondecreasing bound path strictly
/// exceeds `threshold`.
inline std::optional<std::int64_t> first_crossing(const std::vector<double>& path, double threshold) {
    auto it = std::upper_bound(path.begin(), path.end(), threshold);
    if (it == path.end()) return std::nullopt;
    return static_cast<std::int64_t>(it - path.begin()) + 1;
}

/// Outcome of one synthetic shift run. The four lower-bound paths are
/// nondecreasing, so alarm times and harmfulness at any tolerance can be
/// recovered from them without re-running the stream.
struct RunReport {
    std::string scenario_id;
    std::uint64_t seed = 0;
    std::int64_t onset = 0;
    std::int64_t horizon = 0;
    double eps_tol = 0.0;

    bool calibrated = false;
    std::string calibration_error;
    Selector selector;
    double calibration_power = 0.0;
    double calibration_fdp = 0.0;
    std::optional<double> estimator_r2;

    SourceStats source_stats;
    SourceStats oracle_source_stats;
    double mean_source_upper = 0.0;
    double source_mean_error = 0.0;
    double production_mean_error = 0.0;

    std::optional<double> delta;
    std::optional<double> holdout_fdp;
    std::optional<double> production_power;
    std::optional<double> production_fdp;
    std::int64_t clipped_scores = 0;

    std::vector<double> lq_plugin;
    std::vector<double> lq_oracle;
    std::vector<double> lmean_plugin;
    std::vector<double> lmean_oracle;

    double threshold(Detector d) const {
        switch (d) {
        case Detector::phi_q: return source_stats.u_q;
        case Detector::phi_q2: return source_stats.u_q2;
        case Detector::mean_plugin: return mean_source_upper;
        }
        return 0.0;
    }

    const std::vector<double>& plugin_path(Detector d) const {
        return d == Detector::mean_plugin ? lmean_plugin : lq_plugin;
    }

    bool eligible(Family f) const { return f == Family::mean || calibrated; }

    std::optional<std::int64_t> alarm_time(Detector d, double eps) const {
        if (!eligible(family_of(d))) return std::nullopt;
        return first_crossing(plugin_path(d), threshold(d) + eps);
    }
    std::optional<std::int64_t> alarm_time(Detector d) const { return alarm_time(d, eps_tol); }

    std::optional<std::int64_t> oracle_alarm_time(Family f, double eps) const {
        if (!eligible(f)) return std::nullopt;
        return f == Family::quantile ? first_crossing(lq_oracle, oracle_source_stats.u_q + eps)
                                     : first_crossing(lmean_oracle, mean_source_upper + eps);
    }

    /// Ground truth: the family's detector run on true errors ever alarms at tolerance eps_harm.
    bool harmful(Family f, double eps_harm) const { return oracle_alarm_time(f, eps_harm).has_value(); }
};

/// Runs the family's detector on true errors instead of scores and reports
/// whether it ever alarms at tolerance eps_harm.
inline bool ground_truth_harmful(const std::vector<StreamEvent>& stream, Family family, std::span<const double> source_errors,
                                 double q, MonitorConfig cfg, double eps_harm) {
    cfg.eps_tol = eps_harm;
    cfg.delta_corr = 0.0;
    if (family == Family::quantile) {
        QuantileMonitor oracle(Selector{q, q, 0.5, 0.5}, oracle_source_statistics(source_errors, q, cfg), cfg, false);
        for (const auto& ev : stream) {
            if (!ev.true_error) throw InvalidInput("ground_truth_harmful: event without true error");
            oracle.observe_flag(ev.t, *ev.true_error > q);
        }
        return oracle.phi_q();
    }
    auto oracle = MeanMonitor::from_source(source_errors, cfg);
    for (const auto& ev : stream) {
        if (!ev.true_error) throw InvalidInput("ground_truth_harmful: event without true error");
        oracle.observe(*ev.true_error);
    }
    return oracle.alarm();
}

struct ExperimentPartitions {
    Dataset train;         // primary-model share; the shift's excluded pool is ablated from it
    Dataset test;          // production pool before the shift
    Dataset estimator_fit; // first half of calibration
    Dataset calibration;   // second half of calibration
};

/// 60/20/20 train/test/calibration split, then the calibration part halved
/// into estimator-fit and threshold-calibration sets.
inline ExperimentPartitions partition_source(const Dataset& source, std::uint64_t seed) {
    std::vector<std::size_t> idx(source.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t n = idx.size();
    const std::size_t n_train = n * 6 / 10;
    const std::size_t n_test = n * 2 / 10;
    const std::size_t n_cal = n - n_train - n_test;
    const std::size_t n_fit = n_cal / 2;
    auto slice = [&](std::size_t from, std::size_t count) {
        std::vector<std::size_t> rows(idx.begin() + static_cast<std::ptrdiff_t>(from),
                                      idx.begin() + static_cast<std::ptrdiff_t>(from + count));
        return source.subset(rows);
    };
    return {slice(0, n_train), slice(n_train, n_test), slice(n_train + n_test, n_fit),
            slice(n_train + n_test + n_fit, n_cal - n_fit)};
}

/// One shift run. The source is partitioned 60/20/20; the scenario ablates
/// the training share, and the ablated rows form the pool that the schedule
/// reintroduces alongside the test share. The error estimator is fit on one
/// half of the calibration share and the selector calibrated on the other.
inline RunReport run_experiment(const Dataset& source, ShiftScenario scenario, const ExperimentConfig& cfg,
                                std::uint64_t seed) {
    cfg.monitor.validate();
    cfg.schedule.validate();
    auto parts = partition_source(source, mix_seed(seed, 12));
    if (parts.calibration.empty() || parts.estimator_fit.empty() || parts.test.empty())
        throw InvalidInput("run_experiment: source too small to partition");
    scenario.seed = mix_seed(seed, 11);
    const auto pools = split_pools(parts.train, scenario);
    if (cfg.schedule.shifts() && pools.excluded.empty())
        throw InvalidInput("run_experiment: scenario " + scenario.id() + " leaves no excluded rows in the training share");

    RunReport r;
    r.scenario_id = scenario.id();
    r.seed = seed;
    r.onset = cfg.schedule.shifts() ? cfg.schedule.onset : 0;
    r.horizon = cfg.schedule.horizon;
    r.eps_tol = cfg.monitor.eps_tol;

    std::vector<double> cal_scores, test_scores, excl_scores;
    if (cfg.estimator == EstimatorKind::knn) {
        const auto model = fit_knn(parts.estimator_fit, std::min(cfg.k, parts.estimator_fit.size()));
        cal_scores = model.predict_all(parts.calibration);
        test_scores = model.predict_all(parts.test);
        excl_scores = model.predict_all(pools.excluded);
    } else {
        cal_scores = parts.calibration.scores();
        test_scores = parts.test.scores();
        excl_scores = pools.excluded.scores();
    }
    const auto cal_errors = parts.calibration.errors();
    const auto test_errors = parts.test.errors();
    const auto excl_errors = pools.excluded.errors();
    try {
        r.estimator_r2 = r_squared(cal_scores, cal_errors);
    } catch (const Degenerate&) {
    }
    r.source_mean_error = std::accumulate(cal_errors.begin(), cal_errors.end(), 0.0) / static_cast<double>(cal_errors.size());

    const auto draws = draw_stream(parts.test.size(), pools.excluded.size(), cfg.schedule, mix_seed(seed, 13));
    std::vector<double> prod_errors, prod_scores;
    prod_errors.reserve(draws.size());
    prod_scores.reserve(draws.size());
    for (const auto& d : draws) {
        prod_errors.push_back(d.from_excluded ? excl_errors[d.index] : test_errors[d.index]);
        prod_scores.push_back(d.from_excluded ? excl_scores[d.index] : test_scores[d.index]);
    }
    r.production_mean_error =
        std::accumulate(prod_errors.begin(), prod_errors.end(), 0.0) / static_cast<double>(prod_errors.size());

    auto mean_plugin = MeanMonitor::from_source(cal_errors, cfg.monitor, true);
    auto mean_oracle = MeanMonitor::from_source(cal_errors, cfg.monitor, true);
    r.mean_source_upper = mean_plugin.source_upper();

    std::optional<QuantileMonitor> plugin, oracle;
    try {
        const auto cal = calibrate(cfg.grid, cal_errors, cal_scores);
        r.calibrated = true;
        r.selector = cal.selector;
        r.calibration_power = cal.power;
        r.calibration_fdp = cal.fdp;
        r.source_stats = source_statistics(cal_errors, cal_scores, cal.selector, cfg.monitor);
        auto oracle_cfg = cfg.monitor;
        oracle_cfg.delta_corr = 0.0;
        r.oracle_source_stats = oracle_source_statistics(cal_errors, cal.selector.q, oracle_cfg);
        plugin.emplace(cal.selector, r.source_stats, cfg.monitor, false);
        oracle.emplace(cal.selector, r.oracle_source_stats, oracle_cfg, false);
        r.holdout_fdp = selector_metrics(cal.selector, test_errors, test_scores).fdp;
        const auto prod = selector_metrics(cal.selector, prod_errors, prod_scores);
        r.production_power = prod.power;
        r.production_fdp = prod.fdp;
        r.delta = delta_diagnostic(prod_errors, prod_scores, cal.selector, r.source_stats);
    } catch (const CalibrationInfeasible& e) {
        r.calibration_error = e.what();
    }

    const std::size_t horizon = draws.size();
    r.lmean_plugin.reserve(horizon);
    r.lmean_oracle.reserve(horizon);
    if (plugin) {
        r.lq_plugin.reserve(horizon);
        r.lq_oracle.reserve(horizon);
    }
    for (std::size_t i = 0; i < horizon; ++i) {
        const auto t = static_cast<std::int64_t>(i + 1);
        mean_plugin.observe_score(prod_scores[i]);
        mean_oracle.observe(prod_errors[i]);
        if (plugin) {
            plugin->observe_flag(t, r.selector.selects(prod_scores[i]));
            oracle->observe_flag(t, prod_errors[i] > r.selector.q);
            r.lq_plugin.push_back(plugin->lower());
            r.lq_oracle.push_back(oracle->lower());
        }
    }
    r.lmean_plugin = mean_plugin.lower_trajectory();
    r.lmean_oracle = mean_oracle.lower_trajectory();
    r.clipped_scores = mean_plugin.clipped();
    return r;
}

struct SuiteMetrics {
    Detector detector = Detector::phi_q2;
    double eps_harm = 0.0;
    std::size_t runs = 0;
    std::size_t harmful = 0;
    std::size_t alarms = 0;
    std::size_t true_alarms = 0;
    std::optional<double> power;
    std::optional<double> fdp;
    std::optional<double> mean_detection_time;
    std::optional<double> mean_abs_time_diff;
};

/// Power = alarms on harmful / #harmful, FDP = alarms on benign / #alarms.
/// Quantile detectors only count runs whose calibration succeeded. A given
/// `eps_tol` replaces each run's own detector tolerance.
inline SuiteMetrics suite_metrics(const std::vector<const RunReport*>& reports, Detector det, double eps_harm,
                                  std::optional<double> eps_tol = std::nullopt) {
    SuiteMetrics m;
    m.detector = det;
    m.eps_harm = eps_harm;
    const auto fam = family_of(det);
    double time_sum = 0.0, diff_sum = 0.0;
    std::size_t diff_n = 0;
    for (const auto* r : reports) {
        if (!r->eligible(fam)) continue;
        ++m.runs;
        const bool harmful = r->harmful(fam, eps_harm);
        const double tol = eps_tol.value_or(r->eps_tol);
        const auto at = r->alarm_time(det, tol);
        m.harmful += harmful;
        if (!at) continue;
        ++m.alarms;
        if (!harmful) continue;
        ++m.true_alarms;
        time_sum += static_cast<double>(*at);
        if (auto oracle_at = r->oracle_alarm_time(fam, tol)) {
            diff_sum += std::abs(static_cast<double>(*at - *oracle_at));
            ++diff_n;
        }
    }
    if (m.harmful > 0) m.power = static_cast<double>(m.true_alarms) / static_cast<double>(m.harmful);
    if (m.alarms > 0) m.fdp = static_cast<double>(m.alarms - m.true_alarms) / static_cast<double>(m.alarms);
    if (m.true_alarms > 0) m.mean_detection_time = time_sum / static_cast<double>(m.true_alarms);
    if (diff_n > 0) m.mean_abs_time_diff = diff_sum / static_cast<double>(diff_n);
    return m;
}

inline SuiteMetrics suite_metrics(const std::vector<RunReport>& reports, Detector det, double eps_harm,
                                  std::optional<double> eps_tol = std::nullopt) {
    std::vector<const RunReport*> ptrs;
    ptrs.reserve(reports.size());
    for (const auto& r : reports) ptrs.push_back(&r);
    return suite_metrics(ptrs, det, eps_harm, eps_tol);
}

struct R2Bin {
    double r2_lo = 0.0;
    double r2_hi = 0.0;
    std::size_t count = 0;
    SuiteMetrics metrics;
};

/// Splits reports with a defined estimator r^2 into `bins` equal-count groups
/// by r^2 rank and computes suite metrics per group.
inline std::vector<R2Bin> suite_metrics_by_r2(const std::vector<RunReport>& reports, Detector det, double eps_harm,
                                              std::size_t bins = 10) {
    std::vector<const RunReport*> with_r2;
    for (const auto& r : reports)
        if (r.estimator_r2) with_r2.push_back(&r);
    std::stable_sort(with_r2.begin(), with_r2.end(),
                     [](const RunReport* a, const RunReport* b) { return *a->estimator_r2 < *b->estimator_r2; });
    std::vector<R2Bin> out;
    if (with_r2.empty() || bins == 0) return out;
    const std::size_t n = with_r2.size();
    for (std::size_t b = 0; b < bins; ++b) {
        const std::size_t lo = b * n / bins, hi = (b + 1) * n / bins;
        if (lo == hi) continue;
        std::vector<const RunReport*> group(with_r2.begin() + static_cast<std::ptrdiff_t>(lo),
                                            with_r2.begin() + static_cast<std::ptrdiff_t>(hi));
        out.push_back({*group.front()->estimator_r2, *group.back()->estimator_r2, group.size(),
                       suite_metrics(group, det, eps_harm)});
    }
    return out;
}

struct SuiteJob {
    std::shared_ptr<const Dataset> source;
    ShiftScenario scenario;
    std::uint64_t seed = 0;
};

/// Runs jobs on `workers` threads; results keep job order.
inline std::vector<RunReport> run_jobs(const std::vector<SuiteJob>& jobs, const ExperimentConfig& cfg,
                                       std::size_t workers = 1) {
    std::vector<RunReport> out(jobs.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++)
            out[i] = run_experiment(*jobs[i].source, jobs[i].scenario, cfg, jobs[i].seed);
    };
    workers = std::max<std::size_t>(1, std::min(workers, jobs.size()));
    if (workers == 1) {
        work();
        return out;
    }
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mu;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            try {
                work();
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
                next = jobs.size();
            }
        });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
    return out;
}

/// Feature-split suite over `datasets` independently drawn synthetic sources.
inline std::vector<SuiteJob> make_synthetic_suite(const SyntheticSpec& spec, std::size_t datasets, std::uint64_t seed,
                                                  double ablation_fraction = 0.8) {
    std::vector<SuiteJob> jobs;
    for (std::size_t d = 0; d < datasets; ++d) {
        auto source = std::make_shared<const Dataset>(synthesize_source(spec, mix_seed(seed, 100 + d)));
        const auto scenarios =
            enumerate_scenarios(*source, spec.feature_kinds(), mix_seed(seed, 200 + d), ablation_fraction);
        for (const auto& sc : scenarios) jobs.push_back({source, sc, mix_seed(seed, 10000 * (d + 1) + jobs.size())});
    }
    return jobs;
}

/// Every scenario of one labeled source, each repeated `repeats` times with fresh seeds.
inline std::vector<SuiteJob> make_source_suite(std::shared_ptr<const Dataset> source,
                                               const std::vector<FeatureKind>& kinds, std::size_t repeats,
                                               std::uint64_t seed, double ablation_fraction = 0.8) {
    std::vector<SuiteJob> jobs;
    const auto scenarios = enumerate_scenarios(*source, kinds, mix_seed(seed, 200), ablation_fraction);
    for (std::size_t rep = 0; rep < repeats; ++rep)
        for (const auto& sc : scenarios) jobs.push_back({source, sc, mix_seed(seed, 10000 * (rep + 1) + jobs.size())});
    return jobs;
}

} // namespace shiftmon
