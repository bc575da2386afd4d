#pragma once

// JSON payloads for run reports, suite metrics and calibration output. Every
// payload carries `schema_version`; key order is fixed so identical inputs
// give byte-identical documents.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "calibration.hpp"
#include "harness.hpp"
#include "monitor.hpp"

namespace shiftmon::report {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

template <class T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

inline json to_json(const Selector& s) {
    return json{{"p", s.p}, {"p_hat", s.p_hat}, {"q", s.q}, {"q_hat", s.q_hat}};
}

inline json to_json(const SourceStats& s) {
    return json{{"n", s.n},
                {"rate_above_q", s.rate_above_q},
                {"rate_true_discovery", s.rate_true_discovery},
                {"rate_false_discovery", s.rate_false_discovery},
                {"w_n", s.w_n},
                {"w_n_fd", s.w_n_fd},
                {"u_q", s.u_q},
                {"u_q2", s.u_q2}};
}

inline json to_json(const CalibrationResult& c) {
    return json{{"schema_version", kSchemaVersion},
                {"selector", to_json(c.selector)},
                {"power", c.power},
                {"fdp", c.fdp},
                {"grid_cells", c.grid_report.size()}};
}

inline json to_json(const RunReport& r, double eps_harm, bool with_paths = false) {
    json alarms = json::object();
    for (auto d : {Detector::phi_q, Detector::phi_q2, Detector::mean_plugin}) alarms[to_string(d)] = opt(r.alarm_time(d));
    json oracle = json::object();
    for (auto f : {Family::quantile, Family::mean}) oracle[to_string(f)] = opt(r.oracle_alarm_time(f, r.eps_tol));
    json harmful = json::object();
    for (auto f : {Family::quantile, Family::mean})
        harmful[to_string(f)] = r.eligible(f) ? json(r.harmful(f, eps_harm)) : json(nullptr);

    json j{{"scenario", r.scenario_id},
           {"seed", r.seed},
           {"onset", r.onset},
           {"horizon", r.horizon},
           {"eps_tol", r.eps_tol},
           {"eps_harm", eps_harm},
           {"calibrated", r.calibrated},
           {"calibration_error", r.calibration_error},
           {"selector", r.calibrated ? to_json(r.selector) : json(nullptr)},
           {"calibration_power", r.calibrated ? json(r.calibration_power) : json(nullptr)},
           {"calibration_fdp", r.calibrated ? json(r.calibration_fdp) : json(nullptr)},
           {"estimator_r2", opt(r.estimator_r2)},
           {"source_stats", r.calibrated ? to_json(r.source_stats) : json(nullptr)},
           {"mean_source_upper", r.mean_source_upper},
           {"source_mean_error", r.source_mean_error},
           {"production_mean_error", r.production_mean_error},
           {"delta", opt(r.delta)},
           {"holdout_fdp", opt(r.holdout_fdp)},
           {"production_power", opt(r.production_power)},
           {"production_fdp", opt(r.production_fdp)},
           {"clipped_scores", r.clipped_scores},
           {"alarm_time", alarms},
           {"oracle_alarm_time", oracle},
           {"ground_truth_harmful", harmful}};
    if (with_paths) {
        j["paths"] = json{{"L_q", r.lq_plugin},
                          {"L_q_oracle", r.lq_oracle},
                          {"L_mean", r.lmean_plugin},
                          {"L_mean_oracle", r.lmean_oracle}};
    }
    return j;
}

inline json to_json(const SuiteMetrics& m) {
    return json{{"detector", to_string(m.detector)},
                {"eps_harm", m.eps_harm},
                {"runs", m.runs},
                {"harmful", m.harmful},
                {"alarms", m.alarms},
                {"true_alarms", m.true_alarms},
                {"power", opt(m.power)},
                {"fdp", opt(m.fdp)},
                {"mean_detection_time", opt(m.mean_detection_time)},
                {"mean_abs_time_diff", opt(m.mean_abs_time_diff)}};
}

inline json to_json(const R2Bin& b) {
    return json{{"r2_lo", b.r2_lo}, {"r2_hi", b.r2_hi}, {"count", b.count}, {"metrics", to_json(b.metrics)}};
}

} // namespace shiftmon::report
