#pragma once

// Subcommand bodies behind the `shiftmon` executable. Each returns a process
// exit code: 0 ok, 1 error, 2 alarm raised (monitor only). Files are written
// under cfg.output_dir and nowhere else.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "calibration.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "estimator.hpp"
#include "harness.hpp"
#include "monitor.hpp"
#include "report_json.hpp"
#include "shiftsim.hpp"

namespace shiftmon::commands {

namespace fs = std::filesystem;
using report::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitAlarm = 2;

/// Labeled source: the CSV named in the config, or a synthetic draw when none
/// is given. External scores, if configured, are attached row by row.
inline Dataset load_source(const AppConfig& cfg) {
    Dataset d = cfg.source.empty() ? synthesize_source(cfg.synthetic, mix_seed(cfg.seed, 1)) : csv::read_dataset(cfg.source);
    if (cfg.source_scores.empty()) return d;
    const auto scores = csv::load_scores(cfg.source_scores);
    if (scores.size() != d.size())
        throw IngestError("source_scores: " + std::to_string(scores.size()) + " scores for " +
                          std::to_string(d.size()) + " source rows");
    Dataset out;
    for (std::size_t i = 0; i < d.size(); ++i) {
        ErrorSample s = d[i];
        s.est_score = scores[i];
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<FeatureKind> feature_kinds(const AppConfig& cfg, const Dataset& source) {
    if (cfg.source.empty()) return cfg.synthetic.feature_kinds();
    std::vector<FeatureKind> kinds(source.dimension(), FeatureKind::continuous);
    for (auto j : cfg.categorical) {
        if (j >= kinds.size()) throw ConfigError("categorical", "feature index " + std::to_string(j) + " out of range");
        kinds[j] = FeatureKind::categorical;
    }
    return kinds;
}

inline bool use_external_scores(const AppConfig& cfg, const Dataset& source) {
    if (cfg.estimator == "knn") return false;
    if (cfg.estimator == "external" && !source.has_scores())
        throw ConfigError("estimator", "external scores requested but the source has no score column");
    return source.has_scores();
}

inline ExperimentConfig experiment_config(const AppConfig& cfg, bool external) {
    ExperimentConfig e;
    e.grid = cfg.grid;
    e.monitor = cfg.monitor;
    e.schedule = cfg.make_schedule();
    e.estimator = external ? EstimatorKind::external : EstimatorKind::knn;
    e.k = cfg.k;
    e.eps_harm = cfg.eps_harm;
    return e;
}

/// Calibration set with scores, plus the fitted model when scores come from
/// k-NN (fit on a seeded half of the source, calibrated on the other half).
struct Prepared {
    Dataset calibration;
    std::vector<double> scores;
    std::optional<KnnModel> model;
};

inline Prepared prepare(const AppConfig& cfg, const Dataset& source) {
    Prepared p;
    if (use_external_scores(cfg, source)) {
        p.calibration = source;
        p.scores = source.scores();
        return p;
    }
    if (source.size() < 2) throw InvalidInput("source needs at least two rows to fit and calibrate");
    std::vector<std::size_t> idx(source.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(mix_seed(cfg.seed, 2));
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t half = idx.size() / 2;
    const auto fit = source.subset(std::span(idx).first(half));
    p.calibration = source.subset(std::span(idx).subspan(half));
    p.model = fit_knn(fit, std::min(cfg.k, fit.size()));
    p.scores = p.model->predict_all(p.calibration);
    return p;
}

inline std::ofstream open_output(const AppConfig& cfg, const std::string& name) {
    fs::create_directories(cfg.output_dir);
    const auto path = fs::path(cfg.output_dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

inline void write_json(const AppConfig& cfg, const std::string& name, const json& j) {
    auto out = open_output(cfg, name);
    out << j.dump(2) << '\n';
}

inline int calibrate_cmd(const AppConfig& cfg, std::ostream& log) {
    const auto source = load_source(cfg);
    const auto prep = prepare(cfg, source);
    const auto errors = prep.calibration.errors();
    try {
        const auto res = calibrate(cfg.grid, errors, prep.scores);
        {
            auto out = open_output(cfg, "grid_report.csv");
            write_grid_report(out, res.grid_report);
        }
        auto j = report::to_json(res);
        j["estimator"] = prep.model ? "knn" : "external";
        j["calibration_rows"] = errors.size();
        j["source_stats"] = report::to_json(source_statistics(errors, prep.scores, res.selector, cfg.monitor));
        write_json(cfg, "selector.json", j);
        log << "selector q=" << csv::format_double(res.selector.q) << " q_hat=" << csv::format_double(res.selector.q_hat)
            << " power=" << csv::format_double(res.power) << " fdp=" << csv::format_double(res.fdp) << '\n';
        return kExitOk;
    } catch (const CalibrationInfeasible& e) {
        auto out = open_output(cfg, "grid_report.csv");
        write_grid_report(out, e.grid_report());
        throw;
    }
}

inline int monitor_cmd(const AppConfig& cfg, std::istream& stdin_stream, std::ostream& log) {
    if (cfg.production.empty()) throw ConfigError("production", "monitor needs a production CSV or '-'");
    const auto source = load_source(cfg);
    const auto prep = prepare(cfg, source);
    const auto errors = prep.calibration.errors();
    const auto cal = calibrate(cfg.grid, errors, prep.scores);
    const auto stats = source_statistics(errors, prep.scores, cal.selector, cfg.monitor);
    QuantileMonitor quantile(cal.selector, stats, cfg.monitor, false);
    auto mean = MeanMonitor::from_source(errors, cfg.monitor);
    const auto det = cfg.detector();

    std::ifstream file;
    if (cfg.production != "-") {
        file.open(cfg.production);
        if (!file) throw IngestError("cannot read " + cfg.production);
    }
    csv::StreamReader reader(cfg.production == "-" ? stdin_stream : file);
    if (reader.schema().dimension != source.dimension())
        throw IngestError("production has " + std::to_string(reader.schema().dimension) + " features, source has " +
                          std::to_string(source.dimension()));
    if (!prep.model && !reader.schema().has_score())
        throw IngestError("production stream needs a score column when external scores are used");

    auto traj = open_output(cfg, "trajectory.csv");
    write_trajectory_header(traj);
    std::int64_t t = 0;
    while (auto row = reader.next()) {
        StreamEvent ev{++t, std::move(row->features), row->error, row->score};
        const double score = prep.model ? prep.model->predict(ev.features) : *ev.est_score;
        const auto d = quantile.observe(ev, score);
        mean.observe_score(score);
        write_trajectory_row(traj, {t, quantile.selection_cs().running_mean(), quantile.lower(), stats.u_q, stats.u_q2,
                                    d.phi_q, d.phi_q2});
        traj.flush();
        const auto fired = det == Detector::phi_q ? quantile.phi_q_time() : quantile.phi_q2_time();
        if (d.raised_now && fired && *fired == t) log << "alarm " << to_string(det) << " t=" << t << '\n';
    }
    const auto alarm_at = det == Detector::phi_q ? quantile.phi_q_time() : quantile.phi_q2_time();
    json j{{"schema_version", report::kSchemaVersion},
           {"detector", to_string(det)},
           {"events", t},
           {"alarm", alarm_at.has_value()},
           {"alarm_time", report::opt(alarm_at)},
           {"phi_q_time", report::opt(quantile.phi_q_time())},
           {"phi_q2_time", report::opt(quantile.phi_q2_time())},
           {"mean_plugin_time", report::opt(mean.alarm_time())},
           {"final_lower", quantile.lower()},
           {"selector", report::to_json(cal.selector)},
           {"source_stats", report::to_json(stats)},
           {"mean_source_upper", mean.source_upper()},
           {"clipped_scores", mean.clipped()}};
    write_json(cfg, "monitor.json", j);
    if (!alarm_at) log << "no alarm after " << t << " events\n";
    return alarm_at ? kExitAlarm : kExitOk;
}

inline std::string file_safe(std::string id) {
    for (char& c : id)
        if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
    return id;
}

/// Writes every scenario's labeled stream (features, error, and score when
/// the source carries one) plus an index file.
inline int simulate_cmd(const AppConfig& cfg, std::ostream& log) {
    const auto source = load_source(cfg);
    const auto kinds = feature_kinds(cfg, source);
    const auto schedule = cfg.make_schedule();
    schedule.validate();
    const auto scenarios = enumerate_scenarios(source, kinds, mix_seed(cfg.seed, 200), cfg.ablation_fraction);
    fs::create_directories(fs::path(cfg.output_dir) / "streams");
    auto index = open_output(cfg, "scenarios.csv");
    index << "index,scenario,file,excluded_rows\n";
    std::size_t written = 0;
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        const auto seed = mix_seed(cfg.seed, 10000 + i);
        auto parts = partition_source(source, mix_seed(seed, 12));
        auto sc = scenarios[i];
        sc.seed = mix_seed(seed, 11);
        const auto pools = split_pools(parts.train, sc);
        if (schedule.shifts() && pools.excluded.empty()) continue;
        const auto events = build_stream(parts.test, pools.excluded, schedule, mix_seed(seed, 13));
        const auto name = "streams/" + std::to_string(i) + "_" + file_safe(sc.id()) + ".csv";
        auto out = open_output(cfg, name);
        csv::write_events(out, events);
        index << i << ',' << sc.id() << ',' << name << ',' << pools.excluded.size() << '\n';
        ++written;
    }
    log << written << " streams written to " << (fs::path(cfg.output_dir) / "streams").string() << '\n';
    return kExitOk;
}

inline std::vector<RunReport> run_suite(const AppConfig& cfg) {
    std::vector<SuiteJob> jobs;
    bool external = false;
    if (cfg.source.empty()) {
        if (cfg.estimator == "external" && !cfg.synthetic.perfect_scores)
            throw ConfigError("estimator", "external scores requested but the synthetic source has none");
        external = cfg.estimator != "knn" && cfg.synthetic.perfect_scores;
        jobs = make_synthetic_suite(cfg.synthetic, cfg.synthetic_datasets, cfg.seed, cfg.ablation_fraction);
    } else {
        auto source = std::make_shared<const Dataset>(load_source(cfg));
        external = use_external_scores(cfg, *source);
        jobs = make_source_suite(source, feature_kinds(cfg, *source), cfg.repeats, cfg.seed, cfg.ablation_fraction);
    }
    return run_jobs(jobs, experiment_config(cfg, external), cfg.workers);
}

inline constexpr Detector kAllDetectors[] = {Detector::phi_q, Detector::phi_q2, Detector::mean_plugin};

inline int evaluate_cmd(const AppConfig& cfg, std::ostream& log) {
    const auto reports = run_suite(cfg);
    json metrics = json::array(), by_r2 = json::object();
    for (auto d : kAllDetectors) {
        const auto m = suite_metrics(reports, d, cfg.eps_harm);
        metrics.push_back(report::to_json(m));
        json bins = json::array();
        for (const auto& b : suite_metrics_by_r2(reports, d, cfg.eps_harm)) bins.push_back(report::to_json(b));
        by_r2[to_string(d)] = bins;
        log << to_string(d) << ": runs=" << m.runs << " harmful=" << m.harmful << " alarms=" << m.alarms
            << " power=" << (m.power ? csv::format_double(*m.power) : "NA")
            << " fdp=" << (m.fdp ? csv::format_double(*m.fdp) : "NA") << '\n';
    }
    std::size_t calibrated = 0;
    for (const auto& r : reports) calibrated += r.calibrated;
    write_json(cfg, "suite.json",
               json{{"schema_version", report::kSchemaVersion},
                    {"runs", reports.size()},
                    {"calibrated_runs", calibrated},
                    {"horizon", cfg.horizon},
                    {"schedule", cfg.schedule},
                    {"eps_tol", cfg.monitor.eps_tol},
                    {"eps_harm", cfg.eps_harm},
                    {"seed", cfg.seed},
                    {"metrics", metrics},
                    {"by_r2", by_r2}});
    json runs = json::array();
    for (const auto& r : reports) runs.push_back(report::to_json(r, cfg.eps_harm, cfg.write_paths));
    write_json(cfg, "runs.json", json{{"schema_version", report::kSchemaVersion}, {"runs", runs}});
    return kExitOk;
}

inline void write_metrics_row(std::ostream& out, double eps, const SuiteMetrics& m) {
    auto o = [](const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string{}; };
    out << csv::format_double(eps) << ',' << to_string(m.detector) << ',' << m.runs << ',' << m.harmful << ','
        << m.alarms << ',' << m.true_alarms << ',' << o(m.power) << ',' << o(m.fdp) << ',' << o(m.mean_detection_time)
        << '\n';
}

/// Harmfulness-threshold and detector-tolerance sweeps over one suite run.
inline int sweep_cmd(const AppConfig& cfg, std::ostream& log) {
    const auto reports = run_suite(cfg);
    json harm = json::array(), tol = json::array();
    {
        auto out = open_output(cfg, "sweep_eps_harm.csv");
        out << "eps_harm,detector,runs,harmful,alarms,true_alarms,power,fdp,mean_detection_time\n";
        for (double e : cfg.eps_harm_grid)
            for (auto d : kAllDetectors) {
                const auto m = suite_metrics(reports, d, e);
                write_metrics_row(out, e, m);
                harm.push_back(report::to_json(m));
            }
    }
    {
        auto out = open_output(cfg, "sweep_eps_tol.csv");
        out << "eps_tol,detector,runs,harmful,alarms,true_alarms,power,fdp,mean_detection_time\n";
        for (double e : cfg.eps_tol_grid)
            for (auto d : kAllDetectors) {
                const auto m = suite_metrics(reports, d, cfg.eps_harm, e);
                write_metrics_row(out, e, m);
                auto j = report::to_json(m);
                j["eps_tol"] = e;
                tol.push_back(j);
            }
    }
    write_json(cfg, "sweep.json",
               json{{"schema_version", report::kSchemaVersion}, {"runs", reports.size()}, {"eps_harm", harm}, {"eps_tol", tol}});
    log << "sweep over " << reports.size() << " runs written to " << cfg.output_dir << '\n';
    return kExitOk;
}

} // namespace shiftmon::commands
