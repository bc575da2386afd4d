#pragma once

// Flat `key = value` configuration. Lines starting with '#' are comments.
// Command-line overrides are applied after the file, key by key.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "calibration.hpp"
#include "harness.hpp"
#include "monitor.hpp"
#include "shiftsim.hpp"

namespace shiftmon {

struct AppConfig {
    std::string source;        // labeled source CSV; empty => synthetic source
    std::string production;    // production CSV or "-" for stdin
    std::string source_scores; // optional external scores aligned with source rows
    std::string estimator = "auto"; // auto | knn | external
    std::size_t k = KnnModel::kDefaultK;

    GridSpec grid = GridSpec::defaults();
    MonitorConfig monitor;

    std::string schedule = "sudden"; // none | sudden | sigmoid
    std::int64_t horizon = 2000;
    std::int64_t onset = 0; // 0 => horizon / 2

    std::uint64_t seed = 0;
    std::size_t repeats = 1;
    std::size_t synthetic_datasets = 4;
    SyntheticSpec synthetic;
    std::vector<std::size_t> categorical;
    double ablation_fraction = 0.8;

    std::string output_dir = "out";
    std::size_t workers = 1;
    double eps_harm = 0.0;
    std::vector<double> eps_harm_grid{0.0, 0.01, 0.02, 0.05, 0.1};
    std::vector<double> eps_tol_grid{0.0, 0.01, 0.02, 0.05};
    std::string alarm_detector = "phi_q2"; // phi_q | phi_q2
    bool write_paths = false;

    Schedule make_schedule() const {
        const std::int64_t at = onset > 0 ? onset : std::max<std::int64_t>(1, horizon / 2);
        if (schedule == "none") return Schedule::none(horizon);
        if (schedule == "sigmoid") return Schedule::sigmoid(at, horizon);
        return Schedule::sudden(at, horizon);
    }

    Detector detector() const { return alarm_detector == "phi_q" ? Detector::phi_q : Detector::phi_q2; }
};

namespace config_detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || v.empty())
        throw ConfigError(key, "expected a number, got '" + v + "'");
    return out;
}

inline std::int64_t to_int(const std::string& key, const std::string& v) {
    std::int64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || v.empty())
        throw ConfigError(key, "expected an integer, got '" + v + "'");
    return out;
}

inline std::size_t to_count(const std::string& key, const std::string& v) {
    const auto i = to_int(key, v);
    if (i < 0) throw ConfigError(key, "must be nonnegative");
    return static_cast<std::size_t>(i);
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key, "expected true/false, got '" + v + "'");
}

inline std::vector<double> to_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(to_double(key, trim(tok)));
    if (out.empty()) throw ConfigError(key, "expected a comma-separated list");
    return out;
}

inline std::string one_of(const std::string& key, const std::string& v, std::initializer_list<const char*> allowed) {
    for (const char* a : allowed)
        if (v == a) return v;
    throw ConfigError(key, "unsupported value '" + v + "'");
}

using Setter = std::function<void(AppConfig&, const std::string&, const std::string&)>;

// any classifier key switches the synthetic source to the classifier model
inline ClassifierSpec& classifier(AppConfig& c, const std::string&) {
    if (!c.synthetic.classifier) c.synthetic.classifier = ClassifierSpec{};
    return *c.synthetic.classifier;
}

inline const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"source", [](AppConfig& c, auto&, auto& v) { c.source = v; }},
        {"production", [](AppConfig& c, auto&, auto& v) { c.production = v; }},
        {"source_scores", [](AppConfig& c, auto&, auto& v) { c.source_scores = v; }},
        {"estimator", [](AppConfig& c, auto& k, auto& v) { c.estimator = one_of(k, v, {"auto", "knn", "external"}); }},
        {"k", [](AppConfig& c, auto& k, auto& v) { c.k = to_count(k, v); }},
        {"p_values", [](AppConfig& c, auto& k, auto& v) { c.grid.p_values = to_list(k, v); }},
        {"p_hat_values", [](AppConfig& c, auto& k, auto& v) { c.grid.p_hat_values = to_list(k, v); }},
        {"fdp_max", [](AppConfig& c, auto& k, auto& v) { c.grid.fdp_max = to_double(k, v); }},
        {"alpha_source", [](AppConfig& c, auto& k, auto& v) { c.monitor.alpha_source = to_double(k, v); }},
        {"alpha_prod", [](AppConfig& c, auto& k, auto& v) { c.monitor.alpha_prod = to_double(k, v); }},
        {"alpha1_share", [](AppConfig& c, auto& k, auto& v) { c.monitor.alpha1_share = to_double(k, v); }},
        {"eps_tol", [](AppConfig& c, auto& k, auto& v) { c.monitor.eps_tol = to_double(k, v); }},
        {"delta_corr", [](AppConfig& c, auto& k, auto& v) { c.monitor.delta_corr = to_double(k, v); }},
        {"schedule", [](AppConfig& c, auto& k, auto& v) { c.schedule = one_of(k, v, {"none", "sudden", "sigmoid"}); }},
        {"horizon", [](AppConfig& c, auto& k, auto& v) { c.horizon = to_int(k, v); }},
        {"onset", [](AppConfig& c, auto& k, auto& v) { c.onset = to_int(k, v); }},
        {"seed", [](AppConfig& c, auto& k, auto& v) { c.seed = static_cast<std::uint64_t>(to_count(k, v)); }},
        {"repeats", [](AppConfig& c, auto& k, auto& v) { c.repeats = to_count(k, v); }},
        {"synthetic_datasets", [](AppConfig& c, auto& k, auto& v) { c.synthetic_datasets = to_count(k, v); }},
        {"synthetic_n", [](AppConfig& c, auto& k, auto& v) { c.synthetic.n = to_count(k, v); }},
        {"synthetic_informative", [](AppConfig& c, auto& k, auto& v) { c.synthetic.informative_features = to_count(k, v); }},
        {"synthetic_noise", [](AppConfig& c, auto& k, auto& v) { c.synthetic.noise_features = to_count(k, v); }},
        {"synthetic_categories", [](AppConfig& c, auto& k, auto& v) { c.synthetic.categories = to_count(k, v); }},
        {"synthetic_concentration", [](AppConfig& c, auto& k, auto& v) { c.synthetic.concentration = to_double(k, v); }},
        {"synthetic_base_error", [](AppConfig& c, auto& k, auto& v) { c.synthetic.base_error = to_double(k, v); }},
        {"synthetic_tail_threshold", [](AppConfig& c, auto& k, auto& v) { c.synthetic.tail_threshold = to_double(k, v); }},
        {"synthetic_tail_multipliers", [](AppConfig& c, auto& k, auto& v) { c.synthetic.tail_multipliers = to_list(k, v); }},
        {"synthetic_category_factors", [](AppConfig& c, auto& k, auto& v) { c.synthetic.category_factors = to_list(k, v); }},
        {"synthetic_category_concentrations",
         [](AppConfig& c, auto& k, auto& v) { c.synthetic.category_concentrations = to_list(k, v); }},
        {"synthetic_failure_error", [](AppConfig& c, auto& k, auto& v) { c.synthetic.failure_error = to_double(k, v); }},
        {"synthetic_success_error", [](AppConfig& c, auto& k, auto& v) { c.synthetic.success_error = to_double(k, v); }},
        {"synthetic_model", [](AppConfig& c, auto& k, auto& v) {
             if (one_of(k, v, {"beta", "classifier"}) == "beta") c.synthetic.classifier.reset();
             else if (!c.synthetic.classifier) c.synthetic.classifier = ClassifierSpec{};
         }},
        {"synthetic_intercept", [](AppConfig& c, auto& k, auto& v) { classifier(c, k).intercept = to_double(k, v); }},
        {"synthetic_coefficients", [](AppConfig& c, auto& k, auto& v) { classifier(c, k).coefficients = to_list(k, v); }},
        {"synthetic_model_scale", [](AppConfig& c, auto& k, auto& v) { classifier(c, k).model_scale = to_double(k, v); }},
        {"synthetic_model_bias", [](AppConfig& c, auto& k, auto& v) { classifier(c, k).model_bias = to_double(k, v); }},
        {"synthetic_flaws",
         [](AppConfig& c, auto& k, auto& v) {
             const auto xs = to_list(k, v);
             if (xs.size() % 3 != 0) throw ConfigError(k, "expected feature,threshold,offset triples");
             auto& flaws = classifier(c, k).flaws;
             flaws.clear();
             for (std::size_t i = 0; i < xs.size(); i += 3) {
                 if (xs[i] < 0 || xs[i] != static_cast<double>(static_cast<std::size_t>(xs[i])))
                     throw ConfigError(k, "flaw feature must be a nonnegative integer");
                 flaws.push_back({static_cast<std::size_t>(xs[i]), xs[i + 1], xs[i + 2]});
             }
         }},
        {"synthetic_perfect_scores", [](AppConfig& c, auto& k, auto& v) { c.synthetic.perfect_scores = to_bool(k, v); }},
        {"categorical",
         [](AppConfig& c, auto& k, auto& v) {
             c.categorical.clear();
             for (double x : to_list(k, v)) {
                 if (x < 0 || x != static_cast<double>(static_cast<std::size_t>(x)))
                     throw ConfigError(k, "feature indices must be nonnegative integers");
                 c.categorical.push_back(static_cast<std::size_t>(x));
             }
         }},
        {"ablation_fraction", [](AppConfig& c, auto& k, auto& v) { c.ablation_fraction = to_double(k, v); }},
        {"output_dir", [](AppConfig& c, auto&, auto& v) { c.output_dir = v; }},
        {"workers", [](AppConfig& c, auto& k, auto& v) { c.workers = to_count(k, v); }},
        {"eps_harm", [](AppConfig& c, auto& k, auto& v) { c.eps_harm = to_double(k, v); }},
        {"eps_harm_grid", [](AppConfig& c, auto& k, auto& v) { c.eps_harm_grid = to_list(k, v); }},
        {"eps_tol_grid", [](AppConfig& c, auto& k, auto& v) { c.eps_tol_grid = to_list(k, v); }},
        {"alarm_detector", [](AppConfig& c, auto& k, auto& v) { c.alarm_detector = one_of(k, v, {"phi_q", "phi_q2"}); }},
        {"write_paths", [](AppConfig& c, auto& k, auto& v) { c.write_paths = to_bool(k, v); }},
    };
    return table;
}

} // namespace config_detail

inline std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& [k, _] : config_detail::setters()) out.push_back(k);
    return out;
}

inline void apply_setting(AppConfig& cfg, const std::string& key, const std::string& value) {
    const auto& table = config_detail::setters();
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError(key, "unknown key");
    it->second(cfg, key, value);
}

/// Parses `key = value` lines into `cfg`.
inline void apply_config_text(AppConfig& cfg, std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = config_detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no), "expected key = value");
        apply_setting(cfg, config_detail::trim(line.substr(0, eq)), config_detail::trim(line.substr(eq + 1)));
    }
}

inline void validate(const AppConfig& cfg) {
    auto in01 = [](double a) { return a > 0.0 && a < 1.0; };
    if (!in01(cfg.monitor.alpha_source)) throw ConfigError("alpha_source", "must lie in (0,1)");
    if (!in01(cfg.monitor.alpha_prod)) throw ConfigError("alpha_prod", "must lie in (0,1)");
    if (!in01(cfg.monitor.alpha1_share)) throw ConfigError("alpha1_share", "must lie in (0,1)");
    if (!(cfg.monitor.eps_tol >= 0.0)) throw ConfigError("eps_tol", "must be >= 0");
    if (!(cfg.monitor.delta_corr >= 0.0)) throw ConfigError("delta_corr", "must be >= 0");
    if (!in01(cfg.grid.fdp_max)) throw ConfigError("fdp_max", "must lie in (0,1)");
    try {
        cfg.grid.validate();
    } catch (const InvalidInput& e) {
        throw ConfigError("p_values", e.what());
    }
    if (cfg.k == 0) throw ConfigError("k", "must be positive");
    if (cfg.horizon < 1) throw ConfigError("horizon", "must be positive");
    if (cfg.onset < 0 || cfg.onset > cfg.horizon) throw ConfigError("onset", "must lie in [0, horizon]");
    if (!(cfg.ablation_fraction > 0.0 && cfg.ablation_fraction <= 1.0))
        throw ConfigError("ablation_fraction", "must lie in (0,1]");
    if (cfg.workers == 0) throw ConfigError("workers", "must be positive");
    if (!(cfg.eps_harm >= 0.0)) throw ConfigError("eps_harm", "must be >= 0");
    if (cfg.synthetic.n == 0) throw ConfigError("synthetic_n", "must be positive");
    if (!(cfg.synthetic.concentration > 0.0)) throw ConfigError("synthetic_concentration", "must be positive");
    for (double x : cfg.synthetic.category_concentrations)
        if (!(x > 0.0)) throw ConfigError("synthetic_category_concentrations", "must be positive");
    if (cfg.synthetic.classifier)
        for (const auto& f : cfg.synthetic.classifier->flaws)
            if (f.feature >= cfg.synthetic.dimension())
                throw ConfigError("synthetic_flaws", "feature " + std::to_string(f.feature) + " out of range");
    auto must_exist = [](const char* key, const std::string& path) {
        if (!path.empty() && path != "-" && !std::filesystem::exists(path))
            throw ConfigError(key, "file not found: " + path);
    };
    must_exist("source", cfg.source);
    must_exist("production", cfg.production);
    must_exist("source_scores", cfg.source_scores);
}

/// File values first (if a path is given), then overrides in order; validated.
inline AppConfig parse_config(const std::string& path, const std::vector<std::pair<std::string, std::string>>& overrides) {
    AppConfig cfg;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("config", "cannot read " + path);
        apply_config_text(cfg, in);
    }
    for (const auto& [k, v] : overrides) apply_setting(cfg, k, v);
    validate(cfg);
    return cfg;
}

} // namespace shiftmon
