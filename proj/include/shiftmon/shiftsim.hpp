#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "core.hpp"

namespace shiftmon {

/// Derives independent sub-seeds from a base seed (splitmix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

enum class FeatureKind { continuous, categorical };
enum class SplitKind { above_median, below_median, category };

struct ShiftScenario {
    std::size_t feature_index = 0;
    SplitKind split_kind = SplitKind::above_median;
    double category_value = 0.0; // used when split_kind == category
    double ablation_fraction = 0.8;
    std::uint64_t seed = 0;

    std::string id() const {
        const std::string f = "f" + std::to_string(feature_index);
        switch (split_kind) {
        case SplitKind::above_median: return f + ">median";
        case SplitKind::below_median: return f + "<=median";
        case SplitKind::category: {
            auto v = category_value;
            return f + "==" + (v == std::floor(v) ? std::to_string(static_cast<long long>(v)) : std::to_string(v));
        }
        }
        return f;
    }
};

inline constexpr std::size_t kMinHeldOut = 10;

namespace detail {

inline std::vector<double> column(const Dataset& data, std::size_t j) {
    std::vector<double> out;
    out.reserve(data.size());
    for (const auto& s : data) out.push_back(s.features[j]);
    return out;
}

// Rows on the side of the split, in dataset order.
inline std::vector<std::size_t> side_rows(const Dataset& data, const ShiftScenario& sc) {
    std::vector<std::size_t> rows;
    const auto col = column(data, sc.feature_index);
    if (sc.split_kind == SplitKind::category) {
        for (std::size_t i = 0; i < col.size(); ++i)
            if (col[i] == sc.category_value) rows.push_back(i);
        return rows;
    }
    const double median = empirical_quantile(0.5, col);
    for (std::size_t i = 0; i < col.size(); ++i) {
        const bool above = col[i] > median;
        if (above == (sc.split_kind == SplitKind::above_median)) rows.push_back(i);
    }
    return rows;
}

inline std::size_t excluded_count(std::size_t side, const ShiftScenario& sc) {
    if (sc.split_kind == SplitKind::category) return side;
    return static_cast<std::size_t>(std::floor(sc.ablation_fraction * static_cast<double>(side) + 1e-9));
}

} // namespace detail

/// Two median splits per continuous feature, one split per category of each
/// categorical feature. Splits whose held-out subgroup has fewer than 10 rows
/// are dropped.
inline std::vector<ShiftScenario> enumerate_scenarios(const Dataset& data, const std::vector<FeatureKind>& kinds,
                                                      std::uint64_t seed = 0, double continuous_fraction = 0.8) {
    if (kinds.size() != data.dimension())
        throw InvalidInput("enumerate_scenarios: need a feature kind for each of the " +
                           std::to_string(data.dimension()) + " features");
    if (!(continuous_fraction > 0.0 && continuous_fraction <= 1.0))
        throw InvalidInput("enumerate_scenarios: ablation fraction must lie in (0,1]");
    std::vector<ShiftScenario> out;
    auto consider = [&](ShiftScenario sc) {
        sc.seed = mix_seed(seed, out.size() + 1000 * sc.feature_index);
        if (detail::excluded_count(detail::side_rows(data, sc).size(), sc) >= kMinHeldOut) out.push_back(sc);
    };
    for (std::size_t j = 0; j < kinds.size(); ++j) {
        if (kinds[j] == FeatureKind::continuous) {
            consider({j, SplitKind::above_median, 0.0, continuous_fraction, 0});
            consider({j, SplitKind::below_median, 0.0, continuous_fraction, 0});
        } else {
            const auto col = detail::column(data, j);
            const std::set<double> cats(col.begin(), col.end());
            for (double c : cats) consider({j, SplitKind::category, c, 1.0, 0});
        }
    }
    return out;
}

struct PoolSplit {
    Dataset retained;
    Dataset excluded;
    std::vector<std::size_t> retained_rows;
    std::vector<std::size_t> excluded_rows;
};

/// Ablates the scenario's subgroup: for median splits a seeded uniform
/// fraction of the rows on the chosen side, for categories every row.
inline PoolSplit split_pools(const Dataset& data, const ShiftScenario& sc) {
    if (sc.feature_index >= data.dimension()) throw InvalidInput("split_pools: feature index out of range");
    auto side = detail::side_rows(data, sc);
    const auto take = detail::excluded_count(side.size(), sc);
    std::mt19937_64 rng(sc.seed);
    std::shuffle(side.begin(), side.end(), rng);
    std::vector<bool> is_excluded(data.size(), false);
    for (std::size_t i = 0; i < take; ++i) is_excluded[side[i]] = true;

    PoolSplit out;
    for (std::size_t i = 0; i < data.size(); ++i) (is_excluded[i] ? out.excluded_rows : out.retained_rows).push_back(i);
    out.retained = data.subset(out.retained_rows);
    out.excluded = data.subset(out.excluded_rows);
    return out;
}

/// Logistic reintroduction probability 1 / (1 + exp(-(t - t0))).
inline double sigmoid_mixture(std::int64_t t, std::int64_t t0) {
    return 1.0 / (1.0 + std::exp(-static_cast<double>(t - t0)));
}

struct Schedule {
    enum class Kind { none, sudden, sigmoid };
    Kind kind = Kind::none;
    std::int64_t onset = 0; // T for sudden, t0 for sigmoid
    std::int64_t horizon = 2000;

    static Schedule none(std::int64_t horizon) { return {Kind::none, horizon, horizon}; }
    static Schedule sudden(std::int64_t at, std::int64_t horizon) { return {Kind::sudden, at, horizon}; }
    static Schedule sigmoid(std::int64_t t0, std::int64_t horizon) { return {Kind::sigmoid, t0, horizon}; }

    void validate() const {
        if (horizon < 1) throw InvalidInput("Schedule: horizon must be >= 1");
        if (kind != Kind::none && (onset < 1 || onset > horizon))
            throw InvalidInput("Schedule: onset must lie in [1, horizon]");
    }

    bool shifts() const noexcept { return kind != Kind::none; }
};

inline std::string to_string(Schedule::Kind k) {
    switch (k) {
    case Schedule::Kind::none: return "none";
    case Schedule::Kind::sudden: return "sudden";
    case Schedule::Kind::sigmoid: return "sigmoid";
    }
    return "none";
}

/// Where each stream element was drawn from.
struct StreamDraw {
    bool from_excluded = false;
    std::size_t index = 0;
};

/// Uniform draws with replacement. Sudden: retained pool before onset, excluded
/// pool from onset on. Sigmoid: excluded pool with probability
/// sigmoid_mixture(t, onset) at every t.
inline std::vector<StreamDraw> draw_stream(std::size_t retained_size, std::size_t excluded_size,
                                           const Schedule& schedule, std::uint64_t seed) {
    schedule.validate();
    if (retained_size == 0 && (!schedule.shifts() || schedule.onset > 1 || schedule.kind == Schedule::Kind::sigmoid))
        throw InvalidInput("build_stream: empty retained pool");
    if (excluded_size == 0 && schedule.shifts()) throw InvalidInput("build_stream: empty excluded pool with a shift");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };

    std::vector<StreamDraw> out;
    out.reserve(static_cast<std::size_t>(schedule.horizon));
    for (std::int64_t t = 1; t <= schedule.horizon; ++t) {
        bool excluded = false;
        if (schedule.kind == Schedule::Kind::sudden) excluded = t >= schedule.onset;
        if (schedule.kind == Schedule::Kind::sigmoid) excluded = unif(rng) < sigmoid_mixture(t, schedule.onset);
        out.push_back({excluded, pick(excluded ? excluded_size : retained_size)});
    }
    return out;
}

inline std::vector<StreamEvent> build_stream(const Dataset& retained_test, const Dataset& excluded,
                                             const Schedule& schedule, std::uint64_t seed) {
    const auto draws = draw_stream(retained_test.size(), excluded.size(), schedule, seed);
    std::vector<StreamEvent> out;
    out.reserve(draws.size());
    std::int64_t t = 0;
    for (const auto& d : draws) {
        const auto& s = d.from_excluded ? excluded[d.index] : retained_test[d.index];
        out.push_back(StreamEvent{++t, s.features, s.true_error, s.est_score});
    }
    return out;
}

/// Recipe for a synthetic labeled source whose errors concentrate in
/// feature-defined subgroups.
///
/// Features are `informative_features` standard normal columns, then
/// `noise_features` irrelevant normal columns and, when `categories > 1`, one
/// categorical column with values 0..categories-1. Each row gets a risk
///   base_error * prod_j (f_j > tail_threshold ? tail_multipliers[j] : 1) * category_factors[c]
/// capped at 0.95.
///
/// With `failure_error == 0` the error is Beta with mean equal to the risk
/// and precision `concentration` (or `category_concentrations[c]` when that
/// entry exists). Otherwise errors are bimodal, like
/// |probability - label| of a classifier: with probability equal to the risk
/// the row is a failure with Beta error of mean `failure_error`, else a
/// success with Beta error of mean `success_error`.
///
/// With `classifier` set, the Beta machinery is bypassed: a label is drawn
/// y ~ Bernoulli(sigmoid(z)), z = intercept + sum_j coefficients[j] * f_j, a
/// deliberately flawed model predicts sigmoid(model_scale * z + model_bias +
/// flaw offsets), and the error is |prediction - y|.
struct ModelFlaw {
    std::size_t feature = 0;
    double threshold = 0.0;
    double offset = 0.0; // added to the model's logit where f > threshold
};

struct ClassifierSpec {
    double intercept = 0.0;
    std::vector<double> coefficients; // one per informative feature, missing => 0
    double model_scale = 1.0;
    double model_bias = 0.0;
    std::vector<ModelFlaw> flaws;
};

struct SyntheticSpec {
    std::size_t n = 20000;
    std::size_t informative_features = 3;
    std::size_t noise_features = 2;
    std::size_t categories = 4;
    double tail_threshold = 0.5;
    double base_error = 0.1;
    std::vector<double> tail_multipliers{3.0, 2.0, 1.5};
    std::vector<double> category_factors{1.0, 1.0, 1.5, 0.8};
    std::vector<double> category_concentrations{}; // per-category Beta precision
    double concentration = 4.0;
    double failure_error = 0.0;
    double success_error = 0.05;
    std::optional<ClassifierSpec> classifier;
    bool perfect_scores = false; // attach est_score := true_error

    /// One informative feature whose upper tail has `multiplier` times the
    /// mean error of everything else; no other structure.
    static SyntheticSpec subgroup_failure(double multiplier = 3.0) {
        SyntheticSpec s;
        s.informative_features = 1;
        s.tail_multipliers = {multiplier};
        s.categories = 1;
        return s;
    }

    std::size_t dimension() const noexcept {
        return informative_features + noise_features + (categories > 1 ? 1 : 0);
    }

    std::vector<FeatureKind> feature_kinds() const {
        std::vector<FeatureKind> k(informative_features + noise_features, FeatureKind::continuous);
        if (categories > 1) k.push_back(FeatureKind::categorical);
        return k;
    }

    double risk(std::span<const double> x) const {
        double m = base_error;
        for (std::size_t j = 0; j < informative_features && j < tail_multipliers.size(); ++j)
            if (x[j] > tail_threshold) m *= tail_multipliers[j];
        if (categories > 1) {
            const auto c = static_cast<std::size_t>(x[informative_features + noise_features]);
            if (c < category_factors.size()) m *= category_factors[c];
        }
        return std::clamp(m, 0.01, 0.95);
    }

    double concentration_at(std::span<const double> x) const {
        if (categories > 1) {
            const auto c = static_cast<std::size_t>(x[informative_features + noise_features]);
            if (c < category_concentrations.size()) return category_concentrations[c];
        }
        return concentration;
    }
};

namespace detail {

inline double draw_beta(std::mt19937_64& rng, double mean, double concentration) {
    std::gamma_distribution<double> ga(mean * concentration, 1.0);
    std::gamma_distribution<double> gb((1.0 - mean) * concentration, 1.0);
    const double a = ga(rng), b = gb(rng);
    return a + b > 0.0 ? a / (a + b) : mean;
}

} // namespace detail

inline Dataset synthesize_source(const SyntheticSpec& spec, std::uint64_t seed) {
    if (spec.n == 0) throw InvalidInput("synthesize_source: n must be positive");
    if (!(spec.concentration > 0.0)) throw InvalidInput("synthesize_source: concentration must be positive");
    for (double c : spec.category_concentrations)
        if (!(c > 0.0)) throw InvalidInput("synthesize_source: category concentrations must be positive");
    if (spec.classifier)
        for (const auto& f : spec.classifier->flaws)
            if (f.feature >= spec.dimension()) throw InvalidInput("synthesize_source: flaw feature out of range");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> cat(0, spec.categories > 1 ? spec.categories - 1 : 0);
    Dataset out;
    for (std::size_t i = 0; i < spec.n; ++i) {
        ErrorSample s;
        for (std::size_t j = 0; j < spec.informative_features + spec.noise_features; ++j)
            s.features.push_back(normal(rng));
        if (spec.categories > 1) s.features.push_back(static_cast<double>(cat(rng)));
        const double r = spec.risk(s.features);
        if (spec.classifier) {
            const auto& c = *spec.classifier;
            double z = c.intercept;
            for (std::size_t j = 0; j < spec.informative_features && j < c.coefficients.size(); ++j)
                z += c.coefficients[j] * s.features[j];
            double logit = c.model_scale * z + c.model_bias;
            for (const auto& f : c.flaws)
                if (s.features[f.feature] > f.threshold) logit += f.offset;
            const double pred = 1.0 / (1.0 + std::exp(-logit));
            const bool y = unif(rng) < 1.0 / (1.0 + std::exp(-z));
            s.true_error = std::abs(pred - (y ? 1.0 : 0.0));
        } else if (spec.failure_error > 0.0) {
            const bool failure = unif(rng) < r;
            s.true_error = detail::draw_beta(rng, failure ? spec.failure_error : spec.success_error, spec.concentration);
        } else {
            s.true_error = detail::draw_beta(rng, r, spec.concentration_at(s.features));
        }
        if (spec.perfect_scores) s.est_score = s.true_error;
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace shiftmon
