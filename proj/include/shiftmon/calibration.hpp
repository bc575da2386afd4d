#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "core.hpp"
#include "csv.hpp"

namespace shiftmon {

struct GridSpec {
    std::vector<double> p_values;
    std::vector<double> p_hat_values;
    double fdp_max = 0.2;

    /// p in {0.50, 0.55, ..., 0.95}, p_hat in {0.1, ..., 0.9}, FDP cap 0.2.
    static GridSpec defaults() {
        GridSpec g;
        for (int i = 0; i < 10; ++i) g.p_values.push_back((50.0 + 5.0 * i) / 100.0);
        for (int i = 1; i <= 9; ++i) g.p_hat_values.push_back(i / 10.0);
        g.fdp_max = 0.2;
        return g;
    }

    void validate() const {
        auto increasing = [](const std::vector<double>& v) {
            return !v.empty() && std::adjacent_find(v.begin(), v.end(), std::greater_equal<>()) == v.end();
        };
        if (!increasing(p_values)) throw InvalidInput("GridSpec: p_values must be nonempty and strictly increasing");
        if (!increasing(p_hat_values))
            throw InvalidInput("GridSpec: p_hat_values must be nonempty and strictly increasing");
        for (double p : p_values)
            if (!(p >= 0.5 && p < 1.0)) throw InvalidInput("GridSpec: p values must lie in [0.5,1)");
        for (double p : p_hat_values)
            if (!(p > 0.0 && p < 1.0)) throw InvalidInput("GridSpec: p_hat values must lie in (0,1)");
        if (!(fdp_max > 0.0 && fdp_max < 1.0)) throw InvalidInput("GridSpec: fdp_max must lie in (0,1)");
    }
};

struct SelectorMetrics {
    double power = 0.0;
    double fdp = 0.0;
    std::size_t positives = 0;       // #{E > q}
    std::size_t selected = 0;        // #{S = 1}
    std::size_t true_discoveries = 0;
    std::size_t false_discoveries = 0;

    // 0/0 conventions were used for power or FDP.
    bool degenerate() const noexcept { return positives == 0 || selected == 0; }
};

/// Counts over a set of (error, score) pairs. Power is 1 when nothing exceeds
/// q; FDP is 0 when nothing is selected.
inline SelectorMetrics selector_metrics(const Selector& sel, std::span<const double> errors,
                                        std::span<const double> scores) {
    if (errors.size() != scores.size()) throw InvalidInput("selector_metrics: length mismatch");
    SelectorMetrics m;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        const bool high = errors[i] > sel.q;
        const bool s = sel.selects(scores[i]);
        m.positives += high;
        m.selected += s;
        m.true_discoveries += s && high;
        m.false_discoveries += s && !high;
    }
    m.power = m.positives == 0 ? 1.0 : static_cast<double>(m.true_discoveries) / static_cast<double>(m.positives);
    m.fdp = m.selected == 0 ? 0.0 : static_cast<double>(m.false_discoveries) / static_cast<double>(m.selected);
    return m;
}

inline SelectorMetrics selector_metrics(const Selector& sel, const Dataset& data) {
    if (data.empty()) throw InvalidInput("selector_metrics: empty dataset");
    const auto e = data.errors();
    const auto s = data.scores();
    return selector_metrics(sel, e, s);
}

struct GridCell {
    double p = 0.0;
    double p_hat = 0.0;
    double q = 0.0;
    double q_hat = 0.0;
    double power = 0.0;
    double fdp = 0.0;
    bool degenerate = false;
    bool qualifying = false;

    Selector selector() const { return Selector{q, q_hat, p, p_hat}; }
};

struct CalibrationResult {
    Selector selector;
    double power = 0.0;
    double fdp = 0.0;
    std::vector<GridCell> grid_report;
};

class CalibrationInfeasible : public Error {
public:
    CalibrationInfeasible(GridCell best, std::vector<GridCell> report)
        : Error("calibration infeasible: lowest achievable FDP is " + std::to_string(best.fdp) + " at p=" +
                std::to_string(best.p) + ", p_hat=" + std::to_string(best.p_hat)),
          best_(best), report_(std::move(report)) {}

    const GridCell& best_cell() const noexcept { return best_; }
    const std::vector<GridCell>& grid_report() const noexcept { return report_; }

private:
    GridCell best_;
    std::vector<GridCell> report_;
};

namespace detail {

// Strict weak "is better than" among qualifying cells: power desc, FDP asc,
// p desc, p_hat asc.
inline bool better_cell(const GridCell& a, const GridCell& b) {
    if (a.power != b.power) return a.power > b.power;
    if (a.fdp != b.fdp) return a.fdp < b.fdp;
    if (a.p != b.p) return a.p > b.p;
    return a.p_hat < b.p_hat;
}

} // namespace detail

/// Grid search over quantile pairs: maximise selector power subject to
/// FDP < fdp_max. Cells that needed a 0/0 convention are reported but never chosen.
inline CalibrationResult calibrate(const GridSpec& grid, std::span<const double> errors,
                                   std::span<const double> scores) {
    grid.validate();
    if (errors.empty()) throw InvalidInput("calibrate: empty dataset");
    if (errors.size() != scores.size()) throw InvalidInput("calibrate: length mismatch");

    CalibrationResult result;
    result.grid_report.reserve(grid.p_values.size() * grid.p_hat_values.size());
    const GridCell* best = nullptr;
    for (double p : grid.p_values) {
        const double q = empirical_quantile(p, errors);
        for (double p_hat : grid.p_hat_values) {
            const double q_hat = empirical_quantile(p_hat, scores);
            const auto m = selector_metrics(Selector{q, q_hat, p, p_hat}, errors, scores);
            GridCell cell{p, p_hat, q, q_hat, m.power, m.fdp, m.degenerate(), false};
            cell.qualifying = !cell.degenerate && cell.fdp < grid.fdp_max;
            result.grid_report.push_back(cell);
        }
    }
    for (const auto& c : result.grid_report)
        if (c.qualifying && (!best || detail::better_cell(c, *best))) best = &c;

    if (!best) {
        const GridCell* lowest = nullptr;
        for (const auto& c : result.grid_report) {
            if (c.degenerate) continue;
            if (!lowest || c.fdp < lowest->fdp || (c.fdp == lowest->fdp && c.power > lowest->power)) lowest = &c;
        }
        GridCell carry = lowest ? *lowest : result.grid_report.front();
        throw CalibrationInfeasible(carry, std::move(result.grid_report));
    }
    result.selector = best->selector();
    result.power = best->power;
    result.fdp = best->fdp;
    return result;
}

inline CalibrationResult calibrate(const GridSpec& grid, const Dataset& data) {
    if (data.empty()) throw InvalidInput("calibrate: empty dataset");
    const auto e = data.errors();
    const auto s = data.scores();
    return calibrate(grid, e, s);
}

inline void write_grid_report(std::ostream& out, const std::vector<GridCell>& report) {
    using csv::format_double;
    out << "p,p_hat,q,q_hat,power,fdp,qualifying\n";
    for (const auto& c : report)
        out << format_double(c.p) << ',' << format_double(c.p_hat) << ',' << format_double(c.q) << ','
            << format_double(c.q_hat) << ',' << format_double(c.power) << ',' << format_double(c.fdp) << ','
            << (c.qualifying ? 1 : 0) << '\n';
}

} // namespace shiftmon
