#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "shiftmon/monitor.hpp"

using namespace shiftmon;

namespace {

SourceStats stats_with(double fd_rate, double fd_width, double u_q, double u_q2) {
    SourceStats s;
    s.n = 1000;
    s.rate_false_discovery = fd_rate;
    s.w_n_fd = fd_width;
    s.u_q = u_q;
    s.u_q2 = u_q2;
    return s;
}

std::vector<bool> bernoulli_flags(std::size_t n, double p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution b(p);
    std::vector<bool> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = b(rng);
    return out;
}

} // namespace

TEST(SourceStatistics, ToyExample) {
    const std::vector<double> e{0.1, 0.2, 0.3, 0.8, 0.9}, s{0.05, 0.5, 0.1, 0.6, 0.7};
    const auto st = source_statistics(e, s, Selector{0.3, 0.45, 0.5, 0.5}, MonitorConfig{});
    EXPECT_NEAR(st.rate_above_q, 0.4, 1e-15);
    EXPECT_NEAR(st.rate_true_discovery, 0.4, 1e-15);
    EXPECT_NEAR(st.rate_false_discovery, 0.2, 1e-15);
    EXPECT_NEAR(st.w_n, std::sqrt(std::log(40.0) / 10.0), 1e-15);
    EXPECT_NEAR(st.u_q, 1.0073, 1e-4);
    EXPECT_NEAR(st.u_q2, 1.0073, 1e-4);
    EXPECT_NEAR(st.w_n_fd, std::sqrt(std::log(2.0 / 0.025) / 10.0), 1e-15);
}

TEST(SourceStatistics, PerfectEstimatorAndEmptySelection) {
    const std::vector<double> e{0.1, 0.4, 0.2, 0.9, 0.6, 0.3};
    const auto st = source_statistics(e, e, Selector{0.3, 0.3, 0.5, 0.5}, MonitorConfig{});
    EXPECT_EQ(st.rate_false_discovery, 0.0);
    EXPECT_EQ(st.u_q2, st.u_q);
    const auto none = source_statistics(e, e, Selector{0.3, 5.0, 0.5, 0.5}, MonitorConfig{});
    EXPECT_EQ(none.rate_false_discovery, 0.0);
    EXPECT_EQ(none.rate_true_discovery, 0.0);
    const auto oracle = oracle_source_statistics(e, 0.3, MonitorConfig{});
    EXPECT_EQ(oracle.u_q, st.u_q);
    EXPECT_EQ(oracle.w_n_fd, st.w_n_fd);
}

TEST(QuantileMonitor, ComponentArithmetic) {
    // lower bound minus (fd rate + fd width) minus delta
    const auto st = stats_with(0.05, 0.05, 0.9, 0.9);
    QuantileMonitor m(Selector{0.5, 0.5}, st, MonitorConfig{});
    for (int t = 1; t <= 3000; ++t) {
        m.observe_flag(t, true);
        EXPECT_NEAR(m.lower_raw(), m.selection_cs().lower() - 0.10, 1e-15);
    }
    // the same formula on the stated numbers
    EXPECT_NEAR(0.75 - (0.05 + 0.05) - 0.0, 0.65, 1e-15);
}

TEST(QuantileMonitor, AlarmIsDirectComparison) {
    const auto st = stats_with(0.0, 0.0, 0.45, 0.30);
    QuantileMonitor m(Selector{0.5, 0.5}, st, MonitorConfig{});
    bool seen_q2 = false, seen_q = false;
    for (int t = 1; t <= 5000; ++t) {
        const auto d = m.observe_flag(t, t % 5 != 0); // rate 0.8
        if (!seen_q2) { EXPECT_EQ(d.phi_q2, m.lower() > 0.30); }
        if (!seen_q) { EXPECT_EQ(d.phi_q, m.lower() > 0.45); }
        seen_q2 = seen_q2 || d.phi_q2;
        seen_q = seen_q || d.phi_q;
        if (m.lower() > 0.40 && m.lower() <= 0.45) {
            EXPECT_TRUE(d.phi_q2);
            EXPECT_FALSE(d.phi_q);
        }
    }
    EXPECT_TRUE(seen_q2);
    EXPECT_TRUE(seen_q);
    EXPECT_LE(*m.phi_q2_time(), *m.phi_q_time());
}

TEST(QuantileMonitor, LatchesAfterFiring) {
    const auto st = stats_with(0.0, 0.0, 0.2, 0.2);
    QuantileMonitor m(Selector{0.5, 0.5}, st, MonitorConfig{});
    std::int64_t t = 0;
    while (!m.phi_q2()) m.observe_flag(++t, true);
    const auto fired = m.phi_q2_time();
    for (int i = 0; i < 2000; ++i) {
        const auto d = m.observe_flag(++t, false);
        EXPECT_TRUE(d.phi_q2);
        EXPECT_FALSE(d.raised_now && d.phi_q2 && m.phi_q2_time() != fired);
    }
    EXPECT_EQ(m.phi_q2_time(), fired);
    for (const auto& p : m.trajectory())
        if (p.t >= *fired) { EXPECT_TRUE(p.phi_q2); }
}

TEST(QuantileMonitor, RejectsOutOfOrderTime) {
    QuantileMonitor m(Selector{0.5, 0.5}, stats_with(0, 0, 0.5, 0.5), MonitorConfig{});
    m.observe_flag(3, true);
    EXPECT_THROW(m.observe_flag(3, true), InvalidInput);
    EXPECT_THROW(m.observe(StreamEvent{2, {}, {}, {}}, 1.0), InvalidInput);
}

TEST(QuantileMonitorProperty, DominanceOnRandomStreams) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u;
        const double above = 0.1 + 0.3 * u(rng), td = above * u(rng);
        SourceStats st = make_source_stats(2000, static_cast<std::int64_t>(above * 2000),
                                           static_cast<std::int64_t>(td * 2000), 40, MonitorConfig{});
        EXPECT_LE(st.u_q2, st.u_q);
        QuantileMonitor m(Selector{0.5, 0.5}, st, MonitorConfig{});
        const auto flags = bernoulli_flags(4000, 0.2 + 0.6 * u(rng), seed + 100);
        for (std::size_t i = 0; i < flags.size(); ++i) m.observe_flag(static_cast<std::int64_t>(i + 1), flags[i]);
        if (m.phi_q()) {
            ASSERT_TRUE(m.phi_q2());
            EXPECT_LE(*m.phi_q2_time(), *m.phi_q_time());
        }
    }
}

TEST(QuantileMonitorProperty, DeltaCorrectionIsExactOffset) {
    const auto st = stats_with(0.1, 0.03, 0.9, 0.9);
    MonitorConfig plain, corrected;
    corrected.delta_corr = 0.013;
    QuantileMonitor a(Selector{0.5, 0.5}, st, plain), b(Selector{0.5, 0.5}, st, corrected);
    const auto flags = bernoulli_flags(3000, 0.5, 9);
    for (std::size_t i = 0; i < flags.size(); ++i) {
        a.observe_flag(static_cast<std::int64_t>(i + 1), flags[i]);
        b.observe_flag(static_cast<std::int64_t>(i + 1), flags[i]);
        EXPECT_NEAR(a.lower_raw() - b.lower_raw(), 0.013, 1e-12);
    }
}

TEST(QuantileMonitorProperty, MonotoneScoreTransform) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u;
    const auto st = stats_with(0.02, 0.03, 0.3, 0.25);
    const Selector sel{0.5, 0.6};
    const Selector sel_g{0.5, std::atan(0.6 * 5)};
    QuantileMonitor a(sel, st, MonitorConfig{}), b(sel_g, st, MonitorConfig{});
    for (int t = 1; t <= 3000; ++t) {
        const double s = u(rng) * 1.2 - 0.1;
        a.observe(StreamEvent{t, {}, {}, {}}, s);
        b.observe(StreamEvent{t, {}, {}, {}}, std::atan(s * 5));
        ASSERT_EQ(a.lower(), b.lower());
    }
    EXPECT_EQ(a.phi_q2_time(), b.phi_q2_time());
}

TEST(MeanMonitor, ConstantStreamAtSourceMeanNeverAlarms) {
    auto m = MeanMonitor(0.3, 500, MonitorConfig{});
    for (int i = 0; i < 10000; ++i) EXPECT_FALSE(m.observe(0.3));
    EXPECT_LT(m.lower(), m.source_upper());
}

TEST(MeanMonitor, AllOnesAlarmsInFiniteTime) {
    auto m = MeanMonitor(0.1, 100000, MonitorConfig{});
    int t = 0;
    while (!m.alarm() && t < 100000) m.observe(1.0), ++t;
    ASSERT_TRUE(m.alarm_time().has_value());
    EXPECT_LT(*m.alarm_time(), 100);
}

TEST(MeanMonitor, ToleranceOneNeverAlarms) {
    MonitorConfig cfg;
    cfg.eps_tol = 1.0;
    auto m = MeanMonitor(0.0, 100000, cfg);
    for (int i = 0; i < 5000; ++i) EXPECT_FALSE(m.observe(1.0));
}

TEST(MeanMonitor, ScoresClippedAndCounted) {
    auto m = MeanMonitor(0.2, 1000, MonitorConfig{}, true);
    m.observe_score(-0.5);
    m.observe_score(1.5);
    m.observe_score(0.5);
    EXPECT_EQ(m.clipped(), 2);
    EXPECT_THROW(m.observe(1.5), InvalidInput);
    EXPECT_EQ(m.lower_trajectory().size(), 3u);
}

TEST(DeltaDiagnostic, Examples) {
    const std::vector<double> e{0.1, 0.2, 0.3, 0.8, 0.9}, s{0.05, 0.5, 0.1, 0.6, 0.7};
    const Selector sel{0.3, 0.45, 0.5, 0.5};
    const auto st = source_statistics(e, s, sel, MonitorConfig{});
    EXPECT_EQ(delta_diagnostic(e, s, sel, st), 0.0);
    // append only E > q rows: false discoveries can only be diluted
    auto e2 = e, s2 = s;
    for (int i = 0; i < 5; ++i) e2.push_back(0.95), s2.push_back(i % 2 ? 0.9 : 0.0);
    EXPECT_LE(delta_diagnostic(e2, s2, sel, st), 0.0);
    EXPECT_NEAR(delta_diagnostic(e2, s2, sel, st), 1.0 / 10.0 - 1.0 / 5.0, 1e-15);
}

TEST(Trajectory, CsvColumns) {
    QuantileMonitor m(Selector{0.5, 0.5}, stats_with(0, 0, 0.5, 0.4), MonitorConfig{});
    m.observe_flag(1, true);
    std::ostringstream out;
    write_trajectory_csv(out, m.trajectory());
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "t,selection_rate,L_q,U_q,U_q2,phi_q,phi_q2");
    EXPECT_EQ(out.str().substr(out.str().find('\n') + 1), "1,1,0,0.5,0.4,0,0\n");
}
