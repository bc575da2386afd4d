#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "shiftmon/config.hpp"

using namespace shiftmon;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& body) {
    auto dir = std::filesystem::temp_directory_path() / "shiftmon_config_test";
    std::filesystem::create_directories(dir);
    auto p = dir / name;
    std::ofstream(p) << body;
    return p;
}

std::string error_key(const std::string& path, std::vector<std::pair<std::string, std::string>> overrides = {}) {
    try {
        parse_config(path, overrides);
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "";
}

} // namespace

TEST(Config, Defaults) {
    const auto cfg = parse_config("", {});
    EXPECT_DOUBLE_EQ(cfg.monitor.alpha_source, 0.05);
    EXPECT_DOUBLE_EQ(cfg.monitor.alpha_prod, 0.05);
    EXPECT_DOUBLE_EQ(cfg.monitor.eps_tol, 0.0);
    EXPECT_DOUBLE_EQ(cfg.grid.fdp_max, 0.2);
    EXPECT_EQ(cfg.grid.p_values.size(), 10u);
    EXPECT_EQ(cfg.grid.p_hat_values.size(), 9u);
    EXPECT_EQ(cfg.k, 10u);
    EXPECT_EQ(cfg.detector(), Detector::phi_q2);
}

TEST(Config, FileParsing) {
    const auto p = temp_file("a.cfg", "# comment\nalpha_prod = 0.1\n\nk=7   # trailing\nschedule = sigmoid\np_values = 0.6, 0.7\n");
    const auto cfg = parse_config(p.string(), {});
    EXPECT_DOUBLE_EQ(cfg.monitor.alpha_prod, 0.1);
    EXPECT_EQ(cfg.k, 7u);
    EXPECT_EQ(cfg.schedule, "sigmoid");
    EXPECT_EQ(cfg.grid.p_values, (std::vector<double>{0.6, 0.7}));
}

TEST(Config, OverridesWinOverFile) {
    const auto p = temp_file("b.cfg", "eps_tol = 0\nseed = 3\n");
    const auto cfg = parse_config(p.string(), {{"eps_tol", "0.05"}});
    EXPECT_DOUBLE_EQ(cfg.monitor.eps_tol, 0.05);
    EXPECT_EQ(cfg.seed, 3u);
}

TEST(Config, OutOfRangeNamesKey) {
    EXPECT_EQ(error_key("", {{"alpha_prod", "1.5"}}), "alpha_prod");
    EXPECT_EQ(error_key("", {{"alpha_source", "0"}}), "alpha_source");
    EXPECT_EQ(error_key("", {{"fdp_max", "1"}}), "fdp_max");
    EXPECT_EQ(error_key("", {{"eps_tol", "-0.1"}}), "eps_tol");
    EXPECT_EQ(error_key("", {{"k", "0"}}), "k");
    EXPECT_EQ(error_key("", {{"horizon", "100"}, {"onset", "101"}}), "onset");
    EXPECT_EQ(error_key("", {{"p_values", "0.7, 0.6"}}), "p_values");
}

TEST(Config, MalformedValuesNameKey) {
    EXPECT_EQ(error_key("", {{"alpha_prod", "abc"}}), "alpha_prod");
    EXPECT_EQ(error_key("", {{"k", "-2"}}), "k");
    EXPECT_EQ(error_key("", {{"write_paths", "maybe"}}), "write_paths");
    EXPECT_EQ(error_key("", {{"schedule", "linear"}}), "schedule");
    EXPECT_EQ(error_key("", {{"categorical", "1.5"}}), "categorical");
}

TEST(Config, UnknownKeyAndBadLines) {
    EXPECT_EQ(error_key("", {{"alpha", "0.1"}}), "alpha");
    const auto p = temp_file("c.cfg", "alpha_prod = 0.1\nnot a pair\n");
    EXPECT_EQ(error_key(p.string()), "line 2");
}

TEST(Config, MissingFiles) {
    EXPECT_EQ(error_key("/nonexistent/shiftmon.cfg"), "config");
    EXPECT_EQ(error_key("", {{"source", "/nonexistent/source.csv"}}), "source");
    EXPECT_EQ(error_key("", {{"production", "-"}}), "");
}

TEST(Config, EveryKeyHasAFlagForm) {
    const auto keys = config_keys();
    EXPECT_GT(keys.size(), 30u);
    for (const auto& k : keys) {
        EXPECT_EQ(k.find(' '), std::string::npos) << k;
        EXPECT_EQ(k.find('-'), std::string::npos) << k;
    }
}

TEST(Config, ClassifierWorldKeys) {
    const auto cfg = parse_config("", {{"synthetic_coefficients", "1.2, 0.8"},
                                       {"synthetic_flaws", "0, 1.0, -2.5, 3, 0, 0.5"},
                                       {"synthetic_model_scale", "0.7"}});
    ASSERT_TRUE(cfg.synthetic.classifier.has_value());
    EXPECT_EQ(cfg.synthetic.classifier->coefficients, (std::vector<double>{1.2, 0.8}));
    ASSERT_EQ(cfg.synthetic.classifier->flaws.size(), 2u);
    EXPECT_EQ(cfg.synthetic.classifier->flaws[1].feature, 3u);
    EXPECT_DOUBLE_EQ(cfg.synthetic.classifier->flaws[0].offset, -2.5);
    EXPECT_DOUBLE_EQ(cfg.synthetic.classifier->model_scale, 0.7);
    EXPECT_FALSE(parse_config("", {{"synthetic_model", "beta"}}).synthetic.classifier.has_value());
    EXPECT_EQ(error_key("", {{"synthetic_flaws", "0, 1.0"}}), "synthetic_flaws");
    EXPECT_EQ(error_key("", {{"synthetic_flaws", "40, 1.0, 1.0"}}), "synthetic_flaws");
}

TEST(Config, CategoryConcentrations) {
    const auto cfg = parse_config("", {{"synthetic_category_concentrations", "20, 0.4"}});
    EXPECT_EQ(cfg.synthetic.category_concentrations, (std::vector<double>{20.0, 0.4}));
    EXPECT_EQ(error_key("", {{"synthetic_category_concentrations", "1, -2"}}), "synthetic_category_concentrations");
}
