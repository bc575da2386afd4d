#include <gtest/gtest.h>

#include <random>

#include "shiftmon/estimator.hpp"

using namespace shiftmon;

namespace {

Dataset gaussian_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u;
    Dataset out;
    for (std::size_t i = 0; i < n; ++i) {
        ErrorSample s;
        for (std::size_t j = 0; j < d; ++j) s.features.push_back(z(rng) * (j + 1));
        s.true_error = u(rng);
        out.push_back(s);
    }
    return out;
}

} // namespace

TEST(Knn, OneNeighbourReturnsOwnError) {
    const auto data = gaussian_rows(50, 3, 1);
    const auto m = fit_knn(data, 1);
    for (const auto& s : data) EXPECT_EQ(m.predict(s.features), s.true_error);
}

TEST(Knn, AllNeighboursGiveGlobalMean) {
    const auto data = gaussian_rows(40, 2, 2);
    const auto m = fit_knn(data, data.size());
    double mean = 0.0;
    for (const auto& s : data) mean += s.true_error;
    mean /= data.size();
    EXPECT_NEAR(m.predict(std::vector<double>{100.0, -3.0}), mean, 1e-12);
}

TEST(Knn, HandExample) {
    Dataset d;
    d.push_back({{0.0}, 0.0, std::nullopt});
    d.push_back({{1.0}, 0.5, std::nullopt});
    d.push_back({{2.0}, 1.0, std::nullopt});
    EXPECT_NEAR(fit_knn(d, 2).predict(std::vector<double>{0.9}), 0.25, 1e-12);
}

TEST(Knn, ConstantColumnAndBadInput) {
    Dataset d;
    d.push_back({{5.0, 0.0}, 0.1, std::nullopt});
    d.push_back({{5.0, 1.0}, 0.9, std::nullopt});
    const auto m = fit_knn(d, 1);
    EXPECT_EQ(m.feature_stds()[0], 1.0);
    EXPECT_EQ(m.predict(std::vector<double>{5.0, 0.9}), 0.9);
    EXPECT_THROW(m.predict(std::vector<double>{1.0}), InvalidInput);
    EXPECT_THROW(fit_knn(d, 3), InvalidInput);
    EXPECT_THROW(fit_knn(d, 0), InvalidInput);
    EXPECT_THROW(fit_knn(Dataset{}, 1), InvalidInput);
}

TEST(Knn, FeaturePermutationInvariance) {
    const auto data = gaussian_rows(200, 4, 3);
    const std::vector<std::size_t> perm{2, 0, 3, 1};
    Dataset permuted;
    for (const auto& s : data) {
        ErrorSample p = s;
        for (std::size_t j = 0; j < 4; ++j) p.features[j] = s.features[perm[j]];
        permuted.push_back(p);
    }
    const auto a = fit_knn(data, 7), b = fit_knn(permuted, 7);
    const auto queries = gaussian_rows(30, 4, 4);
    for (const auto& q : queries) {
        std::vector<double> qp(4);
        for (std::size_t j = 0; j < 4; ++j) qp[j] = q.features[perm[j]];
        EXPECT_NEAR(a.predict(q.features), b.predict(qp), 1e-12);
    }
}

TEST(Knn, Deterministic) {
    const auto data = gaussian_rows(100, 3, 5);
    const auto q = gaussian_rows(10, 3, 6);
    EXPECT_EQ(fit_knn(data).predict_all(q), fit_knn(data).predict_all(q));
}

TEST(RSquared, Examples) {
    const std::vector<double> a{0.1, 0.4, 0.7, 0.2};
    EXPECT_EQ(r_squared(a, a), 1.0);
    const std::vector<double> mean(4, 0.35);
    EXPECT_NEAR(r_squared(mean, a), 0.0, 1e-12);
    EXPECT_NEAR(r_squared(std::vector<double>{0, 0, 1}, std::vector<double>{0, 1, 1}), -0.5, 1e-12);
    EXPECT_THROW(r_squared(std::vector<double>{0, 1}, std::vector<double>{0.5, 0.5}), Degenerate);
    EXPECT_THROW(r_squared(std::vector<double>{0}, std::vector<double>{0, 1}), InvalidInput);
}
