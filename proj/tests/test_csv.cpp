#include <gtest/gtest.h>

#include <sstream>

#include "shiftmon/csv.hpp"

using namespace shiftmon;

TEST(CsvSchema, AnyColumnOrder) {
    const auto s = csv::Schema::parse("score,f1,error,f0");
    EXPECT_EQ(s.dimension, 2u);
    EXPECT_TRUE(s.has_error());
    EXPECT_TRUE(s.has_score());
    const auto r = csv::parse_row(s, "0.9, 2.0, 0.25, 1.0", 2);
    EXPECT_EQ(r.features, (std::vector<double>{1.0, 2.0}));
    EXPECT_EQ(*r.error, 0.25);
    EXPECT_EQ(*r.score, 0.9);
}

TEST(CsvSchema, RejectsBadHeaders) {
    EXPECT_THROW(csv::Schema::parse("f0,f2,error"), IngestError);
    EXPECT_THROW(csv::Schema::parse("f0,f0,error"), IngestError);
    EXPECT_THROW(csv::Schema::parse("f0,label"), IngestError);
    EXPECT_THROW(csv::Schema::parse("f0,error,error"), IngestError);
}

TEST(CsvRead, RejectsUnnormalizedErrors) {
    std::istringstream in("f0,error\n1,0.5\n2,1.7\n");
    EXPECT_THROW(csv::read_dataset(in), IngestError);
}

TEST(CsvRead, RejectsRaggedRowsAndGarbage) {
    std::istringstream a("f0,error\n1,0.5,3\n");
    EXPECT_THROW(csv::read_dataset(a), IngestError);
    std::istringstream b("f0,error\n1,abc\n");
    EXPECT_THROW(csv::read_dataset(b), IngestError);
    std::istringstream c("f0,error\n");
    EXPECT_THROW(csv::read_dataset(c), IngestError);
}

TEST(LoadScores, Examples) {
    std::istringstream one("score\n0.3\n");
    EXPECT_EQ(csv::load_scores(one), std::vector<double>{0.3});
    std::istringstream empty("score\n");
    EXPECT_THROW(csv::load_scores(empty), IngestError);
    std::istringstream no_col("f0\n1\n");
    EXPECT_THROW(csv::load_scores(no_col), IngestError);
}

TEST(LoadScores, RoundTripThreeRows) {
    Dataset d;
    d.push_back({{0.1}, 0.2, 0.7});
    d.push_back({{0.2}, 0.3, -1.25});
    d.push_back({{0.3}, 0.4, 1e-17});
    std::stringstream ss;
    csv::write_dataset(ss, d);
    EXPECT_EQ(csv::load_scores(ss), (std::vector<double>{0.7, -1.25, 1e-17}));
}

TEST(CsvWrite, DatasetRoundTripIsExact) {
    Dataset d;
    d.push_back({{0.1, 1.0 / 3.0}, 0.2, std::nullopt});
    d.push_back({{-2.5, 7.0}, 2.0 / 3.0, std::nullopt});
    std::stringstream ss;
    csv::write_dataset(ss, d);
    const auto back = csv::read_dataset(ss);
    ASSERT_EQ(back.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(back[i].features, d[i].features);
        EXPECT_EQ(back[i].true_error, d[i].true_error);
    }
}

TEST(CsvStream, ReadsIncrementally) {
    std::istringstream in("f0,score\n\n1,0.5\n2,0.6\n");
    csv::StreamReader r(in);
    EXPECT_FALSE(r.schema().has_error());
    auto a = r.next();
    ASSERT_TRUE(a);
    EXPECT_EQ(*a->score, 0.5);
    ASSERT_TRUE(r.next());
    EXPECT_FALSE(r.next());
}
