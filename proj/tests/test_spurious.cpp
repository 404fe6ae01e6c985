#include "mlaudit/spurious.hpp"

#include <gtest/gtest.h>

#include "mlaudit/rng.hpp"

using namespace mlaudit;

namespace {

// 4 groups x n values per concept from a common base, one (concept, group)
// cell shifted by delta.
GroupedScores planted_table(double base_mean, double delta,
                            const std::string& hot_concept,
                            const std::string& hot_group, std::uint64_t seed,
                            int n_concepts = 10, int n = 200) {
    Rng rng(seed);
    GroupedScores t;
    const std::vector<std::string> groups{"Asian Male", "Asian Female",
                                          "Black Male", "Black Female"};
    for (int c = 0; c < n_concepts; ++c) {
        const std::string concept_name = "concept" + std::to_string(c);
        for (const auto& g : groups) {
            double mean = base_mean;
            if (concept_name == hot_concept && g == hot_group) mean += delta;
            auto& cell = t[concept_name][g];
            for (int i = 0; i < n; ++i)
                cell.push_back(rng.next_truncated_normal(mean, 0.05, 0.0, 1.0));
        }
    }
    return t;
}

}  // namespace

TEST(MineSpurious, FindsPlantedShiftOnly) {
    auto table = planted_table(0.05, 0.3, "concept3", "Black Male", 11);
    auto findings = mine_spurious(table, 0.15, 0.05);
    ASSERT_EQ(findings.size(), 1u);
    EXPECT_EQ(findings[0].concept_name, "concept3");
    EXPECT_EQ(findings[0].top_group, "Black Male");
    EXPECT_TRUE(findings[0].reject);
    EXPECT_GT(findings[0].top_mean, 0.15);
}

TEST(MineSpurious, AllBelowThresholdIsEmpty) {
    auto table = planted_table(0.05, 0.0, "", "", 13);
    EXPECT_TRUE(mine_spurious(table, 0.15, 0.05).empty());
}

TEST(MineSpurious, TopMeanDominatesOtherGroups) {
    auto table = planted_table(0.3, 0.2, "concept1", "Asian Female", 17);
    auto findings = mine_spurious(table, 0.15, 0.05);
    for (const auto& f : findings) {
        const auto& groups = table.at(f.concept_name);
        for (const auto& [g, values] : groups) {
            double m = 0.0;
            for (double v : values) m += v;
            m /= double(values.size());
            EXPECT_GE(f.top_mean, m - 1e-12);
        }
    }
}

TEST(MineSpurious, SortedByGroupThenConcept) {
    auto table = planted_table(0.3, 0.0, "", "", 19, 6, 50);
    auto findings = mine_spurious(table, 0.15, 0.05);
    ASSERT_EQ(findings.size(), 6u);  // all concepts cross a 0.15 threshold
    for (std::size_t i = 1; i < findings.size(); ++i) {
        const auto& a = findings[i - 1];
        const auto& b = findings[i];
        EXPECT_TRUE(a.top_group < b.top_group ||
                    (a.top_group == b.top_group && a.concept_name < b.concept_name));
    }
}

TEST(MineSpurious, NullDataControlsFalseFindings) {
    // 20 null seeds at alpha 0.05 with per-suite Bonferroni: expect ~1
    // seed with any rejection; allow up to 4 to keep flake risk negligible.
    int seeds_with_finding = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto table = planted_table(0.3, 0.0, "", "", 1000 + seed, 10, 100);
        auto findings = mine_spurious(table, 0.15, 0.05);
        for (const auto& f : findings)
            if (f.reject) {
                ++seeds_with_finding;
                break;
            }
    }
    EXPECT_LE(seeds_with_finding, 4);
}

TEST(ConceptValidation, MeansAndGap) {
    auto v = concept_validation({0.8, 0.6}, {0.1, 0.1});
    EXPECT_DOUBLE_EQ(v.mean_matched, 0.7);
    EXPECT_DOUBLE_EQ(v.mean_unmatched, 0.1);
    EXPECT_DOUBLE_EQ(v.gap, 0.6);

    auto same = concept_validation({0.4, 0.2}, {0.4, 0.2});
    EXPECT_DOUBLE_EQ(same.gap, 0.0);

    EXPECT_THROW(concept_validation({}, {0.1}), error);
    EXPECT_THROW(concept_validation({0.1}, {}), error);
}

TEST(ConceptValidation, RecoversPlantedShift) {
    Rng rng(23);
    std::vector<double> matched, unmatched;
    for (int i = 0; i < 4000; ++i) {
        matched.push_back(rng.next_truncated_normal(0.55, 0.05, 0.0, 1.0));
        unmatched.push_back(rng.next_truncated_normal(0.15, 0.05, 0.0, 1.0));
    }
    auto v = concept_validation(matched, unmatched);
    EXPECT_NEAR(v.gap, 0.4, 0.01);
}
