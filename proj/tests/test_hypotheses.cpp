#include "mlaudit/hypotheses.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "mlaudit/rng.hpp"
#include "mlaudit/suite.hpp"
#include "mlaudit/synth.hpp"

using namespace mlaudit;

namespace {

// In-memory dataset builder for hypothesis fixtures.
struct Builder {
    std::vector<std::string> samples{"sample_id,sex,ethnicity,age_bin,variant,annotations"};
    std::vector<std::string> scores{
        "sample_id,concept,score,face_count,predicted_age,predicted_sex_score"};
    int next_id = 0;

    std::string add_sample(const std::string& sex, const std::string& eth,
                           const std::string& bin,
                           const std::string& annotations = "") {
        std::string id = "s" + std::to_string(next_id++);
        samples.push_back(id + "," + sex + "," + eth + "," + bin + ",," + annotations);
        return id;
    }

    void add_score(const std::string& id, const std::string& concept_name,
                   double score, const std::string& face = "",
                   const std::string& age = "", const std::string& sexscore = "") {
        scores.push_back(id + "," + concept_name + "," + format_real(score) + "," +
                         face + "," + age + "," + sexscore);
    }

    ScoreDataset build() const {
        std::string s1, s2;
        for (const auto& l : samples) s1 += l + "\n";
        for (const auto& l : scores) s2 += l + "\n";
        std::stringstream a(s1), b(s2);
        return load_dataset(a, b);
    }
};

HypothesisSpec kruskal_spec(const std::string& id, const std::string& value,
                            const std::string& group,
                            std::optional<std::string> stratify = {}) {
    HypothesisSpec h;
    h.id = id;
    h.value_field = value;
    h.group_field = group;
    h.stratify_by = stratify;
    return h;
}

}  // namespace

// A fixture where every age bin gets literally identical sex-score values:
// the omnibus test must not reject anywhere.
TEST(RunHypothesis, NullFixtureNeverRejects) {
    Builder b;
    const std::vector<double> shared{0.1, 0.3, 0.5, 0.7, 0.9};
    for (const char* bin : {"0-2", "10-19", "30-39"}) {
        for (const char* sex : {"Male", "Female"}) {
            for (double v : shared) {
                auto id = b.add_sample(sex, "Asian", bin);
                b.add_score(id, "face", 0.5, "", "", format_real(v));
            }
        }
    }
    auto ds = b.build();
    auto outcomes = run_hypothesis(ds, kruskal_spec("nh1", "predicted_sex_score",
                                                    "age_bin", "sex"), 1);
    ASSERT_EQ(outcomes.size(), 2u);  // one stratum per sex
    for (const auto& o : outcomes) {
        ASSERT_TRUE(o.test.has_value());
        EXPECT_GE(o.test->p_value, 0.999999);
        EXPECT_FALSE(o.test->reject);
    }
}

// Mixed fixture: young strata get a planted group difference, the two old
// strata are drawn from one distribution and must not reject.
TEST(RunHypothesis, NullStrataDoNotRejectWhilePlantedOnesDo) {
    Builder b;
    Rng rng(404);
    const std::vector<std::string> eths{"Asian", "Black", "White"};
    for (const char* bin : {"10-19", "60-69", "70-100"}) {
        const bool planted = std::string(bin) == "10-19";
        for (std::size_t e = 0; e < eths.size(); ++e) {
            for (int i = 0; i < 60; ++i) {
                auto id = b.add_sample("Male", eths[e], bin);
                const double base = 40.0 + 8.0 * rng.next_normal();
                const double shift = planted ? 12.0 * double(e) : 0.0;
                b.add_score(id, "face", 0.5, "", format_real(base + shift), "");
            }
        }
    }
    auto ds = b.build();
    auto outcomes = run_hypothesis(
        ds, kruskal_spec("nh4", "predicted_age", "ethnicity", "age_bin"), 3);
    ASSERT_EQ(outcomes.size(), 3u);
    std::map<std::string, bool> reject_of;
    for (const auto& o : outcomes) {
        ASSERT_TRUE(o.test.has_value()) << o.stratum;
        reject_of[o.stratum] = o.test->reject;
    }
    EXPECT_TRUE(reject_of.at("10-19"));
    EXPECT_FALSE(reject_of.at("60-69"));
    EXPECT_FALSE(reject_of.at("70-100"));
}

TEST(RunHypothesis, EightGroupFamilyGivesCorrectedAlpha) {
    DisparityPlan plan;
    plan.seed = 62;
    plan.concepts = {"beard", "jewelry"};
    plan.n_per_group = 30;
    auto synth = generate_scores(plan);
    std::stringstream s1(synth.samples_csv), s2(synth.scores_csv);
    auto ds = load_dataset(s1, s2);

    auto spec = kruskal_spec("nh7", "concept:*", "demographic", "concept");
    auto outcomes = run_hypothesis(ds, spec, 8);
    ASSERT_EQ(outcomes.size(), 2u);
    for (const auto& o : outcomes) {
        ASSERT_TRUE(o.test.has_value());
        EXPECT_DOUBLE_EQ(o.test->alpha_corrected, 0.00625);
        EXPECT_EQ(o.group_labels.size(), 8u);
        // demographic ordering: ethnicity ascending, Male before Female
        EXPECT_EQ(o.group_labels[0], "Asian Male");
        EXPECT_EQ(o.group_labels[1], "Asian Female");
        EXPECT_EQ(o.group_labels.back(), "White Female");
    }
}

TEST(RunHypothesis, IdenticalGroupMultisetsNeverReject) {
    Builder b;
    const std::vector<double> shared{0.2, 0.4, 0.6};
    for (const char* eth : {"Asian", "Black"})
        for (double v : shared) {
            auto id = b.add_sample("Male", eth, "20-29");
            b.add_score(id, "beard", v);
        }
    auto ds = b.build();
    auto outcomes =
        run_hypothesis(ds, kruskal_spec("x", "concept:beard", "ethnicity"), 1);
    ASSERT_EQ(outcomes.size(), 1u);
    EXPECT_FALSE(outcomes[0].test->reject);
    EXPECT_DOUBLE_EQ(outcomes[0].test->p_value, 1.0);
}

TEST(RunHypothesis, SkipsUntestableStrata) {
    Builder b;
    auto id = b.add_sample("Male", "Asian", "20-29");
    b.add_score(id, "face", 0.5, "", "", "0.7");
    auto ds = b.build();
    auto outcomes = run_hypothesis(
        ds, kruskal_spec("nh2", "predicted_sex_score", "ethnicity", "sex"), 1);
    ASSERT_EQ(outcomes.size(), 1u);
    EXPECT_FALSE(outcomes[0].test.has_value());
    EXPECT_EQ(outcomes[0].skip_reason, "fewer_than_two_groups");
}

TEST(RunHypothesis, SexAccuracyModeThresholdsAtHalf) {
    Builder b;
    // Males scored 0.9 (correct), females 0.8 (incorrect): accuracy
    // separates perfectly by sex.
    for (int i = 0; i < 20; ++i) {
        auto m = b.add_sample("Male", "Asian", "20-29");
        b.add_score(m, "face", 0.5, "", "", "0.9");
        auto f = b.add_sample("Female", "Asian", "20-29");
        b.add_score(f, "face", 0.5, "", "", "0.8");
    }
    auto ds = b.build();
    auto outcomes =
        run_hypothesis(ds, kruskal_spec("acc", "sex_accuracy", "sex"), 1);
    ASSERT_EQ(outcomes.size(), 1u);
    ASSERT_TRUE(outcomes[0].test.has_value());
    EXPECT_TRUE(outcomes[0].test->reject);
}

TEST(MedianInBin, ExamplesFromContract) {
    Builder b;
    for (double v : {12.0, 13.0, 14.0}) {
        auto id = b.add_sample("Male", "Asian", "0-2");
        b.add_score(id, "face", 0.5, "", format_real(v), "");
    }
    for (int i = 0; i < 4; ++i) {
        auto id = b.add_sample("Male", "Asian", "30-39");
        b.add_score(id, "face", 0.5, "", "35", "");
    }
    auto ds = b.build();
    auto rows = median_in_bin(ds);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].age_bin, "0-2");
    EXPECT_DOUBLE_EQ(rows[0].median, 13.0);
    EXPECT_FALSE(rows[0].median_in_bin);
    EXPECT_DOUBLE_EQ(rows[0].fraction_in_bin, 0.0);
    EXPECT_EQ(rows[1].age_bin, "30-39");
    EXPECT_DOUBLE_EQ(rows[1].median, 35.0);
    EXPECT_TRUE(rows[1].median_in_bin);
    EXPECT_DOUBLE_EQ(rows[1].fraction_in_bin, 1.0);
}

TEST(MedianInBin, UniformPredictionsGiveWidthFractions) {
    Builder b;
    Rng rng(7);
    for (int i = 0; i < 4000; ++i) {
        auto id = b.add_sample("Male", "Asian", "30-39");
        b.add_score(id, "face", 0.5, "", format_real(rng.next_unit() * 100.0), "");
    }
    auto ds = b.build();
    auto rows = median_in_bin(ds);
    ASSERT_EQ(rows.size(), 1u);
    // bin [30, 39] width 9 over [0, 100): expect roughly 0.09
    EXPECT_NEAR(rows[0].fraction_in_bin, 0.09, 0.02);
}

TEST(MedianInBin, MissingPredictionsIsError) {
    Builder b;
    auto id = b.add_sample("Male", "Asian", "20-29");
    b.add_score(id, "face", 0.5);
    auto ds = b.build();
    EXPECT_THROW(median_in_bin(ds), error);
}

TEST(TopK, HighestFirstAndCatalogTieBreak) {
    std::stringstream cat_in("alpha\nbeta\ngamma\ndelta\n");
    auto cat = load_catalog(cat_in);
    std::vector<ScoreRow> rows(4);
    rows[0].concept_name = "delta";
    rows[0].score = 0.5;
    rows[1].concept_name = "alpha";
    rows[1].score = 0.9;
    rows[2].concept_name = "gamma";
    rows[2].score = 0.5;
    rows[3].concept_name = "beta";
    rows[3].score = 0.1;

    auto top = top_k(rows, cat, 3);
    ASSERT_EQ(top.size(), 3u);
    EXPECT_EQ(top[0], "alpha");
    EXPECT_EQ(top[1], "gamma");  // ties at 0.5 resolve by catalog order
    EXPECT_EQ(top[2], "delta");

    auto all = top_k(rows, cat, 99);
    EXPECT_EQ(all.size(), 4u);
    EXPECT_THROW(top_k(rows, cat, 0), error);
}

TEST(TopK, IndexScoredFixtureSelectsTail) {
    std::stringstream cat_in;
    for (int i = 0; i < 512; ++i) cat_in << "c" << i << "\n";
    auto cat = load_catalog(cat_in);
    std::vector<ScoreRow> rows(512);
    for (int i = 0; i < 512; ++i) {
        rows[std::size_t(i)].concept_name = "c" + std::to_string(i);
        rows[std::size_t(i)].score = double(i) / 512.0;
    }
    auto top = top_k(rows, cat, 10);
    ASSERT_EQ(top.size(), 10u);
    for (int i = 0; i < 10; ++i)
        EXPECT_EQ(top[std::size_t(i)], "c" + std::to_string(511 - i));
}

TEST(AucTable, EmptyClassGivesNaNAndPerfectFixtureGives100) {
    Builder b;
    for (int i = 0; i < 10; ++i) {
        // Asian Male: positives score high, negatives low -> AUC 100
        auto pos = b.add_sample("Male", "Asian", "20-29", "beard:pos");
        b.add_score(pos, "beard", 0.8 + 0.01 * i);
        auto neg = b.add_sample("Male", "Asian", "20-29", "beard:neg");
        b.add_score(neg, "beard", 0.1 + 0.01 * i);
        // Asian Female: positives only -> NaN cell
        auto only = b.add_sample("Female", "Asian", "20-29", "beard:pos");
        b.add_score(only, "beard", 0.7);
    }
    auto ds = b.build();
    auto table = auc_table(ds, {"beard"}, {}, {});
    ASSERT_EQ(table.groups.size(), 2u);
    EXPECT_EQ(table.groups[0], "Asian Male");
    EXPECT_EQ(table.groups[1], "Asian Female");
    EXPECT_DOUBLE_EQ(table.cells[0][0].auc, 1.0);
    EXPECT_TRUE(std::isnan(table.cells[0][1].auc));
    EXPECT_EQ(table.cells[0][1].n_neg, 0u);

    auto csv_text = auc_table_csv(table);
    EXPECT_NE(csv_text.find("100.00"), std::string::npos);
    EXPECT_NE(csv_text.find("NaN"), std::string::npos);
}

TEST(AucTable, CellsArePermutationInvariant) {
    DisparityPlan plan;
    plan.seed = 63;
    plan.concepts = {"beard", "hair"};
    plan.n_per_group = 25;
    auto synth = generate_scores(plan);

    std::stringstream s1(synth.samples_csv), s2(synth.scores_csv);
    auto ds = load_dataset(s1, s2);

    // shuffle score rows deterministically and rebuild
    auto shuffled = ds;
    Rng rng(99);
    for (std::size_t i = shuffled.scores.size(); i > 1; --i)
        std::swap(shuffled.scores[i - 1], shuffled.scores[rng.next_index(i)]);

    auto a = auc_table_csv(auc_table(ds, plan.concepts, {}, {}));
    auto b2 = auc_table_csv(auc_table(shuffled, plan.concepts, {}, {}));
    EXPECT_EQ(a, b2);
}

#ifndef MLAUDIT_DATA_DIR
#define MLAUDIT_DATA_DIR "data"
#endif

TEST(SuiteRunner, LoadsAndRunsShippedConceptSuite) {
    const char* data_dir = std::getenv("MLAUDIT_DATA");
    std::ifstream suite_in(std::string(data_dir ? data_dir : MLAUDIT_DATA_DIR) +
                           "/suites/concept_scores.json");
    ASSERT_TRUE(suite_in.is_open());
    auto suite = load_suite(suite_in);
    EXPECT_EQ(suite.hypotheses.size(), 3u);
    EXPECT_TRUE(suite.want_auc_table);

    DisparityPlan plan;
    plan.seed = 64;
    plan.concepts = {"beard", "sunglass"};
    plan.n_per_group = 30;
    auto synth = generate_scores(plan);
    std::stringstream s1(synth.samples_csv), s2(synth.scores_csv);
    auto ds = load_dataset(s1, s2);

    auto report = run_suite(ds, suite, 7);
    // nh5/nh6/nh7 each once per concept
    EXPECT_EQ(report.outcomes.size(), 6u);
    ASSERT_TRUE(report.auc.has_value());
    EXPECT_DOUBLE_EQ(report.auc->mark_alpha.at("nh7"), 0.00625);
    EXPECT_EQ(report.auc->concepts.size(), 2u);

    // determinism: identical invocations give byte-identical reports
    auto again = run_suite(ds, suite, 7);
    EXPECT_EQ(suite_report_to_json(report, ds.counters).dump(),
              suite_report_to_json(again, ds.counters).dump());
}
