#include "mlaudit/report.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "mlaudit/stats.hpp"

using namespace mlaudit;

TEST(FormatReal, LosslessRoundTrip) {
    for (double v : {0.1, 1.0 / 3.0, 0.049534613435626740, 1e-300, 12345.6789}) {
        const std::string s = format_real(v);
        EXPECT_EQ(std::stod(s), v) << s;
    }
}

TEST(FormatReal, NaNSpellsNaN) {
    EXPECT_EQ(format_real(std::nan("")), "NaN");
    EXPECT_EQ(format_fixed(std::nan(""), 2), "NaN");
}

TEST(FormatReal, CorrectedAlphaPrintsCleanly) {
    EXPECT_EQ(format_real(bonferroni(0.05, 8)), "0.00625");
    EXPECT_EQ(format_real(bonferroni(0.05, 1)), "0.05");
}

TEST(FormatFixed, HalfToEvenOnRepresentableTies) {
    // 0.125 and 0.375 are exact in binary: the tie resolves to even.
    EXPECT_EQ(format_fixed(0.125, 2), "0.12");
    EXPECT_EQ(format_fixed(0.375, 2), "0.38");
    EXPECT_EQ(format_fixed(81.625, 2), "81.62");
    EXPECT_EQ(format_fixed(0.135, 2), "0.14");  // not a tie in binary
}

TEST(JsonReal, NaNBecomesStringOthersStayNumbers) {
    EXPECT_TRUE(json_real(0.5).is_number());
    EXPECT_TRUE(json_real(std::nan("")).is_string());
    EXPECT_EQ(json_real(std::nan("")).get<std::string>(), "NaN");
    nlohmann::ordered_json j;
    j["auc"] = json_real(std::nan(""));
    EXPECT_EQ(j.dump(), R"({"auc":"NaN"})");
}
