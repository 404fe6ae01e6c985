#include "mlaudit/shorty.hpp"

#include <random>

#include <gtest/gtest.h>

using namespace mlaudit;

TEST(Shorty, ParsesReturnThenArgs) {
    auto sig = parse_shorty("IIJ");
    EXPECT_EQ(sig.return_kind, TypeKind::Int);
    ASSERT_EQ(sig.arg_kinds.size(), 2u);
    EXPECT_EQ(sig.arg_kinds[0], TypeKind::Int);
    EXPECT_EQ(sig.arg_kinds[1], TypeKind::Long);
    EXPECT_EQ(type_wire_size(sig.arg_kinds[0]), 4u);
    EXPECT_EQ(type_wire_size(sig.arg_kinds[1]), 8u);
}

TEST(Shorty, VoidNoArgs) {
    auto sig = parse_shorty("V");
    EXPECT_EQ(sig.return_kind, TypeKind::Void);
    EXPECT_TRUE(sig.arg_kinds.empty());
}

TEST(Shorty, PointerDoubleBool) {
    auto sig = parse_shorty("LDZ");
    EXPECT_EQ(sig.return_kind, TypeKind::Pointer);
    ASSERT_EQ(sig.arg_kinds.size(), 2u);
    EXPECT_EQ(sig.arg_kinds[0], TypeKind::Double);
    EXPECT_EQ(type_wire_size(sig.arg_kinds[0]), 8u);
    EXPECT_EQ(sig.arg_kinds[1], TypeKind::Bool);
    EXPECT_EQ(type_wire_size(sig.arg_kinds[1]), 4u);
}

TEST(Shorty, RejectsUnknownCharacter) {
    try {
        parse_shorty("IX");
        FAIL() << "expected error";
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::unknown_shorty_char);
    }
}

TEST(Shorty, RejectsVoidArgument) {
    try {
        parse_shorty("IVI");
        FAIL() << "expected error";
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::void_argument);
    }
}

TEST(Shorty, RejectsEmpty) {
    EXPECT_THROW(parse_shorty(""), error);
}

// Property: arg count is always len - 1 for accepted strings.
TEST(Shorty, ArgCountMatchesLength) {
    const char alphabet[] = "ZBSCIJFDL";  // no V: only legal first
    std::mt19937 rng(42);
    for (int trial = 0; trial < 500; ++trial) {
        std::string s;
        s.push_back("VZBSCIJFDL"[rng() % 10]);
        const int args = int(rng() % 8);
        for (int i = 0; i < args; ++i) s.push_back(alphabet[rng() % 9]);
        auto sig = parse_shorty(s);
        EXPECT_EQ(sig.arg_kinds.size(), s.size() - 1);
        EXPECT_EQ(sig.text, s);
    }
}

TEST(Shorty, EveryKindRoundTripsThroughChar) {
    for (TypeKind k : {TypeKind::Void, TypeKind::Bool, TypeKind::Byte,
                       TypeKind::Short, TypeKind::Char, TypeKind::Int,
                       TypeKind::Long, TypeKind::Float, TypeKind::Double,
                       TypeKind::Pointer}) {
        EXPECT_EQ(type_kind_from_char(type_kind_char(k)), k);
    }
}
