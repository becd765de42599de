#include <sstream>

#include <gtest/gtest.h>

#include "stkg/keyvalue.hpp"

using namespace stkg;

TEST(ParseDouble, AcceptsPlainAndExponentForms) {
    EXPECT_DOUBLE_EQ(parse_double("1.5", "x"), 1.5);
    EXPECT_DOUBLE_EQ(parse_double(" -2e-3 ", "x"), -2e-3);
}

TEST(ParseDouble, RejectsGarbageAndNonFinite) {
    EXPECT_THROW(parse_double("1.5x", "x"), FormatError);
    EXPECT_THROW(parse_double("", "x"), FormatError);
    EXPECT_THROW(parse_double("nan", "x"), FormatError);
    EXPECT_THROW(parse_double("inf", "x"), FormatError);
}

TEST(ParseInt, RejectsFractions) {
    EXPECT_EQ(parse_int("42", "n"), 42);
    EXPECT_THROW(parse_int("4.2", "n"), FormatError);
}

TEST(FormatDouble, RoundTripsExactly) {
    for (double v : {0.1, 1.0 / 3.0, -1e-300, 6.02214076e23, 5e-324}) {
        EXPECT_EQ(parse_double(format_double(v), "v"), v);
    }
}

TEST(KeyValues, PreservesOrderAndRoundTrips) {
    std::istringstream in("# comment\nb = 2\na=1\n\nc = x, y\n");
    const auto kv = KeyValues::parse(in);
    EXPECT_EQ(kv.keys(), (std::vector<std::string>{"b", "a", "c"}));
    EXPECT_EQ(kv.get("c"), "x, y");
    std::istringstream again(kv.str());
    const auto kv2 = KeyValues::parse(again);
    EXPECT_EQ(kv2.keys(), kv.keys());
    EXPECT_EQ(kv2.get("a"), "1");
}

TEST(KeyValues, RejectsDuplicatesAndMalformedLines) {
    std::istringstream dup("a = 1\na = 2\n");
    EXPECT_THROW(KeyValues::parse(dup), FormatError);
    std::istringstream bare("just words\n");
    EXPECT_THROW(KeyValues::parse(bare), FormatError);
    std::istringstream empty_key(" = 3\n");
    EXPECT_THROW(KeyValues::parse(empty_key), FormatError);
}

TEST(KeyValues, MissingKeyIsConfigError) {
    KeyValues kv;
    EXPECT_THROW((void)kv.get("nope"), ConfigError);
}
