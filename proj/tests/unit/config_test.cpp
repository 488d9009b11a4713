#include <gtest/gtest.h>

#include "vitnerf/core/config.hpp"
#include "vitnerf/core/errors.hpp"

namespace vitnerf {
namespace {

TEST(KeyValueConfig, ParsesCommentsAndWhitespace) {
  const auto kv = KeyValueConfig::parse("# header\n\n a = 1 \nb=two words\nc = 0.5\n");
  EXPECT_EQ(kv.get_int("a", 0), 1);
  EXPECT_EQ(kv.get_string("b", ""), "two words");
  EXPECT_DOUBLE_EQ(kv.get_double("c", 0.0), 0.5);
  EXPECT_EQ(kv.get_int("missing", 7), 7);
}

TEST(KeyValueConfig, LaterValuesWin) {
  auto kv = KeyValueConfig::parse("a = 1\na = 2\n");
  EXPECT_EQ(kv.get_int("a", 0), 2);
  kv.apply_override("a=3");
  EXPECT_EQ(kv.get_int("a", 0), 3);
  EXPECT_THROW(kv.apply_override("novalue"), ArgumentError);
}

TEST(KeyValueConfig, TypedAccessors) {
  const auto kv = KeyValueConfig::parse("t = yes\nf = off\nl = 1,2, 3\nd = 0.5,2\nbad = x1\n");
  EXPECT_TRUE(kv.get_bool("t", false));
  EXPECT_FALSE(kv.get_bool("f", true));
  EXPECT_EQ(kv.get_int_list("l", {}), (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(kv.get_double_list("d", {}), (std::vector<double>{0.5, 2.0}));
  EXPECT_THROW(kv.get_int("bad", 0), ArgumentError);
  EXPECT_THROW(kv.get_bool("bad", false), ArgumentError);
  EXPECT_THROW(kv.get_double("bad", 0.0), ArgumentError);
}

TEST(KeyValueConfig, MalformedLineNamesOrigin) {
  try {
    KeyValueConfig::parse("a = 1\njunk\n", "run.cfg");
    FAIL();
  } catch (const ArgumentError& e) {
    EXPECT_NE(std::string(e.what()).find("run.cfg:2"), std::string::npos) << e.what();
  }
}

TEST(KeyValueConfig, UnknownKey) {
  const auto kv = KeyValueConfig::parse("a = 1\nzz = 2\n");
  EXPECT_NO_THROW(kv.require_known({"a", "zz"}));
  try {
    kv.require_known({"a"});
    FAIL();
  } catch (const ArgumentError& e) {
    EXPECT_NE(std::string(e.what()).find("'zz'"), std::string::npos);
  }
}

TEST(KeyValueConfig, TextRoundTrip) {
  const auto kv = KeyValueConfig::parse("b = 2\na = x y\n");
  const auto back = KeyValueConfig::parse(kv.to_string());
  EXPECT_EQ(back.entries(), kv.entries());
}

TEST(KeyValueConfig, MissingFile) { EXPECT_THROW(KeyValueConfig::load("/nonexistent/x.cfg"), LoadError); }

}  // namespace
}  // namespace vitnerf
