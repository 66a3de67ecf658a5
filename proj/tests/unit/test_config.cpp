#include <doctest.h>

#include "../support/helpers.hpp"
#include "densel/config.hpp"
#include "densel/errors.hpp"

using densel::ConfigError;
using densel::KeyValueConfig;

TEST_CASE("key = value lines with comments and blanks")
{
    const auto c = KeyValueConfig::parse("# header\n\nalpha = 1.5\n  beta=two words  \ngamma = 3\n");
    CHECK(c.getDouble("alpha") == 1.5);
    CHECK(c.getString("beta") == "two words");
    CHECK(c.getInt("gamma") == 3);
    CHECK_FALSE(c.has("delta"));
    CHECK(c.getDouble("delta", 0.25) == 0.25);
}

TEST_CASE("duplicate keys and malformed lines are config errors")
{
    CHECK_THROWS_AS(KeyValueConfig::parse("a = 1\na = 2\n"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse("just text\n"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse(" = 3\n"), ConfigError);
}

TEST_CASE("typed getters reject garbage and non-finite numbers")
{
    const auto c = KeyValueConfig::parse("x = 1.2.3\ny = nan\nz = 4.5\nw = inf\n");
    CHECK_THROWS_AS((void)c.getDouble("x"), ConfigError);
    CHECK_THROWS_AS((void)c.getDouble("y"), ConfigError);
    CHECK_THROWS_AS((void)c.getDouble("w"), ConfigError);
    CHECK_THROWS_AS((void)c.getInt("z"), ConfigError);
    CHECK_THROWS_AS((void)c.getDouble("missing"), ConfigError);
}

TEST_CASE("lists are comma separated")
{
    const auto c = KeyValueConfig::parse("a = 0.2, 0.4,0.6\nb = 1,2,3\nc = 1,,2\n");
    CHECK(c.getDoubleList("a") == std::vector<double>{0.2, 0.4, 0.6});
    CHECK(c.getIntList("b") == std::vector<int>{1, 2, 3});
    CHECK_THROWS_AS((void)c.getIntList("c"), ConfigError);
}

TEST_CASE("overrides replace values and merged defaults never win")
{
    auto c = KeyValueConfig::parse("a = 1\n");
    c.applyOverride("a=2");
    c.applyOverride("b = x");
    CHECK(c.getInt("a") == 2);
    CHECK(c.getString("b") == "x");
    CHECK_THROWS_AS(c.applyOverride("novalue"), ConfigError);

    c.mergeDefaults(KeyValueConfig::parse("a = 9\nc = 3\n"));
    CHECK(c.getInt("a") == 2);
    CHECK(c.getInt("c") == 3);
}

TEST_CASE("serialize is sorted and reparses to the same entries")
{
    auto c = KeyValueConfig::parse("z = 1\na = 2\n");
    CHECK(c.serialize() == "a = 2\nz = 1\n");
    CHECK(KeyValueConfig::parse(c.serialize()).entries() == c.entries());
}

TEST_CASE("load reports a missing file as an I/O error")
{
    CHECK_THROWS_AS(KeyValueConfig::load("/nonexistent/run.cfg"), densel::IoError);
    testing::TempDir dir;
    testing::writeText(dir / "a.cfg", "k = v\n");
    CHECK(KeyValueConfig::load(dir / "a.cfg").getString("k") == "v");
}
