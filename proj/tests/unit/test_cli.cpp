#include <doctest.h>

#include <json.hpp>
#include <sstream>

#include "../support/helpers.hpp"
#include "densel/cli.hpp"

namespace fs = std::filesystem;

namespace {

const char* kSmallSpec = "n_frames = 4000\n"
                         "segments_easy = 8\n"
                         "segments_medium = 7\n"
                         "segments_hard = 5\n"
                         "aliasing_rate = 0.9\n"
                         "gt_tolerance_tau = 50\n"
                         "seed = 5\n";

struct Run
{
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args)
{
    std::ostringstream out, err;
    const int code = densel::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

/* Writes the small spec and a synthetic run config into dir. */
fs::path setup(const testing::TempDir& dir, const std::string& extra = "")
{
    testing::writeText(dir / "spec.cfg", kSmallSpec);
    testing::writeText(dir / "run.cfg", "mode = synthetic\nsynthetic_spec = spec.cfg\n"
                                        "segment_length_d = 200\ngt_tolerance_tau = 50\nseed = 5\n" +
                                            extra);
    return dir / "run.cfg";
}

std::size_t countPrefix(const std::string& text, const std::string& prefix)
{
    std::size_t n = 0;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);)
        n += line.rfind(prefix, 0) == 0;
    return n;
}

} // namespace

TEST_CASE("sha256 of a known string")
{
    CHECK(densel::cli::sha256Hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("select writes a selection and a manifest with checksums")
{
    testing::TempDir dir;
    const auto cfg = setup(dir);
    const auto r = cli({"select", "--config", cfg.string(), "--out", (dir / "o").string()});
    REQUIRE(r.code == 0);
    const auto sel = nlohmann::json::parse(testing::readText(dir / "o" / "selection.json"));
    CHECK(sel.contains("chosen_rate"));
    const auto manifest = nlohmann::json::parse(testing::readText(dir / "o" / "manifest.json"));
    CHECK(manifest["command"] == "select");
    for (const auto& [name, hash] : manifest["artifacts"].items())
        CHECK(hash == densel::cli::sha256Hex(testing::readText(dir / "o" / name)));
    CHECK(fs::exists(dir / "o" / "models.txt"));
}

TEST_CASE("evaluate adds query-time results")
{
    testing::TempDir dir;
    const auto cfg = setup(dir);
    REQUIRE(cli({"evaluate", "--config", cfg.string(), "--out", (dir / "o").string(), "--quiet"}).code == 0);
    const auto ev = nlohmann::json::parse(testing::readText(dir / "o" / "evaluation.json"));
    CHECK(ev.size() > 0);
    CHECK(fs::exists(dir / "o" / "query_recalls.csv"));
}

TEST_CASE("exit codes: missing input is I/O, bad targets and unknown keys are invalid")
{
    testing::TempDir dir;
    testing::writeText(dir / "missing.cfg", "mode = matches\ntraining_matches = nope.csv\n"
                                            "evaluation_matches = nope2.csv\n");
    CHECK(cli({"select", "--config", (dir / "missing.cfg").string(), "--out", (dir / "o").string()}).code == 2);
    CHECK(cli({"select", "--config", (dir / "absent.cfg").string()}).code == 2);

    const auto cfg = setup(dir, "rar_target = 1.5\n");
    const auto bad = cli({"select", "--config", cfg.string(), "--out", (dir / "o").string()});
    CHECK(bad.code == 1);
    CHECK(bad.err.find("rar_target") != std::string::npos);

    testing::TempDir other;
    const auto typo = setup(other, "r_targt = 0.5\n");
    CHECK(cli({"select", "--config", typo.string(), "--out", (other / "o").string()}).code == 1);
    CHECK(cli({"frobnicate"}).code == 1);
}

TEST_CASE("sweep writes 25 cells per method and honours overrides")
{
    testing::TempDir dir;
    const auto cfg = setup(dir);
    REQUIRE(cli({"sweep", "--config", cfg.string(), "--out", (dir / "a").string(), "--quiet"}).code == 0);
    const auto sweep = testing::readText(dir / "a" / "sweep.csv");
    CHECK(countPrefix(sweep, "ours,") == 25);
    CHECK(countPrefix(sweep, "baseline,") == 25);
    CHECK(fs::exists(dir / "a" / "mad.csv"));
    CHECK(fs::exists(dir / "a" / "deviations.csv"));

    REQUIRE(cli({"sweep", "--config", cfg.string(), "--out", (dir / "b").string(), "--quiet",
                 "--override", "baseline_rate=10"})
                .code == 0);
    const auto b = testing::readText(dir / "b" / "sweep.csv");
    CHECK(countPrefix(b, "baseline,") == 25);
    std::istringstream in(b);
    for (std::string line; std::getline(in, line);)
        if (line.rfind("baseline,", 0) == 0)
            CHECK(line.find(",10,", 9) != std::string::npos);
    const auto manifest = nlohmann::json::parse(testing::readText(dir / "b" / "manifest.json"));
    CHECK(manifest["overrides"][0] == "baseline_rate=10");
}

TEST_CASE("synth is hash-stable, validates its spec and feeds select")
{
    testing::TempDir dir;
    testing::writeText(dir / "spec.cfg", kSmallSpec);
    REQUIRE(cli({"synth", "--config", (dir / "spec.cfg").string(), "--out", (dir / "s1").string()}).code == 0);
    REQUIRE(cli({"synth", "--config", (dir / "spec.cfg").string(), "--out", (dir / "s2").string()}).code == 0);
    for (const char* f : {"training_matches.csv", "evaluation_matches.csv", "oracle_recall.csv"})
        CHECK(densel::cli::sha256Hex(testing::readText(dir / "s1" / f)) ==
              densel::cli::sha256Hex(testing::readText(dir / "s2" / f)));

    CHECK(cli({"synth", "--config", (dir / "spec.cfg").string(), "--out", (dir / "s3").string(),
               "--override", "easy_p_max=1.2"})
              .code == 1);

    // a minimal two-region environment loads through the match-table path
    testing::writeText(dir / "tiny.cfg", "n_frames = 400\nsegments_easy = 1\nsegments_medium = 1\n"
                                         "segments_hard = 0\naliasing_rate = 0\nrate_grid = 1,2,5\n");
    REQUIRE(cli({"synth", "--config", (dir / "tiny.cfg").string(), "--out", (dir / "t").string()}).code == 0);
    const auto r = cli({"select", "--config", (dir / "t" / "run.cfg").string(), "--out",
                        (dir / "t" / "o").string()});
    CHECK(r.code == 0);
    CHECK(fs::exists(dir / "t" / "o" / "selection.json"));
}

TEST_CASE("validate loads every input")
{
    testing::TempDir dir;
    const auto cfg = setup(dir);
    const auto r = cli({"validate", "--config", cfg.string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("ok") != std::string::npos);
}
