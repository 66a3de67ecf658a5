#include <doctest.h>

#include "../support/helpers.hpp"
#include "densel/errors.hpp"
#include "densel/pipeline.hpp"

using namespace densel;

namespace {

DatasetConfig smallConfig()
{
    DatasetConfig cfg;
    cfg.segmentLengthM = 200;
    cfg.gtToleranceM = 50;
    cfg.rateGrid = {1, 2, 4, 5, 10, 50};
    return cfg;
}

// segment s has recall 1 up to a knee that grows with s, then decays
double graded(std::size_t s, int k)
{
    const double knee = 1.0 + 5.0 * double(s % 10);
    return k <= knee ? 1.0 : std::max(0.0, 1.0 - 0.04 * (k - knee));
}

} // namespace

TEST_CASE("all rates perfect selects the sparsest stride")
{
    const auto cfg = smallConfig();
    const auto p = testing::profileProvider("train", 2000, 200, cfg.rateGrid,
                                            [](std::size_t, int) { return 1.0; });
    const auto r = phase1(*p, cfg, SelectionConfig{0.8, 0.8});
    CHECK(r.selection.chosenRate == 50);
    CHECK(r.selection.feasible);
    CHECK(r.curated.size() == 40);
    CHECK(r.model.segments.size() == 10);
}

TEST_CASE("only k = 1 perfect selects k = 1 under the strictest targets")
{
    const auto cfg = smallConfig();
    const auto p = testing::profileProvider("train", 2000, 200, cfg.rateGrid,
                                            [](std::size_t, int k) { return k == 1 ? 1.0 : 0.0; });
    const auto r = phase1(*p, cfg, SelectionConfig{1.0, 1.0});
    CHECK(r.selection.chosenRate == 1);
    CHECK(r.selection.feasible);
    CHECK(r.model.predictedRarByRate(1.0).at(1) == 1.0);
    CHECK(r.model.predictedRarByRate(1.0).at(2) == 0.0);
}

TEST_CASE("tighter targets never choose a sparser feasible rate")
{
    const auto cfg = smallConfig();
    const auto p = testing::profileProvider("train", 4000, 200, cfg.rateGrid, graded);
    const auto model = trainPhase1(*p, cfg, kDefaultLambda);
    const auto loose = selectFromModel(model, SelectionConfig{0.6, 0.4});
    const auto tight = selectFromModel(model, SelectionConfig{0.8, 0.6});
    REQUIRE(loose.feasible);
    if (tight.feasible)
        CHECK(tight.chosenRate <= loose.chosenRate);
    for (const auto& [rate, a] : model.rates) {
        CHECK(a.predictions.size() == model.segments.size());
        CHECK(a.features.size() == a.recalls.size());
    }
}

TEST_CASE("phase 2 on a perfect evaluation pair achieves rar 1")
{
    const auto cfg = smallConfig();
    const auto train = testing::profileProvider("train", 2000, 200, cfg.rateGrid, graded);
    const auto eval = testing::profileProvider("eval", 2000, 200, cfg.rateGrid,
                                               [](std::size_t, int) { return 1.0; });
    const SelectionConfig sel{0.8, 0.8};
    const auto r1 = phase1(*train, cfg, sel);
    const auto r2 = phase2(*eval, r1.curated, cfg, sel);
    CHECK(r2.rateK == r1.selection.chosenRate);
    CHECK(r2.achievedRar == 1.0);
    CHECK(r2.meanRecall == 1.0);

    const auto other = testing::profileProvider("eval", 1000, 200, cfg.rateGrid,
                                                [](std::size_t, int) { return 1.0; });
    CHECK_THROWS_AS((void)phase2(*other, r1.curated, cfg, sel), ValidationError);
}

TEST_CASE("traversal overloads run descriptors end to end")
{
    std::vector<float> d(300 * 2);
    for (std::size_t i = 0; i < 300; ++i) {
        d[2 * i] = float(std::cos(i * 0.01));
        d[2 * i + 1] = float(std::sin(i * 0.01));
    }
    const auto ref1 = Traversal::fromDescriptors("r", TraversalRole::Ref1, d, 2);
    const auto ref2 = Traversal::fromDescriptors("r", TraversalRole::Ref2, d, 2);
    DatasetConfig cfg = smallConfig();
    cfg.segmentLengthM = 100;
    const SelectionConfig sel{0.8, 0.8};
    const auto r1 = phase1(ref1, ref2, cfg, sel);
    CHECK(r1.selection.feasible);
    const auto r2 = phase2(r1.curated, ref1, ref2, cfg, sel);
    CHECK(r2.achievedRar == 1.0);

    const auto short2 = Traversal::fromDescriptors("r", TraversalRole::Ref2,
                                                   std::vector<float>(d.begin(), d.begin() + 400), 2);
    CHECK_THROWS_AS((void)phase1(ref1, short2, cfg, sel), ValidationError);
}

TEST_CASE("sweep: the evaluation pair is untouched until training completes")
{
    const auto cfg = smallConfig();
    auto log = std::make_shared<AccessLog>();
    const auto rawTrain = testing::profileProvider("t", 2000, 200, cfg.rateGrid, graded);
    const auto rawEval = testing::profileProvider("e", 2000, 200, cfg.rateGrid, graded);
    LazyMatchProvider train("training", [&] { return rawTrain; }, log);
    LazyMatchProvider eval("evaluation", [&] { return rawEval; }, log);

    const auto report = runSweep(train, eval, cfg, SweepSpec{}, kDefaultLambda, log.get());
    const auto done = log->firstIndexOfAction("phase1_complete");
    REQUIRE(done < log->events().size());
    CHECK(log->firstIndexOf("training") < done);
    CHECK(log->firstIndexOf("evaluation") > done);
    CHECK(report.cells.size() == 25);
}

TEST_CASE("sweep report structure and invariants")
{
    const auto cfg = smallConfig();
    const auto train = testing::profileProvider("t", 4000, 200, cfg.rateGrid, graded);
    const auto eval = testing::profileProvider("e", 4000, 200, cfg.rateGrid, graded);
    const SweepSpec spec;
    const auto report = runSweep(*train, *eval, cfg, spec);

    REQUIRE(report.cells.size() == 25);
    REQUIRE(report.rows.size() == 5);
    CHECK(report.segmentCount == 20);
    for (const auto& row : report.rows) {
        CHECK(row.cells == 5);
        CHECK(row.oursSuccesses <= 5);
    }
    CHECK(checkReportInvariants(report, cfg, spec).empty());

    for (const auto& c : report.cells) {
        CHECK(c.baselineRate == 4);
        if (c.chosenRate == c.baselineRate) {
            CHECK(c.deviation == c.baselineDeviation);
            CHECK(c.achievedRar == c.baselineAchievedRar);
        }
    }

    // identical pairs: predictions replay ground truth, so ours never misses
    for (const auto& row : report.rows)
        CHECK(row.oursSuccesses == 5);

    const auto csv = sweepCsv(report);
    CHECK(csv.rfind("method,r_target,rar_target,rate_k,", 0) == 0);
    std::size_t ours = 0, baseline = 0;
    for (std::size_t pos = 0; (pos = csv.find("\nours,", pos)) != std::string::npos; ++pos)
        ++ours;
    for (std::size_t pos = 0; (pos = csv.find("\nbaseline,", pos)) != std::string::npos; ++pos)
        ++baseline;
    CHECK(ours == 25);
    CHECK(baseline == 25);
    CHECK(deviationsCsv(report, spec).find("5/5") != std::string::npos);
    CHECK(madCsv(report).rfind("method,mad,successes,cells\n", 0) == 0);
}

TEST_CASE("tampered reports fail the invariant check")
{
    const auto cfg = smallConfig();
    const auto p = testing::profileProvider("t", 2000, 200, cfg.rateGrid, graded);
    const SweepSpec spec;
    auto report = runSweep(*p, *p, cfg, spec);
    report.cells[3].deviation += 0.1;
    CHECK_FALSE(checkReportInvariants(report, cfg, spec).empty());
}

TEST_CASE("sweep spec validation")
{
    const auto cfg = smallConfig();
    SweepSpec s;
    CHECK_NOTHROW(s.validate(cfg));
    s.baselineRate = 3;
    CHECK_THROWS_AS(s.validate(cfg), ConfigError);
    s = SweepSpec{};
    s.rarTargets = {1.5};
    CHECK_THROWS_AS(s.validate(cfg), ConfigError);
    s = SweepSpec{};
    s.rTargets.clear();
    CHECK_THROWS_AS(s.validate(cfg), ConfigError);
}

TEST_CASE("sweeps are deterministic")
{
    const auto cfg = smallConfig();
    const auto t = testing::profileProvider("t", 2000, 200, cfg.rateGrid, graded);
    const auto e = testing::profileProvider("e", 2000, 200, cfg.rateGrid,
                                            [](std::size_t s, int k) { return graded(s + 3, k); });
    const SweepSpec spec;
    CHECK(sweepCsv(runSweep(*t, *e, cfg, spec)) == sweepCsv(runSweep(*t, *e, cfg, spec)));
}

TEST_CASE("swap ablation with identical references reports zero difference")
{
    const auto cfg = smallConfig();
    Scenario s;
    s.training = testing::profileProvider("t", 2000, 200, cfg.rateGrid, graded);
    s.evaluation = testing::profileProvider("e", 2000, 200, cfg.rateGrid, graded);
    s.swappedTraining = s.training;
    s.swappedEvaluation = s.evaluation;
    const auto a = ablationSwap(s, cfg, SweepSpec{});
    REQUIRE(a.deviationDifference.size() == 25);
    for (double d : a.deviationDifference)
        CHECK(d == 0.0);
    CHECK(swapCsv(a).find('\n') != std::string::npos);

    Scenario noSwap{s.training, s.evaluation, nullptr, nullptr};
    CHECK_THROWS_AS((void)ablationSwap(noSwap, cfg, SweepSpec{}), ConfigError);
}

TEST_CASE("segment-length ablation runs one sweep per length")
{
    auto cfg = smallConfig();
    Scenario s;
    s.training = testing::profileProvider("t", 3000, 100, cfg.rateGrid, graded);
    s.evaluation = s.training;
    const std::vector<double> ds{50, 100, 150, 200, 250, 300};
    const auto runs = ablationSegmentLength(s, cfg, ds, SweepSpec{});
    REQUIRE(runs.size() == 6);
    for (std::size_t i = 0; i < runs.size(); ++i) {
        CHECK(runs[i].segmentLengthM == ds[i]);
        CHECK(runs[i].report.segmentCount == (3000 + std::size_t(ds[i]) - 1) / std::size_t(ds[i]));
    }

    const auto longer = ablationSegmentLength(s, cfg, {5000}, SweepSpec{});
    CHECK(longer[0].report.segmentCount == 1);
    CHECK_THROWS_AS((void)ablationSegmentLength(s, cfg, {}, SweepSpec{}), ConfigError);
    CHECK_THROWS_AS((void)ablationSegmentLength(s, cfg, {0}, SweepSpec{}), ConfigError);
}
