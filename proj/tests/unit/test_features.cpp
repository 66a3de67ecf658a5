#include <doctest.h>

#include <algorithm>
#include <random>

#include "../support/helpers.hpp"
#include "../support/oracles.hpp"
#include "densel/features.hpp"

using namespace densel;
using V = std::vector<double>;

TEST_CASE("jump rate examples")
{
    CHECK(jumpRate(V{0, 1, 2, 3}, 50) == 0.0);
    CHECK(jumpRate(V{0, 100, 1, 2, 3}, 50) == 0.5);
    CHECK(jumpRate(V{0, 50}, 50) == 0.0);
    CHECK(jumpRate(V{7}, 50) == 0.0);
    CHECK(jumpRate(V{}, 50) == 0.0);
}

TEST_CASE("fraction outside the main cluster examples")
{
    CHECK(fracOutsideMainCluster(V{10, 20, 30}, 200) == 0.0);
    CHECK(fracOutsideMainCluster(V{10, 20, 30, 950}, 200) == 0.25);
    CHECK(fracOutsideMainCluster(V{10, 210}, 200) == 0.0);
    // tie between bins 0 and 5: the lower bin is modal, so bin 5 lies outside
    CHECK(fracOutsideMainCluster(V{10, 1010}, 200) == 0.5);
}

TEST_CASE("largest cluster fraction examples")
{
    CHECK(largestClusterFraction(V{4, 4, 4}, 50) == 1.0);
    CHECK(largestClusterFraction(V{0, 10, 20, 500, 510}, 50) == 0.6);
    CHECK(largestClusterFraction(V{0, 60, 120}, 50) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(largestClusterFraction(V{0, 50, 100}, 50) == 1.0); // gap == tau does not break
}

TEST_CASE("turn rate examples")
{
    CHECK(turnRate(V{0, 5, 10, 15}) == 0.0);
    CHECK(turnRate(V{0, 1, 1, 2}) == 1.0);
    CHECK(turnRate(V{0, 2, 4, 7}) == 0.5);
    CHECK(turnRate(V{0, 9}) == 0.0);
}

TEST_CASE("extract_features composes the four features per segment")
{
    const auto gt = testing::iota(8);
    const auto segs = segmentPositions(gt, 4.0);
    const auto out = extractFeatures(testing::tableOf({0, 1, 2, 3, 4, 4, 900, 5}), segs, 50, 200);
    REQUIRE(out.features.size() == 2);
    CHECK(out.excludedSegments == 0);
    const auto& a = out.features[0];
    CHECK(a.jumpRate == 0.0);
    CHECK(a.fracOutsideMainCluster == 0.0);
    CHECK(a.largestClusterFraction == 1.0);
    CHECK(a.turnRate == 0.0);
    const auto& b = out.features[1];
    CHECK(b.segmentIndex == 1);
    CHECK(b.jumpRate == doctest::Approx(2.0 / 3.0));
    CHECK(b.fracOutsideMainCluster == 0.25);
    CHECK(b.largestClusterFraction == 0.75);
    CHECK(b.turnRate == 1.0);

    const Segment single{0, 0, 1, 0, 0};
    const auto one = extractFeatures(testing::tableOf({3}), std::span(&single, 1), 50, 200);
    CHECK(one.features[0].vector() == FeatureVector{0, 0, 1, 0});

    const Segment empty{1, 1, 1, 1, 1};
    CHECK(extractFeatures(testing::tableOf({3}), std::span(&empty, 1), 50, 200).excludedSegments == 1);
}

TEST_CASE("random permutation over 10 km: x1 near 1, x3 near 1/n")
{
    std::mt19937_64 rng(2024);
    V p(200);
    for (std::size_t i = 0; i < p.size(); ++i)
        p[i] = double(i) * 50.0 + 1.0; // 50 m apart, spread over 10 km
    std::shuffle(p.begin(), p.end(), rng);
    const Segment seg{0, 0, p.size(), 0, 199};
    const auto f = extractFeatures(testing::tableOf(p), std::span(&seg, 1), 25, 200).features[0];
    CHECK(f.jumpRate == oracle::jumpRate(p, 25));
    CHECK(f.jumpRate > 0.95);
    CHECK(f.largestClusterFraction == oracle::largestClusterFraction(p, 25));
    CHECK(f.largestClusterFraction == doctest::Approx(1.0 / 200.0));
    CHECK(f.fracOutsideMainCluster == oracle::fracOutsideMainCluster(p, 200));
    CHECK(f.turnRate == oracle::turnRate(p));
}

TEST_CASE("feature properties on random sequences")
{
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0, 5000);
    for (int trial = 0; trial < 300; ++trial) {
        V p(1 + rng() % 60);
        for (auto& x : p)
            x = rng() % 2 ? std::floor(u(rng)) : std::floor(u(rng) / 100);
        const double tau = 25, d = 200;

        for (double v : {jumpRate(p, tau), fracOutsideMainCluster(p, d), largestClusterFraction(p, tau),
                         turnRate(p)}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }

        // integer shifts keep every difference exact
        V shifted = p, binShift = p;
        for (auto& x : shifted)
            x += 37.0;
        for (auto& x : binShift)
            x += 3 * d;
        CHECK(jumpRate(shifted, tau) == jumpRate(p, tau));
        CHECK(turnRate(shifted) == turnRate(p));
        CHECK(largestClusterFraction(shifted, tau) == largestClusterFraction(p, tau));
        CHECK(fracOutsideMainCluster(binShift, d) == fracOutsideMainCluster(p, d));

        V perm = p;
        std::shuffle(perm.begin(), perm.end(), rng);
        CHECK(largestClusterFraction(perm, tau) == largestClusterFraction(p, tau));
        CHECK(fracOutsideMainCluster(perm, d) == fracOutsideMainCluster(p, d));
    }

    // order matters for the sequential features
    CHECK(jumpRate(V{0, 100, 0, 100}, 50) != jumpRate(V{0, 0, 100, 100}, 50));
    CHECK(turnRate(V{0, 2, 1, 3}) != turnRate(V{0, 1, 2, 3}));
}

TEST_CASE("features CSV")
{
    const std::vector<SegmentFeatures> f{{3, 5, 0.5, 0.25, 1.0, 0.0}};
    CHECK(featuresCsv(f) == "segment_index,rate_k,x1,x2,x3,x4\n3,5,0.500000,0.250000,1.000000,0.000000\n");
}
