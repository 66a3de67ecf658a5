#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "densel/metrics.hpp"
#include "densel/segmentation.hpp"

namespace densel {

inline constexpr std::size_t kFeatureCount = 4;

using FeatureVector = std::array<double, kFeatureCount>;

/* Spatial coherence of the top-1 match positions inside one segment. */
struct SegmentFeatures
{
    std::size_t segmentIndex;
    int rateK;
    double jumpRate;                  // consecutive matches more than tau apart
    double fracOutsideMainCluster;    // matches outside the modal bin and its neighbours
    double largestClusterFraction;    // biggest tau-connected group of sorted positions
    double turnRate;                  // nonzero second differences

    FeatureVector vector() const
    {
        return {jumpRate, fracOutsideMainCluster, largestClusterFraction, turnRate};
    }
};

// Each function takes the top-1 positions of one segment in query order.
// Degenerate inputs whose denominator vanishes yield 0.

double jumpRate(std::span<const double> positions, double toleranceM);

/* Bins are floor(p / d); the modal bin breaks ties toward the lowest index. */
double fracOutsideMainCluster(std::span<const double> positions, double binWidthM);

double largestClusterFraction(std::span<const double> positions, double toleranceM);

/* The zero test on the second difference is exact. */
double turnRate(std::span<const double> positions);

struct FeatureExtraction
{
    std::vector<SegmentFeatures> features;
    std::size_t excludedSegments = 0;
};

FeatureExtraction extractFeatures(const MatchTable& matches, std::span<const Segment> segments,
                                  double toleranceM, double segmentLengthM);

std::string featuresCsv(std::span<const SegmentFeatures> features, bool header = true);

} // namespace densel
