#include "densel/features.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "densel/errors.hpp"

namespace densel {

double jumpRate(std::span<const double> positions, double toleranceM)
{
    const std::size_t n = positions.size();
    if (n < 2)
        return 0.0;
    std::size_t jumps = 0;
    for (std::size_t j = 0; j + 1 < n; ++j)
        if (std::abs(positions[j + 1] - positions[j]) > toleranceM)
            ++jumps;
    return static_cast<double>(jumps) / static_cast<double>(n - 1);
}

double fracOutsideMainCluster(std::span<const double> positions, double binWidthM)
{
    const std::size_t n = positions.size();
    if (n == 0)
        return 0.0;
    if (!(binWidthM > 0.0))
        throw ConfigError("bin width must be positive");

    std::vector<long long> bins(n);
    for (std::size_t j = 0; j < n; ++j)
        bins[j] = static_cast<long long>(std::floor(positions[j] / binWidthM));

    std::vector<long long> sorted = bins;
    std::sort(sorted.begin(), sorted.end());
    long long modal = sorted.front();
    std::size_t modalCount = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t k = i;
        while (k < n && sorted[k] == sorted[i])
            ++k;
        // strict > keeps the lowest bin among equal counts
        if (k - i > modalCount) {
            modalCount = k - i;
            modal = sorted[i];
        }
        i = k;
    }

    std::size_t inside = 0;
    for (const auto b : bins)
        if (b >= modal - 1 && b <= modal + 1)
            ++inside;
    return 1.0 - static_cast<double>(inside) / static_cast<double>(n);
}

double largestClusterFraction(std::span<const double> positions, double toleranceM)
{
    const std::size_t n = positions.size();
    if (n == 0)
        return 0.0;
    std::vector<double> sorted(positions.begin(), positions.end());
    std::sort(sorted.begin(), sorted.end());
    std::size_t largest = 1;
    std::size_t current = 1;
    for (std::size_t j = 1; j < n; ++j) {
        if (sorted[j] - sorted[j - 1] > toleranceM)
            current = 1;
        else
            ++current;
        largest = std::max(largest, current);
    }
    return static_cast<double>(largest) / static_cast<double>(n);
}

double turnRate(std::span<const double> positions)
{
    const std::size_t n = positions.size();
    if (n < 3)
        return 0.0;
    std::size_t turns = 0;
    for (std::size_t j = 0; j + 2 < n; ++j)
        if (positions[j + 2] - 2.0 * positions[j + 1] + positions[j] != 0.0)
            ++turns;
    return static_cast<double>(turns) / static_cast<double>(n - 2);
}

FeatureExtraction extractFeatures(const MatchTable& matches, std::span<const Segment> segments,
                                  double toleranceM, double segmentLengthM)
{
    FeatureExtraction out;
    std::vector<double> positions;
    for (const auto& seg : segments) {
        positions.clear();
        for (std::size_t q = seg.startFrame; q < seg.endFrameExclusive && q < matches.size(); ++q)
            positions.push_back(matches.entries[q].top1RefPositionM);
        if (positions.empty()) {
            ++out.excludedSegments;
            continue;
        }
        out.features.push_back(SegmentFeatures{seg.segmentIndex, matches.rateK,
                                               jumpRate(positions, toleranceM),
                                               fracOutsideMainCluster(positions, segmentLengthM),
                                               largestClusterFraction(positions, toleranceM),
                                               turnRate(positions)});
    }
    return out;
}

std::string featuresCsv(std::span<const SegmentFeatures> features, bool header)
{
    std::string out = header ? "segment_index,rate_k,x1,x2,x3,x4\n" : "";
    for (const auto& f : features)
        out += fmt::format("{},{},{:.6f},{:.6f},{:.6f},{:.6f}\n", f.segmentIndex, f.rateK,
                           f.jumpRate, f.fracOutsideMainCluster, f.largestClusterFraction,
                           f.turnRate);
    return out;
}

} // namespace densel
