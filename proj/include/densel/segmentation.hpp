#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "densel/ingest.hpp"

namespace densel {

/* Half-open frame range [startFrame, endFrameExclusive) covering ~d meters. */
struct Segment
{
    std::size_t segmentIndex;
    std::size_t startFrame;
    std::size_t endFrameExclusive;
    double startPositionM;
    double endPositionM; // position of the last frame in the segment

    std::size_t size() const noexcept { return endFrameExclusive - startFrame; }
};

/* Every k-th frame of a traversal, starting at frame 0. */
struct SampledReference
{
    int rateK = 1;
    std::vector<std::size_t> keptFrameIndices;
    std::vector<double> keptPositionsM;

    std::size_t size() const noexcept { return keptFrameIndices.size(); }
};

/*
 * Greedy fixed-distance segmentation.
 *
 * A new segment starts at the first frame whose position is at least
 * d meters past the current segment's first position. The trailing segment
 * may be shorter than d. Throws ConfigError when d is not positive.
 */
std::vector<Segment> segmentPositions(std::span<const double> positions, double segmentLengthM);
std::vector<Segment> segmentTraversal(const Traversal& traversal, double segmentLengthM);

SampledReference subsamplePositions(std::span<const double> positions, int rateK);
SampledReference subsample(const Traversal& traversal, int rateK);

} // namespace densel
