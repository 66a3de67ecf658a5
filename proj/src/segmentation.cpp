#include "densel/segmentation.hpp"

#include <cmath>

#include <fmt/format.h>

#include "densel/errors.hpp"

namespace densel {

std::vector<Segment> segmentPositions(std::span<const double> positions, double segmentLengthM)
{
    if (!(segmentLengthM > 0.0) || !std::isfinite(segmentLengthM))
        throw ConfigError(fmt::format("segment length must be positive, got {}", segmentLengthM));

    std::vector<Segment> segments;
    if (positions.empty())
        return segments;

    std::size_t start = 0;
    for (std::size_t i = 1; i <= positions.size(); ++i) {
        const bool atEnd = i == positions.size();
        if (atEnd || positions[i] >= positions[start] + segmentLengthM) {
            segments.push_back(Segment{segments.size(), start, i, positions[start],
                                       positions[i - 1]});
            start = i;
        }
    }
    return segments;
}

std::vector<Segment> segmentTraversal(const Traversal& traversal, double segmentLengthM)
{
    return segmentPositions(traversal.positions(), segmentLengthM);
}

SampledReference subsamplePositions(std::span<const double> positions, int rateK)
{
    if (rateK < 1)
        throw ConfigError(fmt::format("sampling stride must be >= 1, got {}", rateK));
    SampledReference view;
    view.rateK = rateK;
    const auto stride = static_cast<std::size_t>(rateK);
    const std::size_t count = (positions.size() + stride - 1) / stride;
    view.keptFrameIndices.reserve(count);
    view.keptPositionsM.reserve(count);
    for (std::size_t i = 0; i < positions.size(); i += stride) {
        view.keptFrameIndices.push_back(i);
        view.keptPositionsM.push_back(positions[i]);
    }
    return view;
}

SampledReference subsample(const Traversal& traversal, int rateK)
{
    return subsamplePositions(traversal.positions(), rateK);
}

} // namespace densel
