#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "densel/config.hpp"

namespace densel {

enum class TraversalRole { Ref1, Ref2, Qry1 };

enum class DistanceMetric { Cosine, Euclidean };

std::string_view toString(TraversalRole role);
std::string_view toString(DistanceMetric metric);
DistanceMetric parseDistanceMetric(std::string_view text);

/* A view of one frame of a traversal. */
struct FrameRecord
{
    std::size_t index;
    double positionM;
    std::span<const float> descriptor; // empty in positions-only mode
};

/*
 * An ordered pass over the route.
 *
 * Positions are meters along the route, finite, non-negative and
 * non-decreasing. Descriptors are stored row-major with a common
 * dimensionality; dimension 0 means the traversal carries positions only.
 * Construction validates every invariant and throws ValidationError.
 */
class Traversal
{
public:
    Traversal(std::string routeId, TraversalRole role, std::vector<double> positions,
              std::vector<float> descriptors, std::size_t descriptorDim);

    /* Positions default to index * spacing when not supplied. */
    static Traversal fromDescriptors(std::string routeId, TraversalRole role,
                                     std::vector<float> descriptors, std::size_t descriptorDim,
                                     std::optional<std::vector<double>> positions = std::nullopt,
                                     double spacingM = 1.0);

    static Traversal positionsOnly(std::string routeId, TraversalRole role,
                                   std::vector<double> positions);

    std::size_t size() const noexcept { return mPositions.size(); }
    std::size_t descriptorDim() const noexcept { return mDim; }
    bool hasDescriptors() const noexcept { return mDim != 0; }

    const std::string& routeId() const noexcept { return mRouteId; }
    TraversalRole role() const noexcept { return mRole; }

    std::span<const double> positions() const noexcept { return mPositions; }
    std::span<const float> descriptors() const noexcept { return mDescriptors; }
    std::span<const float> descriptor(std::size_t index) const;
    FrameRecord frame(std::size_t index) const;

    /* Same frames under a different role (used when swapping references). */
    Traversal withRole(TraversalRole role) const;

private:
    std::string mRouteId;
    TraversalRole mRole;
    std::vector<double> mPositions;
    std::vector<float> mDescriptors;
    std::size_t mDim;
};

/* Dense query x reference score grid, row-major. */
struct DistanceMatrix
{
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> scores;
    std::vector<double> refPositions;   // one per column
    std::vector<double> queryPositions; // one per row

    float at(std::size_t row, std::size_t col) const { return scores[row * cols + col]; }
    std::span<const float> row(std::size_t r) const
    {
        return std::span<const float>(scores).subspan(r * cols, cols);
    }

    /* Throws ValidationError naming the first offending (row, col). */
    void validate() const;
};

struct DatasetConfig
{
    double segmentLengthM = 200.0;
    double gtToleranceM = 50.0;
    std::vector<int> rateGrid{1, 2, 3, 4, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50};
    DistanceMetric metric = DistanceMetric::Cosine;

    void validate() const;

    /* Reads segment_length_d, gt_tolerance_tau, rate_grid, distance_metric. */
    static DatasetConfig fromConfig(const KeyValueConfig& config);
    static DatasetConfig fromConfig(const KeyValueConfig& config, const DatasetConfig& defaults);
    static DatasetConfig load(const std::filesystem::path& path);
    void writeTo(KeyValueConfig& config) const;
};

struct CorrespondenceReport
{
    bool pass;
    std::size_t lengthA;
    std::size_t lengthB;
    std::size_t delta;
};

CorrespondenceReport checkCorrespondence(std::size_t lengthA, std::size_t lengthB);
CorrespondenceReport checkCorrespondence(const Traversal& a, const Traversal& b);

/* Canonical descriptor file ("DMAP" v1). */
std::vector<std::uint8_t> encodeTraversal(const Traversal& traversal);
Traversal decodeTraversal(std::span<const std::uint8_t> bytes, TraversalRole role,
                          std::string routeId = "route");
void writeTraversal(const std::filesystem::path& path, const Traversal& traversal);
Traversal loadTraversal(const std::filesystem::path& path, TraversalRole role);

/* Canonical matrix file ("DMTX" v1). */
std::vector<std::uint8_t> encodeDistanceMatrix(const DistanceMatrix& matrix);
DistanceMatrix decodeDistanceMatrix(std::span<const std::uint8_t> bytes);
void writeDistanceMatrix(const std::filesystem::path& path, const DistanceMatrix& matrix);
DistanceMatrix loadDistanceMatrix(const std::filesystem::path& path);

std::vector<std::uint8_t> readFileBytes(const std::filesystem::path& path);
/* Writes to a temporary sibling and renames over the target. */
void writeFileBytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void writeTextFile(const std::filesystem::path& path, std::string_view text);

} // namespace densel
