#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "densel/ingest.hpp"
#include "densel/segmentation.hpp"

namespace densel {

struct MatchEntry
{
    std::size_t queryIndex;
    double queryPositionM;
    std::size_t top1RefFrame; // frame index in the full-density reference traversal
    double top1RefPositionM;
    double top1Score;
};

/* Top-1 retrieval result for every query against one sampled reference. */
struct MatchTable
{
    int rateK = 1;
    std::vector<MatchEntry> entries; // ordered by query index

    std::size_t size() const noexcept { return entries.size(); }
    std::vector<double> top1Positions() const;
};

struct SegmentRecall
{
    std::size_t segmentIndex;
    int rateK;
    double recallAt1;
    std::size_t nQueries;
};

struct SegmentRecallResult
{
    std::vector<SegmentRecall> recalls;
    std::size_t excludedSegments = 0; // segments with no queries
};

enum class RarKind { Predicted, Achieved };

struct RarReport
{
    int rateK;
    double rTarget;
    double rar;
    RarKind kind;
};

std::string_view toString(RarKind kind);

/*
 * Pairwise distances between query descriptors and the kept reference
 * descriptors. Cosine distance is 1 - cos(a, b); euclidean is |a - b|.
 * Each entry is computed independently of the column subset, so a kept
 * reference scores identically under every stride.
 */
DistanceMatrix computeDistances(const Traversal& queries, const Traversal& refs,
                                const SampledReference& view, DistanceMetric metric);

double cosineDistance(std::span<const float> a, std::span<const float> b);
double euclideanDistance(std::span<const float> a, std::span<const float> b);

/* Argmin per row; ties go to the lowest column. */
std::size_t argminColumn(std::span<const float> row);

MatchTable top1(const DistanceMatrix& matrix, const SampledReference& view);

/*
 * A query is correct when |top1 - gt| <= tau. Query membership in a segment
 * is by query index range; segments with no matched query are excluded.
 */
SegmentRecallResult segmentRecallAt1(const MatchTable& matches, std::span<const Segment> segments,
                                     std::span<const double> gtPositions, double toleranceM);

bool isCorrect(const MatchEntry& entry, std::span<const double> gtPositions, double toleranceM);

/* Fraction of values >= rTarget. Throws ValidationError on empty input. */
double rar(std::span<const double> recalls, double rTarget);
double rar(std::span<const SegmentRecall> recalls, double rTarget);

double rarDeviation(double achieved, double achievable);

/* Mean absolute value. Throws ValidationError on empty input. */
double mad(std::span<const double> deviations);

double meanRecall(const MatchTable& matches, std::span<const double> gtPositions,
                  double toleranceM);

std::vector<double> recallValues(std::span<const SegmentRecall> recalls);

std::string segmentRecallCsv(std::span<const SegmentRecall> recalls, bool header = true);
std::string rarReportCsv(std::span<const RarReport> reports, bool header = true);

} // namespace densel
