#include "densel/metrics.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "densel/errors.hpp"

namespace densel {

std::vector<double> MatchTable::top1Positions() const
{
    std::vector<double> out;
    out.reserve(entries.size());
    for (const auto& e : entries)
        out.push_back(e.top1RefPositionM);
    return out;
}

std::string_view toString(RarKind kind)
{
    return kind == RarKind::Predicted ? "predicted" : "achieved";
}

double cosineDistance(std::span<const float> a, std::span<const float> b)
{
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

double euclideanDistance(std::span<const float> a, std::span<const float> b)
{
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = static_cast<double>(a[i]) - b[i];
        sum += diff * diff;
    }
    return std::sqrt(sum);
}

namespace {

bool hasZeroNorm(std::span<const float> v)
{
    for (const float x : v)
        if (x != 0.0F)
            return false;
    return true;
}

} // namespace

DistanceMatrix computeDistances(const Traversal& queries, const Traversal& refs,
                                const SampledReference& view, DistanceMetric metric)
{
    if (!queries.hasDescriptors() || !refs.hasDescriptors())
        throw ValidationError("distance computation needs descriptors on both traversals");
    if (queries.descriptorDim() != refs.descriptorDim())
        throw ValidationError(fmt::format("descriptor dimension mismatch: queries {} vs refs {}",
                                          queries.descriptorDim(), refs.descriptorDim()));
    for (const auto idx : view.keptFrameIndices)
        if (idx >= refs.size())
            throw ValidationError(fmt::format("kept frame {} outside reference traversal", idx));

    if (metric == DistanceMetric::Cosine) {
        for (std::size_t q = 0; q < queries.size(); ++q)
            if (hasZeroNorm(queries.descriptor(q)))
                throw ValidationError(
                    fmt::format("query frame {} has a zero-norm descriptor", q));
        for (const auto idx : view.keptFrameIndices)
            if (hasZeroNorm(refs.descriptor(idx)))
                throw ValidationError(
                    fmt::format("reference frame {} has a zero-norm descriptor", idx));
    }

    DistanceMatrix m;
    m.rows = queries.size();
    m.cols = view.size();
    m.scores.resize(m.rows * m.cols);
    m.queryPositions.assign(queries.positions().begin(), queries.positions().end());
    m.refPositions = view.keptPositionsM;
    for (std::size_t q = 0; q < m.rows; ++q) {
        const auto qd = queries.descriptor(q);
        for (std::size_t c = 0; c < m.cols; ++c) {
            const auto rd = refs.descriptor(view.keptFrameIndices[c]);
            const double d = metric == DistanceMetric::Cosine ? cosineDistance(qd, rd)
                                                              : euclideanDistance(qd, rd);
            m.scores[q * m.cols + c] = static_cast<float>(d);
        }
    }
    return m;
}

std::size_t argminColumn(std::span<const float> row)
{
    if (row.empty())
        throw ValidationError("cannot take top-1 over zero reference columns");
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
        if (row[c] < row[best])
            best = c;
    return best;
}

MatchTable top1(const DistanceMatrix& matrix, const SampledReference& view)
{
    if (matrix.cols == 0)
        throw ValidationError("cannot take top-1 over zero reference columns");
    if (matrix.cols != view.size())
        throw ValidationError(fmt::format("matrix has {} columns but the sampled reference keeps {}",
                                          matrix.cols, view.size()));
    MatchTable table;
    table.rateK = view.rateK;
    table.entries.reserve(matrix.rows);
    for (std::size_t q = 0; q < matrix.rows; ++q) {
        const auto c = argminColumn(matrix.row(q));
        table.entries.push_back(MatchEntry{q, matrix.queryPositions[q], view.keptFrameIndices[c],
                                           view.keptPositionsM[c], matrix.at(q, c)});
    }
    return table;
}

bool isCorrect(const MatchEntry& entry, std::span<const double> gtPositions, double toleranceM)
{
    return std::abs(entry.top1RefPositionM - gtPositions[entry.queryIndex]) <= toleranceM;
}

SegmentRecallResult segmentRecallAt1(const MatchTable& matches, std::span<const Segment> segments,
                                     std::span<const double> gtPositions, double toleranceM)
{
    for (const auto& e : matches.entries)
        if (e.queryIndex >= gtPositions.size())
            throw ValidationError(
                fmt::format("query {} has no ground-truth position ({} available)", e.queryIndex,
                            gtPositions.size()));

    SegmentRecallResult result;
    for (const auto& seg : segments) {
        std::size_t n = 0;
        std::size_t correct = 0;
        for (std::size_t q = seg.startFrame; q < seg.endFrameExclusive && q < matches.size(); ++q) {
            const auto& e = matches.entries[q];
            if (e.queryIndex != q)
                throw ValidationError(fmt::format("match table entry {} carries query index {}", q,
                                                  e.queryIndex));
            ++n;
            if (isCorrect(e, gtPositions, toleranceM))
                ++correct;
        }
        if (n == 0) {
            ++result.excludedSegments;
            continue;
        }
        result.recalls.push_back(SegmentRecall{seg.segmentIndex, matches.rateK,
                                               static_cast<double>(correct) / static_cast<double>(n),
                                               n});
    }
    return result;
}

double rar(std::span<const double> recalls, double rTarget)
{
    if (recalls.empty())
        throw ValidationError("RAR needs at least one segment");
    std::size_t met = 0;
    for (const double r : recalls)
        if (r >= rTarget)
            ++met;
    return static_cast<double>(met) / static_cast<double>(recalls.size());
}

double rar(std::span<const SegmentRecall> recalls, double rTarget)
{
    const auto values = recallValues(recalls);
    return rar(std::span<const double>(values), rTarget);
}

double rarDeviation(double achieved, double achievable)
{
    return achieved - achievable;
}

double mad(std::span<const double> deviations)
{
    if (deviations.empty())
        throw ValidationError("MAD needs at least one deviation");
    double sum = 0.0;
    for (const double d : deviations)
        sum += std::abs(d);
    return sum / static_cast<double>(deviations.size());
}

double meanRecall(const MatchTable& matches, std::span<const double> gtPositions,
                  double toleranceM)
{
    if (matches.entries.empty())
        throw ValidationError("mean recall needs at least one query");
    std::size_t correct = 0;
    for (const auto& e : matches.entries)
        if (isCorrect(e, gtPositions, toleranceM))
            ++correct;
    return static_cast<double>(correct) / static_cast<double>(matches.entries.size());
}

std::vector<double> recallValues(std::span<const SegmentRecall> recalls)
{
    std::vector<double> out;
    out.reserve(recalls.size());
    for (const auto& r : recalls)
        out.push_back(r.recallAt1);
    return out;
}

std::string segmentRecallCsv(std::span<const SegmentRecall> recalls, bool header)
{
    std::string out = header ? "segment_index,rate_k,recall,n_queries\n" : "";
    for (const auto& r : recalls)
        out += fmt::format("{},{},{:.6f},{}\n", r.segmentIndex, r.rateK, r.recallAt1, r.nQueries);
    return out;
}

std::string rarReportCsv(std::span<const RarReport> reports, bool header)
{
    std::string out = header ? "rate_k,r_target,rar,kind\n" : "";
    for (const auto& r : reports)
        out += fmt::format("{},{:.6f},{:.6f},{}\n", r.rateK, r.rTarget, r.rar, toString(r.kind));
    return out;
}

} // namespace densel
