#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "densel/ingest.hpp"
#include "densel/metrics.hpp"

namespace densel {

/*
 * Records which traversal pairs were touched and in what order. Used to
 * prove that the held-out query traversal is never read while training.
 */
class AccessLog
{
public:
    struct Event
    {
        std::string source;
        std::string action;
    };

    void record(std::string source, std::string action);
    std::vector<Event> events() const;
    /* Index of the first event from `source`, or events().size() when absent. */
    std::size_t firstIndexOf(const std::string& source) const;
    std::size_t firstIndexOfAction(const std::string& action) const;

private:
    mutable std::mutex mMutex;
    std::vector<Event> mEvents;
};

/*
 * Source of top-1 matches between a query traversal and a reference
 * traversal subsampled at stride k. Query j corresponds to reference frame j,
 * so groundTruthPositions()[j] is the full-density reference position of j.
 */
class MatchProvider
{
public:
    virtual ~MatchProvider() = default;

    virtual std::string name() const = 0;
    virtual std::span<const double> queryPositions() const = 0;
    virtual std::span<const double> groundTruthPositions() const = 0;
    virtual std::span<const double> referencePositions() const = 0;
    virtual MatchTable matches(int rateK) const = 0;
};

using MatchProviderPtr = std::shared_ptr<const MatchProvider>;

/* Matches computed from descriptors with the configured metric. */
class DescriptorMatchProvider final : public MatchProvider
{
public:
    DescriptorMatchProvider(std::shared_ptr<const Traversal> refs,
                            std::shared_ptr<const Traversal> queries, DistanceMetric metric);

    std::string name() const override;
    std::span<const double> queryPositions() const override { return mQueries->positions(); }
    std::span<const double> groundTruthPositions() const override { return mRefs->positions(); }
    std::span<const double> referencePositions() const override { return mRefs->positions(); }
    MatchTable matches(int rateK) const override;

private:
    std::shared_ptr<const Traversal> mRefs;
    std::shared_ptr<const Traversal> mQueries;
    DistanceMetric mMetric;
};

/* Matches read off a precomputed full-density query x reference matrix. */
class MatrixMatchProvider final : public MatchProvider
{
public:
    MatrixMatchProvider(std::string name, DistanceMatrix matrix);

    std::string name() const override { return mName; }
    std::span<const double> queryPositions() const override { return mMatrix.queryPositions; }
    std::span<const double> groundTruthPositions() const override { return mMatrix.refPositions; }
    std::span<const double> referencePositions() const override { return mMatrix.refPositions; }
    MatchTable matches(int rateK) const override;

private:
    std::string mName;
    DistanceMatrix mMatrix;
};

/* Precomputed per-rate match tables. */
class TableMatchProvider final : public MatchProvider
{
public:
    TableMatchProvider(std::string name, std::map<int, MatchTable> tables,
                       std::vector<double> queryPositions, std::vector<double> referencePositions);

    std::string name() const override { return mName; }
    std::span<const double> queryPositions() const override { return mQueryPositions; }
    std::span<const double> groundTruthPositions() const override { return mRefPositions; }
    std::span<const double> referencePositions() const override { return mRefPositions; }
    MatchTable matches(int rateK) const override;

    const std::map<int, MatchTable>& tables() const { return mTables; }

private:
    std::string mName;
    std::map<int, MatchTable> mTables;
    std::vector<double> mQueryPositions;
    std::vector<double> mRefPositions;
};

/* Defers loading until first use and logs every access. */
class LazyMatchProvider final : public MatchProvider
{
public:
    using Factory = std::function<MatchProviderPtr()>;

    LazyMatchProvider(std::string name, Factory factory, std::shared_ptr<AccessLog> log = nullptr);

    std::string name() const override { return mName; }
    std::span<const double> queryPositions() const override;
    std::span<const double> groundTruthPositions() const override;
    std::span<const double> referencePositions() const override;
    MatchTable matches(int rateK) const override;

    bool loaded() const;

private:
    const MatchProvider& get(const char* action) const;

    std::string mName;
    Factory mFactory;
    std::shared_ptr<AccessLog> mLog;
    mutable std::mutex mMutex;
    mutable MatchProviderPtr mLoaded;
};

/*
 * The four traversal pairings used by the pipeline. The swapped pairs are
 * optional and only needed for the reference-swap ablation.
 */
struct Scenario
{
    MatchProviderPtr training;          // queries Ref2, references Ref1
    MatchProviderPtr evaluation;        // queries Qry1, references Ref1
    MatchProviderPtr swappedTraining;   // queries Ref1, references Ref2
    MatchProviderPtr swappedEvaluation; // queries Qry1, references Ref2

    bool hasSwap() const { return swappedTraining && swappedEvaluation; }
};

Scenario scenarioFromTraversals(std::shared_ptr<const Traversal> ref1,
                                std::shared_ptr<const Traversal> ref2,
                                std::shared_ptr<const Traversal> qry1, DistanceMetric metric);

/* CSV with one row per (rate, query); see writeMatchTables for columns. */
std::string matchTablesCsv(const std::map<int, MatchTable>& tables,
                           std::span<const double> gtPositions);
void writeMatchTables(const std::filesystem::path& path, const TableMatchProvider& provider);
std::shared_ptr<TableMatchProvider> loadMatchTables(const std::filesystem::path& path,
                                                    std::string name);

} // namespace densel
