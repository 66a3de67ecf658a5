#include "densel/matching.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "densel/errors.hpp"
#include "densel/segmentation.hpp"

namespace densel {

void AccessLog::record(std::string source, std::string action)
{
    std::lock_guard lock(mMutex);
    mEvents.push_back(Event{std::move(source), std::move(action)});
}

std::vector<AccessLog::Event> AccessLog::events() const
{
    std::lock_guard lock(mMutex);
    return mEvents;
}

std::size_t AccessLog::firstIndexOf(const std::string& source) const
{
    std::lock_guard lock(mMutex);
    for (std::size_t i = 0; i < mEvents.size(); ++i)
        if (mEvents[i].source == source)
            return i;
    return mEvents.size();
}

std::size_t AccessLog::firstIndexOfAction(const std::string& action) const
{
    std::lock_guard lock(mMutex);
    for (std::size_t i = 0; i < mEvents.size(); ++i)
        if (mEvents[i].action == action)
            return i;
    return mEvents.size();
}

namespace {

void validateTable(const MatchTable& table, int rateK, std::size_t queryCount,
                   std::span<const double> refPositions, const std::string& name)
{
    if (table.rateK != rateK)
        throw ValidationError(fmt::format("{}: table for rate {} is labelled {}", name, rateK,
                                          table.rateK));
    if (table.entries.size() != queryCount)
        throw ValidationError(fmt::format("{}: rate {} table has {} entries for {} queries", name,
                                          rateK, table.entries.size(), queryCount));
    for (std::size_t q = 0; q < table.entries.size(); ++q) {
        const auto& e = table.entries[q];
        if (e.queryIndex != q)
            throw ValidationError(fmt::format("{}: rate {} row {} has query index {}", name, rateK,
                                              q, e.queryIndex));
        if (e.top1RefFrame >= refPositions.size() ||
            e.top1RefFrame % static_cast<std::size_t>(rateK) != 0)
            throw ValidationError(fmt::format("{}: rate {} query {} matched frame {} which is not kept",
                                              name, rateK, q, e.top1RefFrame));
        if (e.top1RefPositionM != refPositions[e.top1RefFrame])
            throw ValidationError(fmt::format(
                "{}: rate {} query {} top-1 position {} disagrees with reference frame {}", name,
                rateK, q, e.top1RefPositionM, e.top1RefFrame));
    }
}

} // namespace

DescriptorMatchProvider::DescriptorMatchProvider(std::shared_ptr<const Traversal> refs,
                                                 std::shared_ptr<const Traversal> queries,
                                                 DistanceMetric metric) :
    mRefs(std::move(refs)), mQueries(std::move(queries)), mMetric(metric)
{
    const auto report = checkCorrespondence(*mRefs, *mQueries);
    if (!report.pass)
        throw ValidationError(fmt::format("{} has {} frames but {} has {}", toString(mRefs->role()),
                                          report.lengthA, toString(mQueries->role()),
                                          report.lengthB));
    if (mRefs->descriptorDim() != mQueries->descriptorDim())
        throw ValidationError(fmt::format("descriptor dimension mismatch: {} vs {}",
                                          mRefs->descriptorDim(), mQueries->descriptorDim()));
}

std::string DescriptorMatchProvider::name() const
{
    return fmt::format("{}/{}", toString(mRefs->role()), toString(mQueries->role()));
}

MatchTable DescriptorMatchProvider::matches(int rateK) const
{
    const auto view = subsample(*mRefs, rateK);
    return top1(computeDistances(*mQueries, *mRefs, view, mMetric), view);
}

MatrixMatchProvider::MatrixMatchProvider(std::string name, DistanceMatrix matrix) :
    mName(std::move(name)), mMatrix(std::move(matrix))
{
    mMatrix.validate();
    const auto report = checkCorrespondence(mMatrix.rows, mMatrix.cols);
    if (!report.pass)
        throw ValidationError(fmt::format("{}: matrix is {} x {}; queries and references must "
                                          "correspond one-to-one",
                                          mName, mMatrix.rows, mMatrix.cols));
}

MatchTable MatrixMatchProvider::matches(int rateK) const
{
    const auto view = subsamplePositions(mMatrix.refPositions, rateK);
    if (view.size() == 0)
        throw ValidationError(fmt::format("{}: no reference columns", mName));
    MatchTable table;
    table.rateK = rateK;
    table.entries.reserve(mMatrix.rows);
    for (std::size_t q = 0; q < mMatrix.rows; ++q) {
        const auto row = mMatrix.row(q);
        std::size_t best = 0;
        for (std::size_t c = 1; c < view.size(); ++c)
            if (row[view.keptFrameIndices[c]] < row[view.keptFrameIndices[best]])
                best = c;
        const auto frame = view.keptFrameIndices[best];
        table.entries.push_back(MatchEntry{q, mMatrix.queryPositions[q], frame,
                                           mMatrix.refPositions[frame], row[frame]});
    }
    return table;
}

TableMatchProvider::TableMatchProvider(std::string name, std::map<int, MatchTable> tables,
                                       std::vector<double> queryPositions,
                                       std::vector<double> referencePositions) :
    mName(std::move(name)),
    mTables(std::move(tables)),
    mQueryPositions(std::move(queryPositions)),
    mRefPositions(std::move(referencePositions))
{
    const auto report = checkCorrespondence(mQueryPositions.size(), mRefPositions.size());
    if (!report.pass)
        throw ValidationError(fmt::format("{}: {} queries but {} references", mName,
                                          report.lengthA, report.lengthB));
    // reuse traversal validation for both position arrays
    (void)Traversal::positionsOnly(mName, TraversalRole::Qry1, mQueryPositions);
    (void)Traversal::positionsOnly(mName, TraversalRole::Ref1, mRefPositions);
    for (const auto& [rate, table] : mTables)
        validateTable(table, rate, mQueryPositions.size(), mRefPositions, mName);
}

MatchTable TableMatchProvider::matches(int rateK) const
{
    const auto it = mTables.find(rateK);
    if (it == mTables.end())
        throw ValidationError(fmt::format("{}: no match table for rate {}", mName, rateK));
    return it->second;
}

LazyMatchProvider::LazyMatchProvider(std::string name, Factory factory,
                                     std::shared_ptr<AccessLog> log) :
    mName(std::move(name)), mFactory(std::move(factory)), mLog(std::move(log))
{
}

bool LazyMatchProvider::loaded() const
{
    std::lock_guard lock(mMutex);
    return mLoaded != nullptr;
}

const MatchProvider& LazyMatchProvider::get(const char* action) const
{
    std::lock_guard lock(mMutex);
    if (!mLoaded) {
        if (mLog)
            mLog->record(mName, "load");
        mLoaded = mFactory();
        if (!mLoaded)
            throw InvariantError(fmt::format("{}: loader returned nothing", mName));
    }
    if (mLog)
        mLog->record(mName, action);
    return *mLoaded;
}

std::span<const double> LazyMatchProvider::queryPositions() const
{
    return get("query_positions").queryPositions();
}

std::span<const double> LazyMatchProvider::groundTruthPositions() const
{
    return get("ground_truth").groundTruthPositions();
}

std::span<const double> LazyMatchProvider::referencePositions() const
{
    return get("reference_positions").referencePositions();
}

MatchTable LazyMatchProvider::matches(int rateK) const
{
    return get("matches").matches(rateK);
}

Scenario scenarioFromTraversals(std::shared_ptr<const Traversal> ref1,
                                std::shared_ptr<const Traversal> ref2,
                                std::shared_ptr<const Traversal> qry1, DistanceMetric metric)
{
    Scenario s;
    s.training = std::make_shared<DescriptorMatchProvider>(ref1, ref2, metric);
    s.evaluation = std::make_shared<DescriptorMatchProvider>(ref1, qry1, metric);
    s.swappedTraining = std::make_shared<DescriptorMatchProvider>(ref2, ref1, metric);
    s.swappedEvaluation = std::make_shared<DescriptorMatchProvider>(ref2, qry1, metric);
    return s;
}

std::string matchTablesCsv(const std::map<int, MatchTable>& tables,
                           std::span<const double> gtPositions)
{
    std::string out =
        "rate_k,query_index,query_position_m,gt_position_m,top1_ref_frame,top1_ref_position_m,"
        "top1_score\n";
    for (const auto& [rate, table] : tables)
        for (const auto& e : table.entries)
            out += fmt::format("{},{},{:.17g},{:.17g},{},{:.17g},{:.9g}\n", rate, e.queryIndex,
                               e.queryPositionM, gtPositions[e.queryIndex], e.top1RefFrame,
                               e.top1RefPositionM, e.top1Score);
    return out;
}

void writeMatchTables(const std::filesystem::path& path, const TableMatchProvider& provider)
{
    writeTextFile(path, matchTablesCsv(provider.tables(), provider.groundTruthPositions()));
}

namespace {

template <typename T>
T parseField(std::string_view text, std::size_t lineNo, std::size_t offset, const char* column)
{
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw ParseError(fmt::format("line {}: bad {} '{}'", lineNo, column, text), offset);
    return value;
}

} // namespace

std::shared_ptr<TableMatchProvider> loadMatchTables(const std::filesystem::path& path,
                                                    std::string name)
{
    const auto bytes = readFileBytes(path);
    const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());

    std::map<int, MatchTable> tables;
    std::vector<double> queryPositions;
    std::vector<double> gtPositions;
    std::size_t pos = 0;
    std::size_t lineNo = 0;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos)
            eol = text.size();
        auto line = text.substr(pos, eol - pos);
        const auto lineOffset = pos;
        pos = eol + 1;
        ++lineNo;
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        if (lineNo == 1 || line.empty())
            continue;

        std::array<std::string_view, 7> fields{};
        std::size_t start = 0;
        for (std::size_t f = 0; f < fields.size(); ++f) {
            const auto comma = line.find(',', start);
            if ((comma == std::string_view::npos) != (f + 1 == fields.size()))
                throw ParseError(fmt::format("line {}: expected 7 columns", lineNo), lineOffset);
            fields[f] = line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                           : comma - start);
            start = comma + 1;
        }
        const auto rate = parseField<int>(fields[0], lineNo, lineOffset, "rate_k");
        MatchEntry e{};
        e.queryIndex = parseField<std::size_t>(fields[1], lineNo, lineOffset, "query_index");
        e.queryPositionM = parseField<double>(fields[2], lineNo, lineOffset, "query_position_m");
        const auto gt = parseField<double>(fields[3], lineNo, lineOffset, "gt_position_m");
        e.top1RefFrame = parseField<std::size_t>(fields[4], lineNo, lineOffset, "top1_ref_frame");
        e.top1RefPositionM = parseField<double>(fields[5], lineNo, lineOffset, "top1_ref_position_m");
        e.top1Score = parseField<double>(fields[6], lineNo, lineOffset, "top1_score");

        auto& table = tables[rate];
        table.rateK = rate;
        table.entries.push_back(e);
        if (e.queryIndex == queryPositions.size()) {
            queryPositions.push_back(e.queryPositionM);
            gtPositions.push_back(gt);
        } else if (e.queryIndex > queryPositions.size()) {
            throw ParseError(fmt::format("line {}: query index {} out of order", lineNo, e.queryIndex),
                             lineOffset);
        } else if (queryPositions[e.queryIndex] != e.queryPositionM ||
                   gtPositions[e.queryIndex] != gt) {
            throw ParseError(fmt::format("line {}: positions of query {} disagree across rates",
                                         lineNo, e.queryIndex),
                             lineOffset);
        }
    }
    return std::make_shared<TableMatchProvider>(std::move(name), std::move(tables),
                                                std::move(queryPositions), std::move(gtPositions));
}

} // namespace densel
