#include "densel/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "densel/errors.hpp"

namespace densel {

namespace {

/* Re-throws library errors with a step label, keeping the error category. */
template <typename Fn>
auto labelled(const std::string& label, Fn&& fn) -> decltype(fn())
{
    try {
        return fn();
    } catch (const ParseError& e) {
        throw ParseError(fmt::format("{}: {}", label, e.what()), e.byteOffset());
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}: {}", label, e.what()));
    } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("{}: {}", label, e.what()));
    } catch (const IoError& e) {
        throw IoError(fmt::format("{}: {}", label, e.what()));
    } catch (const InvariantError& e) {
        throw InvariantError(fmt::format("{}: {}", label, e.what()));
    }
}

std::shared_ptr<const Traversal> borrow(const Traversal& t)
{
    return std::shared_ptr<const Traversal>(&t, [](const Traversal*) { });
}

bool inGrid(const DatasetConfig& cfg, int rate)
{
    return std::find(cfg.rateGrid.begin(), cfg.rateGrid.end(), rate) != cfg.rateGrid.end();
}

} // namespace

std::map<int, double> Phase1Model::predictedRarByRate(double rTarget) const
{
    std::map<int, double> out;
    for (const auto& [rate, analysis] : rates)
        out[rate] = predictedRar(analysis.predictions, rTarget);
    return out;
}

Phase1Model trainPhase1(const MatchProvider& training, const DatasetConfig& cfg, double lambda)
{
    cfg.validate();
    Phase1Model model;
    model.segments = labelled("phase1 segmentation", [&] {
        return segmentPositions(training.queryPositions(), cfg.segmentLengthM);
    });
    const auto gt = training.groundTruthPositions();

    std::map<int, TrainingSet> sets;
    for (const int rate : cfg.rateGrid) {
        const auto table = labelled(fmt::format("phase1 step 1 (rate {})", rate),
                                    [&] { return training.matches(rate); });
        auto analysis = labelled(fmt::format("phase1 step 2 (rate {})", rate), [&] {
            auto recall = segmentRecallAt1(table, model.segments, gt, cfg.gtToleranceM);
            auto feats = extractFeatures(table, model.segments, cfg.gtToleranceM, cfg.segmentLengthM);
            if (recall.excludedSegments != feats.excludedSegments)
                throw InvariantError("feature and recall exclusions disagree");
            model.excludedSegments = recall.excludedSegments;
            return RateAnalysis{rate, std::move(feats.features), std::move(recall.recalls), {}};
        });
        sets.emplace(rate, makeTrainingSet(rate, analysis.features, analysis.recalls));
        model.rates.emplace(rate, std::move(analysis));
    }

    model.predictors = labelled("phase1 step 3", [&] { return trainAllRates(sets, lambda); });

    for (auto& [rate, analysis] : model.rates) {
        const auto& predictor = model.predictors.at(rate);
        analysis.predictions.reserve(analysis.features.size());
        for (const auto& f : analysis.features)
            analysis.predictions.push_back(predictor.predict(f));
    }
    return model;
}

SelectionResult selectFromModel(const Phase1Model& model, const SelectionConfig& sel)
{
    sel.validate();
    const auto rarByRate = labelled("phase1 step 5", [&] {
        return model.predictedRarByRate(sel.rTarget);
    });
    return labelled("phase1 step 6", [&] { return selectRate(rarByRate, sel.rarTarget); });
}

Phase1Result phase1(const MatchProvider& training, const DatasetConfig& cfg,
                    const SelectionConfig& sel, double lambda)
{
    sel.validate();
    Phase1Result result;
    result.model = trainPhase1(training, cfg, lambda);
    result.selection = selectFromModel(result.model, sel);
    result.curated = labelled("phase1 step 7", [&] {
        return subsamplePositions(training.referencePositions(), result.selection.chosenRate);
    });
    return result;
}

Phase1Result phase1(const Traversal& ref1, const Traversal& ref2, const DatasetConfig& cfg,
                    const SelectionConfig& sel, double lambda)
{
    const auto provider = labelled("phase1 correspondence", [&] {
        return DescriptorMatchProvider(borrow(ref1), borrow(ref2), cfg.metric);
    });
    return phase1(provider, cfg, sel, lambda);
}

Phase2Result phase2(const MatchProvider& evaluation, const SampledReference& curated,
                    const DatasetConfig& cfg, const SelectionConfig& sel)
{
    cfg.validate();
    sel.validate();
    const auto expected = subsamplePositions(evaluation.referencePositions(), curated.rateK);
    if (expected.keptFrameIndices != curated.keptFrameIndices)
        throw ValidationError(fmt::format("phase2: curated reference does not match stride {} of {}",
                                          curated.rateK, evaluation.name()));

    const auto segments = segmentPositions(evaluation.queryPositions(), cfg.segmentLengthM);
    const auto table = labelled("phase2 matching", [&] { return evaluation.matches(curated.rateK); });
    auto recall = segmentRecallAt1(table, segments, evaluation.groundTruthPositions(),
                                   cfg.gtToleranceM);
    Phase2Result result;
    result.rateK = curated.rateK;
    result.achievedRar = rar(std::span<const SegmentRecall>(recall.recalls), sel.rTarget);
    result.meanRecall = meanRecall(table, evaluation.groundTruthPositions(), cfg.gtToleranceM);
    result.recalls = std::move(recall.recalls);
    result.excludedSegments = recall.excludedSegments;
    return result;
}

Phase2Result phase2(const SampledReference& curated, const Traversal& ref1, const Traversal& qry1,
                    const DatasetConfig& cfg, const SelectionConfig& sel)
{
    const auto provider = labelled("phase2 correspondence", [&] {
        return DescriptorMatchProvider(borrow(ref1), borrow(qry1), cfg.metric);
    });
    return phase2(provider, curated, cfg, sel);
}

EvaluationCache::EvaluationCache(const MatchProvider& evaluation, const DatasetConfig& cfg) :
    mEvaluation(evaluation), mCfg(cfg)
{
}

const std::vector<Segment>& EvaluationCache::segments()
{
    if (!mSegmented) {
        mSegments = segmentPositions(mEvaluation.queryPositions(), mCfg.segmentLengthM);
        mSegmented = true;
    }
    return mSegments;
}

const SegmentRecallResult& EvaluationCache::recalls(int rateK)
{
    auto it = mRecalls.find(rateK);
    if (it == mRecalls.end()) {
        const auto& segs = segments();
        const auto table = labelled(fmt::format("phase2 matching (rate {})", rateK),
                                    [&] { return mEvaluation.matches(rateK); });
        it = mRecalls
                 .emplace(rateK, segmentRecallAt1(table, segs, mEvaluation.groundTruthPositions(),
                                                  mCfg.gtToleranceM))
                 .first;
    }
    return it->second;
}

double EvaluationCache::achievedRar(int rateK, double rTarget)
{
    return rar(std::span<const SegmentRecall>(recalls(rateK).recalls), rTarget);
}

std::map<int, double> EvaluationCache::achievedRarByRate(double rTarget)
{
    std::map<int, double> out;
    for (const int rate : mCfg.rateGrid)
        out[rate] = achievedRar(rate, rTarget);
    return out;
}

void SweepSpec::validate(const DatasetConfig& cfg) const
{
    if (rTargets.empty() || rarTargets.empty())
        throw ConfigError("sweep needs at least one r_target and one rar_target");
    for (const double v : rTargets)
        if (!(v >= 0.0 && v <= 1.0))
            throw ConfigError(fmt::format("r_target {} outside [0,1]", v));
    for (const double v : rarTargets)
        if (!(v >= 0.0 && v <= 1.0))
            throw ConfigError(fmt::format("rar_target {} outside [0,1]", v));
    if (!inGrid(cfg, baselineRate))
        throw ConfigError(fmt::format("baseline_rate {} is not in the rate grid", baselineRate));
}

SweepReport runSweep(const MatchProvider& training, const MatchProvider& evaluation,
                     const DatasetConfig& cfg, const SweepSpec& spec, double lambda,
                     AccessLog* log)
{
    spec.validate(cfg);
    const auto model = trainPhase1(training, cfg, lambda);

    std::vector<SelectionResult> selections;
    for (const double r : spec.rTargets) {
        const auto predicted = model.predictedRarByRate(r);
        for (const double target : spec.rarTargets)
            selections.push_back(selectRate(predicted, target));
    }
    if (log)
        log->record("pipeline", "phase1_complete");

    EvaluationCache cache(evaluation, cfg);
    SweepReport report;
    report.segmentCount = model.segments.size();
    std::vector<double> oursDev;
    std::vector<double> baseDev;
    std::size_t idx = 0;
    for (const double r : spec.rTargets) {
        const auto achievedByRate = cache.achievedRarByRate(r);
        SweepRow row{r, 0, 0, 0};
        for (const double target : spec.rarTargets) {
            const auto& sel = selections[idx++];
            const auto oracle = oracleRate(achievedByRate, target);
            SweepCell cell{};
            cell.rTarget = r;
            cell.rarTarget = target;
            cell.chosenRate = sel.chosenRate;
            cell.predictedFeasible = sel.feasible;
            cell.fallbackUsed = sel.fallbackUsed;
            cell.predictedRar = sel.rarByRate.at(sel.chosenRate);
            cell.achievedRar = achievedByRate.at(sel.chosenRate);
            cell.oracleRate = oracle.rate;
            cell.achievableRar = oracle.achievableRar;
            cell.oracleFeasible = oracle.feasible;
            cell.deviation = rarDeviation(cell.achievedRar, cell.achievableRar);
            cell.baselineRate = spec.baselineRate;
            cell.baselineAchievedRar = achievedByRate.at(spec.baselineRate);
            cell.baselineDeviation = rarDeviation(cell.baselineAchievedRar, cell.achievableRar);

            ++row.cells;
            row.oursSuccesses += cell.success() ? 1 : 0;
            row.baselineSuccesses += cell.baselineSuccess() ? 1 : 0;
            oursDev.push_back(cell.deviation);
            baseDev.push_back(cell.baselineDeviation);
            report.cells.push_back(cell);
        }
        report.rows.push_back(row);
    }
    report.madOurs = mad(oursDev);
    report.madBaseline = mad(baseDev);
    return report;
}

SweepReport runSweep(const Scenario& scenario, const DatasetConfig& cfg, const SweepSpec& spec,
                     double lambda, AccessLog* log)
{
    if (!scenario.training || !scenario.evaluation)
        throw ConfigError("sweep needs training and evaluation pairs");
    return runSweep(*scenario.training, *scenario.evaluation, cfg, spec, lambda, log);
}

std::vector<std::string> checkReportInvariants(const SweepReport& report, const DatasetConfig& cfg,
                                               const SweepSpec& spec)
{
    std::vector<std::string> issues;
    const auto fraction = [](double v) { return v >= 0.0 && v <= 1.0; };
    const auto expectedCells = spec.rTargets.size() * spec.rarTargets.size();
    if (report.cells.size() != expectedCells)
        issues.push_back(fmt::format("{} cells, expected {}", report.cells.size(), expectedCells));
    if (report.rows.size() != spec.rTargets.size())
        issues.push_back(fmt::format("{} rows, expected {}", report.rows.size(), spec.rTargets.size()));

    double oursSum = 0.0;
    double baseSum = 0.0;
    for (std::size_t i = 0; i < report.cells.size(); ++i) {
        const auto& c = report.cells[i];
        const auto where = fmt::format("cell ({:.2f}, {:.2f})", c.rTarget, c.rarTarget);
        if (i < expectedCells) {
            const auto r = spec.rTargets[i / spec.rarTargets.size()];
            const auto t = spec.rarTargets[i % spec.rarTargets.size()];
            if (c.rTarget != r || c.rarTarget != t)
                issues.push_back(where + ": out of key order");
        }
        if (!fraction(c.predictedRar) || !fraction(c.achievedRar) || !fraction(c.achievableRar) ||
            !fraction(c.baselineAchievedRar))
            issues.push_back(where + ": RAR outside [0,1]");
        if (!inGrid(cfg, c.chosenRate) || !inGrid(cfg, c.oracleRate) || !inGrid(cfg, c.baselineRate))
            issues.push_back(where + ": rate outside grid");
        if (c.baselineRate != spec.baselineRate)
            issues.push_back(where + ": wrong baseline rate");
        if (c.deviation != c.achievedRar - c.achievableRar ||
            c.baselineDeviation != c.baselineAchievedRar - c.achievableRar)
            issues.push_back(where + ": deviation is not achieved - achievable");
        if (c.predictedFeasible == c.fallbackUsed)
            issues.push_back(where + ": feasible and fallback flags disagree");
        if (c.predictedFeasible && c.predictedRar < c.rarTarget)
            issues.push_back(where + ": feasible selection below RAR target");
        if (c.oracleFeasible && c.achievableRar < c.rarTarget)
            issues.push_back(where + ": feasible oracle below RAR target");
        if (!c.oracleFeasible && c.achievableRar >= c.rarTarget)
            issues.push_back(where + ": infeasible oracle meets RAR target");
        if (c.oracleFeasible && c.achievedRar >= c.rarTarget && c.chosenRate > c.oracleRate)
            issues.push_back(where + ": a sparser rate than the oracle met the target");
        oursSum += std::abs(c.deviation);
        baseSum += std::abs(c.baselineDeviation);
    }

    std::size_t cursor = 0;
    for (const auto& row : report.rows) {
        std::size_t ours = 0;
        std::size_t base = 0;
        for (std::size_t k = 0; k < row.cells && cursor < report.cells.size(); ++k, ++cursor) {
            ours += report.cells[cursor].success() ? 1 : 0;
            base += report.cells[cursor].baselineSuccess() ? 1 : 0;
        }
        if (ours != row.oursSuccesses || base != row.baselineSuccesses)
            issues.push_back(fmt::format("row {:.2f}: success counts inconsistent", row.rTarget));
    }

    if (!report.cells.empty()) {
        const auto n = static_cast<double>(report.cells.size());
        if (std::abs(oursSum / n - report.madOurs) > 1e-12 ||
            std::abs(baseSum / n - report.madBaseline) > 1e-12)
            issues.push_back("MAD does not match the cell deviations");
    }
    return issues;
}

SwapAblation ablationSwap(const Scenario& scenario, const DatasetConfig& cfg, const SweepSpec& spec,
                          double lambda)
{
    if (!scenario.hasSwap())
        throw ConfigError("swap ablation needs the swapped training and evaluation pairs");
    SwapAblation out;
    out.original = runSweep(*scenario.training, *scenario.evaluation, cfg, spec, lambda);
    out.swapped = runSweep(*scenario.swappedTraining, *scenario.swappedEvaluation, cfg, spec, lambda);
    for (std::size_t i = 0; i < out.original.cells.size(); ++i)
        out.deviationDifference.push_back(out.swapped.cells[i].deviation -
                                          out.original.cells[i].deviation);
    return out;
}

std::vector<SegmentLengthRun> ablationSegmentLength(const Scenario& scenario,
                                                    const DatasetConfig& cfg,
                                                    const std::vector<double>& segmentLengths,
                                                    const SweepSpec& spec, double lambda)
{
    if (segmentLengths.empty())
        throw ConfigError("segment-length ablation needs at least one length");
    for (const double d : segmentLengths)
        if (!(d > 0.0))
            throw ConfigError(fmt::format("segment length {} must be positive", d));
    std::vector<SegmentLengthRun> runs;
    for (const double d : segmentLengths) {
        auto local = cfg;
        local.segmentLengthM = d;
        runs.push_back(SegmentLengthRun{d, runSweep(scenario, local, spec, lambda)});
    }
    return runs;
}

std::string sweepCsv(const SweepReport& report)
{
    std::string out = "method,r_target,rar_target,rate_k,predicted_rar,feasible,fallback_used,"
                      "achieved_rar,oracle_rate,achievable_rar,deviation,success\n";
    for (const auto& c : report.cells) {
        out += fmt::format("ours,{:.6f},{:.6f},{},{:.6f},{},{},{:.6f},{},{:.6f},{:.6f},{}\n",
                           c.rTarget, c.rarTarget, c.chosenRate, c.predictedRar,
                           c.predictedFeasible ? 1 : 0, c.fallbackUsed ? 1 : 0, c.achievedRar,
                           c.oracleRate, c.achievableRar, c.deviation, c.success() ? 1 : 0);
        out += fmt::format("baseline,{:.6f},{:.6f},{},,,,{:.6f},{},{:.6f},{:.6f},{}\n", c.rTarget,
                           c.rarTarget, c.baselineRate, c.baselineAchievedRar, c.oracleRate,
                           c.achievableRar, c.baselineDeviation, c.baselineSuccess() ? 1 : 0);
    }
    return out;
}

std::string madCsv(const SweepReport& report)
{
    std::size_t ours = 0;
    std::size_t base = 0;
    for (const auto& c : report.cells) {
        ours += c.success() ? 1 : 0;
        base += c.baselineSuccess() ? 1 : 0;
    }
    std::string out = "method,mad,successes,cells\n";
    out += fmt::format("ours,{:.6f},{},{}\n", report.madOurs, ours, report.cells.size());
    out += fmt::format("baseline,{:.6f},{},{}\n", report.madBaseline, base, report.cells.size());
    return out;
}

std::string deviationsCsv(const SweepReport& report, const SweepSpec& spec)
{
    std::string header = "method,r_target";
    for (const double t : spec.rarTargets)
        header += fmt::format(",rar_{:.6f}", t);
    header += ",success\n";
    std::string out = header;
    for (const bool baseline : {false, true}) {
        std::size_t i = 0;
        for (const auto& row : report.rows) {
            out += fmt::format("{},{:.6f}", baseline ? "baseline" : "ours", row.rTarget);
            for (std::size_t k = 0; k < row.cells; ++k, ++i) {
                const auto& c = report.cells[i];
                out += fmt::format(",{:.6f}", baseline ? c.baselineDeviation : c.deviation);
            }
            out += fmt::format(",{}/{}\n", baseline ? row.baselineSuccesses : row.oursSuccesses,
                               row.cells);
        }
    }
    return out;
}

std::string swapCsv(const SwapAblation& ablation)
{
    std::string out = "r_target,rar_target,original_rate,original_deviation,swapped_rate,"
                      "swapped_deviation,difference\n";
    for (std::size_t i = 0; i < ablation.original.cells.size(); ++i) {
        const auto& a = ablation.original.cells[i];
        const auto& b = ablation.swapped.cells[i];
        out += fmt::format("{:.6f},{:.6f},{},{:.6f},{},{:.6f},{:.6f}\n", a.rTarget, a.rarTarget,
                           a.chosenRate, a.deviation, b.chosenRate, b.deviation,
                           ablation.deviationDifference[i]);
    }
    return out;
}

} // namespace densel
