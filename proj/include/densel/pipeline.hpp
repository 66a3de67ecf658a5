#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "densel/features.hpp"
#include "densel/ingest.hpp"
#include "densel/matching.hpp"
#include "densel/metrics.hpp"
#include "densel/predictor.hpp"
#include "densel/selector.hpp"

namespace densel {

inline constexpr double kDefaultLambda = 1.0;

/* Per-rate outputs of training steps 1-4 on the reference pair. */
struct RateAnalysis
{
    int rateK;
    std::vector<SegmentFeatures> features;
    std::vector<SegmentRecall> recalls;  // ground truth on the reference pair
    std::vector<double> predictions;     // clamped predicted Recall@1 per segment
};

struct Phase1Model
{
    std::vector<Segment> segments;
    std::size_t excludedSegments = 0;
    std::map<int, RatePredictor> predictors;
    std::map<int, RateAnalysis> rates;

    std::map<int, double> predictedRarByRate(double rTarget) const;
};

struct Phase1Result
{
    Phase1Model model;
    SelectionResult selection;
    SampledReference curated;
};

/* Steps 1-4: per-rate matching, features, ground truth, training, prediction. */
Phase1Model trainPhase1(const MatchProvider& training, const DatasetConfig& cfg, double lambda);

/* Steps 5-6 on an already trained model. */
SelectionResult selectFromModel(const Phase1Model& model, const SelectionConfig& sel);

/* Steps 1-7. */
Phase1Result phase1(const MatchProvider& training, const DatasetConfig& cfg,
                    const SelectionConfig& sel, double lambda = kDefaultLambda);
Phase1Result phase1(const Traversal& ref1, const Traversal& ref2, const DatasetConfig& cfg,
                    const SelectionConfig& sel, double lambda = kDefaultLambda);

struct Phase2Result
{
    int rateK;
    std::vector<SegmentRecall> recalls;
    std::size_t excludedSegments = 0;
    double achievedRar;
    double meanRecall;
};

/* Query-time evaluation of a curated reference against the held-out traversal. */
Phase2Result phase2(const MatchProvider& evaluation, const SampledReference& curated,
                    const DatasetConfig& cfg, const SelectionConfig& sel);
Phase2Result phase2(const SampledReference& curated, const Traversal& ref1, const Traversal& qry1,
                    const DatasetConfig& cfg, const SelectionConfig& sel);

/* Achieved per-segment recalls on the evaluation pair, computed once per rate. */
class EvaluationCache
{
public:
    EvaluationCache(const MatchProvider& evaluation, const DatasetConfig& cfg);

    const SegmentRecallResult& recalls(int rateK);
    double achievedRar(int rateK, double rTarget);
    std::map<int, double> achievedRarByRate(double rTarget);
    const std::vector<Segment>& segments();

private:
    const MatchProvider& mEvaluation;
    DatasetConfig mCfg;
    std::vector<Segment> mSegments;
    bool mSegmented = false;
    std::map<int, SegmentRecallResult> mRecalls;
};

struct SweepSpec
{
    std::vector<double> rTargets{0.2, 0.4, 0.6, 0.8, 1.0};
    std::vector<double> rarTargets{0.2, 0.4, 0.6, 0.8, 1.0};
    int baselineRate = 4;

    void validate(const DatasetConfig& cfg) const;
};

struct SweepCell
{
    double rTarget;
    double rarTarget;

    int chosenRate;
    bool predictedFeasible;
    bool fallbackUsed;
    double predictedRar;
    double achievedRar;
    double deviation;

    int baselineRate;
    double baselineAchievedRar;
    double baselineDeviation;

    int oracleRate;
    double achievableRar;
    bool oracleFeasible;

    bool success() const { return deviation >= 0.0; }
    bool baselineSuccess() const { return baselineDeviation >= 0.0; }
};

struct SweepRow
{
    double rTarget;
    std::size_t cells;
    std::size_t oursSuccesses;
    std::size_t baselineSuccesses;
};

struct SweepReport
{
    std::vector<SweepCell> cells; // ordered by (rTarget, rarTarget)
    std::vector<SweepRow> rows;
    double madOurs = 0.0;
    double madBaseline = 0.0;
    std::size_t segmentCount = 0;
};

/*
 * Runs training and selection on the reference pair for every target, then
 * evaluates ours, the fixed baseline and the ground-truth oracle on the
 * evaluation pair. The evaluation pair is not touched until training is done.
 */
SweepReport runSweep(const MatchProvider& training, const MatchProvider& evaluation,
                     const DatasetConfig& cfg, const SweepSpec& spec, double lambda = kDefaultLambda,
                     AccessLog* log = nullptr);
SweepReport runSweep(const Scenario& scenario, const DatasetConfig& cfg, const SweepSpec& spec,
                     double lambda = kDefaultLambda, AccessLog* log = nullptr);

/* Violations of the report's internal invariants; empty when consistent. */
std::vector<std::string> checkReportInvariants(const SweepReport& report, const DatasetConfig& cfg,
                                               const SweepSpec& spec);

struct SwapAblation
{
    SweepReport original;
    SweepReport swapped;
    std::vector<double> deviationDifference; // swapped - original, per cell
};

SwapAblation ablationSwap(const Scenario& scenario, const DatasetConfig& cfg, const SweepSpec& spec,
                          double lambda = kDefaultLambda);

struct SegmentLengthRun
{
    double segmentLengthM;
    SweepReport report;
};

std::vector<SegmentLengthRun> ablationSegmentLength(const Scenario& scenario,
                                                    const DatasetConfig& cfg,
                                                    const std::vector<double>& segmentLengths,
                                                    const SweepSpec& spec,
                                                    double lambda = kDefaultLambda);

std::string sweepCsv(const SweepReport& report);
std::string madCsv(const SweepReport& report);
std::string deviationsCsv(const SweepReport& report, const SweepSpec& spec);
std::string swapCsv(const SwapAblation& ablation);

} // namespace densel
